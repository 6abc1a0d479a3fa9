import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slwlab.experiments import (
    DispersionConfig,
    ExperimentReport,
    FocusingConfig,
    InflationConfig,
    NormsConfig,
    _inflation_point,
    dumps,
    find_t0,
    fit_loglog_slope,
    fmt_float,
    fourier_lower_bound_check,
    inflation_profile,
    run_jobs,
    select_lambda,
)
from slwlab.model import ModelParams, ParameterError
from slwlab.spectral import Field, Grid1D, bump

K0L3 = ModelParams(0, 3)


def test_fit_examples():
    f = fit_loglog_slope([(1, 1), (2, 4), (4, 16)])
    assert f.slope == pytest.approx(2.0) and f.residual == pytest.approx(0.0, abs=1e-12)
    assert fit_loglog_slope([(1, 3), (2, 3), (4, 3)]).slope == pytest.approx(0.0, abs=1e-12)
    assert fit_loglog_slope([(1, 1), (2, 2.83), (4, 8)]).slope == pytest.approx(1.5, abs=0.01)


def test_fit_rejects_bad_input():
    with pytest.raises(ValueError, match="need"):
        fit_loglog_slope([(1, 1), (2, 2)])
    with pytest.raises(ValueError):
        fit_loglog_slope([(1, 1), (2, -2), (4, 3)])
    with pytest.raises(ValueError):
        fit_loglog_slope([(1, 1), (4, 2), (2, 3)])


def test_select_lambda_formula():
    # s_c = 1: lambda = (eps gamma^(5/4))^(4/3), sigma = 5/3
    lam, sigma = select_lambda(K0L3, 0.25, 0.1, 1e-2)
    assert lam == pytest.approx(10 ** (-14 / 3), rel=1e-12)
    assert sigma == pytest.approx(5 / 3)
    lam2, _ = select_lambda(K0L3, 0.25, 0.01, 1e-2)
    assert lam2 / lam == pytest.approx(10 ** (-4 / 3), rel=1e-12)


def test_select_lambda_near_critical():
    with pytest.raises(ParameterError):
        select_lambda(K0L3, 1.0, 0.1, 1e-2)
    with pytest.raises(ParameterError, match="underflows"):
        select_lambda(K0L3, 0.999, 0.1, 1e-2)


@settings(max_examples=30, deadline=None)
@given(st.floats(-1.0, 0.5), st.floats(0.01, 1.0))
def test_sigma_above_one_and_ratio_monotone(s, eps):
    lams = []
    for gamma in (0.1, 0.05, 0.025):
        lam, sigma = select_lambda(K0L3, s, eps, gamma)
        assert sigma > 1
        lams.append(lam / gamma)
    assert lams[0] > lams[1] > lams[2]


def test_find_t0_single_bump():
    g = Grid1D(16.0, 1024)
    r = find_t0(bump(g, 0.0, 1.0), K0L3)
    assert r.t0 == 0.0


def test_find_t0_derivative_oracle():
    phi = inflation_profile(InflationConfig(K0L3, 0.25, 0.5, (0.1, 0.05, 0.025)))
    g = phi.grid
    r = find_t0(phi, K0L3)
    # defocusing damps: d_t^2 A(0) = -int |phi|^2 phi
    oracle = -float(np.sum(np.abs(phi.values) ** 2 * phi.values) * g.dx)
    assert abs(phi.integral()) < 1e-12
    assert r.dA_predicted == pytest.approx(oracle, rel=1e-12)
    assert r.dA_measured == pytest.approx(oracle, rel=0.01)
    assert r.t0 > 0


def test_find_t0_degenerate():
    g = Grid1D(16.0, 1024)
    anti = Field(g, bump(g, 1.5, 1.0).values - bump(g, -1.5, 1.0).values)
    with pytest.raises(ValueError, match="degenerate data"):
        find_t0(anti, K0L3)


def test_fourier_bound_bookkeeping_and_zero_field():
    g = Grid1D(16.0, 256)
    r = fourier_lower_bound_check(Field.zeros(g), 1e-2, 1e-6, K0L3)
    assert r.passed is False
    # lambda^(alpha-1) (gamma/lambda)^(-1) with alpha = 1/2
    assert r.scale == pytest.approx(1e3 * 1e-4)


def test_inflation_scale_model_fourier_constant():
    cfg = InflationConfig(K0L3, 0.25, 0.5, (0.1, 0.05, 0.025), t0_threshold=0.1, data_scale=1e-6)
    row = _inflation_point((cfg, 0.05))
    assert row["fourier_ok"]
    assert row["fourier_constant"] >= 0.1
    assert row["support_growth"] <= row["cone_bound"]


def test_inflation_config_invariants():
    with pytest.raises(ParameterError, match="s_c"):
        InflationConfig(K0L3, 2.0, 0.5, (0.1, 0.05, 0.025))
    with pytest.raises(ParameterError):
        InflationConfig(ModelParams(0, 3), 0.75, 0.5, (0.1, 0.05, 0.025))
    with pytest.raises(ValueError):
        InflationConfig(K0L3, 0.25, 0.5, (0.05, 0.1, 0.025))
    with pytest.raises(ParameterError):
        InflationConfig(ModelParams(1, 1), 0.25, 0.5, (0.1, 0.05, 0.025))


def test_inflation_moment_order_boundary():
    # s - 1 = -1.75: need q > 1.25
    with pytest.raises(ParameterError, match="moment order"):
        InflationConfig(K0L3, -0.75, 0.5, (0.1, 0.05, 0.025), q=1)
    cfg = InflationConfig(K0L3, -0.75, 0.5, (0.1, 0.05, 0.025), q=2, L=32.0)
    phi = inflation_profile(cfg)
    assert math.isfinite(phi.l1_norm())


def test_inflation_profile_unit_norm():
    from slwlab.spectral import SobolevOrder, continuum_sobolev_norm

    cfg = InflationConfig(K0L3, 0.25, 0.5, (0.1, 0.05, 0.025))
    phi = inflation_profile(cfg)
    assert continuum_sobolev_norm(phi, SobolevOrder(-0.75, True)) == pytest.approx(1.0, rel=1e-12)
    assert abs(phi.integral()) < 1e-12


def test_dispersion_config_checks():
    with pytest.raises(ValueError, match="3 points"):
        DispersionConfig(K0L3, (0.1,))
    with pytest.raises(ValueError):
        DispersionConfig(K0L3, (0.05, 0.1, 0.025))


def test_focusing_config_checks():
    with pytest.raises(ParameterError):
        FocusingConfig(K0L3, (0.5, 0.25, 0.125))
    assert FocusingConfig(ModelParams(0, 3, sign="focusing"), (0.5, 0.25, 0.125)).extrapolated
    assert not FocusingConfig(ModelParams(0, 2, sign="focusing"), (0.5, 0.25, 0.125)).extrapolated


def test_norms_config_checks():
    with pytest.raises(ValueError):
        NormsConfig(K0L3, ratio_list=(2.0,))


def test_report_verdict_needs_column():
    rep = ExperimentReport("x", {})
    rep.add_table("t", {"a": [1.0, 2.0]})
    rep.verdict("ok", True, "t.a")
    with pytest.raises(KeyError):
        rep.verdict("bad", True, "t.b")
    assert rep.passed


def test_report_deterministic(tmp_path):
    def make():
        rep = ExperimentReport("x", {"eps": 0.5})
        rep.add_table("t", {"a": [0.1, 1.0, 2 / 3], "flag": [True, False, True]})
        rep.verdict("ok", True, "t.a")
        return rep

    a, b = make(), make()
    assert a.to_json() == b.to_json()
    d = json.loads(a.to_json())
    assert d["tables"]["t"]["a"][2] == 2 / 3
    a.write(tmp_path / "a")
    b.write(tmp_path / "b")
    for name in ("report.json", "tables/t.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_float_formatting_round_trips():
    for x in (0.1, 1 / 3, 1e-300, 2.0, -7.5e12):
        assert float(fmt_float(x)) == x
    assert dumps({"a": 1.0}).strip().replace(" ", "").replace("\n", "") == '{"a":1.0}'


def _square(x):
    return x * x


def test_run_jobs_order_and_jobs_independence():
    items = list(range(7))
    assert run_jobs(_square, items, 1) == run_jobs(_square, items, 3) == [i * i for i in items]


def test_run_jobs_rejects_bad_count():
    with pytest.raises(ValueError):
        run_jobs(_square, [1], 0)

