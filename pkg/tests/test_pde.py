import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slwlab.model import ModelParams
from slwlab.ode import closed_form_k0, ode_field_from_data
from slwlab.pde import (
    InstabilityError,
    SolverConfig,
    WaveState,
    discrepancy,
    discrepancy_vs_ode,
    energy_gamma,
    energy_gamma_m,
    evolve,
    support_radius,
    write_run_log,
)
from slwlab.spectral import Field, Grid1D, SupportError, bump, bump_profile, sobolev_norm

K0L3 = ModelParams(0, 3)


def smooth_bump(g, radius=1.0, power=4):
    return Field(g, bump_profile(g.x / radius) ** power)


def start(data, gamma):
    return WaveState(0.0, Field.zeros(data.grid), data, gamma)


def test_linear_energy_conserved():
    # RK4 damps each mode by O((dt xi)^6) per step, so the bound needs the data resolved at cfl 0.5
    g = Grid1D(64.0, 8192)
    run = evolve(start(smooth_bump(g), 1.0), None, SolverConfig(t_end=10.0, dealias=False))
    e = [energy_gamma(s.u, s.v, 1.0) for s in run.samples]
    assert max(abs(x - e[0]) for x in e) / e[0] < 1e-8


def test_constant_data_reduces_to_ode():
    g = Grid1D(8.0, 64)
    data = Field(g, np.ones(64))
    cfg = SolverConfig(t_end=1.0, sample_times=[1.0], check_guard=False)
    end = evolve(start(data, 0.5), K0L3, cfg).samples[-1]
    ref = closed_form_k0(K0L3, 1.0)
    assert np.max(np.abs(end.u.values - ref)) / ref < 1e-6


def test_sign_equivariance_exact():
    g = Grid1D(8.0, 512)
    d = smooth_bump(g)
    cfg = SolverConfig(t_end=1.0, n_samples=3)
    a = evolve(start(d, 0.5), K0L3, cfg)
    b = evolve(start(-d, 0.5), K0L3, cfg)
    for x, y in zip(a.samples, b.samples):
        assert np.array_equal(x.u.values, -y.u.values)
        assert np.array_equal(x.v.values, -y.v.values)


def test_support_radius_cone():
    g = Grid1D(16.0, 1024)
    run = evolve(start(smooth_bump(g), 0.5), K0L3, SolverConfig(t_end=2.0, n_samples=9, dealias=False))
    r0 = support_radius(run.samples[0])
    assert r0 <= 1.0
    for s in run.samples:
        assert support_radius(s) - r0 <= 0.5 * s.t + 2 * g.dx
    assert support_radius(run.samples[-1]) <= 2.0 + 2 * g.dx


def test_support_radius_guard():
    g = Grid1D(8.0, 64)
    st_ = WaveState(0.0, Field(g, np.ones(64)), Field.zeros(g), 1.0)
    with pytest.raises(SupportError):
        support_radius(st_)
    with pytest.raises(ValueError):
        support_radius(start(smooth_bump(g), 1.0), floor=0.0)


def test_guard_band_enforced_during_run():
    g = Grid1D(8.0, 512)
    with pytest.raises(SupportError):
        evolve(start(smooth_bump(g), 1.0), None, SolverConfig(t_end=3.0, n_samples=4))


def test_fourth_order_in_time():
    g = Grid1D(8.0, 1024)
    d = smooth_bump(g)
    init = start(d, 0.5)

    def run(dt):
        cfg = SolverConfig(t_end=1.0, dt=dt, sample_times=[1.0], dealias=False)
        return evolve(init, K0L3, cfg).samples[-1].u.values

    ref = run(0.000625)
    e1 = np.max(np.abs(run(0.005) - ref))
    e2 = np.max(np.abs(run(0.0025) - ref))
    assert 12 < e1 / e2 < 20


def test_spectral_accuracy_in_space():
    out = []
    for M in (1024, 2048):
        g = Grid1D(8.0, M)
        cfg = SolverConfig(t_end=0.5, dt=0.001, sample_times=[0.5], dealias=False)
        out.append(evolve(start(smooth_bump(g), 0.5), K0L3, cfg).samples[-1].u.values)
    assert np.max(np.abs(out[1][::2] - out[0])) / np.max(np.abs(out[0])) < 1e-8


def test_samples_at_requested_times():
    g = Grid1D(8.0, 1024)
    run = evolve(start(smooth_bump(g), 0.5), K0L3, SolverConfig(t_end=1.0, sample_times=[0.0, 0.3, 1.0], dealias=False))
    assert run.times.tolist() == [0.0, 0.3, 1.0]
    assert run.status == "ok"


def test_focusing_blowup_cap():
    g = Grid1D(8.0, 64)
    data = Field(g, 2.0 * np.ones(64))
    p = ModelParams(0, 2, sign="focusing")
    run = evolve(start(data, 1.0), p, SolverConfig(t_end=1.0, check_guard=False))
    assert run.status == "blowup"
    # v = 2/(1-2t) reaches 1e6 at t = 1/2 - 1e-6; RK4 lags slightly near the singularity
    assert run.t_star == pytest.approx(0.5 - 1e-6, abs=1e-6)


def test_instability_detected():
    g = Grid1D(8.0, 256)
    with pytest.raises(InstabilityError):
        evolve(start(smooth_bump(g), 1.0), None, SolverConfig(t_end=1.0, dt=0.5, dealias=False, check_guard=False))


def test_energy_examples():
    g = Grid1D(8.0, 64)
    c = Field(g, np.full(64, 3.0))
    assert energy_gamma_m(c, Field.zeros(g), 0.7, 2).total == 0.0
    w = Field(g, np.sin(2 * np.pi * g.x / g.L))
    gamma = 0.7
    ref = gamma**2 / 2 * (2 * np.pi / g.L) ** 2 * (g.L / 2)
    assert energy_gamma(w, Field.zeros(g), gamma) == pytest.approx(ref, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 3), st.floats(0.1, 1.0))
def test_energy_m_additive(m, gamma):
    g = Grid1D(8.0, 128)
    w = smooth_bump(g)
    wt = smooth_bump(g, 1.5, 2)
    rep = energy_gamma_m(w, wt, gamma, m)
    assert len(rep.per_order) == m + 1
    assert all(e >= 0 for e in rep.per_order)
    assert rep.total == pytest.approx(sum(rep.per_order))


def test_discrepancy_identical_is_zero():
    g = Grid1D(8.0, 64)
    s = start(smooth_bump(g), 0.5)
    assert discrepancy(s, s.u, s.v, 1) == 0.0


def test_small_gamma_surrogate():
    g = Grid1D(8.0, 1024)
    d = smooth_bump(g)
    run = evolve(start(d, 1e-4), K0L3, SolverConfig(t_end=0.5, n_samples=3))
    fields = [ode_field_from_data(d, s.t, K0L3) for s in run.samples]
    disc = discrepancy_vs_ode(run, fields, 1)
    assert np.max(disc) < 1e-3 * sobolev_norm(d, 1.0)


def test_discrepancy_shape():
    g = Grid1D(8.0, 1024)
    d = smooth_bump(g)
    sups = []
    for gamma in (0.1, 0.05, 0.025):
        run = evolve(start(d, gamma), K0L3, SolverConfig(t_end=1.0, n_samples=5))
        fields = [ode_field_from_data(d, s.t, K0L3) for s in run.samples]
        disc = discrepancy_vs_ode(run, fields, 1)
        assert np.all(np.diff(np.maximum.accumulate(disc)) >= 0)
        sups.append(disc.max())
    assert sups[0] > sups[1] > sups[2]
    slope = np.polyfit(np.log([0.1, 0.05, 0.025]), np.log(sups), 1)[0]
    assert slope >= 0.5


def test_discrepancy_grid_mismatch():
    s = start(smooth_bump(Grid1D(8.0, 64)), 0.5)
    other = Field.zeros(Grid1D(8.0, 128))
    with pytest.raises(ValueError):
        discrepancy(s, other, other, 1)


def test_run_log(tmp_path):
    path = tmp_path / "log.csv"
    write_run_log(path, [0.0, 0.5], [0.0, 1e-3], [0.0, 2e-6], [1.0, 1.25])
    lines = path.read_text().splitlines()
    assert lines[0] == "t,discrepancy,E_gamma_m,support_radius"
    assert [float(x) for x in lines[2].split(",")] == [0.5, 1e-3, 2e-6, 1.25]


def test_wave_state_validation():
    g = Grid1D(8.0, 64)
    with pytest.raises(ValueError):
        WaveState(0.0, Field.zeros(g), Field.zeros(Grid1D(8.0, 128)), 0.5)
    with pytest.raises(ValueError):
        WaveState(0.0, Field.zeros(g), Field.zeros(g), 1.5)
    assert math.isfinite(start(smooth_bump(g), 0.5).t)
