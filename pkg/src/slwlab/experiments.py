"""Small-dispersion scaling, norm inflation and focusing lifespan studies."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .model import ModelParams, ParameterError, Sign, derive_exponents, full_exponents
from .ode import integrate_base, ode_field_from_data, rescale_focusing
from .pde import (
    SolverConfig,
    WaveState,
    discrepancy,
    energy_gamma_m,
    evolve,
    support_radius,
)
from .spectral import (
    Field,
    Grid1D,
    SobolevOrder,
    bump,
    bump_profile,
    continuum_sobolev_norm,
    dtft,
    moment_data,
    plateau_profile,
    predict_data_norm,
    required_moment_order,
    rescale_data,
    scale_two_param,
    sobolev_norm,
)

SCHEMA = 1


# --------------------------------------------------------------------------- reports


@dataclass
class Verdict:
    passed: bool
    column: str  # "table.column" the check is read from
    detail: str = ""


@dataclass
class ExperimentReport:
    name: str
    config: dict
    tables: dict[str, dict[str, list]] = field(default_factory=dict)
    verdicts: dict[str, Verdict] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts.values())

    def add_table(self, name: str, columns: dict[str, Sequence]) -> None:
        lengths = {len(v) for v in columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"table {name!r} has ragged columns")
        self.tables[name] = {k: [_plain(x) for x in v] for k, v in columns.items()}

    def verdict(self, name: str, passed: bool, column: str, detail: str = "") -> None:
        table, _, col = column.partition(".")
        if table not in self.tables or col not in self.tables[table]:
            raise KeyError(f"verdict {name!r} references missing column {column!r}")
        self.verdicts[name] = Verdict(bool(passed), column, detail)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "name": self.name,
            "config": self.config,
            "tables": self.tables,
            "verdicts": {k: asdict(v) for k, v in self.verdicts.items()},
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return dumps(self.to_dict()) + "\n"

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        (out / "tables").mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json(), newline="\n")
        for name, cols in self.tables.items():
            write_table_csv(out / "tables" / f"{name}.csv", cols)


def _plain(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    return x


def fmt_float(x: float) -> str:
    """17 significant digits, locale independent; nan/inf spelled out."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def dumps(obj, indent: int = 0) -> str:
    """Deterministic JSON with floats at 17 significant digits (non-finite as strings)."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_quote(str(k))}: {dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent + 1) for v in obj) + "\n" + end + "]"
    obj = _plain(obj)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        s = fmt_float(obj)
        if not math.isfinite(obj):
            return _quote(s)
        return s if any(ch in s for ch in ".e") else s + ".0"
    return _quote(str(obj))


def _quote(s: str) -> str:
    import json

    return json.dumps(s, ensure_ascii=True)


def write_table_csv(path: str | Path, cols: dict[str, list]) -> None:
    names = list(cols)
    lines = [",".join(names)]
    n = len(cols[names[0]]) if names else 0
    for i in range(n):
        row = []
        for c in names:
            v = cols[c][i]
            if isinstance(v, bool):
                row.append("true" if v else "false")
            elif isinstance(v, float):
                row.append(fmt_float(v))
            else:
                row.append(str(v))
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def run_jobs(fn: Callable, items: Sequence, jobs: int = 1) -> list:
    """Map fn over items, optionally in worker processes; output order follows items."""
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    if jobs == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------- fits


class LogLogFit(NamedTuple):
    slope: float
    intercept: float
    residual: float


def fit_loglog_slope(points: Sequence[tuple[float, float]]) -> LogLogFit:
    """Least-squares line through (log x, log y); residual is the max |log deviation|."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise ValueError(f"need >= 3 points to fit, got {len(pts)}")
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs positive x and y")
    dx = np.diff(x)
    if not (np.all(dx > 0) or np.all(dx < 0)):
        raise ValueError("x must be strictly monotone")
    lx, ly = np.log(x), np.log(y)
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = float(np.max(np.abs(ly - (slope * lx + intercept))))
    return LogLogFit(float(slope), float(intercept), resid)


def _check_decreasing(vals: Sequence[float], what: str) -> None:
    v = np.asarray(vals, dtype=float)
    if v.size < 3:
        raise ValueError(f"need >= 3 points to fit, got {v.size} {what} value(s)")
    if np.any(np.diff(v) >= 0):
        raise ValueError(f"{what} list must be strictly decreasing, got {list(vals)}")
    if np.any(v <= 0) or np.any(v > 1):
        raise ValueError(f"{what} values must lie in (0, 1]")


# --------------------------------------------------------------------------- lambda, t0


class LambdaChoice(NamedTuple):
    lam: float
    sigma: float


def select_lambda(params: ModelParams, s: float, epsilon: float, gamma: float) -> LambdaChoice:
    """lambda = (eps gamma^((n+2)/2 - s))^(1/(s_c - s)), so the data norm is ~ eps."""
    ex = derive_exponents(params)
    n = params.n
    if not s < ex.s_c:
        raise ParameterError(f"need s < s_c = {ex.s_c:.6g}, got s = {s}")
    if not (0 < epsilon <= 1 and 0 < gamma <= 1):
        raise ParameterError("epsilon and gamma must lie in (0, 1]")
    gap = ex.s_c - s
    lam = (epsilon * gamma ** ((n + 2) / 2 - s)) ** (1 / gap)
    sigma = ((n + 2) / 2 - s) / gap
    if not lam > 0:
        raise ParameterError(f"lambda underflows for s = {s} this close to s_c = {ex.s_c:.6g}")
    if not sigma > 1:
        raise ParameterError(f"sigma = {sigma:.6g} <= 1: lambda is not small relative to gamma")
    if lam > gamma:
        raise ParameterError(
            f"lambda = {lam:.6g} > gamma = {gamma:.6g}; use a smaller gamma or a larger s_c - s gap"
        )
    return LambdaChoice(lam, sigma)


@dataclass(frozen=True)
class T0Result:
    t0: float
    A_t0: float
    dA_measured: float  # (k+1)-st time derivative of A at 0, finite differences
    dA_predicted: float  # sign k! int |phi|^(k+l-1) phi
    threshold: float


def _A(data: Field, t: float, params: ModelParams, base) -> float:
    _, v = ode_field_from_data(data, t, params, base)
    return v.integral()


def default_t0_times(data: Field, params: ModelParams, per_decade: int = 20) -> np.ndarray:
    """0 followed by a geometric grid covering natural times 1e-4 .. 1e3 of the tallest point."""
    amp = float(np.max(np.abs(data.values)))
    if amp == 0:
        raise ValueError("degenerate data: zero field")
    tau = amp ** ((params.k + params.l - 1) / (params.k + 1))
    return np.concatenate([[0.0], np.logspace(-4, 3, 7 * per_decade + 1) / tau])


def find_t0(
    data: Field,
    params: ModelParams,
    N: int | None = None,
    threshold: float | None = None,
    times: Sequence[float] | None = None,
) -> T0Result:
    """First sampled t0 with |A(t0)| >= threshold, A(t) = int d_t phi0(t, x) dx.

    ``data`` is phi itself, or psi when N is given (phi = psi^(N(k+1))).
    ``threshold`` defaults to 1e-3 ||phi||_L1.
    """
    if N is not None:
        if np.any(data.values < 0):
            raise ValueError("psi must be nonnegative")
        data = Field(data.grid, data.values ** (N * (params.k + 1)))
    k, l = params.k, params.l
    l1 = data.l1_norm()
    if threshold is None:
        threshold = 1e-3 * l1
    ts = default_t0_times(data, params) if times is None else np.asarray(times, dtype=float)
    base = integrate_base(params, float(np.max(ts)) * float(np.max(np.abs(data.values))) ** ((k + l - 1) / (k + 1)) * 1.01 + 1e-3)
    predicted = params.sign_factor * math.factorial(int(k)) if float(k).is_integer() else params.sign_factor * math.gamma(k + 1)
    predicted *= float(np.sum(np.abs(data.values) ** (k + l - 1) * data.values) * data.grid.dx)
    # finite-difference (k+1)-st derivative at 0 with one Richardson step
    tau = float(np.max(np.abs(data.values))) ** ((k + l - 1) / (k + 1))
    h = 1e-3 / tau
    A0 = _A(data, 0.0, params, base)
    kk = int(math.ceil(k)) + 1
    fac = math.factorial(kk)
    d1 = fac * (_A(data, h, params, base) - A0) / h**kk
    d2 = fac * (_A(data, h / 2, params, base) - A0) / (h / 2) ** kk
    measured = 2 * d2 - d1
    for t in ts:
        a = _A(data, float(t), params, base)
        if abs(a) >= threshold:
            return T0Result(float(t), a, measured, predicted, threshold)
    raise ValueError(
        f"degenerate data: |A(t)| stays below {threshold:.3g} up to t = {float(np.max(ts)):.3g}"
    )


# --------------------------------------------------------------------------- Fourier bound


class FourierBound(NamedTuple):
    passed: bool
    constant: float
    scale: float  # lambda^(alpha-1) (gamma/lambda)^(-n)


def fourier_lower_bound_check(
    du: Field, gamma: float, lam: float, params: ModelParams, c_probe: float = 0.1, n_probe: int = 65
) -> FourierBound:
    """min over |xi| <= c (gamma/lambda) of |F(d_t u)(xi)| against c lambda^(alpha-1) (gamma/lambda)^(-n).

    The achieved constant is that minimum divided by lambda^(alpha-1) (gamma/lambda)^(-n).
    """
    alpha = derive_exponents(params).alpha
    scale = lam ** (alpha - 1) * (gamma / lam) ** (-params.n)
    xi = np.linspace(0.0, c_probe * gamma / lam, n_probe)
    low = float(np.min(np.abs(dtft(du, xi))))
    const = low / scale
    return FourierBound(bool(const >= c_probe), const, scale)


# --------------------------------------------------------------------------- inflation


@dataclass(frozen=True)
class InflationConfig:
    params: ModelParams
    s: float
    epsilon: float
    gamma_list: tuple[float, ...]
    q: int | None = None  # moment order, default: smallest admissible
    t0_threshold: float = 1e-3  # fraction of ||phi||_L1
    data_scale: float = 1.0  # length scale mu of the fixed data profile
    L: float = 16.0
    M: int = 4096
    spacing: float = 3.0
    dilation: float = 2.0
    c_probe: float = 0.1
    min_final_ratio: float = 5.0
    exponent_tol: float = 0.2
    norm_tol: float = 0.02

    def __post_init__(self):
        object.__setattr__(self, "gamma_list", tuple(float(g) for g in self.gamma_list))
        p, n = self.params, self.params.n
        ex = derive_exponents(p)
        if n != 1:
            raise ParameterError("inflation runs are implemented for n = 1 only")
        if not self.s < ex.s_c:
            raise ParameterError(f"need s < s_c = {ex.s_c:.6g}, got s = {self.s}")
        if self.s > (2 - n) / 2:
            raise ParameterError(f"need s <= (2-n)/2 = {(2 - n) / 2}, got s = {self.s}")
        odd = float(p.k).is_integer() and float(p.l).is_integer() and int(p.k + p.l) % 2 == 1
        if not (odd or p.l >= p.k + 1):
            raise ParameterError("need k + l odd or l >= k + 1")
        if not 0 < self.epsilon <= 1:
            raise ParameterError("epsilon must lie in (0, 1]")
        _check_decreasing(self.gamma_list, "gamma")
        if self.q is not None and self.q < self.q_min:
            raise ParameterError(
                f"moment order q={self.q} too small: need q > {-(self.s - 1) - n / 2}"
            )
        if not self.data_scale > 0:
            raise ParameterError("data_scale must be positive")

    @property
    def q_min(self) -> int:
        return required_moment_order(self.s - 1, self.params.n)

    @property
    def q_used(self) -> int:
        return self.q_min if self.q is None else self.q


def inflation_profile(cfg: InflationConfig) -> Field:
    """Unit-scale profile with q vanishing moments, int |phi|^(k+l-1) phi != 0, unit H-dot^(s-1) norm."""
    g = Grid1D(cfg.L, cfg.M)
    q = cfg.q_used
    prof = lambda x: bump_profile(x) ** 4  # noqa: E731
    dil = [cfg.dilation**j for j in range(q + 1)]
    psi = moment_data(g, prof, q, cfg.spacing, dilations=dil, support=(-1.0, 1.0))
    p = cfg.params
    odd_moment = float(np.sum(np.abs(psi.values) ** (p.k + p.l - 1) * psi.values) * g.dx)
    if abs(odd_moment) < 1e-8 * float(np.sum(np.abs(psi.values) ** (p.k + p.l))) * g.dx:
        raise ValueError("degenerate data: int |phi|^(k+l-1) phi vanishes")
    return psi.scale(1 / continuum_sobolev_norm(psi, SobolevOrder(cfg.s - 1, True)))


def _inflation_point(job) -> dict:
    cfg, gamma = job
    p = cfg.params
    ex = derive_exponents(p)
    mu = cfg.data_scale
    gap = ex.s_c - cfg.s
    # Data of length scale mu is evolved at unit scale through the exact symmetry
    # Phi -> mu^alpha Phi(t/mu, x/mu): unit profile times mu^-(s_c - s).
    psi = inflation_profile(cfg).scale(mu ** (-gap))
    g = psi.grid
    t0r = find_t0(psi, p, threshold=cfg.t0_threshold * psi.l1_norm())
    lam, sigma = select_lambda(p, cfg.s, cfg.epsilon, gamma)
    init = WaveState(0.0, Field.zeros(g), psi, gamma)
    if t0r.t0 > 0:
        run = evolve(init, p, SolverConfig(t_end=t0r.t0, sample_times=[0.0, t0r.t0]))
        end = run.samples[-1]
        n_steps = run.n_steps
    else:
        end = init
        n_steps = 0
    # back to the data scale mu
    amp_u, amp_v = mu**ex.alpha, mu ** (ex.alpha - 1)
    gm = g.scaled(mu)
    phi = Field(gm, amp_v * psi.values)
    u_mu, v_mu = Field(gm, amp_u * end.u.values), Field(gm, amp_v * end.v.values)
    # (gamma, lambda) rescaling, exact on the relabelled grid
    _, du = scale_two_param(u_mu, v_mu, gamma, lam, p)
    data = rescale_data(phi, gamma, lam, p)
    order = SobolevOrder(cfg.s - 1)
    out_norm = continuum_sobolev_norm(du, order)
    data_norm = continuum_sobolev_norm(data, order)
    pred = predict_data_norm(p, cfg.s, gamma, lam, cfg.q_used)
    fb = fourier_lower_bound_check(du, gamma, lam, p, cfg.c_probe)
    r0 = support_radius(init)
    r1 = support_radius(end)
    return {
        "gamma": gamma,
        "lambda": lam,
        "sigma": sigma,
        "gamma_over_lambda": gamma / lam,
        "t0": mu * t0r.t0,
        "A_t0": t0r.A_t0 * mu ** (ex.alpha - 1) * mu,
        "dA_measured": t0r.dA_measured,
        "dA_predicted": t0r.dA_predicted,
        "data_norm": data_norm,
        "predicted_data_norm": pred,
        "data_norm_ratio": data_norm / pred,
        "output_norm": out_norm,
        "inflation_ratio": out_norm / data_norm,
        "fourier_constant": fb.constant,
        "fourier_ok": fb.passed,
        "support_growth": r1 - r0,
        "cone_bound": gamma * t0r.t0 + 2 * g.dx,
        "n_steps": n_steps,
    }


def inflation_run(cfg: InflationConfig, jobs: int = 1) -> ExperimentReport:
    """Inflation ratio ||d_t u(lambda t0)||_{H^(s-1)} / ||d_t u(0)||_{H^(s-1)} along the gamma sweep."""
    rows = []
    for gamma, row in zip(cfg.gamma_list, run_jobs(_inflation_point, [(cfg, g) for g in cfg.gamma_list], jobs)):
        rows.append(row)
    cols = {key: [r[key] for r in rows] for key in rows[0]}
    n = cfg.params.n
    target = 1 - n / 2 - cfg.s
    fit = fit_loglog_slope(list(zip(cols["gamma_over_lambda"], cols["output_norm"])))
    rep = ExperimentReport("inflate", inflation_config_dict(cfg))
    rep.add_table("sweep", cols)
    rep.add_table(
        "fit",
        {
            "quantity": ["output_norm_vs_gamma_over_lambda"],
            "slope": [fit.slope],
            "target": [target],
            "residual": [fit.residual],
        },
    )
    ratios = np.array(cols["inflation_ratio"])
    dn = np.array(cols["data_norm_ratio"])
    rep.verdict("ratio_increasing", bool(np.all(np.diff(ratios) > 0)), "sweep.inflation_ratio")
    rep.verdict(
        "final_ratio",
        ratios[-1] >= cfg.min_final_ratio,
        "sweep.inflation_ratio",
        f"final {ratios[-1]:.6g} vs required {cfg.min_final_ratio}",
    )
    rep.verdict(
        "exponent",
        abs(fit.slope - target) <= cfg.exponent_tol * abs(target),
        "fit.slope",
        f"fitted {fit.slope:.6g} vs {target:.6g} +/- {cfg.exponent_tol:.0%}",
    )
    rep.verdict(
        "data_norm_identity",
        float(np.max(dn) / np.min(dn) - 1) <= cfg.norm_tol,
        "sweep.data_norm_ratio",
    )
    rep.verdict("fourier_bound", all(cols["fourier_ok"]), "sweep.fourier_ok")
    rep.verdict(
        "finite_speed",
        all(a <= b for a, b in zip(cols["support_growth"], cols["cone_bound"])),
        "sweep.support_growth",
    )
    rep.metadata = {"q": cfg.q_used, "grid": {"L": cfg.L, "M": cfg.M}, "max_ratio": float(ratios.max())}
    return rep


def inflation_config_dict(cfg: InflationConfig) -> dict:
    d = asdict(cfg)
    d["params"] = params_dict(cfg.params)
    d["gamma_list"] = list(cfg.gamma_list)
    return d


def params_dict(p: ModelParams) -> dict:
    return {"k": p.k, "l": p.l, "n": p.n, "sign": p.sign.value}


# --------------------------------------------------------------------------- small dispersion


@dataclass(frozen=True)
class DispersionConfig:
    params: ModelParams
    gamma_list: tuple[float, ...]
    T: float = 1.0
    m: int | None = None
    L: float = 8.0
    M: int = 4096
    radius: float = 1.0
    n_samples: int = 11
    min_slope: float = 0.45

    def __post_init__(self):
        object.__setattr__(self, "gamma_list", tuple(float(g) for g in self.gamma_list))
        _check_decreasing(self.gamma_list, "gamma")
        if self.T <= 0:
            raise ParameterError("T must be positive")
        if self.params.focusing:
            raise ParameterError("the small-dispersion study uses the defocusing (global) branch")
        ex = full_exponents(self.params)
        if self.m is not None and not (ex.m <= self.m <= ex.m0):
            raise ParameterError(f"m must lie in [{ex.m}, {ex.m0}], got {self.m}")

    @property
    def exponents(self):
        return full_exponents(self.params)

    @property
    def m_used(self) -> int:
        return self.exponents.m if self.m is None else self.m


def dispersion_data(cfg: DispersionConfig) -> Field:
    """psi^(N(k+1)) for a unit bump psi."""
    g = Grid1D(cfg.L, cfg.M)
    psi = bump(g, 0.0, cfg.radius)
    N = cfg.exponents.N
    return Field(g, psi.values ** (N * (cfg.params.k + 1)))


def _dispersion_point(job) -> dict:
    cfg, gamma = job
    p = cfg.params
    data = dispersion_data(cfg)
    g = data.grid
    times = np.linspace(0.0, cfg.T, cfg.n_samples)
    run = evolve(
        WaveState(0.0, Field.zeros(g), data, gamma), p, SolverConfig(t_end=cfg.T, sample_times=times)
    )
    tmax = cfg.T * float(np.max(data.values)) ** ((p.k + p.l - 1) / (p.k + 1))
    base = integrate_base(p, tmax * 1.01 + 1e-3)
    disc, energy, radius = [], [], []
    for st in run.samples:
        u0, v0 = ode_field_from_data(data, st.t, p, base)
        disc.append(discrepancy(st, u0, v0, cfg.m_used))
        energy.append(energy_gamma_m(st.u - u0, st.v - v0, gamma, cfg.m_used).total)
        radius.append(support_radius(st))
    growth = [r - radius[0] for r in radius]
    cone_ok = all(gr <= gamma * t + 2 * g.dx for gr, t in zip(growth, times))
    return {
        "gamma": gamma,
        "sup_discrepancy": max(disc),
        "sup_energy": max(energy),
        "max_support_growth": max(growth),
        "cone_bound": gamma * cfg.T + 2 * g.dx,
        "cone_ok": cone_ok,
        "n_steps": run.n_steps,
        "_log": (list(times), disc, energy, radius),
    }


def dispersion_scaling_study(cfg: DispersionConfig, jobs: int = 1) -> ExperimentReport:
    """sup_{t <= T} ||w||_{H^(m+1)} + ||w_t||_{H^m}, w = PDE - ODE field, against gamma."""
    rows = run_jobs(_dispersion_point, [(cfg, g) for g in cfg.gamma_list], jobs)
    rep = ExperimentReport("dispersion", dispersion_config_dict(cfg))
    keys = [k for k in rows[0] if not k.startswith("_")]
    rep.add_table("sweep", {k: [r[k] for r in rows] for k in keys})
    for r in rows:
        t, d, e, rad = r["_log"]
        rep.add_table(
            f"log_gamma_{r['gamma']:.6g}",
            {"t": t, "discrepancy": d, "E_gamma_m": e, "support_radius": rad},
        )
    fit = fit_loglog_slope([(r["gamma"], r["sup_discrepancy"]) for r in rows])
    rep.add_table(
        "fit", {"quantity": ["sup_discrepancy_vs_gamma"], "slope": [fit.slope], "residual": [fit.residual]}
    )
    rep.verdict(
        "slope",
        fit.slope >= cfg.min_slope,
        "fit.slope",
        f"fitted {fit.slope:.6g} vs >= {cfg.min_slope}",
    )
    rep.verdict("finite_speed", all(r["cone_ok"] for r in rows), "sweep.cone_ok")
    ex = cfg.exponents
    rep.metadata = {"m": cfg.m_used, "N": ex.N, "m0": ex.m0, "grid": {"L": cfg.L, "M": cfg.M}}
    return rep


def dispersion_config_dict(cfg: DispersionConfig) -> dict:
    d = asdict(cfg)
    d["params"] = params_dict(cfg.params)
    d["gamma_list"] = list(cfg.gamma_list)
    return d


# --------------------------------------------------------------------------- norm laws


@dataclass(frozen=True)
class NormsConfig:
    params: ModelParams
    s_list: tuple[float, ...] = (-1.0, -0.5, 0.0, 0.5, 1.0)
    a_list: tuple[float, ...] = (2.0, 4.0)
    L: float = 256.0
    M: int = 2**14
    dilation_tol: float = 5e-3
    parseval_tol: float = 1e-10
    data_s_list: tuple[float, ...] = (0.25, -0.75)
    gamma: float = 0.1
    ratio_list: tuple[float, ...] = (1e-2, 1e-3)  # lambda / gamma
    data_tol: float = 0.02

    def __post_init__(self):
        for name in ("s_list", "a_list", "data_s_list", "ratio_list"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if any(a <= 0 for a in self.a_list):
            raise ParameterError("dilations must be positive")
        if any(not 0 < r <= 1 for r in self.ratio_list):
            raise ParameterError("lambda/gamma ratios must lie in (0, 1]")
        if not 0 < self.gamma <= 1:
            raise ParameterError("gamma must lie in (0, 1]")
        ex = derive_exponents(self.params)
        for s in self.data_s_list:
            if not s < ex.s_c:
                raise ParameterError(f"need s < s_c = {ex.s_c:.6g}, got s = {s}")


def dilation_test_function(grid: Grid1D, a: float = 1.0) -> Field:
    """beta(x / a) for a bump with two vanishing moments.

    Two moments keep |beta^|^2 |xi|^(2s) vanishing at xi = 0 down to s = -1,
    so dropping the zero mode costs nothing.
    """
    return moment_data(grid, lambda x: bump_profile(x / a), 2, 2.5 * a, support=(-a, a))


def norms_study(cfg: NormsConfig) -> ExperimentReport:
    """Dilation covariance of H-dot^s, Parseval, and the rescaled-data norm law."""
    g = Grid1D(cfg.L, cfg.M)
    beta1 = dilation_test_function(g)
    rows = {"s": [], "a": [], "measured_ratio": [], "predicted_ratio": [], "rel_err": []}
    for s in cfg.s_list:
        n1 = sobolev_norm(beta1, SobolevOrder(s, True))
        for a in cfg.a_list:
            r = sobolev_norm(dilation_test_function(g, a), SobolevOrder(s, True)) / n1
            pred = a ** (0.5 - s)
            rows["s"].append(s)
            rows["a"].append(a)
            rows["measured_ratio"].append(r)
            rows["predicted_ratio"].append(pred)
            rows["rel_err"].append(abs(r / pred - 1))
    gauss = Field(g, np.exp(-(g.x**2)))
    quad_l2 = math.sqrt(float(np.sum(gauss.values**2)) * g.dx)
    quad_l2_beta = math.sqrt(float(np.sum(beta1.values**2)) * g.dx)
    parseval = {
        "field": ["gaussian", "beta_zero_mean"],
        "norm_order0": [sobolev_norm(gauss, 0.0), sobolev_norm(beta1, SobolevOrder(0.0, True))],
        "quadrature_l2": [quad_l2, quad_l2_beta],
    }
    parseval["rel_err"] = [abs(a / b - 1) for a, b in zip(parseval["norm_order0"], parseval["quadrature_l2"])]
    # data-norm law: ||lambda^-(k+1)/(k+l-1) phi(gamma x / lambda)||_{H^(s-1)} against the prediction
    p = cfg.params
    data = {"s": [], "q": [], "lambda_over_gamma": [], "measured": [], "predicted": [], "ratio": []}
    law_spread = {}
    gd = Grid1D(32.0, 4096)
    for s in cfg.data_s_list:
        q = max(1, required_moment_order(s - 1, p.n))
        phi = moment_data(gd, bump(gd, -4.0, 1.0), q, 2.5)
        ratios = []
        for rr in cfg.ratio_list:
            lam = rr * cfg.gamma
            meas = continuum_sobolev_norm(rescale_data(phi, cfg.gamma, lam, p), SobolevOrder(s - 1))
            pred = predict_data_norm(p, s, cfg.gamma, lam, q)
            for key, val in zip(data, (s, q, rr, meas, pred, meas / pred)):
                data[key].append(val)
            ratios.append(meas / pred)
        law_spread[s] = max(ratios) / min(ratios) - 1
    data_spread = [law_spread[s] for s in data["s"]]
    data["spread"] = data_spread
    rep = ExperimentReport("norms", norms_config_dict(cfg))
    rep.add_table("dilation", rows)
    rep.add_table("parseval", parseval)
    rep.add_table("data_norm_law", data)
    rep.verdict("dilation_law", max(rows["rel_err"]) <= cfg.dilation_tol, "dilation.rel_err")
    rep.verdict("parseval", max(parseval["rel_err"]) <= cfg.parseval_tol, "parseval.rel_err")
    rep.verdict("data_norm_law", max(data_spread) <= cfg.data_tol, "data_norm_law.spread")
    rep.metadata = {"grid": {"L": cfg.L, "M": cfg.M}, "data_grid": {"L": gd.L, "M": gd.M}}
    return rep


def norms_config_dict(cfg: NormsConfig) -> dict:
    d = asdict(cfg)
    d["params"] = params_dict(cfg.params)
    for name in ("s_list", "a_list", "data_s_list", "ratio_list"):
        d[name] = list(getattr(cfg, name))
    return d


# --------------------------------------------------------------------------- focusing lifespan


@dataclass(frozen=True)
class FocusingConfig:
    params: ModelParams
    a_list: tuple[float, ...]
    s_list: tuple[float, ...] = (0.0, 0.25)
    d: float = 0.25
    transition: float = 0.5  # plateau falls from 1 to 0 over this width
    side_radius: float = 3.0
    side_gap: float = 0.5
    L_over_a: float = 32.0
    M: int = 4096
    match_fraction: float = 0.8
    match_tol: float = 1e-4
    t_tol: float = 0.02
    slope_tol: float = 0.02
    n_proxy: int = 8
    # truncating the spectrum of v|v| leaves Gibbs tails that reach the guard band
    dealias: bool = False

    def __post_init__(self):
        object.__setattr__(self, "a_list", tuple(float(a) for a in self.a_list))
        object.__setattr__(self, "s_list", tuple(float(s) for s in self.s_list))
        if not self.params.focusing:
            raise ParameterError("the lifespan study needs the focusing sign")
        if self.params.n != 1:
            raise ParameterError("the lifespan study is implemented for n = 1")
        a = np.asarray(self.a_list)
        if a.size < 3:
            raise ValueError(f"need >= 3 points to fit, got {a.size} a value(s)")
        if np.any(a <= 0) or np.any(np.diff(a) >= 0):
            raise ValueError("a list must be positive and strictly decreasing")
        ex = derive_exponents(self.params)
        for s in self.s_list:
            if not s < ex.s_c:
                raise ParameterError(f"need s < s_c = {ex.s_c:.6g}, got s = {s}")
        if not 0 < self.match_fraction < 1:
            raise ValueError("match_fraction must lie in (0, 1)")

    @property
    def extrapolated(self) -> bool:
        return self.params.l != 2


def focusing_profile(cfg: FocusingConfig, grid: Grid1D) -> Field:
    """phi = 1 on B_(1+d), plus two negative side bumps cancelling the mean (one vanishing moment)."""
    r_in = 1 + cfg.d
    r_out = r_in + cfg.transition
    top = plateau_profile(grid.x, r_in, r_out)
    c = r_out + cfg.side_gap + cfg.side_radius
    side = bump_profile((grid.x - c) / cfg.side_radius) + bump_profile((grid.x + c) / cfg.side_radius)
    vals = top - side * (np.sum(top) / np.sum(side))
    return Field(grid, vals)


def _focusing_point(job) -> dict:
    cfg, a = job
    p = cfg.params
    base_grid = Grid1D(cfg.L_over_a, cfg.M)
    phi = focusing_profile(cfg, base_grid)
    g = base_grid.scaled(a)
    base = integrate_base(p, 1e6)
    T = base.T_est
    data = Field(g, (T / a) * phi.values)
    t_match = cfg.match_fraction * a
    proxy_t = list(np.linspace(0.0, t_match, cfg.n_proxy))
    run = evolve(
        WaveState(0.0, Field.zeros(g), data, 1.0),
        p,
        SolverConfig(
            t_end=2 * a, sample_times=sorted(set(proxy_t + [t_match, 2 * a])), dealias=cfg.dealias
        ),
    )
    samples = {round(st.t / a, 12): st for st in run.samples}
    st = samples[round(cfg.match_fraction, 12)]
    ua = rescale_focusing(base, a, times=np.array([t_match]))
    u_exact = float(ua.u[0])
    inside = np.abs(g.x) <= (1 + cfg.d) * a - t_match - 2 * g.dx
    match_err = float(np.max(np.abs(st.u.values[inside] - u_exact)) / abs(u_exact))
    r0 = support_radius(run.samples[0])
    growth = max(support_radius(s) - r0 - s.t for s in run.samples)
    row = {
        "a": a,
        "t_star": run.t_star if run.t_star is not None else math.inf,
        "t_star_over_a": (run.t_star / a) if run.t_star is not None else math.inf,
        "interior_u_pde": float(np.mean(st.u.values[inside])),
        "interior_u_exact": u_exact,
        "match_rel_err": match_err,
        "cone_excess": growth,
        "cone_slack": 2 * g.dx,
        "status": run.status,
    }
    order_hom = {s: SobolevOrder(s - 1, True) for s in cfg.s_list}
    for s in cfg.s_list:
        row[f"data_norm_s{s:g}"] = continuum_sobolev_norm(data, order_hom[s])
    # localized norm proxy ||u(t) h(x / ((1+d)a - t))||_{H-dot^s}
    proxy = {s: [] for s in cfg.s_list}
    for t in proxy_t:
        sm = samples[round(t / a, 12)]
        cut = bump_profile(g.x / ((1 + cfg.d) * a - t))
        loc = Field(g, sm.u.values * cut)
        for s in cfg.s_list:
            proxy[s].append(sobolev_norm(loc, SobolevOrder(s, True)) if np.any(loc.values) else 0.0)
    row["_proxy"] = (proxy_t, proxy)
    return row


def focusing_lifespan_study(cfg: FocusingConfig, jobs: int = 1) -> ExperimentReport:
    """Blow-up time, interior ODE match and data-norm scaling for data (0, (T/a) phi(x/a))."""
    rows = run_jobs(_focusing_point, [(cfg, a) for a in cfg.a_list], jobs)
    rep = ExperimentReport("focusing", focusing_config_dict(cfg))
    keys = [k for k in rows[0] if not k.startswith("_")]
    rep.add_table("sweep", {k: [r[k] for r in rows] for k in keys})
    for r in rows:
        t, proxy = r["_proxy"]
        cols = {"t": t}
        for s in cfg.s_list:
            cols[f"localized_norm_s{s:g}"] = proxy[s]
        rep.add_table(f"proxy_a_{r['a']:.6g}", cols)
    slopes, targets = [], []
    for s in cfg.s_list:
        fit = fit_loglog_slope([(r["a"], r[f"data_norm_s{s:g}"]) for r in rows])
        slopes.append(fit.slope)
        targets.append(cfg.params.n / 2 - s)
    rep.add_table("fit", {"s": list(cfg.s_list), "data_norm_slope": slopes, "target": targets})
    tstar = [r["t_star"] for r in rows]
    rep.verdict(
        "lifespan",
        all(ts <= a * (1 + cfg.t_tol) for ts, a in zip(tstar, cfg.a_list)),
        "sweep.t_star",
    )
    rep.verdict(
        "interior_match",
        all(r["match_rel_err"] <= cfg.match_tol for r in rows),
        "sweep.match_rel_err",
    )
    rep.verdict(
        "data_norm_slope",
        all(abs(sl - tg) <= cfg.slope_tol * abs(tg) for sl, tg in zip(slopes, targets)),
        "fit.data_norm_slope",
    )
    # a decreases along the list, so t* must not increase
    rep.verdict("monotone_lifespan", all(np.diff(tstar) <= 0), "sweep.t_star")
    rep.verdict(
        "finite_speed",
        all(r["cone_excess"] <= r["cone_slack"] for r in rows),
        "sweep.cone_excess",
    )
    rep.metadata = {
        "extrapolated": cfg.extrapolated,
        "note": "l != 2: outside the closed-form range, reported as extrapolation" if cfg.extrapolated else "",
    }
    return rep


def focusing_config_dict(cfg: FocusingConfig) -> dict:
    d = asdict(cfg)
    d["params"] = params_dict(cfg.params)
    d["a_list"] = list(cfg.a_list)
    d["s_list"] = list(cfg.s_list)
    return d
