"""Pseudospectral method of lines for u_tt - gamma^2 u_xx = F(u, u_t) on a periodic grid."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .model import ModelParams, eval_nonlinearity
from .spectral import (
    Field,
    Grid1D,
    SobolevOrder,
    SupportError,
    sobolev_norm,
    spatial_derivative,
)

BLOWUP_CAP = 1e6
SUPPORT_FLOOR = 1e-12


class InstabilityError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class WaveState:
    t: float
    u: Field
    v: Field
    gamma: float

    def __post_init__(self):
        if self.u.grid != self.v.grid:
            raise ValueError("u and v must share one grid")
        if not (0 <= self.gamma <= 1):
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")

    @property
    def grid(self) -> Grid1D:
        return self.u.grid

    def __neg__(self) -> WaveState:
        return WaveState(self.t, -self.u, -self.v, self.gamma)


@dataclass(frozen=True)
class SolverConfig:
    t_end: float = 1.0
    dt: float | None = None
    cfl: float = 0.5
    dealias: bool = True
    sample_times: Sequence[float] | None = None
    n_samples: int = 11
    blowup_cap: float = BLOWUP_CAP
    check_guard: bool = True

    def times(self) -> np.ndarray:
        if self.sample_times is not None:
            ts = np.asarray(sorted(set(float(t) for t in self.sample_times)))
            if ts.size == 0 or ts[0] < 0 or ts[-1] > self.t_end * (1 + 1e-12):
                raise ValueError("sample times must lie in [0, t_end]")
            return ts
        return np.linspace(0.0, self.t_end, self.n_samples)


@dataclass(frozen=True, eq=False)
class RunResult:
    samples: list[WaveState]
    status: str  # "ok" or "blowup"
    t_star: float | None = None
    n_steps: int = 0
    dt_min: float = math.nan
    dt_max: float = math.nan
    config: SolverConfig = field(default_factory=SolverConfig)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])


Nonlinearity = Callable[[np.ndarray, np.ndarray], np.ndarray]


class _Operators:
    def __init__(self, grid: Grid1D, gamma: float, F: Nonlinearity | None, dealias: bool):
        self.grid = grid
        self.gamma = gamma
        self.F = F
        k = np.fft.rfftfreq(grid.M, d=grid.dx) * 2 * np.pi
        self.lap = -(k**2)
        j = np.arange(k.size)
        self.mask = (j <= grid.M // 3).astype(float) if dealias else None

    def rhs(self, u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        acc = self.gamma**2 * np.fft.irfft(self.lap * np.fft.rfft(u), n=self.grid.M)
        if self.F is not None:
            f = self.F(u, v)
            if self.mask is not None:
                f = np.fft.irfft(self.mask * np.fft.rfft(f), n=self.grid.M)
            acc = acc + f
        return v, acc

    def rk4(self, u, v, dt):
        k1u, k1v = self.rhs(u, v)
        k2u, k2v = self.rhs(u + 0.5 * dt * k1u, v + 0.5 * dt * k1v)
        k3u, k3v = self.rhs(u + 0.5 * dt * k2u, v + 0.5 * dt * k2v)
        k4u, k4v = self.rhs(u + dt * k3u, v + dt * k3v)
        u_new = u + dt / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
        v_new = v + dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        return u_new, v_new

    def energy(self, u, v) -> float:
        ux = np.fft.irfft(1j * np.sqrt(-self.lap) * np.fft.rfft(u), n=self.grid.M)
        return 0.5 * float(np.sum(v**2) + self.gamma**2 * np.sum(ux**2)) * self.grid.dx


def _resolve(nonlinearity) -> tuple[Nonlinearity | None, ModelParams | None]:
    if nonlinearity is None:
        return None, None
    if isinstance(nonlinearity, ModelParams):
        p = nonlinearity
        return (lambda u, v: eval_nonlinearity(p, u, v)), p
    return nonlinearity, None


def stable_dt(cfg: SolverConfig, grid: Grid1D, gamma: float, u, v, params: ModelParams | None) -> float:
    """cfl dx / max(gamma, 1 + max|v|^(l-1) max|u|^k); fixed dt if configured."""
    if cfg.dt is not None:
        return cfg.dt
    stiff = 0.0
    if params is not None:
        umax = float(np.max(np.abs(u)))
        vmax = float(np.max(np.abs(v)))
        stiff = 1.0 + (vmax ** (params.l - 1) if params.l != 1 else 1.0) * (
            umax**params.k if params.k else 1.0
        )
    return cfg.cfl * grid.dx / max(gamma, stiff, 1e-300)


def _guard_ok(u: np.ndarray, v: np.ndarray, grid: Grid1D) -> bool:
    outside = np.abs(grid.x) > grid.guard_radius
    scale = max(float(np.max(np.abs(u))), float(np.max(np.abs(v))), 1.0)
    lim = SUPPORT_FLOOR * scale
    return not (np.any(np.abs(u[outside]) > lim) or np.any(np.abs(v[outside]) > lim))


def evolve(init: WaveState, nonlinearity=None, cfg: SolverConfig = SolverConfig()) -> RunResult:
    """Classical RK4 on (u, v)' = (v, gamma^2 u_xx + F(u, v)) with a spectral Laplacian.

    ``nonlinearity`` is a ModelParams (F from the model), a callable F(u, v)
    or None for the linear wave equation. Samples are taken exactly at the
    configured times. Stops with status "blowup" once max|v| reaches the cap,
    the crossing time being refined by bisection of the last step.
    """
    F, params = _resolve(nonlinearity)
    grid = init.grid
    gamma = init.gamma
    ops = _Operators(grid, gamma, F, cfg.dealias)
    sample_at = cfg.times() + init.t
    u = np.array(init.u.values)
    v = np.array(init.v.values)
    t = init.t
    samples: list[WaveState] = []
    n_steps = 0
    dts: list[float] = []
    e_prev = ops.energy(u, v)

    def record(tt, uu, vv):
        if cfg.check_guard and not _guard_ok(uu, vv, grid):
            raise SupportError(f"solution reached the guard band at t={tt:.6g}; enlarge L")
        samples.append(WaveState(tt, Field(grid, uu.copy()), Field(grid, vv.copy()), gamma))

    i_next = 0
    while i_next < len(sample_at) and sample_at[i_next] <= t + 1e-14:
        record(t, u, v)
        i_next += 1
    while i_next < len(sample_at):
        dt = stable_dt(cfg, grid, gamma, u, v, params)
        target = sample_at[i_next]
        hit = t + dt >= target - 1e-14 * max(1.0, abs(target))
        if hit:
            dt = target - t
        u_new, v_new = ops.rk4(u, v, dt)
        n_steps += 1
        dts.append(dt)
        if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(v_new))):
            raise InstabilityError(f"non-finite values at t={t + dt:.6g}")
        vmax = float(np.max(np.abs(v_new)))
        if vmax >= cfg.blowup_cap:
            t_star = _bisect_cap(ops, u, v, t, dt, cfg.blowup_cap)
            return RunResult(samples, "blowup", t_star, n_steps, min(dts), max(dts), cfg)
        e_new = ops.energy(u_new, v_new)
        if e_prev > 1e-300 and e_new > 10 * e_prev:
            raise InstabilityError(
                f"energy grew {e_new / e_prev:.3g}x in one step at t={t:.6g} (dt={dt:.3g})"
            )
        e_prev = e_new
        u, v = u_new, v_new
        t = target if hit else t + dt
        if hit:
            record(t, u, v)
            i_next += 1
    return RunResult(samples, "ok", None, n_steps, min(dts, default=math.nan), max(dts, default=math.nan), cfg)


def _bisect_cap(ops: _Operators, u, v, t, dt, cap, iters: int = 40) -> float:
    lo, hi = 0.0, dt
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        _, vm = ops.rk4(u, v, mid)
        if np.all(np.isfinite(vm)) and np.max(np.abs(vm)) < cap:
            lo = mid
        else:
            hi = mid
    return t + hi


@dataclass(frozen=True)
class EnergyReport:
    per_order: tuple[float, ...]
    total: float
    m: int


def energy_gamma(w: Field, w_t: Field, gamma: float) -> float:
    """int 1/2 |w_t|^2 + gamma^2/2 |w_x|^2 dx."""
    wx = spatial_derivative(w, 1).values
    return 0.5 * float(np.sum(w_t.values**2) + gamma**2 * np.sum(wx**2)) * w.grid.dx


def energy_gamma_m(w: Field, w_t: Field, gamma: float, m: int) -> EnergyReport:
    """E_gamma of d^j w for j = 0..m and their sum."""
    if m < 0:
        raise ValueError("m must be >= 0")
    per = tuple(
        energy_gamma(spatial_derivative(w, j), spatial_derivative(w_t, j), gamma)
        for j in range(m + 1)
    )
    return EnergyReport(per, float(sum(per)), m)


def discrepancy(state: WaveState, ode_u: Field, ode_v: Field, m: int) -> float:
    """||u - u0||_{H^(m+1)} + ||v - v0||_{H^m}."""
    if state.grid != ode_u.grid or state.grid != ode_v.grid:
        raise ValueError("grid mismatch between PDE state and ODE field")
    return sobolev_norm(state.u - ode_u, SobolevOrder(m + 1)) + sobolev_norm(
        state.v - ode_v, SobolevOrder(m)
    )


def discrepancy_vs_ode(
    run: RunResult | Sequence[WaveState],
    ode_fields: Sequence[tuple[Field, Field]],
    m: int,
) -> np.ndarray:
    samples = run.samples if isinstance(run, RunResult) else list(run)
    if len(samples) != len(ode_fields):
        raise ValueError("need one ODE field per PDE sample")
    return np.array([discrepancy(s, fu, fv, m) for s, (fu, fv) in zip(samples, ode_fields)])


def support_radius(state: WaveState, floor: float = SUPPORT_FLOOR, relative: bool = True) -> float:
    """Half-width of the smallest centred interval holding every sample above the floor.

    With ``relative`` the floor is scaled by max(1, max|u|, max|v|).
    """
    if floor <= 0:
        raise ValueError("floor must be positive")
    if relative:
        floor = floor * max(1.0, float(np.max(np.abs(state.u.values))), float(np.max(np.abs(state.v.values))))
    r = max(state.u.support_radius(floor), state.v.support_radius(floor))
    if r > state.grid.guard_radius:
        raise SupportError(f"support radius {r:.6g} touches the guard band at t={state.t:.6g}")
    return r


def write_run_log(path: str | Path, times, disc, energy, radius) -> None:
    lines = ["t,discrepancy,E_gamma_m,support_radius"]
    for row in zip(times, disc, energy, radius):
        lines.append(",".join(format(float(x), ".17g") for x in row))
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")
