"""The time ODE u'' = F(u, u') on the monotone branch, its rescalings and blow-up."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.integrate import quad, solve_ivp

from .model import ModelParams, eval_nonlinearity
from .spectral import Field

DEFAULT_TOL = 1e-10
VELOCITY_CAP = 1e8
DEFAULT_U_CAP = 30.0


class Status(str, enum.Enum):
    GLOBAL = "global"
    PLATEAU = "plateau"
    BLOWUP = "blowup"


class CoverageError(ValueError):
    """Requested time lies outside what a trajectory was integrated over."""


def _base_coeff(params: ModelParams) -> float:
    # I = v^(2-l)/(2-l) -/+ ... rearranged as v^(2-l) = 1 + c u^(k+1)
    k, l = params.k, params.l
    c = (l - 2) / (k + 1)
    return -c if params.focusing else c


def plateau_value(params: ModelParams) -> float | None:
    """Limit of u_1 for defocusing l < 2, else None."""
    if params.focusing or params.l >= 2:
        return None
    k, l = params.k, params.l
    return ((k + 1) / (2 - l)) ** (1 / (k + 1))


def velocity(params: ModelParams, u):
    """u_t as a function of u along the solution with data (0, 1).

    Defocusing samples at or beyond the plateau value return 0. Focusing l > 2
    returns inf once u reaches the value where the velocity blows up.
    """
    k, l = params.k, params.l
    u = np.asarray(u, dtype=float)
    p = np.abs(u) ** (k + 1)
    if l == 2:
        e = p / (k + 1)
        with np.errstate(over="ignore"):
            out = np.exp(e) if params.focusing else np.exp(-e)
    else:
        base = 1 + _base_coeff(params) * p
        expo = 1 / (2 - l)
        with np.errstate(divide="ignore", invalid="ignore"):
            pos = np.where(base > 0, base, 1.0) ** expo
        out = np.where(base > 0, pos, np.inf if expo < 0 else 0.0)
    return out if out.ndim else float(out)


def conserved_quantity(params: ModelParams, u, v):
    """The first integral of the ODE on u, v >= 0 (v > 0 when l = 2)."""
    k, l = params.k, params.l
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    pot = np.abs(u) ** (k + 1) / (k + 1)
    if params.focusing:
        pot = -pot
    if l == 2:
        return np.log(np.abs(v)) + pot
    return np.abs(v) ** (2 - l) / (2 - l) + pot


@dataclass(frozen=True, eq=False)
class OdeTrajectory:
    """Samples of (u, u_t) with the dense solution kept for evaluation in between."""

    params: ModelParams
    times: np.ndarray
    u: np.ndarray
    u_t: np.ndarray
    status: Status
    t_cover: float
    T_est: float | None = None
    limit: float | None = None
    _dense: object = field(default=None, repr=False)
    _base_limit: float | None = None
    _time_scale: float = 1.0
    _amp: float = 1.0
    _vel_amp: float = 1.0

    def __post_init__(self):
        for name in ("times", "u", "u_t"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def evaluate(self, t) -> tuple[np.ndarray, np.ndarray]:
        """(u(t), u_t(t)) at arbitrary times within the covered range."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.t_cover * (1 + 1e-12)):
            raise CoverageError(f"times outside [0, {self.t_cover}]")
        if self._dense is None:
            z = np.zeros_like(t)
            return z, z.copy()
        tau = np.minimum(t * self._time_scale, self._dense.t_max)
        ub = np.asarray(self._dense(tau), dtype=float).reshape(tau.shape)
        if self._base_limit is not None:
            ub = np.minimum(ub, self._base_limit)
        return self._amp * ub, self._vel_amp * velocity(self.params, ub)

    def rescaled(self, times, time_scale, amp=1.0, vel_amp=1.0, **meta) -> OdeTrajectory:
        """Trajectory t -> (amp u(time_scale t), vel_amp u_t(time_scale t)) sampled at ``times``.

        Only valid on an unscaled (data (0, 1)) trajectory.
        """
        times = np.asarray(times, dtype=float)
        shell = replace(
            self, times=np.zeros(0), u=np.zeros(0), u_t=np.zeros(0),
            t_cover=self.t_cover / time_scale, _time_scale=time_scale,
            _amp=amp, _vel_amp=vel_amp, **meta,
        )
        u, u_t = shell.evaluate(times)
        return replace(shell, times=times, u=u, u_t=u_t)

    def to_csv(self, path: str | Path) -> None:
        lines = ["t,u,u_t"]
        for a, b, c in zip(self.times, self.u, self.u_t):
            lines.append(f"{a:.17g},{b:.17g},{c:.17g}")
        Path(path).write_text("\n".join(lines) + "\n", newline="\n")


class _Dense:
    """Wraps a scipy OdeSolution with its time range."""

    def __init__(self, sol, t_max):
        self.sol = sol
        self.t_max = float(t_max)

    def __call__(self, t):
        return self.sol(t)[0]


def sample_times(t_end: float, n_linear: int = 101, per_decade: int = 40) -> np.ndarray:
    """Uniform samples on [0, min(1, t_end)], geometric beyond t = 1."""
    lin = np.linspace(0.0, min(1.0, t_end), n_linear)
    if t_end <= 1:
        return lin
    decades = math.log10(t_end)
    geo = np.geomspace(1.0, t_end, max(2, int(math.ceil(decades * per_decade)) + 1))
    return np.concatenate([lin, geo[1:]])


def integrate_base(
    params: ModelParams, t_end: float, tol: float = DEFAULT_TOL, times: np.ndarray | None = None
) -> OdeTrajectory:
    """Solve u_t = f(u), u(0) = 0 (data (0, 1)) with an adaptive 5(4) pair."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    lim = plateau_value(params)
    T_est = None
    if params.focusing:
        T_est = blowup_time(params, tol=max(tol, 1e-12)).T_est
        # stop short of the singularity; the dense solution covers [0, t_stop]
        t_end = min(t_end, T_est)

    def rhs(t, y):
        return [velocity(params, y[0])]

    events = None
    if params.focusing:
        vcap = VELOCITY_CAP

        def hit_cap(t, y):
            return velocity(params, y[0]) - vcap

        hit_cap.terminal = True
        events = [hit_cap]

    sol = solve_ivp(
        rhs,
        (0.0, t_end),
        [0.0],
        method="RK45",
        rtol=tol,
        atol=tol * 1e-4,
        dense_output=True,
        events=events,
    )
    if sol.status == -1 and not params.focusing:
        raise RuntimeError(f"integration failed: {sol.message}")
    t_cover = float(sol.t[-1])
    if times is None:
        times = sample_times(t_cover)
    else:
        times = np.asarray(times, dtype=float)
        if times.max() > t_cover * (1 + 1e-12):
            raise CoverageError(f"requested samples beyond t={t_cover}")
    dense = _Dense(sol.sol, t_cover)
    u = np.asarray(dense(times), dtype=float)
    if lim is not None:
        u = np.minimum(u, lim)
    u_t = velocity(params, u)
    if params.focusing:
        status = Status.BLOWUP
    elif lim is not None:
        status = Status.PLATEAU
    else:
        status = Status.GLOBAL
    return OdeTrajectory(
        params, times, u, u_t, status, t_cover, T_est=T_est, limit=lim, _dense=dense,
        _base_limit=lim,
    )


def integrate_second_order(
    params: ModelParams,
    t_end: float,
    data: tuple[float, float] = (0.0, 1.0),
    rtol: float = 1e-12,
    times: np.ndarray | None = None,
):
    """Integrate the raw system (u, v)' = (v, F(u, v)); used as an independent check."""

    def rhs(t, y):
        return [y[1], eval_nonlinearity(params, y[0], y[1])]

    events = None
    if params.focusing:

        def hit_cap(t, y):
            return abs(y[1]) - VELOCITY_CAP

        hit_cap.terminal = True
        events = [hit_cap]
    sol = solve_ivp(
        rhs, (0.0, t_end), list(data), method="DOP853", rtol=rtol, atol=rtol * 1e-4,
        dense_output=True, events=events,
    )
    if times is None:
        times = sol.t
    else:
        times = np.asarray(times)[np.asarray(times) <= sol.t[-1]]
    y = sol.sol(times)
    return np.asarray(times), y[0], y[1]


@dataclass(frozen=True)
class BlowupReport:
    T_est: float
    u_cap: float
    richardson_order: int
    status: Status = Status.BLOWUP
    history: tuple = ()
    T_integrator: float | None = None


def hitting_time(params: ModelParams, u_cap: float) -> float:
    """Time for the data-(0, 1) solution to reach u = u_cap: int_0^u_cap du / f(u)."""
    val, _ = quad(lambda w: 1.0 / velocity(params, w), 0.0, u_cap, limit=400, epsabs=0, epsrel=1e-13)
    return val


def _velocity_singularity(params: ModelParams) -> float | None:
    # focusing l > 2: f blows up at finite u
    if params.focusing and params.l > 2:
        return ((params.k + 1) / (params.l - 2)) ** (1 / (params.k + 1))
    return None


def blowup_time(params: ModelParams, tol: float = 1e-10, u_cap: float = DEFAULT_U_CAP) -> BlowupReport:
    """Blow-up time T = int_0^inf du / f(u) for focusing data (0, 1).

    The integral is split at u_cap; the tail is closed by quadrature on
    [u_cap, inf), and u_cap doubles until successive totals agree to tol.
    """
    if not params.focusing:
        raise ValueError("blow-up time is defined for the focusing sign only")
    u_star = _velocity_singularity(params)
    if u_star is not None:
        val, _ = quad(lambda w: 1.0 / velocity(params, w), 0.0, u_star, limit=400, epsabs=0, epsrel=1e-13)
        return BlowupReport(
            val, u_star, 0, history=((u_star, val),), T_integrator=integrator_blowup_time(params)
        )

    def inv_f(w):
        fw = velocity(params, w)
        return 0.0 if not np.isfinite(fw) else 1.0 / fw

    history = []
    prev = None
    cap = u_cap
    for _ in range(12):
        head = hitting_time(params, cap)
        tail, _ = quad(inv_f, cap, np.inf, limit=400, epsabs=1e-15, epsrel=1e-12)
        if not np.isfinite(tail):
            return BlowupReport(math.inf, cap, 0, status=Status.GLOBAL, history=tuple(history))
        total = head + tail
        history.append((cap, total))
        if prev is not None and abs(total - prev) <= tol * abs(total):
            break
        prev = total
        cap *= 2
    else:
        return BlowupReport(math.inf, cap, 0, status=Status.GLOBAL, history=tuple(history))
    return BlowupReport(
        total, cap, 0, history=tuple(history), T_integrator=integrator_blowup_time(params)
    )


def integrator_blowup_time(params: ModelParams, rtol: float = 1e-12) -> float:
    """Time at which the raw second-order system reaches |u_t| = VELOCITY_CAP.

    Undershoots T by the remaining time past the cap (1e-8 for k=0, l=2).
    """
    t, _, _ = integrate_second_order(params, 1e6, rtol=rtol)
    return float(t[-1])


def rescale_trajectory(
    base: OdeTrajectory, psi: float, N: int, params: ModelParams | None = None, times=None
) -> OdeTrajectory:
    """u_psi(t) = u_1(t psi^(N(k+l-1))) psi^(-N(l-2)): the solution with data (0, psi^(N(k+1)))."""
    params = params or base.params
    if psi < 0:
        raise ValueError("psi must be nonnegative")
    times = base.times if times is None else np.asarray(times, dtype=float)
    k, l = params.k, params.l
    if psi == 0:
        z = np.zeros_like(times)
        return OdeTrajectory(params, times, z, z, Status.GLOBAL, float(times.max(initial=0)))
    tscale = psi ** (N * (k + l - 1))
    needed = float(np.max(times, initial=0.0)) * tscale
    if needed > base.t_cover:
        if base.status is Status.BLOWUP:
            raise CoverageError("requested times pass the blow-up time")
        base = integrate_base(params, needed * 1.01)
    amp = psi ** (-N * (l - 2))
    return base.rescaled(
        times, tscale, amp, psi ** (N * (k + 1)),
        T_est=None if base.T_est is None else base.T_est / tscale,
        limit=None if base.limit is None else base.limit * amp,
    )


def rescale_focusing(base: OdeTrajectory, a: float, times=None) -> OdeTrajectory:
    """u_a(t) = u_T(T t / a): data (0, T/a), blow-up at t = a."""
    if a <= 0:
        raise ValueError("a must be positive")
    if base.status is not Status.BLOWUP or base.T_est is None:
        raise ValueError("base trajectory must be a focusing blow-up trajectory")
    T = base.T_est
    times = base.times * (a / T) if times is None else times
    return base.rescaled(times, T / a, 1.0, T / a, T_est=a)


def ode_field_from_data(
    data: Field, t: float, params: ModelParams, base: OdeTrajectory | None = None
) -> tuple[Field, Field]:
    """Pointwise ODE flow at time t for data (0, phi(x)); signed data allowed.

    Uses u_phi(t) = u_1(t phi^((k+l-1)/(k+1))) phi^(-(l-2)/(k+1)) for phi > 0
    and the odd symmetry u_{-phi} = -u_phi.
    """
    k, l = params.k, params.l
    phi = data.values
    mag = np.abs(phi)
    sgn = np.sign(phi)
    nz = mag > 0
    tscale = mag[nz] ** ((k + l - 1) / (k + 1))
    tau = t * tscale
    tau_max = float(tau.max(initial=0.0))
    if base is None or tau_max > base.t_cover:
        if params.focusing and base is not None:
            raise CoverageError("some grid points have blown up by time t")
        base = integrate_base(params, max(tau_max * 1.01, 1e-3))
    u = np.zeros(data.grid.M)
    v = np.zeros(data.grid.M)
    if np.any(nz):
        ub, vb = base.evaluate(tau)
        u[nz] = sgn[nz] * ub * mag[nz] ** (-(l - 2) / (k + 1))
        v[nz] = sgn[nz] * vb * mag[nz]
    return Field(data.grid, u), Field(data.grid, v)


def evolve_ode_field(
    psi_field: Field, t: float, params: ModelParams, N: int, base: OdeTrajectory | None = None
) -> tuple[Field, Field]:
    """(phi0(t), phi0_t(t)) for data (0, psi^(N(k+1))), psi >= 0, via the rescaled base solution."""
    if np.any(psi_field.values < 0):
        raise ValueError("psi must be nonnegative (monotone branch)")
    phi = Field(psi_field.grid, psi_field.values ** (N * (params.k + 1)))
    return ode_field_from_data(phi, t, params, base)


def closed_form_k0(params: ModelParams, t):
    """u_1(t) for k = 0, where u'' = -/+ |u'|^(l-1) u' integrates in closed form.

    v = (1 +/- (l-1) t)^(-1/(l-1)) (upper sign defocusing), e^(-/+ t) for l = 1.
    """
    if params.k != 0:
        raise ValueError("closed form is available for k = 0 only")
    l = params.l
    c = -1.0 if params.focusing else 1.0
    t = np.asarray(t, dtype=float)
    if l == 1:
        return (1 - np.exp(-c * t)) / c
    z = 1 + c * (l - 1) * t
    if l == 2:
        return np.log(z) / c
    return (z ** ((l - 2) / (l - 1)) - 1) / (c * (l - 2))


def closed_form_blowup_time(params: ModelParams) -> float:
    """T = (k+1)^(1/(k+1) - 1) Gamma(1/(k+1)) for focusing l = 2."""
    if not params.focusing or params.l != 2:
        raise ValueError("closed-form blow-up time needs focusing l = 2")
    k = params.k
    return (k + 1) ** (1 / (k + 1) - 1) * math.gamma(1 / (k + 1))
