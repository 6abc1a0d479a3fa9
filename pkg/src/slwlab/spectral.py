"""Periodic 1D grids, sampled fields, Fourier-weighted Sobolev norms and data builders.

Transforms use the unitary convention f^(xi) = (2 pi)^(-1/2) int f(x) e^{-i x xi} dx,
approximated by dx/sqrt(2 pi) times the DFT, so that the discrete Parseval sum
with mode spacing 2 pi / L reproduces the L^2 integral.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import comb

from .model import ModelParams, derive_exponents

GUARD_FRACTION = 0.25
# relative size below which a sample counts as zero for support / moment checks
SUPPORT_TOL = 1e-14


class GridError(ValueError):
    pass


class SupportError(ValueError):
    """A field reaches into the guard band (or off the grid)."""


class MomentConditionError(ValueError):
    pass


@dataclass(frozen=True)
class Grid1D:
    L: float
    M: int

    def __post_init__(self):
        if not self.L > 0:
            raise GridError(f"domain length must be positive, got {self.L}")
        if self.M < 4 or self.M & (self.M - 1):
            raise GridError(f"number of points must be a power of two >= 4, got {self.M}")

    @property
    def dx(self) -> float:
        return self.L / self.M

    @property
    def x(self) -> np.ndarray:
        return -self.L / 2 + self.dx * np.arange(self.M)

    @property
    def xi(self) -> np.ndarray:
        """Angular frequencies 2 pi j / L in FFT order."""
        return 2 * np.pi * np.fft.fftfreq(self.M, d=self.dx)

    @property
    def dxi(self) -> float:
        return 2 * np.pi / self.L

    @property
    def guard_radius(self) -> float:
        # fields must vanish for |x| beyond this
        return (1 - GUARD_FRACTION) * self.L / 2

    def scaled(self, factor: float) -> Grid1D:
        return Grid1D(self.L * factor, self.M)


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.M,):
            raise GridError(f"expected {self.grid.M} samples, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field has non-finite samples")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: Grid1D, fn: Callable[[np.ndarray], np.ndarray]) -> Field:
        return cls(grid, fn(grid.x))

    @classmethod
    def zeros(cls, grid: Grid1D) -> Field:
        return cls(grid, np.zeros(grid.M))

    def __neg__(self) -> Field:
        return Field(self.grid, -self.values)

    def __add__(self, other: Field) -> Field:
        _same_grid(self, other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: Field) -> Field:
        _same_grid(self, other)
        return Field(self.grid, self.values - other.values)

    def scale(self, c: float) -> Field:
        return Field(self.grid, c * self.values)

    def support_radius(self, floor: float = 0.0) -> float:
        """max |x| over samples with |value| > floor (0 for the zero field)."""
        mask = np.abs(self.values) > floor
        if not mask.any():
            return 0.0
        return float(np.max(np.abs(self.grid.x[mask])))

    def integral(self) -> float:
        return float(np.sum(self.values) * self.grid.dx)

    def l1_norm(self) -> float:
        return float(np.sum(np.abs(self.values)) * self.grid.dx)


def _same_grid(a: Field, b: Field) -> None:
    if a.grid != b.grid:
        raise GridError(f"grid mismatch: {a.grid} vs {b.grid}")


def check_guard(field: Field, what: str = "field") -> None:
    """Raise SupportError unless the field vanishes on the guard band."""
    scale = max(float(np.max(np.abs(field.values))), 1e-300)
    outside = np.abs(field.grid.x) > field.grid.guard_radius
    if np.any(np.abs(field.values[outside]) > SUPPORT_TOL * scale):
        raise SupportError(
            f"{what} does not vanish on the outer {GUARD_FRACTION:.0%} of the domain "
            f"(L={field.grid.L}); enlarge L"
        )


def fourier_transform(field: Field) -> tuple[np.ndarray, np.ndarray]:
    """(xi, f^(xi)) in FFT order, continuum-normalized including the x-origin phase."""
    g = field.grid
    x0 = g.x[0]
    fhat = g.dx / math.sqrt(2 * math.pi) * np.fft.fft(field.values) * np.exp(-1j * g.xi * x0)
    return g.xi, fhat


@dataclass(frozen=True)
class SobolevOrder:
    s: float
    homogeneous: bool = False
    n_eff: int = 1


def required_moment_order(s: float, n: int = 1) -> int:
    """Smallest integer q with q > -s - n/2 (0 when no condition is needed)."""
    bound = -s - n / 2
    if bound < 0:
        return 0
    return math.floor(bound) + 1


def vanishing_moments(field: Field, rtol: float = 1e-8) -> int:
    """Number of leading moments int x^j f dx (j = 0, 1, ...) that vanish to rtol."""
    x = field.grid.x
    f = field.values
    q = 0
    while q < 12:
        mom = np.sum(x**q * f)
        ref = np.sum(np.abs(x**q * f))
        if ref == 0 or abs(mom) > rtol * ref:
            break
        q += 1
    return q


def sobolev_norm(f: Field, order: SobolevOrder | float, homogeneous: bool | None = None) -> float:
    """Discrete H^s (weight (1 + xi^2)^s) or H-dot^s (weight |xi|^(2s), zero mode dropped) norm."""
    if not isinstance(order, SobolevOrder):
        order = SobolevOrder(float(order), bool(homogeneous))
    xi, fhat = fourier_transform(f)
    power = np.abs(fhat) ** 2
    if order.homogeneous:
        q_needed = required_moment_order(order.s, order.n_eff)
        if q_needed and np.any(f.values):
            have = vanishing_moments(f)
            if have < q_needed:
                raise MomentConditionError(
                    f"moment condition violated: homogeneous order s={order.s} needs "
                    f"{q_needed} vanishing moment(s), field has {have}"
                )
        nz = xi != 0
        total = np.sum(power[nz] * np.abs(xi[nz]) ** (2 * order.s))
    else:
        total = np.sum(power * (1 + xi**2) ** order.s)
    return float(math.sqrt(total * f.grid.dxi))


def dtft(f: Field, xi: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Continuum-normalized transform of the samples at arbitrary frequencies |xi| <= pi/dx."""
    g = f.grid
    nz = np.nonzero(f.values)[0]
    if nz.size == 0:
        return np.zeros(np.shape(xi), dtype=complex)
    x = g.x[nz[0] : nz[-1] + 1]
    vals = f.values[nz[0] : nz[-1] + 1]
    xi = np.asarray(xi, dtype=float)
    out = np.empty(xi.size, dtype=complex)
    flat = xi.ravel()
    for i in range(0, flat.size, chunk):
        out[i : i + chunk] = np.exp(-1j * np.outer(flat[i : i + chunk], x)) @ vals
    return (g.dx / math.sqrt(2 * math.pi) * out).reshape(xi.shape)


def _low_frequency_nodes(xi0: float, n_gauss: int = 16, decades: int = 14):
    """Gauss-Legendre nodes/weights on (0, 2 xi0]: geometric panels near 0, then 8 uniform."""
    edges = [0.0] + [xi0 * 10.0 ** (-j / 2) for j in range(2 * decades, 0, -1)]
    edges += list(np.linspace(xi0, 2 * xi0, 9))
    t, w = np.polynomial.legendre.leggauss(n_gauss)
    a = np.asarray(edges[:-1])
    b = np.asarray(edges[1:])
    nodes = (0.5 * (b - a)[:, None] * (t[None, :] + 1) + a[:, None]).ravel()
    weights = (0.5 * (b - a)[:, None] * w[None, :]).ravel()
    return nodes, weights


def _taper(xi: np.ndarray, xi0: float) -> np.ndarray:
    # 1 on |xi| <= xi0, 0 on |xi| >= 2 xi0
    return smooth_step(2 - np.abs(xi) / xi0)


def continuum_sobolev_norm(
    f: Field, order: SobolevOrder | float, homogeneous: bool | None = None, pad: int = 4
) -> float:
    """Sobolev norm of the compactly supported sampled function as a function on the line.

    Result does not depend on the period L, unlike sobolev_norm. Use it when
    the weight varies on frequency scales finer than 2 pi / L (negative orders
    of fields with nonzero mean, strongly rescaled grids). The weight is split
    by a smooth taper: the part near 0 is integrated by graded quadrature of
    the off-grid transform, the rest by the trapezoid rule on a zero-padded FFT.
    """
    if not isinstance(order, SobolevOrder):
        order = SobolevOrder(float(order), bool(homogeneous))
    if order.homogeneous:
        q_needed = required_moment_order(order.s, order.n_eff)
        if q_needed and np.any(f.values) and vanishing_moments(f) < q_needed:
            raise MomentConditionError(
                f"moment condition violated: homogeneous order s={order.s} needs "
                f"{q_needed} vanishing moment(s)"
            )
    nz = np.nonzero(f.values)[0]
    if nz.size == 0:
        return 0.0
    g = f.grid

    def weight(xi):
        if order.homogeneous:
            return np.abs(xi) ** (2 * order.s)
        return (1 + xi**2) ** order.s

    extent = max((nz[-1] - nz[0] + 1) * g.dx, 2 * g.dx)
    xi0 = min(2 * math.pi / extent, math.pi / (2 * g.dx))
    nodes, wq = _low_frequency_nodes(xi0)
    low = 2 * np.sum(wq * np.abs(dtft(f, nodes)) ** 2 * weight(nodes) * _taper(nodes, xi0))
    Mp = pad * g.M
    vals = np.zeros(Mp)
    vals[: g.M] = f.values
    power = np.abs(g.dx / math.sqrt(2 * math.pi) * np.fft.rfft(vals)) ** 2
    xi = 2 * math.pi * np.fft.rfftfreq(Mp, d=g.dx)
    keep = xi > 0
    wt = np.zeros_like(xi)
    wt[keep] = weight(xi[keep]) * (1 - _taper(xi[keep], xi0))
    # rfft holds each +/- pair once (the Nyquist mode once)
    mult = np.full(xi.size, 2.0)
    mult[-1] = 1.0
    high = np.sum(mult * power * wt) * (2 * math.pi / (Mp * g.dx))
    return float(math.sqrt(low + high))


def spatial_derivative(f: Field, j: int = 1) -> Field:
    if j == 0:
        return f
    fh = (1j * f.grid.xi) ** j * np.fft.fft(f.values)
    if j % 2 == 1:
        # odd derivatives of the Nyquist mode are not real
        fh = _kill_nyquist(fh)
    return Field(f.grid, np.fft.ifft(fh).real)


def _kill_nyquist(fh: np.ndarray) -> np.ndarray:
    fh = fh.copy()
    fh[len(fh) // 2] = 0
    return fh


def bump_profile(x: np.ndarray) -> np.ndarray:
    """exp(1 - 1/(1 - x^2)) on |x| < 1, zero elsewhere; equals 1 at x = 0."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    out[inside] = np.exp(1 - 1 / (1 - x[inside] ** 2))
    return out


def smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    a = np.where(t > 0, np.exp(-1 / np.where(t > 0, t, 1)), 0.0)
    b = np.where(t < 1, np.exp(-1 / np.where(t < 1, 1 - t, 1)), 0.0)
    return a / (a + b)


def plateau_profile(x: np.ndarray, inner: float, outer: float) -> np.ndarray:
    """1 on |x| <= inner, 0 on |x| >= outer, smooth in between."""
    return smooth_step((outer - np.abs(np.asarray(x, dtype=float))) / (outer - inner))


def _check_room(grid: Grid1D, lo: float, hi: float, what: str) -> None:
    r = grid.guard_radius
    if lo < -r or hi > r:
        raise SupportError(
            f"{what} support [{lo:.6g}, {hi:.6g}] leaves the usable region "
            f"[{-r:.6g}, {r:.6g}]; enlarge L"
        )


def bump(grid: Grid1D, center: float, radius: float, height: float = 1.0) -> Field:
    if radius <= 0:
        raise ValueError("radius must be positive")
    _check_room(grid, center - radius, center + radius, "bump")
    return Field(grid, height * bump_profile((grid.x - center) / radius))


def moment_data(
    grid: Grid1D,
    base: Field | Callable[[np.ndarray], np.ndarray],
    q: int,
    spacing: float,
    dilations: Sequence[float] | None = None,
    support: tuple[float, float] | None = None,
) -> Field:
    """sum_j (-1)^j C(q, j) base_j(x - j D), whose transform is O(|xi|^q) at 0.

    A Field base is shifted by whole grid cells (D is rounded to a multiple of
    dx so the discrete moments cancel exactly). A callable base may be given
    per-copy dilations w_j, each copy then being w_j^-1 base(x / w_j) so the
    masses agree; the achieved moment order is verified numerically.
    ``support`` is the (lo, hi) support of the callable base, used for the room
    check; for a Field it is read off the samples.
    """
    if q < 0:
        raise ValueError("moment order must be >= 0")
    if q == 0:
        if isinstance(base, Field):
            return base
        return Field(grid, base(grid.x))
    x = grid.x
    coeffs = [(-1) ** j * comb(q, j, exact=True) for j in range(q + 1)]
    if isinstance(base, Field):
        if dilations is not None:
            raise ValueError("dilations need a callable base profile")
        if base.grid != grid:
            raise GridError("base lives on a different grid")
        shift = int(round(spacing / grid.dx))
        nz = np.nonzero(np.abs(base.values) > 0)[0]
        lo, hi = x[nz[0]], x[nz[-1]]
        _check_room(grid, lo, hi + q * shift * grid.dx, "moment data")
        vals = np.zeros(grid.M)
        for j, c in enumerate(coeffs):
            vals += c * np.roll(base.values, j * shift)
        return Field(grid, vals)
    w = [1.0] * (q + 1) if dilations is None else [float(d) for d in dilations]
    if len(w) != q + 1:
        raise ValueError(f"need {q + 1} dilations, got {len(w)}")
    if support is not None:
        lo, hi = support
        _check_room(
            grid,
            min(j * spacing + w[j] * lo for j in range(q + 1)),
            max(j * spacing + w[j] * hi for j in range(q + 1)),
            "moment data",
        )
    vals = np.zeros(grid.M)
    for j, c in enumerate(coeffs):
        vals += c * base((x - j * spacing) / w[j]) / w[j]
    out = Field(grid, vals)
    check_guard(out, "moment data")
    have = vanishing_moments(out)
    if have < q:
        raise MomentConditionError(
            f"dilated copies only cancel {have} moment(s), {q} requested"
        )
    return out


def data_amplitude_exponent(params: ModelParams) -> float:
    """(k+1)/(k+l-1): the data amplitude scales like lambda^(-this)."""
    return (params.k + 1) / (params.k + params.l - 1)


def _check_scales(gamma: float, lam: float) -> None:
    if not (0 < lam <= gamma <= 1):
        raise ValueError(f"need 0 < lambda <= gamma <= 1, got gamma={gamma}, lambda={lam}")


def band_limited_eval(f: Field, y: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """Evaluate the trigonometric interpolant of f at arbitrary points y."""
    g = f.grid
    fh = np.fft.fft(f.values) / g.M
    fh = _kill_nyquist(fh)
    xi = g.xi
    y = np.asarray(y, dtype=float)
    out = np.empty(y.shape)
    flat = y.ravel()
    res = out.ravel()
    for i in range(0, flat.size, chunk):
        yy = flat[i : i + chunk] - g.x[0]
        res[i : i + chunk] = np.real(np.exp(1j * np.outer(yy, xi)) @ fh)
    return res.reshape(y.shape)


def resample(f: Field, target: Grid1D, stretch: float) -> Field:
    """Samples of x -> f(stretch * x) on ``target``.

    Band-limited interpolation, falling back to a cubic spline (with a warning)
    when the mapped sample spacing exceeds M/8 source cells.
    """
    y = stretch * target.x
    inside = np.abs(y) <= f.grid.L / 2
    vals = np.zeros(target.M)
    ratio = stretch * target.dx / f.grid.dx
    if ratio > f.grid.M / 8:
        warnings.warn(
            f"stretch ratio {ratio:.3g} exceeds M/8; using cubic interpolation",
            RuntimeWarning,
            stacklevel=2,
        )
        spline = CubicSpline(f.grid.x, f.values)
        vals[inside] = spline(y[inside])
    else:
        vals[inside] = band_limited_eval(f, y[inside])
    return Field(target, vals)


def rescale_data(
    phi: Field, gamma: float, lam: float, params: ModelParams, grid: Grid1D | None = None
) -> Field:
    """g(x) = lambda^(-(k+1)/(k+l-1)) phi(gamma x / lambda).

    Without ``grid`` the result lives on the grid of phi shrunk by lambda/gamma,
    which is exact (same samples, relabelled abscissae). With ``grid`` the
    stretched profile is interpolated onto it.
    """
    _check_scales(gamma, lam)
    amp = lam ** (-data_amplitude_exponent(params))
    if grid is None:
        return Field(phi.grid.scaled(lam / gamma), amp * phi.values)
    out = resample(phi, grid, gamma / lam).scale(amp)
    check_guard(out, "rescaled data")
    return out


def predict_data_norm(
    params: ModelParams, s: float, gamma: float, lam: float, q: int | None = None
) -> float:
    """lambda^(-(k+1)/(k+l-1)) (lambda/gamma)^(n/2 - (s-1)), the H^(s-1) data norm up to a constant."""
    _check_scales(gamma, lam)
    n = params.n
    if s - 1 <= -n / 2:
        need = required_moment_order(s - 1, n)
        if q is None or q < need:
            raise MomentConditionError(
                f"s-1={s - 1} <= -n/2 needs data with moment order q > {-(s - 1) - n / 2}, got q={q}"
            )
    return lam ** (-data_amplitude_exponent(params)) * (lam / gamma) ** (n / 2 - (s - 1))


def scale_two_param(
    u: Field, v: Field, gamma: float, lam: float, params: ModelParams
) -> tuple[Field, Field]:
    """Map (phi, phi_t) at unscaled time t to (u, u_t) of lambda^alpha phi(t/lambda, gamma x/lambda).

    The returned pair is the scaled solution at time lambda * t, on the grid
    shrunk by lambda/gamma.
    """
    _check_scales(gamma, lam)
    _same_grid(u, v)
    alpha = derive_exponents(params).alpha
    g = u.grid.scaled(lam / gamma)
    return Field(g, lam**alpha * u.values), Field(g, lam ** (alpha - 1) * v.values)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_field_csv(path: str | Path, field: Field) -> None:
    lines = ["x,value"]
    lines += [f"{_fmt(a)},{_fmt(b)}" for a, b in zip(field.grid.x, field.values)]
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def write_spectrum_csv(path: str | Path, field: Field) -> None:
    xi, fhat = fourier_transform(field)
    order = np.argsort(xi, kind="stable")
    lines = ["xi,abs_fhat"]
    lines += [f"{_fmt(xi[i])},{_fmt(abs(fhat[i]))}" for i in order]
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")
