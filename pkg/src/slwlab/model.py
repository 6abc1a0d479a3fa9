"""Equation family box u = +/- |u|^k |u_t|^(l-1) u_t and its derived indices."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

DEFAULT_CAP = 8


class Sign(str, enum.Enum):
    DEFOCUSING = "defocusing"
    FOCUSING = "focusing"


class ParameterError(ValueError):
    """Raised when model parameters fall outside the admissible family."""


def _is_integer(x: float) -> bool:
    return float(x).is_integer()


@dataclass(frozen=True)
class ModelParams:
    k: float
    l: float
    n: int = 1
    sign: Sign = Sign.DEFOCUSING

    def __post_init__(self):
        object.__setattr__(self, "sign", Sign(self.sign))
        if self.k < 0 or self.l < 0:
            raise ParameterError(f"exponents must be nonnegative, got k={self.k}, l={self.l}")
        if self.k + self.l <= 1:
            raise ParameterError(f"degenerate family: k + l = {self.k + self.l} <= 1")
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"dimension n must be a positive integer, got {self.n}")
        if self.sign is Sign.DEFOCUSING and self.l < 1:
            raise ParameterError("defocusing equations require l >= 1")

    @property
    def k_is_integer(self) -> bool:
        return _is_integer(self.k)

    @property
    def focusing(self) -> bool:
        return self.sign is Sign.FOCUSING

    @property
    def sign_factor(self) -> float:
        return 1.0 if self.focusing else -1.0


@dataclass(frozen=True)
class Exponents:
    alpha: float
    s_c: float
    s_tilde: float
    m0: int | None = None
    N: int | None = None
    m: int | None = None


def derive_exponents(params: ModelParams) -> Exponents:
    """Scaling index s_c, concentrative index s~ and alpha = (l-2)/(k+l-1)."""
    k, l, n = params.k, params.l, params.n
    if k + l <= 1:
        raise ParameterError("degenerate family: k + l <= 1")
    alpha = (l - 2) / (k + l - 1)
    return Exponents(
        alpha=alpha,
        s_c=n / 2 + alpha,
        s_tilde=(n + 1) / 4 + (l - 1) / (k + l - 1),
    )


def _abs_pow(x, p):
    # |x|^p with 0^0 = 1
    ax = np.abs(x)
    if p == 0:
        return np.ones_like(ax)
    return ax**p


def _signed_pow(x, p):
    # |x|^(p-1) x written as sign(x)|x|^p, so 0 maps to 0 for every p > 0
    return np.sign(x) * _abs_pow(x, p)


def eval_nonlinearity(params: ModelParams, u, v):
    """F(u, v) for the model; works elementwise on arrays.

    Integer k selects the branch by parity: |u|^k |v|^(l-1) v for even k,
    |u|^(k-1) u |v|^l for odd k. Non-integer k uses the even-k form, and
    l = 0 reduces to |u|^(k-1) u.
    The overall sign is - for defocusing and + for focusing.
    """
    k, l = params.k, params.l
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if l == 0:
        val = _signed_pow(u, k)
    elif params.k_is_integer and int(k) % 2 == 1:
        val = _signed_pow(u, k) * _abs_pow(v, l)
    else:
        val = _abs_pow(u, k) * _signed_pow(v, l)
    out = params.sign_factor * val
    return out if out.ndim else float(out)


def compute_m0(params: ModelParams, cap: int = DEFAULT_CAP) -> int:
    """Regularity order of the base ODE solution (C^(m0+2)).

    Factors that are smooth (|u|^k with k = 0, |v|^(l-1) v with l in {0, 1})
    do not bind and are left out of the minimum; the result is clamped at 0.
    """
    if cap < 3:
        raise ParameterError("cap must be >= 3")
    k, l = params.k, params.l
    if _is_integer(k) and _is_integer(l) and int(k + l) % 2 == 1:
        return cap
    orders = []
    if k > 0:
        orders.append(math.floor(k - 1))
    if l not in (0, 1):
        orders.append(math.floor(l - 1))
    if not orders:
        return cap
    return max(0, min(min(orders), cap))


def choose_N_m(m0: int, k: float, n: int) -> tuple[int, int]:
    """Smallest admissible energy order m and rescaling power N with N(k+1) > m+2."""
    m = (n + 2) // 2
    if m0 < m:
        raise ParameterError(
            f"insufficient nonlinearity regularity: m0={m0} < floor((n+2)/2)={m}"
        )
    N = math.floor((m + 2) / (k + 1)) + 1
    return N, m


def full_exponents(params: ModelParams, cap: int = DEFAULT_CAP) -> Exponents:
    base = derive_exponents(params)
    m0 = compute_m0(params, cap)
    N, m = choose_N_m(m0, params.k, params.n)
    return Exponents(base.alpha, base.s_c, base.s_tilde, m0=m0, N=N, m=m)
