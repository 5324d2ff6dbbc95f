"""Scalar Hardy-critical bubbles and the sharp constants built from them.

The positive radial solutions of ``-Delta u - lam u/|x|^2 = u^{2*-1}`` are

    z_mu(r) = mu^{-(N-2)/2} C / ((r/mu)^a (1 + (r/mu)^b)^{(N-2)/2}),

with ``a = (N-2)/2 - sqrt(Lambda_N - lam)`` and ``b = 2 - 4a/(N-2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import grid as rg
from .errors import ConsistencyError, DomainError

_NORMALIZATION_RADII = (0.7310585786300049, 1.9129311827723892)
_NORMALIZATION_TOL = 1e-10


def hardy_limit(N: int) -> float:
    """``Lambda_N = (N-2)^2 / 4``."""
    return (N - 2) ** 2 / 4.0


def _check(lam: float, N: int) -> None:
    if int(N) != N or N < 3:
        raise DomainError(f"dimension must be an integer >= 3, got {N}")
    Lam = hardy_limit(N)
    if not (0.0 < lam < Lam):
        raise DomainError(f"lambda must lie in (0, {Lam}) for N={N}, got {lam}")


def bubble_exponent(lam: float, N: int) -> float:
    """Singular exponent ``a`` of the bubble at the origin."""
    _check(lam, N)
    Lam = hardy_limit(N)
    nu = math.sqrt(Lam - lam)
    # (m - nu) written as lam/(m + nu) to avoid cancellation for small lam
    return lam / ((N - 2) / 2.0 + nu)


def decay_exponent(lam: float, N: int) -> float:
    """Exponent ``b = 2 - 4a/(N-2)`` in the denominator of the bubble."""
    return 2.0 - 4.0 * bubble_exponent(lam, N) / (N - 2)


def hardy_gap(lam: float, N: int) -> float:
    """``nu = sqrt(Lambda_N - lam)``, the rate at which the bubble approaches its power laws."""
    _check(lam, N)
    return math.sqrt(hardy_limit(N) - lam)


def _shape(r: NDArray[np.float64], a: float, b: float, m: float) -> NDArray[np.float64]:
    return r ** (-a) * (1.0 + r**b) ** (-m)


def _shape_operator_ratio(r: float, lam: float, N: int) -> float:
    """``(L phi)/phi`` for the unnormalized shape, with ``L = -d^2 - (N-1)/r d - lam/r^2``."""
    a = bubble_exponent(lam, N)
    b = decay_exponent(lam, N)
    m = (N - 2) / 2.0
    rb = r**b
    g = -a / r - m * b * r ** (b - 1.0) / (1.0 + rb)
    dg = a / r**2 - m * b * r ** (b - 2.0) * ((b - 1.0) - rb) / (1.0 + rb) ** 2
    return -(dg + g * g) - (N - 1) * g / r - lam / r**2


def _normalization_at(r: float, lam: float, N: int) -> float:
    a = bubble_exponent(lam, N)
    b = decay_exponent(lam, N)
    m = (N - 2) / 2.0
    phi = float(_shape(np.array(r), a, b, m))
    ratio = _shape_operator_ratio(r, lam, N)
    if ratio <= 0:
        raise ConsistencyError(f"ansatz gives nonpositive operator ratio at r={r}")
    # C^{2*-2} phi^{2*-2} = (L phi)/phi, and 2*-2 = 4/(N-2)
    return (ratio / phi ** (4.0 / (N - 2))) ** ((N - 2) / 4.0)


def bubble_normalization(lam: float, N: int) -> float:
    """Constant ``C`` that turns the bubble ansatz into an exact solution."""
    _check(lam, N)
    c1, c2 = (_normalization_at(r, lam, N) for r in _NORMALIZATION_RADII)
    if abs(c1 - c2) > _NORMALIZATION_TOL * max(c1, c2):
        raise ConsistencyError(
            f"normalization differs between radii: {c1!r} vs {c2!r} (lambda={lam}, N={N})"
        )
    return 0.5 * (c1 + c2)


@dataclass(frozen=True)
class BubbleParams:
    N: int
    lam: float
    mu: float = 1.0
    C: float = 1.0

    def __post_init__(self) -> None:
        _check(self.lam, self.N)
        if not (self.mu > 0 and self.C > 0):
            raise DomainError(f"mu and C must be positive, got mu={self.mu}, C={self.C}")

    @classmethod
    def normalized(cls, lam: float, N: int, mu: float = 1.0) -> "BubbleParams":
        return cls(N=N, lam=lam, mu=mu, C=bubble_normalization(lam, N))

    @property
    def a(self) -> float:
        return bubble_exponent(self.lam, self.N)


def bubble_value(p: BubbleParams, r: ArrayLike) -> NDArray[np.float64] | float:
    """Evaluate ``z_mu(r)``; accepts scalars or arrays."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise DomainError("bubble is singular at the origin; need r > 0")
    N = p.N
    m = (N - 2) / 2.0
    vals = p.mu ** (-m) * p.C * _shape(r_arr / p.mu, p.a, decay_exponent(p.lam, N), m)
    return float(vals) if np.ndim(vals) == 0 else vals


def bubble_profile(g: rg.RadialGrid, lam: float, mu: float = 1.0) -> rg.RadialProfile:
    """Normalized bubble sampled on ``g``."""
    p = BubbleParams.normalized(lam, g.N, mu)
    return rg.RadialProfile(g, np.asarray(bubble_value(p, g.r)))


def bubble_decades(lams: Sequence[float], N: int, tail: float = 1e-9, minimum: float = 4.0) -> float:
    """Half-width (in decades around the bubble scale) that leaves at most ``tail`` outside.

    Both tails of the energy density decay like ``r^{+-2 nu}`` in the log variable.
    """
    nu = min(hardy_gap(lam, N) for lam in lams)
    return max(minimum, -math.log10(tail) / (2.0 * nu))


def bubble_grid(
    N: int, lams: Sequence[float], K: int = rg.DEFAULT_K, tail: float = 1e-9, center: float = 1.0
) -> rg.RadialGrid:
    return rg.symmetric_log_grid(N, bubble_decades(lams, N, tail), K, center)


@dataclass(frozen=True)
class SharpConstants:
    N: int
    S_cal: float
    S: tuple[float, float, float]
    A: tuple[float, float, float]
    S_min: float
    C_bar: float


def sharp_constant_ratio(lam: float, N: int) -> float:
    """``S_lam / S_cal = (1 - 4 lam/(N-2)^2)^{(N-1)/N}``."""
    _check(lam, N)
    return (1.0 - 4.0 * lam / (N - 2) ** 2) ** ((N - 1) / N)


def sharp_constants(lams: Sequence[float], N: int, S_cal: float) -> SharpConstants:
    if len(lams) != 3:
        raise DomainError(f"need three lambdas, got {len(lams)}")
    if not S_cal > 0:
        raise DomainError(f"S_cal must be positive, got {S_cal}")
    S = tuple(sharp_constant_ratio(lam, N) * S_cal for lam in lams)
    A = tuple(s ** (N / 2.0) / N for s in S)
    return SharpConstants(
        N=N,
        S_cal=S_cal,
        S=S,  # type: ignore[arg-type]
        A=A,  # type: ignore[arg-type]
        S_min=min(S),
        C_bar=3.0 / N * S_cal ** (N / 2.0),
    )


def rayleigh_quotient(u: rg.RadialProfile, lam: float = 0.0) -> float:
    """``||u||_lam^2 / |u|_{2*}^2``."""
    N = u.grid.N
    qs = rg.critical_exponent(N)
    return rg.weighted_norm_sq(u, lam) / rg.lp_norm_power(u, qs) ** (2.0 / qs)


def sobolev_constant(N: int, K: int = rg.DEFAULT_K) -> float:
    """Best Sobolev constant, from the Rayleigh quotient of ``(1+r^2)^{-(N-2)/2}``."""
    if int(N) != N or N < 3:
        raise DomainError(f"dimension must be an integer >= 3, got {N}")
    decades = max(4.0, 12.0 / (N - 2))
    g = rg.symmetric_log_grid(N, decades, K)
    u = g.profile(lambda r: (1.0 + r * r) ** (-(N - 2) / 2.0))
    return rayleigh_quotient(u, 0.0)


def quadrature_constants(lam: float, N: int, K: int = rg.DEFAULT_K) -> tuple[float, float]:
    """``(S_lam, A_lam)`` measured on the normalized bubble by quadrature."""
    g = bubble_grid(N, [lam], K)
    z = bubble_profile(g, lam)
    norm = rg.weighted_norm_sq(z, lam)
    return rayleigh_quotient(z, lam), norm / N


def bubble_ode_residual(
    lam: float, N: int, K: int = rg.DEFAULT_K, r_range: tuple[float, float] = (1e-2, 1e2)
) -> float:
    """Max relative residual of the discrete radial equation at the normalized bubble.

    The residual at each node is scaled by the sum of the magnitudes of the
    three terms, so the measure is meaningful across the whole range.
    """
    g = bubble_grid(N, [lam], K)
    z = bubble_profile(g, lam).values
    lap = rg.laplacian_stencil(z, g)
    hardy = lam * z / g.r**2
    source = z ** (rg.critical_exponent(N) - 1.0)
    rel = np.abs(lap - hardy - source) / (np.abs(lap) + hardy + source)
    sel = (g.r >= r_range[0]) & (g.r <= r_range[1])
    return float(np.max(rel[sel]))
