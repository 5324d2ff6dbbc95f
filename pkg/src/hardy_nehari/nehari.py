"""Projections of trial states onto Nehari sets.

Along the fiber ``t -> (t1 u1, t2 u2, t3 u3)`` the energy is

    f(t) = 1/2 sum_i a_i t_i^2 - 1/2* sum_ij M_ij t_i^p t_j^p,

where ``a_i = ||u_i||_i^2`` and ``M = M_B[u]``.  Its positive critical points are
exactly the scalings that put the state on the per-component Nehari set.
The coefficient-level functions below work on ``(a, M)`` directly; the
``project_*`` wrappers assemble those data from a :class:`TripleState`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import NDArray
from scipy import linalg, optimize

from . import grid as rg
from .errors import (
    DomainError,
    NoConvergenceError,
    NonpositiveCoefficientError,
    NoRootError,
    NotDominantError,
    NotPDError,
    ZeroProfileError,
)
from .functional import DiscreteSystem, TripleState, gershgorin_pd, system_for

FloatArray = NDArray[np.float64]
Regime = Literal["linear-N4", "cubic-N3", "general-p", "two-block"]

NEWTON_DAMPING = 0.5
NEWTON_MAX_ITER = 200
NEWTON_TOL = 1e-12
BRACKET_START = 1e-9
T_MAX = 1e6


@dataclass(frozen=True)
class NehariCoefficients:
    t: tuple[float, float, float]
    regime: Regime
    converged: bool
    iterations: int
    residual: float = 0.0


def project_single(u: rg.RadialProfile, lam: float) -> float:
    """Scaling ``t`` with ``t^{2*-2} = ||u||_lam^2 / |u|_{2*}^{2*}``."""
    if u.is_zero():
        raise ZeroProfileError("cannot project the zero profile")
    N = u.grid.N
    qs = rg.critical_exponent(N)
    norm = rg.weighted_norm_sq(u, lam)
    mass = rg.lp_norm_power(u, qs)
    return (norm / mass) ** (1.0 / (qs - 2.0))


def _active(a: FloatArray, M: FloatArray) -> NDArray[np.intp]:
    idx = np.flatnonzero(np.diag(M) > 0)
    if idx.size == 0:
        raise ZeroProfileError("all components vanish")
    return idx


def fiber_energy(t: FloatArray, a: FloatArray, M: FloatArray, p: float) -> float:
    tp = np.abs(t) ** p
    return 0.5 * float(np.dot(a, t * t)) - float(tp @ M @ tp) / (2.0 * p)


def constraint_residuals(t: FloatArray, a: FloatArray, M: FloatArray, p: float) -> FloatArray:
    """Relative per-component Nehari residuals of the scaled state."""
    tp = t**p
    lhs = a * t * t
    rhs = tp * (M @ tp)
    return np.abs(lhs - rhs) / np.where(lhs > 0, lhs, 1.0)


# linear regime (N = 4) -----------------------------------------------------

def linear_n4_coefficients(a: FloatArray, M: FloatArray) -> FloatArray:
    """Solve ``M s = a`` and return ``t = sqrt(s)``; zero rows are left at zero."""
    idx = _active(a, M)
    sub = M[np.ix_(idx, idx)]
    verdict = gershgorin_pd(sub)
    if not verdict.dominant:
        raise NotDominantError(f"interaction matrix not diagonally dominant (margin {verdict.margin:.3e})")
    s = linalg.solve(sub, a[idx], assume_a="sym")
    if np.any(s <= 0):
        raise NonpositiveCoefficientError(f"linear Nehari system gave s = {s}")
    t = np.zeros(3)
    t[idx] = np.sqrt(s)
    return t


def project_linear_N4(state: TripleState) -> NehariCoefficients:
    if state.N != 4:
        raise DomainError(f"linear projection needs N=4, got N={state.N}")
    sys = system_for(state)
    U = state.values
    a, M = sys.norms(U), sys.interaction(U)
    t = linear_n4_coefficients(a, M)
    res = float(constraint_residuals(t, a, M, sys.p)[t > 0].max())
    return NehariCoefficients(tuple(t), "linear-N4", True, 1, res)  # type: ignore[arg-type]


# cubic regime (N = 3) ------------------------------------------------------

def cubic_n3_coefficients(
    a: FloatArray, B: FloatArray, *, allow_negative_coupling: bool = False
) -> tuple[FloatArray, int]:
    """Maximize the N=3 fiber energy through the concave problem in ``s = t^3``.

    ``g(s) = 1/2 sum a_i s_i^{2/3} - 1/6 s^T B s`` has Hessian
    ``-(1/9) diag(a s^{-4/3}) - (1/3) B``, negative definite when ``B`` is
    positive definite, so its stationary point is the unique fiber maximum.
    """
    idx = _active(a, B)
    aa = a[idx]
    BB = B[np.ix_(idx, idx)]
    if not allow_negative_coupling and np.any(BB[~np.eye(idx.size, dtype=bool)] < 0):
        raise DomainError("cubic projection is only supported for nonnegative coupling")
    if linalg.eigvalsh(BB).min() <= 0:
        raise NotPDError("interaction matrix is not positive definite")

    # work in units where the decoupled maximizer is t = 1, so the Hessian is O(1)
    c = (aa / np.diag(BB)) ** 0.25
    aa = aa * c * c
    BB = BB * np.outer(c**3, c**3)

    def g(s: FloatArray) -> float:
        return 0.5 * float(np.dot(aa, s ** (2.0 / 3.0))) - float(s @ BB @ s) / 6.0

    def grad(s: FloatArray) -> FloatArray:
        return (aa * s ** (-1.0 / 3.0) - BB @ s) / 3.0

    s = (aa / np.diag(BB)) ** 0.75
    for it in range(1, NEWTON_MAX_ITER + 1):
        gr = grad(s)
        scale = aa * s ** (-1.0 / 3.0)
        if np.max(np.abs(3.0 * gr) / scale) < NEWTON_TOL:
            t = np.zeros(3)
            t[idx] = c * np.cbrt(s)
            return t, it
        H = -np.diag(aa * s ** (-4.0 / 3.0)) / 9.0 - BB / 3.0
        step = linalg.solve(-H, gr, assume_a="pos")
        g0 = g(s)
        tau = 1.0
        while True:
            trial = s + tau * step
            if np.all(trial > 0) and g(trial) >= g0 - 1e-15 * abs(g0):
                break
            tau *= NEWTON_DAMPING
            if tau < 1e-12:
                break
        s = trial if np.all(trial > 0) else s
    raise NoConvergenceError(f"cubic Nehari projection did not converge in {NEWTON_MAX_ITER} steps")


def project_cubic_N3(state: TripleState, *, allow_negative_coupling: bool = False) -> NehariCoefficients:
    if state.N != 3:
        raise DomainError(f"cubic projection needs N=3, got N={state.N}")
    sys = system_for(state)
    U = state.values
    a, M = sys.norms(U), sys.interaction(U)
    t, its = cubic_n3_coefficients(a, M, allow_negative_coupling=allow_negative_coupling)
    res = float(constraint_residuals(t, a, M, sys.p)[t > 0].max())
    return NehariCoefficients(tuple(t), "cubic-N3", True, its, res)  # type: ignore[arg-type]


# two-block regime (N >= 5) -------------------------------------------------

@dataclass(frozen=True)
class TwoBlockData:
    """Block norms and pairings entering the two-block Nehari system.

    ``a12 t^2 = F12 t^{2p} - B t^p s^p`` and ``a3 s^2 = F3 s^{2p} - B t^p s^p``.
    """

    a12: float
    F12: float
    a3: float
    F3: float
    B: float
    p: float

    @classmethod
    def from_arrays(cls, a: FloatArray, M: FloatArray, p: float) -> "TwoBlockData":
        return cls(
            a12=float(a[0] + a[1]),
            F12=float(M[:2, :2].sum()),
            a3=float(a[2]),
            F3=float(M[2, 2]),
            B=-float(M[0, 2] + M[1, 2]),
            p=p,
        )

    @property
    def t_floor(self) -> float:
        """Smallest ``t`` for which the first equation admits ``s >= 0``."""
        return (self.a12 / self.F12) ** (1.0 / (2.0 * self.p - 2.0))

    def h(self, t: float) -> float:
        p = self.p
        return max((self.F12 * t**p - self.a12 * t ** (2.0 - p)) / self.B, 0.0) ** (1.0 / p)

    def g(self, t: float) -> float:
        """Root function, positive just above ``t_floor`` where it tends to ``B t_floor^p``."""
        p = self.p
        s = self.h(t)
        return self.a3 * s ** (2.0 - p) + self.B * t**p - self.F3 * s**p

    def residuals(self, t: float, s: float) -> tuple[float, float]:
        p = self.p
        cross = self.B * t**p * s**p
        lhs1, lhs2 = self.a12 * t * t, self.a3 * s * s
        r1 = abs(lhs1 - (self.F12 * t ** (2 * p) - cross)) / lhs1
        r2 = abs(lhs2 - (self.F3 * s ** (2 * p) - cross)) / lhs2
        return r1, r2


def two_block_coefficients(data: TwoBlockData, t_max: float = T_MAX) -> tuple[float, float, int]:
    """Solve the two-block system by bracketing the first sign change of ``g``."""
    if not data.B > 0:
        raise DomainError(f"two-block projection needs net competitive cross coupling, got B={data.B}")
    if min(data.a12, data.F12, data.a3, data.F3) <= 0:
        raise ZeroProfileError("both blocks must be nonzero")
    t0 = data.t_floor
    offset = BRACKET_START
    lo = t0 * (1.0 + offset)
    hi = 2.0 * t0
    doublings = 0
    # g(t0+) = B t0^p > 0; a weak coupling puts the root closer to t0 than the default offset
    while data.g(lo) <= 0:
        hi = lo
        offset *= 1e-2
        lo = t0 * (1.0 + offset)
        doublings += 1
        if offset < 1e-15:
            raise NoRootError(f"root function not positive next to t_floor={t0:.17g}")
    while data.g(hi) > 0:
        lo = hi
        hi *= 2.0
        doublings += 1
        if hi > t_max * t0:
            raise NoRootError(
                f"no sign change of g up to t={hi:.3e}; cross coupling too strong for a Nehari point"
            )
    t, info = optimize.brentq(data.g, lo, hi, xtol=1e-15 * hi, rtol=1e-15, full_output=True)
    return float(t), data.h(t), doublings + info.iterations


def project_two_block(state: TripleState, p: float | None = None) -> NehariCoefficients:
    N = state.N
    if N < 5:
        raise DomainError(f"two-block projection needs N >= 5, got N={N}")
    sys = system_for(state)
    if p is None:
        p = sys.p
    if abs(p - sys.p) > 1e-14:
        raise DomainError(f"p must equal N/(N-2) = {sys.p}, got {p}")
    b12, b13, b23 = state.beta.offdiag
    if not (b12 > 0 and b13 < 0 and b23 < 0):
        raise DomainError("two-block projection needs beta12 > 0, beta13 < 0, beta23 < 0")
    U = state.values
    data = TwoBlockData.from_arrays(sys.norms(U), sys.interaction(U), p)
    t, s, its = two_block_coefficients(data)
    r1, r2 = data.residuals(t, s)
    return NehariCoefficients((t, t, s), "two-block", max(r1, r2) < 1e-8, its, max(r1, r2))


# generic fiber maximization ------------------------------------------------

def segment_maximizer(
    a: FloatArray, M: FloatArray, p: float, regime: Regime = "general-p", grid_points: int = 41
) -> tuple[FloatArray, float]:
    """Coarse scan of the fiber energy followed by a bounded local polish."""
    idx = _active(a, M)
    aa, MM = a[idx], M[np.ix_(idx, idx)]
    if regime == "two-block" and idx.size == 3:
        blocks = [np.array([0, 1]), np.array([2])]
    else:
        blocks = [np.array([k]) for k in range(idx.size)]
    nb = len(blocks)

    def expand(x: FloatArray) -> FloatArray:
        t = np.empty(idx.size)
        for b, xv in zip(blocks, x):
            t[b] = xv
        return t

    def f(x: FloatArray) -> float:
        return fiber_energy(expand(np.abs(x)), aa, MM, p)

    decoupled = (aa / np.diag(MM)) ** (1.0 / (2.0 * p - 2.0))
    upper = 3.0 * float(decoupled.max())
    axis = np.linspace(0.0, upper, grid_points)
    mesh = np.stack(np.meshgrid(*([axis] * nb), indexing="ij"), axis=-1).reshape(-1, nb)
    vals = np.array([f(x) for x in mesh])
    starts = [mesh[int(np.argmax(vals))], np.ones(nb)]
    best_x, best_v = starts[0], float(vals.max())
    for x0 in starts:
        res = optimize.minimize(
            lambda x: -f(x), x0, method="L-BFGS-B", bounds=[(0.0, upper)] * nb,
            options={"ftol": 1e-15, "gtol": 1e-12},
        )
        if -res.fun > best_v:
            best_x, best_v = res.x, float(-res.fun)
    t = np.zeros(3)
    t[idx] = expand(np.abs(best_x))
    return t, best_v


def max_over_segment(state: TripleState, regime: Regime = "general-p") -> float:
    """Maximum of ``I(t1 u1, t2 u2, t3 u3)`` over nonnegative scalings."""
    sys = system_for(state)
    U = state.values
    _, val = segment_maximizer(sys.norms(U), sys.interaction(U), sys.p, regime)
    return val


def project(state: TripleState, regime: Regime | None = None) -> NehariCoefficients:
    """Dispatch to the regime matching the state's dimension."""
    N = state.N
    if regime is None:
        regime = {3: "cubic-N3", 4: "linear-N4"}.get(N, "two-block")
    if regime == "linear-N4":
        return project_linear_N4(state)
    if regime == "cubic-N3":
        return project_cubic_N3(state)
    if regime == "two-block":
        return project_two_block(state)
    sys = system_for(state)
    U = state.values
    a, M = sys.norms(U), sys.interaction(U)
    t, _ = segment_maximizer(a, M, sys.p, "general-p")
    res = float(constraint_residuals(t, a, M, sys.p)[t > 0].max())
    return NehariCoefficients(tuple(t), "general-p", res < 1e-8, 1, res)  # type: ignore[arg-type]


def coefficients_for(sys: DiscreteSystem, U: FloatArray, regime: Regime, **kw) -> FloatArray:
    """Array-level projection used by the minimizers; returns the per-component scalings."""
    a, M = sys.norms(U), sys.interaction(U)
    if regime == "linear-N4":
        return linear_n4_coefficients(a, M)
    if regime == "cubic-N3":
        t, _ = cubic_n3_coefficients(a, M, **kw)
        return t
    if regime == "two-block":
        t, s, _ = two_block_coefficients(TwoBlockData.from_arrays(a, M, sys.p))
        return np.array([t, t, s])
    raise DomainError(f"unsupported regime {regime}")
