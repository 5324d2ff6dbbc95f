"""Energy of the three-component system and Nehari-set bookkeeping.

For ``u = (u1, u2, u3)`` the energy is

    I(u) = 1/2 sum_i ||u_i||_i^2 - 1/2* sum_{i,j} beta_ij int |u_i|^p |u_j|^p,

with ``p = 2*/2 = N/(N-2)`` and ``beta_ii = 1``.  All integrals use the
quadrature of :mod:`hardy_nehari.grid`; :class:`DiscreteSystem` exposes the
same quantities on raw ``(3, K)`` arrays together with exact gradients of the
discrete energy, which is what the minimizers work with.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from numpy.typing import NDArray
from scipy import linalg

from . import grid as rg
from .closed_forms import hardy_limit
from .errors import DomainError, GridMismatchError

FloatArray = NDArray[np.float64]

MEMBERSHIP_RTOL = 1e-8
NONZERO_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    """Symmetric 3x3 coupling matrix with unit diagonal."""

    beta: FloatArray

    def __post_init__(self) -> None:
        b = np.array(self.beta, dtype=float)
        if b.shape != (3, 3):
            raise DomainError(f"coupling matrix must be 3x3, got {b.shape}")
        if not np.allclose(b, b.T, rtol=0, atol=0):
            raise DomainError("coupling matrix must be symmetric")
        if not np.all(np.diag(b) == 1.0):
            raise DomainError("coupling matrix must have unit diagonal")
        b.setflags(write=False)
        object.__setattr__(self, "beta", b)

    @classmethod
    def from_offdiag(cls, b12: float, b13: float, b23: float) -> "CouplingMatrix":
        return cls(np.array([[1.0, b12, b13], [b12, 1.0, b23], [b13, b23, 1.0]]))

    @classmethod
    def uniform(cls, b: float) -> "CouplingMatrix":
        return cls.from_offdiag(b, b, b)

    @property
    def offdiag(self) -> tuple[float, float, float]:
        b = self.beta
        return float(b[0, 1]), float(b[0, 2]), float(b[1, 2])

    def max_offdiag(self) -> float:
        return max(self.offdiag)


@dataclass(frozen=True, eq=False)
class TripleState:
    """Candidate solution ``(u1, u2, u3)`` together with its parameters."""

    components: tuple[rg.RadialProfile, rg.RadialProfile, rg.RadialProfile]
    lambdas: tuple[float, float, float]
    beta: CouplingMatrix

    def __post_init__(self) -> None:
        comps = tuple(self.components)
        if len(comps) != 3:
            raise DomainError("a state has exactly three components")
        g = comps[0].grid
        for c in comps[1:]:
            if not c.grid.same_as(g):
                raise GridMismatchError("state components must share one grid")
        lams = tuple(float(x) for x in self.lambdas)
        Lam = hardy_limit(g.N)
        if len(lams) != 3 or not all(0.0 < x < Lam for x in lams):
            raise DomainError(f"lambdas must lie in (0, {Lam}), got {lams}")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "lambdas", lams)

    @property
    def grid(self) -> rg.RadialGrid:
        return self.components[0].grid

    @property
    def N(self) -> int:
        return self.grid.N

    @property
    def values(self) -> FloatArray:
        return np.stack([c.values for c in self.components])

    def with_values(self, U: FloatArray) -> "TripleState":
        g = self.grid
        comps = tuple(rg.RadialProfile(g, np.array(U[i], dtype=float)) for i in range(3))
        return TripleState(comps, self.lambdas, self.beta)  # type: ignore[arg-type]

    def scaled(self, t: Sequence[float]) -> "TripleState":
        return self.with_values(np.asarray(t, dtype=float)[:, None] * self.values)

    @classmethod
    def from_arrays(
        cls, g: rg.RadialGrid, U: FloatArray, lambdas: Sequence[float], beta: CouplingMatrix
    ) -> "TripleState":
        comps = tuple(rg.RadialProfile(g, np.array(U[i], dtype=float)) for i in range(3))
        return cls(comps, tuple(lambdas), beta)  # type: ignore[arg-type]


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    """``M_B[u]_{hk} = beta_hk int |u_h|^p |u_k|^p``."""

    m: FloatArray


class DiscreteSystem:
    """Array-level energy, gradients and operators for one grid and parameter set."""

    def __init__(self, g: rg.RadialGrid, lambdas: Sequence[float], beta: CouplingMatrix):
        self.grid = g
        self.N = g.N
        self.lambdas = np.asarray(lambdas, dtype=float)
        self.beta = np.asarray(beta.beta)
        self.p = g.N / (g.N - 2.0)
        self.two_star = 2.0 * self.p
        self.omega = g.sphere_area

    # quadratic part -------------------------------------------------------
    def norms(self, U: FloatArray) -> FloatArray:
        """Per-component ``||u_i||_i^2``."""
        g = self.grid
        D = np.diff(U, axis=1)
        dir_e = (D * D) @ g.cell_weights
        hard = (U * U) @ g.hardy_weights
        return self.omega * (dir_e - self.lambdas * hard)

    def apply_operator(self, U: FloatArray) -> FloatArray:
        """Gradient of ``1/2 sum ||u_i||^2``: ``omega (-Delta - lam/r^2) u`` in weak form."""
        g = self.grid
        flux = g.cell_weights * np.diff(U, axis=1)
        out = np.zeros_like(U)
        out[:, :-1] -= flux
        out[:, 1:] += flux
        out -= self.lambdas[:, None] * g.hardy_weights * U
        return self.omega * out

    @cached_property
    def _cholesky(self) -> list[FloatArray]:
        """Banded Cholesky factors of the operator on interior nodes (zero ends)."""
        g = self.grid
        c = g.cell_weights
        diag = c[:-1] + c[1:]
        facs = []
        for lam in self.lambdas:
            ab = np.zeros((2, g.K - 2))
            ab[0, 1:] = -c[1:-1]
            ab[1] = diag - lam * g.hardy_weights[1:-1]
            facs.append(linalg.cholesky_banded(self.omega * ab, lower=False))
        return facs

    def solve_operator(self, G: FloatArray) -> FloatArray:
        """Solve ``A_i x_i = g_i`` with homogeneous values at both ends."""
        out = np.zeros_like(G)
        for i, fac in enumerate(self._cholesky):
            out[i, 1:-1] = linalg.cho_solve_banded((fac, False), G[i, 1:-1], check_finite=False)
        return out

    # nonlinear part -------------------------------------------------------
    def powers(self, U: FloatArray) -> FloatArray:
        return np.abs(U) ** self.p

    def pair_matrix(self, U: FloatArray, P: FloatArray | None = None) -> FloatArray:
        """``int |u_i|^p |u_j|^p`` without the coupling factors."""
        if P is None:
            P = self.powers(U)
        return self.omega * (P * self.grid.weights) @ P.T

    def interaction(self, U: FloatArray) -> FloatArray:
        return self.beta * self.pair_matrix(U)

    def coupled_form(self, U: FloatArray) -> float:
        """``F(u) = sum_ij beta_ij int |u_i|^p |u_j|^p``."""
        return float(self.interaction(U).sum())

    def coupled_form_gradient(self, U: FloatArray, P: FloatArray | None = None) -> FloatArray:
        if P is None:
            P = self.powers(U)
        drive = self.beta @ P
        dp = np.sign(U) * np.abs(U) ** (self.p - 1.0)
        return 2.0 * self.p * self.omega * self.grid.weights * dp * drive

    def energy(self, U: FloatArray) -> float:
        return 0.5 * float(self.norms(U).sum()) - self.coupled_form(U) / self.two_star

    def energy_gradient(self, U: FloatArray) -> FloatArray:
        return self.apply_operator(U) - self.coupled_form_gradient(U) / self.two_star

    def strong_residual(self, U: FloatArray) -> FloatArray:
        """Nodal residual of the Euler-Lagrange system (ends excluded)."""
        G = self.energy_gradient(U) / (self.omega * self.grid.weights)
        G[:, 0] = 0.0
        G[:, -1] = 0.0
        return G

    def residual_norms(self, U: FloatArray) -> FloatArray:
        G = self.strong_residual(U)
        return np.sqrt(self.omega * (G * G) @ self.grid.weights)

    def critical_masses(self, U: FloatArray) -> FloatArray:
        """``|u_i|_{2*}^{2*}``."""
        return np.diag(self.pair_matrix(U))

    def nonzero_mask(self, U: FloatArray, rtol: float = NONZERO_RTOL) -> NDArray[np.bool_]:
        mass = self.critical_masses(U)
        top = mass.max()
        if top <= 0:
            return np.zeros(3, dtype=bool)
        return mass > rtol * top

    def nehari_residuals(self, U: FloatArray) -> FloatArray:
        return self.norms(U) - self.interaction(U).sum(axis=1)


def system_for(state: TripleState) -> DiscreteSystem:
    return DiscreteSystem(state.grid, state.lambdas, state.beta)


def energy(state: TripleState) -> float:
    return system_for(state).energy(state.values)


def gradient_residual(state: TripleState) -> FloatArray:
    """Grid-weighted L^2 norm of each component's Euler-Lagrange residual."""
    return system_for(state).residual_norms(state.values)


def interaction_matrix(state: TripleState) -> InteractionMatrix:
    return InteractionMatrix(system_for(state).interaction(state.values))


def nehari_residuals(state: TripleState) -> FloatArray:
    """``||u_i||_i^2 - sum_j M_B[u]_{ij}`` for each component (signed)."""
    return system_for(state).nehari_residuals(state.values)


@dataclass(frozen=True)
class NehariMembership:
    nonzero: tuple[bool, bool, bool]
    relative_residuals: tuple[float, float, float]
    on_M: bool
    on_N: bool
    total_relative_residual: float


def nehari_membership(state: TripleState, rtol: float = MEMBERSHIP_RTOL) -> NehariMembership:
    sys = system_for(state)
    U = state.values
    norms = sys.norms(U)
    res = sys.nehari_residuals(U)
    nz = sys.nonzero_mask(U)
    rel = np.where(norms > 0, np.abs(res) / np.where(norms > 0, norms, 1.0), 0.0)
    total = float(abs(res.sum()) / norms.sum()) if norms.sum() > 0 else 0.0
    return NehariMembership(
        nonzero=tuple(bool(x) for x in nz),  # type: ignore[arg-type]
        relative_residuals=tuple(float(x) for x in rel),  # type: ignore[arg-type]
        on_M=bool(nz.all() and np.all(rel < rtol)),
        on_N=bool(nz.any() and total < rtol),
        total_relative_residual=total,
    )


@dataclass(frozen=True)
class GershgorinVerdict:
    dominant: bool
    margin: float
    lambda_min: float

    def __bool__(self) -> bool:
        return self.dominant


def gershgorin_pd(m: InteractionMatrix | FloatArray) -> GershgorinVerdict:
    """Strict diagonal dominance test plus the eigenvalue bound it implies."""
    a = np.asarray(m.m if isinstance(m, InteractionMatrix) else m, dtype=float)
    off = np.abs(a).sum(axis=1) - np.abs(np.diag(a))
    margins = np.diag(a) - off
    margin = float(margins.min())
    lam_min = float(linalg.eigvalsh(a).min())
    dominant = margin > 0
    if dominant and lam_min < margin * (1 - 1e-12) - 1e-300:
        raise AssertionError(f"eigenvalue {lam_min} below Gershgorin margin {margin}")
    return GershgorinVerdict(dominant=bool(dominant), margin=margin, lambda_min=lam_min)


# positivity of the coupling form ------------------------------------------

@dataclass(frozen=True)
class ConditionReport:
    """Outcome of the positivity test for ``sum beta_ij int |phi_i|^p |phi_j|^p``."""

    verdict: str
    positive_definite: bool
    nonnegative_coupling: bool
    simplex_minimum: float
    counterexample_value: float | None
    counterexample_trial: int | None
    trials: int


def simplex_minimum(beta: FloatArray) -> tuple[float, FloatArray]:
    """Minimum of ``v^T beta v`` over the probability simplex in R^3.

    Every minimizer is a KKT point on some face, where it solves
    ``beta_SS v_S = c 1`` with ``v_S > 0``; enumerating faces is exact.
    """
    best, arg = np.inf, np.zeros(3)
    for mask in range(1, 8):
        idx = [i for i in range(3) if mask >> i & 1]
        sub = beta[np.ix_(idx, idx)]
        try:
            w = linalg.solve(sub, np.ones(len(idx)))
        except linalg.LinAlgError:
            continue
        if w.sum() == 0:
            continue
        w = w / w.sum()
        if np.any(w <= 0):
            continue
        v = np.zeros(3)
        v[idx] = w
        val = float(v @ beta @ v)
        if val < best:
            best, arg = val, v
    return best, arg


def _random_bump(rng: np.random.Generator, s: FloatArray) -> FloatArray:
    out = np.zeros_like(s)
    for _ in range(int(rng.integers(1, 4))):
        c = rng.uniform(-3.0, 3.0)
        w = rng.uniform(0.3, 2.0)
        out += rng.uniform(0.2, 2.0) * np.exp(-((s - c) / w) ** 2)
    return out


def coupling_positivity_check(
    beta: CouplingMatrix, trials: int = 64, seed: int = 0, N: int = 4, K: int = 512
) -> ConditionReport:
    """Sufficient-condition test plus randomized falsification.

    Trial 0 uses three equal profiles; when the exact simplex minimum of the
    coupling form is nonpositive, one trial uses profiles proportional to the
    minimizing weights, which is then a guaranteed counterexample.
    """
    if trials < 1:
        raise DomainError("need at least one trial")
    b = np.asarray(beta.beta)
    pd = bool(linalg.eigvalsh(b).min() > 0)
    nonneg = bool(np.all(b[~np.eye(3, dtype=bool)] >= 0))
    smin, sarg = simplex_minimum(b)
    g = rg.make_log_grid(N, 1e-3, 1e3, K)
    s = np.log(g.r)
    p = N / (N - 2.0)
    rng = np.random.default_rng(seed)
    found_val, found_trial = None, None
    for k in range(trials):
        if k == 0:
            phi = _random_bump(rng, s)
            Phi = np.stack([phi, phi, phi])
        elif k == 1 and smin <= 0:
            phi = _random_bump(rng, s)
            Phi = sarg[:, None] ** (1.0 / p) * phi
        else:
            Phi = np.stack([_random_bump(rng, s) for _ in range(3)])
        P = np.abs(Phi) ** p
        val = float(np.sum(b * (g.sphere_area * (P * g.weights) @ P.T)))
        if val <= 0 and found_val is None:
            found_val, found_trial = val, k
    if found_val is not None:
        verdict = "counterexample"
    elif pd or nonneg or smin > 0:
        verdict = "proved-sufficient"
    else:
        verdict = "unknown"
    return ConditionReport(
        verdict=verdict,
        positive_definite=pd,
        nonnegative_coupling=nonneg,
        simplex_minimum=smin,
        counterexample_value=found_val,
        counterexample_trial=found_trial,
        trials=trials,
    )
