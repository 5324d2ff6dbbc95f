"""Energy minimization on Nehari sets and the experiments built on it.

All minimizers share one engine: a preconditioned nonlinear conjugate-gradient
descent in which the preconditioner is the inverse of the Hardy operator
``-Delta - lam_i/r^2`` (so the metric is the energy norm itself). Steps come
from Armijo backtracking, with a slope-based approximate Wolfe test once value
differences drop below round-off, and the iterate is moved back onto its
Nehari set after every accepted step.

Objectives
----------
* ground state on N: the quotient ``E(u) / F(u)^{2/2*}``, invariant under
  ``u -> c u``; the iterate is rescaled onto N.
* least energy on M (N = 3, 4): ``u -> I(t(u) u)`` with ``t(u)`` the regime's
  Nehari projection, invariant under componentwise scaling.
* two-block level (N >= 5): the same with the two-block projection.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
from numpy.typing import NDArray

from . import grid as rg
from .closed_forms import bubble_decades, bubble_profile, hardy_limit, sharp_constants, sobolev_constant
from .errors import (
    DomainError,
    InvalidQuotientError,
    NoConvergenceError,
    NotOnManifoldError,
    ProjectionFailure,
)
from .functional import (
    CouplingMatrix,
    DiscreteSystem,
    TripleState,
    coupling_positivity_check,
    nehari_membership,
    system_for,
)
from .nehari import Regime, TwoBlockData, coefficients_for, constraint_residuals
from .thresholds import n3_chain

FloatArray = NDArray[np.float64]
LevelKind = Literal["ground-state-N", "least-energy-M", "pair-A_ij", "scalar-A_i", "two-block-Atilde"]

ZERO_COMPONENT_RTOL = 1e-6
DEFAULT_SCHEDULE = tuple(2.0**k for k in range(11))


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 3000
    tol: float = 1e-6
    polish_factor: float = 1e-2
    polish_iter: int = 200
    restarts: int = 8
    seed: int = 0
    K: int = rg.DEFAULT_K
    r_min: float | None = None
    r_max: float | None = None
    tail: float = 1e-9
    raise_on_failure: bool = False


def solver_grid(N: int, lams: Sequence[float], opts: SolverOptions = SolverOptions()) -> rg.RadialGrid:
    """Grid wide enough that truncation costs less than ``opts.tail`` of a bubble's energy."""
    if opts.r_min is not None and opts.r_max is not None:
        return rg.make_log_grid(N, opts.r_min, opts.r_max, opts.K)
    return rg.symmetric_log_grid(N, bubble_decades(lams, N, opts.tail), opts.K)


@dataclass(frozen=True)
class RunSummary:
    energy: float
    classification: str
    converged: bool
    iterations: int
    residual: float


@dataclass(frozen=True)
class MinimizeResult:
    state: TripleState
    energy: float
    level_kind: LevelKind
    classification: str
    residuals: dict[str, float]
    iterations: int
    converged: bool
    runs: tuple[RunSummary, ...] = field(default_factory=tuple)

    def as_map(self) -> dict[str, str]:
        out = {
            "level_kind": self.level_kind,
            "classification": self.classification,
            "energy": f"{self.energy:.17g}",
            "iterations": str(self.iterations),
            "converged": str(self.converged).lower(),
        }
        for k, v in self.residuals.items():
            out[f"residual_{k}"] = f"{v:.17g}"
        return out


def classify(masses: FloatArray, rtol: float = ZERO_COMPONENT_RTOL) -> str:
    """Label a state by its nonzero components.

    A component counts as zero when ``|u_i|_{2*}`` is below ``rtol`` times the
    largest one.
    """
    norms = np.asarray(masses, dtype=float)
    top = norms.max() if norms.size else 0.0
    if top <= 0:
        return "trivial"
    zero = int(np.sum(norms < rtol * top))
    if zero == 0:
        return "fully-nontrivial"
    return f"semi-trivial({zero} zero)"


def _critical_norms(sys: DiscreteSystem, U: FloatArray) -> FloatArray:
    return sys.critical_masses(U) ** (1.0 / sys.two_star)


def _dual_residual(sys: DiscreteSystem, U: FloatArray) -> float:
    """``||I'(u)||_{A^{-1}} / ||u||_A``: zero exactly at critical points."""
    G = sys.energy_gradient(U)
    G[:, 0] = G[:, -1] = 0.0
    Z = sys.solve_operator(G)
    num = float(np.sum(G * Z))
    den = float(np.sum(U * sys.apply_operator(U)))
    return math.sqrt(max(num, 0.0) / den) if den > 0 else 0.0


# ---------------------------------------------------------------------------
# descent engine
# ---------------------------------------------------------------------------

@dataclass
class _Objective:
    """Value/gradient oracle with a reprojection hook.

    ``evaluate(x)`` returns ``(value, grad, scales)`` or raises; ``scales``
    are the per-component factors that move ``x`` onto the target set.
    """

    evaluate: Callable[[FloatArray], tuple[float, FloatArray, FloatArray]]
    mask: NDArray[np.bool_]


def _descent(
    sys: DiscreteSystem,
    obj: _Objective,
    x0: FloatArray,
    opts: SolverOptions,
) -> tuple[FloatArray, int, bool, float]:
    """Preconditioned Polak-Ribiere descent with Armijo or approximate Wolfe steps."""
    mask = obj.mask[:, None]

    def precond(G: FloatArray) -> FloatArray:
        G = G * mask
        G[:, 0] = G[:, -1] = 0.0
        return sys.solve_operator(G) * mask

    x = x0 * mask
    x[:, 0] = x[:, -1] = 0.0
    f, g, sc = obj.evaluate(x)
    x = sc[:, None] * x
    f, g, _ = obj.evaluate(x)
    z = precond(g)
    d = -z
    gz = float(np.sum(g * z))
    tau = 1.0
    res = _dual_residual(sys, x)
    # after reaching tol, keep going toward tol*polish_factor for a bounded number of steps
    first_conv = None
    for it in range(1, opts.max_iter + 1):
        if res < opts.tol:
            first_conv = it if first_conv is None else first_conv
            if res < opts.tol * opts.polish_factor or it - first_conv >= opts.polish_iter:
                return x, it - 1, True, res
        slope = float(np.sum(g * d))
        if slope >= 0:
            d, slope = -z, -gz
        step = min(2.0 * tau, 1.0)
        accepted = False
        while step > 1e-14:
            trial = x + step * d
            try:
                ft, gt, sct = obj.evaluate(trial)
            except (ProjectionFailure, NoConvergenceError, FloatingPointError, InvalidQuotientError, ZeroDivisionError):
                step *= 0.5
                continue
            if np.isfinite(ft) and ft <= f + 1e-4 * step * slope:
                accepted = True
                break
            # approximate Wolfe: below sqrt(eps) values stop resolving decrease, slopes still do
            if np.isfinite(ft) and ft <= f + 1e-12 * abs(f):
                dslope = float(np.sum(gt * d))
                if 0.9 * slope <= dslope <= -0.9 * slope:
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            return x, it, res < opts.tol, res
        tau = step
        # reproject and carry the search data along the rescaling
        x_new = sct[:, None] * trial
        f_new, g_new, _ = obj.evaluate(x_new)
        d = sct[:, None] * d
        g_old = g / sct[:, None]
        z_old = z / sct[:, None]
        z_new = precond(g_new)
        denom = float(np.sum(g_old * z_old))
        beta = max(0.0, float(np.sum(g_new * (z_new - z_old))) / denom) if denom > 0 else 0.0
        d = -z_new + beta * d
        x, f, g, z = x_new, f_new, g_new, z_new
        gz = float(np.sum(g * z))
        res = _dual_residual(sys, x)
    return x, opts.max_iter, res < opts.tol, res


def _quotient_objective(sys: DiscreteSystem, mask: NDArray[np.bool_]) -> _Objective:
    q = 2.0 / sys.two_star

    def evaluate(x: FloatArray) -> tuple[float, FloatArray, FloatArray]:
        E = float(sys.norms(x).sum())
        F = sys.coupled_form(x)
        if not F > 0:
            raise InvalidQuotientError(f"F(u) = {F:.3e} <= 0")
        val = E / F**q
        grad = 2.0 * sys.apply_operator(x) / F**q - q * E * F ** (-q - 1.0) * sys.coupled_form_gradient(x)
        t = (E / F) ** (1.0 / (sys.two_star - 2.0))
        return val, grad * mask[:, None], np.full(3, t)

    return _Objective(evaluate, mask)


def _manifold_objective(sys: DiscreteSystem, mask: NDArray[np.bool_], regime: Regime) -> _Objective:
    kw = {"allow_negative_coupling": True} if regime == "cubic-N3" else {}

    def evaluate(x: FloatArray) -> tuple[float, FloatArray, FloatArray]:
        t = coefficients_for(sys, x, regime, **kw)
        v = t[:, None] * x
        val = sys.energy(v)
        grad = t[:, None] * sys.energy_gradient(v)
        t_safe = np.where(mask, t, 1.0)
        return val, grad * mask[:, None], t_safe

    return _Objective(evaluate, mask)


# ---------------------------------------------------------------------------
# initial states
# ---------------------------------------------------------------------------

def random_start(
    g: rg.RadialGrid, lams: Sequence[float], rng: np.random.Generator, mask: Sequence[bool] = (True,) * 3
) -> FloatArray:
    """Dilated bubbles with scales in ``[0.5, 2]`` and amplitudes in ``[0.5, 1.5]``."""
    U = np.zeros((3, g.K))
    for i in range(3):
        mu = rng.uniform(0.5, 2.0)
        amp = rng.uniform(0.5, 1.5)
        if mask[i]:
            U[i] = amp * bubble_profile(g, lams[i], mu).values
    U[:, 0] = U[:, -1] = 0.0
    return U


def _finish(
    sys: DiscreteSystem,
    U: FloatArray,
    lambdas: Sequence[float],
    beta: CouplingMatrix,
    kind: LevelKind,
    its: int,
    conv: bool,
    res: float,
    runs: Sequence[RunSummary],
) -> MinimizeResult:
    state = TripleState.from_arrays(sys.grid, U, lambdas, beta)
    mem = nehari_membership(state)
    return MinimizeResult(
        state=state,
        energy=sys.energy(U),
        level_kind=kind,
        classification=classify(_critical_norms(sys, U)),
        residuals={
            "gradient_relative": res,
            "strong_l2": float(np.linalg.norm(sys.residual_norms(U))),
            "constraint_max": max(mem.relative_residuals),
            "constraint_total": mem.total_relative_residual,
        },
        iterations=its,
        converged=conv,
        runs=tuple(runs),
    )


def _best_of(
    sys: DiscreteSystem,
    obj: _Objective,
    starts: Sequence[FloatArray],
    opts: SolverOptions,
) -> tuple[FloatArray, int, bool, float, list[RunSummary]]:
    best = None
    runs: list[RunSummary] = []
    for x0 in starts:
        x, its, conv, res = _descent(sys, obj, x0, opts)
        e = sys.energy(x)
        runs.append(RunSummary(e, classify(_critical_norms(sys, x)), conv, its, res))
        # prefer converged runs, then lower energy
        key = (not conv, e)
        if best is None or key < best[0]:
            best = (key, x, its, conv, res)
    assert best is not None
    if opts.raise_on_failure and not best[3]:
        raise NoConvergenceError(f"no restart converged (best residual {best[4]:.3e})")
    return best[1], best[2], best[3], best[4], runs


def _starts(state0: TripleState, opts: SolverOptions, mask: NDArray[np.bool_]) -> list[FloatArray]:
    rng = np.random.default_rng(opts.seed)
    U0 = state0.values
    starts = []
    if np.all(np.any(U0 != 0, axis=1)[mask]):
        starts.append(U0)
    while len(starts) < max(opts.restarts, 1):
        starts.append(random_start(state0.grid, state0.lambdas, rng, mask))
    return starts


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def scalar_ground_state(lam: float, N: int, g: rg.RadialGrid | None = None,
                        opts: SolverOptions = SolverOptions()) -> MinimizeResult:
    """Minimize the Rayleigh quotient from a Gaussian bump and rescale onto Nehari."""
    Lam = hardy_limit(N)
    if not (0 < lam < Lam):
        raise DomainError(f"lambda must lie in (0, {Lam})")
    if g is None:
        g = solver_grid(N, [lam], opts)
    beta = CouplingMatrix.uniform(0.0)
    lams = (lam, lam, lam)
    sys = DiscreteSystem(g, lams, beta)
    mask = np.array([True, False, False])
    U0 = np.zeros((3, g.K))
    U0[0] = np.exp(-(g.r**2))
    x, its, conv, res = _descent(sys, _quotient_objective(sys, mask), U0, opts)
    if opts.raise_on_failure and not conv:
        raise NoConvergenceError(f"scalar ground state residual {res:.3e}")
    run = RunSummary(sys.energy(x), "semi-trivial(2 zero)", conv, its, res)
    return _finish(sys, x, lams, beta, "scalar-A_i", its, conv, res, [run])


def ground_state_level(state0: TripleState, opts: SolverOptions = SolverOptions()) -> MinimizeResult:
    """Minimize ``E/F^{2/2*}`` over nonzero triples; the result estimates the ground-state level."""
    report = coupling_positivity_check(state0.beta, trials=32, seed=opts.seed, N=state0.N)
    if report.verdict == "counterexample":
        raise DomainError("coupling form is not positive on all profiles; the quotient is undefined")
    sys = system_for(state0)
    mask = np.ones(3, dtype=bool)
    obj = _quotient_objective(sys, mask)
    x, its, conv, res, runs = _best_of(sys, obj, _starts(state0, opts, mask), opts)
    return _finish(sys, x, state0.lambdas, state0.beta, "ground-state-N", its, conv, res, runs)


def _regime_for(N: int) -> Regime:
    return {3: "cubic-N3", 4: "linear-N4"}.get(N, "two-block")


def least_energy_level_M(state0: TripleState, opts: SolverOptions = SolverOptions()) -> MinimizeResult:
    """Minimize the energy over the per-component Nehari set (two-block set for N >= 5)."""
    N = state0.N
    regime = _regime_for(N)
    if regime == "two-block":
        b12, b13, b23 = state0.beta.offdiag
        if not (b12 > 0 and b13 < 0 and b23 < 0):
            raise DomainError("for N >= 5 the two-block level needs beta12 > 0 > beta13, beta23")
    sys = system_for(state0)
    mask = np.ones(3, dtype=bool)
    obj = _manifold_objective(sys, mask, regime)
    x, its, conv, res, runs = _best_of(sys, obj, _starts(state0, opts, mask), opts)
    kind: LevelKind = "two-block-Atilde" if regime == "two-block" else "least-energy-M"
    return _finish(sys, x, state0.lambdas, state0.beta, kind, its, conv, res, runs)


def pair_level(
    lambdas: Sequence[float],
    beta12: float,
    N: int,
    opts: SolverOptions = SolverOptions(),
    *,
    g: rg.RadialGrid | None = None,
    lambda3: float | None = None,
    beta13: float = 0.0,
    beta23: float = 0.0,
) -> MinimizeResult:
    """Least energy of the pair subsystem ``(u1, u2)`` with ``u3 = 0``.

    For N = 3, 4 this is the per-component Nehari level; for N >= 5 the pair's
    ground-state level on its single-constraint Nehari set.  ``lambda3`` and the
    cross couplings only populate the returned state's parameters.
    """
    if len(lambdas) != 2:
        raise DomainError("pair_level takes two lambdas")
    l1, l2 = (float(x) for x in lambdas)
    l3 = l1 if lambda3 is None else float(lambda3)
    lams = (l1, l2, l3)
    if g is None:
        g = solver_grid(N, lams, opts)
    beta = CouplingMatrix.from_offdiag(beta12, beta13, beta23)
    # the optimization itself sees the pair only
    sys = DiscreteSystem(g, lams, CouplingMatrix.from_offdiag(beta12, 0.0, 0.0))
    mask = np.array([True, True, False])
    if N >= 5:
        obj = _quotient_objective(sys, mask)
    else:
        obj = _manifold_objective(sys, mask, _regime_for(N))
    rng = np.random.default_rng(opts.seed)
    starts = [random_start(g, lams, rng, mask) for _ in range(max(opts.restarts, 1))]
    x, its, conv, res, runs = _best_of(sys, obj, starts, opts)
    out = _finish(sys, x, lams, beta, "pair-A_ij", its, conv, res, runs)
    # energy of the pair alone (cross terms with the zero third slot vanish anyway)
    return out


def synchronized_pair_energy(A_scalar: float, beta12: float, N: int) -> tuple[float, float, float]:
    """Reduced problem for ``(sqrt(k) w, sqrt(l) w)`` with ``w`` a normalized bubble.

    With ``c_i`` the amplitudes the Nehari conditions read
    ``c_i^{2-p} = sum_j beta_ij c_j^p``. Returns ``(energy, c1, c2)`` for the
    least energy positive solution, where ``energy = (c1^2 + c2^2) A_scalar``.
    """
    from scipy import optimize

    p = N / (N - 2.0)
    B = np.array([[1.0, beta12], [beta12, 1.0]])

    def F(c: FloatArray) -> FloatArray:
        c = np.abs(c)
        return c ** (2.0 - p) - B @ c**p

    best = None
    for c1 in np.linspace(0.2, 2.0, 10):
        for c2 in np.linspace(0.2, 2.0, 10):
            sol = optimize.root(F, np.array([c1, c2]), tol=1e-14)
            c = np.abs(sol.x)
            if not sol.success or np.any(c < 1e-6) or np.max(np.abs(F(c))) > 1e-10:
                continue
            e = float(np.sum(c * c)) * A_scalar
            if best is None or e < best[0]:
                best = (e, float(c[0]), float(c[1]))
    if best is None:
        raise NoConvergenceError("reduced pair system has no positive solution")
    return best


# ---------------------------------------------------------------------------
# certificate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CertificateReport:
    N: int
    bound: float
    threshold: float
    per_component_bound: tuple[float, float, float]
    hypothesis: tuple[bool, bool, bool]
    chain_holds: tuple[bool, bool, bool]
    max_beta: float
    on_M: bool

    @property
    def consistent(self) -> bool:
        """True unless the state beats every single-component competitor with too-small coupling."""
        return not all(self.hypothesis) or self.max_beta >= self.bound * (1 - 1e-6)


def amgm_gap(x: float, y: float) -> float:
    """``x y^2 + 2 x^2 y - 2^{3/2} (x y)^{3/2}``, nonnegative for ``x, y >= 0``."""
    return x * y * y + 2.0 * x * x * y - 2.0**1.5 * (x * y) ** 1.5


def semi_triviality_certificate(state: TripleState, rtol: float = 1e-6) -> CertificateReport:
    """Evaluate the inequality chain that rules out fully nontrivial ground states.

    For each component ``i`` the chain compares ``u`` with the Nehari multiple
    of ``(u_i, 0, 0)``.  If ``I(u)`` does not exceed that competitor and the
    state is a critical point, ``max beta_ij`` must be at least the returned
    bound (N=4: ``sqrt(sum |u_j|_4^4) / sum |u_j|_4^2``; N=3: the cube root of
    the AM-GM quotient), both of which are at least ``sqrt(2)/2`` resp. ``1``.
    """
    N = state.N
    if N not in (3, 4):
        raise DomainError(f"certificate exists for N in (3, 4), got {N}")
    sys = system_for(state)
    U = state.values
    mem = nehari_membership(state)
    if not all(mem.nonzero):
        raise NotOnManifoldError("state is not fully nontrivial")
    if mem.total_relative_residual > rtol:
        raise NotOnManifoldError(f"state is off N (relative residual {mem.total_relative_residual:.2e})")
    norms = sys.norms(U)
    P = sys.pair_matrix(U)  # int |u_i|^p |u_j|^p
    mass = np.diag(P)  # |u_i|_{2*}^{2*}
    beta = np.asarray(state.beta.beta)
    p = sys.p
    I_u = sys.energy(U)
    bounds, hyp, chain = [], [], []
    for i in range(3):
        others = [j for j in range(3) if j != i]
        ti = (norms[i] / mass[i]) ** (1.0 / (2.0 * p - 2.0))
        single = 0.5 * ti * ti * norms[i] - ti ** (2 * p) * mass[i] / (2 * p)
        hyp.append(bool(I_u <= single * (1 + 1e-12)))
        X = float(sum(mass[j] for j in others))
        Y = float(sum(beta[i, j] * P[i, j] for j in others))
        j, k = others
        W = X + 2.0 * beta[j, k] * P[j, k]
        x = float(mass[i])
        if N == 4:
            bounds.append(math.sqrt(X) / sum(math.sqrt(mass[j]) for j in others))
            chain.append(bool(x * W <= Y * Y * (1 + 1e-9)))
        else:
            lhs = x * X * X + 2.0 * x * x * X
            bounds.append((lhs / (2.0**1.5 * x**1.5 * X**1.5)) ** (1.0 / 3.0))
            chain.append(bool(x * W * W + 2.0 * x * x * W <= Y**3 * (1 + 1e-9)))
    return CertificateReport(
        N=N,
        bound=max(bounds),
        threshold=math.sqrt(0.5) if N == 4 else 1.0,
        per_component_bound=tuple(bounds),  # type: ignore[arg-type]
        hypothesis=tuple(hyp),  # type: ignore[arg-type]
        chain_holds=tuple(chain),  # type: ignore[arg-type]
        max_beta=state.beta.max_offdiag(),
        on_M=mem.on_M,
    )


# ---------------------------------------------------------------------------
# mixed-sign scan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanRow:
    mu: float
    t: tuple[float, float, float]
    energy: float
    constraint_residual: float
    classification: str
    overlap: float
    within_t_hat: bool | None = None


@dataclass(frozen=True)
class ScanTable:
    N: int
    rows: tuple[ScanRow, ...]
    pair_energy: float
    A3: float
    exploratory: bool = False
    t_hat: float | None = None

    @property
    def asymptote(self) -> float:
        return self.pair_energy + self.A3

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mu", "t1", "t2", "t3", "energy", "constraint_residual", "classification"])
        for r in self.rows:
            w.writerow([f"{r.mu:.17g}", *(f"{x:.17g}" for x in r.t), f"{r.energy:.17g}",
                        f"{r.constraint_residual:.17g}", r.classification])
        return buf.getvalue()


def mixed_case_scan(
    pair: TripleState,
    mu_schedule: Sequence[float] = DEFAULT_SCHEDULE,
    *,
    pair_energy: float | None = None,
    experimental: bool = False,
) -> ScanTable:
    """Project ``(e1, e2, z3_mu)`` for growing ``mu`` and record the projected energy.

    ``pair`` holds the pair minimizer in slots 1-2 (slot 3 ignored) and carries
    the full parameter set, including the negative cross couplings.
    """
    N = pair.N
    l1, l2, l3 = pair.lambdas
    b12, b13, b23 = pair.beta.offdiag
    if not (b12 > 0 and b13 < 0 and b23 < 0):
        raise DomainError("scan needs beta12 > 0 and beta13, beta23 < 0")
    if N in (3, 4) and l1 != l2 and not experimental:
        raise DomainError("lambda1 != lambda2 is only available with the experimental flag")
    mus = [float(m) for m in mu_schedule]
    if not mus or any(m <= 0 for m in mus) or any(b <= a for a, b in zip(mus, mus[1:])):
        raise DomainError("mu schedule must be positive and increasing")
    g = pair.grid
    sys = system_for(pair)
    base = pair.values.copy()
    base[2] = 0.0
    if pair_energy is None:
        pair_energy = sys.energy(base)
    S_cal = sobolev_constant(N)
    A3 = sharp_constants((l3, l3, l3), N, S_cal).A[0]
    regime = _regime_for(N)
    t_hat = None
    if N == 3:
        pair_norms = float(sys.norms(base)[:2].sum())
        t_hat = n3_chain((l1, l2, l3), S_cal, pair_norms=pair_norms).t_hat
    rows = []
    for mu in mus:
        U = base.copy()
        U[2] = bubble_profile(g, l3, mu).values
        U[:, 0] = U[:, -1] = 0.0
        P = sys.pair_matrix(U)
        overlap = float(P[0, 2] + P[1, 2])
        try:
            kw = {"allow_negative_coupling": True} if regime == "cubic-N3" else {}
            t = coefficients_for(sys, U, regime, **kw)
        except ProjectionFailure as exc:
            rows.append(ScanRow(mu, (math.nan,) * 3, math.nan, math.nan,  # type: ignore[arg-type]
                                f"projection-failed:{type(exc).__name__}", overlap))
            continue
        V = t[:, None] * U
        a, M = sys.norms(U), sys.interaction(U)
        if regime == "two-block":
            r1, r2 = TwoBlockData.from_arrays(a, M, sys.p).residuals(t[0], t[2])
            cres = max(r1, r2)
        else:
            cres = float(constraint_residuals(t, a, M, sys.p).max())
        within = None if t_hat is None else bool(np.all(t <= t_hat))
        rows.append(ScanRow(mu, tuple(float(x) for x in t), sys.energy(V), cres,  # type: ignore[arg-type]
                            classify(_critical_norms(sys, V)), overlap, within))
    return ScanTable(N, tuple(rows), float(pair_energy), float(A3), experimental or l1 != l2, t_hat)


def scan_grid(N: int, lams: Sequence[float], mu_max: float, K: int = rg.DEFAULT_K, tail: float = 1e-9) -> rg.RadialGrid:
    """Grid covering both the pair scale and the largest escaping bubble."""
    d = bubble_decades(lams, N, tail)
    return rg.make_log_grid(N, 10.0**-d, mu_max * 10.0**d, K)
