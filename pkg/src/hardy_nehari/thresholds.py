"""Explicit coupling thresholds for the N=4 and N=3 regimes.

Each chain starts from the sharp constants ``S_i``, ``A_i``, ``S = min S_i``
and ``C_bar = (3/N) S_cal^{N/2}``, passes through two-sided bounds on
``|u_i|_{2*}`` along low-energy Nehari states, and ends in a single admissible
coupling bound (``beta_tilde`` for N=4, ``beta_hat`` for N=3).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

from scipy import optimize

from .closed_forms import hardy_limit, sharp_constants
from .errors import DomainError


@dataclass(frozen=True)
class ThresholdReport:
    N: int
    lambdas: tuple[float, float, float]
    S_cal: float
    S: tuple[float, float, float]
    A: tuple[float, float, float]
    S_min: float
    C_bar: float
    lower_bound: float
    upper_bound: float
    chain: dict[str, float]
    final: float
    kappa_or_pi: float
    gamma: float | None = None
    t_hat: float | None = None
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def final_key(self) -> str:
        return "beta_tilde" if self.N == 4 else "beta_hat"

    def as_map(self) -> dict[str, float]:
        """Flat key/value view used for serialization."""
        out: dict[str, float] = {"N": float(self.N), "S_cal": self.S_cal}
        for i in range(3):
            out[f"lambda_{i + 1}"] = self.lambdas[i]
        for i in range(3):
            out[f"S_{i + 1}"] = self.S[i]
        for i in range(3):
            out[f"A_{i + 1}"] = self.A[i]
        out["S_min"] = self.S_min
        out["C_bar"] = self.C_bar
        out["L"] = self.lower_bound
        out["U"] = self.upper_bound
        out.update(self.chain)
        out["kappa" if self.N == 4 else "pi"] = self.kappa_or_pi
        out[self.final_key] = self.final
        if self.gamma is not None:
            out["gamma"] = self.gamma
        if self.t_hat is not None:
            out["t_hat"] = self.t_hat
        return out

    def to_text(self) -> str:
        lines = [f"# {n}" for n in self.notes]
        lines += [f"{k}={format_number(v)}" for k, v in self.as_map().items()]
        return "\n".join(lines) + "\n"


def format_number(x: float) -> str:
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return f"{x:.17g}"


def c_bar(N: int, S_cal: float) -> float:
    """``(3/N) S_cal^{N/2}``."""
    if N < 3 or not S_cal > 0:
        raise DomainError(f"need N >= 3 and S_cal > 0, got N={N}, S_cal={S_cal}")
    return 3.0 / N * S_cal ** (N / 2.0)


def _check_lambdas(lams: Sequence[float], N: int) -> tuple[float, float, float]:
    if len(lams) != 3:
        raise DomainError("need three lambdas")
    Lam = hardy_limit(N)
    for lam in lams:
        if not (0.0 < lam < Lam):
            raise DomainError(f"lambda {lam} outside (0, {Lam}) for N={N}")
    return tuple(float(x) for x in lams)  # type: ignore[return-value]


def n3_lower_root(S: float, C_bar: float, beta_cap: float) -> float:
    """Positive root in ``x`` of ``S x^{1/3} = x + beta_cap S^{-3/2} (6 C_bar)^{3/2} x^{1/2}``.

    With ``y = x^{1/6}`` this reads ``y^4 + c y = S``; the left side is
    increasing, so the root is unique and every admissible ``x`` lies above it.
    """
    c = beta_cap * S**-1.5 * (6.0 * C_bar) ** 1.5
    y_hi = S**0.25 * (1.0 + 1e-12)  # root is S^{1/4} when beta_cap = 0
    y = optimize.brentq(lambda y: y**4 + c * y - S, 0.0, y_hi, xtol=1e-300, rtol=1e-15)
    return y**6


def component_norm_bounds(N: int, S: float, C_bar: float, beta_cap: float) -> tuple[float, float]:
    """Lower and upper bounds on ``|u_i|_{2*}^2`` (N=4) or ``|u_i|_6^6`` (N=3)."""
    if N == 4:
        if beta_cap > S * S / (16.0 * C_bar) * (1 + 1e-15):
            raise DomainError("beta_cap must not exceed beta_1")
        return S / 2.0, 8.0 * C_bar / S
    if N == 3:
        if beta_cap > 7.0 * S**3 / (12.0 * (6.0 * C_bar) ** 2) * (1 + 1e-15):
            raise DomainError("beta_cap must not exceed beta_hat_1")
        return n3_lower_root(S, C_bar, beta_cap), (6.0 * C_bar / S) ** 3
    raise DomainError(f"bounds are only defined for N in (3, 4), got {N}")


def n4_chain(lams: Sequence[float], S_cal: float, *, swap_bound_reading: bool = False) -> ThresholdReport:
    """The N=4 chain ending in ``beta_tilde``.

    ``swap_bound_reading`` evaluates ``beta_2`` with the lower and upper
    bounds exchanged, for comparison only.
    """
    lams = _check_lambdas(lams, 4)
    sc = sharp_constants(lams, 4, S_cal)
    S, A, Cb = sc.S_min, sc.A, sc.C_bar
    L, U = component_norm_bounds(4, S, Cb, S * S / (16.0 * Cb))
    beta1 = S * S / (16.0 * Cb)
    if swap_bound_reading:
        beta2 = min(beta1, S * U * U / (16.0 * Cb * L))
    else:
        beta2 = min(beta1, S * L * L / (16.0 * Cb * U))
    om = [1.0 - lam for lam in lams]
    pairs = [(i, j) for i, j in itertools.permutations(range(3), 2)]
    beta3p = 0.5 * min(
        min(om[i] / om[j], om[i] ** 0.75 * om[j] ** 0.75 / (om[i] ** 1.5 + om[j] ** 1.5))
        for i, j in pairs
    )
    beta3 = min(1.0, beta3p, min(S**4 / (16.0 * (A[i] + A[j])) for i, j in pairs))
    beta4 = min(beta2, beta3, S * S / (16.0 * sum(A)))
    kappa = 0.5 * min(S_cal**2 - 4.0 * a for a in A)
    beta5 = kappa * S / (6.0 * S_cal**3)
    beta_tilde = min(beta4, beta5)
    chain = {
        "beta_1": beta1,
        "beta_2": beta2,
        "beta_3_prime": beta3p,
        "beta_3": beta3,
        "beta_4": beta4,
        "beta_5": beta5,
    }
    notes = ("beta_2 evaluated with the bounds exchanged",) if swap_bound_reading else ()
    return ThresholdReport(
        N=4, lambdas=lams, S_cal=S_cal, S=sc.S, A=sc.A, S_min=S, C_bar=Cb,
        lower_bound=L, upper_bound=U, chain=chain, final=beta_tilde, kappa_or_pi=kappa,
        notes=notes,
    )


def n3_chain(
    lams: Sequence[float], S_cal: float, pair_norms: float | None = None
) -> ThresholdReport:
    """The N=3 chain ending in ``beta_hat``.

    ``pair_norms`` is ``||e1||_1^2 + ||e2||_2^2`` for a pair minimizer; when
    given, the scaling bound ``t_hat`` for the mixed-sign projection is added.
    """
    lams = _check_lambdas(lams, 3)
    sc = sharp_constants(lams, 3, S_cal)
    S, A, Cb = sc.S_min, sc.A, sc.C_bar
    six_c = 6.0 * Cb
    bh1 = 7.0 * S**3 / (12.0 * six_c**2)
    C3, C4 = component_norm_bounds(3, S, Cb, bh1)
    bh2 = min(C3 * S**1.5 / (2.0 * math.sqrt(C4) * six_c**1.5), C3 * S**3 / (12.0 * six_c**2))
    pi_c = 0.5 * min(S_cal**3 - (3.0 * a) ** 2 for a in A)
    bh3 = pi_c * S**3 / (2.0 * S_cal**3 * six_c**2)
    beta_hat = min(bh1, bh2, bh3, 1.0)
    gamma = min(C3 / 4.0, 1.5 * A[2])
    t_hat = None
    if pair_norms is not None:
        t_hat = (max(pair_norms, 3.0 * A[2]) / gamma) ** 0.25
    chain = {"beta_hat_1": bh1, "C_3": C3, "C_4": C4, "beta_hat_2": bh2, "beta_hat_3": bh3}
    return ThresholdReport(
        N=3, lambdas=lams, S_cal=S_cal, S=sc.S, A=sc.A, S_min=S, C_bar=Cb,
        lower_bound=C3, upper_bound=C4, chain=chain, final=beta_hat, kappa_or_pi=pi_c,
        gamma=gamma, t_hat=t_hat,
    )
