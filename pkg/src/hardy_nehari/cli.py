"""Command-line entry point.

Usage: ``hardy-nehari SUBCOMMAND [--config FILE] [--key=value ...]``.

Configuration is a flat ``key=value`` file with ``#`` comments; every key can
also be given as ``--key=value`` on the command line, and flags win.

Keys
----
N                 dimension (default 4)
lambdas           three comma-separated values in (0, (N-2)^2/4); default Lambda_N/2 each
beta12, beta13, beta23   off-diagonal couplings (default 0.05)
r_min, r_max, K   grid; r_min/r_max default to a bubble-adapted range
max_iter, tol, restarts, seed   optimizer settings
level             minimize: "ground" (default) or "manifold"
mu                scan-mixed: comma-separated increasing schedule (default 1,2,...,1024)
                  project: three dilation scales (default 1,1,1)
amplitudes        project: three amplitudes (default 1,1,1)
experimental      scan-mixed: allow lambda1 != lambda2 for N=3,4 (default false)
swap_bound_reading   constants: evaluate beta_2 with the bounds exchanged (default false)
output            report path (default stdout)
csv               CSV path for minimize (profiles) and scan-mixed (default stdout for scan-mixed)

Exit codes: 0 success, 1 numerical failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import io
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import grid as rg
from .closed_forms import (
    bubble_ode_residual,
    bubble_profile,
    hardy_limit,
    quadrature_constants,
    sharp_constants,
    sobolev_constant,
)
from .errors import ConfigError, HardyNehariError, NoConvergenceError, ProjectionFailure
from .functional import CouplingMatrix, TripleState, nehari_membership
from .nehari import project
from .solver import (
    DEFAULT_SCHEDULE,
    MinimizeResult,
    SolverOptions,
    ground_state_level,
    least_energy_level_M,
    mixed_case_scan,
    pair_level,
    scan_grid,
    solver_grid,
)
from .thresholds import format_number, n3_chain, n4_chain

SUBCOMMANDS = ("constants", "minimize", "scan-mixed", "project", "verify-bubble", "verify")
EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2


def _floats(text: str, n: int | None = None) -> tuple[float, ...]:
    vals = tuple(float(x) for x in text.split(",") if x.strip())
    if n is not None and len(vals) != n:
        raise ValueError(f"expected {n} comma-separated values, got {len(vals)}")
    return vals


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class RunConfig:
    N: int = 4
    lambdas: tuple[float, float, float] | None = None
    beta12: float = 0.05
    beta13: float = 0.05
    beta23: float = 0.05
    r_min: float | None = None
    r_max: float | None = None
    K: int = rg.DEFAULT_K
    max_iter: int = 3000
    tol: float = 1e-6
    restarts: int = 8
    seed: int = 0
    level: str = "ground"
    mu: tuple[float, ...] | None = None
    amplitudes: tuple[float, float, float] = (1.0, 1.0, 1.0)
    experimental: bool = False
    swap_bound_reading: bool = False
    output: str | None = None
    csv: str | None = None
    extra: dict[str, str] = field(default_factory=dict)

    @property
    def resolved_lambdas(self) -> tuple[float, float, float]:
        if self.lambdas is not None:
            return self.lambdas
        lam = hardy_limit(self.N) / 2.0
        return (lam, lam, lam)

    @property
    def beta(self) -> CouplingMatrix:
        return CouplingMatrix.from_offdiag(self.beta12, self.beta13, self.beta23)

    @property
    def solver_options(self) -> SolverOptions:
        return SolverOptions(
            max_iter=self.max_iter, tol=self.tol, restarts=self.restarts, seed=self.seed,
            K=self.K, r_min=self.r_min, r_max=self.r_max,
        )

    def validate(self, command: str) -> None:
        if self.N < 3:
            raise ConfigError(f"N must be an integer >= 3, got {self.N}")
        Lam = hardy_limit(self.N)
        for lam in self.resolved_lambdas:
            if not (0.0 < lam < Lam):
                raise ConfigError(f"each lambda must lie in (0, {Lam}) for N={self.N}, got {lam}")
        if self.K < 16:
            raise ConfigError(f"K must be at least 16, got {self.K}")
        if (self.r_min is None) != (self.r_max is None):
            raise ConfigError("give both r_min and r_max or neither")
        if self.r_min is not None and not (0 < self.r_min < self.r_max):  # type: ignore[operator]
            raise ConfigError("need 0 < r_min < r_max")
        if self.max_iter < 1 or self.restarts < 1 or not self.tol > 0:
            raise ConfigError("max_iter and restarts must be >= 1 and tol > 0")
        if self.extra:
            raise ConfigError(f"unknown keys: {', '.join(sorted(self.extra))}")
        if command == "minimize" and self.level not in ("ground", "manifold"):
            raise ConfigError(f"level must be 'ground' or 'manifold', got {self.level!r}")
        if command == "scan-mixed":
            if not (self.beta12 > 0 and self.beta13 < 0 and self.beta23 < 0):
                raise ConfigError("scan-mixed needs beta12 > 0 and beta13, beta23 < 0")
            l1, l2, _ = self.resolved_lambdas
            if self.N in (3, 4) and l1 != l2 and not self.experimental:
                raise ConfigError("scan-mixed needs lambda1 == lambda2 for N=3,4 unless experimental=true")
            mus = self.mu or DEFAULT_SCHEDULE
            if any(m <= 0 for m in mus) or any(b <= a for a, b in zip(mus, mus[1:])):
                raise ConfigError("mu schedule must be positive and strictly increasing")
        if command == "project" and self.mu is not None and len(self.mu) != 3:
            raise ConfigError("project takes three mu values")


_PARSERS: dict[str, Callable[[str], object]] = {
    "N": int,
    "lambdas": lambda s: _floats(s, 3),
    "beta12": float,
    "beta13": float,
    "beta23": float,
    "r_min": float,
    "r_max": float,
    "K": int,
    "max_iter": int,
    "tol": float,
    "restarts": int,
    "seed": int,
    "level": str,
    "mu": _floats,
    "amplitudes": lambda s: _floats(s, 3),
    "experimental": _bool,
    "swap_bound_reading": _bool,
    "output": str,
    "csv": str,
}


def parse_config_text(text: str) -> dict[str, str]:
    """Read ``key=value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out: dict[str, str] = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value, got {raw!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        if not k:
            raise ConfigError(f"line {n}: empty key")
        out[k] = v
    return out


def build_config(pairs: dict[str, str]) -> RunConfig:
    kwargs: dict[str, object] = {}
    extra: dict[str, str] = {}
    for k, v in pairs.items():
        parser = _PARSERS.get(k)
        if parser is None:
            extra[k] = v
            continue
        try:
            kwargs[k] = parser(v)
        except ValueError as exc:
            raise ConfigError(f"bad value for {k}: {v!r} ({exc})") from exc
    return RunConfig(**kwargs, extra=extra)  # type: ignore[arg-type]


def _overrides(items: Sequence[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    for it in items:
        if not it.startswith("--") or "=" not in it:
            raise ConfigError(f"expected --key=value, got {it!r}")
        k, v = it[2:].split("=", 1)
        out[k] = v
    return out


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _emit(text: str, path: str | None, stdout: io.TextIOBase) -> None:
    if path is None:
        stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _record(pairs: dict[str, str]) -> str:
    return "".join(f"{k}={v}\n" for k, v in pairs.items())


def _profile_csv(res: MinimizeResult) -> str:
    U = res.state.values
    r = res.state.grid.r
    lines = ["r,u1,u2,u3"]
    lines += [f"{r[k]:.17g},{U[0, k]:.17g},{U[1, k]:.17g},{U[2, k]:.17g}" for k in range(r.size)]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_constants(cfg: RunConfig, stdout: io.TextIOBase) -> int:
    lams = cfg.resolved_lambdas
    S_cal = sobolev_constant(cfg.N, cfg.K)
    if cfg.N == 4:
        text = n4_chain(lams, S_cal, swap_bound_reading=cfg.swap_bound_reading).to_text()
    elif cfg.N == 3:
        text = n3_chain(lams, S_cal).to_text()
    else:
        sc = sharp_constants(lams, cfg.N, S_cal)
        pairs = {"N": str(cfg.N), "S_cal": format_number(S_cal)}
        pairs.update({f"lambda_{i + 1}": format_number(lams[i]) for i in range(3)})
        pairs.update({f"S_{i + 1}": format_number(sc.S[i]) for i in range(3)})
        pairs.update({f"A_{i + 1}": format_number(sc.A[i]) for i in range(3)})
        pairs["S_min"] = format_number(sc.S_min)
        pairs["C_bar"] = format_number(sc.C_bar)
        text = "# constants only: coupling thresholds are defined for N in (3, 4)\n" + _record(pairs)
    _emit(text, cfg.output, stdout)
    return EXIT_OK


def cmd_minimize(cfg: RunConfig, stdout: io.TextIOBase) -> int:
    lams = cfg.resolved_lambdas
    opts = cfg.solver_options
    g = solver_grid(cfg.N, lams, opts)
    state0 = TripleState.from_arrays(g, np.zeros((3, g.K)), lams, cfg.beta)
    run = ground_state_level if cfg.level == "ground" else least_energy_level_M
    res = run(state0, opts)
    pairs = {"N": str(cfg.N), "seed": str(cfg.seed), **res.as_map()}
    for i, rs in enumerate(res.runs):
        pairs[f"run_{i}_energy"] = f"{rs.energy:.17g}"
        pairs[f"run_{i}_classification"] = rs.classification
        pairs[f"run_{i}_converged"] = str(rs.converged).lower()
    _emit(_record(pairs), cfg.output, stdout)
    if cfg.csv is not None:
        _emit(_profile_csv(res), cfg.csv, stdout)
    return EXIT_OK if res.converged else EXIT_NUMERIC


def cmd_scan_mixed(cfg: RunConfig, stdout: io.TextIOBase) -> int:
    lams = cfg.resolved_lambdas
    mus = cfg.mu or DEFAULT_SCHEDULE
    opts = cfg.solver_options
    if cfg.r_min is not None:
        g = rg.make_log_grid(cfg.N, cfg.r_min, cfg.r_max, cfg.K)  # type: ignore[arg-type]
    else:
        g = scan_grid(cfg.N, lams, max(mus), cfg.K)
    pr = pair_level(lams[:2], cfg.beta12, cfg.N, opts, g=g, lambda3=lams[2],
                    beta13=cfg.beta13, beta23=cfg.beta23)
    if not pr.converged:
        stdout.write(f"# pair minimization did not converge (residual {pr.residuals['gradient_relative']:.3e})\n")
        return EXIT_NUMERIC
    table = mixed_case_scan(pr.state, mus, experimental=cfg.experimental)
    header = [f"# A12={table.pair_energy:.17g}", f"# A3={table.A3:.17g}", f"# asymptote={table.asymptote:.17g}"]
    if table.exploratory:
        header.append("# exploratory: lambda1 != lambda2")
    text = "\n".join(header) + "\n" + table.to_csv()
    _emit(text, cfg.csv or cfg.output, stdout)
    return EXIT_OK


def cmd_project(cfg: RunConfig, stdout: io.TextIOBase) -> int:
    """Project scaled bubbles ``amp_i z^i_{mu_i}`` onto the dimension's Nehari set."""
    lams = cfg.resolved_lambdas
    mus = cfg.mu or (1.0, 1.0, 1.0)
    g = solver_grid(cfg.N, lams, cfg.solver_options)
    U = np.stack([cfg.amplitudes[i] * bubble_profile(g, lams[i], mus[i]).values for i in range(3)])
    state = TripleState.from_arrays(g, U, lams, cfg.beta)
    try:
        coeffs = project(state)
    except ProjectionFailure as exc:
        stdout.write(f"projection_failed={type(exc).__name__}: {exc}\n")
        return EXIT_NUMERIC
    mem = nehari_membership(state.scaled(coeffs.t))
    pairs = {"regime": coeffs.regime}
    pairs.update({f"t{i + 1}": f"{coeffs.t[i]:.17g}" for i in range(3)})
    pairs["constraint_residual"] = f"{coeffs.residual:.17g}"
    pairs["on_M"] = str(mem.on_M).lower()
    pairs["on_N"] = str(mem.on_N).lower()
    _emit(_record(pairs), cfg.output, stdout)
    return EXIT_OK


BUBBLE_RESIDUAL_TOL = 1e-4
HARDY_SLACK = 1e-3
QUADRATURE_RTOL = 5e-3
FIXED_POINT_TOL = 1e-8


def _check_bubble(cfg: RunConfig) -> list[tuple[str, bool, float]]:
    out = []
    for i, lam in enumerate(cfg.resolved_lambdas):
        err = bubble_ode_residual(lam, cfg.N, cfg.K)
        out.append((f"bubble_residual_{i + 1}", err < BUBBLE_RESIDUAL_TOL, err))
    return out


def _check_hardy(cfg: RunConfig, profiles: int = 50) -> tuple[str, bool, float]:
    rng = np.random.default_rng(cfg.seed)
    g = rg.make_log_grid(cfg.N, 1e-4, 1e4, cfg.K)
    s = np.log(g.r)
    Lam = hardy_limit(cfg.N)
    worst = -np.inf
    for _ in range(profiles):
        # compact support in log r keeps the profile admissible at both grid ends
        w = rng.uniform(0.3, 3.0)
        x = (s - rng.uniform(-9.0 + w, 9.0 - w)) / w
        inside = np.abs(x) < 1
        vals = np.zeros_like(s)
        vals[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
        u = rg.RadialProfile(g, vals)
        ratio = Lam * rg.hardy_term(u, 1.0) / rg.dirichlet_energy(u) - 1.0
        worst = max(worst, ratio)
    return "hardy_inequality", bool(worst <= HARDY_SLACK), float(worst)


def _check_quadrature(cfg: RunConfig) -> list[tuple[str, bool, float]]:
    S_cal = sobolev_constant(cfg.N, cfg.K)
    sc = sharp_constants(cfg.resolved_lambdas, cfg.N, S_cal)
    out = []
    for i, lam in enumerate(cfg.resolved_lambdas):
        S_q, A_q = quadrature_constants(lam, cfg.N, cfg.K)
        err = max(abs(S_q / sc.S[i] - 1.0), abs(A_q / sc.A[i] - 1.0))
        out.append((f"quadrature_constants_{i + 1}", err < QUADRATURE_RTOL, err))
    return out


def _check_fixed_point(cfg: RunConfig) -> tuple[str, bool, float]:
    lams = cfg.resolved_lambdas
    g = solver_grid(cfg.N, lams, cfg.solver_options)
    U = np.stack([bubble_profile(g, lams[i], 1.0 + i).values for i in range(3)])
    state = TripleState.from_arrays(g, U, lams, cfg.beta)
    try:
        t = np.asarray(project(state).t)
        on = state.scaled(t)
        err = float(np.max(np.abs(np.asarray(project(on).t) - 1.0)))
    except ProjectionFailure:
        return "projection_fixed_point", False, float("inf")
    return "projection_fixed_point", err < FIXED_POINT_TOL, err


def _report(checks: list[tuple[str, bool, float]], stdout: io.TextIOBase) -> int:
    for name, ok, err in checks:
        stdout.write(f"{'PASS' if ok else 'FAIL'} {name} measured={err:.17g}\n")
    return EXIT_OK if all(ok for _, ok, _ in checks) else EXIT_NUMERIC


def cmd_verify_bubble(cfg: RunConfig, stdout: io.TextIOBase) -> int:
    return _report(_check_bubble(cfg), stdout)


def cmd_verify(cfg: RunConfig, stdout: io.TextIOBase) -> int:
    checks = _check_bubble(cfg) + [_check_hardy(cfg)] + _check_quadrature(cfg) + [_check_fixed_point(cfg)]
    return _report(checks, stdout)


COMMANDS: dict[str, Callable[[RunConfig, io.TextIOBase], int]] = {
    "constants": cmd_constants,
    "minimize": cmd_minimize,
    "scan-mixed": cmd_scan_mixed,
    "project": cmd_project,
    "verify-bubble": cmd_verify_bubble,
    "verify": cmd_verify,
}


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hardy-nehari",
        description="Coupled Hardy-critical systems: constants, minimization and scans.",
        epilog=__doc__.split("Keys\n----\n", 1)[1] if __doc__ else None,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("command", choices=SUBCOMMANDS)
    p.add_argument("--config", help="key=value configuration file")
    return p


def main(argv: Sequence[str] | None = None, stdout: io.TextIOBase | None = None) -> int:
    out = stdout if stdout is not None else sys.stdout
    parser = make_parser()
    args, rest = parser.parse_known_args(argv)
    try:
        pairs: dict[str, str] = {}
        if args.config:
            try:
                pairs.update(parse_config_text(Path(args.config).read_text(encoding="utf-8")))
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from exc
        pairs.update(_overrides(rest))
        cfg = build_config(pairs)
        cfg.validate(args.command)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"hardy-nehari: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, out)
    except NoConvergenceError as exc:
        print(f"hardy-nehari: no convergence: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except HardyNehariError as exc:
        if isinstance(exc, ValueError):
            print(f"hardy-nehari: error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"hardy-nehari: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
