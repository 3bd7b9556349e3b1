"""Command-line front end.

Every subcommand reads a configuration file (see :mod:`.config`), writes its
outputs to ``--out`` and prints a ``key = value`` report.

Exit codes: 0 success, 1 failed invariants (``verify``), 2 configuration
error, 3 solver non-convergence, 4 domain, cavitation or hypothesis error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis, backlund, fixtures
from .config import ConfigError, RunConfig, evaluate, load_config
from .csvio import format_report, write_grid_csv
from .dec import BranchCut, DiscreteForm, FrobeniusCoefficient, Grid2, d
from .density import MassDensity, check_hypotheses, dual_minimal_surface, lemma2_constant, sonic_q
from .errors import DomainError, DualityViolation, GeometryError, HypothesisViolation
from .solver import ProblemSpec, SolverConfig, flux_form, residual, solve, solve_linear

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_DOMAIN = 0, 1, 2, 3, 4

log = logging.getLogger("hodge_frobenius")

DEFAULT_Q_MAX = {"chaplygin": None, "minimal_surface": 1e6, "power_law": 1e6, "constant": 100.0}


class DomainExit(Exception):
    """Raised to leave a command with exit code 4."""


# -- configuration to objects ---------------------------------------------------------------

def density_from_config(cfg: RunConfig, default=None) -> MassDensity:
    if not cfg.has("density", "family"):
        if default is not None:
            return default
        raise ConfigError("missing required key [density] family")
    family = cfg.get("density", "family")
    try:
        if family == "chaplygin":
            return MassDensity.chaplygin(cfg.require("density", "gamma"))
        if family == "minimal_surface":
            return MassDensity.minimal_surface()
        if family == "power_law":
            return MassDensity.power_law(cfg.require("density", "K"), cfg.require("density", "q"))
        if family == "constant":
            return MassDensity.constant(cfg.get("density", "c", 1.0))
        if family == "dual_minimal_surface":
            return dual_minimal_surface()
    except ValueError as exc:
        raise ConfigError(f"[density]: {exc}", cfg.lines.get(("density", "family"))) from None
    raise ConfigError(f"unknown density family {family!r}", cfg.lines.get(("density", "family")))


def grid_from_config(cfg: RunConfig, section="grid", bounds=None, vertices=None) -> Grid2:
    if vertices is not None:
        nx = ny = vertices - 1
    elif cfg.has(section, "vertices"):
        nx = ny = cfg.get(section, "vertices") - 1
    elif cfg.has(section, "nx"):
        nx = cfg.get(section, "nx")
        ny = cfg.get(section, "ny", nx)
    else:
        raise ConfigError(f"[{section}] needs vertices or nx")
    b = dict(zip(("x0", "x1", "y0", "y1"), bounds or (0.0, 1.0, 0.0, 1.0)))
    for k in b:
        if cfg.has(section, k):
            b[k] = cfg.get(section, k)
    try:
        return Grid2.from_bounds(b["x0"], b["x1"], b["y0"], b["y1"], nx, ny)
    except ValueError as exc:
        raise ConfigError(f"[{section}]: {exc}") from None


def solver_config_from_config(cfg: RunConfig) -> SolverConfig:
    try:
        return SolverConfig(**cfg.sections.get("solver", {}))
    except ValueError as exc:
        raise ConfigError(f"[solver]: {exc}") from None


def problem_factory(cfg: RunConfig):
    """Return ``n -> ProblemSpec`` for the configured problem."""
    fixture = cfg.get("problem", "fixture", "custom")
    density = density_from_config(cfg, default=None) if cfg.has("density") else None
    if fixture in fixtures.PROBLEMS:
        kwargs = {}
        if fixture == "uniform":
            kwargs["slope"] = cfg.get("problem", "slope", 1.0)
            kwargs["density"] = density
        elif fixture == "rigid_rotation" and density is not None:
            kwargs["density"] = density

        def make(n):
            spec = fixtures.PROBLEMS[fixture](n, **kwargs)[0]
            if density is not None:
                spec.density = density
            return spec
        return make
    if fixture != "custom":
        raise ConfigError(f"unknown fixture {fixture!r}", cfg.lines.get(("problem", "fixture")))
    g_expr = cfg.require("problem", "dirichlet")
    if density is None:
        raise ConfigError("missing required section [density]")

    def make(n):
        grid = grid_from_config(cfg, vertices=n)
        X, Y = grid.mesh()
        eta = evaluate(cfg.get("problem", "eta", "0"), X, Y)
        g = evaluate(g_expr, X, Y)
        half = cfg.get("problem", "excised_half_width")
        excised = fixtures.block_mask(grid, half) if half else None
        if excised is not None:
            eta = np.where(excised, np.nan_to_num(eta, nan=0.0, posinf=0.0, neginf=0.0), eta)
            g = np.where(np.isfinite(g), g, 0.0)
        cut = BranchCut() if cfg.get("problem", "branch_cut", False) else None
        try:
            return ProblemSpec(grid, density,
                               FrobeniusCoefficient.exact(DiscreteForm.zero_form(grid, eta)),
                               DiscreteForm.zero_form(grid, g), excised, cut)
        except ValueError as exc:
            raise ConfigError(f"[problem]: {exc}") from None
    return make


def problem_from_config(cfg: RunConfig) -> ProblemSpec:
    fixture = cfg.get("problem", "fixture", "custom")
    if fixture in fixtures.PROBLEMS:
        n = cfg.require("grid", "vertices")
        return problem_factory(cfg)(n)
    return problem_factory(cfg)(None)


# -- outputs ------------------------------------------------------------------------------

def _emit(out_dir: Path, name: str, items):
    text = format_report(items)
    sys.stdout.write(text)
    (out_dir / name).write_text(text)


def _solve_items(rep):
    return [
        ("converged", rep.converged), ("iterations", rep.iterations),
        ("energy", rep.energy), ("residual_sup", rep.residual_sup),
        ("max_Q", rep.max_Q), ("sonic_Q", rep.sonic_Q), ("sonic_margin", rep.sonic_margin),
        ("cavitated", rep.cavitated), ("sonic_exceeded", rep.sonic_exceeded),
        ("stages", rep.stages),
    ]


def _run_solve(cfg):
    spec = problem_from_config(cfg)
    equation = cfg.get("problem", "equation", "variational")
    if equation == "linear":
        # the linear system weights du by exp(eta) unless a weight is given
        if cfg.has("problem", "weight"):
            weight = evaluate(cfg.get("problem", "weight"), *spec.grid.mesh())
        else:
            weight = np.exp(spec.eta.data[0])
        return spec, solve_linear(weight, spec.grid, spec.dirichlet, spec.excised, spec.branch_cut)
    if equation != "variational":
        raise ConfigError(f"unknown equation {equation!r}", cfg.lines.get(("problem", "equation")))
    return spec, solve(spec, solver_config_from_config(cfg))


# -- subcommands --------------------------------------------------------------------------

def cmd_density_report(cfg, out_dir):
    dens = density_from_config(cfg)
    lo, hi = dens.q_domain
    q_max = cfg.get("analysis", "q_max")
    if q_max is None:
        q_max = DEFAULT_Q_MAX.get(dens.family) or (hi if math.isfinite(hi) else 1e6)
    samples = cfg.get("analysis", "samples", 2000)
    scan_top = min(q_max, hi)
    sonic = sonic_q(dens, scan_top)
    # hypothesis constants and the Q rho / H bound are scanned over the subsonic range below any sonic value
    top = scan_top if sonic is None else sonic
    if not top < hi:
        top = np.nextafter(hi, lo)
    rep = check_hypotheses(dens, top, samples)
    try:
        lemma = lemma2_constant(dens, top, samples)
    except ArithmeticError:
        lemma = None
    _emit(out_dir, "density_report.txt", [
        ("family", dens.family), ("q_domain", (lo, hi)), ("scan_max", float(top)),
        ("samples", samples), ("sonic_Q", sonic), ("kappa_1", rep.kappa_bounds[0]),
        ("kappa_2", rep.kappa_bounds[1]), ("hypo_pos_C", rep.hypo_pos_C),
        ("hypo_neg_C", rep.hypo_neg_C), ("binding", rep.binding), ("lemma2_C", lemma),
        ("rho_min", rep.rho_min), ("cavitates", rep.cavitates),
    ])
    return EXIT_OK


def _write_solution(cfg, out_dir, spec, rep):
    if cfg.get("output", "csv", True):
        write_grid_csv(out_dir / "u.csv", spec.grid, rep.u.data[0])
        write_grid_csv(out_dir / "Q.csv", spec.grid, rep.Q.data[0])
        if cfg.get("problem", "equation", "variational") == "linear":
            res = np.zeros(spec.grid.shape)
        else:
            res = residual(rep.u, spec).data[0]
        write_grid_csv(out_dir / "residual.csv", spec.grid, res)


def cmd_solve(cfg, out_dir):
    spec, rep = _run_solve(cfg)
    _write_solution(cfg, out_dir, spec, rep)
    _emit(out_dir, cfg.get("output", "report", "report.txt"), _solve_items(rep))
    if rep.cavitated:
        raise DomainExit("cavitation: min rho fell below the density threshold")
    return EXIT_OK if rep.converged else EXIT_NONCONVERGED


def cmd_backlund(cfg, out_dir):
    spec, rep = _run_solve(cfg)
    if not rep.converged:
        _emit(out_dir, "report.txt", _solve_items(rep))
        return EXIT_NONCONVERGED
    family = cfg.get("analysis", "dual_family", "dual_minimal_surface")
    if family != "dual_minimal_surface":
        raise ConfigError(f"unsupported dual family {family!r}")
    omega = flux_form(rep.u, spec.eta, spec.branch_cut)
    pair = backlund.hodge_dual(omega, spec.eta, spec.density, dual_minimal_surface())
    back = backlund.hodge_dual(pair.xi, pair.eta_hat, pair.rho_hat, spec.density)
    dd = max(float(np.max(np.abs(a + b))) for a, b in zip(back.xi.components(), omega.components()))
    if cfg.get("output", "csv", True):
        xx, xy = pair.xi.components()
        write_grid_csv(out_dir / "xi_x.csv", spec.grid, xx)
        write_grid_csv(out_dir / "xi_y.csv", spec.grid, xy)
    _emit(out_dir, "backlund_report.txt", [
        ("converged", rep.converged), ("max_xi_sq", pair.max_xi_sq),
        ("pointwise_product_error", pair.pointwise_product_error),
        ("frobenius_residual", pair.frobenius_residual), ("double_dual_error", dd),
    ])
    return EXIT_OK


def cmd_eikonal(cfg, out_dir):
    grid = grid_from_config(cfg, "eikonal")
    X, Y = grid.mesh()
    u = DiscreteForm.zero_form(grid, evaluate(cfg.require("eikonal", "u"), X, Y))
    nu = evaluate(cfg.get("eikonal", "nu", "1"), X, Y)
    sign = cfg.get("eikonal", "sign", 1)
    if sign not in (1, -1):
        raise ConfigError("[eikonal] sign must be 1 or -1", cfg.lines.get(("eikonal", "sign")))
    v, res = backlund.eikonal_forward(u, nu, sign)
    u2, res2 = backlund.eikonal_inverse(v, nu, sign)
    iso, orth = backlund.check_eikonal_pair(u, v, nu)
    rt = max(float(np.max(np.abs(a - b))) for a, b in zip(d(u).components(), d(u2).components()))
    if cfg.get("output", "csv", True):
        write_grid_csv(out_dir / "v.csv", grid, v.data[0])
        write_grid_csv(out_dir / "u_roundtrip.csv", grid, u2.data[0])
    _emit(out_dir, "eikonal_report.txt", [
        ("integrability_residual", res), ("inverse_integrability_residual", res2),
        ("isometry_defect", iso), ("orthogonality_residual", orth), ("roundtrip_error", rt),
    ])
    return EXIT_OK


def cmd_mean_value(cfg, out_dir):
    spec, rep = _run_solve(cfg)
    if not rep.converged:
        _emit(out_dir, "report.txt", _solve_items(rep))
        return EXIT_NONCONVERGED
    center = (cfg.get("analysis", "center_x", 0.0), cfg.get("analysis", "center_y", 0.0))
    mv = analysis.mean_value_check(rep, spec.density, center,
                                   cfg.get("analysis", "radius", 0.5), cfg.get("analysis", "delta", 0.5))
    t5 = analysis.theorem5_ratio(rep, spec.density, center, 0.5 * mv.R, mv.R)
    _emit(out_dir, "mean_value_report.txt", [
        ("R", mv.R), ("delta", mv.delta), ("sup_inner", mv.sup_inner),
        ("mean_outer", mv.mean_outer), ("scaled_integral", mv.scaled_integral),
        ("C_emp", mv.C_emp), ("degenerate", mv.degenerate), ("theorem5_ratio", t5),
    ])
    return EXIT_OK


def cmd_singularity_probe(cfg, out_dir):
    fixture = cfg.get("problem", "fixture", "custom")
    rings = cfg.get("analysis", "ring_radii", fixtures.PROBE_RINGS.get(fixture, fixtures.RING_RADII))
    res = cfg.get("analysis", "resolutions", (33, 65, 129))
    factory = problem_factory(cfg)
    center = (cfg.get("analysis", "center_x", 0.0), cfg.get("analysis", "center_y", 0.0))
    rep = analysis.singularity_probe(factory, solver_config_from_config(cfg), rings, res, center)
    items = [("ring_radii", rep.ring_radii), ("resolutions", rep.resolutions)]
    for n in rep.resolutions:
        items.append((f"ring_max_{n}", tuple(rep.history[n])))
    items += [("H_L2_outer", rep.H_L2_outer), ("theorem5_ratio", rep.theorem5_ratio),
              ("last_variation", rep.last_variation), ("growth_exponent", rep.growth_exponent()),
              ("converged", all(rep.converged))]
    _emit(out_dir, "singularity_report.txt", items)
    return EXIT_OK if all(rep.converged) else EXIT_NONCONVERGED


def cmd_verify(cfg, out_dir):
    from .verify import run_suite

    lines = []

    def report(line):
        print(line, flush=True)
        lines.append(line)
    results = run_suite(report)
    passed = sum(r.passed for r in results)
    summary = f"passed = {passed}\ntotal = {len(results)}\n"
    sys.stdout.write(summary)
    (out_dir / "verify_report.txt").write_text("\n".join(lines) + "\n" + summary)
    return EXIT_OK if passed == len(results) else EXIT_FAILED


COMMANDS = {
    "density-report": cmd_density_report,
    "solve": cmd_solve,
    "backlund": cmd_backlund,
    "eikonal": cmd_eikonal,
    "mean-value": cmd_mean_value,
    "singularity-probe": cmd_singularity_probe,
    "verify": cmd_verify,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hodge-frobenius",
        description="Solvers and checks for nonlinear Hodge-Frobenius equations.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "verify",
                       help="configuration file ([section] key = value)")
        p.add_argument("--out", default="./out", help="output directory (default ./out)")
        p.add_argument("--threads", type=int, default=1, help="BLAS/OpenMP threads (default 1)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        out_dir.mkdir(parents=True, exist_ok=True)
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=args.threads):
            return COMMANDS[args.command](cfg, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, DualityViolation, HypothesisViolation, GeometryError, DomainExit) as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
