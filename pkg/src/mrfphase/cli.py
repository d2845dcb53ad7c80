"""Command-line entry point: analyze, sweep, phase, perturb, oracle, mcmc, verify."""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import checks, io
from .fixedpoint import UNDETERMINED, UNIQUE, classify_uniqueness, limit_probabilities
from .graphs import gen_random_regular, read_edge_list
from .mcmc import DEFAULT_BURN_IN, chain_seeds, estimate_neighbor_law, fit_mu_shape, run_chain
from .model import FAMILIES, ModelSpec, ThetaVector, induced_mu, is_log_convex, theta_for_family
from .oracle import (
    BOUNDARY_LABELS,
    conditional_pk_exact,
    dp_partition,
    dp_partition_exact,
    enumerate_Z,
    small_graph_neighbor_law,
)
from .perturbation import classify_direction, nonmonotonicity_scan, slope_report
from .phase import critical_bracket, lambda_lower, lambda_upper, psi
from .recursion import depth_table, parity_gap

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
JOBS_ENV = "MRF_PHASE_JOBS"


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Everything needed to repeat a run."""

    command: str
    options: dict = field(default_factory=dict)

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        opts = {k: v for k, v in vars(args).items() if k not in ("command", "handler")}
        return cls(args.command, opts)

    def to_dict(self) -> dict:
        return io.to_jsonable(asdict(self))


def default_jobs() -> int:
    raw = os.environ.get(JOBS_ENV)
    if raw is None:
        return 1
    try:
        jobs = int(raw)
    except ValueError:
        raise UsageError(f"{JOBS_ENV} must be an integer, got {raw!r}")
    if jobs < 1:
        raise UsageError(f"{JOBS_ENV} must be at least 1")
    return jobs


def load_theta(args: argparse.Namespace) -> ThetaVector:
    given = [x for x in (args.family, args.theta, args.theta_file) if x is not None]
    if len(given) != 1:
        raise UsageError("give exactly one of --family, --theta, --theta-file")
    if args.family is not None:
        if args.delta is None:
            raise UsageError("--family needs --delta")
        return theta_for_family(args.family, args.delta)
    text = args.theta
    if args.theta_file is not None:
        with open(args.theta_file) as fh:
            text = fh.read()
    theta = io.theta_from_json(text)
    if args.delta is not None and args.delta != theta.delta:
        raise UsageError(f"--delta {args.delta} disagrees with theta length {len(theta)}")
    return theta


def load_model(args: argparse.Namespace) -> ModelSpec:
    if args.lam is None:
        raise UsageError("--lambda is required")
    return ModelSpec(load_theta(args), io.text_to_number(args.lam))


def theta_id(theta: ThetaVector) -> str:
    return hashlib.sha1(io.theta_to_json(theta).encode()).hexdigest()[:8]


def lambda_grid(args: argparse.Namespace) -> np.ndarray:
    if args.count < 0:
        raise UsageError("--count must be nonnegative")
    if args.count == 0:
        return np.array([])
    lo, hi = args.lambda_min, args.lambda_max
    if not (0 < lo <= hi):
        raise UsageError("need 0 < --lambda-min <= --lambda-max")
    if args.spacing == "log":
        return np.geomspace(lo, hi, args.count)
    return np.linspace(lo, hi, args.count)


def _map(fn, items, jobs: int) -> list:
    """Ordered map, threaded when jobs > 1."""
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# ---------------------------------------------------------------------------
# commands


def cmd_analyze(args: argparse.Namespace) -> int:
    model = load_model(args)
    theta = model.theta
    log_convex = is_log_convex(theta)
    report = classify_uniqueness(model)
    out = {
        "config": RunConfig.from_args(args).to_dict(),
        "delta": model.delta,
        "theta": [io.number_to_text(v) for v in theta.values],
        "lambda": io.number_to_text(model.lam),
        "log_convex": log_convex,
        "psi": float(psi(theta)),
        "lambda_lower": float(lambda_lower(theta)),
        "lambda_upper": float(lambda_upper(theta)),
        "verdict": report.verdict,
        "x_star": report.diagonal_x,
        "two_cycle": list(report.two_cycle) if report.two_cycle else None,
        "fixed_point": report.to_dict(),
        "limit_probabilities": None,
        "induced_mu": list(induced_mu(theta.as_float(), 1.0, report.diagonal_x).probs),
    }
    if report.verdict == UNIQUE:
        out["limit_probabilities"] = limit_probabilities(model, check=False).to_dict()
    io.dump_json(out, args.output)
    return EXIT_OK


SWEEP_COLUMNS = ("lambda", "verdict", "x_star", "gap", "zeta_even", "zeta_odd")
DEPTH_COLUMNS = ("lambda", "theta_id", "depth", "zeta_lower", "zeta_upper", "zeta_extremal", "gap")


def _sweep_row(theta: ThetaVector, lam: float) -> dict:
    row = {"lambda": float(lam), "verdict": UNDETERMINED}
    try:
        model = ModelSpec(theta, float(lam))
        rep = classify_uniqueness(model)
        row.update(verdict=rep.verdict, x_star=rep.diagonal_x)
        even, odd, gap = parity_gap(model, strict=False)
        row.update(gap=gap, zeta_even=even, zeta_odd=odd)
    except Exception:
        row["verdict"] = UNDETERMINED
    return row


def cmd_sweep(args: argparse.Namespace) -> int:
    theta = load_theta(args)
    grid = lambda_grid(args)
    if args.depths is not None:
        if args.depths < 5:
            raise UsageError("--depths must be at least 5")
        tid = theta_id(theta)
        rows = []
        for lam in grid:
            for r in depth_table(ModelSpec(theta, float(lam)), args.depths):
                rows.append({"lambda": float(lam), "theta_id": tid, **r})
        io.write_csv(rows, DEPTH_COLUMNS, args.output)
        return EXIT_OK
    rows = _map(lambda lam: _sweep_row(theta, lam), list(grid), args.jobs)
    io.write_csv(rows, SWEEP_COLUMNS, args.output)
    return EXIT_OK


def cmd_phase(args: argparse.Namespace) -> int:
    theta = load_theta(args)
    if not is_log_convex(theta):
        raise UsageError("phase bracketing needs a log-convex theta")
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            br = critical_bracket(theta, tol=args.tol, grid_points=args.grid_points, executor=pool)
    else:
        br = critical_bracket(theta, tol=args.tol, grid_points=args.grid_points)
    out = {"config": RunConfig.from_args(args).to_dict(), **br.to_dict(), "width": br.width}
    if args.grid_csv:
        io.write_csv([{"lambda": l, "verdict": v} for l, v in br.grid], ("lambda", "verdict"), args.grid_csv)
    io.dump_json(out, args.output)
    return EXIT_OK


def _h_grid(args: argparse.Namespace) -> list:
    if args.h_values is not None:
        vals = json.loads(args.h_values)
        if not isinstance(vals, list):
            raise UsageError("--h-values must be a JSON array")
        return [float(v) for v in vals]
    return [0.0, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0]


def cmd_perturb(args: argparse.Namespace) -> int:
    if args.delta is None or args.delta < 3:
        raise UsageError("--delta >= 3 is required")
    if args.scan_e0:
        rows = [{"h": h, "verdict": v} for h, v in nonmonotonicity_scan(args.delta, _h_grid(args))]
        io.write_csv(rows, ("h", "verdict"), args.output)
        return EXIT_OK
    if args.c is None:
        raise UsageError("--c (JSON array) is required unless --scan-e0 is given")
    c = [float(v) for v in json.loads(args.c)]
    rep = classify_direction(args.delta, c)
    out = {"config": RunConfig.from_args(args).to_dict(), **rep.to_dict()}
    if args.slopes:
        out["slopes"] = slope_report(args.delta, c).to_dict()
    io.dump_json(out, args.output)
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    model = load_model(args)
    out: dict = {"config": RunConfig.from_args(args).to_dict()}
    if args.graph is not None:
        graph = read_edge_list(args.graph)
        wc = enumerate_Z(model, graph)
        out.update(Z=wc.Z, log_Z=wc.log_Z, independent_sets=wc.n_sets)
        if model.delta in graph.degrees():
            law = small_graph_neighbor_law(model, graph)
            out.update(neighbor_law=list(law.mu.probs), p_included=law.p_included)
    elif args.tree_depth is not None:
        d, b = args.tree_depth, args.boundary
        if model.theta.is_exact and not isinstance(model.lam, float):
            z = dp_partition_exact(model, d, b)
            out["Z"] = {"Z00": z[0], "Z01": z[1], "Z10": z[2]}
            out["zeta"] = z[1] / z[0] if z[0] else None
        else:
            z = dp_partition(model, d, b)
            out["log_Z"] = {"Z00": z[0], "Z01": z[1], "Z10": z[2]}
            out["zeta"] = math.exp(z[1] - z[0])
        out["root_law"] = conditional_pk_exact(model, d, b)
    else:
        raise UsageError("give --graph or --tree-depth")
    io.dump_json(out, args.output)
    return EXIT_OK


def cmd_mcmc(args: argparse.Namespace) -> int:
    model = load_model(args)
    if args.n is None:
        raise UsageError("--n is required")
    if args.sweeps <= args.burnin:
        raise UsageError("--sweeps must exceed --burnin")
    theta = model.theta.as_float()
    model = ModelSpec(theta, float(model.lam))
    graph = gen_random_regular(args.n, model.delta, seed=args.seed, min_girth=args.min_girth)
    est = estimate_neighbor_law(model, graph, args.sweeps, args.burnin, args.chains, args.seed, jobs=args.jobs)
    fit = fit_mu_shape(est.mu, theta)
    out = {
        "config": RunConfig.from_args(args).to_dict(),
        **est.to_dict(),
        "fit": {"c": fit.c, "x": fit.x, "residual": fit.residual, "masked": fit.masked},
    }
    rep = classify_uniqueness(model)
    target = induced_mu(theta, 1.0, rep.diagonal_x)
    out["theory"] = {"verdict": rep.verdict, "x_star": rep.diagonal_x, "mu": list(target.probs)}
    out["tv_to_theory"] = est.mu.tv_distance(target)
    if args.samples_csv:
        samples, _, _ = run_chain(model, graph, args.sweeps, args.burnin, chain_seeds(args.seed, args.chains)[0])
        D = model.delta
        cols = [f"excluded_k{k}" for k in range(D + 1)] + ["included"]
        rows = [dict(zip(["sample", *cols], [i, *map(int, s)])) for i, s in enumerate(samples)]
        io.write_csv(rows, ["sample", *cols], args.samples_csv)
    io.dump_json(out, args.output)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    names = list(checks.CHECKS)
    if args.only:
        names = [n.strip() for n in args.only.split(",") if n.strip()]
        unknown = [n for n in names if n not in checks.CHECKS]
        if unknown:
            raise UsageError(f"unknown checks: {', '.join(unknown)}; available: {', '.join(checks.CHECKS)}")
    failed = []
    for name in names:
        kwargs = {"jobs": args.jobs} if name == "mcmc" else {}
        res = checks.run_check(name, **kwargs)
        print(json.dumps(io.to_jsonable(res.to_dict())), flush=True)
        if not res.passed:
            failed.append(name)
    summary = {"summary": True, "passed": not failed, "failed": failed, "ran": names}
    print(json.dumps(summary), flush=True)
    return EXIT_CHECK_FAILED if failed else EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _model_args(p: argparse.ArgumentParser, need_lambda: bool = True) -> None:
    p.add_argument("--delta", type=int)
    p.add_argument("--family", choices=FAMILIES)
    p.add_argument("--theta", help="JSON array of decimal strings or numbers")
    p.add_argument("--theta-file")
    if need_lambda:
        p.add_argument("--lambda", dest="lam", help="activity, decimal or p/q")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrfphase", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(handler=handler)
        p.add_argument("--output", help="output path, stdout when omitted")
        return p

    p = add("analyze", cmd_analyze, "classify one model and report its fixed-point data")
    _model_args(p)

    p = add("sweep", cmd_sweep, "CSV over a lambda grid")
    _model_args(p, need_lambda=False)
    p.add_argument("--lambda-min", type=float, default=0.5)
    p.add_argument("--lambda-max", type=float, default=8.0)
    p.add_argument("--count", type=int, default=64)
    p.add_argument("--spacing", choices=("log", "linear"), default="log")
    p.add_argument("--depths", type=int, help="emit the bounding-sequence table up to this depth instead")
    p.add_argument("--jobs", type=int)

    p = add("phase", cmd_phase, "bracket the uniqueness transition in lambda")
    _model_args(p, need_lambda=False)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--grid-points", type=int, default=64)
    p.add_argument("--grid-csv")
    p.add_argument("--jobs", type=int)

    p = add("perturb", cmd_perturb, "first-order direction analysis at the hardcore threshold")
    p.add_argument("--delta", type=int)
    p.add_argument("--c", help="JSON array with delta+1 entries")
    p.add_argument("--slopes", action="store_true", help="also compare slope formulas with finite differences")
    p.add_argument("--scan-e0", action="store_true")
    p.add_argument("--h-values", help="JSON array of h for --scan-e0")

    p = add("oracle", cmd_oracle, "exact partition functions on small graphs or trees")
    _model_args(p)
    p.add_argument("--graph", help="edge list: 'n m' then m lines 'u v'")
    p.add_argument("--tree-depth", type=int)
    p.add_argument("--boundary", choices=BOUNDARY_LABELS, default="all_included")

    p = add("mcmc", cmd_mcmc, "heat-bath sampling on a random regular graph")
    _model_args(p)
    p.add_argument("--n", type=int)
    p.add_argument("--sweeps", type=int, default=2 * 10**5)
    p.add_argument("--burnin", type=int, default=DEFAULT_BURN_IN)
    p.add_argument("--chains", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-girth", type=int)
    p.add_argument("--samples-csv", help="per-sample counts of chain 0")
    p.add_argument("--jobs", type=int)

    p = add("verify", cmd_verify, "run the acceptance suite")
    p.add_argument("--only", help="comma-separated check names")
    p.add_argument("--jobs", type=int)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        if hasattr(args, "jobs") and args.jobs is None:
            args.jobs = default_jobs()
        if hasattr(args, "jobs") and args.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        return args.handler(args)
    except (UsageError, ValueError, json.JSONDecodeError, OSError) as exc:
        print(f"mrfphase {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
