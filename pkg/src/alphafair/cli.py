"""Command-line harness: instance generation, bound sweeps and FD-ADMM benchmarks."""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bounds import compare_bounds, soa_bound, theorem_bound
from .fdadmm import SolverConfig, partition, solve, utility
from .instance import GeneratorConfig, generate_instance, load_instance, save_instance
from .oracle import verify_kkt
from .subproblem import RbConfig, penalty_from_bound

log = logging.getLogger("alphafair")

SWEEP_COLUMNS = ["alpha", "delta_w", "delta_c", "instance", "score",
                 "ratio_min", "ratio_avg", "ratio_max"]
BENCH_COLUMNS = ["variant", "requests", "instance", "iterations", "lambda0", "converged"]


# ---------------------------------------------------------------------------
# argument types
# ---------------------------------------------------------------------------

def positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def unit_interval(text):
    v = float(text)
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1], got {text}")
    return v


def list_of(kind):
    def parse(text):
        return [kind(t) for t in text.split(",") if t.strip()]
    return parse


def lambda0_mode(text):
    """``lb``, ``mb``, ``fixed:<v>`` or ``lb*<factor>``."""
    if text in ("lb", "mb"):
        return text
    if text.startswith("fixed:"):
        positive_float(text[6:])
        return text
    if text.startswith("lb*"):
        positive_float(text[3:])
        return text
    raise argparse.ArgumentTypeError(f"unknown lambda0 mode {text!r}")


def partition_strategy(text):
    if text in ("single", "per-link") or (text.startswith("chunks:") and text[7:].isdigit()):
        return text
    raise argparse.ArgumentTypeError(f"unknown partition {text!r}")


def on_off(text):
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def derive_seed(base, *keys):
    return int(np.random.SeedSequence([base, *keys]).generate_state(1)[0])


def fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def write_csv(rows, columns, out):
    w = csv.writer(out, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row[c]) for c in columns])


def open_output(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def solver_config(alpha, mode, instance, tol, max_iter, rb, workers=1):
    """Map a lambda0 mode string onto a :class:`SolverConfig`."""
    if mode == "lb":
        penalty = "local"
    elif mode == "mb":
        penalty = "soa"
    elif mode.startswith("fixed:"):
        penalty = float(mode[6:])
    else:
        factor = float(mode[3:])
        penalty = factor * penalty_from_bound(instance, alpha, theorem_bound(instance, alpha)).lambda0
    return SolverConfig(alpha=alpha, tolerance=tol, max_iterations=max_iter, penalty=penalty,
                        rb=RbConfig(enabled=rb), workers=workers)


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def cmd_generate(args):
    cfg = GeneratorConfig(args.nodes, args.attach, args.requests, args.delta_w, args.delta_c,
                          args.capacity_scale, args.seed)
    inst = generate_instance(cfg)
    save_instance(inst, args.output)
    s = inst.summary()
    print(f"links={s['links']} requests={s['requests']} "
          f"delta_w={s['delta_w']:.4g} delta_c={s['delta_c']:.4g} -> {args.output}")
    return 0


# ---------------------------------------------------------------------------
# bound-sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    alpha_grid: tuple
    delta_w_grid: tuple = (1.0,)
    delta_c_grid: tuple = (1.0,)
    instance_count: int = 10
    seed: int = 0
    nodes: int = 30
    attach: int = 3
    requests: tuple = (100,)
    capacity_scale: float = 1.0

    def __post_init__(self):
        if not self.alpha_grid or not self.delta_w_grid or not self.delta_c_grid or not self.requests:
            raise ValueError("experiment grids must be nonempty")
        if self.instance_count < 1:
            raise ValueError("instance_count must be >= 1")


def bound_sweep_rows(spec):
    rows = []
    for iw, dw in enumerate(spec.delta_w_grid):
        for ic, dc in enumerate(spec.delta_c_grid):
            insts = [generate_instance(GeneratorConfig(
                spec.nodes, spec.attach, spec.requests[0], dw, dc, spec.capacity_scale,
                derive_seed(spec.seed, iw, ic, k))) for k in range(spec.instance_count)]
            for alpha in spec.alpha_grid:
                cell = []
                for k, inst in enumerate(insts):
                    cmp = compare_bounds(theorem_bound(inst, alpha), soa_bound(inst, alpha))
                    cell.append({"alpha": alpha, "delta_w": dw, "delta_c": dc, "instance": k,
                                 "score": cmp.score, "ratio_min": cmp.ratio_min,
                                 "ratio_avg": cmp.ratio_avg, "ratio_max": cmp.ratio_max})
                mean = {c: float(np.mean([r[c] for r in cell])) for c in SWEEP_COLUMNS[4:]}
                rows += cell
                rows.append({"alpha": alpha, "delta_w": dw, "delta_c": dc, "instance": "mean", **mean})
                log.info("sweep alpha=%g delta_w=%g delta_c=%g score=%.3f ratio_avg=%.3g",
                         alpha, dw, dc, mean["score"], mean["ratio_avg"])
    return rows


def cmd_bound_sweep(args):
    spec = ExperimentSpec("boundSweep", tuple(args.alpha), tuple(args.delta_w),
                          tuple(args.delta_c), args.instances, args.seed, args.nodes,
                          args.attach, (args.requests,), args.capacity_scale)
    rows = bound_sweep_rows(spec)
    out, close = open_output(args.output)
    try:
        write_csv(rows, SWEEP_COLUMNS, out)
    finally:
        if close:
            out.close()
    return 0


# ---------------------------------------------------------------------------
# admm-bench
# ---------------------------------------------------------------------------

def _bench_cell(job):
    (variant, n, k, gen, alpha, tol, max_iter, rb, part, workers) = job
    inst = generate_instance(GeneratorConfig(*gen))
    cfg = solver_config(alpha, variant, inst, tol, max_iter, rb, workers)
    res = solve(inst, partition(inst, part), cfg)
    log.info("bench variant=%s requests=%d instance=%d iterations=%d converged=%s",
             variant, n, k, res.iterations, res.converged)
    return {"variant": variant, "requests": n, "instance": k, "iterations": res.iterations,
            "lambda0": float(res.lambda0), "converged": res.converged}


def admm_bench_rows(args):
    jobs = []
    for variant in args.variants:
        for n in args.requests:
            for k in range(args.instances):
                gen = (args.nodes, args.attach, n, args.delta_w, args.delta_c,
                       args.capacity_scale, derive_seed(args.seed, n, k))
                jobs.append((variant, n, k, gen, args.alpha, args.tol, args.max_iter, args.rb,
                             args.partition, args.workers))
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_bench_cell, jobs))
    else:
        rows = [_bench_cell(j) for j in jobs]
    order = {v: i for i, v in enumerate(args.variants)}
    rows.sort(key=lambda r: (order[r["variant"]], r["requests"], r["instance"]))
    return rows


def cmd_admm_bench(args):
    rows = admm_bench_rows(args)
    out, close = open_output(args.output)
    try:
        write_csv(rows, BENCH_COLUMNS, out)
    finally:
        if close:
            out.close()
    return 0


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def cmd_solve(args):
    inst = load_instance(args.instance)
    cfg = solver_config(args.alpha, args.lambda0, inst, args.tol, args.max_iter, args.rb,
                        args.workers)
    res = solve(inst, partition(inst, args.partition), cfg)
    z = res.allocation
    print(f"# converged={fmt(res.converged)} iterations={res.iterations} "
          f"lambda0={float(res.lambda0)!r} primal={float(res.primal)!r} dual={float(res.dual)!r}")
    print(f"# objective={utility(inst.weights, args.alpha, z)!r}")
    if args.verify:
        rep = verify_kkt(inst, args.alpha, z, args.kkt_tol)
        print(f"# kkt satisfied={fmt(rep.satisfied)} max_violation={float(rep.max_violation)!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["request", "allocation"])
    for rid, v in zip(inst.request_ids, z):
        w.writerow([rid, repr(float(v))])
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as f:
            f.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    if args.verify and not rep.satisfied:
        return 3
    return 0 if res.converged else 2


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _graph_args(p, requests_default=100):
    p.add_argument("--nodes", type=int, default=30)
    p.add_argument("--attach", type=int, default=3)
    p.add_argument("--capacity-scale", type=positive_float, default=1.0)
    p.add_argument("--seed", type=int, default=0)


def _solver_args(p):
    p.add_argument("--alpha", type=positive_float, default=1.0)
    p.add_argument("--tol", type=positive_float, default=1e-2)
    p.add_argument("--max-iter", type=int, default=100_000)
    p.add_argument("--partition", type=partition_strategy, default="single")
    p.add_argument("--rb", type=on_off, default=True, help="residual balancing: on|off")
    p.add_argument("--workers", type=int, default=1, help="threads running domain steps")


def build_parser():
    parser = argparse.ArgumentParser(prog="alphafair", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a random instance file")
    _graph_args(p)
    p.set_defaults(nodes=100, attach=4)
    p.add_argument("--requests", type=int, default=1000)
    p.add_argument("--delta-w", type=unit_interval, default=1.0)
    p.add_argument("--delta-c", type=unit_interval, default=1.0)
    p.add_argument("output")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("bound-sweep", help="compare the local and global bounds over a grid")
    _graph_args(p)
    p.add_argument("--requests", type=int, default=100)
    p.add_argument("--alpha", type=list_of(positive_float),
                   default=[0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0])
    p.add_argument("--delta-w", type=list_of(unit_interval), default=[1.0])
    p.add_argument("--delta-c", type=list_of(unit_interval), default=[0.01, 0.1, 1.0])
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_bound_sweep)

    p = sub.add_parser("admm-bench", help="iteration counts of FD-ADMM variants")
    _graph_args(p)
    _solver_args(p)
    p.set_defaults(capacity_scale=100.0)
    p.add_argument("--requests", type=list_of(int), default=[50, 100, 200, 400, 800])
    p.add_argument("--variants", type=list_of(lambda0_mode), default=["lb", "mb"])
    p.add_argument("--delta-w", type=unit_interval, default=0.9)
    p.add_argument("--delta-c", type=unit_interval, default=1.0)
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--jobs", type=int, default=1, help="benchmark cells run in parallel")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_admm_bench)

    p = sub.add_parser("solve", help="solve one instance file with FD-ADMM")
    p.add_argument("instance")
    _solver_args(p)
    p.add_argument("--lambda0", type=lambda0_mode, default="lb")
    p.add_argument("--verify", action="store_true", help="check the KKT conditions")
    p.add_argument("--kkt-tol", type=positive_float, default=1e-3)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_solve)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"alphafair: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
