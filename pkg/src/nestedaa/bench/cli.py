"""Command-line entry point: ``nestedaa <subcommand> [flags]``.

Global flags may be given before or after the subcommand.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .. import qcheck
from ..amptrack import BiasConfig
from ..gas import DEFAULT_LAMBDA, SubspaceCache
from ..instances import (
    CorrType,
    Ordering,
    generate_instance,
    read_jsonl,
    reorder_items,
    write_jsonl,
)
from ..ksolve import optimal_solution
from ..nested import DEFAULT_L, DepthPolicy, clopper_pearson
from .experiments import (
    DEFAULT_BIAS,
    DEFAULT_SEEDS,
    BASELINE,
    NESTED,
    ProtocolParams,
    SweepSpec,
    band_values,
    capweight_sweep,
    optgap_experiment,
    run_batch,
    rvtr_sweep,
)
from .output import FORMATS, emit_outputs, write_records

log = logging.getLogger("nestedaa")

CP_CONFIDENCES = (0.80, 0.90, 0.95, 0.99)

_GLOBAL_DEFAULTS = {
    "seed": 0,
    "lam": DEFAULT_LAMBDA,
    "bias": str(DEFAULT_BIAS),
    "L": DEFAULT_L,
    "depth_policy": "rvtr:0.6",
    "budget_const": 10.0,
    "budget_exp": "2",
    "threads": 1,
    "out_dir": ".",
    "format": "csv",
}


def int_list(text: str) -> tuple[int, ...]:
    """``"10-25"``, ``"10,12,14"`` or a mix such as ``"10-12,20"``."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty integer list {text!r}")
    return tuple(out)


def float_list(text: str) -> tuple[float, ...]:
    vals = tuple(float(x) for x in text.split(",") if x.strip())
    if not vals:
        raise ValueError(f"empty list {text!r}")
    return vals


def parse_bias(text: str) -> Optional[float]:
    if text.strip().lower() == "n":
        return None
    value = float(text)
    if value < 0:
        raise ValueError("bias must be >= 0 or 'n'")
    return value


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda key: argparse.SUPPRESS) if suppress else (lambda key: _GLOBAL_DEFAULTS[key])
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=d("seed"), help="master seed (replicate j uses seed+j)")
    g.add_argument("--lambda", dest="lam", type=float, default=d("lam"), help="rotation-bound growth factor")
    g.add_argument("--bias", default=d("bias"), help="QTG bias b (a number, or 'n' for b = item count)")
    g.add_argument("--L", dest="L", type=int, default=d("L"), help="IIF consecutive-success count")
    g.add_argument("--depth-policy", default=d("depth_policy"), help="fixed:K or rvtr:TARGET")
    g.add_argument("--budget-const", type=float, default=d("budget_const"), help="C in B = C n^t")
    g.add_argument("--budget-exp", default=d("budget_exp"), help="t in B = C n^t (comma list allowed)")
    g.add_argument("--threads", type=int, default=d("threads"))
    g.add_argument("--out-dir", default=d("out_dir"))
    g.add_argument("--format", choices=FORMATS, default=d("format"))


def _cohort_flags(p: argparse.ArgumentParser, n: str, tightness: str, cw_min=None, cw_max=None) -> None:
    p.add_argument("--instances", type=Path, help="JSONL instance file (replaces generation)")
    p.add_argument("--n", default=n, type=int_list, help="item counts, e.g. 10-25")
    p.add_argument("--tightness", default=tightness, type=int_list, help="tightness values S")
    p.add_argument("--range", dest="range_r", type=int, default=1000)
    p.add_argument("--type", dest="corr_type", type=CorrType.parse, default=CorrType.UNCORRELATED)
    p.add_argument("--capweight-min", type=float, default=cw_min)
    p.add_argument("--capweight-max", type=float, default=cw_max)
    p.add_argument("--ordering", type=Ordering, default=Ordering.DENSITY_DESCENDING,
                   choices=list(Ordering), metavar="{" + ",".join(o.value for o in Ordering) + "}")
    p.add_argument("--max-instances", type=int)
    p.add_argument("--seeds", type=int, default=DEFAULT_SEEDS, help="repetitions per datapoint")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nestedaa", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        sp = sub.add_parser(name, help=help_text)
        _global_flags(sp, suppress=True)
        return sp

    sp = add("generate", "write generated instances as JSONL")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--range", dest="range_r", type=int, default=1000)
    sp.add_argument("--type", dest="corr_type", type=CorrType.parse, default=CorrType.UNCORRELATED)
    sp.add_argument("--tightness", type=int, required=True)
    sp.add_argument("--count", type=int, help="instances i = 1..count (default: tightness)")
    sp.add_argument("--out", default="-", help="output path, '-' for stdout")

    sp = add("run", "run one protocol under budget C n^t")
    sp.add_argument("--protocol", choices=(BASELINE, NESTED), required=True)
    sp.add_argument("--instances", type=Path, help="JSONL instance file")
    sp.add_argument("--n", type=int, default=12)
    sp.add_argument("--range", dest="range_r", type=int, default=1000)
    sp.add_argument("--type", dest="corr_type", type=CorrType.parse, default=CorrType.UNCORRELATED)
    sp.add_argument("--tightness", type=int, default=10)
    sp.add_argument("--index", type=int_list, default=(1,), help="instance indices i")
    sp.add_argument("--ordering", type=Ordering, default=Ordering.DENSITY_DESCENDING)
    sp.add_argument("--seeds", type=int, default=1, help="repetitions")
    sp.add_argument("--start", choices=("greedy", "random"), default="greedy")

    sp = add("sweep-capweight", "best-depth relative cost against capweight")
    _cohort_flags(sp, "10-25", "10,20")
    sp = add("sweep-rvtr", "relative cost against RVTR")
    _cohort_flags(sp, "10-25", "10,20", cw_min=0.6)
    sp.add_argument("--max-incumbents", type=int, default=3)
    sp.add_argument("--random-chain", action="store_true", help="add incumbents from a random feasible start")

    sp = add("optgap", "final optimality gap under budget C n^t")
    _cohort_flags(sp, "30", "100,200", cw_min=0.6)
    sp.set_defaults(seeds=4)

    sp = add("verify", "statevector cross-check of the amplitude tracker")
    sp.add_argument("--count", type=int, default=10, help="random instances")
    sp.add_argument("--max-n", type=int, default=4)
    sp.add_argument("--r-max", type=int, default=3)
    sp.add_argument("--tol", type=float, default=1e-9)

    sp = add("cp-table", "Clopper-Pearson bounds after L successes in L trials")
    return parser


def _params(args) -> ProtocolParams:
    return ProtocolParams(
        bias=parse_bias(str(args.bias)),
        lam=args.lam,
        L=args.L,
        policy=DepthPolicy.parse(args.depth_policy),
        start=getattr(args, "start", "greedy"),
    )


def _load(path: Path):
    with open(path) as fh:
        return tuple(read_jsonl(fh))


def _spec(args) -> SweepSpec:
    return SweepSpec(
        n_values=args.n,
        tightness_values=args.tightness,
        range_r=args.range_r,
        corr_type=args.corr_type,
        capweight_min=args.capweight_min,
        capweight_max=args.capweight_max,
        seeds=args.seeds,
        ordering=args.ordering,
        max_instances=args.max_instances,
        pool=_load(args.instances) if args.instances else None,
    )


def cmd_generate(args) -> int:
    count = args.count if args.count is not None else args.tightness
    insts = [generate_instance(args.n, args.range_r, args.corr_type, args.tightness, i) for i in range(1, count + 1)]
    if args.out == "-":
        write_jsonl(insts, sys.stdout)
    else:
        with open(args.out, "w") as fh:
            write_jsonl(insts, fh)
    return 0


def cmd_run(args) -> int:
    if args.instances:
        insts = [reorder_items(inst, args.ordering) for inst in _load(args.instances)]
    else:
        insts = [
            reorder_items(generate_instance(args.n, args.range_r, args.corr_type, args.tightness, i), args.ordering)
            for i in args.index
        ]
    records = run_batch(
        insts, args.protocol, args.budget_const, float_list(args.budget_exp), args.seeds, _params(args),
        args.seed, args.threads,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = write_records(records, out / f"run_{args.protocol}.csv")
    print(f"{len(records)} runs -> {path}")
    return 0


def _report_sweep(name, result, args) -> None:
    for path in emit_outputs(name, result, Path(args.out_dir), args.format):
        print(f"wrote {path}")
    print(f"instances {result.instances}, greedy-optimal excluded {result.excluded}")


def cmd_sweep_capweight(args) -> int:
    spec = _spec(args)
    res = capweight_sweep(spec, _params(args), args.seed, args.threads)
    if not res.points:
        log.warning("no instance passed the filter")
    _report_sweep("capweight", res, args)
    pts = [(p["capweight"], p["c_rel_opt"]) for p in res.points]
    for lo, hi in ((0.0, 0.4), (0.6, 1.0)):
        vals = band_values(pts, lo, hi)
        mean = f"{np.mean(vals):+.4f}" if vals else "n/a"
        print(f"capweight ({lo}, {hi}): {len(vals)} instances, mean c_rel_opt {mean}")
    return 0


def cmd_sweep_rvtr(args) -> int:
    spec = _spec(args)
    res = rvtr_sweep(spec, _params(args), args.seed, args.threads, args.max_incumbents, args.random_chain)
    if not res.points:
        log.warning("no instance passed the filter")
    _report_sweep("rvtr", res, args)
    for s in res.summary:
        if s.count:
            print(f"RVTR [{s.lo:.1f}, {s.hi:.1f}): n={s.count:5d} mean {s.mean:+.3f} median {s.median:+.3f}")
    return 0


def cmd_optgap(args) -> int:
    spec = _spec(args)
    res = optgap_experiment(
        spec, args.budget_const, float_list(args.budget_exp), args.seeds, _params(args), args.seed, args.threads
    )
    _report_sweep("optgap", res, args)
    for s in res.summary:
        print(f"t={s.t:g} {s.protocol:8s} gamma {s.mean:.4f} +- {s.std:.4f} ({s.count} instances)")
    return 0


def cmd_verify(args) -> int:
    t0 = time.perf_counter()
    bad = qcheck.oracle_mismatches(6)
    print(f"threshold oracle, widths 1..6: {'ok' if not bad else f'{len(bad)} mismatches'}")
    rng = np.random.default_rng(args.seed)
    worst, checks = 0.0, 0
    for j in range(args.count):
        n = 2 + j % (args.max_n - 1)
        inst = generate_instance(n, 8, CorrType.UNCORRELATED, 3, int(rng.integers(1, 4)))
        y_star = optimal_solution(inst).value
        y = int(rng.integers(0, y_star))
        for b in (0.0, 1.0, 3.0):
            bias = BiasConfig.greedy(inst, b)
            cache = SubspaceCache(inst, bias)
            for k in range(1, n):
                for r_in in range(args.r_max + 1):
                    worst = max(worst, qcheck.tracking_deviation(inst, bias, k, y, r_in, args.r_max, cache))
                    checks += 1
    ok = not bad and worst <= args.tol
    print(f"tracking vs statevector: {checks} operator sequences, max |dP| = {worst:.3e} (tol {args.tol:g})")
    print(f"{'PASS' if ok else 'FAIL'} in {time.perf_counter() - t0:.1f} s")
    return 0 if ok else 1


def cmd_cp_table(args) -> int:
    L = args.L
    print(f"confidence  p_lower  p_upper   (s = t = {L})")
    for conf in CP_CONFIDENCES:
        b = clopper_pearson(L, L, conf)
        print(f"{conf:>9.0%}  {b.p_lower:.3f}    {b.p_upper:.3f}")
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "run": cmd_run,
    "sweep-capweight": cmd_sweep_capweight,
    "sweep-rvtr": cmd_sweep_rvtr,
    "optgap": cmd_optgap,
    "verify": cmd_verify,
    "cp-table": cmd_cp_table,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
