"""Command-line front end: ``gen``, ``solve`` and ``bench``.

Examples
--------
::

    attentive-bp gen random-cop --n 60 --p1 0.25 --count 3 --seed 7 --out data/
    attentive-bp solve data/random-cop_n60_000.json --algo dbp --lambda 0.9
    attentive-bp bench data/manifest.json --algos bp,dbp,dabp --out report/

``solve`` and ``bench`` accept ``--config FILE`` holding a JSON object whose
keys are option names (``restarts``, ``tmax``, ``lambda`` ...); flags given
on the command line take precedence.  Set ``ATTENTIVE_BP_WORKERS`` to run
bench instances in parallel.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import bench, oracle, trainer
from .factor_graph import FAMILIES, GeneratorConfig, InstanceFormatError, InvalidInstanceError, generate
from .factor_graph import load_instance, save_instance

log = logging.getLogger("attentive_bp")

EXIT_OK, EXIT_ERROR, EXIT_USAGE = 0, 1, 2


def derive_seeds(seed: int, count: int) -> list[int]:
    """Independent per-instance seeds derived from one master seed."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(c.generate_state(1, dtype=np.uint32)[0]) for c in children]


def cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    base = GeneratorConfig(args.family, args.n, domain_size=args.domain, p1=args.p1, m0=args.m0,
                           m1=args.m1, k=args.k, p=args.p)
    for idx, seed in enumerate(derive_seeds(args.seed, args.count)):
        instance = generate(base.with_seed(seed))
        name = f"{args.family}_n{args.n}_{idx:03d}.json"
        save_instance(instance, out / name)
        entries.append({"id": name[:-5], "path": name, "seed": seed})
    manifest = {"family": args.family, "params": base.family_params(), "seed": args.seed, "instances": entries}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {len(entries)} instances and manifest.json to {out}")
    return EXIT_OK


def _options(args) -> bench.SolveOptions:
    train = trainer.TrainConfig(
        restarts=args.restarts, t_max=args.tmax, t_upd=min(args.tupd, args.tmax), t_eff=args.teff,
        lr=args.lr, weight_decay=args.wd, eps=args.eps, seed=args.seed,
        split_ratio=None if args.rho <= 0 else args.rho,
    )
    return bench.SolveOptions(lam=args.lam, rho=args.rho, train=train, hidden=args.hidden,
                              gat_layers=args.gat_layers, att_heads=args.att_heads,
                              load_model=getattr(args, "load_model", None),
                              save_model=getattr(args, "save_model", None), exact_cap=args.exact_cap)


def _json_value(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def cmd_solve(args) -> int:
    instance = load_instance(args.instance)
    opts = _options(args)
    trace_fh = open(args.trace, "w", encoding="utf-8") if args.trace else None
    try:
        def sink(rec):
            if trace_fh is not None:
                trace_fh.write(json.dumps(trainer.record_dict(rec)) + "\n")
        trace = bench.solve(instance, args.algo, opts, sink=sink)
    finally:
        if trace_fh is not None:
            trace_fh.close()
    summary = {k: _json_value(v) for k, v in trace.summary().items()}
    summary["instance"] = str(args.instance)
    text = json.dumps(summary, sort_keys=True)
    if args.summary:
        Path(args.summary).write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def cmd_bench(args) -> int:
    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    report = bench.run_bench(args.manifest, algos, _options(args), workers=args.workers)
    report.write(args.out)
    failed = [r for r in report.rows if r.error]
    for r in failed:
        log.error("%s / %s failed: %s", r.instance_id, r.algo, r.error)
    print(f"{len(report.rows)} rows written to {args.out}" + (f", {len(failed)} failed" if failed else ""))
    return EXIT_ERROR if failed else EXIT_OK


def _add_solver_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of option defaults; flags override it")
    p.add_argument("--lambda", dest="lam", type=float, default=0.9, help="damping factor for dbp variants")
    p.add_argument("--rho", type=float, default=0.95, help="split ratio for dbp-scfg and dabp (<= 0 disables for dabp)")
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--tmax", type=int, default=1000)
    p.add_argument("--tupd", type=int, default=20)
    p.add_argument("--teff", type=int, default=2)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--wd", type=float, default=5e-5)
    p.add_argument("--eps", type=float, default=trainer.bp.DEFAULT_EPS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden", type=int, default=8)
    p.add_argument("--gat-layers", type=int, default=4)
    p.add_argument("--att-heads", type=int, default=4)
    p.add_argument("--exact-cap", type=int, default=int(oracle.DEFAULT_CAP))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="attentive-bp", description="Attentive belief propagation for COPs.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate benchmark instances")
    g.add_argument("family", choices=FAMILIES)
    g.add_argument("--n", type=int, required=True, help="number of variables")
    g.add_argument("--domain", type=int, default=None, help="domain size (family default if omitted)")
    g.add_argument("--p1", type=float, default=0.25)
    g.add_argument("--m0", type=int, default=10)
    g.add_argument("--m1", type=int, default=10)
    g.add_argument("--k", type=int, default=10)
    g.add_argument("--p", type=float, default=0.3)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default=".")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve one instance file")
    s.add_argument("instance")
    s.add_argument("--algo", choices=bench.ALGORITHMS, default="dabp")
    s.add_argument("--trace", help="write per-iteration records as JSON lines")
    s.add_argument("--summary", help="also write the summary JSON here")
    s.add_argument("--load-model")
    s.add_argument("--save-model")
    _add_solver_options(s)
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run algorithms over a manifest")
    b.add_argument("manifest")
    b.add_argument("--algos", default="bp,dbp,dbp-scfg,dabp")
    b.add_argument("--out", default="report")
    b.add_argument("--workers", type=int, default=None, help=f"parallel workers (default ${bench.WORKERS_ENV} or 1)")
    _add_solver_options(b)
    b.set_defaults(func=cmd_bench)
    parser.set_defaults(_subparsers={"gen": g, "solve": s, "bench": b})
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ValueError(f"{args.config}: expected a JSON object")
    renames = {"lambda": "lam"}
    defaults = {renames.get(k, k).replace("-", "_"): v for k, v in raw.items()}
    unknown = sorted(k for k in defaults if not hasattr(args, k))
    if unknown:
        raise ValueError(f"{args.config}: unknown option(s) {', '.join(unknown)}")
    args._subparsers[args.command].set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InstanceFormatError, InvalidInstanceError, oracle.SearchSpaceTooLarge, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
