"""Command-line interface: generate, split, fit, predict-links, eval.

Bulk outputs go to files named from ``--out``; stdout carries only
``metric<TAB>value`` lines.  Every run also writes ``<out>.manifest.json``
recording the resolved configuration, seed and sha256 of each input and
output file.

Exit codes: 0 success, 1 usage, 2 I/O, 3 data validation.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .evalgen import (GenConfig, auprc, generate_planted, nmi, pr_curve, read_partition,
                      read_scored_pairs, theta_hat_scores, write_partition,
                      write_scored_pairs)
from .graph import hold_out_split, prune_low_degree, read_graph, read_pairs, write_graph, write_pairs
from .inference import FitConfig, fit, read_membership, write_membership, write_trace

log = logging.getLogger("hsbm")

EXIT_USAGE, EXIT_IO, EXIT_DATA = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out: str, command: str, config: dict, inputs: dict, outputs: dict,
                    seed, started: float) -> None:
    manifest = {
        "subcommand": command,
        "version": __version__,
        "config": config,
        "seed": seed,
        "inputs": {k: {"path": v, "sha256": _sha256(v)} for k, v in inputs.items()},
        "outputs": {k: {"path": v, "sha256": _sha256(v)} for k, v in outputs.items()},
        "wall_time_s": round(time.perf_counter() - started, 6),
    }
    with open(f"{out}.manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _emit(metric: str, value) -> None:
    print(f"{metric}\t{value}")


def _ensure_parent(prefix: str) -> None:
    Path(prefix).parent.mkdir(parents=True, exist_ok=True)


# ---------------------------------------------------------------------------
# subcommands

def cmd_generate(args) -> None:
    started = time.perf_counter()
    if args.k is None and (args.smin is None or args.smax is None):
        raise UsageError("give --k or both --smin and --smax")
    cfg = GenConfig(n=args.n, k=args.k, s_min=args.smin, s_max=args.smax,
                    mixing=args.mixing, d_avg=args.davg, d_max=args.dmax,
                    gamma=args.gamma, seed=args.seed)
    g, labels = generate_planted(cfg)
    _ensure_parent(args.out)
    edges, truth = f"{args.out}.edges.tsv", f"{args.out}.truth.tsv"
    write_graph(g, edges)
    with open(truth, "w") as fh:
        write_partition(g.vertex_names, labels, fh)
    _write_manifest(args.out, "generate", vars(cfg), {}, {"edges": edges, "truth": truth},
                    args.seed, started)
    _emit("vertices", g.n)
    _emit("edges", g.num_edges)
    _emit("groups", int(labels.max()))


def cmd_split(args) -> None:
    started = time.perf_counter()
    g = read_graph(args.graph)
    train, pairs = hold_out_split(g, args.fraction, args.policy, args.seed)
    _ensure_parent(args.out)
    train_path, pairs_path = f"{args.out}.train.tsv", f"{args.out}.pairs.tsv"
    write_graph(train, train_path)
    write_pairs(pairs, pairs_path)
    config = {"fraction": args.fraction, "policy": args.policy}
    _write_manifest(args.out, "split", config, {"graph": args.graph},
                    {"train": train_path, "pairs": pairs_path}, args.seed, started)
    _emit("links", pairs.n_links)
    _emit("nonlinks", pairs.n_nonlinks)


def cmd_fit(args) -> None:
    started = time.perf_counter()
    g = read_graph(args.graph)
    if args.min_degree > 0:
        g, _ = prune_low_degree(g, args.min_degree)
    if g.n == 0:
        raise ValueError("graph has no vertices left to fit")
    depth = args.depth if args.depth == "auto" else int(args.depth)
    cfg = FitConfig(model=args.model, local_rule=args.rule,
                    update_mode="deterministic" if args.mode == "det" else "probabilistic",
                    restricted=args.restricted == "on", depth=depth, a0=args.a0, b0=args.b0,
                    max_sweeps=args.max_sweeps, tol=args.tol, seed=args.seed,
                    sweep_order=args.sweep_order, prune_threshold=args.prune_threshold)
    result = fit(g, cfg)
    _ensure_parent(args.out)
    paths = {k: f"{args.out}.{k}.tsv" for k in ("membership", "tree", "pruned", "trace")}
    with open(paths["membership"], "w") as fh:
        write_membership(result, g.vertex_names, fh)
    with open(paths["tree"], "w") as fh:
        result.tree.dump(fh)
    with open(paths["pruned"], "w") as fh:
        result.pruned.write(fh)
    with open(paths["trace"], "w") as fh:
        write_trace(result.trace, fh)
    config = cfg.as_dict()
    config.update(resolved_depth=result.tree.depth, min_degree=args.min_degree,
                  converged=result.converged, sweeps=len(result.trace),
                  group_count=result.group_count)
    _write_manifest(args.out, "fit", config, {"graph": args.graph}, paths, args.seed, started)
    _emit("groups", result.group_count)
    _emit("sweeps", len(result.trace))
    _emit("converged", str(result.converged).lower())
    if result.trace:
        _emit("score", repr(float(result.trace[-1].score)))


def cmd_predict_links(args) -> None:
    started = time.perf_counter()
    g = read_graph(args.graph_train)
    pairs = read_pairs(args.pairs)
    with open(args.membership) as fh:
        member = read_membership(fh)
    if len(pairs) and (pairs.i.min() < 0 or max(pairs.i.max(), pairs.j.max()) >= g.n):
        raise ValueError("pair indices fall outside the training graph")
    labels = np.zeros(g.n, dtype=np.int64)
    known = np.zeros(g.n, dtype=bool)
    for idx, name in enumerate(g.vertex_names):
        if name in member:
            labels[idx] = member[name]
            known[idx] = True
    missing = ~known[pairs.i] | ~known[pairs.j]
    if missing.any():
        k = int(np.flatnonzero(missing)[0])
        raise ValueError(f"pair ({pairs.i[k]}, {pairs.j[k]}) has a vertex without a group")
    # vertices outside the membership form their own group; no pair touches it
    scores = theta_hat_scores(g, labels, pairs)
    _ensure_parent(args.out)
    out = f"{args.out}.scored.tsv"
    with open(out, "w") as fh:
        write_scored_pairs(pairs, scores, fh)
    _write_manifest(args.out, "predict-links", {},
                    {"graph_train": args.graph_train, "membership": args.membership,
                     "pairs": args.pairs}, {"scored": out}, None, started)
    _emit("pairs", len(pairs))


def cmd_eval(args) -> None:
    if args.pred:
        with open(args.pred) as fh:
            scores, labels = read_scored_pairs(fh)
        _emit("ap", repr(auprc(scores, labels)))
        _emit("prevalence", repr(float(labels.mean())))
        if args.pr_curve:
            rec, prec = pr_curve(scores, labels)
            with open(args.pr_curve, "w") as fh:
                for r, p in zip(rec.tolist(), prec.tolist()):
                    fh.write(f"{r!r}\t{p!r}\n")
        return
    with open(args.parts[0]) as fh:
        a = read_partition(fh)
    with open(args.parts[1]) as fh:
        b = read_partition(fh)
    if set(a) != set(b):
        raise ValueError("partition files cover different vertices")
    names = sorted(a)
    _emit("nmi", repr(nmi([a[k] for k in names], [b[k] for k in names])))


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hsbm", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("generate", help="planted-partition benchmark graph")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--k", type=int)
    gen.add_argument("--smin", type=int)
    gen.add_argument("--smax", type=int)
    gen.add_argument("--mixing", type=float, default=0.1)
    gen.add_argument("--davg", type=float, default=10.0)
    gen.add_argument("--dmax", type=float, default=100.0)
    gen.add_argument("--gamma", type=float, default=2.5, help="degree power-law exponent")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output prefix")
    gen.set_defaults(func=cmd_generate)

    spl = sub.add_parser("split", help="hold out edges and sample non-edges")
    spl.add_argument("--graph", required=True)
    spl.add_argument("--fraction", type=float, default=0.1)
    spl.add_argument("--policy", choices=("equal", "preserve_ratio"), default="equal")
    spl.add_argument("--seed", type=int, default=0)
    spl.add_argument("--out", required=True, help="output prefix")
    spl.set_defaults(func=cmd_split)

    f = sub.add_parser("fit", help="fit a hierarchical block model")
    f.add_argument("--graph", required=True)
    f.add_argument("--model", choices=("hdsb", "hsb"), default="hdsb")
    f.add_argument("--rule", choices=("mf", "collapsed"), default="collapsed")
    f.add_argument("--mode", choices=("det", "prob"), default="det")
    f.add_argument("--depth", default="auto", type=_depth_arg, help="integer or 'auto'")
    f.add_argument("--restricted", choices=("on", "off"), default="on")
    f.add_argument("--a0", type=float, default=1.0)
    f.add_argument("--b0", type=float, default=1.0)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--min-degree", type=float, default=0,
                   help="iteratively drop vertices of smaller degree first")
    f.add_argument("--max-sweeps", type=int)
    f.add_argument("--tol", type=float, default=1e-6)
    f.add_argument("--sweep-order", choices=("ascending", "shuffled"), default="ascending")
    f.add_argument("--prune-threshold", type=float, default=0.0)
    f.add_argument("--out", required=True, help="output prefix")
    f.set_defaults(func=cmd_fit)

    pr = sub.add_parser("predict-links", help="score held-out pairs by group link frequency")
    pr.add_argument("--graph-train", required=True)
    pr.add_argument("--membership", required=True)
    pr.add_argument("--pairs", required=True)
    pr.add_argument("--out", required=True, help="output prefix")
    pr.set_defaults(func=cmd_predict_links)

    ev = sub.add_parser("eval", help="average precision or partition NMI")
    grp = ev.add_mutually_exclusive_group(required=True)
    grp.add_argument("--pred", help="scored pairs TSV")
    grp.add_argument("--parts", nargs=2, metavar=("A", "B"), help="two partition TSVs")
    ev.add_argument("--pr-curve", help="also write recall/precision TSV here")
    ev.set_defaults(func=cmd_eval)
    return p


def _depth_arg(value: str):
    if value == "auto":
        return value
    try:
        d = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("depth must be an integer or 'auto'") from None
    if d < 1:
        raise argparse.ArgumentTypeError("depth must be >= 1")
    return d


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"hsbm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"hsbm: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"hsbm: invalid data: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
