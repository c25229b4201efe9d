"""Command-line surface: ingest, fit, generate, eval, export-viz.

Every command honors --seed (default from SLDM_SEED) and writes a
``<output>.manifest.json`` recording the command, resolved configuration,
input hashes, seed, tool version, and timestamps. Exit codes: 0 success,
1 usage error, 2 data error, 3 numeric failure.
"""

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict

import numpy as np

from . import __version__
from . import evaluate as evaluate_mod
from . import generate as generate_mod
from . import graph as graph_mod
from . import model as model_mod
from . import optim as optim_mod
from . import viz as viz_mod
from .errors import DataError, NumericError, SldmError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _default_seed():
    return int(os.environ.get("SLDM_SEED", "0"))


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_path, command, args_ns, inputs, config=None):
    manifest = {
        "tool": "sldm",
        "version": __version__,
        "command": command,
        "argv": sys.argv[1:],
        "options": {k: v for k, v in vars(args_ns).items() if k != "func"},
        "inputs": {p: _sha256(p) for p in inputs if p and os.path.exists(p)},
        "seed": getattr(args_ns, "seed", None),
        "config": config,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    with open(str(out_path) + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)


def _stats_text(stats, fmt):
    if fmt == "json":
        return json.dumps(stats.as_dict(), indent=2, sort_keys=True)
    return "\n".join(f"{k}={v}" for k, v in stats.as_dict().items())


def _stats_line(graph):
    s = graph_mod.degree_stats(graph)
    return f"({s.density:.4f}, {s.pct_pos:.0f}%, {s.pct_neg:.0f}%)"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_ingest(args):
    with open(args.input, "r", encoding="utf-8") as fh:
        records = graph_mod.parse_edge_list(fh)
    if args.aggregate:
        records = graph_mod.aggregate_temporal(records)
    if not args.directed:
        records = graph_mod.symmetrize(records)
    g = graph_mod.build_graph(records, args.directed)
    if args.lcc:
        g = graph_mod.largest_connected_component(g)
    graph_mod.write_graph(args.output, g)
    stats = graph_mod.degree_stats(g)
    print(_stats_text(stats, args.stats_format))
    _write_manifest(args.output, "ingest", args, [args.input])
    return EXIT_OK


_FIT_KEYS = ("model", "mode", "k", "rho", "lr", "iters", "sample_size", "seed",
             "deterministic", "trace_every", "block_rescale",
             "expressive_plus_distance", "init")


def _train_config(args):
    """Resolve defaults < config file < explicit flags into a TrainConfig."""
    resolved = {"seed": _default_seed()}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(_FIT_KEYS)
        if unknown:
            raise DataError(f"unknown config keys: {', '.join(sorted(unknown))}")
        resolved.update(file_cfg)
    for key in _FIT_KEYS:
        attr = "variant" if key == "mode" else key
        value = getattr(args, attr, None)
        if value is not None:
            resolved[key] = value
    return model_mod.TrainConfig(**resolved)


def cmd_fit(args):
    g = graph_mod.read_graph(args.graph)
    config = _train_config(args)
    if config.mode != "undirected" and not g.directed:
        raise DataError("directed variant requested for an undirected graph")
    if config.mode == "undirected" and g.directed:
        raise DataError("undirected variant requested for a directed graph; re-ingest with --undirected")
    result = optim_mod.fit(g, config)
    model_mod.save_checkpoint(args.output, result.params, config)
    if args.trace:
        optim_mod.write_trace_csv(args.trace, result.trace)
    _write_manifest(args.output, "fit", args, [args.graph], asdict(config))
    print(f"checkpoint written: {args.output}")
    return EXIT_OK


def cmd_generate(args):
    if bool(args.config) == bool(args.from_checkpoint):
        raise DataError("exactly one of --config or --from-checkpoint is required")
    gt = None
    if args.config:
        with open(args.config) as fh:
            raw = json.load(fh)
        calibrate = raw.pop("calibrate", None)
        raw.setdefault("seed", args.seed)
        config = generate_mod.GenerativeConfig(**raw)
        if calibrate:
            config = generate_mod.calibrate_effect_means(
                config, calibrate["density"], calibrate["neg_share"])
        g, gt = generate_mod.sample_network(config)
        resolved = {**config.__dict__}
    else:
        params, tc, _ = model_mod.load_checkpoint(args.from_checkpoint)
        g = generate_mod.regenerate_from_params(
            params, seed=args.seed, plus_distance=tc.expressive_plus_distance)
        resolved = {"from_checkpoint": args.from_checkpoint}
    graph_mod.write_graph(args.output, g)
    if gt is not None and args.ground_truth:
        with open(args.ground_truth, "w") as fh:
            fh.write(gt.to_json())
    print(_stats_line(g))
    _write_manifest(args.output, "generate", args,
                    [args.config, args.from_checkpoint], resolved)
    return EXIT_OK


def cmd_eval(args):
    g = graph_mod.read_graph(args.graph)
    if args.holdout <= 0.0 or args.holdout >= 1.0:
        raise DataError("--holdout must be in (0, 1)")
    config = _train_config(args)
    report = evaluate_mod.run_benchmark(g, config, holdout=args.holdout, seed=args.seed)
    with open(args.output + ".json", "w") as fh:
        fh.write(report.to_json())
    with open(args.output + ".csv", "w") as fh:
        fh.write(report.csv_row())
    if args.checkpoint:
        model_mod.save_checkpoint(args.checkpoint, report.params, config)
    print(report.summary_table())
    _write_manifest(args.output, "eval", args, [args.graph], asdict(config))
    return EXIT_OK


def cmd_export_viz(args):
    params, tc, _ = model_mod.load_checkpoint(args.checkpoint)
    edges = None
    if args.graph:
        g = graph_mod.read_graph(args.graph)
        edges = viz_mod.edge_overlay(g, args.sign_filter)
    if args.mode == "circular":
        if not isinstance(params, (model_mod.SlimParams, model_mod.DirectedSlimParams)):
            raise DataError("circular mode needs a SLIM checkpoint (simplex mixtures)")
        Z = model_mod.mixture_weights(
            params.Ztilde if hasattr(params, "Ztilde") else params.Z)
        layout = viz_mod.circular_layout(Z, edges=edges)
    else:
        if isinstance(params, model_mod.SlimParams):
            fwd = model_mod._slim_forward(params)
            layout = viz_mod.pca_project(fwd[6], extra_points=fwd[5], edges=edges)
        elif isinstance(params, model_mod.DirectedSlimParams):
            fwd = model_mod._dslim_forward(params)
            emb = np.concatenate([fwd[9], fwd[10]], axis=1)
            layout = viz_mod.pca_project(emb, extra_points=fwd[8], edges=edges)
        elif isinstance(params, model_mod.DirectedParams):
            emb = np.concatenate([params.Z, params.W], axis=1)
            layout = viz_mod.pca_project(emb, edges=edges)
        else:
            layout = viz_mod.pca_project(params.Z, edges=edges)
    with open(args.output, "w") as fh:
        fh.write(layout.to_json())
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(layout.nodes_csv())
    _write_manifest(args.output, "export-viz", args, [args.checkpoint, args.graph])
    print(f"layout written: {args.output}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser assembly
# ---------------------------------------------------------------------------

def _add_fit_flags(p):
    # defaults live in TrainConfig; None means "not set here" so a --config
    # file can fill the gap (flags always win)
    p.add_argument("--config", default=None, help="TrainConfig JSON; flags override")
    p.add_argument("--model", choices=model_mod.MODELS, default=None,
                   help="sldm (free positions) or slim (archetypal polytope)")
    p.add_argument("--variant", choices=model_mod.MODES, default=None,
                   help="graph/embedding structure (default undirected)")
    p.add_argument("--k", type=int, default=None,
                   help="latent dimension / number of archetypes (default 8)")
    p.add_argument("--lr", type=float, default=None,
                   help="Adam learning rate (default 0.05)")
    p.add_argument("--iters", type=int, default=None,
                   help="optimization iterations (default 5000)")
    p.add_argument("--sample-size", type=int, default=None, dest="sample_size",
                   help="nodes drawn per block, clamped to N (default 3000)")
    p.add_argument("--rho", type=float, default=None,
                   help="regularization strength (default 1.0)")
    p.add_argument("--seed", type=int, default=None,
                   help="random seed (default SLDM_SEED or 0)")
    p.add_argument("--deterministic", action=argparse.BooleanOptionalAction,
                   default=None, help="bit-reproducible runs (default on)")
    p.add_argument("--trace-every", type=int, default=None, dest="trace_every",
                   help="record the full-graph loss every this many iterations")
    p.add_argument("--block-rescale", action="store_true", default=None,
                   dest="block_rescale",
                   help="scale the block loss by (N/|S|)^2")
    p.add_argument("--expressive-plus-distance", action="store_true", default=None,
                   dest="expressive_plus_distance",
                   help="use +distance in the expressive negative rate")
    p.add_argument("--init", choices=("spectral", "random"), default=None,
                   help="initialization scheme (default spectral)")


def build_parser():
    parser = _Parser(prog="sldm",
                     description="Skellam latent distance models for signed graphs")
    parser.add_argument("--version", action="version", version=f"sldm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="normalize an edge list and report statistics")
    p.add_argument("input", help="raw edge-list file")
    p.add_argument("-o", "--output", required=True, help="normalized graph file")
    dir_group = p.add_mutually_exclusive_group(required=True)
    dir_group.add_argument("--directed", dest="directed", action="store_true",
                           help="keep links as ordered pairs")
    dir_group.add_argument("--undirected", dest="directed", action="store_false",
                           help="sum the two directions per pair")
    p.add_argument("--aggregate", action="store_true",
                   help="sum duplicate (src, dst) records over time")
    p.add_argument("--lcc", action="store_true",
                   help="keep only the largest connected component")
    p.add_argument("--stats-format", choices=("kv", "json"), default="kv",
                   dest="stats_format", help="statistics output format")
    p.add_argument("--seed", type=int, default=_default_seed(),
                   help="recorded in the manifest (ingest itself is deterministic)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("fit", help="fit a model by minibatch MAP optimization")
    p.add_argument("graph", help="normalized graph file")
    p.add_argument("-o", "--output", required=True, help="checkpoint path")
    p.add_argument("--trace", default=None, help="write a loss-trace CSV here")
    _add_fit_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("generate", help="sample a synthetic network")
    p.add_argument("--config", default=None, help="generative config JSON")
    p.add_argument("--from-checkpoint", default=None, dest="from_checkpoint",
                   help="regenerate from a fitted checkpoint instead")
    p.add_argument("-o", "--output", required=True, help="generated graph file")
    p.add_argument("--ground-truth", default=None, dest="ground_truth",
                   help="write the ground-truth JSON sidecar here")
    p.add_argument("--seed", type=int, default=_default_seed(),
                   help="sampling seed (default SLDM_SEED or 0)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eval", help="run the link-prediction benchmark")
    p.add_argument("graph", help="normalized connected graph file")
    p.add_argument("-o", "--output", required=True,
                   help="report stem; writes <stem>.json and <stem>.csv")
    p.add_argument("--holdout", type=float, default=0.2,
                   help="fraction of links removed for testing")
    p.add_argument("--checkpoint", default=None, help="also save the fitted model here")
    _add_fit_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-viz", help="export layout coordinates")
    p.add_argument("checkpoint", help="fitted checkpoint file")
    p.add_argument("-o", "--output", required=True, help="layout JSON path")
    p.add_argument("--mode", choices=("pca", "circular"), default="pca",
                   help="projection type (circular needs a SLIM checkpoint)")
    p.add_argument("--graph", default=None, help="graph file for the edge overlay")
    p.add_argument("--sign-filter", choices=("+", "-", "all"), default="all",
                   dest="sign_filter", help="edge overlay filter")
    p.add_argument("--csv", default=None, help="also write node coordinates CSV")
    p.add_argument("--seed", type=int, default=_default_seed(),
                   help="recorded in the manifest (export is deterministic)")
    p.set_defaults(func=cmd_export_viz)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except (DataError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SldmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
