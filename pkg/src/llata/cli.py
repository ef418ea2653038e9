"""Command line entry point: ``llata run | gen-sbm | entropy``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

import tomli

from .graph import load_graph
from .pipeline import PipelineConfig, PipelineError, emit_report, generate_sbm, run_pipeline, write_sbm
from .tree import minimize

# flag name -> PipelineConfig / OracleConfig attribute
RUN_FLAGS = {
    "graph": "graph", "texts": "texts", "features": "features", "labels": "labels",
    "classes": "classes", "template": "template", "out": "out", "report": "report",
    "actions": "actions", "height": "height", "epsilon": "epsilon", "ktop": "ktop",
    "theta": "theta", "rate": "rate", "s": "s", "mode": "mode", "fraction": "fraction",
    "seed": "seed",
}
ORACLE_FLAGS = {
    "oracle": "backend", "endpoint": "endpoint", "model": "model", "api_key_env": "api_key_env",
    "cache": "cache_path", "noise": "mock_noise", "timeout": "timeout",
    "max_retries": "max_retries", "max_in_flight": "max_in_flight",
}


def _run_parser(sub):
    p = sub.add_parser("run", help="run the full rewiring pipeline", allow_abbrev=False)
    p.add_argument("--config", help="TOML file with pipeline settings; flags override it")
    p.add_argument("--graph")
    p.add_argument("--texts")
    p.add_argument("--features")
    p.add_argument("--labels")
    p.add_argument("--classes", help="JSON array of {name, description}")
    p.add_argument("--template", help="prompt template with {classes} {target_text} {related_texts} {format_line}")
    p.add_argument("--height", type=int, help="maximum encoding-tree height K")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--ktop", type=int)
    p.add_argument("--theta", type=int)
    p.add_argument("--rate", type=int)
    p.add_argument("--s", type=float, help="silhouette improvement threshold")
    p.add_argument("--mode", choices=("add", "remove", "both"))
    p.add_argument("--fraction", type=float)
    p.add_argument("--weights", type=float, nargs=3, metavar=("L1", "L2", "L3"))
    p.add_argument("--oracle", choices=("mock", "remote"))
    p.add_argument("--endpoint")
    p.add_argument("--model")
    p.add_argument("--api-key-env", dest="api_key_env")
    p.add_argument("--noise", type=float, help="mock oracle noise p")
    p.add_argument("--timeout", type=float)
    p.add_argument("--max-retries", dest="max_retries", type=int)
    p.add_argument("--max-in-flight", dest="max_in_flight", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--report")
    p.add_argument("--actions", help="JSON-lines edge action log")
    p.add_argument("--cache")
    return p


def build_config(args) -> PipelineConfig:
    raw = {}
    if args.config:
        with open(args.config, "rb") as fh:
            raw = tomli.load(fh)
    cfg = PipelineConfig.from_dict(raw)
    for flag, attr in RUN_FLAGS.items():
        val = getattr(args, flag)
        if val is not None:
            setattr(cfg, attr, val)
    if args.weights is not None:
        cfg.weights = tuple(args.weights)
    for flag, attr in ORACLE_FLAGS.items():
        val = getattr(args, flag)
        if val is not None:
            setattr(cfg.oracle, attr, val)
    if cfg.oracle.backend == "remote" and cfg.oracle.model == "mock":
        cfg.oracle.model = "default"
    if not cfg.graph:
        raise ValueError("--graph is required (flag or config file)")
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="llata", allow_abbrev=False)
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="cmd", required=True)
    _run_parser(sub)

    p = sub.add_parser("gen-sbm", help="write a synthetic planted-partition graph", allow_abbrev=False)
    p.add_argument("--blocks", type=int, required=True)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--pintra", type=float, required=True)
    p.add_argument("--pinter", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("entropy", help="minimize structural entropy and print it", allow_abbrev=False)
    p.add_argument("--graph", required=True)
    p.add_argument("--height", type=int, default=2)
    p.add_argument("--dump", help="write the tree as JSON to this path")

    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")

    if args.cmd == "gen-sbm":
        g = generate_sbm(args.blocks, args.size, args.pintra, args.pinter, args.seed)
        paths = write_sbm(g, args.out)
        print(json.dumps({k: str(v) for k, v in paths.items()}, indent=2))
        return 0

    if args.cmd == "entropy":
        try:
            g = load_graph(args.graph)
            t = minimize(g, args.height)
        except Exception as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(f"{t.entropy:.12f}")
        if args.dump:
            t.dump(args.dump)
        return 0

    try:
        cfg = build_config(args)
        report = run_pipeline(cfg)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, tomli.TOMLDecodeError) as exc:
        print(f"error: [config] {exc}", file=sys.stderr)
        return 2
    if not cfg.report:
        sys.stdout.write(emit_report(report, None))
    return 0


if __name__ == "__main__":
    sys.exit(main())
