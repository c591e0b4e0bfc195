"""Command-line entry point.

    nasdisrupt synth --out data/              # demo corpus
    nasdisrupt run --config cfg.json --out results/ --threads 4
    nasdisrupt pca --config cfg.json --set pca.eigenvalue_threshold=1.2
"""
from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .config import load_config
from .corpus import SyntheticSpec
from .errors import ConfigError, PipelineError, StageError

log = logging.getLogger("nasdisrupt")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, default=None, help="JSON config file")
    p.add_argument("--out", type=Path, default=None, help="output directory (overrides paths.out)")
    p.add_argument("--threads", type=int, default=1, help="worker threads inside a stage")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="K=V",
                   help="override a config key, e.g. kmeans.k=8 (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="nasdisrupt", description="Day-typology and anomaly pipeline for flight records",
                                     parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    s = sub.add_parser("synth", parents=[common], help="write a synthetic corpus with planted disruptions")
    s.add_argument("--spec", type=Path, default=None, help="SyntheticSpec JSON (default: bundled demo)")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--write-config", action="store_true",
                   help="also write run_config.json pointing at the generated files")
    for name in pipeline.STAGES:
        sub.add_parser(name, parents=[common], help=f"run the {name} stage")
    sub.add_parser("run", parents=[common], help="run every stage and write run_manifest.json")
    return parser


def _synth(args) -> int:
    spec = SyntheticSpec.demo()
    if args.spec is not None:
        try:
            spec = SyntheticSpec.from_dict(json.loads(args.spec.read_text()))
        except (OSError, json.JSONDecodeError, TypeError) as exc:
            raise ConfigError(f"bad synthetic spec {args.spec}: {exc}") from None
    if args.seed is not None:
        spec.seed = args.seed
    out = args.out or Path("data")
    paths = pipeline.synth(spec, out)
    if args.write_config:
        start = spec.start
        end = (dt.date.fromisoformat(start) + dt.timedelta(days=spec.days - 1)).isoformat()
        cfg = {"paths": {"flights": str(paths["flights"]), "airports": str(paths["airports"])},
               "window": {"start": start, "end": end, "exclusions": []}}
        (out / "run_config.json").write_text(json.dumps(cfg, indent=2) + "\n")
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            return _synth(args)
        cfg = load_config(args.config, args.overrides, args.out)
        if args.command == "run":
            out = pipeline.run(cfg, args.threads)
            print(f"run complete: {out}")
        else:
            summary = pipeline.run_stage(args.command, cfg, args.threads)
            print(json.dumps({args.command: summary}, default=str, sort_keys=True))
        return 0
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
