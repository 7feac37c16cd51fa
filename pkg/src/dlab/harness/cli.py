"""Command line entry point: ``dlab <kind> --config FILE [options]``.

Exit codes: 0 success, 1 invariant failure (with --check) or failed run,
2 configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import tomlkit
from tomlkit.exceptions import ParseError

from .config import KINDS, ConfigError, from_mapping
from .reports import fmt
from .runner import RunError, run
from .schedule import default_workers

_ALIASES = {"energy-audit": "energy_audit"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits 2 already; keep the message format
        self.print_usage(sys.stderr)
        self.exit(2, f"dlab: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dlab", description="Run a dlab experiment from a flat TOML config.")
    parser.add_argument("kind", choices=sorted(set(KINDS) | set(_ALIASES)))
    parser.add_argument("--config", required=True, help="path to the TOML config")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument("--workers", type=int, help="worker threads (default: config, then $DLAB_WORKERS, then 1)")
    parser.add_argument("--check", action="store_true", help="exit 1 when an invariant check fails")
    parser.add_argument("--trajectory", help="norms: stored trajectory container to measure")
    parser.add_argument("--spec", help="norms: comma-separated norm names, e.g. V,Wdot,X")
    return parser


def _load_mapping(path: str, kind: str) -> dict:
    try:
        data = tomlkit.parse(Path(path).read_text(encoding="utf-8")).unwrap()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except ParseError as exc:
        raise ConfigError(f"malformed TOML: {exc}") from exc
    data.setdefault("kind", kind)
    if data["kind"] != kind:
        raise ConfigError(f"config kind {data['kind']!r} does not match subcommand {kind!r}")
    return data


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    kind = _ALIASES.get(args.kind, args.kind)
    try:
        data = _load_mapping(args.config, kind)
        if args.seed is not None:
            data["seed"] = args.seed
        if args.out is not None:
            data["out"] = args.out
        if args.check:
            data["check"] = True
        if args.workers is not None:
            data["workers"] = args.workers
        elif "workers" not in data and os.environ.get("DLAB_WORKERS"):
            data["workers"] = default_workers()
        cfg = from_mapping(data)
        specs = [s.strip() for s in args.spec.split(",") if s.strip()] if args.spec else None
        if specs and kind != "norms":
            raise ConfigError("--spec only applies to the norms subcommand")
    except ConfigError as exc:
        print(f"dlab: config error: {exc}", file=sys.stderr)
        return 2
    try:
        manifest = run(cfg, trajectory=args.trajectory, specs=specs)
    except (RunError, ValueError) as exc:
        print(f"dlab: {kind} failed: {exc}", file=sys.stderr)
        return 1
    if kind == "norms":
        # single CSV record: one column per requested norm
        names = [k for k in manifest.diagnostics if k != "snapshots"]
        print(",".join(names))
        print(",".join(fmt(manifest.diagnostics[k]) for k in names))
    for name, ok in manifest.checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    for i, msg in manifest.failed_draws:
        print(f"draw {i} failed: {msg}", file=sys.stderr)
    print(f"wrote {len(manifest.artifacts)} artifacts to {cfg.out}")
    return manifest.exit_code


if __name__ == "__main__":
    sys.exit(main())
