"""``geoflow`` command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical blow-up,
4 acceptance-threshold failure (only with ``--check``).
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import (
    PRESETS,
    ConfigError,
    ExperimentError,
    emit_report,
    load_config,
    parse_overrides,
    run_experiment,
)

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_CHECK = 0, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="geoflow", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("config", help="TOML configuration file")
    run.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    run.add_argument("--out", help="output directory (overrides output_dir)")
    run.add_argument("--check", action="store_true", help="exit with status 4 if a threshold fails")

    sub.add_parser("presets", help="list experiment presets")

    val = sub.add_parser("validate", help="parse and validate a configuration")
    val.add_argument("config")
    val.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "presets":
        width = max(map(len, PRESETS))
        for name, text in PRESETS.items():
            print(f"{name:<{width}}  {text}")
        return EXIT_OK
    try:
        cfg = load_config(args.config, parse_overrides(args.overrides))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(json.dumps(cfg.to_dict(), sort_keys=True))
        return EXIT_OK

    try:
        res = run_experiment(cfg)
        files = emit_report(res, args.out or cfg.output_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ExperimentError as exc:
        print(f"error in {exc}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc.cause, ConfigError) else 1
    if res.status == "blowup":
        print(res.message, file=sys.stderr)
        return EXIT_BLOWUP
    for key, value in res.summary.items():
        print(f"{key}: {value}")
    for key, ok in res.checks.items():
        print(f"check {key}: {'pass' if ok else 'FAIL'}")
    print(f"wrote {files['csv'].parent}")
    if args.check and not res.passed:
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
