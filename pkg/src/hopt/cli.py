"""``hopt <experiment> --config FILE [--set key=value ...]``"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, HoptError
from .experiments import EXPERIMENTS, load_config, run_experiment


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hopt", description=__doc__)
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", help="flat key = value config file")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override a config entry (repeatable)")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides, args.experiment)
    except ConfigError as exc:
        print(f"hopt: config error: {exc}", file=sys.stderr)
        return 2
    try:
        out = run_experiment(cfg)
    except ConfigError as exc:
        print(f"hopt: config error: {exc}", file=sys.stderr)
        return 2
    except (HoptError, FloatingPointError, ArithmeticError) as exc:
        print(f"hopt: {cfg.experiment} [{cfg.digest()}] failed: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 1
    print(out.dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
