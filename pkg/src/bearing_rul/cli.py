"""``bearing-rul`` command line.

    bearing-rul <stage> [-c run.cfg] [--set key=value ...] [--force]

Stages: ingest, denoise-train, extract, label, train, evaluate, predict,
sweep, and ``all`` (ingest through evaluate). The config file holds
``key = value`` lines (see ``RunConfig`` for keys); ``--set`` overrides
it. The raw data folder comes from ``data_root`` or ``$RUL_DATA_ROOT``.

Exit codes: 0 success, 2 config, 3 io / missing prerequisite,
4 numeric (non-finite training, no degradation found).
"""
from __future__ import annotations

import argparse
import sys

from .checkpoint import CheckpointError
from .config import ConfigError
from .data import DataFormatError
from .errors import NumericalError
from .labeling import NoDegradationError
from .pipeline import STAGES, StageError, load_run_config, run_pipeline, run_stage, sweep

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4


def build_parser():
    p = argparse.ArgumentParser(prog="bearing-rul", description="Bearing RUL pipeline stages.")
    p.add_argument("stage", choices=[*STAGES, "sweep", "all"])
    p.add_argument("-c", "--config", help="flat key = value run config")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    p.add_argument("--force", action="store_true", help="run even if the manifest is up to date")
    p.add_argument("-q", "--quiet", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    log = (lambda msg: None) if args.quiet else (lambda msg: print(msg, flush=True))
    try:
        cfg = load_run_config(args.config, args.overrides)
        if args.stage == "all":
            run_pipeline(cfg, log=log)
        elif args.stage == "sweep":
            sweep(cfg, log=log)
        else:
            run_stage(args.stage, cfg, log=log, force=args.force)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StageError, CheckpointError, DataFormatError, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericalError, NoDegradationError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
