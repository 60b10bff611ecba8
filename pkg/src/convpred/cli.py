"""Command line entry point: ``convpred simulate | run | eval``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import pipeline
from .errors import ConfigError, DataError, NumericalError

log = logging.getLogger("convpred")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _build_parser():
    parser = argparse.ArgumentParser(prog="convpred", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="render synthetic reverberant scenes")
    sim.add_argument("--config", help="scene config ([scene] block, key = value)")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--count", type=int, default=20)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--speakers", type=int, dest="num_speakers")
    sim.add_argument("--channels", type=int, dest="num_channels")
    sim.add_argument("--duration", type=float)

    run = sub.add_parser("run", help="run a pipeline over a manifest")
    run.add_argument("--config", required=True, help="pipeline config file")
    run.add_argument("--manifest", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--jobs", type=int, default=1)

    ev = sub.add_parser("eval", help="score enhanced WAVs of a run directory")
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--out", required=True, help="run directory written by 'run'")
    ev.add_argument("--jobs", type=int, default=1)
    ev.add_argument("--ref-channel", type=int, default=0)
    return parser


def _print_summary(results):
    mean, imp = pipeline.summarize(results.values())
    if mean == mean:
        print(f"scenes={len(results)} mean_si_sdr_db={mean:.3f} improvement_db={imp:.3f}")


def main(argv=None):
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "simulate":
            sim = pipeline.load_simulation_config(
                args.config, num_speakers=args.num_speakers,
                num_channels=args.num_channels, duration=args.duration,
            )
            manifest = pipeline.cmd_simulate(sim, args.count, args.out, args.seed)
            print(manifest)
        elif args.command == "run":
            config = pipeline.load_pipeline_config(args.config)
            log.info("running %s", config.chain)
            _print_summary(pipeline.cmd_run(config, args.manifest, args.out, args.jobs))
        else:
            _print_summary(pipeline.cmd_eval(args.manifest, args.out, args.jobs, args.ref_channel))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
