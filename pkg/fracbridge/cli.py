# Copyright 2026 The fracbridge developers
# Distributed under the terms of the BSD license; see pyproject.toml for details.

"""Command-line interface.

    fracbridge constants --alpha A --hurst H [--horizon T]
    fracbridge simulate CONFIG [--out-dir DIR]
    fracbridge estimate CONFIG [--out-dir DIR]
    fracbridge verify CONFIG [--out-dir DIR]

Runs are described by a JSON configuration file (see the config module); all output is
written below its out_dir. Exit codes: 0 on success (for verify, all checks passed), 1
when a check fails or the run cannot complete, and 2 on an invalid configuration or
parameters.

"""

import argparse
import json
import logging
import sys

import numpy as np

from . import __version__, config
from .bridge import ModelParams, build_bridge, write_csv
from .estimator import DegeneratePathError, estimate_ladder
from .fbm import sample, stream
from .limits import limit_constants
from .mcharness import McRunError, run
from .specialfn import DomainError


logger = logging.getLogger(__name__)


def _dumps(value):
    return json.dumps(value, sort_keys=True, indent=2) + "\n"


def _load(args):
    """Internal: read the run configuration named on the command line."""
    overrides = {}
    if args.out_dir is not None:
        overrides["out_dir"] = args.out_dir
    try:
        cfg = config.load(args.config, **overrides)
    except OSError as e:
        raise config.ConfigError(f"{args.config}: {e.strerror}.") from None
    return cfg


def _output_dir(cfg):
    out_dir = cfg.getpath("out_dir")
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def cmd_constants(args):
    """Print the regime and the limit constants for the given parameters."""
    params = ModelParams(args.alpha, args.horizon, args.hurst)
    constants = limit_constants(params)
    result = constants.to_dict()
    result["params"] = {"alpha": params.alpha, "hurst": params.h, "horizon": params.horizon_T}
    sys.stdout.write(_dumps(result))
    return 0


def _write_ladder(result, indices, filename):
    """Internal: the ladder estimates of one path, for checking against its CSV."""
    table = np.column_stack(
        [
            result.column("epsilon"),
            result.column("t"),
            indices,
            result.column("alpha_hat_direct"),
            result.column("alpha_hat_identity"),
        ]
    )
    np.savetxt(
        filename,
        table,
        fmt=["%.17g", "%.17g", "%d", "%.17g", "%.17g"],
        delimiter=",",
        header="epsilon,t,index,alpha_hat_direct,alpha_hat_identity",
        comments="",
    )
    logger.debug("Wrote %s", filename)


def cmd_simulate(args):
    """Simulate paths and write their trajectories and ladder estimates.

    For replication i the files path_i.csv (t, B, ξ, η, X and the estimator
    denominator), ladder_i.csv (both estimator formulas at the ladder times) and error_i.dat
    (plot data: ladder offset against |α - α̂|) are written.

    """
    cfg = _load(args)
    params = cfg.params()
    ladder = cfg.ladder()
    grid = cfg.grid()
    seed = cfg.seed()
    sampler = cfg.getsampler()
    replications = cfg.getint("replications")
    if replications < 1:
        raise config.ConfigError(f"replications: must be positive (got {replications}).")
    out_dir = _output_dir(cfg)

    logger.info("Simulating %d paths into %s", replications, out_dir)
    indices = ladder.snap(grid)
    for i in range(replications):
        tag, rng = stream(seed, i)
        paths = build_bridge(sample(sampler, params.hurst, grid, rng, tag), params)
        write_csv(paths, out_dir / f"path_{i:05d}.csv")

        result = estimate_ladder(paths, params, ladder, renormalize=False)
        _write_ladder(result, indices, out_dir / f"ladder_{i:05d}.csv")
        curve = np.column_stack([result.column("epsilon"), np.abs(result.column("error"))])
        np.savetxt(
            out_dir / f"error_{i:05d}.dat", curve, fmt="%.17g", header="epsilon abs_error"
        )
    return 0


def _run(args, evaluate):
    """Internal: the Monte Carlo run behind estimate and verify."""
    cfg = _load(args)
    mc = cfg.mc_config(scale_factor=getattr(args, "scale_factor", 1.0))
    out_dir = _output_dir(cfg)
    summary = run(mc, evaluate=evaluate)
    summary.write_records(out_dir / "estimates.csv")
    summary.write_error_curve(out_dir / "ladder_error.dat")
    return summary, out_dir


def cmd_estimate(args):
    """Run the replications and write the estimates without evaluating any check."""
    _run(args, evaluate=False)
    return 0


def cmd_verify(args):
    """Run the replications, evaluate the checks and write summary.json."""
    summary, out_dir = _run(args, evaluate=True)
    text = summary.to_json()
    (out_dir / "summary.json").write_text(text, encoding="utf-8")
    logger.debug("Wrote %s", out_dir / "summary.json")
    sys.stdout.write(text)
    return 0 if summary.passed else 1


def _parser():
    parser = argparse.ArgumentParser(
        prog="fracbridge",
        description="Simulate α-fractional bridges and check the asymptotics of the "
        "least squares estimator of α.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="Log progress (-v) or debugging information (-vv) to stderr.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    constants = subparsers.add_parser(
        "constants", help="Print the regime and limit constants as JSON."
    )
    constants.add_argument("--alpha", type=float, required=True, help="Drift parameter α.")
    constants.add_argument("--hurst", type=float, required=True, help="Hurst index H.")
    constants.add_argument("--horizon", type=float, default=1.0, help="Horizon T.")
    constants.set_defaults(func=cmd_constants)

    for name, func, help in (
        ("simulate", cmd_simulate, "Write simulated paths and per-path ladder estimates."),
        ("estimate", cmd_estimate, "Run the replications and write all estimates."),
        ("verify", cmd_verify, "Run the replications and evaluate the checks."),
    ):
        sub = subparsers.add_parser(name, help=help)
        sub.add_argument("config", help="JSON run configuration.")
        sub.add_argument("--out-dir", help="Override the out_dir of the configuration.")
        sub.set_defaults(func=func)
        if name == "verify":
            # Multiplies the reference Cauchy scale; used to check a wrong scale fails.
            sub.add_argument(
                "--scale-factor", type=float, default=1.0, help=argparse.SUPPRESS
            )

    return parser


def main(argv=None):
    args = _parser().parse_args(argv)

    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )

    try:
        return args.func(args)
    except (config.ConfigError, DomainError) as e:
        sys.stderr.write(f"fracbridge: error: {e}\n")
        return 2
    except (McRunError, DegeneratePathError, OSError) as e:
        sys.stderr.write(f"fracbridge: error: {e}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
