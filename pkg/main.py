#!/usr/bin/env python3
"""coherent-loops - Entry Point

Numerical toolkit for SU(2) coherent states, Bohr-Sommerfeld loop states
and their stationary-phase asymptotics, checked against exact Wigner
d-matrices and quadrature.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

try:
    from __init__ import __version__  # script-style execution from the repo dir
except ImportError:  # installed console script (pyproject entry point)
    from importlib.metadata import version as _pkg_version
    __version__ = _pkg_version("coherent-loops")
from config import (
    VALID_FORMATS,
    VALID_LOG_LEVELS,
    VALID_STATES,
    VALID_VARY,
    Config,
    ConfigError,
    default_config,
    load_config,
    update_section,
)
from pipeline import Pipeline


# Exit codes. Distinct values let shell scripts tell configuration
# problems apart from failed checks.
EXIT_OK = 0
EXIT_RUNTIME = 1       # invariant failure or numerical error
EXIT_CONFIG = 2        # config not found, malformed, or invalid
EXIT_SIGINT = 130      # Ctrl+C


def setup_logging(level: str = "INFO") -> None:
    """Configure application logging.

    Args:
        level: Log level string (DEBUG, INFO, WARNING, ERROR)
    """
    numeric_level = getattr(logging, level.upper(), logging.INFO)
    logging.basicConfig(
        level=numeric_level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S',
        force=True,
    )


def _common_options() -> argparse.ArgumentParser:
    """Flags shared by every sub-command; each overrides a config key."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, metavar='PATH',
                        help='TOML or JSON configuration file (optional)')
    common.add_argument('--j', type=float, help='Spin j; sets k = 2j')
    common.add_argument('--k', type=int, help='Tensor power k = 2j')
    common.add_argument('--m1', type=float, help='Magnetic number m1')
    common.add_argument('--m2', type=float, help='Magnetic number m2')
    common.add_argument('--beta', type=float, help='Rotation angle in radians')
    common.add_argument('--beta-range', metavar='A:B:STEP',
                        help='Inclusive beta sweep for wigner')
    common.add_argument('--grid', metavar='NxM', help='Sample grid for field and torus')
    common.add_argument('--nodes', type=int, metavar='N',
                        help='Starting node count for loop-state quadrature')
    common.add_argument('--tol', type=float, metavar='X',
                        help='Bohr-Sommerfeld tolerance for loop states')
    common.add_argument('--out', type=Path, metavar='PATH',
                        help='Output file (default: stdout)')
    common.add_argument('--format', choices=list(VALID_FORMATS), help='Output format')
    common.add_argument('--workers', type=int, metavar='N',
                        help='Override [processing] workers')
    common.add_argument('--log-level', choices=list(VALID_LOG_LEVELS),
                        help='Override [processing] log_level')
    return common


def build_parser() -> argparse.ArgumentParser:
    """Build the argparse parser. Split out for testability."""
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog='coherent-loops',
        description='Coherent loop states and the asymptotics of Wigner d-matrices',
    )
    parser.add_argument(
        '--version',
        action='version',
        version=f'coherent-loops {__version__}',
    )
    sub = parser.add_subparsers(dest='command', metavar='COMMAND', required=True)

    wigner = sub.add_parser('wigner', parents=[common],
                            help='Exact vs asymptotic d^j_{m2 m1}(beta) table')
    wigner.add_argument('--vary', choices=list(VALID_VARY),
                        help='Sweep beta over --beta-range or m2 over -j..j')

    field = sub.add_parser('field', parents=[common],
                           help='Fibrewise norm |v(x)| or a fibrewise pairing over a theta x phi grid')
    field.add_argument('--state', choices=list(VALID_STATES),
                       help='Loop state at m1, the north-pole coherent state, or "pair": '
                            'the loop state at m1 paired with R_y(beta) of the loop state at m2')

    sub.add_parser('torus', parents=[common],
                   help='Magnitude and phase of the loop-pair integrand, with saddles')

    verify = sub.add_parser('verify', parents=[common], help='Run the invariant suites')
    verify.add_argument('--tol-scale', type=float, metavar='X',
                        help='Multiply every tolerance by X')
    verify.add_argument('--trials', type=int, metavar='N', help='Randomised trials per check')
    verify.add_argument('--seed', type=int, help='Random seed')
    verify.add_argument('--lift-sign', type=int, choices=[-1, 1],
                        help='Sign of the standard-lift exponent (+1 injects an error)')
    return parser


def _given(args: argparse.Namespace, *names: str) -> dict:
    return {
        name: getattr(args, name)
        for name in names
        if getattr(args, name, None) is not None
    }


def apply_cli_overrides(config: Config, args: argparse.Namespace) -> None:
    """Apply flags on top of a loaded Config and re-validate each
    touched section. Raises ConfigError with a section-tagged message
    for bad values (e.g. ``--workers 0``).
    """
    config.command = args.command

    parameters = _given(args, 'm1', 'm2', 'beta', 'beta_range', 'grid', 'nodes',
                        'vary', 'state')
    if args.j is not None and args.k is not None:
        parameters.update(j=args.j, k=args.k)
    elif args.j is not None:
        parameters.update(j=args.j, k=None)
    elif args.k is not None:
        parameters.update(j=None, k=args.k)
    if parameters:
        config.parameters = update_section('parameters', config.parameters, **parameters)

    tolerances = _given(args, 'tol', 'tol_scale')
    if tolerances:
        config.tolerances = update_section('tolerances', config.tolerances, **tolerances)

    output = _given(args, 'format')
    if args.out is not None:
        output['path'] = Path(args.out).expanduser()
    if output:
        config.output = update_section('output', config.output, **output)

    processing = _given(args, 'workers', 'log_level')
    if processing:
        config.processing = update_section('processing', config.processing, **processing)

    verify = _given(args, 'trials', 'seed', 'lift_sign')
    if verify:
        config.verify = update_section('verify', config.verify, **verify)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point.

    Args:
        argv: Optional argument list (defaults to ``sys.argv[1:]``).

    Returns:
        Exit code (see module-level EXIT_* constants).
    """
    parser = build_parser()
    args = parser.parse_args(argv)

    # Initial logging at INFO so config-load errors are visible; level
    # is refined once the configuration is parsed.
    setup_logging("INFO")
    logger = logging.getLogger(__name__)

    try:
        config = load_config(args.config) if args.config is not None else default_config()
    except FileNotFoundError:
        logger.error(f"Configuration file '{args.config}' not found.")
        return EXIT_CONFIG
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG
    except Exception as e:
        logger.error(f"Error loading configuration: {e}")
        return EXIT_CONFIG

    try:
        apply_cli_overrides(config, args)
    except ConfigError as e:
        logger.error(f"Invalid override: {e}")
        return EXIT_CONFIG

    setup_logging(config.processing.log_level)

    p = config.parameters
    logger.info(f"coherent-loops {__version__} starting: {config.command}")
    logger.info(f"j={p.j} (k={p.k}) m1={p.m1} m2={p.m2} beta={p.beta}")
    logger.info(f"Output: {config.output.path or '<stdout>'}")
    logger.info(f"Workers: {config.processing.workers}")

    try:
        pipeline = Pipeline(config)
        stats = pipeline.run()

        logger.info("\n" + "="*60)
        logger.info(f"Run Summary ({stats.command})")
        logger.info("="*60)
        logger.info(f"Rows written: {stats.rows_written}")
        logger.info(f"Output:       {stats.output}")
        logger.info(f"Failures:     {stats.failures}")
        logger.info(f"Elapsed:      {stats.elapsed:.2f}s")
        logger.info("="*60)

        return EXIT_OK if stats.failures == 0 else EXIT_RUNTIME

    except KeyboardInterrupt:
        logger.warning("\nOperation cancelled by user")
        return EXIT_SIGINT
    except Exception as e:
        logger.exception(f"Fatal error: {e}")
        return EXIT_RUNTIME


if __name__ == '__main__':
    sys.exit(main())
