#!/usr/bin/env python3
"""
Backward-looking SABR caplet pricer for overnight-rate term rates
Main entry point for the application
"""

import argparse
import logging
import os
import sys


COMMANDS = {
    'price': 'Price the configured caplet in each requested style',
    'effective-params': 'Report the effective SABR parameters and their cross-checks',
    'smile': 'Analytic smile over the strike grid',
    'simulate': 'Monte-Carlo smile compared with the analytic smile',
    'calibrate': 'Fit (alpha, rho, nu) and q to caplet quotes',
    'hw-compare': 'Compare the power-law decay with the Hull-White decay',
}


def parse_arguments(argv=None):
    """Parse command-line arguments."""
    parser = argparse.ArgumentParser(prog='rfrsabr', description='rfrsabr: backward-looking SABR caplet pricer')
    subparsers = parser.add_subparsers(dest='command', required=True)
    for name, help_text in COMMANDS.items():
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument('--config', type=str, required=True, help='Path to the run configuration (JSON)')
        sub.add_argument('--out', type=str, help='Write the report to this file')
        sub.add_argument('--verbose', '-v', action='store_true', help='Log progress at INFO level')
        if name == 'smile':
            sub.add_argument('--curves', choices=['effective', 'alpha-only', 'raw', 'all'], default='effective',
                             help='Backward smile(s) to tabulate')
        if name == 'simulate':
            sub.add_argument('--seed', type=int, help='Override the Monte-Carlo seed')
            sub.add_argument('--paths', type=int, help='Override the number of Monte-Carlo paths')
            sub.add_argument('--path-dump', type=str, help='CSV file for the recorded sample paths')
        if name == 'calibrate':
            sub.add_argument('--quotes', type=str, help='Quote file (CSV or JSON)')
    return parser.parse_args(argv)


def main(argv=None):
    """Main entry point for the application."""
    args = parse_arguments(argv)

    # Add parent directory to sys.path to allow imports
    sys.path.insert(0, os.path.abspath(os.path.dirname(__file__)))

    from rfrsabr.cli import EXIT_CONFIG, dispatch, report_error
    from rfrsabr.config import load_config
    from rfrsabr.errors import ConfigError

    try:
        config = load_config()
    except ConfigError as e:
        report_error(e)
        return EXIT_CONFIG

    level = logging.INFO if args.verbose else getattr(logging, str(config.log_level).upper(), logging.WARNING)
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s', stream=sys.stderr)

    try:
        return dispatch(args)
    except KeyboardInterrupt:
        print("\nOperation cancelled by user.")
        return 1


if __name__ == '__main__':
    sys.exit(main())
