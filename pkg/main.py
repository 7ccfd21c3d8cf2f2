#!/usr/bin/env python3
"""
Main entry point for the Sampling Discretization toolkit.
`python main.py serve` starts the API; every other subcommand runs locally.
"""

if __name__ == "__main__":
    import sys

    from src.cli import main

    sys.exit(main())
