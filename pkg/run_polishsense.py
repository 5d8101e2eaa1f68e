#!/usr/bin/env python3
"""Thin wrapper around the ``polishsense`` command-line interface.

Parsing and execution live in the ``polishsense`` package; see
``python run_polishsense.py --help`` for the subcommands.
"""

from __future__ import annotations

from polishsense.cli import main


if __name__ == "__main__":
    main()
