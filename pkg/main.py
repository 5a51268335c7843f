#!/usr/bin/env python3
"""
uqising - Ising and weighted MaxCut by a block-encoded cost function.

Solves instances with a Hadamard-test loss trained by normalized gradient descent,
benchmarks against QAOA and the exact enumeration oracle.
"""

import sys

from cli.commands import main


if __name__ == "__main__":
    sys.exit(main())
