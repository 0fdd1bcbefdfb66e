"""Streaming rank-based selection rules (percentile and k-record rules).

Modules
-------
rules       rule definitions, exact ``r(.)`` and LsD validation
engine      streaming state machine and a compiled batch kernel
exact       exact law of ``L_n`` and moment recursions
oracle      brute-force enumeration over all orderings (small ``n``)
montecarlo  seeded replicated simulation
cli         ``selectsets`` command line
"""
from .rules import KRecord, Percentile, Table, median, parse_rule, r_value, validate_lsd
from .engine import StreamState, TieError

__version__ = "0.1.0"

__all__ = [
    "KRecord",
    "Percentile",
    "Table",
    "median",
    "parse_rule",
    "r_value",
    "validate_lsd",
    "StreamState",
    "TieError",
]
