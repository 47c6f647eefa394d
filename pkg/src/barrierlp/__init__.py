"""Compile a small imperative language to LP files, unrolled or barrier-scheduled."""

from .asmgen import AsmProgram, lower
from .errors import BarrierLPError
from .frontend import compile_source, parse_source
from .lpgen import LpModel, build, uo_stats, write_lp
from .oracle import check_feasible, make_witness, run
from .sbtree import SBNode, build_sbtree

__version__ = "0.1.0"

__all__ = [
    "AsmProgram", "BarrierLPError", "LpModel", "SBNode", "build", "build_sbtree", "check_feasible",
    "compile_source", "lower", "make_witness", "parse_source", "run", "uo_stats", "write_lp",
]
