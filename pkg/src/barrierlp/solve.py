"""Solve an LP file with scipy's HiGHS interface.

Usable as the command for ``barrierlp bench --solve-with``::

    barrierlp bench --solve-with "python3 -m barrierlp.solve {lp}"

Prints ``status: <status>`` and ``objective: <value>``.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .lpgen import EQ, GE, read_lp


def solve_lp(source):
    """Solve LP text (a string or an open text file); returns (status, objective)."""
    from scipy import sparse
    from scipy.optimize import linprog

    lp = read_lp(source)
    n = len(lp.names)
    A = sparse.csr_matrix(
        (np.frombuffer(lp.val, dtype=np.float64), (np.frombuffer(lp.row, dtype=np.int32),
                                                   np.frombuffer(lp.col, dtype=np.int32))),
        shape=(lp.nrows, n),
    )
    rel = np.frombuffer(lp.rel, dtype=np.int8)
    rhs = np.frombuffer(lp.rhs, dtype=np.float64)
    sign = np.where(rel == GE, -1.0, 1.0)
    ub = rel != EQ
    c = np.zeros(n)
    for k, v in lp.objective.items():
        c[k] = -v if lp.sense == "max" else v
    res = linprog(
        c,
        A_ub=sparse.diags(sign[ub]) @ A[ub] if ub.any() else None,
        b_ub=(sign * rhs)[ub] if ub.any() else None,
        A_eq=A[~ub] if (~ub).any() else None,
        b_eq=rhs[~ub] if (~ub).any() else None,
        bounds=np.column_stack([lp.lo, np.where(np.isinf(lp.hi), np.nan, lp.hi)]),
        method="highs",
    )
    status = {0: "optimal", 1: "iteration limit", 2: "infeasible", 3: "unbounded"}.get(res.status, "error")
    objective = None
    if res.status == 0:
        objective = -res.fun if lp.sense == "max" else res.fun
    return status, objective


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="python -m barrierlp.solve", description=__doc__.splitlines()[0])
    parser.add_argument("lp", help="LP file")
    args = parser.parse_args(argv)
    with open(args.lp, encoding="ascii") as fh:
        status, objective = solve_lp(fh)
    print(f"status: {status}")
    if objective is not None:
        print(f"objective: {objective:.9g}")
    return 0 if status == "optimal" else 1


if __name__ == "__main__":
    sys.exit(main())
