"""Thin wrapper around the HiGHS solver shipped with SciPy.

Every call is a maximisation.  Returned duals are non-negative for ``<=``
rows and free for equality rows, in the sign convention of the maximisation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import NumericError

_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


@dataclass
class LpResult:
    x: np.ndarray
    objective: float
    ineq_duals: np.ndarray
    eq_duals: np.ndarray


def maximize(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=(0, None),
             what: str = "LP") -> LpResult:
    c = np.asarray(c, dtype=float)
    if A_ub is not None and not sparse.issparse(A_ub):
        A_ub = sparse.csr_matrix(A_ub)
    if A_eq is not None and not sparse.issparse(A_eq):
        A_eq = sparse.csr_matrix(A_eq)
    res = linprog(-c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method="highs", options=_OPTIONS)
    if res.status != 0:
        raise NumericError(f"{what} failed: {res.message}")
    ineq = -np.asarray(res.ineqlin.marginals) if A_ub is not None else np.zeros(0)
    eq = -np.asarray(res.eqlin.marginals) if A_eq is not None else np.zeros(0)
    return LpResult(np.asarray(res.x), float(-res.fun), np.maximum(ineq, 0.0), eq)
