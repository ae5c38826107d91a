"""Thin sparse linear-programming layer.

Models are assembled as blocks of variables plus COO-style constraint
triplets, then handed in one call either to HiGHS (through
:func:`scipy.optimize.linprog`) or to the Clarabel interior-point solver.
HiGHS returns vertex solutions and is the default; Clarabel factorises
the full KKT system and copes far better with a few capacity columns
that touch every hour of a long horizon.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

import clarabel
import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

logger = logging.getLogger(__name__)

TIME_LIMIT_ENV = "APOSTERIORI_SOLVER_TIME_LIMIT"
METHODS = ("highs", "highs-ds", "highs-ipm", "clarabel")

# Relative feasibility/optimality target for every solve.
DEFAULT_TOLERANCE = 1e-9


class SolverError(RuntimeError):
    """Raised when the LP engine fails to return an optimal solution."""

    def __init__(self, status: str, message: str):
        super().__init__(f"{status}: {message}")
        self.status = status
        self.message = message


@dataclass
class LPSolution:
    status: str
    objective: float
    x: np.ndarray
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


@dataclass
class _Rows:
    rows: list = field(default_factory=list)
    cols: list = field(default_factory=list)
    vals: list = field(default_factory=list)
    rhs: list = field(default_factory=list)
    n: int = 0


class LinearProgram:
    """Minimisation LP built from vectorised blocks.

    Variables are added in named blocks and addressed by integer index
    arrays. Constraints are added many at a time: each call passes a list
    of ``(coefficient, variable_index)`` terms whose arrays broadcast to
    the number of rows being added.
    """

    def __init__(self) -> None:
        self._lb: list[np.ndarray] = []
        self._ub: list[np.ndarray] = []
        self._cost: list[np.ndarray] = []
        self.n_vars = 0
        self.blocks: dict[str, np.ndarray] = {}
        self._eq = _Rows()
        self._ub_rows = _Rows()

    def add_variables(self, name, shape, lb=0.0, ub=np.inf, cost=0.0) -> np.ndarray:
        shape = tuple(np.atleast_1d(shape)) if not isinstance(shape, tuple) else shape
        size = int(np.prod(shape)) if shape else 1
        idx = np.arange(self.n_vars, self.n_vars + size).reshape(shape)
        self._lb.append(np.broadcast_to(np.asarray(lb, dtype=float), shape).ravel().copy())
        self._ub.append(np.broadcast_to(np.asarray(ub, dtype=float), shape).ravel().copy())
        self._cost.append(np.broadcast_to(np.asarray(cost, dtype=float), shape).ravel().copy())
        self.n_vars += size
        if name in self.blocks:
            raise ValueError(f"duplicate variable block {name!r}")
        self.blocks[name] = idx
        return idx

    def set_bounds(self, idx, lb=None, ub=None) -> None:
        lb_all = np.concatenate(self._lb) if len(self._lb) > 1 else self._lb[0]
        ub_all = np.concatenate(self._ub) if len(self._ub) > 1 else self._ub[0]
        idx = np.asarray(idx)
        if lb is not None:
            lb_all[idx.ravel()] = np.broadcast_to(np.asarray(lb, dtype=float), idx.shape).ravel()
        if ub is not None:
            ub_all[idx.ravel()] = np.broadcast_to(np.asarray(ub, dtype=float), idx.shape).ravel()
        self._lb, self._ub = [lb_all], [ub_all]

    def _add(self, store: _Rows, terms, rhs) -> np.ndarray:
        shapes = [np.shape(v) for _, v in terms] + [np.shape(c) for c, _ in terms] + [np.shape(rhs)]
        shape = np.broadcast_shapes(*shapes)
        n_rows = int(np.prod(shape)) if shape else 1
        row_ids = np.arange(store.n, store.n + n_rows)
        for coef, var in terms:
            var_b = np.broadcast_to(np.asarray(var), shape).ravel()
            coef_b = np.broadcast_to(np.asarray(coef, dtype=float), shape).ravel()
            keep = coef_b != 0.0
            store.rows.append(row_ids[keep])
            store.cols.append(var_b[keep])
            store.vals.append(coef_b[keep])
        store.rhs.append(np.broadcast_to(np.asarray(rhs, dtype=float), shape).ravel().copy())
        store.n += n_rows
        return row_ids.reshape(shape)

    def add_eq(self, terms, rhs) -> np.ndarray:
        """Add rows ``sum(coef * x[var]) == rhs``."""
        return self._add(self._eq, terms, rhs)

    def add_le(self, terms, rhs) -> np.ndarray:
        """Add rows ``sum(coef * x[var]) <= rhs``."""
        return self._add(self._ub_rows, terms, rhs)

    @staticmethod
    def _matrix(store: _Rows, n_vars: int):
        if store.n == 0:
            return None, None
        rows = np.concatenate(store.rows) if store.rows else np.empty(0, dtype=int)
        cols = np.concatenate(store.cols) if store.cols else np.empty(0, dtype=int)
        vals = np.concatenate(store.vals) if store.vals else np.empty(0)
        mat = sp.csr_matrix((vals, (rows, cols)), shape=(store.n, n_vars))
        return mat, np.concatenate(store.rhs)

    @property
    def cost(self) -> np.ndarray:
        return np.concatenate(self._cost) if self._cost else np.empty(0)

    def _bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.n_vars:
            return np.empty(0), np.empty(0)
        return np.concatenate(self._lb), np.concatenate(self._ub)

    def solve(self, method: str = "highs", tolerance: float = DEFAULT_TOLERANCE) -> LPSolution:
        if method not in METHODS:
            raise ValueError(f"unknown LP method {method!r}; expected one of {METHODS}")
        logger.debug(
            "solving LP with %s: %d vars, %d eq rows, %d ub rows",
            method, self.n_vars, self._eq.n, self._ub_rows.n,
        )
        if method == "clarabel":
            sol = self._solve_clarabel(tolerance)
            if sol.status != "error":
                return sol
            logger.warning("clarabel stopped early (%s); retrying with HiGHS", sol.message)
            method = "highs"
        return self._solve_highs(method, tolerance)

    def _solve_highs(self, method: str, tolerance: float) -> LPSolution:
        lb, ub = self._bounds()
        A_eq, b_eq = self._matrix(self._eq, self.n_vars)
        A_ub, b_ub = self._matrix(self._ub_rows, self.n_vars)
        options = {
            "primal_feasibility_tolerance": tolerance,
            "dual_feasibility_tolerance": tolerance,
        }
        limit = os.environ.get(TIME_LIMIT_ENV)
        if limit:
            options["time_limit"] = float(limit)
        res = linprog(
            self.cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
            bounds=np.column_stack([lb, ub]) if self.n_vars else None, method=method, options=options,
        )
        status = {0: "optimal", 2: "infeasible", 3: "unbounded"}.get(res.status, "error")
        x = res.x if res.x is not None else np.full(self.n_vars, np.nan)
        obj = float(res.fun) if res.fun is not None else float("nan")
        return LPSolution(status=status, objective=obj, x=np.asarray(x), message=res.message)

    def _solve_clarabel(self, tolerance: float) -> LPSolution:
        n = self.n_vars
        lb, ub = self._bounds()
        A_eq, b_eq = self._matrix(self._eq, n)
        A_ub, b_ub = self._matrix(self._ub_rows, n)
        eye = sp.identity(n, format="csr")
        has_lb, has_ub = np.isfinite(lb), np.isfinite(ub)
        n_eq = A_eq.shape[0] if A_eq is not None else 0
        # A x + s = b with s = 0 on equality rows and s >= 0 elsewhere
        blocks = [(A_eq, b_eq), (A_ub, b_ub), (-eye[has_lb], -lb[has_lb]), (eye[has_ub], ub[has_ub])]
        A = sp.vstack([m for m, _ in blocks if m is not None]).tocsc()
        b = np.concatenate([r for m, r in blocks if m is not None])
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.tol_gap_abs = settings.tol_gap_rel = settings.tol_feas = tolerance
        limit = os.environ.get(TIME_LIMIT_ENV)
        if limit:
            settings.time_limit = float(limit)
        cones = [clarabel.ZeroConeT(n_eq), clarabel.NonnegativeConeT(A.shape[0] - n_eq)]
        if not n_eq:
            cones = cones[1:]
        res = clarabel.DefaultSolver(sp.csc_matrix((n, n)), self.cost, A, b, cones, settings).solve()
        name = str(res.status)
        if name == "Solved":
            status = "optimal"
        elif "PrimalInfeasible" in name:
            status = "infeasible"
        elif "DualInfeasible" in name:
            status = "unbounded"
        else:
            status = "error"
        return LPSolution(status=status, objective=float(res.obj_val), x=np.asarray(res.x), message=name)

    def value(self, sol: LPSolution, name: str) -> np.ndarray:
        return sol.x[self.blocks[name]]
