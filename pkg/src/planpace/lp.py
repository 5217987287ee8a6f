"""Dense two-phase simplex for the small LPs behind the baselines.

Solves ``max c.x  s.t.  A x <= b,  E x = e,  x >= 0`` on a full tableau.
Pricing is Dantzig's rule, falling back to Bland's rule after
``5 * (n + p + q)`` iterations or on a repeated basis.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import kernels

FEAS_TOL = 1e-7
PIVOT_TOL = 1e-11
_ELIGIBLE = 1e-9
_PRICE_TOL = 1e-10


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


class CycleDetected(RuntimeError):
    pass


class NumericalBreakdown(ArithmeticError):
    pass


def _mat(a, cols):
    a = np.asarray(a, dtype=np.float64)
    if a.size == 0:
        return np.zeros((0, cols))
    return np.atleast_2d(a)


@dataclass(frozen=True)
class LinearProgram:
    c: np.ndarray
    A: np.ndarray = None
    b: np.ndarray = None
    E: np.ndarray = None
    e: np.ndarray = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=np.float64).ravel()
        n = c.size
        A = _mat(self.A if self.A is not None else [], n)
        E = _mat(self.E if self.E is not None else [], n)
        b = np.asarray(self.b if self.b is not None else [], dtype=np.float64).ravel()
        e = np.asarray(self.e if self.e is not None else [], dtype=np.float64).ravel()
        if A.shape[1] != n or E.shape[1] != n or b.size != A.shape[0] or e.size != E.shape[0]:
            raise ValueError(
                f"inconsistent LP dimensions: c {n}, A {A.shape}, b {b.size}, E {E.shape}, e {e.size}"
            )
        for name, arr in (("c", c), ("A", A), ("b", b), ("E", E), ("e", e)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite entries in {name}")
        for name, arr in (("c", c), ("A", A), ("b", b), ("E", E), ("e", e)):
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.c.size


@dataclass
class LpSolution:
    status: Status
    x: np.ndarray | None = None
    objective_value: float = float("nan")
    iterations: int = 0
    pivots: list = field(default_factory=list, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


class _Tableau:
    """Rows 0..R-1 are constraints, row R the objective (reduced costs)."""

    def __init__(self, tab, basis, trace):
        self.tab = tab
        self.basis = basis
        self.trace = trace
        self.pivots = []

    def run(self, ncols_allowed: int, budget: int):
        """Iterate to optimality on the current objective row. Returns False if unbounded."""
        tab, basis = self.tab, self.basis
        R = tab.shape[0] - 1
        bland_after = budget
        seen = set()
        it = 0
        use_bland = False
        hard_cap = 50 * budget + 1000
        while True:
            obj = tab[R, :ncols_allowed]
            if use_bland:
                cand = np.nonzero(obj < -_PRICE_TOL)[0]
                if cand.size == 0:
                    return True
                col = int(cand[0])
            else:
                col = int(np.argmin(obj))
                if obj[col] >= -_PRICE_TOL:
                    return True
            colv = tab[:R, col]
            rhs = tab[:R, -1]
            ok = colv > _ELIGIBLE
            if not ok.any():
                return False
            ratios = np.full(R, np.inf)
            ratios[ok] = rhs[ok] / colv[ok]
            best = ratios.min()
            ties = np.nonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))[0]
            # Bland: leave the tied row whose basic variable has the lowest index
            row = int(ties[np.argmin(basis[ties])]) if use_bland else int(ties[0])
            if abs(tab[row, col]) < PIVOT_TOL:
                raise NumericalBreakdown(f"pivot magnitude {tab[row, col]:.3e} below {PIVOT_TOL}")
            kernels.pivot(tab, row, col)
            basis[row] = col
            self.pivots.append((row, col))
            if self.trace is not None:
                self.trace.append(f"pivot row={row} col={col} obj={tab[R, -1]!r}")
            it += 1
            if not use_bland:
                key = tuple(basis)
                if key in seen or it >= bland_after:
                    use_bland = True
                seen.add(key)
            elif it > hard_cap:
                raise CycleDetected(f"no progress after {it} pivots under Bland's rule")


def solve_lp(lp: LinearProgram, trace_path=None) -> LpSolution:
    """Solve ``lp``; ``trace_path`` dumps the pivot sequence to a text file."""
    n = lp.n
    A, b, E, e = lp.A.copy(), lp.b.copy(), lp.E.copy(), lp.e.copy()
    p, q = A.shape[0], E.shape[0]
    trace = [] if trace_path is not None else None

    # columns: x (n) | slack (p) | artificial (na) | rhs
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    sl_sign = np.where(neg, -1.0, 1.0)
    eneg = e < 0
    E[eneg] *= -1
    e[eneg] *= -1
    art_rows = list(np.nonzero(neg)[0]) + [p + j for j in range(q)]
    na = len(art_rows)
    R = p + q
    ncol = n + p + na + 1
    tab = np.zeros((R + 1, ncol))
    tab[:p, :n] = A
    tab[p:R, :n] = E
    tab[np.arange(p), n + np.arange(p)] = sl_sign
    tab[:p, -1] = b
    tab[p:R, -1] = e
    basis = np.empty(R, dtype=np.int64)
    basis[:p] = n + np.arange(p)
    for j, r in enumerate(art_rows):
        tab[r, n + p + j] = 1.0
        basis[r] = n + p + j

    budget = 5 * (n + p + q)
    tb = _Tableau(tab, basis, trace)
    iterations = 0

    if na:
        # phase 1: maximise -sum(artificials), i.e. reduced costs of the sum
        tab[R, :] = 0.0
        tab[R, n + p : n + p + na] = 1.0
        for r in art_rows:
            tab[R] -= tab[r]
        if trace is not None:
            trace.append("phase 1")
        tb.run(n + p + na, budget)
        iterations += len(tb.pivots)
        if -tab[R, -1] > FEAS_TOL * max(1.0, np.abs(tab[:R, -1]).max(initial=0.0)):
            _dump(trace_path, trace)
            return LpSolution(Status.INFEASIBLE, iterations=iterations, pivots=list(tb.pivots))
        # drive artificials out of the basis; drop rows that are redundant
        keep = np.ones(R, dtype=bool)
        for r in range(R):
            if basis[r] >= n + p:
                cand = np.nonzero(np.abs(tab[r, : n + p]) > 1e-9)[0]
                if cand.size:
                    kernels.pivot(tab, r, int(cand[0]))
                    basis[r] = int(cand[0])
                    tb.pivots.append((r, int(cand[0])))
                else:
                    keep[r] = False
        rows = np.append(np.nonzero(keep)[0], R)
        tab = np.ascontiguousarray(np.delete(tab[rows], np.s_[n + p : n + p + na], axis=1))
        basis = basis[keep]
        R = basis.size
        tb.tab, tb.basis = tab, basis

    # phase 2 objective row: -c on x, then price out the basis
    tab[R, :] = 0.0
    tab[R, :n] = -lp.c
    for r in range(R):
        j = basis[r]
        if tab[R, j] != 0.0:
            tab[R] -= tab[R, j] * tab[r]
    if trace is not None:
        trace.append("phase 2")
    start = len(tb.pivots)
    bounded = tb.run(n + p, budget)
    iterations += len(tb.pivots) - start
    _dump(trace_path, trace)
    if not bounded:
        return LpSolution(Status.UNBOUNDED, iterations=iterations, pivots=list(tb.pivots))

    z = np.zeros(n + p)
    z[basis] = tab[:R, -1]
    x = np.maximum(z[:n], 0.0)
    sol = LpSolution(Status.OPTIMAL, x, float(lp.c @ x), iterations, list(tb.pivots))
    _check_feasible(lp, x)
    return sol


def _check_feasible(lp: LinearProgram, x):
    scale = 1.0 + np.abs(x).max(initial=0.0)
    if lp.A.shape[0] and np.any(lp.A @ x > lp.b + FEAS_TOL * scale):
        raise NumericalBreakdown("returned point violates an inequality row")
    if lp.E.shape[0] and np.any(np.abs(lp.E @ x - lp.e) > FEAS_TOL * scale):
        raise NumericalBreakdown("returned point violates an equality row")


def _dump(path, trace):
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(trace) + "\n")


@dataclass
class BruteResult:
    status: Status
    value: float
    x: np.ndarray | None


def lp_brute_check(lp: LinearProgram, h: float = 0.01, upper: float = 2.0) -> BruteResult:
    """Grid search over ``[0, upper]^n`` with step ``h``; a test oracle for n <= 3."""
    if lp.n > 3:
        raise ValueError("grid oracle only supports n <= 3")
    eq_tol = h * max(1.0, np.abs(lp.E).sum(axis=1).max(initial=0.0)) / 2.0 + 1e-12
    val, x = kernels.grid_max(lp.A, lp.b, lp.E, lp.e, lp.c, float(h), float(upper), float(eq_tol))
    if not np.isfinite(val):
        return BruteResult(Status.INFEASIBLE, float("nan"), None)
    return BruteResult(Status.OPTIMAL, float(val), x)
