"""Dense convex QP solver and branch-and-bound MIQP driver.

One solver instance per thread: problems and solutions are immutable, the
warm-start workspace is not. Small-scale dense problems only.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernel
from ._kernel import STATUS_MAX_ITER, STATUS_OPTIMAL, STATUS_PRIMAL_INFEASIBLE

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 4000
_RHO = 0.1
_SIGMA = 1e-6
_ALPHA = 1.6
_CHECK_EVERY = 25
_TIE_EPS = 1e-9


class SolveStatus(enum.Enum):
    OPTIMAL = "optimal"
    PRIMAL_INFEASIBLE = "primal-infeasible"
    MAX_ITERATIONS = "max-iterations"


def _min_eig_estimate(Q: np.ndarray, iterations: int = 50) -> float:
    """Smallest-eigenvalue estimate via a shifted power method (deterministic)."""
    n = Q.shape[0]
    shift = float(np.abs(Q).sum(axis=1).max()) + 1.0
    M = shift * np.eye(n) - Q
    v = np.ones(n) / np.sqrt(n)
    lam = 0.0
    for _ in range(iterations):
        w = M @ v
        nw = math.sqrt(float(w @ w))
        if nw < 1e-300:
            return shift
        v = w / nw
        lam = float(v @ M @ v)
    return shift - lam


# Controllers re-pose structurally identical problems every tick; remember
# which Hessians already passed the load-time PSD check.
_PSD_CACHE: dict[bytes, bool] = {}
_PSD_CACHE_MAX = 256


def _check_psd(Q: np.ndarray) -> bool:
    key = Q.tobytes()
    hit = _PSD_CACHE.get(key)
    if hit is not None:
        return hit
    ok = _min_eig_estimate(Q) >= -1e-7 * max(1.0, float(np.abs(Q).max()))
    if len(_PSD_CACHE) >= _PSD_CACHE_MAX:
        _PSD_CACHE.clear()
    _PSD_CACHE[key] = ok
    return ok


@dataclass(frozen=True)
class QpProblem:
    """min 0.5 x'Qx + q'x  s.t.  A_eq x = b_eq,  lower <= A_in x <= upper."""

    hessian: np.ndarray
    linear: np.ndarray
    a_eq: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    b_eq: np.ndarray = field(default_factory=lambda: np.zeros(0))
    a_in: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    lower: np.ndarray = field(default_factory=lambda: np.zeros(0))
    upper: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        Q = np.asarray(self.hessian, dtype=float)
        n = Q.shape[0]
        if Q.shape != (n, n):
            raise ValueError("hessian must be square")
        if float(np.abs(Q - Q.T).max(initial=0.0)) > 1e-10:
            raise ValueError("hessian asymmetry exceeds 1e-10")
        Q = 0.5 * (Q + Q.T)
        if not _check_psd(Q):
            raise ValueError("hessian is not positive semidefinite")
        q = np.asarray(self.linear, dtype=float).reshape(n)
        a_eq = np.asarray(self.a_eq, dtype=float).reshape(-1, n) if np.size(self.a_eq) else np.zeros((0, n))
        b_eq = np.asarray(self.b_eq, dtype=float).reshape(a_eq.shape[0])
        a_in = np.asarray(self.a_in, dtype=float).reshape(-1, n) if np.size(self.a_in) else np.zeros((0, n))
        lower = np.asarray(self.lower, dtype=float).reshape(a_in.shape[0])
        upper = np.asarray(self.upper, dtype=float).reshape(a_in.shape[0])
        if np.any(lower > upper):
            raise ValueError("inequality lower bound exceeds upper bound")
        for name, arr in (("hessian", Q), ("linear", q), ("a_eq", a_eq), ("b_eq", b_eq),
                          ("a_in", a_in), ("lower", lower), ("upper", upper)):
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.hessian.shape[0]

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.hessian @ x + self.linear @ x)

    def stacked(self):
        """(A, l, u, is_eq) with equality rows first."""
        A = np.vstack([self.a_eq, self.a_in])
        l = np.concatenate([self.b_eq, self.lower])
        u = np.concatenate([self.b_eq, self.upper])
        is_eq = np.zeros(A.shape[0], dtype=np.bool_)
        is_eq[: self.a_eq.shape[0]] = True
        tied = np.isfinite(l) & np.isfinite(u) & (u - l < 1e-12)
        return A, l, u, is_eq | tied

    def with_extra_equalities(self, a_rows: np.ndarray, b_rows: np.ndarray) -> "QpProblem":
        a_rows = np.asarray(a_rows, dtype=float).reshape(-1, self.n)
        b_rows = np.asarray(b_rows, dtype=float).reshape(a_rows.shape[0])
        return QpProblem(
            self.hessian,
            self.linear,
            np.vstack([self.a_eq, a_rows]),
            np.concatenate([self.b_eq, b_rows]),
            self.a_in,
            self.lower,
            self.upper,
        )

    def to_json_dict(self) -> dict:
        def clip(v: float) -> float:
            # JSON-safe sentinels for infinite bounds
            if v == np.inf:
                return 1e30
            if v == -np.inf:
                return -1e30
            return v

        return {
            "Q": self.hessian.tolist(),
            "q": self.linear.tolist(),
            "A_eq": self.a_eq.tolist(),
            "b_eq": self.b_eq.tolist(),
            "A_in": self.a_in.tolist(),
            "lower": [clip(v) for v in self.lower.tolist()],
            "upper": [clip(v) for v in self.upper.tolist()],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "QpProblem":
        n = len(d["q"])
        lower = np.array([(-np.inf if v <= -1e29 else v) for v in d.get("lower", [])], dtype=float)
        upper = np.array([(np.inf if v >= 1e29 else v) for v in d.get("upper", [])], dtype=float)
        return cls(
            np.array(d["Q"], dtype=float),
            np.array(d["q"], dtype=float),
            np.array(d.get("A_eq", []), dtype=float).reshape(-1, n) if d.get("A_eq") else np.zeros((0, n)),
            np.array(d.get("b_eq", []), dtype=float),
            np.array(d.get("A_in", []), dtype=float).reshape(-1, n) if d.get("A_in") else np.zeros((0, n)),
            lower,
            upper,
        )

    def dump(self, path: str) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json_dict(), f, indent=1)


@dataclass(frozen=True)
class QpSolution:
    x: np.ndarray
    duals: np.ndarray
    status: SolveStatus
    iterations: int
    primal_residual: float
    dual_residual: float
    objective: float

    def to_json_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "duals": self.duals.tolist(),
            "status": self.status.value,
            "iterations": self.iterations,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "objective": self.objective,
        }


def solve_qp(
    problem: QpProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    warm_start: Optional[tuple[np.ndarray, np.ndarray, np.ndarray]] = None,
) -> QpSolution:
    """Solve a dense convex QP; deterministic for identical inputs.

    Infeasibility is reported through the status, never raised.
    """
    A, l, u, is_eq = problem.stacked()
    n, m = problem.n, A.shape[0]
    if warm_start is not None:
        x, y, z = (np.asarray(v, dtype=float).copy() for v in warm_start)
    else:
        x, y, z = np.zeros(n), np.zeros(m), np.zeros(m)
    if m > 0:
        # Chunked iteration with polish attempts in between: degenerate
        # active sets stall the splitting iteration near the optimum, and an
        # exact active-set solve finishes the job much earlier.
        dual_cap = max(tol, 1e-8 * max(1.0, float(np.abs(problem.linear).max(initial=0.0))))
        code = STATUS_MAX_ITER
        iters = 0
        rho = _RHO
        while iters < max_iter:
            chunk = min(500, max_iter - iters)
            x, y, z, code, used, r_prim, r_dual, rho = _kernel.admm_solve(
                problem.hessian, problem.linear, A, l, u, is_eq,
                x, y, z, rho, _SIGMA, _ALPHA, tol, chunk, _CHECK_EVERY,
            )
            iters += used
            if code == STATUS_PRIMAL_INFEASIBLE:
                return QpSolution(
                    x, y, SolveStatus.PRIMAL_INFEASIBLE, iters,
                    float("inf"), float("inf"), float("nan"),
                )
            x_p, y_p, polished, _, _ = _kernel.polish_solve(
                problem.hessian, problem.linear, A, l, u, is_eq, x, y, tol, dual_cap
            )
            if polished:
                x, y = x_p, y_p
                code = STATUS_OPTIMAL
                break
            if code == STATUS_OPTIMAL:
                break
    else:
        # Unconstrained: direct regularized solve with refinement.
        L, d = _kernel.ldl_factor(problem.hessian + 1e-12 * np.eye(n))
        x = _kernel.ldl_solve(L, d, -problem.linear)
        x = x + _kernel.ldl_solve(L, d, -problem.linear - problem.hessian @ x)
        code = STATUS_OPTIMAL
        iters = 1
    r_prim, r_dual = _kernel.kkt_violation(problem.hessian, problem.linear, A, l, u, x, y)
    if code != STATUS_OPTIMAL and r_prim <= tol and r_dual <= tol:
        code = STATUS_OPTIMAL
    status = SolveStatus.OPTIMAL if code == STATUS_OPTIMAL else SolveStatus.MAX_ITERATIONS
    return QpSolution(x, y, status, iters, float(r_prim), float(r_dual),
                      problem.objective(x))


class QpSolver:
    """Stateful wrapper keeping a warm-start workspace between solves."""

    def __init__(self, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
        self.tol = tol
        self.max_iter = max_iter
        self._warm: Optional[tuple[np.ndarray, np.ndarray, np.ndarray]] = None
        self._warm_shape: Optional[tuple[int, int]] = None

    def solve(self, problem: QpProblem, warm: bool = True) -> QpSolution:
        A, _, _, _ = problem.stacked()
        shape = (problem.n, A.shape[0])
        warm_start = self._warm if (warm and self._warm_shape == shape) else None
        sol = solve_qp(problem, self.tol, self.max_iter, warm_start)
        if sol.status is SolveStatus.OPTIMAL:
            self._warm = (sol.x.copy(), sol.duals.copy(), A @ sol.x)
            self._warm_shape = shape
        else:
            self._warm = None
            self._warm_shape = None
        return sol

    def reset(self) -> None:
        self._warm = None
        self._warm_shape = None


@dataclass(frozen=True)
class IntSumConstraint:
    """Linear equality over the integer variables: coeffs . c == rhs."""

    coeffs: tuple[float, ...]
    rhs: float


@dataclass(frozen=True)
class MiqpProblem:
    """QP template plus finite-domain integer variables.

    ``coupling(i, v)`` returns extra equality rows (A, b) switched on when
    integer variable i takes value v, or None when the value adds nothing.
    """

    template: QpProblem
    domains: tuple[tuple[int, ...], ...]
    sum_constraints: tuple[IntSumConstraint, ...] = ()
    coupling: Optional[Callable[[int, int], Optional[tuple[np.ndarray, np.ndarray]]]] = None

    def __post_init__(self):
        if any(len(dom) == 0 for dom in self.domains):
            raise ValueError("every integer variable needs a non-empty admissible set")
        object.__setattr__(self, "domains", tuple(tuple(sorted(dom)) for dom in self.domains))


@dataclass(frozen=True)
class MiqpResult:
    assignment: Optional[tuple[int, ...]]
    solution: Optional[QpSolution]
    status: SolveStatus
    nodes: int


def _partial_sums_feasible(miqp: MiqpProblem, prefix: Sequence[int]) -> bool:
    k = len(prefix)
    for con in miqp.sum_constraints:
        lo = hi = 0.0
        for i, coef in enumerate(con.coeffs):
            if i < k:
                lo += coef * prefix[i]
                hi += coef * prefix[i]
            else:
                vals = [coef * v for v in miqp.domains[i]]
                lo += min(vals)
                hi += max(vals)
        if con.rhs < lo - 1e-9 or con.rhs > hi + 1e-9:
            return False
    return True


def _coupled_problem(miqp: MiqpProblem, prefix: Sequence[int]) -> QpProblem:
    problem = miqp.template
    if miqp.coupling is None:
        return problem
    rows = []
    rhs = []
    for i, v in enumerate(prefix):
        extra = miqp.coupling(i, v)
        if extra is not None:
            a, b = extra
            rows.append(np.asarray(a, dtype=float).reshape(-1, problem.n))
            rhs.append(np.asarray(b, dtype=float).ravel())
    if not rows:
        return problem
    return problem.with_extra_equalities(np.vstack(rows), np.concatenate(rhs))


def solve_miqp(
    miqp: MiqpProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> MiqpResult:
    """Branch and bound over the integer domains, lexicographic tie-break.

    Values are explored in ascending order, so the incumbent kept on ties is
    the lexicographically smallest optimal assignment. Partial relaxations
    (coupling rows of assigned variables only) give valid lower bounds.
    """
    n_int = len(miqp.domains)
    best: dict = {"obj": np.inf, "assignment": None, "solution": None}
    nodes = 0

    def visit(prefix: list[int]) -> None:
        nonlocal nodes
        if not _partial_sums_feasible(miqp, prefix):
            return
        nodes += 1
        sol = solve_qp(_coupled_problem(miqp, prefix), tol, max_iter)
        if sol.status is SolveStatus.PRIMAL_INFEASIBLE:
            return
        bound = sol.objective if sol.status is SolveStatus.OPTIMAL else -np.inf
        if best["assignment"] is not None and bound >= best["obj"] - _TIE_EPS:
            return
        if len(prefix) == n_int:
            if sol.status is SolveStatus.OPTIMAL and sol.objective < best["obj"] - _TIE_EPS:
                best["obj"] = sol.objective
                best["assignment"] = tuple(prefix)
                best["solution"] = sol
            return
        for v in miqp.domains[len(prefix)]:
            prefix.append(v)
            visit(prefix)
            prefix.pop()

    visit([])
    if best["assignment"] is None:
        return MiqpResult(None, None, SolveStatus.PRIMAL_INFEASIBLE, nodes)
    return MiqpResult(best["assignment"], best["solution"], SolveStatus.OPTIMAL, nodes)
