"""Jitted numerical core of the dense QP solver.

Operator-splitting (ADMM) iteration over the stacked constraint form
``l <= A x <= u`` with an in-repo LDL' factorization of the quasi-definite
KKT matrix. Falls back to plain Python when numba is unavailable; the
algorithm is identical either way.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
except ImportError:  # degraded but correct
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


STATUS_OPTIMAL = 0
STATUS_MAX_ITER = 1
STATUS_PRIMAL_INFEASIBLE = 2


@njit(cache=True)
def ldl_factor(M):
    """LDL' factorization without pivoting; valid for quasi-definite matrices."""
    n = M.shape[0]
    L = np.eye(n)
    d = np.zeros(n)
    for j in range(n):
        s = M[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k] * d[k]
        d[j] = s
        if d[j] == 0.0:
            d[j] = 1e-13
        for i in range(j + 1, n):
            t = M[i, j]
            for k in range(j):
                t -= L[i, k] * L[j, k] * d[k]
            L[i, j] = t / d[j]
    return L, d


@njit(cache=True)
def ldl_solve(L, d, b):
    n = b.shape[0]
    x = b.copy()
    for i in range(n):
        for k in range(i):
            x[i] -= L[i, k] * x[k]
    for i in range(n):
        x[i] /= d[i]
    for i in range(n - 1, -1, -1):
        for k in range(i + 1, n):
            x[i] -= L[k, i] * x[k]
    return x


@njit(cache=True)
def _build_kkt(Q, A, rho_vec, sigma):
    n = Q.shape[0]
    m = A.shape[0]
    K = np.zeros((n + m, n + m))
    for i in range(n):
        for j in range(n):
            K[i, j] = Q[i, j]
        K[i, i] += sigma
    for i in range(m):
        for j in range(n):
            K[n + i, j] = A[i, j]
            K[j, n + i] = A[i, j]
        K[n + i, n + i] = -1.0 / rho_vec[i]
    return K


@njit(cache=True)
def _residuals(Q, q, A, l, u, x, y, z):
    m = A.shape[0]
    n = Q.shape[0]
    r_prim = 0.0
    for i in range(m):
        ax = 0.0
        for j in range(n):
            ax += A[i, j] * x[j]
        v = abs(ax - z[i])
        if v > r_prim:
            r_prim = v
    r_dual = 0.0
    for i in range(n):
        s = q[i]
        for j in range(n):
            s += Q[i, j] * x[j]
        for k in range(m):
            s += A[k, i] * y[k]
        v = abs(s)
        if v > r_dual:
            r_dual = v
    return r_prim, r_dual


@njit(cache=True)
def kkt_violation(Q, q, A, l, u, x, y):
    """(primal bound violation, stationarity residual), both inf-norms."""
    m = A.shape[0]
    n = Q.shape[0]
    r_dual = 0.0
    for i in range(n):
        s = q[i]
        for j in range(n):
            s += Q[i, j] * x[j]
        for k in range(m):
            s += A[k, i] * y[k]
        if abs(s) > r_dual:
            r_dual = abs(s)
    r_prim = 0.0
    for i in range(m):
        ax = 0.0
        for j in range(n):
            ax += A[i, j] * x[j]
        v = 0.0
        if l[i] > -np.inf and l[i] - ax > v:
            v = l[i] - ax
        if u[i] < np.inf and ax - u[i] > v:
            v = ax - u[i]
        if v > r_prim:
            r_prim = v
    return r_prim, r_dual


@njit(cache=True)
def polish_solve(Q, q, A, l, u, is_eq, x, y, tol, dual_cap):
    """Exact equality solve on the detected active set, with refinement.

    Degenerate vertices can leave ambiguous multipliers; rows whose sign
    comes out wrong are dropped and the system re-solved. Returns
    (x, y, accepted, r_prim, r_dual); a rejected polish hands back the
    inputs untouched so a wrong active-set guess cannot hurt.
    """
    m = A.shape[0]
    n = Q.shape[0]
    act_low = np.zeros(m, np.bool_)
    act_up = np.zeros(m, np.bool_)
    ax = np.zeros(m)
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += A[i, j] * x[j]
        ax[i] = s
    for i in range(m):
        if is_eq[i]:
            act_low[i] = True
        elif y[i] < -tol * 0.1 or (l[i] > -np.inf and ax[i] - l[i] < tol * 10.0):
            act_low[i] = True
        elif y[i] > tol * 0.1 or (u[i] < np.inf and u[i] - ax[i] < tol * 10.0):
            act_up[i] = True

    for _attempt in range(4):
        k = 0
        for i in range(m):
            if act_low[i] or act_up[i]:
                k += 1
        K = np.zeros((n + k, n + k))
        rhs = np.zeros(n + k)
        rows = np.empty(k, np.int64)
        idx = 0
        for i in range(m):
            if not (act_low[i] or act_up[i]):
                continue
            b = l[i] if act_low[i] else u[i]
            if not np.isfinite(b):
                return x, y, False, np.inf, np.inf
            rows[idx] = i
            for j in range(n):
                K[n + idx, j] = A[i, j]
                K[j, n + idx] = A[i, j]
            K[n + idx, n + idx] = -1e-9
            rhs[n + idx] = b
            idx += 1
        for i in range(n):
            for j in range(n):
                K[i, j] = Q[i, j]
            K[i, i] += 1e-9
            rhs[i] = -q[i]
        L, d = ldl_factor(K)
        sol = ldl_solve(L, d, rhs)
        for _ in range(2):
            res = np.zeros(n + k)
            for i in range(n):
                s = rhs[i]
                for j in range(n):
                    s -= Q[i, j] * sol[j]
                for t in range(k):
                    s -= A[rows[t], i] * sol[n + t]
                res[i] = s
            for t in range(k):
                s = rhs[n + t]
                for j in range(n):
                    s -= A[rows[t], j] * sol[j]
                res[n + t] = s
            sol = sol + ldl_solve(L, d, res)

        x_p = sol[:n].copy()
        y_p = np.zeros(m)
        for t in range(k):
            y_p[rows[t]] = sol[n + t]
        dropped = 0
        for i in range(m):
            if is_eq[i]:
                continue
            if act_low[i] and not act_up[i] and y_p[i] > tol:
                act_low[i] = False
                dropped += 1
            elif act_up[i] and not act_low[i] and y_p[i] < -tol:
                act_up[i] = False
                dropped += 1
        if dropped == 0:
            r_prim, r_dual = kkt_violation(Q, q, A, l, u, x_p, y_p)
            if r_prim <= tol and r_dual <= dual_cap:
                return x_p, y_p, True, r_prim, r_dual
            return x, y, False, np.inf, np.inf
    return x, y, False, np.inf, np.inf


@njit(cache=True)
def admm_solve(Q, q, A, l, u, is_eq, x0, y0, z0, rho0, sigma, alpha, tol, max_iter, check_every):
    """Core iteration.

    Returns (x, y, z, status, iterations, r_prim, r_dual, rho); callers may
    resume with the returned state and step parameter.
    """
    n = Q.shape[0]
    m = A.shape[0]
    rho_base = rho0
    rho_vec = np.empty(m)
    for i in range(m):
        rho_vec[i] = rho_base * 1e3 if is_eq[i] else rho_base
    K = _build_kkt(Q, A, rho_vec, sigma)
    L, d = ldl_factor(K)

    x = x0.copy()
    y = y0.copy()
    z = z0.copy()
    y_prev = y.copy()
    rhs = np.zeros(n + m)
    status = STATUS_MAX_ITER
    r_prim = np.inf
    r_dual = np.inf
    it = 0
    while it < max_iter:
        it += 1
        for i in range(n):
            rhs[i] = sigma * x[i] - q[i]
        for i in range(m):
            rhs[n + i] = z[i] - y[i] / rho_vec[i]
        sol = ldl_solve(L, d, rhs)
        for i in range(n):
            x[i] = alpha * sol[i] + (1.0 - alpha) * x[i]
        for i in range(m):
            z_tilde = z[i] + (sol[n + i] - y[i]) / rho_vec[i]
            z_relax = alpha * z_tilde + (1.0 - alpha) * z[i]
            z_new = z_relax + y[i] / rho_vec[i]
            if z_new < l[i]:
                z_new = l[i]
            elif z_new > u[i]:
                z_new = u[i]
            y[i] = y[i] + rho_vec[i] * (z_relax - z_new)
            z[i] = z_new

        if it % check_every == 0 or it == max_iter:
            r_prim, r_dual = _residuals(Q, q, A, l, u, x, y, z)
            if r_prim <= tol and r_dual <= tol:
                status = STATUS_OPTIMAL
                break
            # Primal-infeasibility certificate from the dual update direction.
            dy_norm = 0.0
            for i in range(m):
                v = abs(y[i] - y_prev[i])
                if v > dy_norm:
                    dy_norm = v
            if dy_norm > 1e-12:
                at_dy = 0.0
                for j in range(n):
                    s = 0.0
                    for i in range(m):
                        s += A[i, j] * (y[i] - y_prev[i])
                    if abs(s) > at_dy:
                        at_dy = abs(s)
                support = 0.0
                valid = True
                for i in range(m):
                    dyi = y[i] - y_prev[i]
                    if dyi > 1e-10 * dy_norm:
                        if u[i] == np.inf:
                            valid = False
                            break
                        support += u[i] * dyi
                    elif dyi < -1e-10 * dy_norm:
                        if l[i] == -np.inf:
                            valid = False
                            break
                        support += l[i] * dyi
                if valid and at_dy <= 1e-6 * dy_norm and support < -1e-6 * dy_norm:
                    status = STATUS_PRIMAL_INFEASIBLE
                    break
            for i in range(m):
                y_prev[i] = y[i]
            # Residual balancing: rescale the step parameter every check window.
            if r_dual > 1e-14 and r_prim > 1e-14:
                factor = np.sqrt(r_prim / r_dual)
                if factor > 10.0:
                    factor = 10.0
                elif factor < 0.1:
                    factor = 0.1
                if factor > 1.3 or factor < 0.77:
                    rho_base = rho_base * factor
                    if rho_base < 1e-6:
                        rho_base = 1e-6
                    elif rho_base > 1e6:
                        rho_base = 1e6
                    for i in range(m):
                        rho_vec[i] = rho_base * 1e3 if is_eq[i] else rho_base
                    K = _build_kkt(Q, A, rho_vec, sigma)
                    L, d = ldl_factor(K)
    return x, y, z, status, it, r_prim, r_dual, rho_base
