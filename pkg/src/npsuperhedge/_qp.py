"""Small dense strictly convex quadratic programs by a dual active-set method.

Solves::

    minimize    0.5 x'Hx + c'x
    subject to  A x  = a      (equalities, always active)
                C x >= d      (inequalities)

with ``H`` positive definite. The iteration starts from the equality-only
minimizer and adds the most violated inequality at a time, as in the method
of Goldfarb and Idnani. Each step re-solves a small KKT system, which is
cheap at the sizes used here (a few dozen variables).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .exceptions import InfeasibleError, SolverError


@dataclass(frozen=True)
class QPResult:
    x: np.ndarray
    active: tuple[int, ...]
    multipliers: np.ndarray  # one per inequality, zero when inactive
    eq_multipliers: np.ndarray
    iterations: int


def independent_rows(A: np.ndarray, a: np.ndarray, tol: float = 1e-10):
    """Drop linearly dependent equality rows; raise if the system is inconsistent."""
    if A.shape[0] == 0:
        return A, a
    scale = max(1.0, float(np.max(np.abs(A))))
    _, r, perm = linalg.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r)) if r.size else np.zeros(0)
    rank = int(np.sum(diag > tol * scale))
    keep = np.sort(perm[:rank])
    A_k, a_k = A[keep], a[keep]
    if rank < A.shape[0]:
        x, *_ = linalg.lstsq(A_k, a_k) if rank else (np.zeros(A.shape[1]),)
        if not np.allclose(A @ x, a, atol=tol * max(1.0, float(np.max(np.abs(a))))):
            raise InfeasibleError("equality constraints are inconsistent")
    return A_k, a_k


def _kkt(H, N, rhs_top, rhs_bot):
    n = H.shape[0]
    m = N.shape[0]
    # equilibrate: unit diagonal for H, unit-norm constraint rows
    s = 1.0 / np.sqrt(np.maximum(np.abs(np.diag(H)), np.finfo(float).tiny))
    Ns = N * s
    r = 1.0 / np.maximum(np.linalg.norm(Ns, axis=1), np.finfo(float).tiny)
    K = np.zeros((n + m, n + m))
    K[:n, :n] = H * np.outer(s, s)
    K[:n, n:] = (Ns * r[:, None]).T
    K[n:, :n] = Ns * r[:, None]
    sol = linalg.solve(K, np.r_[rhs_top * s, rhs_bot * r], assume_a="sym")
    return sol[:n] * s, sol[n:] * r


def solve_qp(H, c, A=None, a=None, C=None, d=None, max_iter: int = 500, tol: float = 1e-12) -> QPResult:
    H = np.asarray(H, dtype=float)
    c = np.asarray(c, dtype=float)
    n = c.size
    A = np.zeros((0, n)) if A is None else np.atleast_2d(np.asarray(A, dtype=float))
    a = np.zeros(0) if a is None else np.atleast_1d(np.asarray(a, dtype=float))
    C = np.zeros((0, n)) if C is None else np.atleast_2d(np.asarray(C, dtype=float))
    d = np.zeros(0) if d is None else np.atleast_1d(np.asarray(d, dtype=float))
    A, a = independent_rows(A, a)
    n_eq = A.shape[0]

    active: list[int] = []
    lam = np.zeros(C.shape[0])

    def stationary(active_rows):
        N = np.vstack([A, C[active_rows]]) if active_rows else A
        rhs = np.r_[a, d[active_rows]] if active_rows else a
        if N.shape[0] == 0:
            return linalg.solve(H, -c, assume_a="pos"), np.zeros(0)
        x, u = _kkt(H, N, -c, rhs)
        # stationarity H x + c = N' mu  with mu = -u
        return x, -u

    x, mu = stationary(active)
    eq_mu = mu[:n_eq]
    cscale = max(1.0, float(np.max(np.abs(C)))) if C.size else 1.0
    feas_tol = tol * cscale * max(1.0, float(np.max(np.abs(x))))

    for it in range(1, max_iter + 1):
        if C.shape[0] == 0:
            break
        slack = C @ x - d
        p = int(np.argmin(slack))
        if slack[p] >= -feas_tol:
            break
        lam_p = 0.0
        while True:
            N = np.vstack([A, C[active]]) if active else A
            n_p = C[p]
            if N.shape[0]:
                z, u = _kkt(H, N, n_p, np.zeros(N.shape[0]))
            else:
                z, u = linalg.solve(H, n_p, assume_a="pos"), np.zeros(0)
            # multipliers move by r = -u per unit step
            r = -u[n_eq:]
            curv = float(n_p @ z)
            t2, blocking = np.inf, None
            for pos, idx in enumerate(active):
                if r[pos] < -1e-14:
                    ratio = lam[idx] / -r[pos]
                    if ratio < t2:
                        t2, blocking = ratio, pos
            s_p = float(n_p @ x - d[p])
            t1 = -s_p / curv if curv > 1e-14 * max(1.0, float(n_p @ n_p)) else np.inf
            if not np.isfinite(t1) and blocking is None:
                raise InfeasibleError("inequality constraints are infeasible")
            t = min(t1, t2)
            if np.isfinite(t1):
                x = x + t * z
            for pos, idx in enumerate(active):
                lam[idx] += t * r[pos]
            lam_p += t
            if t1 <= t2:
                lam[p] = lam_p
                active.append(p)
                break
            dropped = active.pop(blocking)
            lam[dropped] = 0.0
        # re-solve exactly on the current working set to limit drift
        x, mu = stationary(active)
        lam[:] = 0.0
        if active:
            lam[np.array(active)] = np.maximum(mu[n_eq:], 0.0)
        eq_mu = mu[:n_eq]
    else:
        slack = C @ x - d
        raise SolverError(
            f"active-set QP did not converge in {max_iter} iterations",
            iterations=max_iter,
            diagnostics={"min_slack": float(slack.min()), "active": list(active)},
        )

    return QPResult(
        x=x,
        active=tuple(sorted(active)),
        multipliers=lam.copy(),
        eq_multipliers=np.asarray(eq_mu),
        iterations=it if C.shape[0] else 0,
    )
