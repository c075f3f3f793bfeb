"""Independent reference computations used only by the tests."""

from __future__ import annotations

import itertools

import numba
import numpy as np


@numba.njit(cache=True)
def _dykstra_sweeps(rows, coef, rhs, v, incr, max_sweeps, tol):
    m = rhs.size
    for sweep in range(max_sweeps):
        change = 0.0
        for r in range(m):
            dot = 0.0
            nrm = 0.0
            for c in range(3):
                i = rows[r, c]
                if i >= 0:
                    dot += coef[r, c] * (v[i] + incr[r, c])
                    nrm += coef[r, c] ** 2
            viol = dot - rhs[r]
            lam = viol / nrm if viol > 0.0 else 0.0
            for c in range(3):
                i = rows[r, c]
                if i >= 0:
                    y = v[i] + incr[r, c]
                    new = y - lam * coef[r, c]
                    incr[r, c] = y - new
                    change = max(change, abs(new - v[i]))
                    v[i] = new
        if change < tol:
            # the iterates can stall far from the solution; also demand feasibility
            worst = 0.0
            for r in range(m):
                dot = 0.0
                for c in range(3):
                    if rows[r, c] >= 0:
                        dot += coef[r, c] * v[rows[r, c]]
                worst = max(worst, dot - rhs[r])
            if worst < tol:
                return sweep
    return max_sweeps


def dykstra_minorant(strikes, asks, max_sweeps: int = 10_000_000, tol: float = 1e-11):
    """Greatest convex non-increasing minorant by cyclic Dykstra projections.

    The L2 projection of the quotes onto {convex} ∩ {non-increasing} ∩ {v <= q}
    is the greatest element of that set, i.e. the superhedging CALL curve at
    the quoted strikes. Each half-space touches at most three coordinates.
    """
    k = np.asarray(strikes, dtype=float)
    q = np.asarray(asks, dtype=float)
    n = k.size
    rows, coef, rhs = [], [], []
    for i in range(1, n - 1):
        l, r = k[i] - k[i - 1], k[i + 1] - k[i]
        # slope(i-1, i) - slope(i, i+1) <= 0
        rows.append([i - 1, i, i + 1])
        coef.append([-1 / l, 1 / l + 1 / r, -1 / r])
        rhs.append(0.0)
    for i in range(n - 1):
        rows.append([i, i + 1, -1])
        coef.append([-1.0, 1.0, 0.0])
        rhs.append(0.0)
    for i in range(n):
        rows.append([i, -1, -1])
        coef.append([1.0, 0.0, 0.0])
        rhs.append(q[i])
    v = q.copy()
    incr = np.zeros((len(rhs), 3))
    sweeps = _dykstra_sweeps(np.array(rows), np.array(coef), np.array(rhs), v, incr, max_sweeps, tol)
    if sweeps >= max_sweeps:
        raise RuntimeError("Dykstra iteration did not converge")
    return v


def lp_vertex_enumeration(strikes, prices, f_values, slope):
    """Superhedging LP solved by enumerating basic feasible solutions (small I only)."""
    j = np.asarray(strikes, dtype=float)
    q = np.asarray(prices, dtype=float)
    n = j.size
    pay = np.maximum(j[1:, None] - j[None, :], 0.0)
    G = np.vstack([pay, np.ones((1, n)), np.eye(n)])
    h = np.r_[np.asarray(f_values, dtype=float), slope, np.zeros(n)]
    best = np.inf
    for rows in itertools.combinations(range(G.shape[0]), n):
        sub = G[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        a = np.linalg.solve(sub, h[list(rows)])
        if np.all(G @ a >= h - 1e-9):
            best = min(best, float(q @ a))
    return best


def fine_grid_spline_center(N: int = 10, h: float = 10.0, steps: int = 2000) -> float:
    """``g(k)`` of the penalized spline, from a fine discretization of ``g''``.

    ``g''`` is sampled on a grid of ``steps`` cells and restricted to be
    linear between the spline knots; values come from trapezoid integration.
    """
    import cvxpy as cp

    x = np.linspace(-h, h, steps + 1)
    dx = x[1] - x[0]
    n = x.size
    # trapezoid cumulative integration operator
    C = np.zeros((n, n))
    for i in range(1, n):
        C[i, :i] += dx / 2
        C[i, 1 : i + 1] += dx / 2
    G1 = C
    G0 = C @ C
    knots = -h + 2 * h * np.arange(N + 1) / N
    knot_idx = [int(round((t + h) / dx)) for t in knots]
    s = cp.Variable(n)
    cons = [s >= 0, s[0] == 0, s[-1] == 0, G1[-1] @ s == 1, G0[-1] @ s == h]
    for a, b in zip(knot_idx[:-1], knot_idx[1:]):
        if b - a >= 2:
            cons.append(s[a : b - 1] - 2 * s[a + 1 : b] + s[a + 2 : b + 1] == 0)
    g = G0 @ s
    at_knots = np.zeros((N + 1, n))
    for r, idx in enumerate(knot_idx):
        at_knots[r, idx] = 1.0
    fit = cp.sum_squares(at_knots @ g - np.maximum(knots, 0.0))
    w = np.full(n, dx)
    w[0] = w[-1] = dx / 2
    rough = (0.1 * h) ** 3 * cp.sum(cp.multiply(w, cp.square(s)))
    cp.Problem(cp.Minimize(fit + rough), cons).solve(solver="CLARABEL")
    return float((G0 @ s.value)[steps // 2])
