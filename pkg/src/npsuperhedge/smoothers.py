"""Smoothed CALL payoffs.

Every smoother here has the form ``g_k^h(x) = h * G((x - k) / h)`` for a
convex shape ``G`` with ``G(u) = 0`` far left, ``G(u) = u`` far right and
``0 <= G' <= 1``. Two families are provided:

* shape-constrained cubic smoothing splines on ``[-1, 1]``, fitted once by a
  small QP and then translated and rescaled;
* density smoothers ``G(u) = integral of the kernel CDF``, in closed form.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import PPoly
from scipy.special import ndtr

from ._qp import solve_qp
from .exceptions import ConfigurationError, SolverError
from .superhedge import ConvexPayoff

DEFAULT_N = 10
REFERENCE_H = 10.0
REFERENCE_K = 100.0
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def smoothing_weight(h: float) -> float:
    """Roughness penalty weight; equals 1 at ``h = 10``."""
    return (0.1 * h) ** 3


class _ScaledPayoff:
    """Payoff ``h * shape((x - k) / h)`` with asymptotic slope 1."""

    asymptotic_slope = 1.0

    def __init__(self, shape, k: float, h: float):
        if not h > 0:
            raise ConfigurationError(f"h must be > 0, got {h}", field="h")
        self.shape = shape
        self.k = float(k)
        self.h = float(h)

    def eval(self, x):
        return self.h * self.shape.value((np.asarray(x, dtype=float) - self.k) / self.h)

    def deriv(self, x):
        return self.shape.d1((np.asarray(x, dtype=float) - self.k) / self.h)

    def second_deriv(self, x):
        return self.shape.d2((np.asarray(x, dtype=float) - self.k) / self.h) / self.h

    def __call__(self, x):
        return self.eval(x)

    def as_convex_payoff(self) -> ConvexPayoff:
        return ConvexPayoff(self.eval, self.deriv, self.second_deriv, 1.0, repr(self))

    def __add__(self, other):
        other = other.as_convex_payoff() if hasattr(other, "as_convex_payoff") else other
        return self.as_convex_payoff() + other

    def scale(self, c: float) -> ConvexPayoff:
        return self.as_convex_payoff().scale(c)

    def breakpoints(self) -> np.ndarray:
        """Abscissae where ``g''`` has kinks (empty for smooth kernels)."""
        return self.k + self.h * self.shape.breakpoints()


# ---------------------------------------------------------------- splines


@dataclass(frozen=True, eq=False)
class SplineShape:
    """Normalized spline shape on ``[-1, 1]`` with piecewise-linear ``G''``."""

    knots: np.ndarray  # u_0 = -1 < ... < u_N = 1
    second: np.ndarray  # G'' at the knots, zero at both ends

    def __post_init__(self):
        u = np.asarray(self.knots, dtype=float)
        s = np.asarray(self.second, dtype=float)
        coeffs = np.vstack([np.diff(s) / np.diff(u), s[:-1]])
        p2 = PPoly(coeffs, u, extrapolate=False)
        object.__setattr__(self, "_p2", p2)
        object.__setattr__(self, "_p1", p2.antiderivative(1))
        object.__setattr__(self, "_p0", p2.antiderivative(2))

    def value(self, u):
        u = np.asarray(u, dtype=float)
        inside = self._p0(np.clip(u, -1.0, 1.0))
        return np.where(u <= -1.0, 0.0, np.where(u >= 1.0, u, inside))

    def d1(self, u):
        u = np.asarray(u, dtype=float)
        inside = self._p1(np.clip(u, -1.0, 1.0))
        return np.where(u <= -1.0, 0.0, np.where(u >= 1.0, 1.0, inside))

    def d2(self, u):
        u = np.asarray(u, dtype=float)
        inside = self._p2(np.clip(u, -1.0, 1.0))
        return np.where((u <= -1.0) | (u >= 1.0), 0.0, inside)

    def breakpoints(self) -> np.ndarray:
        return np.asarray(self.knots, dtype=float)


class SplinePayoff(_ScaledPayoff):
    """Shape-constrained cubic smoothing spline of ``(x - k)+`` on ``[k - h, k + h]``."""

    @property
    def N(self) -> int:
        return self.shape.knots.size - 1

    @property
    def knots(self) -> np.ndarray:
        return self.k + self.h * self.shape.knots

    @property
    def values(self) -> np.ndarray:
        return self.eval(self.knots)

    @property
    def second_derivs(self) -> np.ndarray:
        return self.shape.second / self.h

    def __repr__(self):
        return f"SplinePayoff(k={self.k:g}, h={self.h:g}, N={self.N})"


def _cube(y):
    return np.maximum(y, 0.0) ** 3 / 6.0


def spline_design(N: int, h: float):
    """Local knots ``t``, hat centers, value map and roughness Gram matrix.

    ``g''`` is a combination of hat functions at the interior knots, so the
    spline is cubic between knots and satisfies ``g = g' = 0`` at ``-h``
    automatically. ``values[i, j]`` is the value at ``t_i`` of the spline with
    ``g''`` equal to hat ``j``.
    """
    t = -h + 2.0 * h * np.arange(N + 1) / N
    step = 2.0 * h / N
    centers = t[1:-1]
    diff = t[:, None] - centers[None, :]
    values = (_cube(diff + step) - 2.0 * _cube(diff) + _cube(diff - step)) / step
    n = N - 1
    gram = step * (np.eye(n) * (2.0 / 3.0) + (np.eye(n, k=1) + np.eye(n, k=-1)) / 6.0)
    return t, centers, values, gram, step


def fit_reference_spline(
    N: int = DEFAULT_N,
    h0: float = REFERENCE_H,
    k0: float = REFERENCE_K,
    max_iter: int = 500,
) -> SplinePayoff:
    """Fit the penalized spline approximation of ``(x - k0)+`` on ``[k0 - h0, k0 + h0]``.

    Minimizes the squared misfit at the ``N + 1`` knots plus
    ``smoothing_weight(h0) * integral (g'')^2`` subject to ``g'' >= 0``,
    ``g'(k0 + h0) = 1`` and ``g(k0 + h0) = h0``.
    """
    if int(N) != N or N < 2:
        raise ConfigurationError(f"N must be an integer >= 2, got {N}", field="N")
    if not h0 > 0:
        raise ConfigurationError(f"h0 must be > 0, got {h0}", field="h0")
    N = int(N)
    t, centers, V, R, step = spline_design(N, h0)
    target = np.maximum(t, 0.0)
    lam = smoothing_weight(h0)
    H = 2.0 * (V.T @ V + lam * R)
    c = -2.0 * V.T @ target
    A = np.vstack([np.full(N - 1, step), step * centers])
    a = np.array([1.0, 0.0])
    C = np.eye(N - 1)
    d = np.zeros(N - 1)
    res = solve_qp(H, c, A, a, C, d, max_iter=max_iter)
    m = np.maximum(res.x, 0.0)
    second = np.r_[0.0, m, 0.0] * h0  # G''(u) = h0 * g''(k0 + h0 u)
    shape = SplineShape(t / h0, second)
    _check_shape(shape, res.iterations)
    return SplinePayoff(shape, k0, h0)


def _check_shape(shape: SplineShape, iterations: int, tol: float = 1e-9):
    u = np.linspace(-1.0, 1.0, 4001)
    g1 = shape.d1(u)
    if g1.min() < -tol or g1.max() > 1.0 + tol or abs(shape.value(1.0 - 1e-15) - 1.0) > 1e-9:
        raise SolverError(
            "fitted spline violates its shape constraints",
            iterations=iterations,
            diagnostics={"min_deriv": float(g1.min()), "max_deriv": float(g1.max())},
        )


def spline_payoff(ref: SplinePayoff, k: float, h: float) -> SplinePayoff:
    """Translate and rescale a fitted reference spline to strike ``k`` and half-width ``h``."""
    return SplinePayoff(ref.shape, k, h)


# ---------------------------------------------------------------- kernels


@dataclass(frozen=True)
class Kernel:
    """Zero-mean probability density with CDF and partial first moment."""

    name: str
    pdf: Callable
    cdf: Callable
    partial_moment: Callable  # z -> integral_{-inf}^{z} u pdf(u) du


def _normal_pdf(z):
    z = np.asarray(z, dtype=float)
    return _INV_SQRT_2PI * np.exp(-0.5 * z * z)


KERNELS: dict[str, Kernel] = {
    "normal": Kernel("normal", _normal_pdf, ndtr, lambda z: -_normal_pdf(z)),
}


def register_kernel(kernel: Kernel) -> None:
    KERNELS[kernel.name] = kernel


@dataclass(frozen=True)
class KernelShape:
    kernel: Kernel

    def value(self, u):
        u = np.asarray(u, dtype=float)
        return u * self.kernel.cdf(u) - self.kernel.partial_moment(u)

    def d1(self, u):
        return self.kernel.cdf(np.asarray(u, dtype=float))

    def d2(self, u):
        return self.kernel.pdf(np.asarray(u, dtype=float))

    def breakpoints(self) -> np.ndarray:
        return np.zeros(0)


class DensityPayoff(_ScaledPayoff):
    """Kernel smoother ``h * integral_{-inf}^{(x-k)/h} Phi`` of ``(x - k)+``."""

    @property
    def kernel(self) -> Kernel:
        return self.shape.kernel

    def __repr__(self):
        return f"DensityPayoff(k={self.k:g}, h={self.h:g}, kernel={self.kernel.name})"


def get_kernel(name: str) -> Kernel:
    try:
        return KERNELS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown kernel {name!r}; known: {sorted(KERNELS)}", field="kernel"
        ) from None


def density_payoff(k: float, h: float, kernel: str = "normal") -> DensityPayoff:
    return DensityPayoff(KernelShape(get_kernel(kernel)), k, h)


def warn_small_strike(k, h: float):
    """Spline smoothers of strikes below ``h`` do not vanish at 0."""
    if np.any(np.asarray(k) < h):
        warnings.warn(f"strike below h={h:g}: smoothed payoff does not vanish at 0", stacklevel=3)
