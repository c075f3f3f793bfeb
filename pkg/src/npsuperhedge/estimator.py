"""Scikit-learn style wrapper around the smoothed superhedging CALL estimator."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .efficient_set import efficient_set, q0_at
from .exceptions import ConfigurationError
from .implied_measure import implied_survival, smooth_call_curve
from .quotes import QuoteCurve, mesh
from .smoothers import DEFAULT_N


def _as_strikes(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single strike column, got shape {X.shape}")
        X = X[:, 0]
    if X.ndim != 1:
        raise ValueError("strikes must be 1-d or a single column")
    if not np.all(np.isfinite(X)):
        raise ValueError("strikes must be finite")
    return X


class SuperhedgeCallEstimator(RegressorMixin, BaseEstimator):
    """Fit a smooth, convex, non-increasing CALL price function to ask quotes.

    Parameters
    ----------
    smoother : "spline" or a kernel name ("normal")
    delta : bandwidth in units of the strike mesh, used when ``h`` is None
    h : explicit half-width of the smoothing window
    n_knots : number of spline intervals ``N``
    """

    def __init__(self, smoother: str = "spline", delta: float = 5.0, h: float | None = None, n_knots: int = DEFAULT_N):
        self.smoother = smoother
        self.delta = delta
        self.h = h
        self.n_knots = n_knots

    def _validate_params(self):
        if self.h is None and not (self.delta is not None and self.delta > 0):
            raise ConfigurationError(f"delta must be > 0, got {self.delta}", field="delta")
        if self.h is not None and not self.h > 0:
            raise ConfigurationError(f"h must be > 0, got {self.h}", field="h")
        if int(self.n_knots) != self.n_knots or self.n_knots < 2:
            raise ConfigurationError("n_knots must be an integer >= 2", field="n_knots")

    def fit(self, X, y, spot: float | None = None):
        """``X``: strikes, ``y``: asks. The underlying enters as strike 0 or via ``spot``."""
        self._validate_params()
        strikes = _as_strikes(X)
        asks = np.asarray(y, dtype=float).ravel()
        if asks.shape != strikes.shape:
            raise ValueError("X and y have inconsistent lengths")
        curve = QuoteCurve.from_arrays(strikes, asks, spot=spot)
        eff = efficient_set(curve)
        self.quotes_ = curve
        self.efficient_curve_ = eff
        self.mesh_ = mesh(curve, eff)
        self.curve_ = smooth_call_curve(
            eff, self.smoother, delta=self.delta, h=self.h, mesh=self.mesh_, N=int(self.n_knots)
        )
        self.h_ = self.curve_.h
        self.b_ = self.curve_.b
        self.measure_ = implied_survival(self.curve_)
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "curve_")
        return np.asarray(self.curve_(_as_strikes(X)), dtype=float)

    def predict_piecewise_linear(self, X):
        check_is_fitted(self, "curve_")
        return np.asarray(q0_at(self.efficient_curve_, _as_strikes(X)), dtype=float)

    def survival(self, X):
        check_is_fitted(self, "curve_")
        return np.asarray(self.curve_.survival(_as_strikes(X)), dtype=float)

    def density(self, X):
        check_is_fitted(self, "curve_")
        return np.asarray(self.curve_.density(_as_strikes(X)), dtype=float)

    @property
    def efficient_mask_(self) -> np.ndarray:
        check_is_fitted(self, "curve_")
        return self.efficient_curve_.mask
