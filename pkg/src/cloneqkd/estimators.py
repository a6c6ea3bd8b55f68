"""scikit-learn style wrappers around the analysis pipeline.

These follow the estimator conventions (constructor stores
hyper-parameters verbatim, ``fit`` returns ``self`` and sets trailing
underscore attributes) so they compose with ``get_params``/``set_params``,
``clone`` and pipelines.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_array
from sklearn.utils.validation import check_consistent_length, check_is_fitted

from .protocols import get_protocol
from .security import GRID_STEP, KEY_RATE_TOL, evaluate_grid, optimize_attack, privacy_bound
from .tomography import CountRecord, CountSet, _Likelihood, ml_reconstruct

METRIC_NAMES = ("qber", "i_ab", "i_ae", "i_be", "key_rate")


def _check_unit_square(X):
    X = check_array(X, dtype=float)
    if X.shape[1] != 2:
        raise ValueError(f"expected columns (p, lambda2), got {X.shape[1]} columns")
    if np.any((X < 0) | (X > 1)):
        raise ValueError("p and lambda2 must lie in [0, 1]")
    return X


class AttackOptimizer(BaseEstimator):
    """Find the cloner settings that maximize I(A;B) at zero key rate.

    Parameters
    ----------
    protocol : {"bb84", "r04"}
    grid_step : float
        Coarse grid spacing in p and Lambda^2.
    tol : float
        Tolerance on |key_rate| at the returned settings.

    Attributes
    ----------
    params_ : ClonerParams
    report_ : SecurityReport
    privacy_qber_ : float
        Smallest QBER on the I(A;B) = I(A;E) curve.
    """

    def __init__(self, protocol="bb84", grid_step=GRID_STEP, tol=KEY_RATE_TOL):
        self.protocol = protocol
        self.grid_step = grid_step
        self.tol = tol

    def fit(self, X=None, y=None):
        get_protocol(self.protocol)
        if not 0 < self.grid_step <= 0.5:
            raise ValueError("grid_step must lie in (0, 0.5]")
        self.params_, self.report_ = optimize_attack(self.protocol, self.grid_step, self.tol)
        self.privacy_qber_, self.privacy_params_ = privacy_bound(self.protocol, self.grid_step)
        return self

    def predict(self, X=None):
        """The optimal (p, Lambda^2) as a 1x2 array."""
        check_is_fitted(self, "params_")
        return np.array([[self.params_.p, self.params_.lambda2]])


class SecurityMapper(TransformerMixin, BaseEstimator):
    """Map rows of (p, Lambda^2) to (qber, i_ab, i_ae, i_be, key_rate)."""

    def __init__(self, protocol="bb84"):
        self.protocol = protocol

    def fit(self, X=None, y=None):
        self.protocol_ = get_protocol(self.protocol)
        if X is not None:
            _check_unit_square(X)
        self.n_features_in_ = 2
        return self

    def transform(self, X):
        check_is_fitted(self, "protocol_")
        X = _check_unit_square(X)
        return np.column_stack(evaluate_grid(self.protocol_, X[:, 0], X[:, 1]))

    def get_feature_names_out(self, input_features=None):
        return np.array(METRIC_NAMES, dtype=object)


def _check_kets(X):
    # check_array rejects complex input, so validate by hand
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2 or X.shape[1] != 4:
        raise ValueError(f"projectors must have shape (n, 4), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("projectors contain NaN or infinity")
    norms = np.linalg.norm(X, axis=1)
    if np.any(np.abs(norms - 1) > 1e-10):
        raise ValueError("projector kets must be normalized")
    return X


class MLTomography(BaseEstimator):
    """Maximum-likelihood two-qubit state estimator.

    ``fit(X, y)`` takes projector kets ``X`` of shape (n, 4) and observed
    counts ``y`` of shape (n,).

    Attributes
    ----------
    density_matrix_ : ndarray, shape (4, 4)
    result_ : MLResult
    """

    def __init__(self, max_iter=5000, tol=1e-10):
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        X = _check_kets(X)
        y = check_array(np.asarray(y), ensure_2d=False, dtype=float)
        check_consistent_length(X, y)
        if np.any(y < 0):
            raise ValueError("counts must be non-negative")
        records = [CountRecord(None, k, float("nan"), n) for k, n in zip(X, y)]
        self.result_ = ml_reconstruct(CountSet(records), max_iter=self.max_iter, tol=self.tol)
        self.density_matrix_ = self.result_.rho
        return self

    def predict(self, X):
        """Outcome probabilities <pi|rho|pi> for projector kets ``X``."""
        check_is_fitted(self, "density_matrix_")
        X = _check_kets(X)
        return np.einsum("ki,ij,kj->k", X.conj(), self.density_matrix_, X).real

    def score(self, X, y):
        """Mean log-likelihood per count of ``y`` under the fitted state."""
        check_is_fitted(self, "density_matrix_")
        X = _check_kets(X)
        y = check_array(np.asarray(y), ensure_2d=False, dtype=float)
        check_consistent_length(X, y)
        return _Likelihood(X, y)(self.density_matrix_)
