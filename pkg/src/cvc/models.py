"""Built-in fitting procedures: subset least squares and a coordinate-descent
lasso with a log-spaced penalty path.

The lasso solves ``(2n)^{-1} ||y - b0 - X b||^2 + lam * ||b||_1`` on
internally standardized columns with an unpenalized intercept, and returns
coefficients on the original scale.  ``lambda_max = ||n^{-1} X~' y~||_inf``
on that standardized problem is the smallest penalty with an all-zero
solution.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import LambdaSpec, SubsetSpec
from .errors import ConfigError, DegenerateInputError, FitError

__all__ = [
    "LinearModel",
    "LambdaPath",
    "fit_ols_subset",
    "fit_lasso",
    "fit_lasso_grid",
    "lasso_path",
    "lasso_max_lambda",
    "kkt_violation",
    "population_risk",
    "ols_subset_fitter",
    "lasso_path_fitter",
]

_GRAM_CONDITION_LIMIT = 1e12
_LASSO_TOL = 1e-7
_LASSO_MAX_SWEEPS = 100_000


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Linear predictor with coefficients embedded in the full feature space.

    Subset fits have zeros exactly off the selected columns; lasso fits
    carry the unpenalized intercept and convergence metadata.
    """

    coefficients: np.ndarray
    intercept: float
    spec: object | None = None
    iterations: int = 0
    converged: bool = True

    def __post_init__(self):
        coef = np.ascontiguousarray(self.coefficients, dtype=np.float64)
        if coef.ndim != 1 or not np.isfinite(coef).all():
            raise FitError("coefficients must be a finite 1-d vector")
        coef.setflags(write=False)
        object.__setattr__(self, "coefficients", coef)

    def predict(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.coefficients + self.intercept

    @property
    def nonzero_count(self) -> int:
        return int(np.count_nonzero(self.coefficients))


@dataclass(frozen=True, eq=False)
class LambdaPath:
    """Strictly decreasing, log-equally-spaced penalty grid."""

    values: np.ndarray
    lambda_max: float
    ratio: float

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 2:
            raise ConfigError("a penalty path needs at least two values")
        if not (v > 0).all() or (np.diff(v) >= 0).any():
            raise ConfigError("path values must be positive and strictly decreasing")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def K(self) -> int:
        return self.values.size


def fit_ols_subset(X, y, subset) -> LinearModel:
    """Exact least squares on the selected columns; zeros elsewhere.

    The design is used as-is: models that need an intercept include a
    constant column in the design and list its index in the subset.  The
    empty subset fits the response mean (stored as the intercept).

    Parameters
    ----------
    X, y : array_like
        Training design (n, p) and response (n,).
    subset : SubsetSpec or sequence of int
        Columns to regress on.

    Returns
    -------
    LinearModel

    Raises
    ------
    FitError
        If there are too few rows or the Gram matrix on the subset is
        singular / ill-conditioned (condition number >= 1e12).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    spec = subset if isinstance(subset, SubsetSpec) else SubsetSpec(tuple(subset))
    idx = list(spec.indices)
    if idx and idx[-1] >= X.shape[1]:
        raise ConfigError(f"subset index {idx[-1]} out of range for p={X.shape[1]}")
    n, k = X.shape[0], len(idx)
    if n < k + 1:
        raise FitError(f"need at least {k + 1} training rows for a {k}-column fit, got {n}")
    coef = np.zeros(X.shape[1])
    intercept = 0.0
    if k:
        A = X[:, idx]
        cond = np.linalg.cond(A.T @ A)
        if not np.isfinite(cond) or cond >= _GRAM_CONDITION_LIMIT:
            raise FitError(f"singular or ill-conditioned design on columns {idx} (cond ~ {cond:.3g})")
        beta, *_ = np.linalg.lstsq(A, y, rcond=None)
        coef[idx] = beta
    else:
        intercept = float(y.mean())
    return LinearModel(coefficients=coef, intercept=intercept, spec=spec)


def _standardize_columns(X, y):
    """Center and unit-scale columns (population sd); zero-variance columns
    are dropped from the penalized problem with their coefficient pinned at 0."""
    means = X.mean(axis=0)
    Xc = X - means
    scales = np.sqrt(np.mean(Xc * Xc, axis=0))
    usable = scales > 0
    Xs = np.zeros_like(Xc)
    Xs[:, usable] = Xc[:, usable] / scales[usable]
    y_mean = float(y.mean())
    return Xs, y - y_mean, means, scales, usable, y_mean


def _soft_threshold(z: float, lam: float) -> float:
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0


def _sweep(Xs, r, b, lam, n, cols) -> float:
    """One coordinate-descent pass over ``cols``; returns the largest update."""
    max_delta = 0.0
    for j in cols:
        xj = Xs[:, j]
        old = b[j]
        rho = (xj @ r) / n + old
        new = _soft_threshold(rho, lam)
        if new != old:
            step = new - old
            r -= step * xj
            b[j] = new
            if abs(step) > max_delta:
                max_delta = abs(step)
    return max_delta


def fit_lasso(X, y, lam, *, warm_start=None, tol=_LASSO_TOL, max_sweeps=_LASSO_MAX_SWEEPS) -> LinearModel:
    """Coordinate-descent lasso fit at one penalty level.

    Solves ``(2n)^{-1} ||y - b0 - X b||^2 + lam ||b||_1`` with the design
    standardized internally and the intercept unpenalized; returned
    coefficients are on the original scale.  Sweeps alternate between the
    full coordinate set and the current active set until the largest
    standardized-coefficient update drops below ``tol``.

    Parameters
    ----------
    X, y : array_like
    lam : float
        Penalty level, >= 0 (0 recovers least squares).
    warm_start : array_like, optional
        Original-scale coefficients to start from.

    Returns
    -------
    LinearModel
        With ``iterations`` counting sweeps; ``converged=False`` (plus a
        warning) if the sweep budget is exhausted.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    lam = float(lam)
    if not math.isfinite(lam) or lam < 0:
        raise ConfigError(f"penalty must be finite and >= 0, got {lam}")
    Xs, yc, means, scales, usable, y_mean = _standardize_columns(X, y)
    n, p = Xs.shape
    b = np.zeros(p)
    if warm_start is not None:
        warm = np.asarray(warm_start, dtype=float)
        if warm.shape != (p,):
            raise ConfigError(f"warm start must have shape ({p},), got {warm.shape}")
        b[usable] = warm[usable] * scales[usable]
    r = yc - Xs @ b
    cols = np.flatnonzero(usable)
    iterations = 0
    converged = False
    while iterations < max_sweeps:
        delta = _sweep(Xs, r, b, lam, n, cols)
        iterations += 1
        if delta < tol:
            converged = True
            break
        while iterations < max_sweeps:
            active = cols[b[cols] != 0]
            if active.size == 0:
                break
            delta = _sweep(Xs, r, b, lam, n, active)
            iterations += 1
            if delta < tol:
                break
    if not converged:
        warnings.warn(
            f"lasso did not converge at lam={lam:.6g} after {iterations} sweeps",
            RuntimeWarning,
            stacklevel=2,
        )
    coef = np.zeros(p)
    coef[usable] = b[usable] / scales[usable]
    intercept = y_mean - float(means @ coef)
    return LinearModel(
        coefficients=coef,
        intercept=intercept,
        spec=LambdaSpec(lam),
        iterations=iterations,
        converged=converged,
    )


def fit_lasso_grid(X, y, lambdas) -> list[LinearModel]:
    """Fit a penalty grid with warm starts from larger to smaller values.

    Results are returned in the order of ``lambdas`` regardless of the
    internal fitting order.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    order = np.argsort(-lambdas, kind="stable")
    fits: list[LinearModel | None] = [None] * lambdas.size
    warm = None
    for pos in order:
        model = fit_lasso(X, y, lambdas[pos], warm_start=warm)
        fits[pos] = model
        warm = model.coefficients
    return fits  # type: ignore[return-value]


def lasso_max_lambda(X, y) -> float:
    """Smallest penalty with an all-zero solution on the standardized problem."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    Xs, yc, *_ = _standardize_columns(X, y)
    if Xs.shape[1] == 0:
        return 0.0
    return float(np.abs(Xs.T @ yc).max() / Xs.shape[0])


def lasso_path(X, y, K: int = 50, ratio: float = 1e-3) -> LambdaPath:
    """Log-equally-spaced decreasing penalty grid from ``lambda_max`` down.

    Raises
    ------
    DegenerateInputError
        If the centered response carries no signal (``lambda_max`` is 0),
        e.g. an all-zero or constant response.
    """
    if K < 2:
        raise ConfigError(f"path length must be >= 2, got {K}")
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"path ratio must lie in (0, 1), got {ratio}")
    lam_max = lasso_max_lambda(X, y)
    if lam_max <= 0.0:
        raise DegenerateInputError("response carries no signal; penalty path is degenerate")
    values = np.geomspace(lam_max, ratio * lam_max, num=K)
    return LambdaPath(values=values, lambda_max=lam_max, ratio=ratio)


def kkt_violation(model: LinearModel, X, y, lam: float | None = None) -> float:
    """Max stationarity violation of the penalized objective at ``model``.

    Evaluated on the internally standardized problem that coordinate
    descent solves: for zero coefficients the gradient must lie within
    ``[-lam, lam]``; for active ones it must equal ``lam * sign``.
    Converged fits satisfy this to roughly the solver tolerance.
    """
    if lam is None:
        if not isinstance(model.spec, LambdaSpec):
            raise ConfigError("pass lam explicitly for models without a penalty spec")
        lam = model.spec.value
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    Xs, yc, _, scales, usable, _ = _standardize_columns(X, y)
    n = Xs.shape[0]
    b = np.where(usable, model.coefficients * scales, 0.0)
    g = Xs.T @ (yc - Xs @ b) / n
    viol = 0.0
    for j in np.flatnonzero(usable):
        if b[j] == 0.0:
            viol = max(viol, abs(g[j]) - lam)
        else:
            viol = max(viol, abs(g[j] - lam * math.copysign(1.0, b[j])))
    return max(viol, 0.0)


def population_risk(beta_hat, beta, Sigma, noise_var: float = 1.0) -> float:
    """Exact predictive risk of a linear coefficient vector.

    For ``y = x' beta + eps`` with ``Cov(x) = Sigma`` (mean-zero design)
    and noise variance ``noise_var``, the squared-error risk of predicting
    with ``beta_hat`` is ``(beta_hat - beta)' Sigma (beta_hat - beta) +
    noise_var``.  ``Sigma`` must be symmetric positive semidefinite.
    """
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta = np.asarray(beta, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    if beta_hat.shape != beta.shape or beta_hat.ndim != 1:
        raise ConfigError("coefficient vectors must be 1-d with matching shapes")
    if Sigma.shape != (beta.size, beta.size):
        raise ConfigError(f"Sigma must be ({beta.size}, {beta.size}), got {Sigma.shape}")
    if not np.allclose(Sigma, Sigma.T, atol=1e-10):
        raise ConfigError("Sigma must be symmetric")
    if noise_var <= 0:
        raise ConfigError(f"noise variance must be positive, got {noise_var}")
    d = beta_hat - beta
    return float(d @ Sigma @ d + noise_var)


def ols_subset_fitter(X, y, candidates) -> list[LinearModel]:
    """Batch fitter: exact least squares per subset candidate."""
    out = []
    for cand in candidates:
        try:
            out.append(fit_ols_subset(X, y, cand.spec))
        except FitError as err:
            raise FitError(str(err), candidate_id=cand.id, fold=err.fold) from err
    return out


def lasso_path_fitter(X, y, candidates) -> list[LinearModel]:
    """Batch fitter: warm-started coordinate descent across a penalty grid."""
    return fit_lasso_grid(X, y, [cand.spec.value for cand in candidates])
