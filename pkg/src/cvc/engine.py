"""Pipeline orchestration: loss matrices across folds, p-values across
candidates, and the confidence-set / selection rules built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    CandidateModel,
    Dataset,
    FoldPlan,
    LambdaSpec,
    LossMatrix,
    SubsetSpec,
    diff_stats,
    make_folds,
    make_split,
    squared_loss,
)
from .errors import ConfigError, FitError
from .testing import PValueRecord, ScreenSet, inequality_screen, keep_all, multiplier_bootstrap

__all__ = [
    "CvcConfig",
    "CvcResult",
    "compute_loss_matrix",
    "cv_select",
    "cvc_from_losses",
    "cvc_run",
    "most_parsimonious",
    "one_se_rule",
    "rescale_lambda",
]


@dataclass(frozen=True)
class CvcConfig:
    """Tuning for a confidence-set run.

    Defaults are the reference settings: 5 folds, level 0.05, screening
    at 0.005 (= alpha/10), and 200 bootstrap replicates.  ``mode`` is
    ``"vfold"`` or ``"split"`` (single train/test split using
    ``train_fraction``).
    """

    V: int = 5
    alpha: float = 0.05
    alpha_prime: float = 0.005
    B: int = 200
    seed: int = 0
    mode: str = "vfold"
    train_fraction: float = 0.5
    screen: bool = True

    def __post_init__(self):
        if not 0.0 < self.alpha < 0.5:
            raise ConfigError(f"alpha must lie in (0, 0.5), got {self.alpha}")
        if not 0.0 < self.alpha_prime < 1.0:
            raise ConfigError(f"alpha_prime must lie in (0, 1), got {self.alpha_prime}")
        if self.B < 1:
            raise ConfigError(f"B must be >= 1, got {self.B}")
        if self.mode not in ("vfold", "split"):
            raise ConfigError(f"mode must be 'vfold' or 'split', got {self.mode!r}")
        if self.mode == "vfold" and self.V < 2:
            raise ConfigError(f"V must be >= 2 in vfold mode, got {self.V}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if self.seed < 0:
            raise ConfigError(f"seed must be nonnegative, got {self.seed}")


@dataclass(frozen=True, eq=False)
class CvcResult:
    """Everything a confidence-set run produces.

    ``confidence_set`` lists the candidates whose p-value is at least
    alpha; when that set would be empty (possible only at small B), it
    falls back to the plain cross-validation choice and ``fallback_used``
    is set.
    """

    pvalues: tuple[PValueRecord, ...]
    confidence_set: tuple[int, ...]
    cv_choice: int
    parsimonious_choice: int | None
    loss_means: np.ndarray
    fallback_used: bool = False
    loss_matrix: LossMatrix | None = None

    def p_value(self, candidate_id: int) -> float:
        for rec in self.pvalues:
            if rec.focal == candidate_id:
                return rec.p_value
        raise ConfigError(f"no p-value recorded for candidate {candidate_id}")


def _check_candidates(candidates) -> None:
    ids = [c.id for c in candidates]
    if not ids:
        raise ConfigError("need at least one candidate")
    if ids != list(range(len(ids))):
        raise ConfigError("candidate ids must be 0..M-1 in list order")


def _score(model, X, y, loss, candidate_id, fold=None) -> np.ndarray:
    try:
        vals = np.asarray(loss(model.predict(X), y), dtype=float)
    except FitError:
        raise
    except Exception as err:
        raise FitError(f"scoring candidate {candidate_id} failed: {err}", candidate_id, fold) from err
    if vals.shape != y.shape:
        raise FitError(f"candidate {candidate_id} produced {vals.shape} losses for {y.shape} rows", candidate_id, fold)
    if not np.isfinite(vals).all() or (vals < 0).any():
        raise FitError(f"candidate {candidate_id} produced invalid (non-finite or negative) losses", candidate_id, fold)
    return vals


def _fit_batch(fitter, X, y, candidates, fold=None):
    try:
        models = fitter(X, y, candidates)
    except FitError as err:
        if err.fold is None:
            err.fold = fold
        raise
    models = list(models)
    if len(models) != len(candidates):
        raise FitError(f"fitter returned {len(models)} models for {len(candidates)} candidates", fold=fold)
    return models


def compute_loss_matrix(data: Dataset, candidates, plan: FoldPlan, fitter, loss=squared_loss) -> LossMatrix:
    """Cross-validated per-sample losses: entry ``(i, k)`` scores candidate
    ``k``'s fit-on-the-complement prediction at row ``i``.

    The fitter is called once per training complement with the full
    candidate list and must return one predictor (anything with a
    ``predict(X)`` method) per candidate, in order.  In sample-split mode
    (``plan.V == 1``) the single fit uses ``plan.train_indices`` and rows
    are the test points.

    Raises
    ------
    FitError
        From the fitter or scoring, annotated with candidate id and fold.
    """
    _check_candidates(candidates)
    X, y = data.X, data.y
    M = len(candidates)
    if plan.V == 1:
        if plan.train_indices is None or plan.test_indices is None:
            raise ConfigError("sample-split plans need explicit train/test indices")
        models = _fit_batch(fitter, X[plan.train_indices], y[plan.train_indices], candidates)
        X_te, y_te = X[plan.test_indices], y[plan.test_indices]
        values = np.empty((plan.n, M))
        for k, model in enumerate(models):
            values[:, k] = _score(model, X_te, y_te, loss, candidates[k].id)
    else:
        if plan.n != data.n:
            raise ConfigError(f"plan covers {plan.n} rows but the dataset has {data.n}")
        values = np.empty((data.n, M))
        for v in range(plan.V):
            te = plan.assignment == v
            tr = ~te
            models = _fit_batch(fitter, X[tr], y[tr], candidates, fold=v)
            for k, model in enumerate(models):
                values[te, k] = _score(model, X[te], y[te], loss, candidates[k].id, fold=v)
    return LossMatrix(values=values, plan=plan, candidate_ids=tuple(c.id for c in candidates))


def cv_select(L: LossMatrix) -> int:
    """Standard cross-validation choice: the candidate with the smallest
    mean validated loss, ties going to the smallest id."""
    means = L.column_means()
    return int(L.candidate_ids[int(np.argmin(means))])


def _typed_specs(candidates) -> bool:
    return all(isinstance(c.spec, (SubsetSpec, LambdaSpec)) for c in candidates)


def most_parsimonious(result: CvcResult, candidates) -> int:
    """Most parsimonious candidate inside the confidence set.

    Subset candidates: smallest subset, ties to the smallest id.  Penalty
    candidates: largest penalty (the most regularized fit), ties to the
    smallest id.
    """
    if not result.confidence_set:
        raise ConfigError("confidence set is empty")
    chosen = set(result.confidence_set)
    members = [c for c in candidates if c.id in chosen]
    if not members:
        raise ConfigError("no candidate matches the confidence set")
    spec_types = {type(c.spec) for c in members}
    if spec_types == {SubsetSpec}:
        return min(members, key=lambda c: (c.spec.size, c.id)).id
    if spec_types == {LambdaSpec}:
        return max(members, key=lambda c: (c.spec.value, -c.id)).id
    raise ConfigError("parsimony needs candidates that are all subsets or all penalty levels")


def cvc_from_losses(L: LossMatrix, config: CvcConfig, candidates=None) -> CvcResult:
    """Confidence set and per-candidate p-values from an existing loss matrix.

    For each candidate: build the difference statistics, screen rivals
    (unless disabled), and bootstrap a p-value; an empty screened set
    means the candidate is evidently best and gets p = 1.  With a single
    candidate the hypotheses are vacuous (p = 1).
    """
    records: list[PValueRecord] = []
    if L.M == 1:
        only = L.candidate_ids[0]
        screen = ScreenSet(focal=only, kept=(), threshold=-math.inf, skipped=True)
        records.append(PValueRecord(only, None, 1.0, config.B, screen, config.seed))
    else:
        for m in L.candidate_ids:
            d = diff_stats(L, m)
            s = inequality_screen(d, config.alpha_prime) if config.screen else keep_all(d)
            if not s.kept:
                records.append(PValueRecord(m, None, 1.0, config.B, s, config.seed))
            else:
                records.append(multiplier_bootstrap(d, s, config.B, config.seed))
    confidence = tuple(r.focal for r in records if r.p_value >= config.alpha)
    cv_choice = cv_select(L)
    fallback = False
    if not confidence:
        confidence = (cv_choice,)
        fallback = True
    result = CvcResult(
        pvalues=tuple(records),
        confidence_set=confidence,
        cv_choice=cv_choice,
        parsimonious_choice=None,
        loss_means=L.column_means(),
        fallback_used=fallback,
        loss_matrix=L,
    )
    if candidates is not None and _typed_specs(candidates):
        result = replace(result, parsimonious_choice=most_parsimonious(result, candidates))
    return result


def cvc_run(data: Dataset, candidates, config: CvcConfig, fitter, loss=squared_loss) -> CvcResult:
    """Full pipeline: fold plan, loss matrix, p-values, selection rules."""
    if config.mode == "split":
        plan = make_split(data.n, config.train_fraction, config.seed)
    else:
        plan = make_folds(data.n, config.V, config.seed)
    L = compute_loss_matrix(data, candidates, plan, fitter, loss)
    return cvc_from_losses(L, config, candidates)


def one_se_rule(L: LossMatrix, candidates) -> int:
    """Most-regularized candidate within one standard error of the CV minimum.

    The standard error is the ddof-1 standard deviation of the V fold-mean
    losses at the minimizing candidate divided by sqrt(V); the rule
    returns the largest penalty whose mean loss is within that band.
    """
    _check_candidates(candidates)
    if not all(isinstance(c.spec, LambdaSpec) for c in candidates):
        raise ConfigError("the one-standard-error rule needs penalty-level candidates")
    if L.plan.V < 2:
        raise ConfigError("the one-standard-error rule needs V-fold losses")
    means = L.column_means()
    best = int(np.argmin(means))
    fold_means = np.array(
        [L.values[L.plan.assignment == v, best].mean() for v in range(L.plan.V)]
    )
    se = float(fold_means.std(ddof=1)) / math.sqrt(L.plan.V)
    band = means[best] + se
    eligible = [c for c, mean_loss in zip(candidates, means) if mean_loss <= band]
    return max(eligible, key=lambda c: (c.spec.value, -c.id)).id


def rescale_lambda(lambda_hat: float, V: int) -> float:
    """Shrink a cross-validated penalty for the full-sample refit.

    Fold fits train on ``n (1 - 1/V)`` rows while the final fit trains on
    all ``n``; good penalty levels scale like the inverse square root of
    the training size, so the refit uses ``sqrt(1 - 1/V) * lambda_hat``.
    """
    if lambda_hat < 0:
        raise ConfigError(f"penalty must be >= 0, got {lambda_hat}")
    if V < 2:
        raise ConfigError(f"V must be >= 2, got {V}")
    return float(math.sqrt(1.0 - 1.0 / V) * lambda_hat)
