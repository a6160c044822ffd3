"""Domain types and fold/loss bookkeeping shared across the library.

Candidates, fold plans, cross-validated loss matrices, and the
per-candidate difference statistics the hypothesis tests consume.
All types are immutable after construction and every operation is a
pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, NoCompetitorsError

__all__ = [
    "SubsetSpec",
    "LambdaSpec",
    "CandidateModel",
    "FoldPlan",
    "LossMatrix",
    "DiffStats",
    "Dataset",
    "make_folds",
    "make_split",
    "squared_loss",
    "diff_stats",
]


@dataclass(frozen=True)
class SubsetSpec:
    """A variable-subset candidate: column indices of the design matrix.

    The fitted model uses exactly these columns.  Designs that need an
    intercept carry it as a constant column whose index appears in every
    subset; the empty subset denotes the mean-only model.
    """

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if idx and idx[0] < 0:
            raise ConfigError(f"subset indices must be nonnegative, got {idx}")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ConfigError(f"subset indices must be strictly increasing, got {idx}")

    @property
    def size(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class LambdaSpec:
    """A penalty-level candidate for a regularized fit."""

    value: float

    def __post_init__(self):
        v = float(self.value)
        object.__setattr__(self, "value", v)
        if not math.isfinite(v) or v < 0:
            raise ConfigError(f"penalty level must be finite and >= 0, got {self.value}")


@dataclass(frozen=True)
class CandidateModel:
    """One entry of the finite candidate set, identified by a dense id.

    ``spec`` is ``None`` for opaque candidates handled by a custom fitter.
    """

    id: int
    spec: SubsetSpec | LambdaSpec | None

    def __post_init__(self):
        if int(self.id) < 0:
            raise ConfigError(f"candidate id must be >= 0, got {self.id}")
        object.__setattr__(self, "id", int(self.id))


@dataclass(frozen=True, eq=False)
class FoldPlan:
    """Assignment of evaluation rows to folds.

    For ``V >= 2`` the plan covers all ``n`` rows of a dataset, with fold
    ids ``0..V-1``.  ``V == 1`` denotes sample-split mode: ``train_indices``
    and ``test_indices`` partition the parent dataset, and ``n`` counts the
    test rows only (a single evaluation group).
    """

    n: int
    V: int
    assignment: np.ndarray
    seed: int
    train_indices: np.ndarray | None = None
    test_indices: np.ndarray | None = None

    def __post_init__(self):
        a = np.ascontiguousarray(self.assignment, dtype=np.int64)
        if a.shape != (self.n,):
            raise ConfigError(f"assignment must have shape ({self.n},), got {a.shape}")
        object.__setattr__(self, "assignment", a)
        a.setflags(write=False)

    def fold_members(self, v: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == v)

    def fold_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.V)


def make_folds(n: int, V: int, seed: int) -> FoldPlan:
    """Randomly partition ``n`` rows into ``V`` balanced folds.

    When ``V`` does not divide ``n``, the first ``n mod V`` folds (after a
    seeded shuffle) receive one extra row, so fold sizes differ by at most
    one.  The assignment is a deterministic function of ``(n, V, seed)``.

    Parameters
    ----------
    n : int
        Number of rows to partition.
    V : int
        Number of folds, at least 2.
    seed : int
        Seed for the shuffling generator.

    Returns
    -------
    FoldPlan
    """
    if V < 2:
        raise ConfigError(f"V must be >= 2, got {V} (use make_split for a single split)")
    if n < V:
        raise ConfigError(f"need n >= V, got n={n}, V={V}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    base, extra = divmod(n, V)
    start = 0
    for v in range(V):
        stop = start + base + (1 if v < extra else 0)
        assignment[perm[start:stop]] = v
        start = stop
    return FoldPlan(n=n, V=V, assignment=assignment, seed=seed)


def make_split(n: int, train_fraction: float, seed: int) -> FoldPlan:
    """Single random train/test split, expressed as a one-group fold plan.

    The returned plan's ``n`` is the test-set size; ``train_indices`` and
    ``test_indices`` (both sorted) point into the parent dataset.
    """
    if n < 2:
        raise ConfigError(f"need at least 2 rows to split, got {n}")
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n_tr = min(max(int(round(n * train_fraction)), 1), n - 1)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    train = np.sort(perm[:n_tr])
    test = np.sort(perm[n_tr:])
    return FoldPlan(
        n=test.size,
        V=1,
        assignment=np.zeros(test.size, dtype=np.int64),
        seed=seed,
        train_indices=train,
        test_indices=test,
    )


def squared_loss(yhat, y):
    """Squared error ``(yhat - y)**2``, elementwise on arrays."""
    return np.square(np.asarray(yhat, dtype=float) - np.asarray(y, dtype=float))


@dataclass(frozen=True, eq=False)
class Dataset:
    """A fixed design matrix and response with standardization metadata.

    ``column_means``/``column_scales`` record the statistics used when the
    design was standardized and hold identity values (0, 1) otherwise.
    """

    X: np.ndarray
    y: np.ndarray
    standardized: bool = False
    column_means: np.ndarray | None = None
    column_scales: np.ndarray | None = None

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        if X.ndim != 2:
            raise DataError(f"X must be 2-d, got shape {X.shape}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise DataError(f"y must be 1-d with {X.shape[0]} entries, got shape {y.shape}")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise DataError("dataset contains non-finite entries")
        means = self.column_means
        scales = self.column_scales
        means = np.zeros(X.shape[1]) if means is None else np.ascontiguousarray(means, dtype=np.float64)
        scales = np.ones(X.shape[1]) if scales is None else np.ascontiguousarray(scales, dtype=np.float64)
        if means.shape != (X.shape[1],) or scales.shape != (X.shape[1],):
            raise DataError("column statistics must have one entry per column")
        for arr in (X, y, means, scales):
            arr.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "column_means", means)
        object.__setattr__(self, "column_scales", scales)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def standardize(self) -> "Dataset":
        """Center and scale each column to sample sd 1 (ddof=1).

        Zero-variance columns (e.g. an intercept column) are left as-is
        with identity statistics.  The response is not touched.
        """
        means = self.X.mean(axis=0)
        scales = self.X.std(axis=0, ddof=1) if self.n > 1 else np.zeros(self.p)
        keep = scales == 0
        means = np.where(keep, 0.0, means)
        scales = np.where(keep, 1.0, scales)
        return Dataset(
            X=(self.X - means) / scales,
            y=self.y,
            standardized=True,
            column_means=means,
            column_scales=scales,
        )


@dataclass(frozen=True, eq=False)
class LossMatrix:
    """Per-sample validated losses, one column per candidate.

    Entry ``(i, k)`` is the loss of candidate ``candidate_ids[k]`` at row
    ``i``, produced by a model fitted without row ``i``'s fold.
    """

    values: np.ndarray
    plan: FoldPlan
    candidate_ids: tuple[int, ...]

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise DataError(f"loss values must be 2-d, got shape {v.shape}")
        if v.shape[0] != self.plan.n:
            raise ConfigError(f"loss matrix has {v.shape[0]} rows but the plan covers {self.plan.n}")
        ids = tuple(int(i) for i in self.candidate_ids)
        if v.shape[1] != len(ids):
            raise ConfigError(f"loss matrix has {v.shape[1]} columns but {len(ids)} candidate ids")
        if not np.isfinite(v).all():
            raise DataError("loss matrix contains non-finite entries")
        if (v < 0).any():
            raise DataError("loss matrix contains negative entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "candidate_ids", ids)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def M(self) -> int:
        return self.values.shape[1]

    def column_means(self) -> np.ndarray:
        return self.values.mean(axis=0)


@dataclass(frozen=True, eq=False)
class DiffStats:
    """Fold-centered, scaled loss differences for one focal candidate.

    ``xi[i, k]`` is the loss of the focal candidate minus the loss of
    ``competitors[k]`` at row ``i``; ``centered`` removes the per-fold mean
    of each column, ``overall_means`` averages the fold means, and
    ``scales`` is the ddof-1 standard deviation of each centered column.
    ``degenerate_mask`` flags competitors with zero scale.
    """

    focal: int
    competitors: tuple[int, ...]
    xi: np.ndarray
    fold_means: np.ndarray
    overall_means: np.ndarray
    scales: np.ndarray
    centered: np.ndarray
    degenerate_mask: np.ndarray
    plan: FoldPlan

    @property
    def n(self) -> int:
        return self.xi.shape[0]


def diff_stats(L: LossMatrix, m: int) -> DiffStats:
    """Difference statistics of candidate ``m`` against every competitor.

    Computes, per competitor column: the raw per-sample loss differences,
    their within-fold means, the fold-centered residuals, the average of
    the fold means, and the sample standard deviation (ddof=1) of the
    centered column.  With a single group (sample-split plans) this
    reduces to plain mean/sd of the differences.

    Parameters
    ----------
    L : LossMatrix
    m : int
        Focal candidate id (column of ``L``).

    Returns
    -------
    DiffStats

    Raises
    ------
    NoCompetitorsError
        If ``L`` has a single column.
    """
    if L.M < 2:
        raise NoCompetitorsError("need at least two candidates to compare")
    if m not in L.candidate_ids:
        raise ConfigError(f"focal candidate {m} is not in the loss matrix")
    pos = L.candidate_ids.index(m)
    comp_pos = [k for k in range(L.M) if k != pos]
    competitors = tuple(L.candidate_ids[k] for k in comp_pos)
    xi = L.values[:, [pos]] - L.values[:, comp_pos]
    f = L.plan.assignment
    V = L.plan.V
    fold_means = np.empty((V, xi.shape[1]))
    for v in range(V):
        rows = f == v
        if not rows.any():
            raise ConfigError(f"fold {v} is empty")
        fold_means[v] = xi[rows].mean(axis=0)
    centered = xi - fold_means[f]
    overall_means = fold_means.mean(axis=0)
    scales = centered.std(axis=0, ddof=1)
    return DiffStats(
        focal=m,
        competitors=competitors,
        xi=xi,
        fold_means=fold_means,
        overall_means=overall_means,
        scales=scales,
        centered=centered,
        degenerate_mask=scales == 0.0,
        plan=L.plan,
    )
