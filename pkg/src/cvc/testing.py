"""Hypothesis-testing core: studentized max statistics, Gaussian multiplier
bootstrap p-values, and inequality screening of obviously inferior rivals.

Everything here is deterministic given the seed: the multiplier stream is
keyed by ``(seed, focal candidate)``, so p-values do not depend on the
order in which candidates are processed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .core import DiffStats
from .errors import ConfigError, DegenerateInputError

__all__ = [
    "ScreenSet",
    "PValueRecord",
    "keep_all",
    "studentized_ratios",
    "test_statistic",
    "multiplier_bootstrap",
    "inequality_screen",
    "psi1_diagnostic",
]

# Rows of multiplier draws generated per block; chunking bounds memory and,
# because blocks come sequentially from one stream, does not change results.
_BOOTSTRAP_CHUNK = 8192


@dataclass(frozen=True)
class ScreenSet:
    """Competitors retained for the bootstrap comparison of one candidate.

    ``threshold`` is the studentized-ratio cutoff actually applied; it is
    ``-inf`` when screening was skipped (every competitor kept).
    """

    focal: int
    kept: tuple[int, ...]
    threshold: float
    skipped: bool = False


@dataclass(frozen=True)
class PValueRecord:
    """Bootstrap p-value for one focal candidate.

    ``t_stat`` is ``None`` when every retained competitor was identical to
    the focal candidate (no contrast to test), and ``-inf``/``+inf`` when a
    zero-variance contrast makes the focal candidate dominant/dominated.
    """

    focal: int
    t_stat: float | None
    p_value: float
    B: int
    screen: ScreenSet
    seed: int


def keep_all(d: DiffStats) -> ScreenSet:
    """Screening bypass: every competitor stays in the comparison."""
    return ScreenSet(focal=d.focal, kept=d.competitors, threshold=-math.inf, skipped=True)


def studentized_ratios(d: DiffStats) -> np.ndarray:
    """``sqrt(n) * mean / scale`` per competitor, with zero-scale limits.

    A degenerate (zero-scale) column collapses to the limit of the ratio:
    ``+inf`` for a positive mean contrast (focal dominated pointwise),
    ``-inf`` for a negative one (focal dominates), ``0`` when the two
    candidates produced identical losses.
    """
    ratios = np.zeros(len(d.competitors))
    active = ~d.degenerate_mask
    ratios[active] = math.sqrt(d.n) * d.overall_means[active] / d.scales[active]
    pos = d.degenerate_mask & (d.overall_means > 0)
    neg = d.degenerate_mask & (d.overall_means < 0)
    ratios[pos] = math.inf
    ratios[neg] = -math.inf
    return ratios


def _kept_positions(d: DiffStats, s: ScreenSet) -> np.ndarray:
    index = {j: k for k, j in enumerate(d.competitors)}
    try:
        return np.array(sorted(index[j] for j in s.kept), dtype=np.int64)
    except KeyError as err:
        raise ConfigError(
            f"kept competitor {err.args[0]} is not a competitor of candidate {d.focal}"
        ) from None


def test_statistic(d: DiffStats, s: ScreenSet) -> float | None:
    """Max studentized mean contrast over the screened competitor set.

    Degenerate columns are resolved by their limits: an identical
    competitor is dropped from the max, a pointwise-better competitor
    forces ``+inf``, and a pointwise-worse one contributes ``-inf``.
    Returns ``None`` ("no contrast") when every kept competitor is
    identical to the focal candidate.
    """
    kept = _kept_positions(d, s)
    deg = d.degenerate_mask[kept]
    mu = d.overall_means[kept]
    if np.any(deg & (mu > 0)):
        return math.inf
    active = kept[~deg]
    if active.size:
        vals = math.sqrt(d.n) * d.overall_means[active] / d.scales[active]
        return float(vals.max())
    if np.any(deg & (mu < 0)):
        return -math.inf
    return None


def multiplier_bootstrap(d: DiffStats, s: ScreenSet, B: int, seed: int) -> PValueRecord:
    """Studentized Gaussian multiplier bootstrap p-value for one candidate.

    Each replicate draws one standard normal per sample — shared across
    competitors — and recomputes the max studentized contrast from the
    fold-centered differences:

        T*_b = max_j  n^{-1/2} sum_i  zeta_i * centered[i, j] / scale[j]

    over the kept, non-degenerate competitors.  The p-value is the
    fraction of replicates with ``T*_b`` strictly greater than the
    observed statistic, so ``p = 0`` is attainable at finite ``B``.

    Parameters
    ----------
    d : DiffStats
    s : ScreenSet
        Competitors to include (e.g. from :func:`inequality_screen`).
    B : int
        Number of bootstrap replicates, at least 1.
    seed : int
        Nonnegative base seed; the stream is keyed by ``(seed, d.focal)``.

    Returns
    -------
    PValueRecord
    """
    if B < 1:
        raise ConfigError(f"bootstrap replication count must be >= 1, got {B}")
    if seed < 0:
        raise ConfigError(f"seed must be nonnegative, got {seed}")
    t = test_statistic(d, s)
    if t == math.inf:
        # Some competitor is pointwise better: dominated at every sample.
        return PValueRecord(d.focal, t, 0.0, B, s, seed)
    kept = _kept_positions(d, s)
    active = kept[~d.degenerate_mask[kept]]
    if t is None or active.size == 0:
        # Focal ties or dominates everything it was compared against.
        return PValueRecord(d.focal, t, 1.0, B, s, seed)
    W = d.centered[:, active] / d.scales[active]
    rng = np.random.default_rng([int(seed), int(d.focal)])
    scale = 1.0 / math.sqrt(d.n)
    exceed = 0
    done = 0
    while done < B:
        b = min(_BOOTSTRAP_CHUNK, B - done)
        Z = rng.standard_normal((b, d.n))
        t_star = (Z @ W).max(axis=1) * scale
        exceed += int(np.count_nonzero(t_star > t))
        done += b
    return PValueRecord(d.focal, t, exceed / B, B, s, seed)


def inequality_screen(d: DiffStats, alpha_prime: float) -> ScreenSet:
    """Drop competitors that are evidently better than the focal candidate.

    Keeps competitor ``j`` when its studentized ratio is at least

        -2 z / sqrt(1 - z^2 / n),   z = Phi^{-1}(1 - alpha' / (M - 1)),

    so only heavily negative contrasts (focal clearly worse than ``j`` —
    i.e. ``j`` obviously better) are removed before the bootstrap.  When
    ``z^2 >= n`` the cutoff is undefined and screening is skipped
    entirely; screening is an acceleration, never a requirement.
    """
    if not 0.0 < alpha_prime < 1.0:
        raise ConfigError(f"alpha_prime must lie in (0, 1), got {alpha_prime}")
    M = len(d.competitors) + 1
    z = float(norm.ppf(1.0 - alpha_prime / (M - 1)))
    if z * z >= d.n:
        return keep_all(d)
    threshold = -2.0 * z / math.sqrt(1.0 - z * z / d.n)
    ratios = studentized_ratios(d)
    kept = tuple(j for j, r in zip(d.competitors, ratios) if r >= threshold)
    return ScreenSet(focal=d.focal, kept=kept, threshold=threshold, skipped=False)


def psi1_diagnostic(values, q_list=(1, 2, 3, 4)) -> list[tuple[int, float]]:
    """Empirical moment-growth check for sub-exponential tails.

    For each ``q`` reports ``(q!)^{-1} * (mean |z|^q)^{1/q}`` of the
    standardized input ``z`` (population-sd divisor, so a two-point
    ±1 mass has unit scale).  Ratios that stay flat or shrink as ``q``
    grows are consistent with a sub-exponential tail; rapid growth is
    evidence against it.
    """
    x = np.ascontiguousarray(values, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ConfigError("need a 1-d vector with at least two entries")
    qs = [int(q) for q in q_list]
    if any(q < 1 or q > 8 for q in qs):
        raise ConfigError("q values must be integers in 1..8")
    sd = float(x.std())
    if sd == 0.0:
        raise DegenerateInputError("input vector has zero empirical sd")
    z = np.abs((x - x.mean()) / sd)
    return [(q, float((z**q).mean() ** (1.0 / q) / math.factorial(q))) for q in qs]
