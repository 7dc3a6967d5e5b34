"""Ranking utility (NDCG@k) and exposure-based fairness metrics.

Exposure follows a log-decaying attention model over the top-k positions;
exposure and relevance vectors are min-max normalized to [0, 1] before
group aggregation (a `normalize` switch disables this). Ratio metrics
return NaN when a denominator degenerates; reports record that as a flag
instead of clamping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Ranking:
    """Positions of the evaluated items in display order (best first)."""

    order: np.ndarray
    source: str = "predicted"


@dataclass
class FairnessReport:
    ndcg_at_k: float
    demographic_parity: float
    exposure_fairness: float
    individual_fairness: float
    group_exposure: dict
    group_relevance: dict
    k: int
    source: str
    flags: list = field(default_factory=list)

    def to_dict(self):
        return {
            "ndcg_at_k": self.ndcg_at_k,
            "demographic_parity": self.demographic_parity,
            "exposure_fairness": self.exposure_fairness,
            "individual_fairness": self.individual_fairness,
            "group_exposure": {str(g): v for g, v in self.group_exposure.items()},
            "group_relevance": {str(g): v for g, v in self.group_relevance.items()},
            "k": self.k,
            "source": self.source,
            "flags": list(self.flags),
        }


def attention_weight(rank, k=10):
    """Attention at a 1-based rank: 1/log2(rank + 1) within the top k,
    0 beyond."""
    rank = np.asarray(rank, dtype=np.float64)
    if np.any(rank < 1):
        raise ValueError("rank is 1-based and must be >= 1")
    w = 1.0 / np.log2(rank + 1.0)
    return np.where(rank <= k, w, 0.0)[()]


def normalize01(values):
    """Min-max scaling onto [0, 1]; a constant vector maps to all zeros."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def ranks_from_scores(scores):
    """1-based rank per item under descending score; ties break by index."""
    scores = np.asarray(scores)
    order = np.argsort(-scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.int64)
    ranks[order] = np.arange(1, len(scores) + 1)
    return ranks


def group_exposure(ranks, groups, k=10, normalize=True):
    """Mean (normalized) exposure per group under the given item ranks."""
    exposure = attention_weight(ranks, k)
    if normalize:
        exposure = normalize01(exposure)
    return _group_means(exposure, groups)


def group_relevance(relevance, groups, normalize=True):
    """Mean (normalized) relevance per group."""
    relevance = np.asarray(relevance, dtype=np.float64)
    if normalize:
        relevance = normalize01(relevance)
    return _group_means(relevance, groups)


def _group_means(values, groups):
    groups = np.asarray(groups)
    out = {}
    for g in (0, 1):
        mask = groups == g
        if not mask.any():
            raise ValueError(f"group {g} is empty")
        out[g] = float(values[mask].mean())
    return out


def demographic_parity(exposure_by_group):
    """Ratio of group exposures |E0 / E1|; NaN when E1 is zero."""
    e1 = exposure_by_group[1]
    if e1 == 0.0:
        return float("nan")
    return abs(exposure_by_group[0] / e1)


def exposure_fairness(exposure_by_group, relevance_by_group):
    """Ratio of exposure-to-relevance ratios, (E0/R0) / (E1/R1); 1 means
    exposure proportional to relevance. NaN on a zero denominator."""
    r0, r1 = relevance_by_group[0], relevance_by_group[1]
    e1 = exposure_by_group[1]
    if r0 == 0.0 or r1 == 0.0 or e1 == 0.0:
        return float("nan")
    return (exposure_by_group[0] / r0) / (e1 / r1)


def individual_fairness(exposure, relevance, normalize=True):
    """Sum over items of |cumulative exposure - cumulative relevance|.

    Inputs may be (n,) vectors for a single ranking or (M, n) arrays for a
    sequence of M rankings; each ranking's vectors are normalized
    independently before accumulation.
    """
    exposure = np.atleast_2d(np.asarray(exposure, dtype=np.float64))
    relevance = np.atleast_2d(np.asarray(relevance, dtype=np.float64))
    if exposure.shape != relevance.shape:
        raise ValueError("exposure and relevance must have matching shapes")
    if normalize:
        exposure = np.vstack([normalize01(row) for row in exposure])
        relevance = np.vstack([normalize01(row) for row in relevance])
    return float(np.abs(exposure.sum(axis=0) - relevance.sum(axis=0)).sum())


def ndcg_at_k(scores, grades, k=10):
    """NDCG@k of the ranking induced by `scores` against integer grades,
    with gain 2^grade - 1 and log2(rank + 1) discount. Defined as 0 when
    every grade is zero."""
    scores = np.asarray(scores)
    grades = np.asarray(grades, dtype=np.float64)
    order = np.argsort(-scores, kind="mergesort")
    depth = min(k, len(grades))
    discounts = 1.0 / np.log2(np.arange(2, depth + 2))
    gains = 2.0 ** grades[order[:depth]] - 1.0
    dcg = float(gains @ discounts)
    ideal = 2.0 ** np.sort(grades)[::-1][:depth] - 1.0
    idcg = float(ideal @ discounts)
    if idcg == 0.0:
        return 0.0
    return dcg / idcg


def fairness_report(scores, relevance, grades, groups, k=10,
                    source="predicted", normalize=True) -> FairnessReport:
    """Assemble the full fairness report for the ranking induced by
    `scores`, measuring exposure against the given `relevance` values
    (true grades or predicted scores) and NDCG against true grades."""
    ranks = ranks_from_scores(scores)
    exposure = attention_weight(ranks, k)
    exp_g = group_exposure(ranks, groups, k=k, normalize=normalize)
    rel_g = group_relevance(relevance, groups, normalize=normalize)
    dp = demographic_parity(exp_g)
    ef = exposure_fairness(exp_g, rel_g)
    flags = []
    if np.isnan(dp):
        flags.append("demographic_parity_undefined")
    if np.isnan(ef):
        flags.append("exposure_fairness_undefined")
    return FairnessReport(
        ndcg_at_k=ndcg_at_k(scores, grades, k=k),
        demographic_parity=dp,
        exposure_fairness=ef,
        individual_fairness=individual_fairness(exposure, relevance,
                                                normalize=normalize),
        group_exposure=exp_g,
        group_relevance=rel_g,
        k=k,
        source=source,
        flags=flags,
    )
