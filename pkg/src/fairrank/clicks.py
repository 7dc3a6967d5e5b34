"""Position-based click model with result randomization.

A session displays a uniformly random ordering of the item pool; the user
examines rank r with probability (1/r)^eta up to a cutoff, and clicks an
examined item with a probability that grows with its relevance grade.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset


@dataclass
class PbmConfig:
    """Examination and click parameters of the position-based model."""

    eta: float = 1.0
    cutoff: int = 10
    eps_pos: float = 1.0
    eps_neg: float = 0.1
    grade_max: int = 4

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if self.cutoff < 1:
            raise ValueError("cutoff must be >= 1")
        if not 0.0 <= self.eps_neg <= self.eps_pos <= 1.0:
            raise ValueError("need 0 <= eps_neg <= eps_pos <= 1")


@dataclass
class ClickSession:
    """One simulated impression over the examined top of a randomized order.

    ``displayed`` holds item ids for ranks 1..len(displayed); ``clicks``
    and ``propensities`` align with it positionally.
    """

    displayed: np.ndarray
    clicks: np.ndarray
    propensities: np.ndarray


def examination_propensity(rank, cfg: PbmConfig):
    """Probability that rank (1-based) is examined: (1/rank)^eta within the
    cutoff, 0 beyond it."""
    rank = np.asarray(rank)
    if np.any(rank < 1):
        raise ValueError("rank is 1-based and must be >= 1")
    p = (1.0 / rank) ** cfg.eta
    return np.where(rank <= cfg.cutoff, p, 0.0)[()]


def click_probability(grade, cfg: PbmConfig):
    """Click probability given examination, interpolating the configured
    endpoints with exponential gain: eps_neg at grade 0, eps_pos at
    grade_max."""
    grade = np.asarray(grade)
    if np.any((grade < 0) | (grade > cfg.grade_max)):
        raise ValueError(f"grade outside [0, {cfg.grade_max}]")
    gain = (2.0 ** grade - 1.0) / (2.0 ** cfg.grade_max - 1.0)
    return (cfg.eps_neg + (cfg.eps_pos - cfg.eps_neg) * gain)[()]


def simulate_session(pool: Dataset, cfg: PbmConfig, rng) -> ClickSession:
    """Simulate one impression on a uniformly randomized ordering of the pool.

    Only the examinable window (top ``cfg.cutoff`` of the randomized order)
    is displayed; deeper ranks have examination propensity 0 and can never
    be clicked.
    """
    n = len(pool)
    if n == 0:
        raise ValueError("pool is empty")
    depth = min(n, cfg.cutoff)
    order = rng.permutation(n)[:depth]
    ranks = np.arange(1, depth + 1)
    props = examination_propensity(ranks, cfg)
    examined = rng.random(depth) < props
    p_click = click_probability(pool.grades[order], cfg)
    clicks = (examined & (rng.random(depth) < p_click)).astype(np.int8)
    return ClickSession(
        displayed=pool.ids[order], clicks=clicks, propensities=props
    )


def simulate_session_batch(grades, cfg: PbmConfig, n_sessions, rng):
    """Vectorized sessions over a pool given only its grade vector.

    Returns (positions, clicks, propensities): ``positions`` is an
    (n_sessions, depth) array of pool indices filling ranks 1..depth of
    each randomized ordering, with depth = min(cutoff, pool size).
    Distribution matches `simulate_session` position-for-position.
    """
    n = len(grades)
    if n == 0:
        raise ValueError("pool is empty")
    depth = min(n, cfg.cutoff)
    if depth == n:
        positions = np.argsort(rng.random((n_sessions, n)), axis=1)
    else:
        # Rejection-sample rows until all rows are duplicate-free; for
        # depth << n nearly every draw is already valid, and conditioning
        # on distinctness yields exactly the top of a uniform permutation.
        positions = rng.integers(0, n, size=(n_sessions, depth))
        while True:
            sorted_rows = np.sort(positions, axis=1)
            bad = (np.diff(sorted_rows, axis=1) == 0).any(axis=1)
            if not bad.any():
                break
            positions[bad] = rng.integers(0, n, size=(int(bad.sum()), depth))
    props = examination_propensity(np.arange(1, depth + 1), cfg)
    examined = rng.random((n_sessions, depth)) < props
    p_click = click_probability(np.asarray(grades)[positions], cfg)
    clicks = examined & (rng.random((n_sessions, depth)) < p_click)
    return positions, clicks, props


def write_click_log(path, sessions):
    """Dump sessions as CSV rows `session_id, position, item_id, clicked,
    propensity`."""
    with open(path, "w") as fh:
        fh.write("session_id,position,item_id,clicked,propensity\n")
        for sid, session in enumerate(sessions):
            for pos in range(len(session.displayed)):
                fh.write(
                    f"{sid},{pos + 1},{session.displayed[pos]},"
                    f"{int(session.clicks[pos])},{session.propensities[pos]:.6g}\n"
                )
