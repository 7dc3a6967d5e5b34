"""Synthetic ranking data from a 4-node causal graph.

A binary group label and a continuous utility drive two observed features;
the utility is discretized into ordinal relevance grades. Group 0 is drawn
with probability ``p_group`` and enters the feature mixes with numeric
level 1.0 (group 1 with 0.0), so group 0 is the feature-advantaged group.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Dataset, write_libsvm


@dataclass
class DagConfig:
    """Sampling configuration for the synthetic generator.

    ``dist`` selects the utility distribution: "normal" uses (mu, sigma),
    "pareto" uses a classical Pareto with (shape, scale) and support
    [scale, inf). Mixing weights pair up as X = w_xg*g + w_xu*U and
    Y = w_yg*g + w_yx*X.

    ``grade_scale`` controls the axis grades are binned on: "linear" bins
    the raw utility, "log" bins log(utility). The default "auto" resolves
    to "log" for pareto and "linear" otherwise — a heavy tail stretches
    equal-width bins until all but the largest draws share grade 0, which
    would leave essentially no graded items to rank.
    """

    dist: str = "normal"
    mu: float = 2.0
    sigma: float = 1.0
    shape: float = 2.0
    scale: float = 1.0
    n: int = 50000
    p_group: float = 0.5
    w_xg: float = 0.2
    w_xu: float = 0.8
    w_yg: float = 0.4
    w_yx: float = 0.6
    n_grades: int = 5
    grade_scale: str = "auto"

    def __post_init__(self):
        if self.dist not in ("normal", "pareto"):
            raise ValueError(f"unknown dist {self.dist!r}")
        if self.n <= 0:
            raise ValueError("n must be positive")
        if not 0.0 < self.p_group < 1.0:
            raise ValueError("p_group must lie strictly between 0 and 1")
        if self.dist == "normal" and self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.dist == "pareto" and (self.shape <= 0 or self.scale <= 0):
            raise ValueError("pareto shape and scale must be positive")
        if abs(self.w_xg + self.w_xu - 1.0) > 1e-9:
            raise ValueError("w_xg + w_xu must equal 1")
        if abs(self.w_yg + self.w_yx - 1.0) > 1e-9:
            raise ValueError("w_yg + w_yx must equal 1")
        if self.n_grades < 1:
            raise ValueError("n_grades must be >= 1")
        if self.grade_scale not in ("auto", "linear", "log"):
            raise ValueError(f"unknown grade_scale {self.grade_scale!r}")

    def resolved_grade_scale(self):
        if self.grade_scale != "auto":
            return self.grade_scale
        return "log" if self.dist == "pareto" else "linear"

    def to_dict(self):
        return dataclasses.asdict(self)


def discretize(values, n_grades=5):
    """Equal-width binning of values into grades 0..n_grades-1.

    Bins span [min(values), max(values)]; a constant vector maps to all
    zeros. Monotone: v_i <= v_j implies grade_i <= grade_j.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot discretize an empty vector")
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.zeros(values.shape, dtype=np.int64)
    raw = np.floor(n_grades * (values - lo) / (hi - lo))
    return np.clip(raw, 0, n_grades - 1).astype(np.int64)


def sample_utility(cfg: DagConfig, rng) -> np.ndarray:
    if cfg.dist == "normal":
        return rng.normal(cfg.mu, cfg.sigma, cfg.n)
    return cfg.scale * (1.0 + rng.pareto(cfg.shape, cfg.n))


def sample_synthetic(cfg: DagConfig, seed: int):
    """Draw a synthetic Dataset; returns (dataset, continuous_utility).

    The group indicator and utility are root draws; both features are
    deterministic mixes of their parents (the mixing weights already sum
    to 1, leaving no residual noise slot).
    """
    rng = np.random.default_rng(seed)
    group0 = rng.random(cfg.n) < cfg.p_group
    groups = np.where(group0, 0, 1)
    g_level = np.where(group0, 1.0, 0.0)
    u = sample_utility(cfg, rng)

    x = cfg.w_xg * g_level + cfg.w_xu * u
    y = cfg.w_yg * g_level + cfg.w_yx * x
    features = np.column_stack([x, y])

    if cfg.resolved_grade_scale() == "log":
        grades = discretize(np.log(u), cfg.n_grades)
    else:
        grades = discretize(u, cfg.n_grades)

    ds = Dataset(
        np.arange(cfg.n), features, grades, groups, grade_max=cfg.n_grades - 1
    )
    return ds, u


def subsample_imbalanced(ds: Dataset, majority_fraction, n_out, seed):
    """Group-imbalanced subsample: round(n_out * f) group-0 items, the
    remainder group-1, both drawn without replacement."""
    if not 0.5 <= majority_fraction <= 0.9:
        raise ValueError(
            f"majority_fraction must lie in [0.5, 0.9], got {majority_fraction}"
        )
    n_out = int(n_out)
    n0 = int(round(n_out * majority_fraction))
    n1 = n_out - n0
    idx0 = np.flatnonzero(ds.groups == 0)
    idx1 = np.flatnonzero(ds.groups == 1)
    for g, need, have in ((0, n0, len(idx0)), (1, n1, len(idx1))):
        if need > have:
            raise ValueError(
                f"group {g} has only {have} items, need {need} for "
                f"fraction {majority_fraction} of {n_out}"
            )
    rng = np.random.default_rng(seed)
    pick0 = rng.choice(idx0, size=n0, replace=False)
    pick1 = rng.choice(idx1, size=n1, replace=False)
    keep = np.sort(np.concatenate([pick0, pick1]))
    return ds.subset(keep)


def save_synthetic(cfg: DagConfig, seed: int, libsvm_path, sidecar_path=None):
    """Write the sampled dataset as canonical libsvm plus a JSON sidecar
    holding the config, seed, and continuous utility values."""
    libsvm_path = Path(libsvm_path)
    if sidecar_path is None:
        sidecar_path = libsvm_path.with_suffix(libsvm_path.suffix + ".json")
    ds, u = sample_synthetic(cfg, seed)
    libsvm_path.write_text(write_libsvm(ds))
    sidecar = {"config": cfg.to_dict(), "seed": seed, "utility": u.tolist()}
    Path(sidecar_path).write_text(json.dumps(sidecar, sort_keys=True))
    return ds
