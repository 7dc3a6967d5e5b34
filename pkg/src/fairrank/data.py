"""Dataset container, libsvm text format, splitting, and robust feature scaling."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils import check_array

SPLIT_LABELS = ("train", "validation", "test", "all")


class LibsvmParseError(ValueError):
    """Malformed libsvm line; message carries the 1-based line number."""


@dataclass(frozen=True)
class Item:
    """One ranked subject: features, graded relevance, binary group label."""

    id: int
    features: np.ndarray
    grade: int
    group: int


class Dataset:
    """Single-query ranking dataset stored column-wise.

    `ids` are unique non-negative integers, `features` is an (n, d) float
    matrix, `grades` are integers in [0, grade_max], and `groups` are
    binary labels in {0, 1}.
    """

    def __init__(self, ids, features, grades, groups, grade_max=4, split_label="all"):
        self.ids = np.asarray(ids, dtype=np.int64)
        self.features = np.asarray(features, dtype=np.float64)
        self.grades = np.asarray(grades, dtype=np.int64)
        self.groups = np.asarray(groups, dtype=np.int64)
        self.grade_max = int(grade_max)
        self.split_label = split_label
        self._validate()

    def _validate(self):
        n = len(self.ids)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-d array")
        if not (len(self.features) == len(self.grades) == len(self.groups) == n):
            raise ValueError("ids, features, grades, and groups must have equal length")
        if n > 0 and len(np.unique(self.ids)) != n:
            raise ValueError("item ids must be unique")
        if np.any(self.ids < 0):
            raise ValueError("item ids must be non-negative")
        if np.any((self.grades < 0) | (self.grades > self.grade_max)):
            raise ValueError(f"grades must lie in [0, {self.grade_max}]")
        if np.any((self.groups != 0) & (self.groups != 1)):
            raise ValueError("groups must be binary (0 or 1)")
        if self.split_label not in SPLIT_LABELS:
            raise ValueError(f"split_label must be one of {SPLIT_LABELS}")

    @property
    def d(self):
        return self.features.shape[1]

    def __len__(self):
        return len(self.ids)

    def __getitem__(self, i) -> Item:
        return Item(
            id=int(self.ids[i]),
            features=self.features[i],
            grade=int(self.grades[i]),
            group=int(self.groups[i]),
        )

    def items(self):
        return [self[i] for i in range(len(self))]

    def subset(self, indices, split_label=None):
        indices = np.asarray(indices)
        return Dataset(
            self.ids[indices],
            self.features[indices],
            self.grades[indices],
            self.groups[indices],
            grade_max=self.grade_max,
            split_label=split_label or self.split_label,
        )

    def with_features(self, features):
        return Dataset(
            self.ids, features, self.grades, self.groups,
            grade_max=self.grade_max, split_label=self.split_label,
        )

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.grade_max == other.grade_max
            and self.split_label == other.split_label
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.grades, other.grades)
            and np.array_equal(self.groups, other.groups)
            and self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
        )


def parse_libsvm(source, grade_max=4):
    """Parse libsvm ranking text into a Dataset.

    Each line reads ``<grade> qid:<q> <idx>:<val> ... # group=<g>`` with
    1-based feature indices. Missing indices are filled with 0.0 and the
    feature dimension is the maximum index seen anywhere in the file.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    rows = []  # (grade, {idx: val}, group)
    qids = set()
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line:
            continue
        body, sep, comment = line.partition("#")
        if not sep or "group=" not in comment:
            raise LibsvmParseError(f"line {lineno}: missing '# group=<g>' comment")
        try:
            group = int(comment.split("group=", 1)[1].strip())
        except ValueError:
            raise LibsvmParseError(f"line {lineno}: malformed group label") from None
        if group not in (0, 1):
            raise LibsvmParseError(f"line {lineno}: group must be 0 or 1, got {group}")
        tokens = body.split()
        if len(tokens) < 2 or not tokens[1].startswith("qid:"):
            raise LibsvmParseError(f"line {lineno}: expected '<grade> qid:<q> ...'")
        try:
            grade = int(tokens[0])
        except ValueError:
            raise LibsvmParseError(f"line {lineno}: malformed grade {tokens[0]!r}") from None
        if not 0 <= grade <= grade_max:
            raise ValueError(f"line {lineno}: grade {grade} outside [0, {grade_max}]")
        qids.add(tokens[1][len("qid:"):])
        feats = {}
        for tok in tokens[2:]:
            idx_s, sep2, val_s = tok.partition(":")
            if not sep2:
                raise LibsvmParseError(f"line {lineno}: malformed feature token {tok!r}")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise LibsvmParseError(f"line {lineno}: malformed feature token {tok!r}") from None
            if idx < 1:
                raise LibsvmParseError(f"line {lineno}: feature index must be >= 1")
            feats[idx] = val
        rows.append((grade, feats, group))
    if len(qids) > 1:
        raise ValueError(f"expected a single query, found qids {sorted(qids)}")

    d = max((idx for _, feats, _ in rows for idx in feats), default=0)
    n = len(rows)
    features = np.zeros((n, d))
    grades = np.zeros(n, dtype=np.int64)
    groups = np.zeros(n, dtype=np.int64)
    for i, (grade, feats, group) in enumerate(rows):
        grades[i] = grade
        groups[i] = group
        for idx, val in feats.items():
            features[i, idx - 1] = val
    return Dataset(np.arange(n), features, grades, groups, grade_max=grade_max)


def write_libsvm(ds: Dataset) -> str:
    """Canonical libsvm writer: dense features in ascending index order,
    6 significant digits, group label in a trailing comment."""
    lines = []
    for i in range(len(ds)):
        feats = " ".join(
            f"{j + 1}:{ds.features[i, j]:.6g}" for j in range(ds.d)
        )
        lines.append(f"{ds.grades[i]} qid:1 {feats} # group={ds.groups[i]}")
    return "\n".join(lines) + ("\n" if lines else "")


def split_dataset(ds: Dataset, fractions=(0.7, 0.1, 0.2), seed=0):
    """Disjoint train/validation/test partition by shuffled position.

    Validation and test sizes are floor(n * fraction); the remainder goes
    to train. Deterministic for a fixed seed.
    """
    if len(ds) == 0:
        raise ValueError("cannot split an empty dataset")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {fractions}")
    n = len(ds)
    n_val = int(np.floor(n * fractions[1]))
    n_test = int(np.floor(n * fractions[2]))
    n_train = n - n_val - n_test
    perm = np.random.default_rng(seed).permutation(n)
    train = ds.subset(np.sort(perm[:n_train]), "train")
    val = ds.subset(np.sort(perm[n_train:n_train + n_val]), "validation")
    test = ds.subset(np.sort(perm[n_train + n_val:]), "test")
    return train, val, test


class RobustQuantileScaler(BaseEstimator, TransformerMixin):
    """Per-feature (x - median) / IQR scaling with statistics from fit data.

    Quantiles use linear interpolation between order statistics. Features
    with zero IQR are divided by 1 instead so constant columns map to 0.
    """

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        q25, q50, q75 = np.percentile(X, [25.0, 50.0, 75.0], axis=0, method="linear")
        self.center_ = q50
        iqr = q75 - q25
        iqr[iqr == 0.0] = 1.0
        self.scale_ = iqr
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        if not hasattr(self, "center_"):
            raise NotFittedError("RobustQuantileScaler is not fitted")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"dimension mismatch: scaler fitted on {self.n_features_in_} "
                f"features, got {X.shape[1]}"
            )
        return (X - self.center_) / self.scale_


def robust_scale_fit(train: Dataset) -> RobustQuantileScaler:
    if len(train) == 0:
        raise ValueError("cannot fit a scaler on an empty dataset")
    return RobustQuantileScaler().fit(train.features)


def robust_scale_apply(scaler: RobustQuantileScaler, ds: Dataset) -> Dataset:
    return ds.with_features(scaler.transform(ds.features))
