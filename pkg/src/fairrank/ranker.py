"""Neural scorer trained on simulated clicks with an inverse-propensity
weighted listwise softmax loss.

The scorer is a ReLU MLP with a scalar output per item. Each training
iteration simulates a batch of click sessions on the training pool,
accumulates the mean IPS listwise gradient, and applies one plain SGD
step. Validation logits and NDCG@10 are snapshotted at checkpoints; the
checkpoint with the best validation NDCG@10 produces final predictions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils import check_array

from .clicks import PbmConfig, simulate_session_batch
from .metrics import ndcg_at_k


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    batch_sessions: int = 256
    iterations: int = 500
    checkpoint_every: int = 50
    loss_cutoff: int = 10
    hidden_layers: tuple = (256, 128)
    seed: int = 0

    def __post_init__(self):
        for name in ("learning_rate", "batch_sessions", "iterations",
                     "checkpoint_every", "loss_cutoff"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class Checkpoint:
    iteration: int
    params: list
    val_logits: np.ndarray | None
    val_ndcg: float | None


@dataclass
class TrainedModel:
    params: list  # parameters after the final iteration
    checkpoints: list
    best_index: int
    loss_history: list = field(default_factory=list)

    @property
    def best_checkpoint(self) -> Checkpoint:
        return self.checkpoints[self.best_index]


def init_params(d, hidden_layers, rng):
    """Symmetric uniform initialization scaled by 1/sqrt(fan_in); zero
    biases."""
    sizes = (d, *hidden_layers, 1)
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params.append((w, np.zeros(fan_out)))
    return params


def copy_params(params):
    return [(w.copy(), b.copy()) for w, b in params]


def score(params, features):
    """Forward pass; returns one logit per input row."""
    features = np.asarray(features, dtype=np.float64)
    squeeze = features.ndim == 1
    h = np.atleast_2d(features)
    if h.shape[1] != params[0][0].shape[0]:
        raise ValueError(
            f"dimension mismatch: model expects {params[0][0].shape[0]} "
            f"features, got {h.shape[1]}"
        )
    for w, b in params[:-1]:
        h = np.maximum(h @ w + b, 0.0)
    w, b = params[-1]
    out = (h @ w + b).ravel()
    return float(out[0]) if squeeze else out


def _forward_cached(params, x):
    activations = [x]
    h = x
    for w, b in params[:-1]:
        h = np.maximum(h @ w + b, 0.0)
        activations.append(h)
    w, b = params[-1]
    logits = (h @ w + b).ravel()
    return logits, activations


def _backward(params, activations, dlogits):
    grads = [None] * len(params)
    delta = dlogits[:, None]
    for layer in range(len(params) - 1, -1, -1):
        w, _ = params[layer]
        h_in = activations[layer]
        grads[layer] = (h_in.T @ delta, delta.sum(axis=0))
        if layer > 0:
            delta = (delta @ w.T) * (activations[layer] > 0.0)
    return grads


def _softmax_rows(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def ips_listwise_loss(logits, clicks, propensities, loss_cutoff=10):
    """Listwise softmax cross-entropy over the top `loss_cutoff` displayed
    items, each clicked item weighted by its inverse examination
    propensity. Returns 0 when nothing was clicked."""
    loss, _ = ips_listwise_loss_grad(logits, clicks, propensities, loss_cutoff)
    return loss


def ips_listwise_loss_grad(logits, clicks, propensities, loss_cutoff=10):
    """Loss plus its gradient with respect to the logits (full length;
    positions beyond the loss cutoff get zero gradient)."""
    logits = np.asarray(logits, dtype=np.float64)
    clicks = np.asarray(clicks).astype(bool)
    propensities = np.asarray(propensities, dtype=np.float64)
    m = min(len(logits), loss_cutoff)
    grad = np.zeros_like(logits)
    window_clicks = clicks[:m]
    if not window_clicks.any():
        return 0.0, grad
    if np.any(propensities[:m][window_clicks] == 0.0):
        raise ValueError("clicked position has zero propensity; cannot weight")
    weights = np.where(window_clicks, 1.0 / propensities[:m], 0.0)
    s = _softmax_rows(logits[:m])
    log_s = np.log(s)
    loss = -float(weights @ log_s)
    grad[:m] = weights.sum() * s - weights
    return loss, grad


def _batch_loss_and_logit_grad(logits, clicks, propensities, loss_cutoff):
    """Vectorized mean session loss and gradient for (B, depth) inputs."""
    b, depth = logits.shape
    m = min(depth, loss_cutoff)
    weights = np.where(clicks[:, :m], 1.0 / propensities[:m], 0.0)
    s = _softmax_rows(logits[:, :m])
    loss = -float((weights * np.log(s)).sum()) / b
    grad = np.zeros_like(logits)
    grad[:, :m] = (weights.sum(axis=1, keepdims=True) * s - weights) / b
    return loss, grad


def loss_and_param_grad(params, features, positions, clicks, propensities,
                        loss_cutoff=10):
    """Mean IPS listwise loss over a batch of sessions and its gradient
    with respect to the model parameters.

    `positions` is (B, depth) indices into `features`; `clicks` aligns
    with it and `propensities` is the shared per-rank vector.
    """
    b, depth = positions.shape
    x = features[positions.ravel()]
    logits_flat, activations = _forward_cached(params, x)
    logits = logits_flat.reshape(b, depth)
    loss, dlogits = _batch_loss_and_logit_grad(logits, clicks, propensities,
                                               loss_cutoff)
    grads = _backward(params, activations, dlogits.ravel())
    return loss, grads


def predict_scores(params, features):
    """Logits and the within-list softmax over all items; sorting by the
    softmax equals sorting by logits."""
    logits = score(params, features)
    logits = np.atleast_1d(logits)
    return logits, _softmax_rows(logits)


def train_ranker(features, grades, pbm: PbmConfig, cfg: TrainConfig,
                 val_features=None, val_grades=None, ndcg_k=10) -> TrainedModel:
    """Run the click-simulation training loop; inputs are expected to be
    robust-scaled feature matrices."""
    features = np.asarray(features, dtype=np.float64)
    grades = np.asarray(grades)
    rng = np.random.default_rng(cfg.seed)
    params = init_params(features.shape[1], cfg.hidden_layers, rng)
    has_val = val_features is not None and val_grades is not None

    checkpoints = []
    losses = []

    def snapshot(iteration):
        val_logits = None
        val_ndcg = None
        if has_val:
            val_logits = score(params, val_features)
            val_ndcg = ndcg_at_k(val_logits, val_grades, k=ndcg_k)
        checkpoints.append(Checkpoint(iteration, copy_params(params),
                                      val_logits, val_ndcg))

    for it in range(1, cfg.iterations + 1):
        positions, clicks, props = simulate_session_batch(
            grades, pbm, cfg.batch_sessions, rng
        )
        loss, grads = loss_and_param_grad(
            params, features, positions, clicks, props, cfg.loss_cutoff
        )
        if not np.isfinite(loss):
            raise RuntimeError(
                f"training diverged: non-finite loss at iteration {it}"
            )
        losses.append(loss)
        params = [
            (w - cfg.learning_rate * gw, bias - cfg.learning_rate * gb)
            for (w, bias), (gw, gb) in zip(params, grads)
        ]
        if it % cfg.checkpoint_every == 0:
            snapshot(it)
    if not checkpoints or checkpoints[-1].iteration != cfg.iterations:
        snapshot(cfg.iterations)

    if has_val:
        ndcgs = np.array([c.val_ndcg for c in checkpoints])
        best = int(np.argmax(ndcgs))
    else:
        best = len(checkpoints) - 1
    return TrainedModel(params=params, checkpoints=checkpoints,
                        best_index=best, loss_history=losses)


def save_checkpoints(model: TrainedModel, out_dir):
    """Dump checkpoints as a JSON manifest plus one flat little-endian
    float64 binary per checkpoint."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    shapes = [[list(w.shape), list(b.shape)] for w, b in model.checkpoints[0].params]
    manifest = {
        "dtype": "<f8",
        "layer_shapes": shapes,
        "iterations": [c.iteration for c in model.checkpoints],
        "best_iteration": model.best_checkpoint.iteration,
        "files": {},
    }
    for ckpt in model.checkpoints:
        name = f"params_{ckpt.iteration:06d}.bin"
        flat = np.concatenate(
            [np.concatenate([w.ravel(), b.ravel()]) for w, b in ckpt.params]
        ).astype("<f8")
        (out_dir / name).write_bytes(flat.tobytes())
        manifest["files"][str(ckpt.iteration)] = name
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2)
    )


def load_checkpoint(ckpt_dir, iteration):
    """Rebuild the parameter list saved by `save_checkpoints`."""
    ckpt_dir = Path(ckpt_dir)
    manifest = json.loads((ckpt_dir / "manifest.json").read_text())
    name = manifest["files"][str(iteration)]
    flat = np.frombuffer((ckpt_dir / name).read_bytes(), dtype="<f8")
    params = []
    offset = 0
    for w_shape, b_shape in manifest["layer_shapes"]:
        w_size = int(np.prod(w_shape))
        b_size = int(np.prod(b_shape))
        w = flat[offset:offset + w_size].reshape(w_shape).copy()
        offset += w_size
        b = flat[offset:offset + b_size].reshape(b_shape).copy()
        offset += b_size
        params.append((w, b))
    return params


class IpsListwiseRanker(BaseEstimator):
    """Scikit-learn style wrapper around the click-simulation trainer.

    `fit(X, y)` treats y as integer relevance grades, simulates position-
    biased click sessions on (X, y), and trains the scorer; an optional
    validation set drives checkpoint selection. `predict(X)` returns the
    best checkpoint's logits.
    """

    def __init__(self, hidden_layers=(256, 128), learning_rate=0.01,
                 batch_sessions=256, iterations=500, checkpoint_every=50,
                 loss_cutoff=10, eta=1.0, examination_cutoff=10,
                 eps_pos=1.0, eps_neg=0.1, grade_max=4, random_state=0):
        self.hidden_layers = hidden_layers
        self.learning_rate = learning_rate
        self.batch_sessions = batch_sessions
        self.iterations = iterations
        self.checkpoint_every = checkpoint_every
        self.loss_cutoff = loss_cutoff
        self.eta = eta
        self.examination_cutoff = examination_cutoff
        self.eps_pos = eps_pos
        self.eps_neg = eps_neg
        self.grade_max = grade_max
        self.random_state = random_state

    def _pbm(self):
        return PbmConfig(eta=self.eta, cutoff=self.examination_cutoff,
                         eps_pos=self.eps_pos, eps_neg=self.eps_neg,
                         grade_max=self.grade_max)

    def _train_config(self):
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_sessions=self.batch_sessions,
            iterations=self.iterations,
            checkpoint_every=self.checkpoint_every,
            loss_cutoff=self.loss_cutoff,
            hidden_layers=tuple(self.hidden_layers),
            seed=0 if self.random_state is None else int(self.random_state),
        )

    def fit(self, X, y, X_val=None, y_val=None):
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y)
        if len(X) != len(y):
            raise ValueError("X and y must have equal length")
        if X_val is not None:
            X_val = check_array(X_val, dtype=np.float64)
        self.model_ = train_ranker(X, y, self._pbm(), self._train_config(),
                                   val_features=X_val, val_grades=y_val)
        self.n_features_in_ = X.shape[1]
        self.checkpoints_ = self.model_.checkpoints
        self.validation_ndcg_ = [c.val_ndcg for c in self.model_.checkpoints]
        self.best_iteration_ = self.model_.best_checkpoint.iteration
        self.loss_history_ = self.model_.loss_history
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("IpsListwiseRanker is not fitted")

    def predict(self, X):
        self._check_fitted()
        X = check_array(X, dtype=np.float64)
        return score(self.model_.best_checkpoint.params, X)

    def decision_function(self, X):
        return self.predict(X)

    def predict_softmax(self, X):
        self._check_fitted()
        X = check_array(X, dtype=np.float64)
        _, softmax = predict_scores(self.model_.best_checkpoint.params, X)
        return softmax
