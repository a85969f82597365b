"""Small feed-forward softmax classifier trained on soft labels.

One hidden rectified-linear layer, soft-label cross-entropy, Adam, and
best-validation-epoch parameter selection. Everything is float64 numpy
and single-threaded over the optimization sequence, so training is
bit-reproducible from the config seed.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .augment import AugmentPolicy, apply_policy
from .errors import NumericalDivergence
from .samplers import child_rng

_SPLIT_STREAM = 10
_INIT_STREAM = 11
_EPOCH_STREAM = 12
_POLICY_STREAM = 13


@dataclass
class TrainConfig:
    batch_size: int = 64
    learning_rate: float = 0.001
    epochs: int = 30
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    val_fraction: float = 0.2
    hidden: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not (0.0 < self.val_fraction < 1.0):
            raise ValueError("val_fraction must lie in (0, 1)")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class MlpClassifier:
    w1: np.ndarray  # (hidden, in_dim)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (K, hidden)
    b2: np.ndarray  # (K,)
    seed: int = 0

    @property
    def in_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def num_classes(self) -> int:
        return self.w2.shape[0]

    def logits(self, x_flat: np.ndarray) -> np.ndarray:
        """Logits for a (B, in_dim) batch of flattened grids."""
        z1 = x_flat @ self.w1.T + self.b1
        hidden = np.maximum(z1, 0.0)
        return hidden @ self.w2.T + self.b2


def init_classifier(in_dim: int, hidden: int, num_classes: int, seed: int) -> MlpClassifier:
    """He fan-in scaled initialization from the run seed; zero biases."""
    rng = child_rng(seed, _INIT_STREAM)
    w1 = rng.standard_normal((hidden, in_dim)) * np.sqrt(2.0 / in_dim)
    w2 = rng.standard_normal((num_classes, hidden)) * np.sqrt(2.0 / hidden)
    return MlpClassifier(
        w1=w1, b1=np.zeros(hidden), w2=w2, b2=np.zeros(num_classes), seed=seed
    )


def soft_ce_loss(logits: np.ndarray, target: np.ndarray) -> float:
    """Cross entropy -sum_k target_k log softmax(logits)_k, log-sum-exp stabilized."""
    logits = np.asarray(logits, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    m = logits.max()
    lse = m + np.log(np.exp(logits - m).sum())
    return float(lse - np.dot(target, logits))


def _stack(batch: list[tuple[np.ndarray, np.ndarray]]) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([img.reshape(-1) for img, _ in batch])
    y = np.stack([label for _, label in batch])
    return x, y


def _loss_and_grads(model: MlpClassifier, x: np.ndarray, y: np.ndarray):
    """Mean soft-CE loss over the batch and its exact parameter gradient."""
    n = x.shape[0]
    z1 = x @ model.w1.T + model.b1
    hidden = np.maximum(z1, 0.0)
    logits = hidden @ model.w2.T + model.b2

    m = logits.max(axis=1, keepdims=True)
    lse = m + np.log(np.exp(logits - m).sum(axis=1, keepdims=True))
    loss = float(np.mean(lse[:, 0] - np.sum(y * logits, axis=1)))

    probs = np.exp(logits - lse)
    dlogits = (probs - y) / n
    dw2 = dlogits.T @ hidden
    db2 = dlogits.sum(axis=0)
    dhidden = dlogits @ model.w2
    dz1 = dhidden * (z1 > 0.0)
    dw1 = dz1.T @ x
    db1 = dz1.sum(axis=0)
    return loss, {"w1": dw1, "b1": db1, "w2": dw2, "b2": db2}


def gradient(model: MlpClassifier, batch: list[tuple[np.ndarray, np.ndarray]]) -> dict:
    """Exact gradient of the mean soft-CE loss over the batch, by parameter name."""
    x, y = _stack(batch)
    _, grads = _loss_and_grads(model, x, y)
    return grads


class _Adam:
    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        self.m: dict = {}
        self.v: dict = {}
        self.t = 0

    def step(self, model: MlpClassifier, grads: dict):
        self.t += 1
        c = self.cfg
        for name, g in grads.items():
            if name not in self.m:
                self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            self.m[name] = c.beta1 * self.m[name] + (1.0 - c.beta1) * g
            self.v[name] = c.beta2 * self.v[name] + (1.0 - c.beta2) * g * g
            m_hat = self.m[name] / (1.0 - c.beta1 ** self.t)
            v_hat = self.v[name] / (1.0 - c.beta2 ** self.t)
            param = getattr(model, name)
            param -= c.learning_rate * m_hat / (np.sqrt(v_hat) + c.adam_eps)


def validation_split(
    n: int, synthetic: list[bool], val_fraction: float, rng: np.random.Generator
) -> tuple[list[int], list[int]]:
    """(train indices, val indices): the validation fraction is drawn from
    the real samples only; synthetic samples always land in training."""
    real_idx = np.array([i for i in range(n) if not synthetic[i]])
    if real_idx.size < 2:
        raise ValueError("need at least 2 real samples for the validation split")
    order = real_idx[rng.permutation(real_idx.size)]
    n_val = int(round(val_fraction * real_idx.size))
    n_val = max(1, min(n_val, real_idx.size - 1))
    val_idx = sorted(order[:n_val].tolist())
    assert not any(synthetic[i] for i in val_idx), "synthetic sample leaked into validation"
    val_set = set(val_idx)
    train_idx = [i for i in range(n) if i not in val_set]
    return train_idx, val_idx


def evaluate(model: MlpClassifier, testset: list[tuple[np.ndarray, int]]) -> float:
    """Top-1 accuracy; argmax ties break toward the lowest class index."""
    if not testset:
        raise ValueError("testset must not be empty")
    x = np.stack([img.reshape(-1) for img, _ in testset])
    truth = np.array([c for _, c in testset])
    pred = np.argmax(model.logits(x), axis=1)
    return float(np.mean(pred == truth))


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_accuracy: float


def train(
    dataset: list[tuple[np.ndarray, np.ndarray]],
    cfg: TrainConfig,
    policy: AugmentPolicy | None = None,
    synthetic: list[bool] | None = None,
) -> tuple[MlpClassifier, list[EpochStats]]:
    """Train with a real-only validation split and best-epoch selection.

    The validation fraction is drawn from the real samples only (by
    seeded shuffle); synthetic samples always train. Validation is
    scored top-1 against hard (argmax) labels. Returns the parameter
    snapshot from the epoch with the highest validation accuracy (ties
    resolve to the earlier epoch) and the per-epoch history.
    """
    if policy is None:
        policy = AugmentPolicy(kind="none")
    if len(dataset) < 10:
        raise ValueError("dataset must have at least 10 samples")
    if synthetic is None:
        synthetic = [False] * len(dataset)
    if len(synthetic) != len(dataset):
        raise ValueError("synthetic flags must match dataset length")

    labels_hard = np.array([int(np.argmax(label)) for _, label in dataset])
    classes = np.unique(labels_hard)
    if classes.size < 2:
        raise ValueError("dataset must contain at least 2 classes")
    num_classes = dataset[0][1].shape[0]
    in_dim = dataset[0][0].size

    split_rng = child_rng(cfg.seed, _SPLIT_STREAM)
    train_idx, val_idx = validation_split(len(dataset), synthetic, cfg.val_fraction, split_rng)
    train_classes = np.unique(labels_hard[train_idx])
    missing = set(classes.tolist()) - set(train_classes.tolist())
    if missing:
        raise ValueError(f"classes {sorted(missing)} empty after validation split")
    val_set = [(dataset[i][0], int(labels_hard[i])) for i in val_idx]

    model = init_classifier(in_dim, cfg.hidden, num_classes, cfg.seed)
    history: list[EpochStats] = []
    if cfg.epochs == 0:
        return model, history

    adam = _Adam(cfg)
    epoch_rng = child_rng(cfg.seed, _EPOCH_STREAM)
    policy_rng = child_rng(cfg.seed, _POLICY_STREAM)
    best_acc = -1.0
    best_model = None

    for epoch in range(cfg.epochs):
        perm = epoch_rng.permutation(len(train_idx))
        loss_sum = 0.0
        for start in range(0, len(train_idx), cfg.batch_size):
            chunk = [train_idx[int(p)] for p in perm[start : start + cfg.batch_size]]
            pairs = [dataset[i] for i in chunk]
            if policy.kind != "none" and len(pairs) >= 2:
                pairs = apply_policy(pairs, policy, policy_rng)
            x, y = _stack(pairs)
            loss, grads = _loss_and_grads(model, x, y)
            if not np.isfinite(loss):
                raise NumericalDivergence(f"non-finite training loss at epoch {epoch}")
            adam.step(model, grads)
            loss_sum += loss * len(pairs)
        val_acc = evaluate(model, val_set)
        history.append(EpochStats(epoch, loss_sum / len(train_idx), val_acc))
        if val_acc > best_acc:
            best_acc = val_acc
            best_model = copy.deepcopy(model)

    return best_model, history
