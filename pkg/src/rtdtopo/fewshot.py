"""Few-shot classifier adaptation with a topology-alignment regulariser.

A frozen base classifier (one unit row per class, typically text embeddings
from a dual encoder) is adapted by learning an additive residual: the
effective row for class k is ``normalize(base[k] + alpha * residual[k])``.
Training minimises cross-entropy on class-balanced batches plus a weighted
divergence term that keeps the topology of the effective rows close to the
topology of the batch's visual embeddings.  Only the residual receives
gradients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import expm

from .geometry import PointCloud
from .gradient import rtd_subgradient


def _unit_rows(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0):
        raise ValueError("rows must have nonzero norm")
    return x / norms[:, None], norms


@dataclass(frozen=True)
class EmbeddingDataset:
    """Embeddings with integer labels in [0, class_count)."""

    embeddings: np.ndarray
    labels: np.ndarray
    class_count: int
    split: str = "train"

    def __post_init__(self) -> None:
        emb = np.ascontiguousarray(np.asarray(self.embeddings, dtype=np.float64))
        lab = np.ascontiguousarray(np.asarray(self.labels, dtype=np.int64))
        if emb.ndim != 2 or emb.shape[0] < 1:
            raise ValueError(f"embeddings must be (N, D) with N >= 1, got {emb.shape}")
        if not np.all(np.isfinite(emb)):
            raise ValueError("embeddings must be finite")
        if lab.shape != (emb.shape[0],):
            raise ValueError("labels must be one integer per embedding row")
        if self.class_count < 2:
            raise ValueError(f"class_count must be >= 2, got {self.class_count}")
        if lab.min() < 0 or lab.max() >= self.class_count:
            raise ValueError("labels must lie in [0, class_count)")
        emb.flags.writeable = False
        lab.flags.writeable = False
        object.__setattr__(self, "embeddings", emb)
        object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def indices_of_class(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.labels == c)


@dataclass(frozen=True)
class BaseClassifier:
    """Frozen classifier rows, one unit vector per class."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float64))
        if w.ndim != 2 or w.shape[0] < 2:
            raise ValueError(f"weights must be (K, D) with K >= 2, got {w.shape}")
        norms = np.linalg.norm(w, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-6):
            raise ValueError("base rows must be unit vectors")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def class_count(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


@dataclass
class TaskResidualModel:
    """Base classifier plus a learnable additive residual."""

    base: BaseClassifier
    residual: np.ndarray
    alpha: float = 0.5
    logit_scale: float = 100.0

    def __post_init__(self) -> None:
        res = np.asarray(self.residual, dtype=np.float64)
        if res.shape != self.base.weights.shape:
            raise ValueError(
                f"residual shape {res.shape} must match base {self.base.weights.shape}"
            )
        if self.alpha <= 0 or self.logit_scale <= 0:
            raise ValueError("alpha and logit_scale must be positive")
        self.residual = np.ascontiguousarray(res)

    @classmethod
    def zero_init(
        cls, base: BaseClassifier, alpha: float = 0.5, logit_scale: float = 100.0
    ) -> "TaskResidualModel":
        return cls(
            base=base,
            residual=np.zeros_like(base.weights),
            alpha=alpha,
            logit_scale=logit_scale,
        )

    def effective_weights(self) -> np.ndarray:
        """Row-normalised base + alpha * residual."""
        unit, _ = _unit_rows(self.base.weights + self.alpha * self.residual)
        return unit


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for residual training.

    ``lam`` is the weight of the divergence term; leave it None to have it
    chosen by ``lambda_search`` so that lam * L_div is a target fraction of
    the cross-entropy at initialisation.
    """

    shots: int = 16
    epochs: int = 100
    lr: float = 1e-4
    lam: Optional[float] = None
    alpha: float = 0.5
    logit_scale: float = 100.0
    seed: int = 0
    lambda_search_enabled: bool = True
    target_ratio_band: tuple[float, float] = (0.33, 0.37)

    def __post_init__(self) -> None:
        if self.shots < 1:
            raise ValueError(f"shots must be >= 1, got {self.shots}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if self.lam is not None and self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.lam is None and not self.lambda_search_enabled:
            raise ValueError("lam must be given when lambda_search_enabled is False")
        lo, hi = self.target_ratio_band
        if not (0 < lo < hi):
            raise ValueError(f"target_ratio_band must be 0 < lo < hi, got {self.target_ratio_band}")
        if self.alpha <= 0 or self.logit_scale <= 0:
            raise ValueError("alpha and logit_scale must be positive")


def class_balanced_batches(
    ds: EmbeddingDataset, rng: np.random.Generator | int
) -> list[np.ndarray]:
    """One epoch of batches with exactly one sample per class, class-ordered.

    Classes with fewer samples than the epoch's batch count recycle through
    fresh permutations; every class must have at least one sample.  The
    number of batches equals the largest per-class count.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    k = ds.class_count
    per_class = [ds.indices_of_class(c) for c in range(k)]
    for c, idx in enumerate(per_class):
        if idx.shape[0] == 0:
            raise ValueError(f"class {c} has no samples")
    n_batches = max(idx.shape[0] for idx in per_class)
    queues = [list(rng.permutation(idx)) for idx in per_class]
    batches = []
    for _ in range(n_batches):
        row = np.empty(k, dtype=np.int64)
        for c in range(k):
            if not queues[c]:
                queues[c] = list(rng.permutation(per_class[c]))
            row[c] = queues[c].pop()
        batches.append(row)
    return batches


def forward_logits(model: TaskResidualModel, batch: np.ndarray) -> np.ndarray:
    """Scaled cosine similarities between rows of ``batch`` and the classifier."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != model.base.dim:
        raise ValueError(f"batch must be (B, {model.base.dim}), got {batch.shape}")
    x, _ = _unit_rows(batch)
    c = model.effective_weights()
    return model.logit_scale * (x @ c.T)


def _softmax_ce(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient w.r.t. the logits."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    n = logits.shape[0]
    ll = z[np.arange(n), labels] - np.log(e.sum(axis=1))
    grad = p.copy()
    grad[np.arange(n), labels] -= 1.0
    return float(-ll.mean()), grad / n


@dataclass(frozen=True)
class LossResult:
    total: float
    ce: float
    div: float
    residual_grad: np.ndarray


def combined_loss(
    model: TaskResidualModel, batch: np.ndarray, lam: float
) -> LossResult:
    """Cross-entropy plus lam * divergence, with the residual gradient.

    ``batch`` must hold exactly one row per class in class order.  The
    divergence compares the batch's embeddings (rows normalised) with the
    effective classifier rows; its gradient flows only into the classifier
    side, and from there into the residual.
    """
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    batch = np.asarray(batch, dtype=np.float64)
    k = model.base.class_count
    if batch.shape != (k, model.base.dim):
        raise ValueError(f"batch must be ({k}, {model.base.dim}), got {batch.shape}")
    labels = np.arange(k)

    pre = model.base.weights + model.alpha * model.residual
    c_hat, norms = _unit_rows(pre)
    x_hat, _ = _unit_rows(batch)
    logits = model.logit_scale * (x_hat @ c_hat.T)
    ce, g_logits = _softmax_ce(logits, labels)
    # dCE/dC_hat, then back through the row normalisation
    g_chat = model.logit_scale * (g_logits.T @ x_hat)

    grad_div, report = rtd_subgradient(PointCloud(x_hat), PointCloud(c_hat))
    div = report.score
    if lam > 0:
        g_chat = g_chat + lam * grad_div.grad_pt

    dots = np.sum(g_chat * c_hat, axis=1, keepdims=True)
    g_pre = (g_chat - dots * c_hat) / norms[:, None]
    residual_grad = model.alpha * g_pre
    return LossResult(
        total=ce + lam * div, ce=ce, div=div, residual_grad=residual_grad
    )


@dataclass(frozen=True)
class LambdaSearchResult:
    lam: float
    degenerate: bool
    mean_ce: float
    mean_div: float

    @property
    def ratio(self) -> float:
        return self.lam * self.mean_div / self.mean_ce if self.mean_ce else math.nan


def _search_weight(mean_ce: float, mean_div: float, band: tuple[float, float]) -> float:
    """Smallest-effort binary search for lam with lam*mean_div/mean_ce in band.

    Doubles an upper bound first, then bisects.  Assumes both means are
    positive.
    """
    lo_t, hi_t = band
    ratio = lambda lam: lam * mean_div / mean_ce
    hi = 1.0
    while ratio(hi) < lo_t:
        hi *= 2.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        r = ratio(mid)
        if r < lo_t:
            lo = mid
        elif r > hi_t:
            hi = mid
        else:
            return mid
    raise RuntimeError("weight search failed to converge")


def lambda_search(
    ds: EmbeddingDataset, base: BaseClassifier, config: TrainConfig
) -> LambdaSearchResult:
    """Pick the divergence weight from the initial loss balance.

    Measures mean cross-entropy and mean divergence over one epoch of
    class-balanced batches at residual = 0, then binary-searches lam until
    lam * mean_div / mean_ce lies inside ``config.target_ratio_band``.
    A dataset with zero divergence gets lam = 0 and the degenerate flag;
    zero cross-entropy is rejected.
    """
    model = TaskResidualModel.zero_init(base, config.alpha, config.logit_scale)
    batches = class_balanced_batches(ds, np.random.default_rng(config.seed))
    ce_sum = 0.0
    div_sum = 0.0
    for idx in batches:
        res = combined_loss(model, ds.embeddings[idx], lam=0.0)
        ce_sum += res.ce
        div_sum += res.div
    mean_ce = ce_sum / len(batches)
    mean_div = div_sum / len(batches)
    if mean_ce == 0.0:
        raise ValueError("initial cross-entropy is zero; the weight ratio is undefined")
    if mean_div == 0.0:
        return LambdaSearchResult(lam=0.0, degenerate=True, mean_ce=mean_ce, mean_div=0.0)
    lam = _search_weight(mean_ce, mean_div, config.target_ratio_band)
    return LambdaSearchResult(lam=lam, degenerate=False, mean_ce=mean_ce, mean_div=mean_div)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    l_ce: float
    l_div: float
    l_total: float
    train_acc: float


def cosine_lr(base_lr: float, step: int, total_steps: int) -> float:
    """Cosine annealing from base_lr at step 0 towards 0 at total_steps."""
    if total_steps <= 0:
        return base_lr
    return 0.5 * base_lr * (1.0 + math.cos(math.pi * step / total_steps))


def train(
    ds: EmbeddingDataset, base: BaseClassifier, config: TrainConfig
) -> tuple[TaskResidualModel, list[EpochStats]]:
    """Adam on the residual with cosine-annealed lr; base stays frozen.

    Per-epoch history records the mean of each loss term over the epoch's
    steps plus accuracy on the training split.  Runs are deterministic for
    a fixed config and dataset.
    """
    if ds.class_count != base.class_count:
        raise ValueError(
            f"dataset has {ds.class_count} classes, base has {base.class_count}"
        )
    if ds.dim != base.dim:
        raise ValueError(f"embedding dim {ds.dim} != base dim {base.dim}")
    if config.lam is not None:
        lam = float(config.lam)
    elif config.lambda_search_enabled:
        lam = lambda_search(ds, base, config).lam
    else:  # unreachable: the config constructor rejects this combination
        raise ValueError("no divergence weight available")

    model = TaskResidualModel.zero_init(base, config.alpha, config.logit_scale)
    rng = np.random.default_rng(config.seed)
    m = np.zeros_like(model.residual)
    v = np.zeros_like(model.residual)
    beta1, beta2, eps_adam = 0.9, 0.999, 1e-8
    history: list[EpochStats] = []
    if config.epochs == 0:
        return model, history
    steps_per_epoch = max(ds.indices_of_class(c).shape[0] for c in range(ds.class_count))
    total_steps = config.epochs * steps_per_epoch
    t = 0
    for epoch in range(config.epochs):
        ce_sum = div_sum = tot_sum = 0.0
        for idx in class_balanced_batches(ds, rng):
            res = combined_loss(model, ds.embeddings[idx], lam)
            lr_t = cosine_lr(config.lr, t, total_steps)
            t += 1
            g = res.residual_grad
            m = beta1 * m + (1 - beta1) * g
            v = beta2 * v + (1 - beta2) * g * g
            m_hat = m / (1 - beta1**t)
            v_hat = v / (1 - beta2**t)
            model.residual = model.residual - lr_t * m_hat / (np.sqrt(v_hat) + eps_adam)
            ce_sum += res.ce
            div_sum += res.div
            tot_sum += res.total
        history.append(
            EpochStats(
                epoch=epoch,
                l_ce=ce_sum / steps_per_epoch,
                l_div=div_sum / steps_per_epoch,
                l_total=tot_sum / steps_per_epoch,
                train_acc=evaluate(model, ds),
            )
        )
    return model, history


def evaluate(model: TaskResidualModel, ds: EmbeddingDataset) -> float:
    """Top-1 accuracy; argmax ties resolve to the lowest class index."""
    logits = forward_logits(model, ds.embeddings)
    preds = np.argmax(logits, axis=1)
    return float(np.mean(preds == ds.labels))


def gen_synthetic(
    class_count: int = 10,
    shots: int = 16,
    test_per_class: int = 50,
    dim: int = 32,
    cluster_spread: float = 0.25,
    modality_gap: float = 0.25,
    seed: int = 0,
) -> tuple[EmbeddingDataset, EmbeddingDataset, BaseClassifier]:
    """Synthetic dual-encoder data: clustered visual points, shifted text rows.

    Class centers are unit vectors; visual samples are normalised
    center-plus-noise with scale ``cluster_spread``; text rows are the
    centers pushed through a small random rotation and additive noise, both
    scaled by ``modality_gap``.  With spread 0 and gap 0 the visual samples
    equal the text rows exactly.
    """
    if class_count < 2:
        raise ValueError(f"class_count must be >= 2, got {class_count}")
    if shots < 1 or test_per_class < 1:
        raise ValueError("shots and test_per_class must be >= 1")
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    if cluster_spread < 0 or modality_gap < 0:
        raise ValueError("cluster_spread and modality_gap must be >= 0")
    rng = np.random.default_rng(seed)
    centers, _ = _unit_rows(rng.standard_normal((class_count, dim)))

    def sample_split(per_class: int, split: str) -> EmbeddingDataset:
        rows = []
        labels = []
        for c in range(class_count):
            noise = rng.standard_normal((per_class, dim))
            x, _ = _unit_rows(centers[c][None, :] + cluster_spread * noise)
            rows.append(x)
            labels.extend([c] * per_class)
        return EmbeddingDataset(
            embeddings=np.concatenate(rows, axis=0),
            labels=np.asarray(labels, dtype=np.int64),
            class_count=class_count,
            split=split,
        )

    train_ds = sample_split(shots, "train")
    test_ds = sample_split(test_per_class, "test")

    a = rng.standard_normal((dim, dim))
    skew = 0.5 * (a - a.T)
    spectral = np.linalg.norm(skew, ord=2)
    if spectral > 0:
        skew = skew * (modality_gap / spectral)
    else:
        skew = np.zeros_like(skew)
    rotation = expm(skew)
    text_noise = rng.standard_normal((class_count, dim))
    text, _ = _unit_rows(centers @ rotation.T + modality_gap * text_noise)
    return train_ds, test_ds, BaseClassifier(text)
