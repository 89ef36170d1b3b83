"""Supervised training: losses, Adam, threshold tuning, metrics, train loop.

Losses are summed over off-diagonal entries of a single prediction/label
pair and averaged over the mini-batch; their exact (sub)gradients take the
value 0 at kinks. Link decisions come from a cutoff threshold tuned on
training predictions during training and re-tuned on validation once the
final model is chosen.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import gdn
from .gdn import GdnArch, GdnGrads, GdnParams
from .validation import hollow

TASKS = ("link", "regress-mse", "regress-mae")

ADAM_EPS = 1e-8


class NonFiniteGradientError(RuntimeError):
    """A non-finite gradient or loss halted training."""


@dataclass
class TrainConfig:
    task: str = "link"
    lr: float = 0.01
    beta1: float = 0.85
    beta2: float = 0.99
    batch_size: int = 200
    max_epochs: int = 150
    patience: int = 20
    hinge_margin: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1, beta2 must lie in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.hinge_margin < 0:
            raise ValueError("hinge_margin must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class EvalReport:
    """Per-task metrics with mean and standard error across test samples."""

    method: str
    task: str
    count: int
    error: float
    error_se: float
    mse: float
    mse_se: float
    mae: float
    mae_se: float
    threshold: float | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.error <= 1.0:
            raise ValueError("link error must lie in [0, 1]")
        if self.mse < 0 or self.mae < 0:
            raise ValueError("mse and mae must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(**d)


def _offdiag_mask(n: int) -> np.ndarray:
    return ~np.eye(n, dtype=bool)


def _hinge_batch(preds: np.ndarray, labels: np.ndarray, margin: float):
    mask = _offdiag_mask(preds.shape[-1])
    is_edge = labels > 0
    neg_term = np.maximum(preds - margin, 0.0)
    pos_term = np.maximum(1.0 - margin - preds, 0.0)
    per_entry = np.where(is_edge, pos_term, neg_term) * mask
    loss = per_entry.sum(axis=(-1, -2))
    grad = np.where(is_edge, -(pos_term > 0).astype(np.float64),
                    (neg_term > 0).astype(np.float64)) * mask
    return loss, grad


def _mse_batch(preds: np.ndarray, labels: np.ndarray):
    mask = _offdiag_mask(preds.shape[-1])
    diff = (preds - labels) * mask
    loss = 0.5 * np.sum(diff * diff, axis=(-1, -2))
    return loss, diff


def _mae_batch(preds: np.ndarray, labels: np.ndarray):
    mask = _offdiag_mask(preds.shape[-1])
    diff = (preds - labels) * mask
    loss = np.sum(np.abs(diff), axis=(-1, -2))
    return loss, np.sign(diff)


_BATCH_LOSSES = {"link": None, "regress-mse": _mse_batch, "regress-mae": _mae_batch}


def _check_pair(pred, label):
    pred = np.asarray(pred, dtype=np.float64)
    label = np.asarray(label, dtype=np.float64)
    if pred.shape != label.shape:
        raise ValueError(f"shape mismatch: prediction {pred.shape} vs label {label.shape}")
    return pred, label


def hinge_loss(pred, label, margin: float = 0.0):
    """Hinge loss over off-diagonal entries: non-edges pay (pred - margin)+,
    edges pay (1 - margin - pred)+. Returns (loss, subgradient)."""
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    pred, label = _check_pair(pred, label)
    loss, grad = _hinge_batch(pred, label, margin)
    return float(loss), grad


def mse_loss(pred, label):
    """Half squared Frobenius error over off-diagonal entries."""
    pred, label = _check_pair(pred, label)
    loss, grad = _mse_batch(pred, label)
    return float(loss), grad


def mae_loss(pred, label):
    """L1 error over off-diagonal entries; subgradient in {-1, 0, +1}."""
    pred, label = _check_pair(pred, label)
    loss, grad = _mae_batch(pred, label)
    return float(loss), grad


def batch_loss(task: str, preds, labels, margin: float = 0.0):
    """Mean per-sample loss over a batch and the matching d_pred seed."""
    if task == "link":
        loss, grad = _hinge_batch(preds, labels, margin)
    else:
        loss, grad = _BATCH_LOSSES[task](preds, labels)
    b = preds.shape[0]
    return float(loss.mean()), grad / b


# ---------------------------------------------------------------------------
# Adam


def _named_params(params: GdnParams) -> list[tuple[str, np.ndarray]]:
    out = []
    for i, rec in enumerate(params.records()):
        out.extend([(f"layer{i}.alpha", rec.alpha), (f"layer{i}.beta", rec.beta),
                    (f"layer{i}.gamma", rec.gamma), (f"layer{i}.tau", rec.tau)])
    if params.prior_mode == "learned":
        out.append(("prior", params.prior))
    return out


def _named_grads(params: GdnParams, grads: GdnGrads) -> list[tuple[str, np.ndarray]]:
    out = []
    for i, g in enumerate(grads.layers):
        out.extend([(f"layer{i}.alpha", g.alpha), (f"layer{i}.beta", g.beta),
                    (f"layer{i}.gamma", g.gamma), (f"layer{i}.tau", g.tau)])
    if params.prior_mode == "learned":
        out.append(("prior", grads.prior))
    return out


@dataclass
class AdamState:
    step: int
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]

    @classmethod
    def init(cls, params: GdnParams) -> "AdamState":
        named = _named_params(params)
        return cls(step=0,
                   m={k: np.zeros_like(a) for k, a in named},
                   v={k: np.zeros_like(a) for k, a in named})


def adam_step(params: GdnParams, grads: GdnGrads, state: AdamState,
              config: TrainConfig) -> tuple[GdnParams, AdamState]:
    """One Adam update with bias correction, in place.

    Thresholds are clamped to [0, inf) afterwards; a learned prior is
    re-projected onto symmetric hollow matrices; frozen coefficients of the
    truncated variant are skipped. Raises on non-finite gradients.
    """
    named_p = dict(_named_params(params))
    named_g = dict(_named_grads(params, grads))
    if named_p.keys() != named_g.keys():
        raise ValueError("gradient record does not match parameter record")
    state.step += 1
    t = state.step
    for name in named_p:
        g = named_g[name]
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient in {name} at step {t}")
        if params.k0 and (name.endswith(".alpha") or name.endswith(".beta")):
            continue
        m = state.m[name]
        v = state.v[name]
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        v *= config.beta2
        v += (1.0 - config.beta2) * g * g
        m_hat = m / (1.0 - config.beta1 ** t)
        v_hat = v / (1.0 - config.beta2 ** t)
        named_p[name] -= config.lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    for rec in params.records():
        np.maximum(rec.tau, 0.0, out=rec.tau)
    if params.prior_mode == "learned":
        params.prior[:] = hollow(0.5 * (params.prior + params.prior.T))
    return params, state


# ---------------------------------------------------------------------------
# Link threshold and metrics


def _collect_upper(mats) -> np.ndarray:
    vals = []
    for m in mats:
        m = np.asarray(m)
        iu = np.triu_indices(m.shape[-1], k=1)
        vals.append(m[iu])
    return np.concatenate(vals) if vals else np.array([])


def tune_threshold(preds, labels) -> float:
    """Cutoff minimizing aggregate link error over the given graphs.

    Candidates are 0, midpoints between consecutive distinct predicted
    values, and just past the maximum; ties resolve to the smaller cutoff.
    """
    t, _ = tune_threshold_with_error(preds, labels)
    return t


def tune_threshold_with_error(preds, labels) -> tuple[float, float]:
    if len(preds) == 0 or len(preds) != len(labels):
        raise ValueError("need matched, nonempty prediction/label lists")
    scores = _collect_upper(preds)
    truth = _collect_upper(labels) > 0
    order = np.argsort(scores, kind="stable")
    s_sorted = scores[order]
    y_sorted = truth[order]
    total = scores.size
    # pos_below[k] = edges among the k smallest scores (predicted absent).
    pos_below = np.concatenate([[0], np.cumsum(y_sorted)])
    neg_below = np.arange(total + 1) - pos_below
    neg_total = total - int(pos_below[-1])

    uniq = np.unique(s_sorted)
    top = float(uniq[-1])
    candidates = np.concatenate([[0.0], 0.5 * (uniq[:-1] + uniq[1:]),
                                 [top + 1e-9 * max(1.0, abs(top))]])
    best_t, best_err = None, None
    for t in np.unique(candidates):
        k = int(np.searchsorted(s_sorted, t, side="left"))
        errors = int(pos_below[k]) + (neg_total - int(neg_below[k]))
        if best_err is None or errors < best_err:
            best_err, best_t = errors, float(t)
    return best_t, best_err / total


def link_error(pred_binary, label) -> float:
    """Mismatched unordered node pairs over all unordered pairs."""
    pred_binary, label = _check_pair(pred_binary, label)
    n = pred_binary.shape[-1]
    if n < 2:
        raise ValueError("link error needs at least two nodes")
    iu = np.triu_indices(n, k=1)
    mismatch = (pred_binary[iu] > 0) != (label[iu] > 0)
    return float(np.count_nonzero(mismatch)) / iu[0].size


def link_error_batch(scores: np.ndarray, labels: np.ndarray, threshold: float) -> np.ndarray:
    """Per-sample link error of thresholded scores against binary supports."""
    n = scores.shape[-1]
    iu = np.triu_indices(n, k=1)
    pred = scores[:, iu[0], iu[1]] >= threshold
    truth = labels[:, iu[0], iu[1]] > 0
    return (pred != truth).mean(axis=1)


def per_edge_mse(preds: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-sample squared error averaged over the n(n-1) off-diagonal slots."""
    n = preds.shape[-1]
    mask = _offdiag_mask(n)
    diff = (preds - labels) * mask
    return np.sum(diff * diff, axis=(-1, -2)) / (n * (n - 1))


def per_edge_mae(preds: np.ndarray, labels: np.ndarray) -> np.ndarray:
    n = preds.shape[-1]
    mask = _offdiag_mask(n)
    return np.sum(np.abs(preds - labels) * mask, axis=(-1, -2)) / (n * (n - 1))


def make_report(method: str, task: str, scores: np.ndarray, labels: np.ndarray,
                threshold: float | None, extra: dict | None = None) -> EvalReport:
    """Standard-error report of all three metrics over a test batch."""
    errs = (link_error_batch(scores, labels, threshold)
            if threshold is not None else np.zeros(scores.shape[0]))
    mses = per_edge_mse(scores, labels)
    maes = per_edge_mae(scores, labels)

    def se(x):
        return float(np.std(x, ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0

    return EvalReport(method=method, task=task, count=int(scores.shape[0]),
                      error=float(errs.mean()), error_se=se(errs),
                      mse=float(mses.mean()), mse_se=se(mses),
                      mae=float(maes.mean()), mae_se=se(maes),
                      threshold=threshold, extra=extra or {})


# ---------------------------------------------------------------------------
# Training loop


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_metric: float
    wall_ms: float
    prior_grad_norm: float = 0.0  # diagnostic; not part of the CSV schema


@dataclass
class TrainResult:
    params: GdnParams
    history: list[EpochRecord]
    threshold: float
    best_val: float


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, batch: int, message: str):
        super().__init__(f"training diverged at epoch {epoch}, batch {batch}: {message}")
        self.epoch = epoch
        self.batch = batch


def _predict_batch(params: GdnParams, obs: np.ndarray) -> np.ndarray:
    pred, _ = gdn._forward_batch(obs, params, record_tape=False)
    return pred


def train(dataset, arch: GdnArch, config: TrainConfig) -> TrainResult:
    """Mini-batch training with early stopping on a validation metric.

    The validation metric is the link error under a threshold tuned on that
    epoch's training predictions (link task) or the mean task loss
    (regression). The best-validation parameters are retained and the
    returned threshold is re-tuned on validation predictions of that model.
    """
    obs_train = dataset.observations[dataset.splits["train"]]
    lab_train = dataset.labels[dataset.splits["train"]]
    obs_val = dataset.observations[dataset.splits["val"]]
    lab_val = dataset.labels[dataset.splits["val"]]
    n = obs_train.shape[-1]

    rng = np.random.default_rng(config.seed)
    params = init_params_for(arch, n, rng, dataset)
    state = AdamState.init(params)

    best_params = params.copy()
    best_val = np.inf
    since_best = 0
    history: list[EpochRecord] = []

    for epoch in range(config.max_epochs):
        tic = time.perf_counter()
        order = rng.permutation(obs_train.shape[0])
        losses = []
        prior_norm = 0.0
        for start in range(0, order.size, config.batch_size):
            bidx = order[start:start + config.batch_size]
            preds, tape = gdn._forward_batch(obs_train[bidx], params, record_tape=True)
            loss, d_pred = batch_loss(config.task, preds, lab_train[bidx],
                                      config.hinge_margin)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, start // config.batch_size,
                                            f"loss = {loss}")
            grads = gdn._backward_batch(tape, d_pred)
            if grads.prior is not None:
                prior_norm += float(np.linalg.norm(grads.prior))
            params, state = adam_step(params, grads, state, config)
            losses.append((loss, bidx.size))
        train_loss = sum(l * w for l, w in losses) / sum(w for _, w in losses)

        val_metric = _validation_metric(params, config, obs_train, lab_train,
                                        obs_val, lab_val)
        history.append(EpochRecord(epoch=epoch, train_loss=train_loss,
                                   val_metric=val_metric,
                                   wall_ms=(time.perf_counter() - tic) * 1e3,
                                   prior_grad_norm=prior_norm))
        if val_metric < best_val:
            best_val = val_metric
            best_params = params.copy()
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break

    val_scores = _predict_batch(best_params, obs_val)
    threshold = tune_threshold(list(val_scores), list(lab_val))
    return TrainResult(params=best_params, history=history, threshold=threshold,
                       best_val=float(best_val))


def _validation_metric(params, config, obs_train, lab_train, obs_val, lab_val) -> float:
    val_scores = _predict_batch(params, obs_val)
    if config.task == "link":
        train_scores = _predict_batch(params, obs_train)
        t_epoch = tune_threshold(list(train_scores), list(lab_train))
        return float(link_error_batch(val_scores, lab_val, t_epoch).mean())
    fn = _BATCH_LOSSES[config.task]
    loss, _ = fn(val_scores, lab_val)
    return float(loss.mean())


def init_params_for(arch: GdnArch, n: int, rng: np.random.Generator,
                    dataset=None) -> GdnParams:
    """Initialize parameters, pulling a fixed prior from dataset metadata
    when the architecture asks for one.

    A learned prior starts at the edgewise mean of the training labels (the
    natural supervised initial estimate, refined by gradient descent) and at
    zeros when no labels are available.
    """
    prior = None
    if arch.prior_mode == "fixed":
        if dataset is None or "prior" not in dataset.meta:
            raise ValueError("fixed prior_mode needs dataset meta['prior']")
        prior = np.asarray(dataset.meta["prior"], dtype=np.float64)
    elif arch.prior_mode == "learned" and dataset is not None:
        _, lab_train = dataset.subset("train")
        if lab_train.shape[0]:
            prior = hollow(lab_train.mean(axis=0))
    return gdn.init_params(arch, rng, n=n, prior=prior)


def write_history_csv(history: list[EpochRecord], path) -> None:
    import csv

    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "train_loss", "val_metric", "wall_ms"])
        for rec in history:
            writer.writerow([rec.epoch, repr(rec.train_loss), repr(rec.val_metric),
                             repr(rec.wall_ms)])
