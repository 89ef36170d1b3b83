"""Scikit-learn style estimators wrapping the core model and baselines.

``GraphDeconvolver.fit(X, y)`` takes stacked observed matrices ``X`` of
shape (T, n, n) and latent adjacency labels ``y`` of the same shape, holds
out a validation tail for early stopping and threshold tuning, and exposes
``predict`` / ``predict_scores`` / ``score``. Parameters follow the sklearn
``get_params``/``set_params`` contract, so the estimators compose with
pipelines, ``clone``, and grid search.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import baselines, training
from .datasets import GraphPairDataset
from .diffusion import normalize_observation
from .gdn import GdnArch
from .training import TrainConfig
from .validation import check_matrix_batch


def _split_tail(count: int, fraction: float) -> tuple[np.ndarray, np.ndarray]:
    n_val = max(1, int(round(count * fraction)))
    if n_val >= count:
        raise ValueError("validation fraction leaves no training samples")
    return np.arange(0, count - n_val), np.arange(count - n_val, count)


class GraphDeconvolver(BaseEstimator):
    """Supervised latent-graph recovery from observed convolutional mixtures.

    Parameters mirror the training configuration; ``task`` selects the loss
    ("link" for hinge, "regress-mse"/"regress-mae" for edge-weight
    regression). With ``normalize=True`` each observation is divided by its
    dominant eigenvalue before entering the network, matching how training
    datasets are prepared.
    """

    def __init__(self, depth=8, channels=8, shared=False, prior_mode="zeros",
                 task="link", learning_rate=0.01, beta1=0.85, beta2=0.99,
                 batch_size=200, max_epochs=150, patience=25, hinge_margin=0.0,
                 validation_fraction=0.25, normalize=False, random_state=0):
        self.depth = depth
        self.channels = channels
        self.shared = shared
        self.prior_mode = prior_mode
        self.task = task
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.hinge_margin = hinge_margin
        self.validation_fraction = validation_fraction
        self.normalize = normalize
        self.random_state = random_state

    def _prepare(self, X):
        X = check_matrix_batch(X, name="X", symmetric=True)
        if self.normalize:
            X = np.stack([normalize_observation(x) for x in X])
        return X

    def fit(self, X, y):
        X = self._prepare(X)
        y = check_matrix_batch(y, name="y", symmetric=True)
        if X.shape != y.shape:
            raise ValueError(f"X {X.shape} and y {y.shape} disagree")
        train_idx, val_idx = _split_tail(X.shape[0], self.validation_fraction)
        ds = GraphPairDataset(observations=X, labels=y,
                              splits={"train": train_idx, "val": val_idx,
                                      "test": np.array([], dtype=np.int64)},
                              meta={})
        arch = GdnArch(depth=self.depth, channels=self.channels,
                       shared=self.shared, prior_mode=self.prior_mode)
        config = TrainConfig(task=self.task, lr=self.learning_rate,
                             beta1=self.beta1, beta2=self.beta2,
                             batch_size=self.batch_size,
                             max_epochs=self.max_epochs, patience=self.patience,
                             hinge_margin=self.hinge_margin,
                             seed=self.random_state)
        result = training.train(ds, arch, config)
        self.params_ = result.params
        self.threshold_ = result.threshold
        self.history_ = result.history
        self.n_nodes_ = X.shape[-1]
        return self

    def predict_scores(self, X):
        """Raw network outputs in [0, 1], shape (T, n, n)."""
        if not hasattr(self, "params_"):
            raise RuntimeError("estimator is not fitted")
        X = self._prepare(X)
        return training._predict_batch(self.params_, X)

    def predict(self, X):
        """Binary adjacency for the link task, raw scores for regression."""
        scores = self.predict_scores(X)
        if self.task == "link":
            return np.stack([baselines.hard_threshold(s, self.threshold_)
                             for s in scores])
        return scores

    def score(self, X, y):
        """Link accuracy (1 - link error) or negative per-edge MSE."""
        y = check_matrix_batch(y, name="y", symmetric=True)
        scores = self.predict_scores(X)
        if self.task == "link":
            errs = training.link_error_batch(scores, y, self.threshold_)
            return float(1.0 - errs.mean())
        return -float(training.per_edge_mse(scores, y).mean())


class NetworkDeconvolution(BaseEstimator):
    """Spectral deconvolution baseline with a validation-tuned cutoff.

    ``fit`` tunes the link threshold on the given pairs; ``transform``
    returns raw deconvolved scores and ``predict`` binarizes them.
    """

    def __init__(self, mode="pearson", eig_margin=0.01):
        self.mode = mode
        self.eig_margin = eig_margin

    def _scores(self, X):
        X = check_matrix_batch(X, name="X", symmetric=True)
        return np.stack([
            baselines.network_deconvolution(x, mode=self.mode,
                                            eig_margin=self.eig_margin)
            for x in X
        ])

    def fit(self, X, y):
        y = check_matrix_batch(y, name="y", symmetric=True)
        scores = np.abs(self._scores(X))
        self.threshold_ = training.tune_threshold(list(scores), list(y))
        return self

    def transform(self, X):
        return self._scores(X)

    def predict(self, X):
        if not hasattr(self, "threshold_"):
            raise RuntimeError("estimator is not fitted")
        scores = np.abs(self._scores(X))
        return np.stack([baselines.hard_threshold(s, self.threshold_)
                         for s in scores])


class HardThreshold(BaseEstimator):
    """Cutoff-rule baseline: tune one threshold, binarize |X| with it."""

    def fit(self, X, y):
        X = check_matrix_batch(X, name="X", symmetric=True)
        y = check_matrix_batch(y, name="y", symmetric=True)
        self.threshold_ = training.tune_threshold(list(np.abs(X)), list(y))
        return self

    def predict(self, X):
        if not hasattr(self, "threshold_"):
            raise RuntimeError("estimator is not fitted")
        X = check_matrix_batch(X, name="X", symmetric=True)
        return np.stack([baselines.hard_threshold(x, self.threshold_) for x in X])

    def score(self, X, y):
        y = check_matrix_batch(y, name="y", symmetric=True)
        preds = self.predict(X)
        errs = [training.link_error(p, t) for p, t in zip(preds, y)]
        return float(1.0 - np.mean(errs))
