"""Graph-pair dataset synthesis with deterministic regeneration.

A dataset is a stack of (observation, latent graph) pairs sharing one
filter-coefficient draw, split into train/val/test. Every sample is drawn
from its own child random stream spawned by index, so the dataset is a pure
function of its metadata and regenerates bit-identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diffusion import (
    diffuse_white,
    ensemble_covariance,
    sample_correlation,
    sample_covariance,
    sample_unit_sphere_coeffs,
)
from .graphs import EnsembleSpec, sample_constrained
from .linalg import max_abs_eigval
from .validation import check_adjacency, check_matrix_batch

OBSERVATION_FORMS = ("covariance", "correlation")


@dataclass
class GraphPairDataset:
    observations: np.ndarray          # (T, n, n) normalized observed matrices
    labels: np.ndarray                # (T, n, n) latent graphs, weights in [0, 1]
    splits: dict[str, np.ndarray]     # disjoint index arrays: train, val, test
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.observations.shape[-1]

    @property
    def sample_count(self) -> int:
        return self.observations.shape[0]

    def subset(self, split: str) -> tuple[np.ndarray, np.ndarray]:
        idx = self.splits[split]
        return self.observations[idx], self.labels[idx]

    def validate(self):
        check_matrix_batch(self.observations, name="observations", symmetric=True)
        check_matrix_batch(self.labels, name="labels", symmetric=True)
        if self.observations.shape != self.labels.shape:
            raise ValueError("observations and labels must have equal shapes")
        seen: set[int] = set()
        covered = 0
        for name, idx in self.splits.items():
            idx = np.asarray(idx)
            if idx.size and (idx.min() < 0 or idx.max() >= self.sample_count):
                raise ValueError(f"split {name!r} indexes outside the sample range")
            as_set = set(int(i) for i in idx)
            if seen & as_set:
                raise ValueError(f"split {name!r} overlaps another split")
            seen |= as_set
            covered += idx.size
        if covered != self.sample_count:
            raise ValueError("splits must cover every sample exactly once")
        for i in range(self.sample_count):
            check_adjacency(self.labels[i], name=f"label {i}")


@dataclass
class DatasetConfig:
    """Everything needed to synthesize a dataset deterministically."""

    ensemble: EnsembleSpec
    train_size: int = 300
    val_size: int = 100
    test_size: int = 100
    filter_order: int = 2
    num_signals: int = 50
    exact_covariance: bool = False
    observation: str = "covariance"
    seed: int = 0

    def __post_init__(self):
        if min(self.train_size, self.val_size, self.test_size) < 0:
            raise ValueError("split sizes must be nonnegative")
        if self.train_size + self.val_size + self.test_size < 1:
            raise ValueError("dataset must contain at least one sample")
        if self.observation not in OBSERVATION_FORMS:
            raise ValueError(f"observation must be one of {OBSERVATION_FORMS}")
        if self.filter_order < 1:
            raise ValueError("filter order must be >= 1")
        if not self.exact_covariance and self.num_signals < 2:
            raise ValueError("estimated covariance needs at least two signals")

    def to_dict(self) -> dict:
        return {
            "ensemble": self.ensemble.to_dict(),
            "train_size": self.train_size,
            "val_size": self.val_size,
            "test_size": self.test_size,
            "filter_order": self.filter_order,
            "num_signals": self.num_signals,
            "exact_covariance": self.exact_covariance,
            "observation": self.observation,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetConfig":
        d = dict(d)
        d["ensemble"] = EnsembleSpec.from_dict(d["ensemble"])
        return cls(**d)


def _synthesize_pair(spec: EnsembleSpec, h: np.ndarray, cfg: DatasetConfig,
                     child: np.random.SeedSequence) -> tuple[np.ndarray, np.ndarray, float]:
    rng = np.random.default_rng(child)
    a_l = sample_constrained(spec, rng)
    if cfg.exact_covariance:
        raw = ensemble_covariance(a_l, h)
    else:
        x = diffuse_white(a_l, h, cfg.num_signals, rng)
        raw = sample_covariance(x) if cfg.observation == "covariance" else sample_correlation(x)
    scale = max_abs_eigval(raw)
    return raw / scale, a_l, scale


def build_dataset(cfg: DatasetConfig, seed: int | None = None) -> GraphPairDataset:
    """Synthesize a dataset: one shared coefficient draw, per-sample child
    streams, observations normalized by their dominant eigenvalue.

    ``seed`` overrides ``cfg.seed``; the effective seed lands in the
    metadata so the dataset can be regenerated bit-identically.
    """
    effective_seed = cfg.seed if seed is None else int(seed)
    root = np.random.SeedSequence(effective_seed)
    coeff_ss, sample_ss = root.spawn(2)
    h = sample_unit_sphere_coeffs(cfg.filter_order, np.random.default_rng(coeff_ss))

    total = cfg.train_size + cfg.val_size + cfg.test_size
    children = sample_ss.spawn(total)
    n = cfg.ensemble.n
    observations = np.empty((total, n, n))
    labels = np.empty((total, n, n))
    normalizers = np.empty(total)
    for i, child in enumerate(children):
        observations[i], labels[i], normalizers[i] = _synthesize_pair(
            cfg.ensemble, h, cfg, child)

    label_scale = 1.0
    peak = float(labels.max()) if total else 0.0
    weighted = bool(np.any((labels != 0.0) & (labels != 1.0)))
    if weighted and peak > 1.0:
        label_scale = peak
        labels = labels / label_scale

    splits = {
        "train": np.arange(0, cfg.train_size),
        "val": np.arange(cfg.train_size, cfg.train_size + cfg.val_size),
        "test": np.arange(cfg.train_size + cfg.val_size, total),
    }
    meta = {
        "config": cfg.to_dict(),
        "seed": effective_seed,
        "filter_coeffs": [float(v) for v in h],
        "normalizers": [float(v) for v in normalizers],
        "label_scale": label_scale,
        "weighted": weighted,
    }
    ds = GraphPairDataset(observations=observations, labels=labels, splits=splits,
                          meta=meta)
    ds.validate()
    return ds


def regenerate(meta: dict) -> GraphPairDataset:
    """Rebuild a dataset from stored metadata (bit-identical to the original)."""
    cfg = DatasetConfig.from_dict(meta["config"])
    return build_dataset(cfg, seed=int(meta["seed"]))
