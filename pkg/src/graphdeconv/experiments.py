"""End-to-end experiment protocols: benchmark, size generalization, ablations.

A benchmark cell trains the learnable models and tunes every classical
baseline on the validation split of the same dataset, evaluates everything
on the held-out test split, and repeats the whole data-generation process
(resampling filter coefficients) ``repeats`` times. Reported +- values are
standard errors across repeats; per-test-sample spread rides along inside
each repeat's report.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import baselines, training
from .datasets import DatasetConfig, GraphPairDataset, _synthesize_pair, build_dataset
from .diffusion import correlation_from_covariance
from .gdn import GdnArch
from .graphs import EnsembleSpec, block_membership, default_ensemble
from .linalg import max_abs_eigval
from .training import EvalReport, TrainConfig, make_report, tune_threshold_with_error
from .validation import hollow

GDN_VARIANTS = ("gdn", "gdn_s", "gdn_k0")
BASELINE_METHODS = ("threshold", "nd", "glasso", "lsopt")
_METHOD_IDS = {"gdn": 1, "gdn_s": 2, "gdn_k0": 3, "threshold": 4, "nd": 5,
               "glasso": 6, "lsopt": 7}

PRIOR_ABLATION_MODES = ("zeros", "ones", "block", "learned")


class ExperimentStageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class ExperimentConfig:
    domain: str = "RG"
    task: str = "link"
    n: int = 20
    train_size: int = 300
    val_size: int = 100
    test_size: int = 100
    filter_order: int = 2
    num_signals: int = 50
    exact_covariance: bool = False
    observation: str = "covariance"
    depth: int = 8
    channels: int = 8
    prior_mode: str = "zeros"
    lr: float = 0.01
    beta1: float = 0.85
    beta2: float = 0.99
    batch_size: int = 200
    max_epochs: int = 150
    patience: int = 25
    hinge_margin: float = 0.0
    repeats: int = 1
    seed: int = 0
    methods: tuple = ("gdn", "gdn_s", "threshold", "nd")
    ensemble_params: dict = field(default_factory=dict)
    density_range: tuple | None = None
    require_connected: bool = True
    max_tries: int = 1000
    glasso_alphas: tuple = (0.01, 0.05, 0.1, 0.2)
    lsopt_steps: tuple = (1e-3, 1e-2, 1e-1)
    lsopt_lambdas: tuple = (0.01, 0.1, 1.0)
    lsopt_iters: int = 300
    test_sizes: tuple = (20, 40, 60)
    graphs_per_size: int = 200

    def ensemble(self, n: int | None = None) -> EnsembleSpec:
        spec = default_ensemble(self.domain, self.n if n is None else n)
        overrides = {}
        if self.ensemble_params:
            overrides["params"] = {**spec.params, **self.ensemble_params}
        if self.density_range is not None:
            overrides["density_range"] = tuple(self.density_range)
        overrides["require_connected"] = self.require_connected
        overrides["max_tries"] = self.max_tries
        return replace(spec, **overrides)

    def dataset_config(self, n: int | None = None) -> DatasetConfig:
        return DatasetConfig(
            ensemble=self.ensemble(n),
            train_size=self.train_size, val_size=self.val_size,
            test_size=self.test_size, filter_order=self.filter_order,
            num_signals=self.num_signals, exact_covariance=self.exact_covariance,
            observation=self.observation, seed=self.seed,
        )

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(task=self.task, lr=self.lr, beta1=self.beta1,
                           beta2=self.beta2, batch_size=self.batch_size,
                           max_epochs=self.max_epochs, patience=self.patience,
                           hinge_margin=self.hinge_margin, seed=seed)

    def arch(self, variant: str) -> GdnArch:
        if variant not in GDN_VARIANTS:
            raise ValueError(f"unknown model variant {variant!r}")
        return GdnArch(depth=self.depth, channels=self.channels,
                       shared=(variant == "gdn_s"), prior_mode=self.prior_mode,
                       k0=(variant == "gdn_k0"))

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("methods", "glasso_alphas", "lsopt_steps", "lsopt_lambdas",
                    "test_sizes"):
            d[key] = list(d[key])
        if d["density_range"] is not None:
            d["density_range"] = list(d["density_range"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        for key in ("methods", "glasso_alphas", "lsopt_steps", "lsopt_lambdas",
                    "test_sizes"):
            if key in d:
                d[key] = tuple(d[key])
        if d.get("density_range") is not None:
            d["density_range"] = tuple(d["density_range"])
        return cls(**d)


def derive_seed(*parts) -> int:
    """Deterministic child seed from structured parts."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def _dataset_seed(cfg: ExperimentConfig, repeat: int) -> int:
    return derive_seed(cfg.seed, 101, repeat)


def _train_seed(cfg: ExperimentConfig, repeat: int, method: str) -> int:
    return derive_seed(cfg.seed, 202, repeat, _METHOD_IDS[method])


# ---------------------------------------------------------------------------
# Tuning helpers shared by the baselines


def golden_section(f, lo: float, hi: float, tol: float = 1e-9,
                   max_iter: int = 200) -> float:
    """Minimize a unimodal scalar function on [lo, hi]."""
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) < tol * (1.0 + abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _tune_scale(scores_val: np.ndarray, labels_val: np.ndarray) -> float:
    """Validation-MSE-minimizing multiplier for raw baseline scores."""
    def val_mse(c):
        return float(training.per_edge_mse(c * scores_val, labels_val).mean())

    num = float(np.sum(hollow(scores_val) * hollow(labels_val)))
    den = float(np.sum(hollow(scores_val) ** 2))
    center = num / den if den > 0 else 0.0
    radius = abs(center) + 1.0
    return golden_section(val_mse, center - radius, center + radius)


def _score_report(method: str, task: str, scores_val, labels_val, scores_test,
                  labels_test, tuned: dict | None = None) -> EvalReport:
    """Tune threshold (on |scores|) and scale on validation, report on test."""
    tuned = dict(tuned or {})
    t, val_err = tune_threshold_with_error(list(np.abs(scores_val)), list(labels_val))
    scale = _tune_scale(scores_val, labels_val)
    tuned.update({"threshold": t, "scale": scale, "val_error": val_err})
    report = make_report(method, task, np.abs(scores_test), labels_test, t,
                         extra=tuned)
    scaled = scale * scores_test
    mses = training.per_edge_mse(scaled, labels_test)
    maes = training.per_edge_mae(scaled, labels_test)
    se = (lambda x: float(np.std(x, ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0)
    report.mse, report.mse_se = float(mses.mean()), se(mses)
    report.mae, report.mae_se = float(maes.mean()), se(maes)
    return report


# ---------------------------------------------------------------------------
# Method evaluations (one dataset -> one EvalReport on its test split)


def _eval_gdn(cfg: ExperimentConfig, ds: GraphPairDataset, variant: str,
              repeat: int) -> tuple[EvalReport, training.TrainResult]:
    arch = cfg.arch(variant)
    tconf = cfg.train_config(_train_seed(cfg, repeat, variant))
    result = training.train(ds, arch, tconf)
    obs_test, lab_test = ds.subset("test")
    scores = training._predict_batch(result.params, obs_test)
    report = make_report(variant, cfg.task, scores, lab_test, result.threshold,
                         extra={"best_val": result.best_val,
                                "epochs_run": len(result.history)})
    return report, result


def _threshold_scores(obs: np.ndarray, mode: str) -> np.ndarray:
    if mode == "correlation":
        return np.stack([np.abs(correlation_from_covariance(o)) for o in obs])
    return np.abs(obs)


def _eval_threshold(cfg: ExperimentConfig, ds: GraphPairDataset) -> EvalReport:
    obs_val, lab_val = ds.subset("val")
    obs_test, lab_test = ds.subset("test")
    best = None
    for mode in ("observation", "correlation"):
        try:
            scores_val = _threshold_scores(obs_val, mode)
        except ValueError:
            continue
        t, err = tune_threshold_with_error(list(scores_val), list(lab_val))
        if best is None or err < best[1]:
            best = (mode, err, t)
    mode, _, _ = best
    report = _score_report("threshold", cfg.task,
                           _threshold_scores(obs_val, mode), lab_val,
                           _threshold_scores(obs_test, mode), lab_test,
                           tuned={"mode": mode})
    return report


def _eval_nd(cfg: ExperimentConfig, ds: GraphPairDataset) -> EvalReport:
    obs_val, lab_val = ds.subset("val")
    obs_test, lab_test = ds.subset("test")
    dec = lambda batch: np.stack([baselines.network_deconvolution(o) for o in batch])
    return _score_report("nd", cfg.task, dec(obs_val), lab_val,
                         dec(obs_test), lab_test)


def _glasso_scores(obs: np.ndarray, alpha: float) -> np.ndarray:
    out = np.empty_like(obs)
    for i, o in enumerate(obs):
        s = correlation_from_covariance(o)
        s = s / max_abs_eigval(s)
        res = baselines.glasso(s, alpha, tol=1e-5, max_iter=300)
        out[i] = np.abs(hollow(res.theta))
    return out


def _eval_glasso(cfg: ExperimentConfig, ds: GraphPairDataset) -> EvalReport:
    obs_val, lab_val = ds.subset("val")
    obs_test, lab_test = ds.subset("test")
    best = None
    for alpha in cfg.glasso_alphas:
        scores_val = _glasso_scores(obs_val, alpha)
        if cfg.task == "link":
            _, metric = tune_threshold_with_error(list(scores_val), list(lab_val))
        else:
            scale = _tune_scale(scores_val, lab_val)
            metric = float(training.per_edge_mse(scale * scores_val, lab_val).mean())
        if best is None or metric < best[1]:
            best = (alpha, metric, scores_val)
    alpha, _, scores_val = best
    return _score_report("glasso", cfg.task, scores_val, lab_val,
                         _glasso_scores(obs_test, alpha), lab_test,
                         tuned={"alpha": alpha})


def _lsopt_batch(obs: np.ndarray, normalizers: np.ndarray, h2: np.ndarray,
                 lam: float, step: float, iters: int) -> np.ndarray:
    raw = obs * normalizers[:, None, None]
    a, _ = baselines.lsopt_iterate(raw, h2, lam, step, iters)
    return a


def _eval_lsopt(cfg: ExperimentConfig, ds: GraphPairDataset) -> EvalReport:
    obs_val, lab_val = ds.subset("val")
    obs_test, lab_test = ds.subset("test")
    norms = np.asarray(ds.meta["normalizers"], dtype=np.float64)
    norm_val = norms[ds.splits["val"]]
    norm_test = norms[ds.splits["test"]]
    # Observations are (scaled) covariances of the diffusion, so the exact
    # mixture coefficients are those of the squared filter.
    h = np.asarray(ds.meta["filter_coeffs"], dtype=np.float64)
    h2 = np.convolve(h, h)
    best = None
    for step in cfg.lsopt_steps:
        for lam in cfg.lsopt_lambdas:
            try:
                scores_val = _lsopt_batch(obs_val, norm_val, h2, lam, step,
                                          cfg.lsopt_iters)
            except baselines.DivergenceError:
                continue
            if cfg.task == "link":
                _, metric = tune_threshold_with_error(list(scores_val), list(lab_val))
            else:
                scale = _tune_scale(scores_val, lab_val)
                metric = float(training.per_edge_mse(scale * scores_val, lab_val).mean())
            if best is None or metric < best[2]:
                best = (step, lam, metric, scores_val)
    if best is None:
        raise ExperimentStageError("lsopt", "every step/lambda combination diverged")
    step, lam, _, scores_val = best
    scores_test = _lsopt_batch(obs_test, norm_test, h2, lam, step, cfg.lsopt_iters)
    return _score_report("lsopt", cfg.task, scores_val, lab_val,
                         scores_test, lab_test, tuned={"step": step, "lam": lam})


def evaluate_method(cfg: ExperimentConfig, ds: GraphPairDataset, method: str,
                    repeat: int = 0) -> EvalReport:
    try:
        if method in GDN_VARIANTS:
            report, _ = _eval_gdn(cfg, ds, method, repeat)
            return report
        if method == "threshold":
            return _eval_threshold(cfg, ds)
        if method == "nd":
            return _eval_nd(cfg, ds)
        if method == "glasso":
            return _eval_glasso(cfg, ds)
        if method == "lsopt":
            return _eval_lsopt(cfg, ds)
    except ExperimentStageError:
        raise
    except Exception as exc:
        raise ExperimentStageError(method, str(exc)) from exc
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# Benchmark


@dataclass
class BenchmarkRow:
    method: str
    task: str
    repeats: int
    error: float
    error_se: float
    mse: float
    mse_se: float
    mae: float
    mae_se: float
    per_repeat: list[dict]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class BenchmarkTable:
    config: dict
    rows: list[BenchmarkRow]

    def row(self, method: str) -> BenchmarkRow:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)

    def to_dict(self) -> dict:
        return {"config": self.config, "rows": [r.to_dict() for r in self.rows]}

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkTable":
        return cls(config=d["config"],
                   rows=[BenchmarkRow(**r) for r in d["rows"]])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["method", "task", "repeats", "error", "error_se",
                             "mse", "mse_se", "mae", "mae_se"])
            for r in self.rows:
                writer.writerow([r.method, r.task, r.repeats, repr(r.error),
                                 repr(r.error_se), repr(r.mse), repr(r.mse_se),
                                 repr(r.mae), repr(r.mae_se)])


def _aggregate(method: str, task: str, reports: list[EvalReport]) -> BenchmarkRow:
    def stats(values):
        arr = np.asarray(values, dtype=np.float64)
        se = float(np.std(arr, ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
        return float(arr.mean()), se

    err, err_se = stats([r.error for r in reports])
    mse, mse_se = stats([r.mse for r in reports])
    mae, mae_se = stats([r.mae for r in reports])
    return BenchmarkRow(method=method, task=task, repeats=len(reports),
                        error=err, error_se=err_se, mse=mse, mse_se=mse_se,
                        mae=mae, mae_se=mae_se,
                        per_repeat=[r.to_dict() for r in reports])


def run_benchmark(cfg: ExperimentConfig) -> BenchmarkTable:
    """Train the learnable models and tune/evaluate the baselines on
    ``repeats`` independently regenerated datasets; aggregate per method."""
    collected: dict[str, list[EvalReport]] = {m: [] for m in cfg.methods}
    for repeat in range(cfg.repeats):
        try:
            ds = build_dataset(cfg.dataset_config(), seed=_dataset_seed(cfg, repeat))
        except Exception as exc:
            raise ExperimentStageError("dataset", str(exc)) from exc
        for method in cfg.methods:
            collected[method].append(evaluate_method(cfg, ds, method, repeat))
    rows = [_aggregate(m, cfg.task, reps) for m, reps in collected.items()]
    return BenchmarkTable(config=cfg.to_dict(), rows=rows)


# ---------------------------------------------------------------------------
# Size generalization


@dataclass
class SizeGenResult:
    config: dict
    train_n: int
    reports: dict[int, dict]   # size -> EvalReport dict

    def to_dict(self) -> dict:
        return {"config": self.config, "train_n": self.train_n,
                "reports": {str(k): v for k, v in self.reports.items()}}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["size", "error", "error_se", "mse", "mse_se",
                             "mae", "mae_se"])
            for size in sorted(self.reports):
                r = self.reports[size]
                writer.writerow([size, repr(r["error"]), repr(r["error_se"]),
                                 repr(r["mse"]), repr(r["mse_se"]),
                                 repr(r["mae"]), repr(r["mae_se"])])


def _fresh_pairs(cfg: ExperimentConfig, h: np.ndarray, size: int, count: int,
                 seed: int) -> tuple[np.ndarray, np.ndarray]:
    ds_cfg = replace(cfg.dataset_config(n=size), exact_covariance=True)
    children = np.random.SeedSequence(seed).spawn(count)
    obs = np.empty((count, size, size))
    labels = np.empty((count, size, size))
    for i, child in enumerate(children):
        obs[i], labels[i], _ = _synthesize_pair(ds_cfg.ensemble, h, ds_cfg, child)
    return obs, labels


def run_size_generalization(cfg: ExperimentConfig, variant: str = "gdn_s") -> SizeGenResult:
    """Train at ``cfg.n`` on exact covariances, then evaluate the frozen model
    (threshold included) on fresh graphs at each requested size."""
    cfg = replace(cfg, exact_covariance=True)
    if cfg.prior_mode == "learned":
        raise ValueError("a learned prior is size-bound; use zeros/ones for size runs")
    ds = build_dataset(cfg.dataset_config(), seed=_dataset_seed(cfg, 0))
    report, result = _eval_gdn(cfg, ds, variant, repeat=0)
    h = np.asarray(ds.meta["filter_coeffs"], dtype=np.float64)

    reports: dict[int, dict] = {}
    for size in cfg.test_sizes:
        if size == cfg.n:
            reports[size] = report.to_dict()
            continue
        obs, labels = _fresh_pairs(cfg, h, size, cfg.graphs_per_size,
                                   derive_seed(cfg.seed, 303, size))
        scores = training._predict_batch(result.params, obs)
        reports[size] = make_report(variant, cfg.task, scores, labels,
                                    result.threshold).to_dict()
    return SizeGenResult(config=cfg.to_dict(), train_n=cfg.n, reports=reports)


# ---------------------------------------------------------------------------
# Prior ablation


def block_prior(n: int, blocks: int) -> np.ndarray:
    """Hollow all-ones within each community, zeros across."""
    member = block_membership(n, blocks)
    prior = (member[:, None] == member[None, :]).astype(np.float64)
    return hollow(prior)


def run_prior_ablation(cfg: ExperimentConfig) -> dict[str, dict]:
    """Four training runs differing only in the prior: zeros, hollow ones,
    fixed block-diagonal, and learned. Same dataset and same seeds."""
    if cfg.domain.upper() != "SBM":
        raise ValueError("the prior ablation runs on the SBM domain")
    ds = build_dataset(cfg.dataset_config(), seed=_dataset_seed(cfg, 0))
    blocks = int(cfg.ensemble().params["blocks"])
    prior = block_prior(cfg.n, blocks)
    out: dict[str, dict] = {}
    for mode in PRIOR_ABLATION_MODES:
        prior_mode = "fixed" if mode == "block" else mode
        run_cfg = replace(cfg, prior_mode=prior_mode)
        if prior_mode == "fixed":
            ds.meta["prior"] = prior.tolist()
        report, result = _eval_gdn(run_cfg, ds, "gdn", repeat=0)
        entry = report.to_dict()
        entry["prior_mode"] = mode
        entry["prior_grad_norms"] = [rec.prior_grad_norm for rec in result.history]
        out[mode] = entry
    return out
