"""Unrolled proximal-gradient network for graph deconvolution.

Each layer maps a stack of channel matrices ``A`` to a new stack via

    U_j   = mean_i [ alpha[j,i] A_i + beta[j,i] (A_O A_i + A_i A_O) + gamma[j,i] A_O ]
    U_j   <- zero diagonal, then divide by max |U_j| (skipped below eps)
    out_j = ReLU(U_j - tau_j)

which is one truncated proximal-gradient step with learnable mixture
coefficients. Stacking ``depth`` layers and reading the first output channel
yields the prediction. The forward pass records a tape holding every
intermediate needed for an exact reverse-mode gradient; subgradient
conventions are ReLU'(0) = 0, the max-magnitude normalizer is differentiated
with its argmax index held fixed (first index in row-major order on ties),
and the diagonal-zeroing step blocks gradient flow to diagonal entries.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .validation import check_symmetric, hollow

NORM_EPS = 1e-12

PRIOR_MODES = ("zeros", "ones", "fixed", "learned")


class ChannelMismatchError(ValueError):
    """Input tensor channel count does not match the layer parameters."""


class PriorShapeError(ValueError):
    """Prior matrix missing or shaped inconsistently with the input."""


@dataclass
class LayerParams:
    """Per-layer filter coefficients: (c_out, c_in) mixing matrices plus
    one nonnegative threshold per output channel."""

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    tau: np.ndarray

    @property
    def c_out(self) -> int:
        return self.alpha.shape[0]

    @property
    def c_in(self) -> int:
        return self.alpha.shape[1]

    def validate(self):
        shape = self.alpha.shape
        if self.beta.shape != shape or self.gamma.shape != shape:
            raise ValueError("alpha, beta, gamma must share one (c_out, c_in) shape")
        if self.tau.shape != (shape[0],):
            raise ValueError("tau must have one entry per output channel")
        for name, arr in (("alpha", self.alpha), ("beta", self.beta),
                          ("gamma", self.gamma), ("tau", self.tau)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        if np.any(self.tau < 0):
            raise ValueError("tau must be nonnegative")


@dataclass(frozen=True)
class GdnArch:
    """Architecture descriptor: depth, width, sharing, prior handling."""

    depth: int = 8
    channels: int = 8
    shared: bool = False
    prior_mode: str = "zeros"
    k0: bool = False

    def __post_init__(self):
        if self.depth < 1 or self.channels < 1:
            raise ValueError("depth and channels must be >= 1")
        if self.prior_mode not in PRIOR_MODES:
            raise ValueError(f"prior_mode must be one of {PRIOR_MODES}")

    def to_dict(self) -> dict:
        return {"depth": self.depth, "channels": self.channels, "shared": self.shared,
                "prior_mode": self.prior_mode, "k0": self.k0}

    @classmethod
    def from_dict(cls, d: dict) -> "GdnArch":
        return cls(depth=int(d["depth"]), channels=int(d["channels"]),
                   shared=bool(d["shared"]), prior_mode=str(d["prior_mode"]),
                   k0=bool(d.get("k0", False)))


@dataclass
class GdnParams:
    """Full parameter set. With ``shared`` the list holds one record aliased
    ``depth`` times; otherwise the first layer maps 1 -> C channels, interior
    layers C -> C, and the final layer C -> 1."""

    layers: list[LayerParams]
    shared: bool = False
    prior_mode: str = "zeros"
    prior: np.ndarray | None = None
    k0: bool = False

    @property
    def depth(self) -> int:
        return len(self.layers)

    def records(self) -> list[LayerParams]:
        """Unique parameter records in layer order (length 1 when shared)."""
        out, seen = [], set()
        for rec in self.layers:
            if id(rec) not in seen:
                seen.add(id(rec))
                out.append(rec)
        return out

    def record_index(self) -> list[int]:
        """Map layer position -> index into records()."""
        ids = {id(rec): i for i, rec in enumerate(self.records())}
        return [ids[id(rec)] for rec in self.layers]

    def validate(self):
        if not self.layers:
            raise ValueError("at least one layer is required")
        for rec in self.layers:
            rec.validate()
        if self.shared and len(self.records()) != 1:
            raise ValueError("shared parameters must alias a single record")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.c_out != nxt.c_in:
                raise ChannelMismatchError(
                    f"layer output width {prev.c_out} does not feed input width {nxt.c_in}"
                )
        if self.prior_mode not in PRIOR_MODES:
            raise ValueError(f"prior_mode must be one of {PRIOR_MODES}")
        if self.prior_mode in ("fixed", "learned") and self.prior is None:
            raise PriorShapeError(f"prior_mode={self.prior_mode!r} needs a prior matrix")

    def copy(self) -> "GdnParams":
        return copy.deepcopy(self)


@dataclass
class LayerGrads:
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    tau: np.ndarray


@dataclass
class GdnGrads:
    """Gradients aligned with ``GdnParams.records()`` plus the prior."""

    layers: list[LayerGrads]
    prior: np.ndarray | None = None


@dataclass
class LayerTape:
    inputs: np.ndarray      # (B, C_in, n, n) layer input
    cross: np.ndarray       # (B, C_in, n, n) A_O A_i + A_i A_O
    normed: np.ndarray      # (B, C_out, n, n) normalized pre-threshold slices
    denom: np.ndarray       # (B, C_out) divisor actually applied (1 when skipped)
    scale_idx: np.ndarray   # (B, C_out) flat row-major argmax of |slice|
    skip: np.ndarray        # (B, C_out) True where normalization was skipped
    active: np.ndarray      # (B, C_out, n, n) strict ReLU mask


@dataclass
class Tape:
    """Recorded forward pass; replaying the same inputs through the same
    parameters reproduces the outputs bit-for-bit."""

    a_o: np.ndarray
    params: GdnParams
    layer_tapes: list[LayerTape] = field(default_factory=list)
    prediction: np.ndarray | None = None


def k0_alpha_pattern(c_out: int, c_in: int) -> np.ndarray:
    """Fixed self-channel passthrough used by the truncated (no cross-term)
    model: identity mixing, with a lone input channel feeding every output."""
    if c_in == 1:
        return np.ones((c_out, 1))
    return np.eye(c_out, c_in)


def channel_plan(arch: GdnArch) -> list[tuple[int, int]]:
    """(c_in, c_out) per unique parameter record."""
    if arch.shared:
        return [(arch.channels, arch.channels)]
    if arch.depth == 1:
        return [(1, 1)]
    interior = [(arch.channels, arch.channels)] * (arch.depth - 2)
    return [(1, arch.channels)] + interior + [(arch.channels, 1)]


def init_params(arch: GdnArch, rng: np.random.Generator, n: int | None = None,
                prior: np.ndarray | None = None) -> GdnParams:
    """Draw initial parameters.

    Mixing coefficients are uniform on [-s, s] with s = 1/sqrt(3 c_in) so
    pre-activations stay within the O(1) scale the normalizer expects;
    thresholds start at 0.1. A learned prior starts at zeros (shape (n, n)).
    """
    records = []
    for c_in, c_out in channel_plan(arch):
        s = 1.0 / np.sqrt(3.0 * c_in)
        if arch.k0:
            alpha = k0_alpha_pattern(c_out, c_in)
            beta = np.zeros((c_out, c_in))
        else:
            alpha = rng.uniform(-s, s, size=(c_out, c_in))
            beta = rng.uniform(-s, s, size=(c_out, c_in))
        gamma = rng.uniform(-s, s, size=(c_out, c_in))
        tau = np.full(c_out, 0.1)
        records.append(LayerParams(alpha=alpha, beta=beta, gamma=gamma, tau=tau))

    layers = records * arch.depth if arch.shared else records

    prior_mat = None
    if arch.prior_mode == "fixed":
        if prior is None:
            raise PriorShapeError("fixed prior_mode requires a prior matrix")
        prior_mat = hollow(check_symmetric(prior, name="prior"))
    elif arch.prior_mode == "learned":
        if prior is not None:
            prior_mat = hollow(check_symmetric(prior, name="prior"))
        elif n is not None:
            prior_mat = np.zeros((n, n))
        else:
            raise PriorShapeError("learned prior_mode requires n or an initial prior")

    params = GdnParams(layers=layers, shared=arch.shared, prior_mode=arch.prior_mode,
                       prior=prior_mat, k0=arch.k0)
    params.validate()
    return params


def materialize_prior(params: GdnParams, n: int) -> np.ndarray:
    if params.prior_mode == "zeros":
        return np.zeros((n, n))
    if params.prior_mode == "ones":
        return np.ones((n, n)) - np.eye(n)
    if params.prior_mode in ("fixed", "learned"):
        if params.prior is None:
            raise PriorShapeError(f"prior_mode={params.prior_mode!r} needs a prior matrix")
        if params.prior.shape != (n, n):
            raise PriorShapeError(
                f"prior shape {params.prior.shape} does not match input size {(n, n)}"
            )
        return params.prior
    raise ValueError(f"unknown prior_mode {params.prior_mode!r}")


def _apply_layer(a: np.ndarray, a_o: np.ndarray, rec: LayerParams,
                 record_tape: bool) -> tuple[np.ndarray, LayerTape | None]:
    b, c_in, n, _ = a.shape
    if c_in != rec.c_in:
        raise ChannelMismatchError(
            f"layer expects {rec.c_in} input channels, tensor has {c_in}"
        )
    ao = a_o[:, None]
    cross = ao @ a + a @ ao
    u = (np.einsum("ji,bimn->bjmn", rec.alpha, a)
         + np.einsum("ji,bimn->bjmn", rec.beta, cross)
         + rec.gamma.sum(axis=1)[None, :, None, None] * ao) / c_in
    idx = np.arange(n)
    u[..., idx, idx] = 0.0
    flat_abs = np.abs(u).reshape(b, rec.c_out, -1)
    scale_idx = np.argmax(flat_abs, axis=-1)
    peak = np.take_along_axis(flat_abs, scale_idx[..., None], axis=-1)[..., 0]
    skip = peak < NORM_EPS
    denom = np.where(skip, 1.0, peak)
    normed = u / denom[..., None, None]
    pre = normed - rec.tau[None, :, None, None]
    out = np.maximum(pre, 0.0)
    tape = None
    if record_tape:
        tape = LayerTape(inputs=a, cross=cross, normed=normed, denom=denom,
                         scale_idx=scale_idx, skip=skip, active=pre > 0)
    return out, tape


def _forward_batch(a_o: np.ndarray, params: GdnParams,
                   record_tape: bool = True) -> tuple[np.ndarray, Tape | None]:
    params.validate()
    b, n, _ = a_o.shape
    prior = materialize_prior(params, n)
    state = np.broadcast_to(prior, (b, params.layers[0].c_in, n, n))
    tape = Tape(a_o=a_o, params=params) if record_tape else None
    for rec in params.layers:
        state, ltape = _apply_layer(state, a_o, rec, record_tape)
        if record_tape:
            tape.layer_tapes.append(ltape)
    pred = state[:, 0].copy()
    if record_tape:
        tape.prediction = pred
    return pred, tape


def _backward_layer(d_out: np.ndarray, ltape: LayerTape, rec: LayerParams,
                    a_o: np.ndarray) -> tuple[np.ndarray, LayerGrads]:
    b, c_out, n, _ = d_out.shape
    c_in = ltape.inputs.shape[1]
    d_pre = np.where(ltape.active, d_out, 0.0)
    d_tau = -d_pre.sum(axis=(0, 2, 3))
    d_u = d_pre / ltape.denom[..., None, None]
    # Normalizer backward: the argmax entry also moves the divisor.
    dots = np.einsum("bjmn,bjmn->bj", d_pre, ltape.normed) / ltape.denom
    flat = d_u.reshape(b, c_out, -1)
    anchor_sign = np.take_along_axis(
        ltape.normed.reshape(b, c_out, -1), ltape.scale_idx[..., None], axis=-1
    )[..., 0]
    corr = np.where(ltape.skip, 0.0, anchor_sign * dots)
    cur = np.take_along_axis(flat, ltape.scale_idx[..., None], axis=-1)[..., 0]
    np.put_along_axis(flat, ltape.scale_idx[..., None], (cur - corr)[..., None], axis=-1)
    d_u = flat.reshape(b, c_out, n, n)
    idx = np.arange(n)
    d_u[..., idx, idx] = 0.0

    d_alpha = np.einsum("bjmn,bimn->ji", d_u, ltape.inputs) / c_in
    d_beta = np.einsum("bjmn,bimn->ji", d_u, ltape.cross) / c_in
    g_col = np.einsum("bjmn,bmn->j", d_u, a_o) / c_in
    d_gamma = np.repeat(g_col[:, None], c_in, axis=1)

    d_in = np.einsum("ji,bjmn->bimn", rec.alpha, d_u) / c_in
    d_cross = np.einsum("ji,bjmn->bimn", rec.beta, d_u) / c_in
    ao = a_o[:, None]
    d_in = d_in + ao @ d_cross + d_cross @ ao
    return d_in, LayerGrads(alpha=d_alpha, beta=d_beta, gamma=d_gamma, tau=d_tau)


def _backward_batch(tape: Tape, d_pred: np.ndarray) -> GdnGrads:
    params = tape.params
    if len(tape.layer_tapes) != params.depth:
        raise ValueError("tape does not match the parameter record (depth differs)")
    records = params.records()
    rec_of_layer = params.record_index()
    grads = [LayerGrads(alpha=np.zeros_like(r.alpha), beta=np.zeros_like(r.beta),
                        gamma=np.zeros_like(r.gamma), tau=np.zeros_like(r.tau))
             for r in records]
    b, n, _ = tape.a_o.shape
    last_cout = params.layers[-1].c_out
    d_state = np.zeros((b, last_cout, n, n))
    d_state[:, 0] = d_pred
    for pos in range(params.depth - 1, -1, -1):
        rec = params.layers[pos]
        ltape = tape.layer_tapes[pos]
        if ltape.inputs.shape[1] != rec.c_in or d_state.shape[1] != rec.c_out:
            raise ChannelMismatchError("tape does not match the parameter record")
        d_state, g = _backward_layer(d_state, ltape, rec, tape.a_o)
        acc = grads[rec_of_layer[pos]]
        acc.alpha += g.alpha
        acc.beta += g.beta
        acc.gamma += g.gamma
        acc.tau += g.tau
    d_prior = None
    if params.prior_mode == "learned":
        d_prior = d_state.sum(axis=(0, 1))
    return GdnGrads(layers=grads, prior=d_prior)


def layer_forward(a_k, a_o, rec: LayerParams) -> tuple[np.ndarray, LayerTape]:
    """Apply one layer to a (C_in, n, n) channel stack; returns the
    (C_out, n, n) output and the recorded intermediates."""
    a_k = np.asarray(a_k, dtype=np.float64)
    if a_k.ndim == 2:
        a_k = a_k[None]
    a_o = check_symmetric(a_o, name="a_o")
    rec.validate()
    out, tape = _apply_layer(a_k[None], a_o[None], rec, record_tape=True)
    return out[0], tape


def forward(a_o, params: GdnParams) -> tuple[np.ndarray, Tape]:
    """Run the network on one observed matrix; returns the predicted
    adjacency (entries in [0, 1], hollow, symmetric) and the tape."""
    a_o = check_symmetric(a_o, name="a_o")
    pred, tape = _forward_batch(a_o[None], params, record_tape=True)
    return pred[0], tape


def forward_k0(a_o, params: GdnParams) -> tuple[np.ndarray, Tape]:
    """Forward pass of the truncated variant (no cross terms): the self
    channel passes through unweighted and beta is pinned to zero."""
    if not params.k0:
        raise ValueError("params were not built for the truncated (k0) variant")
    for rec in params.records():
        if np.any(rec.beta != 0.0) or not np.array_equal(
                rec.alpha, k0_alpha_pattern(rec.c_out, rec.c_in)):
            raise ValueError("k0 params must keep the fixed alpha pattern and zero beta")
    return forward(a_o, params)


def gradient_check(params: GdnParams, a_o: np.ndarray, d_pred: np.ndarray,
                   eps: float = 1e-5) -> float:
    """Max relative disagreement between reverse-mode gradients and central
    finite differences of ``sum(pred * d_pred)``.

    The prior is a symmetric-matrix parameter: its free coordinates are
    unordered entry pairs, so off-diagonal prior entries are perturbed in
    symmetric pairs (single-entry perturbations would probe asymmetric
    directions along which the tied slice maximum is not differentiable).
    """
    _, tape = forward(a_o, params)
    grads = _backward_batch(tape, d_pred[None])

    def objective():
        out, _ = forward(a_o, params)
        return float(np.sum(out * d_pred))

    def central(slots):
        for arr, idx in slots:
            arr[idx] += eps
        hi = objective()
        for arr, idx in slots:
            arr[idx] -= 2 * eps
        lo = objective()
        for arr, idx in slots:
            arr[idx] += eps
        return (hi - lo) / (2 * eps)

    def rel_err(fd, expected):
        # Differences below the central-difference cancellation floor count
        # as agreement; the quotient would only measure roundoff.
        if abs(fd - expected) <= 1e-8:
            return 0.0
        return abs(fd - expected) / max(abs(fd), abs(expected), 1e-6)

    worst = 0.0
    for rec, g in zip(params.records(), grads.layers):
        for arr, garr in ((rec.alpha, g.alpha), (rec.beta, g.beta),
                          (rec.gamma, g.gamma), (rec.tau, g.tau)):
            flat, gflat = arr.ravel(), garr.ravel()
            for k in range(flat.size):
                worst = max(worst, rel_err(central([(flat, k)]), gflat[k]))
    if params.prior_mode == "learned":
        n = params.prior.shape[0]
        for i in range(n):
            for j in range(i, n):
                slots = [(params.prior, (i, j))]
                expected = grads.prior[i, j]
                if j != i:
                    slots.append((params.prior, (j, i)))
                    expected = expected + grads.prior[j, i]
                worst = max(worst, rel_err(central(slots), expected))
    return worst


def backward(tape: Tape, d_pred) -> GdnGrads:
    """Exact reverse-mode gradients of a scalar loss with seed ``d_pred``
    (the loss gradient at the prediction) for every parameter and, when
    learned, the prior."""
    d_pred = np.asarray(d_pred, dtype=np.float64)
    if tape.prediction is None:
        raise ValueError("tape holds no recorded forward pass")
    if d_pred.ndim == 2:
        d_pred = d_pred[None]
    if d_pred.shape != tape.prediction.shape:
        raise ValueError(
            f"d_pred shape {d_pred.shape} does not match prediction {tape.prediction.shape}"
        )
    return _backward_batch(tape, d_pred)
