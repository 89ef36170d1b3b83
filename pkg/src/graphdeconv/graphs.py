"""Random-graph ensembles with rejection sampling.

Generators return dense {0,1} adjacency matrices (symmetric, hollow) and
are deterministic given a ``numpy.random.Generator``. ``sample_constrained``
wraps a generator with connectivity and edge-density acceptance rules.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .validation import check_adjacency


class SamplingError(RuntimeError):
    """Rejection sampling exhausted its budget."""


@dataclass(frozen=True)
class EnsembleSpec:
    """A graph distribution plus its acceptance rules.

    ``kind`` is one of ER, RG, BA, SBM, or FILE (latent graphs loaded from a
    user-supplied ``.npy`` stack). ``params`` holds kind-specific values.
    """

    kind: str
    n: int
    params: dict = field(default_factory=dict)
    density_range: tuple[float, float] = (0.0, 1.0)
    require_connected: bool = True
    max_tries: int = 1000

    def __post_init__(self):
        lo, hi = self.density_range
        if not (0.0 <= lo <= hi <= 1.0):
            raise ValueError(f"invalid density range {self.density_range}")
        if self.max_tries < 1:
            raise ValueError("max_tries must be >= 1")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "params": dict(self.params),
            "density_range": list(self.density_range),
            "require_connected": self.require_connected,
            "max_tries": self.max_tries,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleSpec":
        return cls(
            kind=d["kind"],
            n=int(d["n"]),
            params=dict(d.get("params", {})),
            density_range=tuple(d.get("density_range", (0.0, 1.0))),
            require_connected=bool(d.get("require_connected", True)),
            max_tries=int(d.get("max_tries", 1000)),
        )


def gen_er(n: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """Erdos-Renyi graph: each unordered pair is an edge with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be a probability, got {p}")
    iu = np.triu_indices(n, k=1)
    a = np.zeros((n, n))
    a[iu] = (rng.random(iu[0].size) < p).astype(np.float64)
    return a + a.T


def gen_rg(n: int, d: int, r: float, rng: np.random.Generator) -> np.ndarray:
    """Random geometric graph on uniform points in the unit d-cube.

    Nodes are joined when their Euclidean distance is at most r.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if r < 0.0:
        raise ValueError("radius must be nonnegative")
    pts = rng.random((n, d))
    diff = pts[:, None, :] - pts[None, :, :]
    dist2 = np.sum(diff * diff, axis=-1)
    a = (dist2 <= r * r).astype(np.float64)
    np.fill_diagonal(a, 0.0)
    return a


def gen_ba(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Barabasi-Albert preferential attachment from an m-node seed clique.

    Each arriving node attaches m distinct edges, targets drawn with
    probability proportional to current degree. Final edge count is exactly
    ``m*(m-1)/2 + (n-m)*m``.
    """
    if not 1 <= m < n:
        raise ValueError(f"need 1 <= m < n, got m={m}, n={n}")
    a = np.zeros((n, n))
    a[:m, :m] = 1.0
    np.fill_diagonal(a, 0.0)
    # One slot per unit of degree; sampling slots uniformly is sampling
    # nodes proportionally to degree.
    slots: list[int] = [v for v in range(m) for _ in range(m - 1)]
    for v in range(m, n):
        targets: set[int] = set()
        while len(targets) < m:
            if slots:
                u = slots[rng.integers(len(slots))]
            else:
                # All-zero degrees only occur for the m=1 singleton seed.
                u = int(rng.integers(v))
            targets.add(u)
        for u in targets:
            a[v, u] = 1.0
            a[u, v] = 1.0
            slots.append(u)
        slots.extend([v] * m)
    return a


def gen_sbm(n: int, blocks: int, p_in: float, p_out: float, rng: np.random.Generator) -> np.ndarray:
    """Stochastic block model with equal-sized contiguous communities."""
    if blocks < 1 or n % blocks != 0:
        raise ValueError(f"blocks ({blocks}) must divide n ({n})")
    for name, p in (("p_in", p_in), ("p_out", p_out)):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{name} must be a probability, got {p}")
    size = n // blocks
    membership = np.arange(n) // size
    iu = np.triu_indices(n, k=1)
    same = membership[iu[0]] == membership[iu[1]]
    probs = np.where(same, p_in, p_out)
    a = np.zeros((n, n))
    a[iu] = (rng.random(iu[0].size) < probs).astype(np.float64)
    return a + a.T


def block_membership(n: int, blocks: int) -> np.ndarray:
    """Community label per node for the equal-block layout used by gen_sbm."""
    if blocks < 1 or n % blocks != 0:
        raise ValueError(f"blocks ({blocks}) must divide n ({n})")
    return np.arange(n) // (n // blocks)


def is_connected(a: np.ndarray) -> bool:
    """Breadth-first connectivity of the unweighted support."""
    a = np.asarray(a)
    n = a.shape[0]
    if n == 0:
        return True
    support = a > 0
    visited = np.zeros(n, dtype=bool)
    frontier = np.zeros(n, dtype=bool)
    frontier[0] = True
    visited[0] = True
    while frontier.any():
        reachable = support[frontier].any(axis=0)
        frontier = reachable & ~visited
        visited |= frontier
    return bool(visited.all())


def edge_density(a: np.ndarray) -> float:
    """Fraction of unordered node pairs carrying positive weight."""
    a = np.asarray(a)
    n = a.shape[0]
    if n < 2:
        raise ValueError("edge density needs at least two nodes")
    iu = np.triu_indices(n, k=1)
    return float(np.count_nonzero(a[iu] > 0)) / iu[0].size


def load_latent_graphs(path) -> np.ndarray:
    """Load a (T, n, n) stack of latent adjacency matrices from a .npy file."""
    arr = np.load(Path(path))
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ValueError(f"expected a (T, n, n) stack, got shape {arr.shape}")
    for i in range(arr.shape[0]):
        check_adjacency(arr[i], name=f"latent graph {i}")
    return arr


def _draw(spec: EnsembleSpec, rng: np.random.Generator) -> np.ndarray:
    kind = spec.kind.upper()
    p = spec.params
    if kind == "ER":
        return gen_er(spec.n, float(p["p"]), rng)
    if kind == "RG":
        return gen_rg(spec.n, int(p.get("d", 2)), float(p["r"]), rng)
    if kind == "BA":
        return gen_ba(spec.n, int(p["m"]), rng)
    if kind == "SBM":
        return gen_sbm(spec.n, int(p["blocks"]), float(p["p_in"]), float(p["p_out"]), rng)
    if kind == "FILE":
        pool = load_latent_graphs(p["path"])
        if pool.shape[1] != spec.n:
            raise ValueError(f"file graphs have {pool.shape[1]} nodes, spec says {spec.n}")
        return pool[rng.integers(pool.shape[0])].copy()
    raise ValueError(f"unknown ensemble kind {spec.kind!r}")


def sample_constrained(spec: EnsembleSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw from the ensemble until connectivity and density constraints pass."""
    lo, hi = spec.density_range
    rejected_connect = 0
    rejected_density = 0
    for _ in range(spec.max_tries):
        a = _draw(spec, rng)
        if spec.require_connected and not is_connected(a):
            rejected_connect += 1
            continue
        if not lo <= edge_density(a) <= hi:
            rejected_density += 1
            continue
        return a
    raise SamplingError(
        f"no acceptable {spec.kind} sample in {spec.max_tries} tries "
        f"(acceptance rate 0.0; {rejected_connect} connectivity and "
        f"{rejected_density} density rejections)"
    )


def default_ensemble(kind: str, n: int) -> EnsembleSpec:
    """Reference parameters per ensemble family.

    ER uses p=0.56 and RG uses d=2, r=0.56 with accepted densities in
    [0.5, 0.6]. BA accepts [0.3, 0.4]; its attachment count is scaled with n
    so the (deterministic) density lands in that band. SBM uses three equal
    communities with 0.6 within-block and 0.1 cross-block probabilities.
    """
    kind = kind.upper()
    if kind == "ER":
        return EnsembleSpec(kind="ER", n=n, params={"p": 0.56}, density_range=(0.5, 0.6))
    if kind == "RG":
        return EnsembleSpec(kind="RG", n=n, params={"d": 2, "r": 0.56}, density_range=(0.5, 0.6))
    if kind == "BA":
        m = max(1, round(0.22 * n))
        return EnsembleSpec(kind="BA", n=n, params={"m": m}, density_range=(0.3, 0.4))
    if kind == "SBM":
        if n % 3 != 0:
            raise ValueError("default SBM ensemble uses 3 equal blocks; n must divide by 3")
        return EnsembleSpec(
            kind="SBM", n=n, params={"blocks": 3, "p_in": 0.6, "p_out": 0.1},
            density_range=(0.0, 1.0),
        )
    raise ValueError(f"no default ensemble for kind {kind!r}")
