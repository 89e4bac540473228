"""The k-means step: seeded Lloyd, the greedy radius cover, and LQC checks.

All objectives are Frobenius distances (square roots of within-cluster sums
of squares), matching how approximation factors are stated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .metrics import misclassification
from .models import KMEANS, substream
from .types import (
    ConditionNotMet,
    DistanceMismatch,
    KMeansMatrix,
    Membership,
    center_separation,
    kmeans_expand,
)


@dataclass(frozen=True)
class KMeansConfig:
    k: int
    restarts: int = 10
    max_lloyd_iters: int = 100
    seed_substream: tuple = (0,)
    algorithm: str = "lloyd_pp"
    rho: float = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.algorithm not in ("lloyd_pp", "radius_cover"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.algorithm == "radius_cover":
            if self.rho is None or not self.rho > 0:
                raise ValueError("radius_cover needs a positive rho")
        elif self.rho is not None:
            raise ValueError("rho is only used by radius_cover")
        seed = self.seed_substream
        if isinstance(seed, (int, np.integer)):
            seed = (int(seed),)
        seed = tuple(int(s) for s in seed)
        if not seed:
            raise ValueError("seed_substream must be nonempty")
        object.__setattr__(self, "seed_substream", seed)


def kmeans_objective(x_hat, x: KMeansMatrix) -> float:
    """Frobenius distance between x_hat and the expanded k-means matrix."""
    x_hat = np.asarray(x_hat, dtype=float)
    return float(np.linalg.norm(x_hat - kmeans_expand(x)))


def _sq_dists(x, centers):
    """n x k squared distances, computed from differences (no expansion trick)."""
    out = np.empty((x.shape[0], centers.shape[0]))
    for j, c in enumerate(centers):
        diff = x - c
        out[:, j] = np.einsum("ij,ij->i", diff, diff)
    return out


def _plusplus(x, k, rng):
    n = x.shape[0]
    idx = [int(rng.integers(n))]
    closest = _sq_dists(x, x[idx])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        u = rng.random()
        if total > 0:
            cum = np.cumsum(closest)
            pick = int(np.searchsorted(cum, u * total, side="right"))
            pick = min(pick, n - 1)
        else:
            pick = idx[-1]
        idx.append(pick)
        closest = np.minimum(closest, _sq_dists(x, x[[pick]])[:, 0])
    return x[idx].copy()


def _means(x, labels, k, centers):
    sums = np.zeros((k, x.shape[1]))
    np.add.at(sums, labels, x)
    counts = np.bincount(labels, minlength=k)
    new = centers.copy()
    nz = counts > 0
    new[nz] = sums[nz] / counts[nz, None]
    return new, counts


def lloyd(x, centers, max_iter=100):
    """Lloyd iterations from the given centers.

    Returns (labels 0-based, centers, sse history). An empty cluster is
    re-seeded at the point farthest from its current center.
    """
    x = np.asarray(x, dtype=float)
    centers = np.asarray(centers, dtype=float).copy()
    k = centers.shape[0]
    labels = None
    history = []
    for _ in range(max_iter):
        d2 = _sq_dists(x, centers)
        new_labels = np.argmin(d2, axis=1)  # first index wins ties
        own = d2[np.arange(x.shape[0]), new_labels]
        counts = np.bincount(new_labels, minlength=k)
        for j in np.flatnonzero(counts == 0):
            far = int(np.argmax(own))
            if own[far] == 0:
                break
            counts[new_labels[far]] -= 1
            new_labels[far] = j
            own[far] = 0.0
            counts[j] = 1
        centers, _ = _means(x, new_labels, k, centers)
        sse = float(np.sum((x - centers[new_labels]) ** 2))
        history.append(sse)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return labels, centers, history


def kappa_seeding_bound(k):
    """Expected approximation factor of seeded Lloyd, on the distance scale.

    Squared-error guarantee 8 (ln k + 2), so the distance factor is its root.
    """
    return math.sqrt(8.0 * (math.log(k) + 2.0))


def canonical_order(x):
    """A row ordering that depends only on pairwise distances.

    Primary key: distance to the centroid; secondary: mean distance to all
    rows. Feeding rows in this order makes seeded Lloyd equivariant to row
    permutations.
    """
    x = np.asarray(x, dtype=float)
    centered = x - x.mean(axis=0)
    key1 = np.einsum("ij,ij->i", centered, centered)
    gram = centered @ centered.T
    sq = np.diag(gram)
    key2 = np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2 * gram, 0)).mean(axis=1)
    return np.lexsort((key2, key1))


@dataclass
class LloydResult:
    kmm: KMeansMatrix
    objective: float
    kappa_bound: float
    restart: int = 0
    history: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.kmm, self.objective, self.kappa_bound))


def lloyd_pp(x_hat, cfg: KMeansConfig, canonical=False) -> LloydResult:
    """Best of ``cfg.restarts`` seeded Lloyd runs (lowest objective, then lowest restart)."""
    x = np.asarray(x_hat, dtype=float)
    n = x.shape[0]
    if n < cfg.k:
        raise ValueError(f"need at least k={cfg.k} points, got {n}")
    order = canonical_order(x) if canonical else np.arange(n)
    xs = x[order]
    best = None
    for r in range(cfg.restarts):
        rng = substream(*cfg.seed_substream, KMEANS, r)
        centers = _plusplus(xs, cfg.k, rng)
        labels, centers, hist = lloyd(xs, centers, cfg.max_lloyd_iters)
        sse = hist[-1]
        if best is None or sse < best[0]:
            best = (sse, r, labels, centers, hist)
    sse, r, labels, centers, hist = best
    out = np.empty(n, dtype=np.int64)
    out[order] = labels + 1
    counts = np.bincount(labels, minlength=cfg.k)
    centers = centers.copy()
    centers[counts == 0] = 0.0
    kmm = KMeansMatrix(Membership(out, cfg.k), centers)
    return LloydResult(kmm, math.sqrt(sse), kappa_seeding_bound(cfg.k), r, hist)


def _pairwise(x):
    x = np.asarray(x, dtype=float)
    sq = np.einsum("ij,ij->i", x, x)
    d2 = sq[:, None] + sq[None, :] - 2 * (x @ x.T)
    np.maximum(d2, 0, out=d2)
    np.fill_diagonal(d2, 0)
    return np.sqrt(d2)


def radius_cover(x_hat, k, rho, dist=None):
    """Greedy max-ball covering.

    For r = 1..k: among surviving points pick the one whose closed rho-ball
    holds the most survivors (lowest index on ties); that ball is cluster r.
    Returns labels in {0, 1..k} (0 = unlabeled) and the list of clusters.
    """
    if not rho > 0 or k < 1:
        raise ValueError("need rho > 0 and k >= 1")
    d = _pairwise(x_hat) if dist is None else np.asarray(dist)
    n = d.shape[0]
    near = d <= rho
    alive = np.ones(n, dtype=bool)
    labels = np.zeros(n, dtype=np.int64)
    clusters = []
    for r in range(1, k + 1):
        if not alive.any():
            clusters.append(np.array([], dtype=np.int64))
            continue
        counts = near[:, alive].sum(axis=1)
        counts[~alive] = -1
        i0 = int(np.argmax(counts))
        members = np.flatnonzero(near[i0] & alive)
        labels[members] = r
        alive[members] = False
        clusters.append(members)
    return labels, clusters


def radius_cover_sweep(x_hat, k, rho1, n_steps=None):
    """Experimental: sweep rho_i = i * rho1 for i = 1..ceil(log n), attach leftover
    points to the nearest estimated center, keep the lowest k-means objective.
    """
    x = np.asarray(x_hat, dtype=float)
    n = x.shape[0]
    steps = n_steps or max(1, math.ceil(math.log(n)))
    d = _pairwise(x)
    best = None
    for i in range(1, steps + 1):
        labels, _ = radius_cover(x, k, i * rho1, dist=d)
        used = [r for r in range(1, k + 1) if np.any(labels == r)]
        if not used:
            continue
        centers = np.zeros((k, x.shape[1]))
        for r in used:
            centers[r - 1] = x[labels == r].mean(axis=0)
        miss = labels == 0
        if miss.any():
            d2 = _sq_dists(x[miss], centers[np.array(used) - 1])
            labels[miss] = np.array(used)[np.argmin(d2, axis=1)]
            for r in used:
                centers[r - 1] = x[labels == r].mean(axis=0)
        kmm = KMeansMatrix(Membership(labels, k), centers)
        obj = kmeans_objective(x, kmm)
        if best is None or obj < best[0]:
            best = (obj, i * rho1, kmm)
    return best[2], best[0], best[1]


def isometry_check(algorithm, x, x_iso, tol=1e-9):
    """True iff ``algorithm`` gives the same partition on two isometric inputs.

    ``algorithm`` maps a data matrix to labels. Raises DistanceMismatch when
    the pairwise distances differ by more than ``tol`` (relative).
    """
    d1 = _pairwise(x)
    d2 = _pairwise(x_iso)
    scale = max(d1.max(), 1.0)
    if d1.shape != d2.shape or np.max(np.abs(d1 - d2)) > tol * scale:
        raise DistanceMismatch("inputs are not isometric")
    return misclassification(algorithm(x), algorithm(x_iso)).mis_bar == 0.0


@dataclass(frozen=True)
class LqcReport:
    eps: float
    kappa: float
    delta: np.ndarray
    sizes: np.ndarray
    condition: np.ndarray
    condition_met: bool
    mis_bar: float
    mis_r: np.ndarray
    bound_bar: float
    bound_r: np.ndarray
    holds: bool

    def require(self):
        if not self.condition_met:
            raise ConditionNotMet("separation condition fails for some cluster")
        return self


def lqc_certificate(x_star: KMeansMatrix, x_hat, x_tilde: KMeansMatrix, kappa=None, c_r=0.5):
    """Check the misclassification bound for a k-means solution near a planted one.

    eps = d_F(x_hat, x_star). kappa defaults to the achieved ratio
    d_F(x_hat, x_tilde) / eps. When every cluster satisfies
    (1 + kappa)^2 eps^2 / (c_r^2 delta_r^2 n_r) < 1, the report's ``holds``
    states whether Mis_r <= (1 + kappa)^2 eps^2 / (c_r^2 n_r delta_r^2) for
    every r and the average rate obeys the matching bound with delta_min.
    """
    x_hat = np.asarray(x_hat, dtype=float)
    sizes = x_star.membership.sizes()
    if np.any(sizes == 0):
        raise ValueError("x_star must have k nonempty clusters")
    eps = kmeans_objective(x_hat, x_star)
    if kappa is None:
        achieved = kmeans_objective(x_hat, x_tilde)
        kappa = achieved / eps if eps > 0 else 1.0
    delta, delta_min = center_separation(x_star)
    factor = (1.0 + kappa) ** 2 * eps**2 / c_r**2
    cond = factor / (delta**2 * sizes) < 1.0
    rep = misclassification(x_star.membership, x_tilde.membership)
    n = sizes.sum()
    bound_r = factor / (sizes * delta**2)
    bound_bar = factor / (n * delta_min**2)
    met = bool(np.all(cond))
    holds = bool(np.all(rep.mis_r <= bound_r) and rep.mis_bar <= bound_bar) if met else True
    return LqcReport(
        eps, float(kappa), delta, sizes, cond, met, rep.mis_bar, rep.mis_r, bound_bar, bound_r, holds
    )
