"""Domain types shared across the package.

Labels are 1-based dense integers throughout. Matrices are dense numpy
arrays; the sparse coordinate form only appears at the I/O boundary.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BiclusterError",
    "EmptyCluster",
    "DegenerateCenters",
    "InvalidProbability",
    "NoConvergence",
    "ZeroGraph",
    "DimensionMismatch",
    "DistanceMismatch",
    "ConditionNotMet",
    "BiAdjacency",
    "Membership",
    "KMeansMatrix",
    "SbmSpec",
    "TruncatedSvd",
    "membership_to_matrix",
    "normalized_membership",
    "kmeans_expand",
    "center_separation",
]


class BiclusterError(Exception):
    """Base class for package errors."""


class EmptyCluster(BiclusterError):
    pass


class DegenerateCenters(BiclusterError):
    pass


class InvalidProbability(BiclusterError):
    pass


class NoConvergence(BiclusterError):
    def __init__(self, max_iter, message=None):
        self.max_iter = max_iter
        super().__init__(message or f"no convergence after {max_iter} iterations")


class ZeroGraph(BiclusterError):
    pass


class DimensionMismatch(BiclusterError):
    pass


class DistanceMismatch(BiclusterError):
    pass


class ConditionNotMet(BiclusterError):
    pass


@dataclass(frozen=True)
class BiAdjacency:
    """Observed (possibly regularized) n_rows x n_cols network."""

    entries: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2:
            raise DimensionMismatch("adjacency must be two-dimensional")
        if self.symmetric and (a.shape[0] != a.shape[1] or not np.array_equal(a, a.T)):
            raise ValueError("symmetric flag set on a non-symmetric matrix")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def n_rows(self) -> int:
        return self.entries.shape[0]

    @property
    def n_cols(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self):
        return self.entries.shape

    def is_binary(self) -> bool:
        return bool(np.all((self.entries == 0) | (self.entries == 1)))

    def row_degrees(self) -> np.ndarray:
        return self.entries.sum(axis=1)

    def col_degrees(self) -> np.ndarray:
        return self.entries.sum(axis=0)


@dataclass(frozen=True)
class Membership:
    """Hard cluster labels in {1, ..., k} for n items."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if lab.size and not np.issubdtype(lab.dtype, np.integer):
            if not np.all(lab == np.round(lab)):
                raise ValueError("labels must be integers")
        lab = lab.astype(np.int64)
        k = int(self.k)
        if k < 1:
            raise ValueError("k must be positive")
        if lab.size and (lab.min() < 1 or lab.max() > k):
            raise ValueError(f"labels must lie in [1, {k}]")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "k", k)

    @classmethod
    def from_zero_based(cls, labels, k=None):
        labels = np.asarray(labels, dtype=np.int64)
        if k is None:
            k = int(labels.max()) + 1 if labels.size else 1
        return cls(labels + 1, k)

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def sizes(self) -> np.ndarray:
        """Cluster sizes n_1, ..., n_k (zeros for unused labels)."""
        return np.bincount(self.labels - 1, minlength=self.k)

    def proportions(self) -> np.ndarray:
        return self.sizes() / self.n

    def to_text(self) -> str:
        return "".join(f"{v}\n" for v in self.labels)

    @classmethod
    def from_text(cls, text: str, k=None):
        vals = [int(tok) for tok in text.split()]
        labels = np.array(vals, dtype=np.int64)
        if k is None:
            k = int(labels.max()) if labels.size else 1
        return cls(labels, k)


@dataclass(frozen=True)
class KMeansMatrix:
    """A matrix with at most k distinct rows, stored as (labels, centers).

    Centers for unused labels are zero rows.
    """

    membership: Membership
    centers: np.ndarray

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        if c.shape[0] != self.membership.k:
            raise DimensionMismatch(
                f"centers has {c.shape[0]} rows, expected k={self.membership.k}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)

    @classmethod
    def from_labels(cls, labels, centers):
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        return cls(Membership(labels, centers.shape[0]), centers)

    @classmethod
    def from_data(cls, x, membership: Membership):
        """Centers as cluster means of the rows of ``x``; empty clusters get zeros."""
        x = np.asarray(x, dtype=float)
        k = membership.k
        sums = np.zeros((k, x.shape[1]))
        np.add.at(sums, membership.labels - 1, x)
        sizes = membership.sizes()
        centers = np.zeros_like(sums)
        nz = sizes > 0
        centers[nz] = sums[nz] / sizes[nz, None]
        return cls(membership, centers)

    @property
    def labels(self) -> np.ndarray:
        return self.membership.labels

    @property
    def k(self) -> int:
        return self.membership.k

    def to_json(self) -> str:
        return json.dumps(
            {"labels": self.labels.tolist(), "centers": self.centers.tolist()}
        )

    @classmethod
    def from_json(cls, text: str):
        obj = json.loads(text)
        return cls.from_labels(obj["labels"], obj["centers"])


def largest_remainder_sizes(n: int, proportions) -> np.ndarray:
    """Split n into integer sizes proportional to ``proportions``, summing to n."""
    p = np.asarray(proportions, dtype=float)
    raw = n * p / p.sum()
    sizes = np.floor(raw).astype(np.int64)
    short = n - sizes.sum()
    if short:
        # ties broken by lower index
        order = np.lexsort((np.arange(p.size), -(raw - sizes)))
        sizes[order[:short]] += 1
    return sizes


@dataclass(frozen=True)
class SbmSpec:
    """Generative description of a bipartite SBM with B = psi / sqrt(n1 n2)."""

    n1: int
    n2: int
    psi: np.ndarray
    proportions_rows: np.ndarray = None
    proportions_cols: np.ndarray = None
    seed: int = 0

    def __post_init__(self):
        psi = np.atleast_2d(np.asarray(self.psi, dtype=float))
        if np.any(psi < 0) or not np.all(np.isfinite(psi)):
            raise ValueError("psi must be finite and nonnegative")
        k1, k2 = psi.shape
        pr = self.proportions_rows
        pc = self.proportions_cols
        pr = np.full(k1, 1.0 / k1) if pr is None else np.asarray(pr, dtype=float)
        pc = np.full(k2, 1.0 / k2) if pc is None else np.asarray(pc, dtype=float)
        if pr.shape != (k1,) or pc.shape != (k2,):
            raise DimensionMismatch("proportions do not match psi shape")
        for p in (pr, pc):
            if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
                raise ValueError("proportions must be a probability vector")
        for arr in (psi, pr, pc):
            arr.setflags(write=False)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "proportions_rows", pr)
        object.__setattr__(self, "proportions_cols", pc)
        object.__setattr__(self, "n1", int(self.n1))
        object.__setattr__(self, "n2", int(self.n2))
        object.__setattr__(self, "seed", int(self.seed))

    @classmethod
    def from_connectivity(cls, n1, n2, b, proportions_rows=None, proportions_cols=None, seed=0):
        b = np.asarray(b, dtype=float)
        return cls(n1, n2, b * np.sqrt(n1 * n2), proportions_rows, proportions_cols, seed)

    @property
    def k1(self) -> int:
        return self.psi.shape[0]

    @property
    def k2(self) -> int:
        return self.psi.shape[1]

    @property
    def k(self) -> int:
        return min(self.k1, self.k2)

    @property
    def b(self) -> np.ndarray:
        return self.psi / np.sqrt(self.n1 * self.n2)

    def sizes_rows(self) -> np.ndarray:
        return largest_remainder_sizes(self.n1, self.proportions_rows)

    def sizes_cols(self) -> np.ndarray:
        return largest_remainder_sizes(self.n2, self.proportions_cols)

    @property
    def d(self) -> float:
        """Degree scale sqrt(n2/n1) * max(psi)."""
        return float(np.sqrt(self.n2 / self.n1) * self.psi.max())

    def to_dict(self) -> dict:
        return {
            "n1": self.n1,
            "n2": self.n2,
            "psi": self.psi.tolist(),
            "proportions_rows": self.proportions_rows.tolist(),
            "proportions_cols": self.proportions_cols.tolist(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, obj: dict):
        if "psi" in obj:
            psi = obj["psi"]
        elif "b" in obj:
            psi = np.asarray(obj["b"], dtype=float) * np.sqrt(obj["n1"] * obj["n2"])
        else:
            raise ValueError("spec needs 'psi' or 'b'")
        return cls(
            obj["n1"],
            obj["n2"],
            psi,
            obj.get("proportions_rows"),
            obj.get("proportions_cols"),
            obj.get("seed", 0),
        )


@dataclass(frozen=True)
class TruncatedSvd:
    """Top-k singular triplets (u, sigma, v) with nonincreasing sigma."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray
    iterations: int = 0
    method: str = field(default="", compare=False)

    @property
    def k(self) -> int:
        return self.sigma.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.T

    def left_embedding(self) -> np.ndarray:
        """Rows of U diag(sigma)."""
        return self.u * self.sigma

    def right_embedding(self) -> np.ndarray:
        return self.v * self.sigma


def membership_to_matrix(m: Membership) -> np.ndarray:
    """Binary n x k matrix Z with Z[i, labels[i]-1] = 1."""
    z = np.zeros((m.n, m.k), dtype=np.int64)
    z[np.arange(m.n), m.labels - 1] = 1
    return z


def normalized_membership(m: Membership) -> np.ndarray:
    """Z N^{-1/2}, which has orthonormal columns when no cluster is empty."""
    sizes = m.sizes()
    if np.any(sizes == 0):
        missing = (np.flatnonzero(sizes == 0) + 1).tolist()
        raise EmptyCluster(f"empty clusters: {missing}")
    return membership_to_matrix(m) / np.sqrt(sizes)


def kmeans_expand(x: KMeansMatrix) -> np.ndarray:
    return x.centers[x.labels - 1]


def center_separation(x: KMeansMatrix):
    """Per-cluster separation delta_r and the minimum delta_wedge.

    Only nonempty clusters participate; entries for empty clusters are nan.
    """
    sizes = x.membership.sizes()
    used = np.flatnonzero(sizes > 0)
    if used.size < 2:
        raise DegenerateCenters("need at least two nonempty clusters")
    c = x.centers[used]
    dist = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(axis=-1))
    np.fill_diagonal(dist, np.inf)
    if np.any(dist == 0):
        raise DegenerateCenters("two nonempty clusters share a center")
    delta = np.full(x.k, np.nan)
    delta[used] = dist.min(axis=1)
    return delta, float(np.nanmin(delta))
