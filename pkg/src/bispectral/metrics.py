"""Clustering quality: permutation-aligned misclassification rates and NMI."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

from .types import DimensionMismatch, KMeansMatrix, Membership

BRUTE_FORCE_MAX = 8


def _labels(z):
    if isinstance(z, KMeansMatrix):
        return z.labels, z.k
    if isinstance(z, Membership):
        return z.labels, z.k
    lab = np.asarray(z, dtype=np.int64)
    if lab.ndim != 1:
        raise ValueError("labels must be one-dimensional")
    if lab.size and lab.min() < 0:
        raise ValueError("labels must be nonnegative (0 marks unlabeled)")
    return lab, int(lab.max()) if lab.size else 1


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[r, s] = #{i : z_i = r+1, z'_i = s+1}; unlabeled[r] counts z'_i = 0."""

    counts: np.ndarray
    unlabeled: np.ndarray = None

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or np.any(c < 0):
            raise ValueError("counts must be a nonnegative matrix")
        u = np.zeros(c.shape[0], dtype=np.int64) if self.unlabeled is None else np.asarray(
            self.unlabeled, dtype=np.int64
        )
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "unlabeled", u)

    @property
    def n(self) -> int:
        return int(self.counts.sum() + self.unlabeled.sum())

    @classmethod
    def from_labels(cls, z, z_prime):
        lz, kz = _labels(z)
        lp, kp = _labels(z_prime)
        if lz.shape != lp.shape:
            raise DimensionMismatch(f"label vectors of length {lz.size} and {lp.size}")
        if lz.size and lz.min() < 1:
            raise ValueError("reference labels must be >= 1")
        counts = np.zeros((kz, max(kp, 1)), dtype=np.int64)
        keep = lp > 0
        np.add.at(counts, (lz[keep] - 1, lp[keep] - 1), 1)
        unl = np.bincount(lz[~keep] - 1, minlength=kz)
        return cls(counts, unl)

    def padded(self) -> np.ndarray:
        m = max(self.counts.shape)
        out = np.zeros((m, m), dtype=np.int64)
        out[: self.counts.shape[0], : self.counts.shape[1]] = self.counts
        return out


@lru_cache(maxsize=None)
def _all_perms(m):
    return np.array(list(itertools.permutations(range(m))), dtype=np.int64).reshape(-1, m)


def match_brute_force(counts) -> np.ndarray:
    """Exhaustive search; ties go to the lexicographically first permutation."""
    counts = np.asarray(counts)
    m = counts.shape[0]
    perms = _all_perms(m)
    scores = counts[np.arange(m)[None, :], perms].sum(axis=1)
    return perms[int(np.argmax(scores))]


def match_assignment(counts) -> np.ndarray:
    counts = np.asarray(counts)
    rows, cols = linear_sum_assignment(counts, maximize=True)
    perm = np.empty(counts.shape[0], dtype=np.int64)
    perm[rows] = cols
    return perm


def permutation_match(c: ConfusionMatrix, method="auto") -> np.ndarray:
    """perm[r] = label index (0-based) of z' matched to cluster r of z, maximizing the trace."""
    counts = c.padded() if isinstance(c, ConfusionMatrix) else np.asarray(c)
    m = counts.shape[0]
    if method == "auto":
        method = "brute" if m <= BRUTE_FORCE_MAX else "assignment"
    if method == "brute":
        return match_brute_force(counts)
    if method == "assignment":
        return match_assignment(counts)
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class MisReport:
    mis_bar: float
    mis_r: np.ndarray
    mis_inf: float
    perm: np.ndarray
    sizes: np.ndarray

    def to_dict(self):
        return {
            "mis_bar": self.mis_bar,
            "mis_r": self.mis_r.tolist(),
            "mis_inf": self.mis_inf,
            "perm": self.perm.tolist(),
        }


def misclassification(z, z_prime, method="auto") -> MisReport:
    """Average, per-cluster and worst-cluster misclassification of z' against z.

    Per-cluster rates are over the clusters of z, under the permutation that
    minimizes the average rate. Unlabeled entries (0) of z' are always errors.
    """
    c = ConfusionMatrix.from_labels(z, z_prime)
    counts = c.padded()
    perm = permutation_match(counts, method)
    kz = c.counts.shape[0]
    sizes = c.counts.sum(axis=1) + c.unlabeled
    hits = counts[np.arange(kz), perm[:kz]]
    n = c.n
    mis_bar = 1.0 - hits.sum() / n if n else 0.0
    mis_r = np.zeros(kz)
    nz = sizes > 0
    mis_r[nz] = 1.0 - hits[nz] / sizes[nz]
    mis_inf = float(mis_r[nz].max()) if np.any(nz) else 0.0
    # weighted decomposition of the average rate
    assert abs(mis_bar - float(np.sum(sizes * mis_r)) / max(n, 1)) < 1e-12
    return MisReport(float(mis_bar), mis_r, mis_inf, perm[:kz], sizes)


def misclassification_kmeans(x: KMeansMatrix, x_prime: KMeansMatrix, method="auto") -> MisReport:
    return misclassification(x.membership, x_prime.membership, method)


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def nmi(z, z_prime, return_flag=False):
    """I(Z; Z') / sqrt(H(Z) H(Z')) with natural logs.

    Returns 0 when either side has zero entropy; ``return_flag`` also returns
    whether that degenerate case occurred.
    """
    lz, _ = _labels(z)
    lp, _ = _labels(z_prime)
    if lz.shape != lp.shape:
        raise DimensionMismatch("label vectors differ in length")
    _, iz = np.unique(lz, return_inverse=True)
    _, ip = np.unique(lp, return_inverse=True)
    joint = np.zeros((iz.max() + 1, ip.max() + 1))
    np.add.at(joint, (iz, ip), 1)
    hz = _entropy(joint.sum(axis=1))
    hp = _entropy(joint.sum(axis=0))
    if hz == 0 or hp == 0:
        return (0.0, True) if return_flag else 0.0
    n = joint.sum()
    pj = joint / n
    outer = np.outer(pj.sum(axis=1), pj.sum(axis=0))
    nz = pj > 0
    mi = float(np.sum(pj[nz] * np.log(pj[nz] / outer[nz])))
    val = min(max(mi / np.sqrt(hz * hp), 0.0), 1.0)
    return (val, False) if return_flag else val
