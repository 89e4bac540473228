"""Generative models and exact population quantities.

Samplers draw from counter-based Philox streams keyed by (seed, purpose,
...), so any replicate can be regenerated on its own.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .linalg import jacobi_svd
from .types import (
    BiAdjacency,
    EmptyCluster,
    InvalidProbability,
    Membership,
    SbmSpec,
    TruncatedSvd,
    largest_remainder_sizes,
    membership_to_matrix,
    normalized_membership,
)

# purpose ids for RNG sub-streams
SAMPLE = 0
SHUFFLE = 1
SVD = 2
KMEANS = 3
LATENT = 4


def substream(seed, *keys):
    """Independent generator for the sub-stream ``(seed, *keys)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def block_labels(sizes, rng=None):
    """Labels 1..k repeated by ``sizes``, optionally shuffled by ``rng``."""
    sizes = np.asarray(sizes, dtype=np.int64)
    labels = np.repeat(np.arange(1, sizes.size + 1), sizes)
    if rng is not None:
        labels = labels[rng.permutation(labels.size)]
    return Membership(labels, sizes.size)


def _memberships(spec, shuffle):
    s1, s2 = spec.sizes_rows(), spec.sizes_cols()
    if np.any(s1 == 0) or np.any(s2 == 0):
        raise EmptyCluster(f"cluster sizes rows={s1.tolist()} cols={s2.tolist()}")
    rng = substream(spec.seed, SHUFFLE) if shuffle else None
    rows = block_labels(s1, rng)
    cols = block_labels(s2, rng)
    return rows, cols


def mean_matrix(spec, rows, cols):
    """P = Z1 B Z2^T for the given memberships."""
    return spec.b[rows.labels - 1][:, cols.labels - 1]


def _check_probabilities(b):
    if np.any(b < 0) or np.any(b > 1):
        raise InvalidProbability(
            f"connectivity entries must lie in [0, 1]; got range [{b.min()}, {b.max()}]"
        )


def sample_sbm(spec: SbmSpec, shuffle=True, rng=None):
    """Draw a bipartite SBM adjacency with its row and column memberships."""
    _check_probabilities(spec.b)
    rows, cols = _memberships(spec, shuffle)
    p = mean_matrix(spec, rows, cols)
    if rng is None:
        rng = substream(spec.seed, SAMPLE)
    a = (rng.random(p.shape) < p).astype(float)
    return BiAdjacency(a), rows, cols


def sample_symmetric_sbm(spec: SbmSpec, shuffle=True, rng=None):
    """Symmetric SBM: upper triangle (with diagonal) drawn, then mirrored."""
    if spec.n1 != spec.n2 or spec.k1 != spec.k2 or not np.allclose(spec.psi, spec.psi.T):
        raise ValueError("symmetric SBM needs n1 == n2 and a symmetric psi")
    _check_probabilities(spec.b)
    rows, _ = _memberships(spec, shuffle)
    p = mean_matrix(spec, rows, rows)
    if rng is None:
        rng = substream(spec.seed, SAMPLE)
    draws = rng.random(p.shape) < p
    upper = np.triu(draws)
    a = (upper | np.triu(upper, 1).T).astype(float)
    return BiAdjacency(a, symmetric=True), rows


def planted_partition_psi(a, b, k):
    """Psi = b * ones(k, k) + (a - b) * I."""
    return b * np.ones((k, k)) + (a - b) * np.eye(k)


def fig1_spec(b, n1=500, seed=0):
    """Four balanced clusters per side, n2 = 2 n1, Psi = 2b E4 + diag(16,16,16,2)."""
    psi = 2.0 * b * np.ones((4, 4)) + np.diag([16.0, 16.0, 16.0, 2.0])
    return SbmSpec(n1, 2 * n1, psi, seed=seed)


FIG2_B0 = 0.5 * np.array(
    [[6.0, 1.0, 1.0, 1.0], [1.0, 6.0, 1.0, 1.0], [1.0, 1.0, 6.0, 1.0]]
)


def fig2_spec(n0, seed=0):
    """Sparse 3x4 design: B = sqrt(log(n1 n2) / (n1 n2)) B0 with n1 = 3 n0, n2 = 4 n0."""
    n1, n2 = 3 * n0, 4 * n0
    b = np.sqrt(np.log(n1 * n2) / (n1 * n2)) * FIG2_B0
    return SbmSpec.from_connectivity(n1, n2, b, seed=seed)


@dataclass(frozen=True)
class PopulationFactors:
    """SVD of the k1 x k2 matrix N1^{1/2} B N2^{1/2}."""

    b_bar: np.ndarray
    u_psi: np.ndarray
    sigma: np.ndarray
    v_psi: np.ndarray


def population_factors(spec: SbmSpec) -> PopulationFactors:
    s1 = spec.sizes_rows().astype(float)
    s2 = spec.sizes_cols().astype(float)
    if np.any(s1 == 0) or np.any(s2 == 0):
        raise EmptyCluster("population SVD needs nonempty clusters")
    b_bar = np.sqrt(s1)[:, None] * spec.b * np.sqrt(s2)[None, :]
    u, s, v = jacobi_svd(b_bar)
    k = spec.k
    return PopulationFactors(b_bar, u[:, :k], s[:k], v[:, :k])


def population_svd(spec: SbmSpec, rows=None, cols=None) -> TruncatedSvd:
    """Reduced SVD of P: (Zbar1 U_psi, Sigma, Zbar2 V_psi).

    Memberships default to the unshuffled block layout.
    """
    fac = population_factors(spec)
    if rows is None:
        rows = block_labels(spec.sizes_rows())
    if cols is None:
        cols = block_labels(spec.sizes_cols())
    left = normalized_membership(rows) @ fac.u_psi
    right = normalized_membership(cols) @ fac.v_psi
    return TruncatedSvd(left, fac.sigma, right, method="population")


@dataclass(frozen=True)
class SeparationConstants:
    psi_min_sq: float
    psi_tilde_min_sq: float
    sigma_k: float
    d: float
    d_av: float
    lam: np.ndarray = field(repr=False)
    lam_min_sq: float

    def to_dict(self):
        out = dict(self.__dict__)
        out["lam"] = self.lam.tolist()
        return out


def _min_pair(values):
    return float(min(values)) if values else float("nan")


def separation_constants(spec: SbmSpec) -> SeparationConstants:
    psi = spec.psi
    pi1 = spec.sizes_rows() / spec.n1
    pi2 = spec.sizes_cols() / spec.n2
    k1 = spec.k1
    plain, tilted, lam_gaps = [], [], []
    s2 = spec.sizes_cols()
    lam = spec.b * s2[None, :]
    for s, t in itertools.permutations(range(k1), 2):
        gap = float(np.sum(pi2 * (psi[s] - psi[t]) ** 2))
        plain.append(gap)
        tilted.append(pi1[t] * gap)
        lam_gaps.append(float(np.sum((lam[s] - lam[t]) ** 2)))
    fac = population_factors(spec)
    s1 = spec.sizes_rows()
    d_av = float(s1 @ spec.b @ s2) / spec.n1
    return SeparationConstants(
        psi_min_sq=_min_pair(plain),
        psi_tilde_min_sq=_min_pair(tilted),
        sigma_k=float(fac.sigma[-1]),
        d=spec.d,
        d_av=d_av,
        lam=lam,
        lam_min_sq=_min_pair(lam_gaps),
    )


@dataclass(frozen=True)
class ExpectedDegrees:
    row_mean: float
    row_max: float
    col_mean: float
    col_max: float


def expected_degrees(spec: SbmSpec) -> ExpectedDegrees:
    """Average and maximum expected degrees on each side."""
    s1 = spec.sizes_rows()
    s2 = spec.sizes_cols()
    row_deg = spec.b @ s2
    col_deg = s1 @ spec.b
    return ExpectedDegrees(
        row_mean=float(s1 @ row_deg) / spec.n1,
        row_max=float(row_deg.max()),
        col_mean=float(col_deg @ s2) / spec.n2,
        col_max=float(col_deg.max()),
    )


def degree_assumption(spec: SbmSpec) -> dict:
    """Check the balance and average-degree window under which degree truncation concentrates.

    beta is the smallest value making the cluster-size conditions hold.
    """
    s1 = spec.sizes_rows()
    s2 = spec.sizes_cols()
    beta = max(spec.n1 / (spec.k1 * s1.min()), spec.n2 / (spec.k2 * s2.min()), 1.0)
    dbar = expected_degrees(spec).row_mean
    ratio = (spec.n2 / spec.n1) ** 2
    lower = ratio * max(8 * beta * spec.k1, 8 * beta * spec.k2, 90)
    upper = spec.n1 / 2
    return {
        "beta": float(beta),
        "dbar": dbar,
        "lower": float(lower),
        "upper": float(upper),
        "rows_not_more_than_cols": spec.n1 <= spec.n2,
        "holds": bool(spec.n1 <= spec.n2 and lower <= dbar <= upper),
    }


def sbm_approximation(p, rows: Membership, cols: Membership):
    """Block averages B~ = N1^-1 Z1^T P Z2 N2^-1 and the block-constant P~ = Z1 B~ Z2^T."""
    p = np.asarray(p, dtype=float)
    s1, s2 = rows.sizes(), cols.sizes()
    if np.any(s1 == 0) or np.any(s2 == 0):
        raise EmptyCluster("sbm_approximation needs nonempty clusters")
    z1 = membership_to_matrix(rows).astype(float)
    z2 = membership_to_matrix(cols).astype(float)
    b_tilde = (z1.T @ p @ z2) / np.outer(s1, s2)
    p_tilde = b_tilde[rows.labels - 1][:, cols.labels - 1]
    return b_tilde, p_tilde


# ---------------------------------------------------------------- sub-Gaussian


@dataclass(frozen=True)
class SubGaussianSpec:
    """Block-mean matrix plus independent Gaussian noise."""

    n1: int
    n2: int
    b: np.ndarray
    noise_sigma: float
    proportions_rows: np.ndarray = None
    proportions_cols: np.ndarray = None
    seed: int = 0

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.b, dtype=float))
        if not np.all(np.isfinite(b)):
            raise ValueError("mean matrix must be finite")
        if not self.noise_sigma >= 0:
            raise ValueError("noise_sigma must be nonnegative")
        k1, k2 = b.shape
        pr = self.proportions_rows
        pc = self.proportions_cols
        pr = np.full(k1, 1.0 / k1) if pr is None else np.asarray(pr, dtype=float)
        pc = np.full(k2, 1.0 / k2) if pc is None else np.asarray(pc, dtype=float)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "proportions_rows", pr)
        object.__setattr__(self, "proportions_cols", pc)
        object.__setattr__(self, "noise_sigma", float(self.noise_sigma))

    @property
    def k1(self):
        return self.b.shape[0]

    @property
    def k2(self):
        return self.b.shape[1]

    @property
    def n_bar(self):
        """Harmonic-type size (1/n1 + 1/n2)^-1."""
        return 1.0 / (1.0 / self.n1 + 1.0 / self.n2)

    def sizes_rows(self):
        return largest_remainder_sizes(self.n1, self.proportions_rows)

    def sizes_cols(self):
        return largest_remainder_sizes(self.n2, self.proportions_cols)

    def to_dict(self):
        return {
            "n1": self.n1,
            "n2": self.n2,
            "b": self.b.tolist(),
            "noise_sigma": self.noise_sigma,
            "proportions_rows": self.proportions_rows.tolist(),
            "proportions_cols": self.proportions_cols.tolist(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, obj):
        return cls(
            obj["n1"],
            obj["n2"],
            obj["b"],
            obj["noise_sigma"],
            obj.get("proportions_rows"),
            obj.get("proportions_cols"),
            obj.get("seed", 0),
        )


def sample_subgaussian(spec: SubGaussianSpec, shuffle=True, rng=None):
    s1, s2 = spec.sizes_rows(), spec.sizes_cols()
    if np.any(s1 == 0) or np.any(s2 == 0):
        raise EmptyCluster("sub-Gaussian model needs nonempty clusters")
    shuf = substream(spec.seed, SHUFFLE) if shuffle else None
    rows = block_labels(s1, shuf)
    cols = block_labels(s2, shuf)
    mean = spec.b[rows.labels - 1][:, cols.labels - 1]
    if rng is None:
        rng = substream(spec.seed, SAMPLE)
    noise = rng.standard_normal(mean.shape) * spec.noise_sigma
    return mean + noise, rows, cols


# ---------------------------------------------------------------- graphon

PERTURBATIONS = ("none", "constant", "product", "bump")


def _perturbation(kind, c, x, y):
    if kind == "none" or c == 0:
        return np.zeros(np.broadcast(x, y).shape)
    if kind == "constant":
        return np.full(np.broadcast(x, y).shape, float(c))
    if kind == "product":
        return c * np.cos(2 * np.pi * x) * np.cos(2 * np.pi * y)
    if kind == "bump":
        return c * np.sin(np.pi * x) * np.sin(np.pi * y)
    raise ValueError(f"unknown perturbation {kind!r}; choose from {PERTURBATIONS}")


@dataclass(frozen=True)
class GraphonSpec:
    """Block-constant graphon on interval partitions plus a named perturbation.

    Row and column partitions are given by breakpoints 0 = b_0 < ... < b_k = 1.
    """

    psi_block: np.ndarray
    row_breaks: tuple
    col_breaks: tuple
    n: int
    perturbation: str = "none"
    strength: float = 0.0
    seed: int = 0

    def __post_init__(self):
        psi = np.atleast_2d(np.asarray(self.psi_block, dtype=float))
        if np.any(psi < 0) or not np.all(np.isfinite(psi)):
            raise ValueError("psi_block must be finite and nonnegative")
        rb = tuple(float(v) for v in self.row_breaks)
        cb = tuple(float(v) for v in self.col_breaks)
        for br, k in ((rb, psi.shape[0]), (cb, psi.shape[1])):
            if len(br) != k + 1 or br[0] != 0.0 or br[-1] != 1.0 or np.any(np.diff(br) <= 0):
                raise ValueError("breakpoints must increase from 0 to 1 with k + 1 entries")
        if self.perturbation not in PERTURBATIONS:
            raise ValueError(f"unknown perturbation {self.perturbation!r}")
        if self.n < 1:
            raise ValueError("n must be positive")
        object.__setattr__(self, "psi_block", psi)
        object.__setattr__(self, "row_breaks", rb)
        object.__setattr__(self, "col_breaks", cb)

    @classmethod
    def balanced(cls, psi_block, n, **kwargs):
        psi = np.atleast_2d(np.asarray(psi_block, dtype=float))
        k1, k2 = psi.shape
        return cls(psi, np.linspace(0, 1, k1 + 1), np.linspace(0, 1, k2 + 1), n, **kwargs)

    @property
    def d(self):
        """Degree scale: sup norm of the block-constant part."""
        return float(self.psi_block.max())

    def row_label(self, x):
        idx = np.searchsorted(self.row_breaks, x, side="right")
        return np.clip(idx, 1, self.psi_block.shape[0])

    def col_label(self, y):
        idx = np.searchsorted(self.col_breaks, y, side="right")
        return np.clip(idx, 1, self.psi_block.shape[1])

    def block_part(self, x, y):
        return self.psi_block[self.row_label(x) - 1][..., self.col_label(y) - 1]

    def rho0(self, x, y):
        """Density on a grid: x indexes rows, y indexes columns."""
        xx = np.asarray(x, dtype=float)[:, None]
        yy = np.asarray(y, dtype=float)[None, :]
        return self.block_part(x, y) + _perturbation(self.perturbation, self.strength, xx, yy)

    def to_dict(self):
        return {
            "psi_block": self.psi_block.tolist(),
            "row_breaks": list(self.row_breaks),
            "col_breaks": list(self.col_breaks),
            "n": self.n,
            "perturbation": self.perturbation,
            "strength": self.strength,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, obj):
        return cls(
            obj["psi_block"],
            obj["row_breaks"],
            obj["col_breaks"],
            obj["n"],
            obj.get("perturbation", "none"),
            obj.get("strength", 0.0),
            obj.get("seed", 0),
        )


@dataclass(frozen=True)
class GraphonSample:
    adjacency: BiAdjacency
    rows: Membership
    cols: Membership
    x: np.ndarray
    y: np.ndarray
    clipped: int


def sample_graphon(spec: GraphonSpec, rng=None) -> GraphonSample:
    """Latent uniforms, then Bernoulli(rho0(x_i, y_j) / n) clipped to [0, 1]."""
    latent = substream(spec.seed, LATENT)
    x = latent.random(spec.n)
    y = latent.random(spec.n)
    prob = spec.rho0(x, y) / spec.n
    clipped = int(np.count_nonzero((prob < 0) | (prob > 1)))
    prob = np.clip(prob, 0.0, 1.0)
    if rng is None:
        rng = substream(spec.seed, SAMPLE)
    a = (rng.random(prob.shape) < prob).astype(float)
    k1, k2 = spec.psi_block.shape
    rows = Membership(spec.row_label(x), k1)
    cols = Membership(spec.col_label(y), k2)
    return GraphonSample(BiAdjacency(a), rows, cols, x, y, clipped)


def graphon_l4_deviation(spec: GraphonSpec, grid=400):
    """||rho0 - block part||_{L4} by midpoint quadrature, and its ratio to sqrt(d)."""
    t = (np.arange(grid) + 0.5) / grid
    diff = spec.rho0(t, t) - spec.block_part(t, t)
    l4 = float(np.mean(diff**4) ** 0.25)
    d = spec.d
    return l4, (l4 / np.sqrt(d) if d > 0 else float("inf"))
