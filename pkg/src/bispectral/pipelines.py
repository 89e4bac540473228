"""End-to-end spectral clustering: SC-1, SC-RR, SC-RRE and the sub-Gaussian variant.

Each pipeline regularizes (except the sub-Gaussian one), takes a k-truncated
SVD A_re^(k) = U S V^T, and runs k-means on one of three embeddings of the
rows: U (SC-1), U S V^T (SC-RR) or U S (SC-RRE). The last two have identical
pairwise row distances, so an isometry-invariant k-means gives the same
labels on both.
"""
from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .kmeans import KMeansConfig, lloyd_pp
from .linalg import align_orthogonal, spectral_norm, truncated_svd
from .models import population_factors
from .regularization import DEFAULT_TAU, RegularizationReport, concentration_error, regularize
from .types import BiAdjacency, Membership, normalized_membership

PIPELINES = ("sc1", "scrr", "scrre", "subg")


@dataclass(frozen=True)
class PipelineConfig:
    k_rows: int
    k_cols: int = None
    truncation_k: int = None
    tau: float = DEFAULT_TAU
    side: str = "rows"
    seed: int = 0
    restarts: int = 10
    max_lloyd_iters: int = 100
    reg_mode: str = "weights"
    svd_method: str = None

    def __post_init__(self):
        k_cols = self.k_rows if self.k_cols is None else self.k_cols
        object.__setattr__(self, "k_cols", int(k_cols))
        if self.k_rows < 1 or k_cols < 1:
            raise ValueError("cluster counts must be positive")
        if self.side not in ("rows", "cols", "both"):
            raise ValueError("side must be rows, cols or both")
        if not float(self.tau) > 0:
            raise ValueError("tau must be positive")
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def k(self):
        return self.truncation_k or min(self.k_rows, self.k_cols)

    def kmeans(self, side):
        k = self.k_rows if side == "rows" else self.k_cols
        return KMeansConfig(
            k,
            restarts=self.restarts,
            max_lloyd_iters=self.max_lloyd_iters,
            seed_substream=(self.seed, 0 if side == "rows" else 1),
        )

    def validate(self, shape):
        n1, n2 = shape
        if self.k > min(n1, n2):
            raise ValueError(f"truncation_k={self.k} exceeds min(n1, n2)={min(n1, n2)}")
        if self.k_rows > n1 or self.k_cols > n2:
            raise ValueError("more clusters than nodes")

    def to_dict(self):
        out = dict(self.__dict__)
        out["tau"] = "inf" if math.isinf(self.tau) else self.tau
        return out


@dataclass
class PipelineResult:
    pipeline: str
    rows: Membership = None
    cols: Membership = None
    sigma: np.ndarray = None
    report: RegularizationReport = None
    timings: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    config: PipelineConfig = None
    svd: object = None
    a_re: np.ndarray = None

    def to_dict(self):
        return {
            "pipeline": self.pipeline,
            "labels_rows": None if self.rows is None else self.rows.labels.tolist(),
            "labels_cols": None if self.cols is None else self.cols.labels.tolist(),
            "spectrum": None if self.sigma is None else self.sigma.tolist(),
            "regularization": None if self.report is None else _report_summary(self.report),
            "timings": self.timings,
            "diagnostics": self.diagnostics,
            "config": None if self.config is None else self.config.to_dict(),
            "seed": None if self.config is None else self.config.seed,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def _report_summary(rep):
    d = rep.to_dict()
    d.pop("weights_row")
    d.pop("weights_col")
    return d


def _entries(a):
    return a.entries if isinstance(a, BiAdjacency) else np.asarray(a, dtype=float)


def _embeddings(name, svd):
    u, s, v = svd.u, svd.sigma, svd.v
    if name == "sc1":
        return u, v
    if name == "scrr":
        low = (u * s) @ v.T
        return low, low.T
    if name in ("scrre", "subg"):
        return u * s, v * s
    raise ValueError(f"unknown pipeline {name!r}")


def run_pipeline(name, a, cfg: PipelineConfig, reg_kwargs=None) -> PipelineResult:
    """Regularize (unless ``subg``), truncate, then cluster the requested side(s)."""
    if name not in PIPELINES:
        raise ValueError(f"unknown pipeline {name!r}; choose from {PIPELINES}")
    x = _entries(a)
    cfg.validate(x.shape)
    timings = {}
    t0 = time.perf_counter()
    if name == "subg":
        a_re, report = x, None
    else:
        out, report = regularize(x, cfg.tau, cfg.reg_mode, **(reg_kwargs or {}))
        a_re = out.entries
    timings["regularize"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    svd = truncated_svd(a_re, cfg.k, seed=cfg.seed, method=cfg.svd_method)
    timings["svd"] = time.perf_counter() - t0
    row_emb, col_emb = _embeddings(name, svd)
    res = PipelineResult(name, sigma=svd.sigma, report=report, config=cfg, svd=svd, a_re=a_re)
    t0 = time.perf_counter()
    if cfg.side in ("rows", "both"):
        fit = lloyd_pp(row_emb, cfg.kmeans("rows"), canonical=True)
        res.rows = fit.kmm.membership
        res.diagnostics["rows_objective"] = fit.objective
        res.diagnostics["rows_empty_clusters"] = int(np.sum(fit.kmm.membership.sizes() == 0))
    if cfg.side in ("cols", "both"):
        fit = lloyd_pp(col_emb, cfg.kmeans("cols"), canonical=True)
        res.cols = fit.kmm.membership
        res.diagnostics["cols_objective"] = fit.objective
        res.diagnostics["cols_empty_clusters"] = int(np.sum(fit.kmm.membership.sizes() == 0))
    timings["kmeans"] = time.perf_counter() - t0
    res.diagnostics["kappa_bound"] = fit.kappa_bound
    res.timings = timings
    return res


def sc1(a, cfg, **kw):
    return run_pipeline("sc1", a, cfg, **kw)


def sc_rr(a, cfg, **kw):
    return run_pipeline("scrr", a, cfg, **kw)


def sc_rre(a, cfg, **kw):
    return run_pipeline("scrre", a, cfg, **kw)


def sc_subgaussian(a, cfg, **kw):
    return run_pipeline("subg", a, cfg, **kw)


def incoherence_rho1(spec) -> float:
    """1 - max over index pairs of the operator norm of (U U^T - I) restricted to the pair."""
    u = population_factors(spec).u_psi
    k1 = u.shape[0]
    m = u @ u.T - np.eye(k1)
    worst = 0.0
    for s, t in itertools.combinations(range(k1), 2):
        sub = m[np.ix_([s, t], [s, t])]
        worst = max(worst, float(np.max(np.abs(np.linalg.eigvalsh(sub)))))
    return float(min(max(1.0 - worst, 0.0), 1.0))


def bound_checks(a_re, p, spec, rows, k=None, svd_method=None):
    """Deterministic perturbation bounds for one regularized sample.

    Compares sigma_{k+1}(A_re), ||T_k(A_re) - P||_F and the aligned error of
    the left singular vectors with their operator-norm upper bounds.
    """
    a_re = _entries(a_re)
    p = np.asarray(p, dtype=float)
    k = k or spec.k
    e_norm = spectral_norm(a_re - p) if svd_method is None else float(
        truncated_svd(a_re - p, 1, method=svd_method).sigma[0]
    )
    svd = truncated_svd(a_re, k + 1, method=svd_method)
    u_k, s_k, v_k = svd.u[:, :k], svd.sigma[:k], svd.v[:, :k]
    low = (u_k * s_k) @ v_k.T
    frob = float(np.linalg.norm(low - p))
    fac = population_factors(spec)
    ref = normalized_membership(rows) @ fac.u_psi
    _, align = align_orthogonal(u_k, ref)
    sigma_k = float(fac.sigma[k - 1])
    c = 2.0 * math.sqrt(2.0 * k)
    out = {
        "e_norm": e_norm,
        "sigma_k1": float(svd.sigma[k]),
        "frob": frob,
        "frob_bound": c * e_norm,
        "align": align,
        "align_bound": c * e_norm / sigma_k if sigma_k > 0 else math.inf,
    }
    out["weyl_ok"] = out["sigma_k1"] <= e_norm
    out["frob_ok"] = frob <= out["frob_bound"]
    out["align_ok"] = align <= out["align_bound"]
    return out


def diagnose(result: PipelineResult, p, spec=None, rows=None):
    """Attach ground-truth diagnostics: concentration error and the perturbation bounds."""
    abs_err, rel_err = concentration_error(result.a_re, p)
    result.diagnostics["concentration_abs"] = abs_err
    result.diagnostics["concentration_rel"] = rel_err
    if spec is not None and rows is not None:
        result.diagnostics["bounds"] = bound_checks(result.a_re, p, spec, rows, result.config.k)
        result.diagnostics["rho1"] = incoherence_rho1(spec)
    return result
