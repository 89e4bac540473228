"""Degree-based regularization of a bi-adjacency matrix.

Heavy rows and columns are down-weighted so that the regularized matrix
concentrates around its mean in operator norm even when the graph is
sparse. The data-driven scheme estimates its threshold from the degree
order statistics; the oracle scheme takes it as an input.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .linalg import operator_norm
from .types import BiAdjacency, ZeroGraph

DEFAULT_TAU = 3.0


@dataclass(frozen=True)
class DegreeStats:
    degrees: np.ndarray
    mean: float
    alpha: int
    order_stat: float


@dataclass(frozen=True)
class RegularizationReport:
    tau: float
    mode: str
    alpha_row: int = 0
    alpha_col: int = 0
    dhat_row: float = math.inf
    dhat_col: float = math.inf
    trimmed_rows: tuple = ()
    trimmed_cols: tuple = ()
    weights_row: np.ndarray = None
    weights_col: np.ndarray = None
    zero_graph: bool = False

    def to_dict(self):
        def num(v):
            return "inf" if isinstance(v, float) and math.isinf(v) else v

        return {
            "tau": num(float(self.tau)),
            "mode": self.mode,
            "alpha_row": int(self.alpha_row),
            "alpha_col": int(self.alpha_col),
            "dhat_row": num(float(self.dhat_row)),
            "dhat_col": num(float(self.dhat_col)),
            "trimmed_rows": [int(i) for i in self.trimmed_rows],
            "trimmed_cols": [int(j) for j in self.trimmed_cols],
            "weights_row": None if self.weights_row is None else self.weights_row.tolist(),
            "weights_col": None if self.weights_col is None else self.weights_col.tolist(),
            "zero_graph": self.zero_graph,
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)

        def num(v):
            return math.inf if v == "inf" else float(v)

        return cls(
            tau=num(obj["tau"]),
            mode=obj["mode"],
            alpha_row=obj["alpha_row"],
            alpha_col=obj["alpha_col"],
            dhat_row=num(obj["dhat_row"]),
            dhat_col=num(obj["dhat_col"]),
            trimmed_rows=tuple(obj["trimmed_rows"]),
            trimmed_cols=tuple(obj["trimmed_cols"]),
            weights_row=None if obj["weights_row"] is None else np.array(obj["weights_row"]),
            weights_col=None if obj["weights_col"] is None else np.array(obj["weights_col"]),
            zero_graph=obj.get("zero_graph", False),
        )


def _entries(a):
    return a.entries if isinstance(a, BiAdjacency) else np.asarray(a, dtype=float)


def degree_order_statistic(a, side="row") -> DegreeStats:
    """Degrees, their mean, alpha = floor(n / mean) clamped to [1, n], and D_(alpha).

    D_(alpha) is the alpha-th largest degree.
    """
    x = _entries(a)
    if np.any(x < 0):
        raise ValueError("adjacency must be nonnegative")
    if side == "row":
        deg = x.sum(axis=1)
    elif side == "col":
        deg = x.sum(axis=0)
    else:
        raise ValueError("side must be 'row' or 'col'")
    n = deg.size
    mean = float(deg.mean()) if n else 0.0
    if mean == 0.0:
        raise ZeroGraph(f"all {side} degrees are zero")
    alpha = int(min(max(math.floor(n / mean), 1), n))
    order_stat = float(np.sort(deg)[::-1][alpha - 1])
    return DegreeStats(deg, mean, alpha, order_stat)


def truncation_weights(degrees, threshold):
    """w_i = min(threshold / D_i, 1), with w_i = 1 where D_i = 0.

    Trimmed set is {i : D_i >= threshold}; empty when threshold is not positive
    or infinite.
    """
    deg = np.asarray(degrees, dtype=float)
    w = np.ones_like(deg)
    if not math.isfinite(threshold) or threshold <= 0:
        return w, ()
    pos = deg > 0
    w[pos] = np.minimum(threshold / deg[pos], 1.0)
    trimmed = tuple(int(i) for i in np.flatnonzero(deg >= threshold))
    return w, trimmed


def _apply(x, wr, wc):
    return x * wr[:, None] * wc[None, :]


def _identity(a, tau, mode, zero_graph=False):
    x = _entries(a)
    report = RegularizationReport(
        tau=tau,
        mode=mode,
        weights_row=np.ones(x.shape[0]),
        weights_col=np.ones(x.shape[1]),
        zero_graph=zero_graph,
    )
    return BiAdjacency(x), report


def regularize_data_driven(a, tau=DEFAULT_TAU):
    """Scale row i by min(dhat1 / D_i, 1) and column j by min(dhat2 / D'_j, 1).

    dhat = tau * D_(alpha) on each side. ``tau = inf`` disables the step.
    An all-zero matrix comes back unchanged with ``zero_graph`` set.
    """
    tau = float(tau)
    if not tau > 0:
        raise ValueError("tau must be positive")
    if math.isinf(tau):
        return _identity(a, tau, "none")
    x = _entries(a)
    try:
        rs = degree_order_statistic(x, "row")
        cs = degree_order_statistic(x, "col")
    except ZeroGraph:
        return _identity(a, tau, "weights", zero_graph=True)
    dhat_r = tau * rs.order_stat
    dhat_c = tau * cs.order_stat
    wr, tr = truncation_weights(rs.degrees, dhat_r)
    wc, tc = truncation_weights(cs.degrees, dhat_c)
    out = _apply(x, wr, wc)
    report = RegularizationReport(
        tau=tau,
        mode="weights",
        alpha_row=rs.alpha,
        alpha_col=cs.alpha,
        dhat_row=dhat_r,
        dhat_col=dhat_c,
        trimmed_rows=tr,
        trimmed_cols=tc,
        weights_row=wr,
        weights_col=wc,
    )
    _assert_l1(out, report)
    return BiAdjacency(out), report


def _assert_l1(out, report, slack=1e-9):
    if report.trimmed_rows:
        rows = out[list(report.trimmed_rows)].sum(axis=1)
        assert np.all(rows <= report.dhat_row + slack), "row l1 constraint violated"
    if report.trimmed_cols:
        cols = out[:, list(report.trimmed_cols)].sum(axis=0)
        assert np.all(cols <= report.dhat_col + slack), "column l1 constraint violated"


def regularize_oracle(a, d, d_prime):
    """Rows and columns with degree above 2d are scaled to l1 norm d_prime.

    Uses the weight form min(d_prime / D_i, 1) on the heavy set only.
    """
    if not (d > 0 and d_prime > 0):
        raise ValueError("d and d_prime must be positive")
    x = _entries(a)
    out = []
    trimmed = []
    for deg in (x.sum(axis=1), x.sum(axis=0)):
        heavy = np.flatnonzero(deg > 2 * d)
        w = np.ones_like(deg)
        w[heavy] = np.minimum(d_prime / deg[heavy], 1.0)
        out.append(w)
        trimmed.append(tuple(int(i) for i in heavy))
    wr, wc = out
    report = RegularizationReport(
        tau=float("nan"),
        mode="oracle",
        dhat_row=float(d_prime),
        dhat_col=float(d_prime),
        trimmed_rows=trimmed[0],
        trimmed_cols=trimmed[1],
        weights_row=wr,
        weights_col=wc,
    )
    return BiAdjacency(_apply(x, wr, wc)), report


def regularize_truncate(a, row_threshold, col_threshold, tau=float("nan")):
    """Weight truncation at given row and column thresholds (oracle-curve helper)."""
    x = _entries(a)
    wr, tr = truncation_weights(x.sum(axis=1), row_threshold)
    wc, tc = truncation_weights(x.sum(axis=0), col_threshold)
    report = RegularizationReport(
        tau=tau,
        mode="oracle",
        dhat_row=float(row_threshold),
        dhat_col=float(col_threshold),
        trimmed_rows=tr,
        trimmed_cols=tc,
        weights_row=wr,
        weights_col=wc,
    )
    return BiAdjacency(_apply(x, wr, wc)), report


def regularize(a, tau=DEFAULT_TAU, mode="weights", d_max=None, d_max_col=None):
    """Dispatch on mode: "weights" (data-driven), "oracle" (tau * known max degrees), "none"."""
    if mode == "none" or (mode == "weights" and math.isinf(float(tau))):
        return _identity(a, float(tau), "none")
    if mode == "weights":
        return regularize_data_driven(a, tau)
    if mode == "oracle":
        if d_max is None or d_max_col is None:
            raise ValueError("oracle mode needs d_max and d_max_col")
        if math.isinf(float(tau)):
            return _identity(a, float(tau), "none")
        return regularize_truncate(a, tau * d_max, tau * d_max_col, tau=float(tau))
    raise ValueError(f"unknown mode {mode!r}")


def concentration_error(a_re, p, tol=1e-10):
    """(||a_re - p||, ||a_re - p|| / ||p||) in operator norm."""
    x = _entries(a_re)
    p = np.asarray(p, dtype=float)
    if x.shape != p.shape:
        raise ValueError("shape mismatch")
    abs_err = operator_norm(x - p, tol=tol)
    ref = operator_norm(p, tol=tol)
    rel = abs_err / ref if ref > 0 else float("inf")
    return abs_err, rel


def degree_csv(a) -> str:
    """Rows of (side, index, degree) for diagnostics."""
    x = _entries(a)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["side", "index", "degree"])
    for side, deg in (("row", x.sum(axis=1)), ("col", x.sum(axis=0))):
        for i, v in enumerate(deg):
            w.writerow([side, i, repr(float(v))])
    return buf.getvalue()
