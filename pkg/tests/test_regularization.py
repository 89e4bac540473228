import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bispectral.models import expected_degrees, fig2_spec, mean_matrix, sample_sbm
from bispectral.regularization import (
    RegularizationReport,
    concentration_error,
    degree_csv,
    degree_order_statistic,
    regularize,
    regularize_data_driven,
    regularize_oracle,
    regularize_truncate,
    truncation_weights,
)
from bispectral.types import ZeroGraph


def rows_with_degrees(degrees, n_cols=None):
    n_cols = n_cols or max(degrees)
    x = np.zeros((len(degrees), n_cols))
    for i, d in enumerate(degrees):
        x[i, :d] = 1
    return x


def test_order_statistic_hand_traces():
    st1 = degree_order_statistic(rows_with_degrees([1, 2, 3, 10]), "row")
    assert st1.mean == 4 and st1.alpha == 1 and st1.order_stat == 10
    st2 = degree_order_statistic(rows_with_degrees([5, 5, 5, 5]), "row")
    assert st2.mean == 5 and st2.alpha == 1 and st2.order_stat == 5
    with pytest.raises(ZeroGraph):
        degree_order_statistic(np.zeros((3, 3)), "row")
    with pytest.raises(ValueError):
        degree_order_statistic(np.eye(2), "diag")


def test_order_statistic_alpha_counts_from_top():
    x = rows_with_degrees([1, 1, 1, 1, 1, 1, 2, 8])
    st_ = degree_order_statistic(x, "row")
    # mean 2, alpha = floor(8 / 2) = 4, fourth largest degree is 1
    assert st_.alpha == 4 and st_.order_stat == 1


def test_no_trimming_when_below_threshold():
    x = rows_with_degrees([1, 2, 3, 10])
    out, rep = regularize_data_driven(x, 3)
    assert rep.dhat_row == 30 and rep.trimmed_rows == ()
    assert np.array_equal(out.entries[:, :], out.entries) and np.all(rep.weights_row == 1)


def test_single_hub_row():
    x = np.zeros((40, 200))
    x[0, :100] = 1
    for i in range(1, 40):
        x[i, i] = 1
    wr, trimmed = truncation_weights(x.sum(axis=1), 30.0)
    assert trimmed == (0,) and wr[0] == pytest.approx(0.3)
    out = x * wr[:, None]
    assert out[0].sum() == pytest.approx(30.0)


def test_infinite_tau_and_zero_graph():
    rng = np.random.default_rng(0)
    x = (rng.random((20, 30)) < 0.2).astype(float)
    out, rep = regularize_data_driven(x, math.inf)
    assert np.array_equal(out.entries, x) and rep.trimmed_rows == () and rep.mode == "none"
    out, rep = regularize_data_driven(np.zeros((4, 5)), 3)
    assert rep.zero_graph and not out.entries.any()
    with pytest.raises(ValueError):
        regularize_data_driven(x, 0)


def test_oracle_examples():
    x = rows_with_degrees([2, 2, 3, 20], 20)
    out, rep = regularize_oracle(x, 4.0, 4.0)
    assert rep.trimmed_rows == (3,)
    assert out.entries[3].sum() == pytest.approx(4.0)
    assert np.array_equal(out.entries[:3], x[:3])
    x = rows_with_degrees([1, 1, 1, 1], 4)
    out, _ = regularize_oracle(x, 2.0, 2.0)
    assert np.array_equal(out.entries, x)
    d = 4.0
    x = np.zeros((3, 40))
    x[0, :20] = 1
    out, _ = regularize_oracle(x, d, d)
    assert out.entries[0, 0] == pytest.approx(1 / 5)
    with pytest.raises(ValueError):
        regularize_oracle(x, 0.0, 1.0)


def test_dispatch():
    spec = fig2_spec(30, seed=1)
    a, _, _ = sample_sbm(spec)
    deg = expected_degrees(spec)
    out_w, rep_w = regularize(a, 1.0, "weights")
    out_o, rep_o = regularize(a, 1.0, "oracle", deg.row_max, deg.col_max)
    out_n, rep_n = regularize(a, 1.0, "none")
    assert rep_w.mode == "weights" and rep_o.mode == "oracle" and rep_n.mode == "none"
    assert rep_o.dhat_row == pytest.approx(deg.row_max)
    ref, _ = regularize_truncate(a, deg.row_max, deg.col_max)
    assert np.array_equal(out_o.entries, ref.entries)
    assert np.array_equal(out_n.entries, a.entries)
    with pytest.raises(ValueError):
        regularize(a, 1.0, "oracle")
    with pytest.raises(ValueError):
        regularize(a, 1.0, "median")


def test_report_json_round_trip():
    rng = np.random.default_rng(1)
    x = (rng.random((15, 25)) < 0.3).astype(float)
    x[0] = 1
    _, rep = regularize_data_driven(x, 1.0)
    back = RegularizationReport.from_json(rep.to_json())
    assert back.trimmed_rows == rep.trimmed_rows and back.dhat_row == rep.dhat_row
    assert np.allclose(back.weights_row, rep.weights_row)
    _, rep = regularize_data_driven(x, math.inf)
    assert math.isinf(RegularizationReport.from_json(rep.to_json()).tau)


def bernoulli_with_hubs(seed):
    rng = np.random.default_rng(seed)
    n1, n2 = rng.integers(5, 40), rng.integers(5, 40)
    x = (rng.random((n1, n2)) < rng.uniform(0.02, 0.3)).astype(float)
    hubs = rng.integers(0, n1, size=2)
    x[hubs] = (rng.random((2, n2)) < 0.9)
    return x


@given(st.integers(0, 10**6), st.floats(0.5, 5.0))
def test_l1_constraints_on_trimmed_sets(seed, tau):
    x = bernoulli_with_hubs(seed)
    if not x.any():
        return
    out, rep = regularize_data_driven(x, tau)
    y = out.entries
    for i in rep.trimmed_rows:
        assert y[i].sum() <= rep.dhat_row + 1e-9
    for j in rep.trimmed_cols:
        assert y[:, j].sum() <= rep.dhat_col + 1e-9


@given(st.integers(0, 10**6), st.floats(0.5, 4.0), st.floats(0.0, 3.0))
def test_monotone_in_tau(seed, tau, extra):
    x = bernoulli_with_hubs(seed)
    if not x.any():
        return
    lo, rep_lo = regularize_data_driven(x, tau)
    hi, rep_hi = regularize_data_driven(x, tau + extra)
    assert np.all(hi.entries >= lo.entries - 1e-15)
    assert np.all(rep_hi.weights_row >= rep_lo.weights_row - 1e-15)


@given(st.integers(0, 10**6), st.floats(0.5, 4.0))
def test_reapplying_never_increases(seed, tau):
    x = bernoulli_with_hubs(seed)
    if not x.any():
        return
    once, _ = regularize_data_driven(x, tau)
    twice, _ = regularize_data_driven(once, tau)
    assert np.all(twice.entries <= once.entries + 1e-15)


def test_concentration_error_examples():
    rng = np.random.default_rng(2)
    p = rng.random((30, 20)) * 0.1
    assert concentration_error(p, p)[0] == 0.0
    u = rng.normal(size=30)
    v = rng.normal(size=20)
    u /= np.linalg.norm(u)
    v /= np.linalg.norm(v)
    abs_err, rel = concentration_error(p + 0.25 * np.outer(u, v), p)
    assert abs_err == pytest.approx(0.25, rel=1e-8)
    assert rel == pytest.approx(0.25 / np.linalg.norm(p, 2), rel=1e-8)
    with pytest.raises(ValueError):
        concentration_error(p, p[:5])


def test_regularization_helps_on_sparse_design():
    spec = fig2_spec(150, seed=4)
    a, rows, cols = sample_sbm(spec)
    p = mean_matrix(spec, rows, cols)
    _, raw = concentration_error(a, p)
    out, _ = regularize(a, 1.0)
    _, reg = concentration_error(out, p)
    assert reg < raw


def test_degree_csv():
    text = degree_csv(np.array([[1.0, 0.0], [1.0, 1.0]]))
    lines = text.strip().splitlines()
    assert lines[0] == "side,index,degree" and len(lines) == 5
    assert lines[1] == "row,0,1.0" and lines[-1] == "col,1,1.0"
