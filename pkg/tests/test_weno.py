import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ttsfv.tt import TTTensor, apply_matrix_to_core, tt_ones
from ttsfv.weno import (
    BOUNDARY_MODES,
    build_interface_operators,
    build_quadrature_operators,
    build_reconstruction,
    dense_axis_indicators,
    gauss_nodes,
    interleave,
    linear_weights,
    reconstruct_axis,
    smoothness_indicators,
    tt_axis_indicators,
    weno3_weights,
    WENO_EPS,
)


def step_slack(jump, scale, eps=WENO_EPS):
    """Largest excursion past the data range on a step of height ``jump``.

    The stencil crossing the jump keeps weight at most 2 (eps / (eps + jump^2))^2
    and its value is off by at most jump / 2.
    """
    return jump * (eps / (eps + jump**2)) ** 2 + 1e-13 * scale


def quadratic_oracle_weight(xi):
    """d0 from the quadratic matching three unit cell averages, evaluated at xi."""
    edges = np.array([-1.5, -0.5, 0.5, 1.5])
    # average of c0 + c1 x + c2 x^2 over [a, b]
    A = np.array([[1, (b + a) / 2, (b**3 - a**3) / (3 * (b - a))] for a, b in zip(edges[:-1], edges[1:])])
    # coefficient of u_{i+1} in the quadratic value at xi
    coef = np.array([1, xi, xi * xi]) @ np.linalg.inv(A)
    # blend d0 (u_i + xi (u_{i+1} - u_i)) + d1 (u_i + xi (u_i - u_{i-1})): u_{i+1} coefficient d0 xi
    return coef[2] / xi


def random_data(rng, n):
    kind = rng.integers(4)
    if kind == 0:
        return rng.standard_normal(n)
    if kind == 1:
        return np.cumsum(rng.standard_normal(n))
    if kind == 2:
        u = np.zeros(n)
        u[rng.integers(1, n - 1):] = rng.uniform(0.1, 10)
        return u
    return np.sin(2 * np.pi * np.arange(n) / n * rng.integers(1, 4)) * rng.uniform(0.1, 5)


# --- linear weights -------------------------------------------------------------

def test_interface_linear_weights():
    assert linear_weights(0.5) == pytest.approx((2 / 3, 1 / 3), abs=1e-15)
    assert linear_weights(-0.5) == pytest.approx((1 / 3, 2 / 3), abs=1e-15)


@pytest.mark.parametrize("xi", [0.5, -0.5, 0.45, 0.387298334620741688, -0.387298334620741688, 0.3])
def test_linear_weights_quadratic_exact(xi):
    assert linear_weights(xi)[0] == pytest.approx(quadratic_oracle_weight(xi), abs=1e-13)


def test_gauss_nodes():
    x, w = gauss_nodes(3)
    assert np.allclose(x, [-np.sqrt(15) / 10, 0, np.sqrt(15) / 10], atol=1e-15)
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(w, [5 / 18, 8 / 18, 5 / 18], atol=1e-15)


# --- indicators and weights ----------------------------------------------------------

def test_indicators_constant_and_linear():
    b0, b1 = smoothness_indicators(np.full(6, 2.5), "periodic")
    assert np.all(b0 == 0) and np.all(b1 == 0)
    b0, b1 = smoothness_indicators(3.0 * np.arange(8), "extrapolate")
    assert np.allclose(b0[1:-1], 9.0) and np.allclose(b1[1:-1], 9.0)


def test_indicators_step():
    b0, b1 = smoothness_indicators(np.array([0, 0, 0, 1, 1, 1.0]), "extrapolate")
    assert (b0[2], b1[2]) == (1.0, 0.0)
    assert (b0[3], b1[3]) == (0.0, 1.0)


def test_truncated_stencil_indicators():
    b0, b1 = smoothness_indicators(np.arange(5.0), "truncated-stencil")
    assert np.isinf(b0[-1]) and np.isinf(b1[0])


def test_weight_limits():
    assert weno3_weights(0.0, 0.0, "L") == pytest.approx((2 / 3, 1 / 3), abs=1e-15)
    assert weno3_weights(0.0, 0.0, "R") == pytest.approx((1 / 3, 2 / 3), abs=1e-15)
    assert weno3_weights(1.0, 1.0, "L") == pytest.approx((2 / 3, 1 / 3), abs=1e-15)
    w0, w1 = weno3_weights(0.0, np.inf, "L")
    assert (float(w0), float(w1)) == (1.0, 0.0)
    w0, w1 = weno3_weights(0.0, 1e20, "L")
    assert w0 == pytest.approx(1.0, abs=1e-15)


@settings(max_examples=300, deadline=None)
@given(
    b0=st.floats(0, 1e6), b1=st.floats(0, 1e6),
    side=st.one_of(st.sampled_from(["L", "R"]), st.floats(-0.5, 0.5)),
)
def test_weights_convex(b0, b1, side):
    w0, w1 = weno3_weights(b0, b1, side)
    assert 0.0 <= w0 <= 1.0 and 0.0 <= w1 <= 1.0
    assert w0 + w1 == pytest.approx(1.0, abs=1e-15)


# --- operators -------------------------------------------------------------------

@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(3, 40), boundary=st.sampled_from(BOUNDARY_MODES))
def test_operator_rows_consistent_and_exact(seed, n, boundary):
    rng = np.random.default_rng(seed)
    u = random_data(rng, n)
    rec = build_reconstruction(u, 3, boundary)
    for op in (rec.L, rec.R, *rec.Q):
        m = op.to_dense()
        assert np.abs(m.sum(axis=1) - 1).max() <= 1e-13
        assert np.allclose(op.apply(np.full(n, 1.7)), 1.7, rtol=0, atol=1e-13)
    # exact on linear data away from wrap-around and edges
    c, b = rng.uniform(-3, 3, 2)
    lin = b + c * np.arange(n)
    L, R = build_interface_operators(lin, boundary)
    inner = slice(1, n - 1)
    assert np.allclose(L.apply(lin)[inner], (b + c * (np.arange(n) + 0.5))[inner], atol=1e-12 * (1 + abs(b) + abs(c) * n))
    assert np.allclose(R.apply(lin)[inner], (b + c * (np.arange(n) - 0.5))[inner], atol=1e-12 * (1 + abs(b) + abs(c) * n))
    x = gauss_nodes(3)[0]
    for q, xi in zip(build_quadrature_operators(lin, 3, boundary), x):
        assert np.allclose(q.apply(lin)[inner], (b + c * (np.arange(n) + xi))[inner],
                           atol=1e-12 * (1 + abs(b) + abs(c) * n))


@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(4, 40), boundary=st.sampled_from(BOUNDARY_MODES))
def test_step_data_stays_in_range(seed, n, boundary):
    rng = np.random.default_rng(seed)
    lo_val, hi_val = sorted(rng.uniform(-5, 5, 2))
    if hi_val - lo_val < 1e-2:
        hi_val = lo_val + 1.0
    u = np.full(n, lo_val)
    u[rng.integers(1, n - 1):] = hi_val
    if rng.random() < 0.5:
        u = u[::-1].copy()
    ops = build_reconstruction(u, 3, boundary)
    if boundary == "periodic":
        left, right = np.roll(u, 1), np.roll(u, -1)
    else:
        left, right = np.r_[u[0], u[:-1]], np.r_[u[1:], u[-1]]
    lo = np.minimum(np.minimum(left, u), right)
    hi = np.maximum(np.maximum(left, u), right)
    slack = step_slack(hi_val - lo_val, max(abs(lo_val), abs(hi_val)))
    # a truncated edge cell has a single stencil, so no choice is left there
    cells = slice(1, n - 1) if boundary == "truncated-stencil" else slice(None)
    for op in (ops.L, ops.R, *ops.Q):
        v = op.apply(u)[cells]
        assert np.all(v >= lo[cells] - slack) and np.all(v <= hi[cells] + slack)


def test_truncated_edge_uses_inner_stencil():
    u = np.array([0.0, 1.0, 3.0, 6.0])
    L, R = build_interface_operators(u, "truncated-stencil")
    assert L.apply(u)[0] == pytest.approx(0.5)
    assert R.apply(u)[-1] == pytest.approx(4.5)


def test_quadrature_at_half_matches_interface():
    u = np.sin(2 * np.pi * np.arange(32) / 32)
    L, R = build_interface_operators(u, "periodic")
    qL, qR = build_quadrature_operators(u, [0.5, -0.5], "periodic")
    assert np.allclose(qL.apply(u), L.apply(u), rtol=0, atol=1e-15)
    assert np.allclose(qR.apply(u), R.apply(u), rtol=0, atol=1e-15)


def test_interface_order_with_linear_weights():
    errs = []
    for n in (32, 64, 128, 256):
        h = 1.0 / n
        edges = np.arange(n + 1) * h
        ubar = (np.cos(2 * np.pi * edges[:-1]) - np.cos(2 * np.pi * edges[1:])) / (2 * np.pi * h)
        zero = np.zeros(n)
        L, _ = build_interface_operators(boundary="periodic", indicators=(zero, zero))
        errs.append(np.abs(L.apply(ubar) - np.sin(2 * np.pi * edges[1:])).max())
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert orders.min() >= 2.7


def test_too_few_cells():
    with pytest.raises(ValueError):
        build_interface_operators(np.ones(2), "extrapolate")


# --- TT application ------------------------------------------------------------------

def test_reconstruct_constant_tt():
    t = tt_ones((6, 5, 7)) * 3.0
    for axis in range(3):
        for kind in ("L", "R", "Q"):
            out = reconstruct_axis(t, axis, kind, boundary="extrapolate").full()
            assert np.allclose(out, 3.0, rtol=0, atol=1e-14)


def test_reconstruct_matches_kronecker():
    rng = np.random.default_rng(3)
    a, b = rng.standard_normal(10), rng.standard_normal(6)
    t = TTTensor([a.reshape(1, -1, 1), b.reshape(1, -1, 1)])
    dense = np.outer(a, b)
    ind = dense_axis_indicators(dense, 0, "periodic")
    L, _ = build_interface_operators(boundary="periodic", indicators=ind)
    got = reconstruct_axis(t, 0, "L", boundary="periodic").full()
    assert np.allclose(got, L.to_dense() @ dense, rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("boundary", BOUNDARY_MODES)
def test_tt_indicators_match_dense(boundary):
    rng = np.random.default_rng(4)
    t = TTTensor([rng.standard_normal(s) for s in [(1, 5, 2), (2, 6, 3), (3, 4, 1)]])
    for axis in range(3):
        got = tt_axis_indicators(t, axis, boundary)
        want = dense_axis_indicators(t.full(), axis, boundary)
        for g, w in zip(got, want):
            finite = np.isfinite(w)
            assert np.array_equal(np.isfinite(g), finite)
            assert np.allclose(g[finite], w[finite], rtol=1e-11, atol=1e-13)


def test_quadrature_shape():
    t = tt_ones((4, 5, 6))
    out = reconstruct_axis(t, 2, "Q", nodes=3, boundary="truncated-stencil")
    assert out.mode_sizes == (4, 5, 18)


def test_interleave_row_order():
    mats = [np.full((2, 2), k, dtype=float) for k in range(3)]
    m = interleave(mats)
    assert m.shape == (6, 2)
    assert list(m[:, 0]) == [0, 1, 2, 0, 1, 2]


def test_fiber_mode_on_rank_one_data():
    u = np.where(np.arange(12) < 6, 0.0, 1.0)
    t = TTTensor([u.reshape(1, -1, 1), np.ones((1, 3, 1))])
    L, _ = build_interface_operators(u, "extrapolate")
    got = reconstruct_axis(t, 0, "L", boundary="extrapolate", weights="fiber").full()
    assert np.allclose(got[:, 0], L.apply(u), rtol=0, atol=1e-14)


def test_apply_on_core_matches_tt_product():
    rng = np.random.default_rng(5)
    t = TTTensor([rng.standard_normal(s) for s in [(1, 8, 2), (2, 5, 1)]])
    ind = tt_axis_indicators(t, 0, "periodic")
    _, R = build_interface_operators(boundary="periodic", indicators=ind)
    want = apply_matrix_to_core(t, 0, R.to_dense()).full()
    assert np.allclose(reconstruct_axis(t, 0, "R", boundary="periodic").full(), want, rtol=0, atol=1e-14)
