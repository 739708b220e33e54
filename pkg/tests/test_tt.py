import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ttsfv.tt import (
    TTTensor,
    apply_matrix_to_core,
    contract_axes,
    gram_environments,
    load_tt,
    save_tt,
    tt_add,
    tt_dot,
    tt_hadamard,
    tt_norm_f,
    tt_ones,
    tt_rank1,
    tt_round,
    tt_scale,
    tt_svd,
    tt_to_dense,
    tt_zeros,
)


def random_tt(rng, modes, ranks):
    r = [1, *ranks, 1]
    return TTTensor([rng.standard_normal((r[k], n, r[k + 1])) for k, n in enumerate(modes)])


def unfolding_ranks(u):
    """Ranks of the sequential unfoldings, from a dense SVD."""
    out = []
    for k in range(1, u.ndim):
        mat = u.reshape(int(np.prod(u.shape[:k])), -1)
        s = np.linalg.svd(mat, compute_uv=False)
        out.append(int(np.sum(s > s[0] * max(mat.shape) * np.finfo(float).eps)))
    return out


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


# --- tt_svd / tt_to_dense -----------------------------------------------------

def test_svd_rank_one_input():
    rng = np.random.default_rng(1)
    a, b, c = rng.standard_normal(5), rng.standard_normal(6), rng.standard_normal(7)
    u = np.einsum("i,j,k->ijk", a, b, c)
    for eps in (0.0, 1e-12, 0.3):
        t = tt_svd(u, eps)
        assert t.ranks == (1, 1, 1, 1)
        assert np.allclose(t.full(), u, rtol=0, atol=1e-13 * np.abs(u).max())


def test_svd_exact_mode_recovers_unfolding_ranks():
    rng = np.random.default_rng(2)
    u = rng.standard_normal((8, 8, 8))
    t = tt_svd(u, 0.0)
    assert list(t.ranks[1:-1]) == unfolding_ranks(u) == [8, 8]
    assert rel(t.full(), u) < 1e-13


def test_svd_known_low_rank_exact_mode():
    rng = np.random.default_rng(3)
    src = random_tt(rng, (6, 7, 5, 4), (2, 3, 2))
    u = src.full()
    t = tt_svd(u, 0.0)
    assert t.ranks == (1, 2, 3, 2, 1)
    assert rel(t.full(), u) < 1e-12


def test_dense_roundtrip_1e8():
    u = np.random.default_rng(4).standard_normal((6, 6, 6))
    assert rel(tt_to_dense(tt_svd(u, 1e-8)), u) <= 1e-8


def test_all_ones_cores():
    assert np.array_equal(tt_to_dense(tt_ones((2, 2, 2))), np.ones((2, 2, 2)))


def test_d1_tensor_is_not_truncated():
    v = np.array([1.0, 1e-9, -2.0])
    t = tt_svd(v, 0.5)
    assert np.array_equal(t.full(), v)


@settings(max_examples=60, deadline=None)
@given(
    shape=st.lists(st.integers(1, 6), min_size=2, max_size=4),
    eps=st.sampled_from([1e-1, 1e-3, 1e-6, 1e-10]),
    seed=st.integers(0, 2**31),
)
def test_svd_error_bound_property(shape, eps, seed):
    u = np.random.default_rng(seed).standard_normal(shape)
    t = tt_svd(u, eps)
    assert np.linalg.norm(t.full() - u) <= eps * np.linalg.norm(u) * (1 + 1e-10)


def test_svd_rejects_negative_eps():
    with pytest.raises(ValueError):
        tt_svd(np.ones((2, 2)), -1.0)


# --- rounding -----------------------------------------------------------------

def test_round_collapses_duplicate_sum():
    rng = np.random.default_rng(5)
    a = random_tt(rng, (5, 6, 7), (2, 2))
    s = tt_add(a, a)
    assert s.ranks == (1, 4, 4, 1)
    r = tt_round(s, 1e-12)
    assert r.ranks == (1, 2, 2, 1)
    assert rel(r.full(), 2 * a.full()) < 1e-12


def test_round_rank_one_unchanged():
    t = tt_rank1([np.arange(1.0, 4), np.array([2.0, -1.0]), np.ones(3)])
    r = tt_round(t, 1e-3)
    assert r.ranks == (1, 1, 1, 1)
    assert np.allclose(r.full(), t.full(), rtol=1e-14, atol=0)


def test_round_hard_cap_one():
    t = random_tt(np.random.default_rng(6), (4, 5, 6, 3), (3, 4, 2))
    r = tt_round(t, 1e-12, max_rank=1)
    assert r.ranks == (1, 1, 1, 1, 1)


def test_round_per_bond_caps():
    t = random_tt(np.random.default_rng(7), (4, 5, 6, 3), (4, 4, 3))
    r = tt_round(t, 1e-14, max_rank=[2, 3, 1])
    assert r.ranks == (1, 2, 3, 1, 1)


@settings(max_examples=40, deadline=None)
@given(
    modes=st.lists(st.integers(2, 5), min_size=2, max_size=4),
    rank=st.integers(1, 4),
    eps=st.sampled_from([1e-1, 1e-4, 1e-9]),
    seed=st.integers(0, 2**31),
)
def test_round_never_grows_and_respects_bound(modes, rank, eps, seed):
    rng = np.random.default_rng(seed)
    t = random_tt(rng, modes, [rank] * (len(modes) - 1))
    r = tt_round(t, eps)
    assert all(a <= b for a, b in zip(r.ranks, t.ranks))
    full = t.full()
    assert np.linalg.norm(r.full() - full) <= eps * np.linalg.norm(full) * (1 + 1e-9) + 1e-14


# --- algebra ------------------------------------------------------------------

def test_add_zero_and_rank_blocks():
    rng = np.random.default_rng(8)
    a = random_tt(rng, (4, 5), (2,))
    b = random_tt(rng, (4, 5), (3,))
    assert np.allclose(tt_add(a, tt_zeros((4, 5))).full(), a.full(), rtol=0, atol=1e-14)
    s = tt_add(a, b)
    assert s.ranks == (1, 5, 1)
    assert np.allclose(s.full(), a.full() + b.full(), rtol=1e-14, atol=1e-14)


def test_add_cancellation():
    a = random_tt(np.random.default_rng(9), (4, 5, 3), (2, 2))
    diff = tt_add(a, tt_scale(a, -1.0))
    assert np.linalg.norm(diff.full()) <= 1e-14 * np.linalg.norm(a.full())


def test_add_mode_mismatch():
    with pytest.raises(ValueError):
        tt_add(tt_ones((2, 3)), tt_ones((3, 2)))


def test_hadamard_identity_and_rank_bound():
    rng = np.random.default_rng(10)
    a = random_tt(rng, (4, 5), (2,))
    b = random_tt(rng, (4, 5), (3,))
    assert np.allclose(tt_hadamard(a, tt_ones((4, 5))).full(), a.full(), rtol=1e-14, atol=1e-14)
    h = tt_hadamard(a, b)
    assert h.ranks[1] <= 6
    assert np.allclose(h.full(), a.full() * b.full(), rtol=1e-13, atol=1e-13)


def test_scale():
    a = random_tt(np.random.default_rng(11), (3, 4, 5), (2, 3))
    assert np.array_equal(tt_scale(a, 1.0).full(), a.full())
    assert np.linalg.norm(tt_scale(a, 0.0).full()) == 0.0
    assert np.allclose(tt_scale(a, 2.0).full(), 2 * a.full(), rtol=1e-15, atol=0)


@settings(max_examples=40, deadline=None)
@given(
    modes=st.lists(st.integers(1, 5), min_size=1, max_size=4),
    ra=st.integers(1, 3),
    rb=st.integers(1, 3),
    c=st.floats(-3, 3),
    seed=st.integers(0, 2**31),
)
def test_algebra_matches_dense(modes, ra, rb, c, seed):
    rng = np.random.default_rng(seed)
    a = random_tt(rng, modes, [ra] * (len(modes) - 1))
    b = random_tt(rng, modes, [rb] * (len(modes) - 1))
    A, B = a.full(), b.full()
    scale = 1 + np.abs(A).max() * (1 + np.abs(B).max())
    assert np.allclose(tt_add(a, b).full(), A + B, rtol=0, atol=1e-12 * scale)
    assert np.allclose(tt_hadamard(a, b).full(), A * B, rtol=0, atol=1e-12 * scale)
    assert np.allclose(tt_scale(a, c).full(), c * A, rtol=0, atol=1e-12 * scale)
    assert all(r <= x * y for r, x, y in zip(tt_hadamard(a, b).ranks, a.ranks, b.ranks))


# --- core matrices --------------------------------------------------------------

def test_apply_identity_and_vector():
    rng = np.random.default_rng(12)
    t = random_tt(rng, (4, 5, 3), (2, 2))
    assert np.array_equal(apply_matrix_to_core(t, 1, np.eye(5)).full(), t.full())
    v = TTTensor([rng.standard_normal((1, 6, 1))])
    m = rng.standard_normal((4, 6))
    assert np.allclose(apply_matrix_to_core(v, 0, m).full(), m @ v.full(), rtol=1e-14, atol=1e-14)


def test_apply_kronecker_oracle():
    rng = np.random.default_rng(13)
    t = random_tt(rng, (3, 4, 5), (2, 3))
    m = rng.standard_normal((6, 4))
    kron = np.kron(np.kron(np.eye(3), m), np.eye(5))
    want = (kron @ t.full().ravel()).reshape(3, 6, 5)
    assert np.allclose(apply_matrix_to_core(t, 1, m).full(), want, rtol=1e-13, atol=1e-13)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), a=st.integers(0, 2), b=st.integers(0, 2))
def test_apply_commutes_across_axes(seed, a, b):
    if a == b:
        return
    rng = np.random.default_rng(seed)
    t = random_tt(rng, (3, 4, 5), (2, 2))
    ma = rng.standard_normal((2, t.mode_sizes[a]))
    mb = rng.standard_normal((3, t.mode_sizes[b]))
    x = apply_matrix_to_core(apply_matrix_to_core(t, a, ma), b, mb).full()
    y = apply_matrix_to_core(apply_matrix_to_core(t, b, mb), a, ma).full()
    assert np.allclose(x, y, rtol=1e-13, atol=1e-13)


def test_apply_bad_shape():
    with pytest.raises(ValueError):
        apply_matrix_to_core(tt_ones((3, 4)), 0, np.eye(4))


# --- norms and contractions -------------------------------------------------------

def test_norms():
    assert tt_norm_f(tt_zeros((3, 4))) == 0.0
    assert tt_norm_f(tt_ones((3, 4, 5))) == pytest.approx(np.sqrt(60), rel=1e-15)
    t = random_tt(np.random.default_rng(14), (4, 3, 5), (3, 2))
    assert tt_norm_f(t) == pytest.approx(np.linalg.norm(t.full()), rel=1e-12)
    assert tt_dot(t, t) == pytest.approx(np.linalg.norm(t.full()) ** 2, rel=1e-12)


def test_gram_environments_match_norm():
    t = random_tt(np.random.default_rng(15), (4, 3, 5), (3, 2))
    left, right = gram_environments(t)
    n2 = np.linalg.norm(t.full()) ** 2
    assert left[-1][0, 0] == pytest.approx(n2, rel=1e-12)
    assert right[0][0, 0] == pytest.approx(n2, rel=1e-12)
    for k in range(1, t.d):
        assert np.trace(left[k] @ right[k]) == pytest.approx(n2, rel=1e-12)


def test_contract_axes():
    rng = np.random.default_rng(16)
    t = random_tt(rng, (4, 3, 5), (3, 2))
    w1, w2 = rng.random(3), rng.random(5)
    got = contract_axes(t, {1: w1, 2: w2}).full()
    assert np.allclose(got, np.einsum("ijk,j,k->i", t.full(), w1, w2), rtol=1e-13, atol=1e-13)


def test_evaluate_matches_dense():
    rng = np.random.default_rng(17)
    t = random_tt(rng, (4, 3, 5), (3, 2))
    idx = np.stack([rng.integers(0, n, 50) for n in t.mode_sizes], 1)
    assert np.allclose(t.evaluate(idx), t.full()[tuple(idx.T)], rtol=1e-14, atol=1e-14)


def test_save_load_roundtrip(tmp_path):
    t = random_tt(np.random.default_rng(18), (4, 3, 5), (3, 2))
    save_tt(tmp_path / "t.tt", t)
    back = load_tt(tmp_path / "t.tt")
    assert back.ranks == t.ranks
    assert all(np.array_equal(a, b) for a, b in zip(back.cores, t.cores))


@settings(max_examples=20, deadline=None)
@given(arrays(np.float64, (3, 4, 2), elements=st.floats(-1e3, 1e3)))
def test_exact_mode_roundtrip_property(u):
    t = tt_svd(u, 0.0)
    assert np.allclose(t.full(), u, rtol=0, atol=1e-12 * (1 + np.abs(u).max()))
