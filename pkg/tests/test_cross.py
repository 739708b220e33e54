import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ttsfv.cross import CrossConfig, CrossWarning, NonFiniteSampleError, maxvol, tt_cross, tt_cross_map
from ttsfv.tt import TTTensor, tt_svd


def random_tt(rng, modes, ranks):
    r = [1, *ranks, 1]
    return TTTensor([rng.standard_normal((r[k], n, r[k + 1])) for k, n in enumerate(modes)])


def sampled_error(t, f, modes, rng, count=10_000):
    idx = np.stack([rng.integers(0, n, count) for n in modes], 1)
    want = f(idx)
    return np.linalg.norm(t.evaluate(idx) - want) / np.linalg.norm(want)


# --- maxvol -------------------------------------------------------------------

def test_maxvol_identity_rows():
    a = np.vstack([np.zeros((3, 4)), np.eye(4), np.zeros((2, 4))])
    rows = maxvol(a)
    assert sorted(rows) == [3, 4, 5, 6]
    assert abs(np.linalg.det(a[rows])) == pytest.approx(1.0)


def test_maxvol_column():
    assert list(maxvol(np.array([[1.0], [2.0], [3.0]]))) == [2]


def test_maxvol_beats_random_subsets():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((20, 4))
    best = abs(np.linalg.det(a[maxvol(a)]))
    samples = [abs(np.linalg.det(a[rng.choice(20, 4, replace=False)])) for _ in range(1000)]
    assert best >= max(samples) * (1 - 1e-12)


@settings(max_examples=50, deadline=None)
@given(p=st.integers(2, 40), r=st.integers(1, 6), seed=st.integers(0, 2**31))
def test_maxvol_dominance(p, r, seed):
    r = min(r, p)
    a = np.random.default_rng(seed).standard_normal((p, r))
    rows = maxvol(a, tol=1.01)
    assert len(set(rows)) == r
    coef = a @ np.linalg.inv(a[rows])
    assert np.abs(coef).max() <= 1.01 + 1e-10


# --- cross ----------------------------------------------------------------------

def test_cross_separable_target():
    g = [np.linspace(1, 2, 7), np.cos(np.arange(8.0)) + 2, np.exp(-np.arange(9.0) / 3)]

    def f(idx):
        return g[0][idx[:, 0]] * g[1][idx[:, 1]] * g[2][idx[:, 2]]

    cfg = CrossConfig(target_tolerance=1e-8)
    t, info = tt_cross(f, (7, 8, 9), cfg, seed=1, return_info=True)
    assert t.ranks == (1, 1, 1, 1)
    assert info.converged
    assert sampled_error(t, f, (7, 8, 9), np.random.default_rng(2)) <= 1e-8


def test_cross_recovers_known_tt():
    rng = np.random.default_rng(3)
    src = random_tt(rng, (6, 7, 8, 5), (3, 2, 3))
    t = tt_cross(src.evaluate, src.mode_sizes, CrossConfig(1e-9, max_rank=5), seed=4)
    assert max(t.ranks) <= 5
    assert sampled_error(t, src.evaluate, src.mode_sizes, np.random.default_rng(5)) <= 1e-8


def test_cross_advection_initial_data():
    x = (np.arange(64) + 0.5) / 64
    y = (np.arange(64) + 0.5) / 64

    def f(idx):
        return np.sin(2 * np.pi * (x[idx[:, 0]] + 0.1 * y[idx[:, 1]]))

    dense = np.sin(2 * np.pi * (x[:, None] + 0.1 * y[None, :]))
    oracle_rank = tt_svd(dense, 1e-12).ranks[1]
    t = tt_cross(f, (64, 64), CrossConfig(1e-7, max_rank=16), seed=6)
    assert t.ranks[1] <= 8
    assert t.ranks[1] <= oracle_rank
    assert np.abs(t.full() - dense).max() <= 1e-6


def test_cross_map_of_tensors():
    rng = np.random.default_rng(7)
    a = random_tt(rng, (6, 5, 7), (2, 2))
    b = random_tt(rng, (6, 5, 7), (1, 2))
    t = tt_cross_map(lambda u, v: u * v + np.sin(u), [a, b], CrossConfig(1e-9, max_rank=30), seed=8)
    want = a.full() * b.full() + np.sin(a.full())
    assert np.linalg.norm(t.full() - want) <= 1e-7 * np.linalg.norm(want)


def test_cross_nonfinite_sample():
    def f(idx):
        v = np.ones(len(idx))
        v[(idx[:, 0] == 2)] = np.nan
        return v

    with pytest.raises(NonFiniteSampleError):
        tt_cross(f, (4, 4), CrossConfig(1e-6), seed=0)


def test_cross_cap_warning():
    rng = np.random.default_rng(9)
    u = rng.standard_normal((12, 12, 12))

    def f(idx):
        return u[tuple(idx.T)]

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        t, info = tt_cross(f, u.shape, CrossConfig(1e-8, max_rank=3, max_sweeps=3), seed=1, return_info=True)
    assert info.rank_capped
    assert max(t.ranks) <= 3
    assert any(issubclass(w.category, CrossWarning) for w in caught)


def test_cross_reproducible_with_seed():
    rng = np.random.default_rng(10)
    src = random_tt(rng, (5, 6, 7), (2, 3))
    a = tt_cross(src.evaluate, src.mode_sizes, CrossConfig(1e-8), seed=11)
    b = tt_cross(src.evaluate, src.mode_sizes, CrossConfig(1e-8), seed=11)
    assert all(np.array_equal(x, y) for x, y in zip(a.cores, b.cores))


def test_cross_config_validation():
    with pytest.raises(ValueError):
        CrossConfig(target_tolerance=0.0)
    with pytest.raises(ValueError):
        CrossConfig(max_rank=0)
    with pytest.raises(ValueError):
        CrossConfig(maxvol_tolerance=0.5)
