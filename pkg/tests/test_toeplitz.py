import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlgrid import (
    ToeplitzOperator,
    assemble_generating_tensor,
    build_operator,
    make_kernel,
    materialize_dense,
    smooth_fft_length,
)
from nlgrid.gentensor import GeneratingTensor

from oracles import dense_from_tensor


def _random_tensor(d, band, seed=0):
    rng = np.random.default_rng(seed)
    entries = rng.standard_normal((band,) * d)
    return GeneratingTensor(d=d, band=band, entries=entries, h=1.0, kernel=None)


def test_smooth_fft_length_values():
    table = {1: 1, 2: 2, 6: 6, 7: 8, 11: 12, 13: 15, 97: 100, 121: 125, 129: 135, 2048: 2048}
    for n, expect in table.items():
        assert smooth_fft_length(n) == expect


def test_smooth_fft_length_minimal():
    def smooth(m):
        for p in (2, 3, 5):
            while m % p == 0:
                m //= p
        return m == 1

    for n in range(1, 300):
        got = smooth_fft_length(n)
        assert got >= n and smooth(got)
        assert not any(smooth(m) for m in range(n, got))


def test_matvec_matches_dense_2d():
    G = _random_tensor(2, 3, seed=1)
    op = build_operator(G, (8, 8))
    S = materialize_dense(G, (8, 8))
    S_ref = dense_from_tensor(G.entries, (8, 8))
    assert np.max(np.abs(S - S_ref)) == 0.0
    rng = np.random.default_rng(2)
    for _ in range(5):
        v = rng.standard_normal(64)
        got = op.matvec(v)
        want = S @ v
        assert np.max(np.abs(got - want)) <= 1e-12 * np.max(np.abs(want))


def test_matvec_matches_dense_3d():
    G = _random_tensor(3, 2, seed=3)
    op = build_operator(G, (4, 4, 4))
    S = materialize_dense(G, (4, 4, 4))
    rng = np.random.default_rng(4)
    v = rng.standard_normal(64)
    assert np.max(np.abs(op.matvec(v) - S @ v)) <= 1e-12 * np.max(np.abs(S @ v))


def test_bilinear_symmetry():
    rng = np.random.default_rng(5)
    for d, N in ((2, (8, 8)), (3, (4, 4, 4))):
        op = build_operator(_random_tensor(d, 2, seed=d), N)
        u = rng.standard_normal(int(np.prod(N)))
        v = rng.standard_normal(int(np.prod(N)))
        Au = op.matvec(u)
        Av = op.matvec(v)
        assert abs(v @ Au - u @ Av) <= 1e-12 * max(abs(v @ Au), 1.0)


def test_assembled_operator_positive_definite():
    kern = make_kernel(2, 0.5, 0.26)
    G = assemble_generating_tensor(2, 8, 0.1, kern)
    S = materialize_dense(G, (8, 8))
    assert np.max(np.abs(S - S.T)) == 0.0
    assert np.linalg.eigvalsh(S).min() > 0.0


def test_rectangular_grid_and_layouts():
    G = _random_tensor(2, 3, seed=6)
    op = build_operator(G, (6, 9))
    S = materialize_dense(G, (6, 9))
    rng = np.random.default_rng(7)
    v = rng.standard_normal((6, 9))
    grid_out = op.matvec(v)
    assert grid_out.shape == (6, 9)
    assert grid_out.dtype == np.float64
    flat_out = op.matvec(v.ravel())
    assert flat_out.shape == (54,)
    assert np.array_equal(flat_out, grid_out.ravel())
    assert np.max(np.abs(flat_out - S @ v.ravel())) < 1e-12


def test_operator_validation():
    G = _random_tensor(2, 3)
    with pytest.raises(ValueError):
        ToeplitzOperator(G, (8,))  # dimension mismatch
    with pytest.raises(ValueError):
        ToeplitzOperator(G, (8, 0))
    # a kernel-carrying tensor must cover the full interaction band
    kern = make_kernel(2, 0.5, 0.5)
    G_small = assemble_generating_tensor(2, 3, 0.1, kern)  # band capped at 3 < 8
    with pytest.raises(ValueError):
        ToeplitzOperator(G_small, (12, 12))
    with pytest.raises(ValueError):
        op = build_operator(G, (8, 8))
        op.matvec(np.zeros(63))


def test_matvec_counters():
    op = build_operator(_random_tensor(2, 2), (5, 5))
    assert op.matvec_count == 0
    op.matvec(np.zeros(25))
    op.matvec(np.zeros(25))
    assert op.matvec_count == 2
    assert op.matvec_seconds >= 0.0


def test_materialize_dense_guard():
    G = _random_tensor(2, 2)
    with pytest.raises(ValueError):
        materialize_dense(G, (80, 80))


@settings(max_examples=25, deadline=None)
@given(
    n1=st.integers(min_value=1, max_value=9),
    n2=st.integers(min_value=1, max_value=9),
    band=st.integers(min_value=1, max_value=4),
    seed=st.integers(min_value=0, max_value=2**16),
)
def test_matvec_random_shapes(n1, n2, band, seed):
    G = _random_tensor(2, band, seed=seed)
    op = build_operator(G, (n1, n2))
    S = materialize_dense(G, (n1, n2))
    rng = np.random.default_rng(seed + 1)
    v = rng.standard_normal(n1 * n2)
    want = S @ v
    assert np.max(np.abs(op.matvec(v) - want)) <= 1e-11 * max(1.0, np.max(np.abs(want)))
