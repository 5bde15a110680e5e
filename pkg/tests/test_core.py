import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from blockopt.core import (
    INSTANCE_KINDS,
    BlockPair,
    LinOp,
    as_vec,
    block_norm,
    make_rng,
    op_norm_estimate,
    random_instance,
    smallest_singular_value,
)
from blockopt.errors import DimensionError, ParameterError

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def vecs(n):
    return arrays(np.float64, n, elements=finite)


def test_block_norm_of_zero_pair():
    assert block_norm(BlockPair([0.0, 0.0], [0.0])) == 0.0


def test_block_norm_three_four_five():
    assert block_norm(BlockPair([3.0], [4.0])) == 5.0


def test_block_norm_matches_compensated_sum():
    rng = np.random.default_rng(3)
    for _ in range(50):
        x, y = rng.standard_normal(7), rng.standard_normal(4)
        expected = math.sqrt(math.fsum([v * v for v in x] + [v * v for v in y]))
        assert block_norm(BlockPair(x, y)) == pytest.approx(expected, rel=1e-15)


@settings(max_examples=200)
@given(vecs(3), vecs(2), vecs(3), vecs(2), st.one_of(st.just(0.0), st.floats(1e-100, 1e3), st.floats(-1e3, -1e-100)))
def test_block_norm_triangle_and_homogeneity(x1, y1, x2, y2, a):
    z1, z2 = BlockPair(x1, y1), BlockPair(x2, y2)
    lhs = block_norm(z1 + z2)
    assert lhs <= (block_norm(z1) + block_norm(z2)) * (1 + 1e-12) + 1e-300
    assert block_norm(z1 * a) == pytest.approx(abs(a) * block_norm(z1), rel=1e-12, abs=1e-300)


def test_block_pair_arithmetic_is_blockwise():
    z = BlockPair([1.0, 2.0], [3.0])
    w = BlockPair([0.5, -1.0], [2.0])
    np.testing.assert_array_equal((z - w).x, [0.5, 3.0])
    np.testing.assert_array_equal((z + w).y, [5.0])
    np.testing.assert_array_equal((z * 2).x, [2.0, 4.0])


def test_block_pair_rejects_mismatched_blocks():
    with pytest.raises(DimensionError):
        BlockPair([1.0], [1.0]) + BlockPair([1.0, 2.0], [1.0])


def test_vectors_reject_non_finite_and_are_read_only():
    with pytest.raises(ValueError):
        as_vec([1.0, np.nan])
    with pytest.raises(ValueError):
        as_vec([np.inf])
    v = as_vec([1.0, 2.0])
    with pytest.raises(ValueError):
        v[0] = 3.0


def test_op_norm_of_identity():
    assert op_norm_estimate(LinOp.identity(3), 10, make_rng(0)) == pytest.approx(1.0, abs=1e-10)


def test_op_norm_of_diagonal():
    A = LinOp(np.diag([1.0, 2.0, 5.0]))
    assert op_norm_estimate(A, 100, make_rng(0)) == pytest.approx(5.0, abs=1e-8)


def test_op_norm_matches_dense_svd():
    rng = np.random.default_rng(8)
    for _ in range(10):
        M = rng.uniform(-1, 1, (10, 10))
        sigma = np.linalg.svd(M, compute_uv=False)[0]
        assert op_norm_estimate(LinOp(M), 2000, make_rng(1)) == pytest.approx(sigma, rel=1e-6)


def test_op_norm_of_zero_matrix_is_zero():
    assert op_norm_estimate(LinOp(np.zeros((3, 4))), 5, make_rng(0)) == 0.0


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4, 3), elements=st.floats(-10, 10)), st.integers(0, 2**32 - 1))
def test_op_norm_monotone_in_iters_and_below_frobenius(M, seed):
    est = [op_norm_estimate(LinOp(M), k, make_rng(seed)) for k in (1, 2, 5, 20)]
    assert all(a <= b for a, b in zip(est, est[1:]))
    assert est[-1] <= np.linalg.norm(M) * (1 + 1e-12)


def test_op_norm_rejects_zero_iterations():
    with pytest.raises(ParameterError):
        op_norm_estimate(LinOp.identity(2), 0, make_rng(0))


def test_adjoint_consistency_on_random_pairs():
    rng = np.random.default_rng(2)
    A = LinOp(rng.uniform(-1, 1, (6, 9)))
    for _ in range(100):
        v, w = rng.standard_normal(9), rng.standard_normal(6)
        lhs, rhs = np.dot(A.apply(v), w), np.dot(v, A.adjoint_apply(w))
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_linop_rejects_wrong_dimensions():
    A = LinOp(np.ones((2, 3)))
    with pytest.raises(DimensionError):
        A.apply(np.ones(2))
    with pytest.raises(DimensionError):
        A.adjoint_apply(np.ones(3))


def test_linop_from_rows_is_row_major():
    A = LinOp.from_rows(2, 3, [1, 2, 3, 4, 5, 6])
    np.testing.assert_array_equal(A.apply(np.array([1.0, 0, 0])), [1.0, 4.0])


def test_smallest_singular_value():
    assert smallest_singular_value(np.eye(3) * 2) == pytest.approx(2.0)
    assert smallest_singular_value(np.ones((2, 3))) == 0.0


def test_random_instance_is_deterministic():
    a = random_instance("lasso-bcd", (5, 6, 7), 42)
    b = random_instance("lasso-bcd", (5, 6, 7), 42)
    for k in a:
        assert np.array_equal(a[k], b[k])
        assert np.asarray(a[k]).tobytes() == np.asarray(b[k]).tobytes()


@pytest.mark.parametrize("kind", INSTANCE_KINDS)
def test_random_matrices_lie_in_unit_box(kind):
    d = random_instance(kind, (6, 5, 4), 1)
    for k in ("A", "B", "A1", "A2"):
        if k in d:
            assert np.all(np.abs(d[k]) <= 1.0)


def test_lasso_instance_has_positive_weight():
    d = random_instance("lasso", (8, 8, 5), 0)
    assert d["lam"] > 0 and d["A"].shape == (5, 8)


def test_feasible_admm_instance_residual():
    d = random_instance("feasible-admm", (6, 4, 5), 9)
    r = d["A1"] @ d["x1"] + d["A2"] @ d["x2"] - d["b"]
    assert np.linalg.norm(r) <= 1e-12


def test_unknown_instance_kind():
    with pytest.raises(ParameterError, match="unsupported instance kind"):
        random_instance("banana", (1, 1, 1), 0)


def test_rng_streams_split_reproducibly():
    a = make_rng(5).spawn(2)[1].standard_normal(4)
    b = make_rng(5).spawn(2)[1].standard_normal(4)
    assert np.array_equal(a, b)
