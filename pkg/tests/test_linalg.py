"""Matrix/vector primitives and the Subspace representation."""

import numpy as np
import pytest

from l1sq.errors import RankDeficient, ShapeMismatch, ZeroVector
from l1sq.linalg import Subspace, as_matrix, as_vector, l1_norm, matvec, orthonormalize


def gram_schmidt_projector(raw):
    """Independent oracle: orthogonal projector onto col(raw).

    Modified Gram-Schmidt with re-orthogonalization, written without any
    library factorization so it cannot share a bug with orthonormalize.
    """
    raw = np.asarray(raw, dtype=float)
    cols = []
    for j in range(raw.shape[1]):
        v = raw[:, j].copy()
        for _ in range(2):  # second pass mops up rounding
            for u in cols:
                v = v - (u @ v) * u
        norm = np.sqrt((v * v).sum())
        assert norm > 1e-10, "oracle given rank-deficient input"
        cols.append(v / norm)
    b = np.column_stack(cols)
    return b @ b.T


def naive_matvec(a, x):
    """Triple-loop product, no numpy dot."""
    m, n = a.shape
    out = [0.0] * m
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += a[i, j] * x[j]
        out[i] = s
    return np.array(out)


# ---------------------------------------------------------------------------
# orthonormalize


def test_orthonormalize_matches_gram_schmidt_projector():
    rng = np.random.default_rng(11)
    for trial in range(10):
        raw = rng.standard_normal((10, 3))
        sub = orthonormalize(raw)
        proj = sub.basis @ sub.basis.T
        oracle = gram_schmidt_projector(raw)
        gap = np.abs(proj - oracle).max()
        assert gap < 1e-8, f"trial {trial}: projector gap {gap:.3e}"


def test_orthonormalize_idempotent_on_orthonormal_input():
    rng = np.random.default_rng(3)
    sub = orthonormalize(rng.standard_normal((8, 3)))
    again = orthonormalize(sub.basis)
    gram = again.basis.T @ again.basis
    assert np.abs(gram - np.eye(3)).max() < 1e-10
    # same span: original columns project onto the new basis exactly
    resid = sub.basis - again.basis @ (again.basis.T @ sub.basis)
    assert np.abs(resid).max() < 1e-8


def test_orthonormalize_removes_scaling():
    sub = orthonormalize(np.array([[2.0], [0.0]]))
    assert sub.basis.shape == (2, 1)
    assert abs(abs(sub.basis[0, 0]) - 1.0) < 1e-12
    assert abs(sub.basis[1, 0]) < 1e-12


def test_orthonormalize_preserves_span():
    rng = np.random.default_rng(19)
    raw = rng.standard_normal((30, 4))
    sub = orthonormalize(raw)
    for _ in range(20):
        x = raw @ rng.standard_normal(4)
        resid = x - sub.basis @ (sub.basis.T @ x)
        norm = np.sqrt((x * x).sum())
        assert np.sqrt((resid * resid).sum()) < 1e-8 * max(norm, 1.0)


def test_orthonormalize_rejects_rank_deficient():
    col = np.arange(6.0).reshape(6, 1)
    raw = np.hstack([col, 2 * col])
    with pytest.raises(RankDeficient):
        orthonormalize(raw)


def test_subspace_rejects_non_orthonormal_basis():
    with pytest.raises(ValueError):
        Subspace(basis=np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_subspace_exposes_dims():
    sub = orthonormalize(np.random.default_rng(0).standard_normal((7, 2)))
    assert sub.ambient_dim == 7 and sub.rank == 2


# ---------------------------------------------------------------------------
# l1_norm


def test_l1_norm_direct_sum():
    assert l1_norm([1.0, -2.0, 3.0]) == 6.0


def test_l1_norm_zero_vector():
    assert l1_norm(np.zeros(5)) == 0.0


def test_l1_norm_homogeneity():
    rng = np.random.default_rng(4)
    for _ in range(20):
        x = rng.standard_normal(9)
        c = rng.uniform(-10, 10)
        assert abs(l1_norm(c * x) - abs(c) * l1_norm(x)) < 1e-10 * max(1, l1_norm(x))


def test_l1_norm_triangle_inequality():
    rng = np.random.default_rng(5)
    for _ in range(50):
        x, y = rng.standard_normal((2, 12))
        assert l1_norm(x + y) <= l1_norm(x) + l1_norm(y) + 1e-12


# ---------------------------------------------------------------------------
# matvec


def test_matvec_identity():
    x = np.array([3.0, -1.0, 2.0])
    assert np.array_equal(matvec(np.eye(3), x), x)


def test_matvec_zero_vector():
    a = np.random.default_rng(6).standard_normal((4, 3))
    assert np.array_equal(matvec(a, np.zeros(3)), np.zeros(4))


def test_matvec_against_naive_loop():
    rng = np.random.default_rng(7)
    a = rng.standard_normal((4, 3))
    x = rng.standard_normal(3)
    assert np.abs(matvec(a, x) - naive_matvec(a, x)).max() < 1e-12


def test_matvec_linearity():
    rng = np.random.default_rng(8)
    a = rng.standard_normal((6, 4))
    x, y = rng.standard_normal((2, 4))
    al, be = 2.5, -1.25
    lhs = matvec(a, al * x + be * y)
    rhs = al * matvec(a, x) + be * matvec(a, y)
    scale = max(1.0, np.abs(rhs).max())
    assert np.abs(lhs - rhs).max() < 1e-10 * scale


def test_matvec_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        matvec(np.eye(3), np.ones(4))


# ---------------------------------------------------------------------------
# validation helpers


def test_as_matrix_rejects_non_finite():
    with pytest.raises(ValueError):
        as_matrix(np.array([[1.0, np.nan]]))
    with pytest.raises(ValueError):
        as_matrix(np.array([[np.inf, 0.0]]))


def test_as_vector_rejects_matrix_and_empty():
    with pytest.raises(ValueError):
        as_vector(np.ones((2, 2)))
    with pytest.raises(ValueError):
        as_vector(np.array([]))


def test_l1_norm_rejects_zero_length():
    with pytest.raises(ValueError):
        l1_norm(np.array([]))


def test_zero_vector_error_is_value_error():
    assert issubclass(ZeroVector, ValueError)
