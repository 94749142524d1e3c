import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmwave_dl.tensor import (
    khatri_rao,
    kron,
    mode_product,
    multi_mode_product,
    normalize_columns,
    pinv,
    refold,
    row_block_soft_threshold,
    unfold,
    unvec,
    vec,
    vec_identity_holds,
)

from conftest import crandn, rel_err

dims = st.integers(1, 5)


@settings(max_examples=40, deadline=None)
@given(dims, dims, dims, dims, st.integers(0, 2**31 - 1))
def test_vec_kron_identity(m, n, p, q, seed):
    rng = np.random.default_rng(seed)
    A, B, C = crandn(rng, m, n), crandn(rng, n, p), crandn(rng, p, q)
    assert vec_identity_holds(A, B, C, rtol=1e-11)


@settings(max_examples=40, deadline=None)
@given(dims, dims, dims, st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_unfold_refold_roundtrip(a, b, c, mode, seed):
    t = crandn(np.random.default_rng(seed), a, b, c)
    assert np.array_equal(refold(unfold(t, mode), mode, t.shape), t)


def test_unfold_columns_are_fibers():
    t = np.arange(24).reshape(2, 3, 4)
    # column (j, k) of the mode-1 unfolding is the fiber t[:, j, k], j fastest
    U1 = unfold(t, 1)
    assert np.array_equal(U1[:, 0], t[:, 0, 0])
    assert np.array_equal(U1[:, 1], t[:, 1, 0])
    assert np.array_equal(U1[:, 3], t[:, 0, 1])
    # mode-3 row c is vec of the c-th frontal slice
    U3 = unfold(t, 3)
    for c in range(4):
        assert np.array_equal(U3[c], t[:, :, c].reshape(-1, order="F"))


@settings(max_examples=30, deadline=None)
@given(dims, dims, dims, dims, st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_mode_product_matches_unfolding(a, b, c, r, mode, seed):
    rng = np.random.default_rng(seed)
    t = crandn(rng, a, b, c)
    M = crandn(rng, r, t.shape[mode - 1])
    out = mode_product(t, M, mode)
    assert rel_err(unfold(out, mode), M @ unfold(t, mode)) < 1e-12


def test_mode3_unfolding_kron_identity(rng):
    # [H x1 A x2 B]_(3)^T = kron(B, A) [H]_(3)^T
    H = crandn(rng, 3, 4, 5)
    A, B = crandn(rng, 6, 3), crandn(rng, 2, 4)
    lhs = unfold(multi_mode_product(H, [A, B, None]), 3).T
    assert rel_err(lhs, kron(B, A) @ unfold(H, 3).T) < 1e-12


def test_mode_products_commute_across_modes(rng):
    t = crandn(rng, 3, 4, 2)
    A, B = crandn(rng, 5, 3), crandn(rng, 2, 4)
    ab = mode_product(mode_product(t, A, 1), B, 2)
    ba = mode_product(mode_product(t, B, 2), A, 1)
    assert rel_err(ab, ba) < 1e-13


def test_khatri_rao_columns(rng):
    A, B = crandn(rng, 3, 4), crandn(rng, 2, 4)
    KR = khatri_rao(A, B)
    for j in range(4):
        assert np.allclose(KR[:, j], np.kron(A[:, j], B[:, j]))
    with pytest.raises(ValueError):
        khatri_rao(A, crandn(rng, 2, 3))


def test_khatri_rao_vec_of_diag_product(rng):
    # vec(R diag(g) T^T) = (T kr R) g
    R, T, g = crandn(rng, 3, 4), crandn(rng, 5, 4), crandn(rng, 4)
    lhs = vec(R @ np.diag(g) @ T.T)[:, 0]
    assert rel_err(lhs, khatri_rao(T, R) @ g) < 1e-13


def test_unvec_inverts_vec(rng):
    A = crandn(rng, 3, 5)
    assert np.array_equal(unvec(vec(A), 3, 5), A)
    with pytest.raises(ValueError):
        unvec(vec(A), 4, 4)


def test_bad_mode_and_shapes():
    t = np.zeros((2, 3, 4))
    with pytest.raises(ValueError):
        unfold(t, 4)
    with pytest.raises(ValueError):
        unfold(np.zeros((2, 2)), 1)
    with pytest.raises(ValueError):
        mode_product(t, np.zeros((2, 5)), 2)
    with pytest.raises(ValueError):
        refold(np.zeros((3, 7)), 2, (2, 3, 4))


def test_pinv_against_numpy(rng):
    A = crandn(rng, 6, 4)
    assert rel_err(pinv(A), np.linalg.pinv(A)) < 1e-12
    # rank-deficient: pinv(A) A is the projector onto the row space
    B = crandn(rng, 6, 2) @ crandn(rng, 2, 4)
    P = pinv(B) @ B
    assert rel_err(P @ P, P) < 1e-10
    assert np.linalg.matrix_rank(P) == 2
    assert np.all(pinv(np.zeros((3, 2))) == 0)


@settings(max_examples=40, deadline=None)
@given(dims, dims, st.floats(0, 3), st.integers(0, 2**31 - 1))
def test_row_soft_threshold_is_prox(rows, cols, kappa, seed):
    rng = np.random.default_rng(seed)
    V = crandn(rng, rows, cols)
    X = row_block_soft_threshold(V, kappa)
    norms_v = np.linalg.norm(V, axis=1)
    norms_x = np.linalg.norm(X, axis=1)
    assert np.allclose(norms_x, np.maximum(norms_v - kappa, 0), atol=1e-12)
    # directions preserved
    keep = norms_x > 1e-12
    assert np.allclose(X[keep] / norms_x[keep, None], V[keep] / norms_v[keep, None])
    # prox optimality: the objective at X is not above nearby perturbations
    f = lambda Z: 0.5 * np.linalg.norm(Z - V) ** 2 + kappa * np.linalg.norm(Z, axis=1).sum()
    for _ in range(5):
        assert f(X) <= f(X + 1e-3 * crandn(rng, rows, cols)) + 1e-12


def test_soft_threshold_rejects_negative():
    with pytest.raises(ValueError):
        row_block_soft_threshold(np.ones((2, 2)), -1.0)


def test_normalize_columns(rng):
    A = crandn(rng, 4, 3)
    A[:, 1] = 0
    An, n = normalize_columns(A)
    assert np.allclose(np.linalg.norm(An[:, [0, 2]], axis=0), 1.0)
    assert np.all(An[:, 1] == 0) and n[1] == 0
    assert np.allclose(An * n, A)


def test_kron_size_guard():
    with pytest.raises(ValueError):
        kron(np.ones((10**4, 10**2)), np.ones((10**3, 10**2)))
