"""Dense complex linear and multilinear algebra kernels.

Conventions used throughout the package:

* ``vec`` stacks columns (column-major), so ``vec(A @ B @ C) == kron(C.T, A) @ vec(B)``.
* Third-order tensors are numpy arrays of shape ``(d1, d2, d3)``.  The mode-q
  unfolding puts index q on the rows and orders the remaining indices in
  reverse cyclical order, i.e. the lowest remaining index varies fastest along
  the columns.  With this layout ``[A x1 B1 x2 B2 x3 B3]_(1) = B1 [A]_(1) (B3 kron B2)^T``
  and ``[A]_(3)^T`` has ``vec`` of frontal slice ``c`` as its column ``c``.

Every other module reshapes through these helpers so the layouts stay in sync.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "kron",
    "khatri_rao",
    "vec",
    "unvec",
    "vec_identity_holds",
    "unfold",
    "refold",
    "mode_product",
    "multi_mode_product",
    "pinv",
    "row_block_soft_threshold",
    "normalize_columns",
]

_MAX_ENTRIES = 2**31


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got array with ndim={a.ndim}")
    return a


def kron(a, b) -> np.ndarray:
    """Kronecker product with a guard against absurd output sizes."""
    a = _as_matrix(a)
    b = _as_matrix(b)
    rows = a.shape[0] * b.shape[0]
    cols = a.shape[1] * b.shape[1]
    if rows * cols > _MAX_ENTRIES:
        raise ValueError(f"kron result of shape ({rows}, {cols}) is too large")
    return np.kron(a, b)


def khatri_rao(a, b) -> np.ndarray:
    """Column-wise Kronecker product: column j is ``kron(a[:, j], b[:, j])``."""
    a = _as_matrix(a)
    b = _as_matrix(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(
            f"khatri_rao needs equal column counts, got {a.shape[1]} and {b.shape[1]}"
        )
    return (a[:, None, :] * b[None, :, :]).reshape(a.shape[0] * b.shape[0], a.shape[1])


def vec(a) -> np.ndarray:
    """Column-major vectorization returned as an ``(rows*cols, 1)`` column."""
    a = _as_matrix(a)
    return a.reshape(-1, 1, order="F")


def unvec(v, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    v = np.asarray(v)
    if v.size != rows * cols:
        raise ValueError(f"cannot unvec {v.size} entries into ({rows}, {cols})")
    return v.reshape(rows, cols, order="F")


def vec_identity_holds(a, b, c, rtol: float = 1e-12) -> bool:
    """Check ``vec(a @ b @ c) == kron(c.T, a) @ vec(b)`` numerically."""
    lhs = vec(a @ b @ c)
    rhs = kron(np.transpose(c), a) @ vec(b)
    scale = max(np.linalg.norm(lhs), np.finfo(float).tiny)
    return bool(np.linalg.norm(lhs - rhs) <= rtol * scale)


def _check_mode(mode: int) -> int:
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be 1, 2 or 3, got {mode!r}")
    return mode - 1


def unfold(t, mode: int) -> np.ndarray:
    """Mode-``mode`` unfolding (1-based mode) of a third-order tensor."""
    t = np.asarray(t)
    if t.ndim != 3:
        raise ValueError(f"expected a third-order tensor, got ndim={t.ndim}")
    q = _check_mode(mode)
    return np.moveaxis(t, q, 0).reshape(t.shape[q], -1, order="F")


def refold(m, mode: int, dims) -> np.ndarray:
    """Inverse of :func:`unfold` for a tensor of shape ``dims``."""
    q = _check_mode(mode)
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3:
        raise ValueError("dims must have length 3")
    m = np.asarray(m)
    moved = (dims[q],) + tuple(d for i, d in enumerate(dims) if i != q)
    if m.shape != (moved[0], moved[1] * moved[2]):
        raise ValueError(f"matrix of shape {m.shape} does not unfold dims {dims} in mode {mode}")
    return np.moveaxis(m.reshape(moved, order="F"), 0, q)


def mode_product(t, m, mode: int) -> np.ndarray:
    """Mode-q product ``t x_q m`` defined by ``[t x_q m]_(q) = m @ [t]_(q)``."""
    t = np.asarray(t)
    m = _as_matrix(m)
    q = _check_mode(mode)
    if m.shape[1] != t.shape[q]:
        raise ValueError(
            f"mode-{mode} product needs {t.shape[q]} matrix columns, got {m.shape[1]}"
        )
    out = np.tensordot(m, t, axes=(1, q))
    return np.moveaxis(out, 0, q)


def multi_mode_product(t, matrices) -> np.ndarray:
    """Apply ``t x1 B1 x2 B2 x3 B3``; ``None`` entries are skipped."""
    out = np.asarray(t)
    for q, m in enumerate(matrices, start=1):
        if m is not None:
            out = mode_product(out, m, q)
    return out


def pinv(a, tol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via SVD.

    Singular values below ``tol * sigma_max`` are discarded.  The default
    relative threshold is ``1e-12 * max(rows, cols)``.
    """
    a = _as_matrix(a)
    rows, cols = a.shape
    if a.size == 0:
        return np.zeros((cols, rows), dtype=a.dtype)
    if tol is None:
        tol = 1e-12 * max(rows, cols)
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((cols, rows), dtype=np.result_type(a.dtype, np.float64))
    keep = s > tol * s[0]
    inv_s = np.zeros_like(s)
    inv_s[keep] = 1.0 / s[keep]
    return (vh.conj().T * inv_s) @ u.conj().T


def row_block_soft_threshold(h, kappa: float) -> np.ndarray:
    """Scale every row ``r`` of ``h`` by ``max(0, 1 - kappa / ||r||_2)``.

    This is the proximal operator of ``kappa * ||h||_{2,1}``.
    """
    if kappa < 0:
        raise ValueError(f"kappa must be nonnegative, got {kappa}")
    h = np.asarray(h)
    norms = np.linalg.norm(h, axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norms > 0, 1.0 - kappa / np.where(norms > 0, norms, 1.0), 0.0)
    return h * np.maximum(scale, 0.0)


def normalize_columns(a, eps: float = 0.0):
    """Return ``(a / norms, norms)`` with zero columns left untouched."""
    a = _as_matrix(a)
    norms = np.linalg.norm(a, axis=0)
    safe = np.where(norms > eps, norms, 1.0)
    return a / safe, norms
