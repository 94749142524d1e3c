"""Joint-sparse recovery: OMP, simultaneous OMP and ADMM for the l2/l1 problem."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .dictionary import Dictionary
from .measurement import MeasurementDataset
from .tensor import row_block_soft_threshold

__all__ = [
    "SparseCodeResult",
    "EstimateResult",
    "omp",
    "swomp",
    "admm_l21",
    "l21_norm",
    "estimate_channel",
]

SUPPORT_RTOL = 1e-8


@dataclass
class SparseCodeResult:
    coefficients: np.ndarray
    support: np.ndarray
    residual_trace: list = field(default_factory=list)
    objective_trace: list = field(default_factory=list)
    lagrangian_trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = True


def l21_norm(h, group_size: int | None = None) -> float:
    """Sum of row norms, taken separately over consecutive column groups."""
    h = np.atleast_2d(h)
    g = h.shape[1] if group_size is None else group_size
    blocks = h.reshape(h.shape[0], -1, g)
    return float(np.linalg.norm(blocks, axis=2).sum())


def _as_columns(y) -> np.ndarray:
    y = np.asarray(y, dtype=complex)
    return y[:, None] if y.ndim == 1 else y


def _greedy(Y, A, k_max, tol):
    m, K = A.shape
    if k_max > m:
        raise ValueError(f"k_max={k_max} exceeds the number of measurements {m}")
    if m == 0:
        raise ValueError("empty measurement matrix")
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms == 0):
        raise ValueError("measurement matrix has zero columns")
    support: list[int] = []
    coef = np.zeros((0, Y.shape[1]), dtype=complex)
    R = Y.copy()
    trace = [float(np.linalg.norm(R))]
    while len(support) < k_max and trace[-1] > tol:
        score = np.abs(A.conj().T @ R).sum(axis=1) / norms
        score[support] = -1.0
        k = int(np.argmax(score))
        if score[k] <= 1e-14 * max(trace[-1], 1.0):
            break
        support.append(k)
        coef = np.linalg.lstsq(A[:, support], Y, rcond=None)[0]
        R = Y - A[:, support] @ coef
        trace.append(float(np.linalg.norm(R)))
    H = np.zeros((K, Y.shape[1]), dtype=complex)
    if support:
        H[support] = coef
    return SparseCodeResult(H, np.array(sorted(support), dtype=int), trace, [t**2 for t in trace], [], len(support))


def omp(y, A, k_max: int, tol: float = 0.0) -> SparseCodeResult:
    """Orthogonal matching pursuit on a single measurement vector."""
    y = _as_columns(y)
    if y.shape[1] != 1:
        raise ValueError("omp expects a single column; use swomp for several")
    return _greedy(y, np.asarray(A, dtype=complex), k_max, tol)


def swomp(Y, A, k_max: int, tol: float = 0.0) -> SparseCodeResult:
    """Simultaneous OMP: one support shared by all columns of ``Y``.

    The candidate score is ``sum_c |<a_k, r_c>| / ||a_k||``; stops at ``k_max``
    atoms or when the residual Frobenius norm drops to ``tol``.
    """
    return _greedy(_as_columns(Y), np.asarray(A, dtype=complex), k_max, tol)


def admm_l21(
    X,
    A,
    w1: float,
    rho: float = 1.0,
    max_iter: int = 500,
    tol: float = 1e-6,
    group_size: int | None = None,
    H0=None,
    solver=None,
) -> SparseCodeResult:
    """ADMM for ``min ||X - A H||_F^2 + w1 * sum_groups ||H_group||_{2,1}``.

    Columns are split into consecutive groups of ``group_size`` (default: all
    columns); each group has its own row-sparsity pattern.  Stopping uses
    relative primal/dual residuals: ``||H - Z|| <= tol * max(1, ||Z||)`` and
    ``rho ||Z - Z_prev|| <= tol * max(1, rho ||U||)``.

    ``solver`` may replace the linear solve ``(2 A^* A + rho I)^-1 B``.
    """
    if w1 < 0:
        raise ValueError("w1 must be nonnegative")
    if rho <= 0:
        raise ValueError("rho must be positive")
    X = _as_columns(X)
    A = np.asarray(A, dtype=complex)
    K, C = A.shape[1], X.shape[1]
    g = C if group_size is None else group_size
    if C % g:
        raise ValueError(f"{C} columns do not split into groups of {g}")
    if solver is None:
        factor = cho_factor(2 * (A.conj().T @ A) + rho * np.eye(K))
        solver = lambda B: cho_solve(factor, B)  # noqa: E731
    AtX2 = 2 * (A.conj().T @ X)
    Z = np.zeros((K, C), dtype=complex) if H0 is None else np.array(H0, dtype=complex)
    U = np.zeros_like(Z)
    kappa = w1 / rho

    def prox(V):
        return row_block_soft_threshold(V.reshape(K, -1, g), kappa).reshape(K, C)

    def objective(H):
        return float(np.linalg.norm(X - A @ H) ** 2 + w1 * l21_norm(H, g))

    obj, lag = [objective(Z)], []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        H = solver(AtX2 + rho * (Z - U))
        Z_prev = Z
        Z = prox(H + U)
        U = U + H - Z
        obj.append(objective(Z))
        lag.append(
            float(
                np.linalg.norm(X - A @ H) ** 2
                + w1 * l21_norm(Z, g)
                + rho / 2 * np.linalg.norm(H - Z + U) ** 2
                - rho / 2 * np.linalg.norm(U) ** 2
            )
        )
        r_primal = np.linalg.norm(H - Z)
        r_dual = rho * np.linalg.norm(Z - Z_prev)
        if r_primal <= tol * max(1.0, np.linalg.norm(Z)) and r_dual <= tol * max(1.0, rho * np.linalg.norm(U)):
            converged = True
            break
    row_norms = np.linalg.norm(Z, axis=1)
    support = np.flatnonzero(row_norms > SUPPORT_RTOL * row_norms.max()) if row_norms.max() > 0 else np.array([], int)
    res = [float(np.linalg.norm(X - A @ Z))]
    return SparseCodeResult(Z, support, res, obj, lag, it, converged)


@dataclass
class EstimateResult:
    H: np.ndarray  # (N_c, N_r, N_t)
    codes: SparseCodeResult
    n_atoms: int


def estimate_channel(
    dataset: MeasurementDataset,
    dictionary: Dictionary,
    solver: str = "swomp",
    location: int = 0,
    k_max: int | None = None,
    tol: float | None = None,
    w1: float | None = None,
    **admm_kw,
) -> EstimateResult:
    """Sparse-coding channel estimate ``H[c] = unvec(Psi h[c])`` for one location.

    Measurements are whitened first.  Greedy solvers stop when the mean
    residual power per measurement reaches the noise variance (or at
    ``k_max``); ADMM uses ``w1`` (default ``sigma2_eff * sqrt(rows)``).
    """
    n_c = dataset.n_subcarriers
    ch = dataset.channels[location] if dataset.channels else None
    Phi_w, Ys = dataset.whitened()
    Y = Ys[location]
    if Phi_w.shape[0] == 0:
        raise ValueError("no measurements")
    Psi = dictionary.matrix
    if Psi.shape[0] != Phi_w.shape[1]:
        raise ValueError(f"dictionary rows {Psi.shape[0]} != sensing columns {Phi_w.shape[1]}")
    A = Phi_w @ Psi
    m = A.shape[0]
    s2 = dataset.sigma2_eff
    if solver in ("omp", "swomp"):
        k = k_max if k_max is not None else m
        t = np.sqrt(s2 * m * n_c) if tol is None else tol
        if solver == "swomp":
            res = swomp(Y, A, k, t)
        else:
            cols = [omp(Y[:, c], A, k, t / np.sqrt(n_c)) for c in range(n_c)]
            H = np.hstack([r.coefficients for r in cols])
            sup = np.unique(np.concatenate([r.support for r in cols]))
            res = SparseCodeResult(H, sup, iterations=max(r.iterations for r in cols))
    elif solver == "admm":
        lam = s2 * np.sqrt(m) if w1 is None else w1
        res = admm_l21(Y, A, lam, **admm_kw)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    vecH = Psi @ res.coefficients
    n_r = ch.freq.shape[1] if ch is not None else dataset.frames.W.shape[1]
    n_t = vecH.shape[0] // n_r
    H = vecH.T.reshape(n_c, n_t, n_r).transpose(0, 2, 1)
    return EstimateResult(H, res, Psi.shape[1])
