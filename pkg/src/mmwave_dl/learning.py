"""Combined (CoDL) and separable (SeDL) dictionary learning.

Both learners alternate three stages (sparse coding, dictionary update,
denoising) on the objective

    ||X - model(D, H)||_F^2 + w1 * sum_u ||H^(u)||_{2,1} + w2 * ||Y - X||_F^2

where ``u`` runs over user locations.  Every stage is only accepted if it
does not increase the objective, so the recorded trace is monotone.
"""

from __future__ import annotations

import logging
import math
import re
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .dictionary import Dictionary
from .measurement import MeasurementDataset
from .sparse import admm_l21, swomp
from .tensor import kron, mode_product, normalize_columns, pinv, refold, unfold

log = logging.getLogger(__name__)

__all__ = [
    "LearnConfig",
    "LearnState",
    "dia_init",
    "mean_coherence",
    "codl_mod_update",
    "codl_ksvd_update",
    "denoise_update",
    "codl",
    "sedl_sparse_code",
    "sedl_mod_update",
    "sedl",
    "complexity_report",
]


@dataclass(frozen=True)
class LearnConfig:
    w1: float = 0.1
    w2: float = 0.001
    max_iter: int = 50
    rel_tol: float = 1e-4
    coder: str = "admm"  # admm | swomp
    sparsity: int = 3  # k_max for the swomp coder
    updater: str = "mod"  # mod | ksvd (CoDL); mod | khosvd (SeDL)
    init: str = "dia"  # dia | data | iarm
    rho: float = 1.0
    admm_iter: int = 200
    admm_tol: float = 1e-6
    atom_swaps: int = 2  # replacement trials per iteration for duplicate/idle atoms; 0 disables
    restarts: int = 1  # independent seeded starts; the lowest final objective wins
    seed: int = 0

    def __post_init__(self):
        if self.w1 < 0 or self.w2 < 0:
            raise ValueError("w1 and w2 must be nonnegative")
        if self.coder not in ("admm", "swomp"):
            raise ValueError(f"unknown coder {self.coder!r}")
        if self.updater not in ("mod", "ksvd", "khosvd"):
            raise ValueError(f"unknown updater {self.updater!r}")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")


@dataclass
class LearnState:
    dictionary: Dictionary
    H: np.ndarray
    X: np.ndarray
    objective: list = field(default_factory=list)
    iteration: int = 0
    converged: bool = False
    flags: list = field(default_factory=list)


# ---------------------------------------------------------------- helpers

_DUP_COHERENCE = 0.95
_STALL_RTOL = 1e-3



def mean_coherence(D) -> float:
    """Mean absolute off-diagonal entry of the Gram matrix of normalized atoms."""
    Dn, _ = normalize_columns(D)
    G = np.abs(Dn.conj().T @ Dn)
    K = G.shape[0]
    if K < 2:
        return 0.0
    return float((G.sum() - np.trace(G)) / (K * (K - 1)))


def _penalty(H, group: int, cfg: LearnConfig) -> float:
    blocks = H.reshape(H.shape[0], -1, group)
    norms = np.linalg.norm(blocks, axis=2)
    if cfg.coder == "swomp":
        return float(cfg.w1 * np.count_nonzero(norms > 0))
    return float(cfg.w1 * norms.sum())


def _group_penalties(H, group: int, cfg: LearnConfig) -> np.ndarray:
    norms = np.linalg.norm(H.reshape(H.shape[0], -1, group), axis=2)
    if cfg.coder == "swomp":
        return cfg.w1 * (norms > 0).sum(axis=0)
    return cfg.w1 * norms.sum(axis=0)


def _group_fidelity(R, group: int) -> np.ndarray:
    return (np.abs(R.reshape(R.shape[0], -1, group)) ** 2).sum(axis=(0, 2))


def _worst_column(R) -> int:
    return int(np.argmax(np.linalg.norm(R, axis=0)))


# ---------------------------------------------------------------- DIA init


def dia_init(data, K: int, seed=None, n_iter: int = 10, sparsity: int | None = None) -> np.ndarray:
    """Incoherent dictionary initialization from data columns.

    Atoms start as a greedy max-min-distance selection of normalized data
    columns.  Each round then codes the data with OMP, refits the atoms by
    least squares, and replaces the least-used atoms by the normalized
    residuals of the worst-represented columns when that lowers the mean
    coherence.
    """
    rng = np.random.default_rng(seed)
    data = np.asarray(data, dtype=complex)
    n = data.shape[0]
    norms = np.linalg.norm(data, axis=0)
    cols = data[:, norms > 1e-12 * max(norms.max(initial=0), 1e-300)]
    cols = cols / np.linalg.norm(cols, axis=0)
    if cols.shape[1] < K:
        warnings.warn(
            f"only {cols.shape[1]} usable data columns for {K} atoms; padding with random atoms",
            RuntimeWarning,
        )
        extra = rng.standard_normal((n, K - cols.shape[1])) + 1j * rng.standard_normal((n, K - cols.shape[1]))
        return np.hstack([cols, normalize_columns(extra)[0]])
    order = rng.permutation(cols.shape[1])
    pool = cols[:, order]
    chosen = [0]
    maxcorr = np.abs(pool.conj().T @ pool[:, 0])
    for _ in range(K - 1):
        maxcorr[chosen] = np.inf
        k = int(np.argmin(maxcorr))
        chosen.append(k)
        maxcorr = np.maximum(maxcorr, np.abs(pool.conj().T @ pool[:, k]))
    D = pool[:, chosen]
    s = sparsity or max(1, min(3, n // 2))
    for _ in range(n_iter):
        codes = np.zeros((K, cols.shape[1]), dtype=complex)
        for j in range(cols.shape[1]):
            codes[:, j] = swomp(cols[:, j], D, s).coefficients[:, 0]
        used = np.count_nonzero(codes, axis=1)
        D_new = cols @ pinv(codes)
        dead = np.linalg.norm(D_new, axis=0) < 1e-12
        D_new[:, dead] = D[:, dead]
        D_new = normalize_columns(D_new)[0]
        if mean_coherence(D_new) <= mean_coherence(D):
            D = D_new
        R = cols - D @ codes
        worst = np.argsort(-np.linalg.norm(R, axis=0))
        for slot, j in zip(np.argsort(used)[: max(1, K // 10)], worst):
            r = R[:, j]
            if np.linalg.norm(r) < 1e-12:
                continue
            trial = D.copy()
            trial[:, slot] = r / np.linalg.norm(r)
            if mean_coherence(trial) < mean_coherence(D):
                D = trial
    return D


def _initial_combined(Z, K: int, cfg: LearnConfig, iarm=None) -> np.ndarray:
    if cfg.init == "iarm":
        if iarm is None:
            raise ValueError("init='iarm' needs a reference dictionary")
        return normalize_columns(np.asarray(iarm, dtype=complex))[0]
    if cfg.init == "data":
        rng = np.random.default_rng(cfg.seed)
        idx = rng.choice(Z.shape[1], size=K, replace=Z.shape[1] < K)
        return normalize_columns(Z[:, idx] + 1e-12)[0]
    return dia_init(Z, K, seed=cfg.seed)


# ---------------------------------------------------------------- CoDL stages


def codl_mod_update(X, Phi, H):
    """Least-squares dictionary update followed by normalization.

    Returns ``(Psi, H_rescaled, rank_deficient)``; the product ``Phi Psi H``
    is preserved by the rescale for every used atom.
    """
    Psi = pinv(Phi) @ X @ pinv(H)
    rank_def = np.linalg.matrix_rank(H) < H.shape[0]
    Psi, norms = normalize_columns(Psi)
    H = H * norms[:, None]
    return Psi, H, rank_def


def codl_ksvd_update(X, Phi, Psi, H, k: int, w1: float = 0.0, group: int | None = None, penalty: str = "l21"):
    """Rank-1 refinement of atom ``k`` on the columns that use it.

    ``psi_k <- normalize(Phi^+ E_k h_k^* / ||h_k||^2)``, then the used
    entries of row ``k`` are refit: plain least squares for the l0 penalty,
    and the group-shrunk least squares (exact minimizer) for the l2/l1 one.
    Returns ``(psi_k, h_k, replaced)``.
    """
    Psi, H = np.array(Psi, dtype=complex), np.array(H, dtype=complex)
    C = H.shape[1]
    g = C if group is None else group
    h = H[k]
    omega = np.flatnonzero(np.abs(h) > 0)
    R = X - Phi @ Psi @ H
    if omega.size == 0:
        Pp = pinv(Phi)
        j = _worst_column(R)
        psi = Pp @ R[:, j]
        if np.linalg.norm(psi) < 1e-14:
            return Psi[:, k], h, False
        return psi / np.linalg.norm(psi), h, True
    E = R[:, omega] + np.outer(Phi @ Psi[:, k], h[omega])
    hw = h[omega]
    psi = pinv(Phi) @ E @ hw.conj() / np.vdot(hw, hw).real
    nrm = np.linalg.norm(psi)
    if nrm < 1e-14:
        return Psi[:, k], h, False
    psi = psi / nrm
    v = Phi @ psi
    a = np.vdot(v, v).real
    b = v.conj() @ E
    h_new = np.zeros(C, dtype=complex)
    if penalty == "l21" and w1 > 0:
        full = np.zeros(C, dtype=complex)
        full[omega] = b
        mask = np.zeros(C, dtype=bool)
        mask[omega] = True
        for start in range(0, C, g):
            sl = slice(start, start + g)
            bn = np.linalg.norm(full[sl])
            if bn > 0:
                h_new[sl] = (full[sl] / a) * max(0.0, 1 - w1 / (2 * bn))
        h_new[~mask] = 0
    else:
        h_new[omega] = b / a
    return psi, h_new, False


def denoise_update(Y, model, w2: float):
    """``X = (w2 Y + model) / (1 + w2)`` where ``model = Phi Psi H``."""
    if w2 < 0:
        raise ValueError("w2 must be nonnegative")
    if np.isinf(w2):
        return np.array(Y, dtype=complex)
    return (w2 * np.asarray(Y) + np.asarray(model)) / (1 + w2)


# ---------------------------------------------------------------- CoDL driver


class _CombinedProblem:
    def __init__(self, Y, Phi, group, cfg):
        self.Y, self.Phi, self.group, self.cfg = Y, Phi, group, cfg

    def fidelity(self, X, Psi, H):
        return float(np.linalg.norm(X - self.Phi @ Psi @ H) ** 2)

    def objective(self, X, Psi, H):
        return (
            self.fidelity(X, Psi, H)
            + _penalty(H, self.group, self.cfg)
            + self.cfg.w2 * float(np.linalg.norm(self.Y - X) ** 2)
        )

    def code(self, X, Psi, H_old):
        cfg, g = self.cfg, self.group
        A = self.Phi @ Psi
        if cfg.coder == "admm":
            H_new = admm_l21(X, A, cfg.w1, rho=cfg.rho, max_iter=cfg.admm_iter, tol=cfg.admm_tol,
                             group_size=g, H0=H_old).coefficients
        else:
            H_new = np.zeros_like(H_old)
            for s in range(0, X.shape[1], g):
                sl = slice(s, s + g)
                H_new[:, sl] = swomp(X[:, sl], A, cfg.sparsity).coefficients
        # keep the old codes of any location whose local objective would grow
        f_old = _group_fidelity(X - A @ H_old, g) + _group_penalties(H_old, g, cfg)
        f_new = _group_fidelity(X - A @ H_new, g) + _group_penalties(H_new, g, cfg)
        worse = np.repeat(f_new > f_old, g)
        H_new[:, worse] = H_old[:, worse]
        return H_new


def _replace_unused(Psi, H, R_proj):
    """Re-seed atoms with all-zero code rows from the worst residual columns."""
    unused = np.flatnonzero(np.linalg.norm(H, axis=1) == 0)
    if unused.size == 0:
        return Psi, 0
    Psi = Psi.copy()
    order = np.argsort(-np.linalg.norm(R_proj, axis=0))
    n = 0
    for k, j in zip(unused, order):
        r = R_proj[:, j]
        if np.linalg.norm(r) > 1e-12:
            Psi[:, k] = r / np.linalg.norm(r)
            n += 1
    return Psi, n


def _best_of_restarts(run, cfg: LearnConfig):
    """Run ``run(cfg_r)`` for ``cfg.restarts`` seeds and keep the lowest final objective."""
    best = None
    for r in range(cfg.restarts):
        D, st = run(replace(cfg, seed=cfg.seed + r, restarts=1))
        if best is None or st.objective[-1] < best[1].objective[-1]:
            best = (D, st, r)
    D, st, r = best
    st.flags.append(f"restart {r} of {cfg.restarts} kept")
    return D, st


def codl(
    dataset: MeasurementDataset | None,
    cfg: LearnConfig,
    K: int,
    *,
    Y=None,
    Phi=None,
    group: int | None = None,
    Psi0=None,
    state: LearnState | None = None,
    iarm=None,
):
    """Learn a combined dictionary ``Psi`` (``N_r N_t x K``).

    Works on whitened measurements; pass ``Y``/``Phi``/``group`` directly to
    bypass the dataset (e.g. ``Phi = I`` for measurement-free data).
    """
    if cfg.restarts > 1 and state is None and Psi0 is None and cfg.init != "iarm":
        return _best_of_restarts(
            lambda c: codl(dataset, c, K, Y=Y, Phi=Phi, group=group, iarm=iarm), cfg)
    if dataset is not None:
        Phi, Ys = dataset.whitened()
        Y = np.hstack(Ys)
        group = dataset.n_subcarriers
    Y = np.asarray(Y, dtype=complex)
    Phi = np.asarray(Phi, dtype=complex)
    g = Y.shape[1] if group is None else group
    prob = _CombinedProblem(Y, Phi, g, cfg)
    Pp = pinv(Phi)
    if state is None:
        Psi = normalize_columns(np.asarray(Psi0, dtype=complex))[0] if Psi0 is not None else _initial_combined(Pp @ Y, K, cfg, iarm)
        H = np.zeros((Psi.shape[1], Y.shape[1]), dtype=complex)
        X = Y.copy()
        state = LearnState(Dictionary.combined(Psi, init=cfg.init if Psi0 is None else "given"), H, X)
        state.objective.append(prob.objective(X, Psi, H))
    Psi, H, X = state.dictionary.Psi, state.H, state.X
    start = state.iteration
    for it in range(start, cfg.max_iter):
        H = prob.code(X, Psi, H)
        J_code = prob.objective(X, Psi, H)
        Psi_try, H_try = Psi, H
        if cfg.updater == "mod":
            Psi_try, H_try, rank_def = codl_mod_update(X, Phi, H)
            if rank_def:
                Psi_try, n = _replace_unused(Psi_try, H_try, Pp @ (X - Phi @ Psi_try @ H_try))
                if n:
                    state.flags.append(f"iter {it}: replaced {n} unused atoms")
                dead = np.linalg.norm(Psi_try, axis=0) == 0
                Psi_try[:, dead] = Psi[:, dead]
            if prob.objective(X, Psi_try, H_try) > J_code:
                Psi_try, H_try = Psi, H
        else:
            Psi_try, H_try = _ksvd_sweep(X, Phi, Psi, H, prob, state, it)
        Psi, H = Psi_try, H_try
        if cfg.atom_swaps:
            Psi, H, n = _swap_atoms_combined(X, Psi, H, prob, Pp, state.objective[-1])
            if n:
                state.flags.append(f"iter {it}: swapped {n} atoms")
        X = denoise_update(Y, Phi @ Psi @ H, cfg.w2)
        J = prob.objective(X, Psi, H)
        state.objective.append(J)
        state.iteration = it + 1
        prev = state.objective[-2]
        if abs(prev - J) <= cfg.rel_tol * max(abs(J), 1e-300):
            state.converged = True
            break
    state.dictionary = Dictionary.combined(Psi, init=state.dictionary.provenance.get("init"),
                                           iterations=state.iteration, method="codl")
    state.H, state.X = H, X
    return state.dictionary, state


def _swap_candidates(usage, gram, stalled: bool, n_max: int, energy=None) -> list:
    """Idle atoms and the less used atom of each near-parallel pair.

    When progress has stalled the atoms carrying the least model energy are
    offered as well.
    """
    G = np.abs(gram) - np.eye(gram.shape[0])
    partner = G.argmax(axis=1)
    best = G[np.arange(G.shape[0]), partner]
    dup = [k for k in range(G.shape[0]) if best[k] > _DUP_COHERENCE and usage[k] <= usage[partner[k]]]
    cand = sorted(set(dup) | set(np.flatnonzero(usage == 0).tolist()), key=lambda k: usage[k])
    if stalled:
        order = np.argsort(energy if energy is not None else -best, kind="stable")
        cand += [int(k) for k in order if k not in cand]
    return cand[:n_max]


def _group_usage(Hm, g: int) -> np.ndarray:
    return (np.linalg.norm(Hm.reshape(Hm.shape[0], -1, g), axis=2) > 0).sum(axis=1)


def _top_direction(block) -> np.ndarray:
    u = np.linalg.svd(block, full_matrices=False)[0][:, 0]
    return u / np.linalg.norm(u)


def _swap_atoms_combined(X, Psi, H, prob, Pp, J_prev):
    """Try replacing idle/duplicate atoms by the dominant residual direction of the worst-fit groups.

    A swap is kept only if re-coding with it lowers the objective.
    """
    cfg, g = prob.cfg, prob.group
    J = prob.objective(X, Psi, H)
    stalled = J_prev - J <= _STALL_RTOL * abs(J)
    energy = np.linalg.norm(prob.Phi @ Psi, axis=0) ** 2 * np.linalg.norm(H, axis=1) ** 2
    cand = _swap_candidates(_group_usage(H, g), Psi.conj().T @ Psi, stalled, cfg.atom_swaps, energy)
    if not cand:
        return Psi, H, 0
    E = X - prob.Phi @ Psi @ H
    worst = np.argsort(-_group_fidelity(E, g))
    n = 0
    for k, grp in zip(cand, worst):
        Psi_t, H_t = Psi.copy(), H.copy()
        Psi_t[:, k] = _top_direction(Pp @ E[:, grp * g:(grp + 1) * g])
        H_t[k] = 0
        H_t = prob.code(X, Psi_t, H_t)
        J_t = prob.objective(X, Psi_t, H_t)
        if J_t < J:
            Psi, H, J, n = Psi_t, H_t, J_t, n + 1
    return Psi, H, n


def _ksvd_sweep(X, Phi, Psi, H, prob, state, it):
    cfg = prob.cfg
    Psi, H = Psi.copy(), H.copy()
    penalty = "l0" if cfg.coder == "swomp" else "l21"
    for k in range(Psi.shape[1]):
        J_before = prob.objective(X, Psi, H)
        psi, h, replaced = codl_ksvd_update(X, Phi, Psi, H, k, cfg.w1, prob.group, penalty)
        old_psi, old_h = Psi[:, k].copy(), H[k].copy()
        Psi[:, k], H[k] = psi, h
        if replaced:
            state.flags.append(f"iter {it}: replaced unused atom {k}")
            continue
        if prob.objective(X, Psi, H) > J_before:
            Psi[:, k], H[k] = old_psi, old_h
    return Psi, H


# ---------------------------------------------------------------- SeDL


def _sep_model(Hten, D_R, D_T):
    return mode_product(mode_product(Hten, D_R, 1), D_T.conj(), 2)


def sedl_sparse_code(Xten, D_R, D_T, w1: float, method: str = "tensor", group: int | None = None, H0=None, **admm_kw):
    """Jointly sparse tensor codes ``H`` with ``X ~ H x1 D_R x2 conj(D_T)``.

    ``method='unfold'`` solves the mode-3 unfolded system with the generic
    ADMM; ``'tensor'`` runs the same iterations but applies the inverse of
    ``2 (conj(D_T) kron D_R)^* (conj(D_T) kron D_R) + rho I`` through the
    eigendecompositions of the two small factor Gram matrices.
    """
    Xten = np.asarray(Xten, dtype=complex)
    K_r, K_t = D_R.shape[1], D_T.shape[1]
    n_cols = Xten.shape[2]
    Xm = unfold(Xten, 3).T
    A = kron(D_T.conj(), D_R)
    H0m = None if H0 is None else unfold(H0, 3).T
    solver = None
    if method == "tensor":
        rho = admm_kw.get("rho", 1.0)
        lr, Vr = np.linalg.eigh(D_R.conj().T @ D_R)
        lt, Vt = np.linalg.eigh((D_T.conj().T @ D_T).conj())
        scale = 1.0 / (2 * np.outer(lr, lt) + rho)

        def solver(B):
            T = refold(B.T, 3, (K_r, K_t, B.shape[1]))
            T = mode_product(mode_product(T, Vr.conj().T, 1), Vt.conj().T, 2)
            T = T * scale[:, :, None]
            T = mode_product(mode_product(T, Vr, 1), Vt, 2)
            return unfold(T, 3).T
    elif method != "unfold":
        raise ValueError(f"unknown method {method!r}")
    res = admm_l21(Xm, A, w1, group_size=group, H0=H0m, solver=solver, **admm_kw)
    Hten = refold(res.coefficients.T, 3, (K_r, K_t, n_cols))
    return Hten, res


def sedl_mod_update(Xten, Hten, D_other, factor: str = "R"):
    """Exact least-squares update of one factor with the other held fixed.

    ``factor='R'``: ``D_R = [X]_(1) pinv([H x2 conj(D_T)]_(1))``.
    ``factor='T'``: ``conj(D_T) = [X]_(2) pinv([H x1 D_R]_(2))``.
    Returns ``(D_new, H_rescaled, rank_deficient)`` after normalization.
    """
    if factor == "R":
        B = unfold(mode_product(Hten, D_other.conj(), 2), 1)
        D = unfold(Xten, 1) @ pinv(B)
        mode = 1
    elif factor == "T":
        B = unfold(mode_product(Hten, D_other, 1), 2)
        D = (unfold(Xten, 2) @ pinv(B)).conj()
        mode = 2
    else:
        raise ValueError("factor must be 'R' or 'T'")
    rank_def = np.linalg.matrix_rank(B) < B.shape[0]
    D, norms = normalize_columns(D)
    Hten = mode_product(Hten, np.diag(norms).astype(complex), mode)
    return D, Hten, rank_def


def _khosvd_factor(Xten, Hten, D_R, D_T, factor, objective):
    """Per-atom rank-1 least-squares refits of one factor (codes rescaled, not refit)."""
    D_R, D_T, Hten = D_R.copy(), D_T.copy(), Hten.copy()
    D = D_R if factor == "R" else D_T
    mode = 1 if factor == "R" else 2
    for k in range(D.shape[1]):
        J0 = objective(Xten, Hten, D_R, D_T)
        if factor == "R":
            B = unfold(mode_product(Hten, D_T.conj(), 2), 1)
            Xm = unfold(Xten, 1)
            Dm = D_R
        else:
            B = unfold(mode_product(Hten, D_R, 1), 2)
            Xm = unfold(Xten, 2)
            Dm = D_T.conj()
        b = B[k]
        if np.vdot(b, b).real == 0:
            continue
        E = Xm - Dm @ B + np.outer(Dm[:, k], b)
        d = E @ b.conj() / np.vdot(b, b).real
        nrm = np.linalg.norm(d)
        if nrm < 1e-14:
            continue
        old_D, old_H = D.copy(), Hten.copy()
        D[:, k] = (d / nrm) if factor == "R" else (d / nrm).conj()
        sl = [slice(None)] * 3
        sl[mode - 1] = k
        Hten[tuple(sl)] *= nrm
        if objective(Xten, Hten, D_R, D_T) > J0:
            D[:] = old_D
            Hten[:] = old_H
    return D_R, D_T, Hten


def sedl(
    dataset: MeasurementDataset | None,
    cfg: LearnConfig,
    K_r: int,
    K_t: int,
    *,
    Yten=None,
    n_r: int | None = None,
    n_t: int | None = None,
    group: int | None = None,
    init=None,
    state: LearnState | None = None,
):
    """Learn separable factors ``D_R`` (``N_r x K_r``) and ``D_T`` (``N_t x K_t``).

    Data enters as the tensor ``refold(Phi^+ Y)`` of shape ``(N_r, N_t, N_c N_sa)``.
    ``init`` may be a pair ``(D_R0, D_T0)``.
    """
    if cfg.restarts > 1 and state is None and init is None:
        return _best_of_restarts(
            lambda c: sedl(dataset, c, K_r, K_t, Yten=Yten, n_r=n_r, n_t=n_t, group=group), cfg)
    if dataset is not None:
        Phi, Ys = dataset.whitened()
        Y = np.hstack(Ys)
        ch = dataset.channels[0]
        n_r, n_t = ch.freq.shape[1], ch.freq.shape[2]
        Yten = refold((pinv(Phi) @ Y).T, 3, (n_r, n_t, Y.shape[1]))
        group = dataset.n_subcarriers
    Yten = np.asarray(Yten, dtype=complex)
    n_r, n_t, n_cols = Yten.shape
    g = n_cols if group is None else group

    def objective(Xt, Ht, D_R, D_T):
        fid = float(np.linalg.norm(Xt - _sep_model(Ht, D_R, D_T)) ** 2)
        Hm = unfold(Ht, 3).T
        return fid + _penalty(Hm, g, cfg) + cfg.w2 * float(np.linalg.norm(Yten - Xt) ** 2)

    if state is None:
        if init is not None:
            D_R, D_T = (normalize_columns(np.asarray(m, dtype=complex))[0] for m in init)
            how = "given"
        else:
            D_R = _factor_init(unfold(Yten, 1), K_r, cfg)
            D_T = _factor_init(unfold(Yten, 2).conj(), K_t, cfg)
            how = cfg.init
        Ht = np.zeros((K_r, K_t, n_cols), dtype=complex)
        Xt = Yten.copy()
        state = LearnState(Dictionary.separable(D_R, D_T, init=how), Ht, Xt)
        state.objective.append(objective(Xt, Ht, D_R, D_T))
    D_R, D_T = state.dictionary.D_R, state.dictionary.D_T
    Ht, Xt = state.H, state.X
    for it in range(state.iteration, cfg.max_iter):
        Ht = _sedl_code(Xt, Ht, D_R, D_T, g, cfg)
        for factor in ("R", "T"):
            J0 = objective(Xt, Ht, D_R, D_T)
            if cfg.updater == "khosvd":
                D_R2, D_T2, H2 = _khosvd_factor(Xt, Ht, D_R, D_T, factor, objective)
            else:
                other = D_T if factor == "R" else D_R
                Dn, H2, rank_def = sedl_mod_update(Xt, Ht, other, factor)
                if rank_def:
                    Dn = _reseed_factor(Dn, H2, Xt, D_R, D_T, factor)
                prev = D_R if factor == "R" else D_T
                dead = np.linalg.norm(Dn, axis=0) == 0
                Dn[:, dead] = prev[:, dead]
                D_R2, D_T2 = (Dn, D_T) if factor == "R" else (D_R, Dn)
            if objective(Xt, H2, D_R2, D_T2) <= J0:
                D_R, D_T, Ht = D_R2, D_T2, H2
        if cfg.atom_swaps:
            D_R, D_T, Ht, n = _swap_atoms_separable(Xt, Ht, D_R, D_T, g, cfg, objective, state.objective[-1])
            if n:
                state.flags.append(f"iter {it}: swapped {n} factor atoms")
        Xt = denoise_update(Yten, _sep_model(Ht, D_R, D_T), cfg.w2)
        J = objective(Xt, Ht, D_R, D_T)
        state.objective.append(J)
        state.iteration = it + 1
        if abs(state.objective[-2] - J) <= cfg.rel_tol * max(abs(J), 1e-300):
            state.converged = True
            break
    state.dictionary = Dictionary.separable(D_R, D_T, init=state.dictionary.provenance.get("init"),
                                            iterations=state.iteration, method="sedl")
    state.H, state.X = Ht, Xt
    return state.dictionary, state


def _swap_atoms_separable(Xt, Ht, D_R, D_T, g, cfg, objective, J_prev):
    """Factor-wise counterpart of the combined atom swap."""
    J = objective(Xt, Ht, D_R, D_T)
    stalled = J_prev - J <= _STALL_RTOL * abs(J)
    E = Xt - _sep_model(Ht, D_R, D_T)
    n_groups = E.shape[2] // g
    fid = np.array([np.linalg.norm(E[:, :, i * g:(i + 1) * g]) ** 2 for i in range(n_groups)])
    worst = np.argsort(-fid)
    n = 0
    for factor, mode in (("R", 1), ("T", 2)):
        D = D_R if factor == "R" else D_T
        rows = np.linalg.norm(np.moveaxis(Ht, mode - 1, 0).reshape(D.shape[1], n_groups, -1), axis=2)
        if factor == "R":
            part = mode_product(Ht, D_T.conj(), 2)
        else:
            part = np.moveaxis(mode_product(Ht, D_R, 1), 1, 0)
        energy = np.linalg.norm(part.reshape(D.shape[1], -1), axis=1) ** 2
        cand = _swap_candidates((rows > 0).sum(axis=1), D.conj().T @ D, stalled, cfg.atom_swaps, energy)
        for k, grp in zip(cand, worst):
            block = unfold(E[:, :, grp * g:(grp + 1) * g], mode)
            d = _top_direction(block if factor == "R" else block.conj())
            D_t = D.copy()
            D_t[:, k] = d
            H_t = Ht.copy()
            if factor == "R":
                H_t[k] = 0
                D_R_t, D_T_t = D_t, D_T
            else:
                H_t[:, k] = 0
                D_R_t, D_T_t = D_R, D_t
            H_t = _sedl_code(Xt, H_t, D_R_t, D_T_t, g, cfg)
            J_t = objective(Xt, H_t, D_R_t, D_T_t)
            # one refit of the swapped factor before judging the swap
            Dn, H_n, _ = sedl_mod_update(Xt, H_t, D_T_t if factor == "R" else D_R_t, factor)
            dead = np.linalg.norm(Dn, axis=0) == 0
            Dn[:, dead] = D_t[:, dead]
            D_R_n, D_T_n = (Dn, D_T_t) if factor == "R" else (D_R_t, Dn)
            J_n = objective(Xt, H_n, D_R_n, D_T_n)
            if J_n < J_t:
                D_R_t, D_T_t, H_t, J_t = D_R_n, D_T_n, H_n, J_n
            if J_t < J:
                D_R, D_T, Ht, J, n = D_R_t, D_T_t, H_t, J_t, n + 1
                D = D_R if factor == "R" else D_T
    return D_R, D_T, Ht, n


def _factor_init(M, K, cfg):
    if cfg.init == "iarm":
        raise ValueError("pass init=(D_R, D_T) for an IARM start")
    if cfg.init == "data":
        rng = np.random.default_rng(cfg.seed)
        idx = rng.choice(M.shape[1], size=K, replace=M.shape[1] < K)
        return normalize_columns(M[:, idx] + 1e-12)[0]
    return dia_init(M, K, seed=cfg.seed)


def _reseed_factor(Dn, H2, Xt, D_R, D_T, factor):
    mode = 1 if factor == "R" else 2
    used = np.linalg.norm(unfold(H2, mode), axis=1) > 0
    if used.all():
        return Dn
    R = Xt - _sep_model(H2, Dn if factor == "R" else D_R, Dn if factor == "T" else D_T)
    Rm = unfold(R, mode)
    if factor == "T":
        Rm = Rm.conj()
    order = np.argsort(-np.linalg.norm(Rm, axis=0))
    Dn = Dn.copy()
    for k, j in zip(np.flatnonzero(~used), order):
        r = Rm[:, j]
        if np.linalg.norm(r) > 1e-12:
            Dn[:, k] = r / np.linalg.norm(r)
    return Dn


def _sedl_code(Xt, Ht_old, D_R, D_T, g, cfg):
    K_r, K_t, n_cols = Ht_old.shape
    A = None
    if cfg.coder == "admm":
        Ht, _ = sedl_sparse_code(Xt, D_R, D_T, cfg.w1, group=g, H0=Ht_old, rho=cfg.rho,
                                 max_iter=cfg.admm_iter, tol=cfg.admm_tol)
    else:
        A = kron(D_T.conj(), D_R)
        Xm = unfold(Xt, 3).T
        Hm = np.zeros((K_r * K_t, n_cols), dtype=complex)
        for s in range(0, n_cols, g):
            Hm[:, s:s + g] = swomp(Xm[:, s:s + g], A, cfg.sparsity).coefficients
        Ht = refold(Hm.T, 3, (K_r, K_t, n_cols))
    A = kron(D_T.conj(), D_R) if A is None else A
    Xm = unfold(Xt, 3).T
    Hn, Ho = unfold(Ht, 3).T, unfold(Ht_old, 3).T
    f_old = _group_fidelity(Xm - A @ Ho, g) + _group_penalties(Ho, g, cfg)
    f_new = _group_fidelity(Xm - A @ Hn, g) + _group_penalties(Hn, g, cfg)
    worse = np.repeat(f_new > f_old, g)
    Hn = Hn.copy()
    Hn[:, worse] = Ho[:, worse]
    return refold(Hn.T, 3, (K_r, K_t, n_cols))


# ---------------------------------------------------------------- complexity


_TABLE_LATEX = {
    ("sparse_coding", "SW-OMP"): r"\mathcal{O}({N_{\text{sa}}}{N_{\text{c}}} N K)",
    ("sparse_coding", "CoDL"): r"\mathcal{O}\big({N_{\text{sa}}} (NK^2 + K^3) +{N_{\text{sa}}}{N_{\text{c}}}(NK   + K^2)  \big)",
    ("sparse_coding", "SeDL reduced to CoDL"): "The same as CoDL",
    ("sparse_coding", "ADMM for SeDL"): r"\mathcal{O}\big(4{N_{\text{sa}}}{N_{\text{c}}} K\sqrt{K}\big)",
    ("dictionary_update", "CoDL MOD"): r"\mathcal{O}\big( {N_{\text{sa}}}{N_{\text{c}}} NK + NK^2  + {N_{\text{sa}}}{N_{\text{c}}} K^2 + K^3  \big)",
    ("dictionary_update", "CoDL K-SVD"): r"\mathcal{O}\big(N^2 (S_0{N_{\text{sa}}}{N_{\text{c}}}+NK  ) \big)",
    ("dictionary_update", "SeDL MOD"): r"\mathcal{O}\big(2{N_{\text{sa}}}{N_{\text{c}}}(N \sqrt{K}+K\sqrt{N})   + 6{N_{\text{sa}}}{N_{\text{c}}} K\sqrt{K} + 2K\sqrt{K} \big)",
    ("dictionary_update", "SeDL K-HOSVD"): r"\mathcal{O}\big(N^2 (S_0{N_{\text{sa}}}{N_{\text{c}}} +NK )+ 2{N_{\text{sa}}}{N_{\text{c}}} N^3S_0   \big)",
}


def latex_to_ascii(expr: str) -> str:
    """Plain-text form of a LaTeX big-O expression (whitespace removed)."""
    for a, b in (
        (r"\mathcal{O}", "O"), (r"\big(", "("), (r"\big)", ")"),
        (r"{N_{\text{sa}}}", "N_sa"), (r"{N_{\text{c}}}", "N_c"), ("S_0", "S0"),
    ):
        expr = expr.replace(a, b)
    expr = re.sub(r"\\sqrt\{(\w+)\}", r"sqrt(\1)", expr)
    return re.sub(r"\s+", "", expr)


def complexity_report(N: int, K: int, S0: int, N_sa: int, N_c: int) -> dict:
    """Per-iteration operation-count estimates for each learning stage.

    ``N`` and ``K`` are the combined signal and atom dimensions
    (``N = N_r N_t``, ``K = K_r K_t``).  Each entry holds the big-O
    expression and its value at the given sizes.
    """
    rN, rK = math.sqrt(N), math.sqrt(K)
    rows = {
        ("sparse_coding", "SW-OMP"): ("O(N_sa N_c N K)", N_sa * N_c * N * K),
        ("sparse_coding", "CoDL"): (
            "O(N_sa(NK^2 + K^3) + N_sa N_c(NK + K^2))",
            N_sa * (N * K**2 + K**3) + N_sa * N_c * (N * K + K**2),
        ),
        ("sparse_coding", "SeDL reduced to CoDL"): (
            "The same as CoDL",
            N_sa * (N * K**2 + K**3) + N_sa * N_c * (N * K + K**2),
        ),
        ("sparse_coding", "ADMM for SeDL"): ("O(4 N_sa N_c K sqrt(K))", 4 * N_sa * N_c * K * rK),
        ("dictionary_update", "CoDL MOD"): (
            "O(N_sa N_c N K + N K^2 + N_sa N_c K^2 + K^3)",
            N_sa * N_c * N * K + N * K**2 + N_sa * N_c * K**2 + K**3,
        ),
        ("dictionary_update", "CoDL K-SVD"): ("O(N^2(S0 N_sa N_c + N K))", N**2 * (S0 * N_sa * N_c + N * K)),
        ("dictionary_update", "SeDL MOD"): (
            "O(2 N_sa N_c(N sqrt(K) + K sqrt(N)) + 6 N_sa N_c K sqrt(K) + 2 K sqrt(K))",
            2 * N_sa * N_c * (N * rK + K * rN) + 6 * N_sa * N_c * K * rK + 2 * K * rK,
        ),
        ("dictionary_update", "SeDL K-HOSVD"): (
            "O(N^2(S0 N_sa N_c + N K) + 2 N_sa N_c N^3 S0)",
            N**2 * (S0 * N_sa * N_c + N * K) + 2 * N_sa * N_c * N**3 * S0,
        ),
    }
    codl_iter = rows[("sparse_coding", "CoDL")][1] + rows[("dictionary_update", "CoDL MOD")][1]
    sedl_iter = rows[("sparse_coding", "ADMM for SeDL")][1] + rows[("dictionary_update", "SeDL MOD")][1]
    return {
        "sizes": {"N": N, "K": K, "S0": S0, "N_sa": N_sa, "N_c": N_c},
        "entries": [
            {"stage": s, "method": m, "expression": e, "latex": _TABLE_LATEX[s, m], "count": float(v)}
            for (s, m), (e, v) in rows.items()
        ],
        "per_iteration": {"CoDL (ADMM + MOD)": float(codl_iter), "SeDL (ADMM + MOD)": float(sedl_iter)},
        "sedl_cheaper": bool(sedl_iter < codl_iter),
    }
