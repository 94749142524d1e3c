"""Fisher information and Cramer-Rao bound for impaired frequency-selective channels.

The channel at subcarrier ``c`` is ``H[c] = R diag(g[c]) T^H`` with
``R = C_R Gamma_R A_R(phi)`` and ``T = C_T Gamma_T A_T(theta)``, so
``vec(H[c]) = (conj(T) kr R) g[c]``.  The real parameter vector stacks the
blocks listed in ``BLOCKS``; complex path gains and coupling coefficients
enter through their real and imaginary parts.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .arrays import (
    coupling_derivative,
    coupling_parameters,
    gain_phase_matrix,
    steering_derivative_angle,
    steering_derivative_spacing,
    steering_vector,
)
from .channel import ChannelRealization
from .measurement import MeasurementDataset, whitening_operator
from .tensor import kron, khatri_rao

__all__ = [
    "BLOCKS",
    "IMPAIRMENT_BLOCKS",
    "ParamVector",
    "CRLBModel",
    "FisherInfo",
    "CRLBResult",
    "mean_derivative",
    "channel_jacobian",
    "fim",
    "fim_unwhitened",
    "closed_form_block",
    "total_crlb",
]

BLOCKS = ("theta", "phi", "g", "g_t", "g_r", "nu_t", "nu_r", "eps_t", "eps_r", "c_t", "c_r")
IMPAIRMENT_BLOCKS = BLOCKS[3:]


@dataclass
class ParamVector:
    """Ordered real parameter layout; ``offsets[name] = (start, stop)``."""

    n_paths: int
    n_r: int
    n_t: int
    n_c: int
    include: tuple = BLOCKS
    coupling_structure: str = "symmetric"
    offsets: dict = field(init=False)
    labels: list = field(init=False)

    def __post_init__(self):
        unknown = set(self.include) - set(BLOCKS)
        if unknown:
            raise ValueError(f"unknown parameter blocks {sorted(unknown)}")
        self.include = tuple(b for b in BLOCKS if b in self.include)
        P = self.n_paths
        sizes = {
            "theta": [("theta", i) for i in range(P)],
            "phi": [("phi", i) for i in range(P)],
            "g": [(part, c, i) for c in range(self.n_c) for part in ("gR", "gI") for i in range(P)],
            "g_t": [("g_t", i) for i in range(self.n_t)],
            "g_r": [("g_r", i) for i in range(self.n_r)],
            "nu_t": [("nu_t", i) for i in range(self.n_t)],
            "nu_r": [("nu_r", i) for i in range(self.n_r)],
            "eps_t": [("eps_t", j) for j in range(1, self.n_t)],
            "eps_r": [("eps_r", j) for j in range(1, self.n_r)],
            "c_t": [("c_t", part, p) for p in coupling_parameters(self.n_t, self.coupling_structure) for part in ("re", "im")],
            "c_r": [("c_r", part, p) for p in coupling_parameters(self.n_r, self.coupling_structure) for part in ("re", "im")],
        }
        self.offsets, self.labels = {}, []
        for name in self.include:
            start = len(self.labels)
            self.labels.extend(sizes[name])
            self.offsets[name] = (start, len(self.labels))

    @property
    def size(self) -> int:
        return len(self.labels)

    def complex_count(self) -> int:
        """Parameter count with each coupling coefficient counted once (as a complex unknown)."""
        P, nr, nt, nc = self.n_paths, self.n_r, self.n_t, self.n_c
        return 2 * P + 2 * P * nc + 2 * nr + 2 * nt + (nt - 1) + (nr - 1) + nr * (nr - 1) // 2 + nt * (nt - 1) // 2

    def block(self, name: str) -> slice:
        if name not in self.offsets:
            raise ValueError(f"block {name!r} not in parameter vector")
        return slice(*self.offsets[name])


@dataclass
class CRLBModel:
    """Factors of the channel needed for derivatives and the whitened sensing matrix."""

    channel: ChannelRealization
    Phi_w: np.ndarray
    sigma2: float
    params: ParamVector
    Phi: np.ndarray | None = None
    noise_cov_blocks: list | None = None

    def __post_init__(self):
        ch = self.channel
        cfg = ch.cfg
        self.A_R = steering_vector(cfg.rx, ch.imp_r, ch.paths.aoa)
        self.A_T = steering_vector(cfg.tx, ch.imp_t, ch.paths.aod)
        self.G_R = gain_phase_matrix(ch.imp_r)
        self.G_T = gain_phase_matrix(ch.imp_t)
        self.C_R = ch.imp_r.coupling
        self.C_T = ch.imp_t.coupling
        self.R = self.C_R @ self.G_R @ self.A_R
        self.T = self.C_T @ self.G_T @ self.A_T
        self.g = ch.subcarrier_gains  # (N_c, P)

    @classmethod
    def from_dataset(cls, dataset: MeasurementDataset, channel: ChannelRealization | None = None,
                     include=BLOCKS, sigma2: float | None = None, coupling_structure: str = "symmetric"):
        ch = channel if channel is not None else dataset.channels[0]
        op = whitening_operator(dataset)
        Phi = dataset.Phi
        n_c, n_r, n_t = ch.freq.shape
        pv = ParamVector(ch.paths.n_paths, n_r, n_t, n_c, tuple(include), coupling_structure)
        s2 = dataset.sigma2_eff if sigma2 is None else sigma2
        return cls(ch, op.apply(Phi), s2, pv, Phi, dataset.whitening_blocks)

    @property
    def n_c(self) -> int:
        return self.g.shape[0]

    # -- derivative kernels: (dR, dT, dg, subcarrier or None) --------------
    def kernel(self, label):
        ch, cfg = self.channel, self.channel.cfg
        P = self.R.shape[1]
        zR = np.zeros_like(self.R)
        zT = np.zeros_like(self.T)
        kind = label[0]
        if kind == "theta":
            i = label[1]
            dT = zT.copy()
            dT[:, i] = self.C_T @ self.G_T @ steering_derivative_angle(cfg.tx, ch.imp_t, ch.paths.aod[i])[:, 0]
            return None, dT, None, None
        if kind == "phi":
            i = label[1]
            dR = zR.copy()
            dR[:, i] = self.C_R @ self.G_R @ steering_derivative_angle(cfg.rx, ch.imp_r, ch.paths.aoa[i])[:, 0]
            return dR, None, None, None
        if kind in ("gR", "gI"):
            _, c, i = label
            dg = np.zeros(P, dtype=complex)
            dg[i] = 1.0 if kind == "gR" else 1j
            return None, None, dg, c
        if kind in ("g_t", "nu_t", "g_r", "nu_r"):
            side_t = kind.endswith("_t")
            imp = ch.imp_t if side_t else ch.imp_r
            i = label[1]
            dG = np.zeros((imp.n, imp.n), dtype=complex)
            e = np.exp(1j * imp.phases[i])
            dG[i, i] = e if kind.startswith("g") else 1j * imp.gains[i] * e
            if side_t:
                return None, self.C_T @ dG @ self.A_T, None, None
            return self.C_R @ dG @ self.A_R, None, None, None
        if kind in ("eps_t", "eps_r"):
            j = label[1]
            if kind == "eps_t":
                dA = np.hstack([steering_derivative_spacing(cfg.tx, ch.imp_t, a, j) for a in ch.paths.aod])
                return None, self.C_T @ self.G_T @ dA, None, None
            dA = np.hstack([steering_derivative_spacing(cfg.rx, ch.imp_r, a, j) for a in ch.paths.aoa])
            return self.C_R @ self.G_R @ dA, None, None, None
        if kind in ("c_t", "c_r"):
            _, part, (i, j) = label
            n = self.C_T.shape[0] if kind == "c_t" else self.C_R.shape[0]
            dC = coupling_derivative(n, i, j, self.params.coupling_structure).astype(complex)
            if part == "im":
                dC = 1j * dC
            if kind == "c_t":
                return None, dC @ self.G_T @ self.A_T, None, None
            return dC @ self.G_R @ self.A_R, None, None, None
        raise ValueError(f"unknown parameter label {label!r}")

    def dH(self, label, c: int) -> np.ndarray:
        """``d H[c] / d xi`` for one real parameter."""
        dR, dT, dg, only_c = self.kernel(label)
        out = np.zeros((self.R.shape[0], self.T.shape[0]), dtype=complex)
        if only_c is not None:
            if only_c == c:
                out = (self.R * dg) @ self.T.conj().T
            return out
        g = self.g[c]
        if dR is not None:
            out = out + (dR * g) @ self.T.conj().T
        if dT is not None:
            out = out + (self.R * g) @ dT.conj().T
        return out


def _vec(M):
    return M.reshape(-1, order="F")


def channel_jacobian(model: CRLBModel, c: int) -> np.ndarray:
    """``d vec(H[c]) / d xi^T`` (``N_r N_t x len(xi)``)."""
    return np.column_stack([_vec(model.dH(lab, c)) for lab in model.params.labels])


def mean_derivative(model: CRLBModel, label=None, whitened: bool = True) -> np.ndarray:
    """``d mu_w / d xi`` stacked over subcarriers (length ``M L_r N_c``).

    With ``label=None`` all parameters are returned as columns.
    """
    Phi = model.Phi_w if whitened else model.Phi
    labels = model.params.labels if label is None else [label]
    for lab in labels:
        if lab not in model.params.labels:
            raise ValueError(f"parameter {lab!r} is not part of the parameter vector")
    cols = []
    for lab in labels:
        cols.append(np.concatenate([Phi @ _vec(model.dH(lab, c)) for c in range(model.n_c)]))
    D = np.column_stack(cols)
    return D[:, 0] if label is not None else D


def whitened_mean(model: CRLBModel) -> np.ndarray:
    return np.concatenate([model.Phi_w @ _vec(model.channel.freq[c]) for c in range(model.n_c)])


@dataclass
class FisherInfo:
    matrix: np.ndarray
    sigma2: float
    params: ParamVector
    eigenvalues: np.ndarray = field(init=False)

    def __post_init__(self):
        self.eigenvalues = np.linalg.eigvalsh(self.matrix)

    @property
    def condition_number(self) -> float:
        lo, hi = self.eigenvalues[0], self.eigenvalues[-1]
        return float(np.inf) if lo <= 0 else float(hi / lo)

    @property
    def rank(self) -> int:
        lam = self.eigenvalues
        return int(np.sum(lam > 1e-10 * lam[-1]))

    def pinv(self, rtol: float = 1e-10) -> np.ndarray:
        lam, V = np.linalg.eigh(self.matrix)
        keep = lam > rtol * lam[-1]
        return (V[:, keep] / lam[keep]) @ V[:, keep].T


def fim(model: CRLBModel) -> FisherInfo:
    """``(2 / sigma2) Re{D^* D}`` with ``D`` the whitened mean derivatives."""
    if model.sigma2 <= 0:
        raise ValueError("noise variance must be positive")
    D = mean_derivative(model)
    I = (2.0 / model.sigma2) * np.real(D.conj().T @ D)
    return FisherInfo(0.5 * (I + I.T), model.sigma2, model.params)


def fim_unwhitened(model: CRLBModel) -> np.ndarray:
    """``2 Re{dmu^* C^-1 dmu}`` with the colored noise covariance of the raw measurements."""
    from scipy.linalg import block_diag

    D = mean_derivative(model, whitened=False)
    Cb = model.sigma2 * block_diag(*model.noise_cov_blocks)
    Cinv = np.linalg.pinv(Cb, hermitian=True)
    m = Cb.shape[0]
    I = np.zeros((D.shape[1], D.shape[1]))
    for c in range(model.n_c):
        Dc = D[c * m:(c + 1) * m]
        I += 2.0 * np.real(Dc.conj().T @ Cinv @ Dc)
    return 0.5 * (I + I.T)


# ---------------------------------------------------------------- closed forms


def _closed_form_parts(model: CRLBModel):
    Ck = kron(model.C_T.conj(), model.C_R)
    Gk = kron(model.G_T.conj(), model.G_R)
    Q = Ck.conj().T @ model.Phi_w.conj().T @ model.Phi_w @ Ck
    return Ck, Gk, Q


def _kernel_vector(model: CRLBModel, label, c: int, Ck, Gk) -> np.ndarray:
    """``(C-part)(Gamma-part)(A-part) g[c]`` with the differentiated factor swapped in."""
    ch, cfg = model.channel, model.channel.cfg
    KR = khatri_rao(model.A_T.conj(), model.A_R)
    g = model.g[c]
    kind = label[0]
    if kind in ("g_t", "nu_t", "g_r", "nu_r"):
        side_t = kind.endswith("_t")
        imp = ch.imp_t if side_t else ch.imp_r
        i = label[1]
        e = np.exp(1j * imp.phases[i])
        d = e if kind.startswith("g") else 1j * imp.gains[i] * e
        E = np.zeros((imp.n, imp.n), dtype=complex)
        if side_t:
            E[i, i] = np.conj(d)
            dGk = kron(E, model.G_R)
        else:
            E[i, i] = d
            dGk = kron(model.G_T.conj(), E)
        return Ck @ dGk @ KR @ g
    if kind in ("eps_t", "eps_r"):
        j = label[1]
        if kind == "eps_t":
            dA = np.hstack([steering_derivative_spacing(cfg.tx, ch.imp_t, a, j) for a in ch.paths.aod])
            dKR = khatri_rao(dA.conj(), model.A_R)
        else:
            dA = np.hstack([steering_derivative_spacing(cfg.rx, ch.imp_r, a, j) for a in ch.paths.aoa])
            dKR = khatri_rao(model.A_T.conj(), dA)
        return Ck @ Gk @ dKR @ g
    if kind in ("c_t", "c_r"):
        _, part, (i, j) = label
        s = 1j if part == "im" else 1.0
        if kind == "c_t":
            dC = coupling_derivative(model.C_T.shape[0], i, j, model.params.coupling_structure) * np.conj(s)
            dCk = kron(dC, model.C_R)
        else:
            dC = coupling_derivative(model.C_R.shape[0], i, j, model.params.coupling_structure) * s
            dCk = kron(model.C_T.conj(), dC)
        return dCk @ Gk @ KR @ g
    raise ValueError(f"no quadratic-form kernel for {label!r}")


def closed_form_block(model: CRLBModel, block_i: str, block_j: str) -> np.ndarray:
    """FIM block between two parameter families via the trace / quadratic forms.

    Angles and path gains use ``tr{conj(g_i) g_j Q (outer products of the
    differentiated steering vectors)}``; impairment families use
    ``g^* (kernel_i)^* Phi_w^* Phi_w (kernel_j) g`` summed over subcarriers.
    """
    pv = model.params
    Li = pv.labels[pv.block(block_i)]
    Lj = pv.labels[pv.block(block_j)]
    s = 2.0 / model.sigma2
    Ck, Gk, Q = _closed_form_parts(model)
    GQG = Gk.conj().T @ Q @ Gk
    ch, cfg = model.channel, model.channel.cfg
    out = np.zeros((len(Li), len(Lj)))
    angle_like = {"theta", "phi"}
    if block_i in angle_like and block_j in angle_like:
        aT, aR = model.A_T, model.A_R
        daT = np.hstack([steering_derivative_angle(cfg.tx, ch.imp_t, a) for a in ch.paths.aod])
        daR = np.hstack([steering_derivative_angle(cfg.rx, ch.imp_r, a) for a in ch.paths.aoa])
        for a, (_, i) in enumerate(Li):
            for b, (_, j) in enumerate(Lj):
                # left factor (conjugated) belongs to parameter i, right to j
                tL = daT[:, i] if block_i == "theta" else aT[:, i]
                rL = aR[:, i] if block_i == "theta" else daR[:, i]
                tR = daT[:, j] if block_j == "theta" else aT[:, j]
                rR = aR[:, j] if block_j == "theta" else daR[:, j]
                M = kron(np.outer(tR.conj(), tL), np.outer(rR, rL.conj()))
                tr = np.trace(GQG @ M)
                out[a, b] = s * sum(np.real(np.conj(model.g[c, i]) * model.g[c, j] * tr) for c in range(model.n_c))
        return out
    if block_i == "g" and block_j == "g":
        aT, aR = model.A_T, model.A_R
        for a, (pi, ci, i) in enumerate(Li):
            for b, (pj, cj, j) in enumerate(Lj):
                if ci != cj:
                    continue
                M = kron(np.outer(aT[:, j].conj(), aT[:, i]), np.outer(aR[:, j], aR[:, i].conj()))
                phase = {("gR", "gR"): 1.0, ("gI", "gI"): 1.0, ("gR", "gI"): 1j, ("gI", "gR"): -1j}[(pi, pj)]
                out[a, b] = s * np.real(np.trace(phase * GQG @ M))
        return out
    if block_i in ("theta", "phi", "g") or block_j in ("theta", "phi", "g"):
        raise ValueError("cross blocks between path and impairment families have no closed form here")
    PwPw = model.Phi_w.conj().T @ model.Phi_w
    for c in range(model.n_c):
        Vi = np.column_stack([_kernel_vector(model, lab, c, Ck, Gk) for lab in Li])
        Vj = np.column_stack([_kernel_vector(model, lab, c, Ck, Gk) for lab in Lj])
        out += s * np.real(Vi.conj().T @ PwPw @ Vj)
    return out


# ---------------------------------------------------------------- total CRLB


@dataclass
class CRLBResult:
    value: float
    per_subcarrier: np.ndarray
    fisher: FisherInfo
    condition_number: float
    rank: int
    block_summary: dict

    def to_dict(self) -> dict:
        return {
            "crlb": self.value,
            "fim_condition_number": self.condition_number,
            "fim_rank": self.rank,
            "n_params": self.fisher.params.size,
            "blocks": self.block_summary,
        }


def total_crlb(model: CRLBModel, rtol: float = 1e-10) -> CRLBResult:
    """``sum_c tr{J(c) I^+ J(c)^*}`` with an eigen-truncated pseudo-inverse."""
    info = fim(model)
    if info.rank < info.params.size:
        warnings.warn(
            f"FIM is rank deficient ({info.rank}/{info.params.size}); using pseudo-inverse",
            RuntimeWarning,
        )
    Iinv = info.pinv(rtol)
    per = np.array(
        [np.real(np.trace(J @ Iinv @ J.conj().T)) for J in (channel_jacobian(model, c) for c in range(model.n_c))]
    )
    diag = np.diag(info.matrix)
    summary = {
        name: {"fim_diag_mean": float(diag[model.params.block(name)].mean()),
               "size": model.params.block(name).stop - model.params.block(name).start}
        for name in model.params.include
    }
    return CRLBResult(float(max(per.sum(), 0.0)), per, info, info.condition_number, info.rank, summary)
