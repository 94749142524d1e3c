"""Hybrid-architecture compressive training and noise whitening."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import ChannelRealization
from .tensor import kron, pinv, refold

__all__ = [
    "TrainingConfig",
    "TrainingFrames",
    "MeasurementDataset",
    "WhiteningOperator",
    "random_hybrid_matrix",
    "sensing_row_block",
    "make_frames",
    "simulate_training",
    "whitening_operator",
    "stack_locations",
]


@dataclass(frozen=True)
class TrainingConfig:
    M: int = 20
    N_rep: int = 1
    L_t: int = 2
    L_r: int = 2
    N_Q: int = 2
    snr_db: float = 0.0
    P_tr: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if min(self.M, self.N_rep, self.L_t, self.L_r, self.N_Q) < 1:
            raise ValueError("M, N_rep, L_t, L_r and N_Q must all be >= 1")
        if self.P_tr <= 0:
            raise ValueError("P_tr must be positive")

    @property
    def sigma2(self) -> float:
        """Per-sample noise variance ``P_tr / SNR``."""
        return self.P_tr / 10 ** (self.snr_db / 10)

    @property
    def sigma2_eff(self) -> float:
        """Noise variance left after averaging the ``N_rep`` repetitions."""
        return self.sigma2 / self.N_rep


def _quantized_phases(rng, shape, N_Q: int) -> np.ndarray:
    k = rng.integers(0, 2**N_Q, size=shape)
    return np.exp(2j * np.pi * k / 2**N_Q)


def random_hybrid_matrix(n: int, L: int, N_Q: int = 2, seed=None) -> np.ndarray:
    """Constant-modulus ``n x L`` analog beamformer with ``N_Q``-bit phases."""
    if n < 1 or L < 1 or N_Q < 1:
        raise ValueError("n, L and N_Q must be >= 1")
    rng = np.random.default_rng(seed)
    return _quantized_phases(rng, (n, L), N_Q) / np.sqrt(n)


def sensing_row_block(F, q, W) -> np.ndarray:
    """``(q^T F^T kron W^*)``, mapping ``vec(H)`` to ``W^* H F q``."""
    F, W = np.atleast_2d(F), np.atleast_2d(W)
    q = np.asarray(q).reshape(-1)
    if F.shape[1] != q.size:
        raise ValueError(f"F has {F.shape[1]} columns but q has {q.size} entries")
    return kron((F @ q)[None, :], W.conj().T)


@dataclass
class TrainingFrames:
    """Precoders, combiners and pilots shared by every location."""

    F: np.ndarray  # (M, N_t, L_t)
    W: np.ndarray  # (M, N_r, L_r)
    q: np.ndarray  # (M, L_t)
    pilots: np.ndarray  # (M, N_c) unit-modulus QPSK

    @property
    def M(self) -> int:
        return self.F.shape[0]

    @property
    def Phi(self) -> np.ndarray:
        return np.vstack([sensing_row_block(F, q, W) for F, q, W in zip(self.F, self.q, self.W)])

    def whitened(self) -> "TrainingFrames":
        """Frames whose combiners satisfy ``W_i^* W_i = I``."""
        Wn = np.stack([W @ _inv_sqrt_psd(W.conj().T @ W)[0] for W in self.W])
        return replace(self, W=Wn)


def make_frames(
    N_t: int, N_r: int, N_c: int, cfg: TrainingConfig, seed=None
) -> TrainingFrames:
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    F = _quantized_phases(rng, (cfg.M, N_t, cfg.L_t), cfg.N_Q) / np.sqrt(N_t)
    W = _quantized_phases(rng, (cfg.M, N_r, cfg.L_r), cfg.N_Q) / np.sqrt(N_r)
    q = np.sqrt(cfg.P_tr / cfg.L_t) * _quantized_phases(rng, (cfg.M, cfg.L_t), cfg.N_Q)
    pilots = np.exp(1j * (np.pi / 4 + np.pi / 2 * rng.integers(0, 4, size=(cfg.M, N_c))))
    return TrainingFrames(F, W, q, pilots)


def _inv_sqrt_psd(G, rtol: float = 1e-10):
    """Inverse square root of a PSD matrix; eigen-truncated if singular."""
    lam, V = np.linalg.eigh(G)
    keep = lam > rtol * max(lam.max(), 0.0)
    singular = not keep.all()
    inv = np.zeros_like(lam)
    inv[keep] = 1.0 / np.sqrt(lam[keep])
    return (V * inv) @ V.conj().T, singular


@dataclass
class WhiteningOperator:
    blocks: list  # per-frame (L_r x L_r) matrices (W_i^* W_i)^(-1/2)
    singular: bool = False

    @property
    def matrix(self) -> np.ndarray:
        from scipy.linalg import block_diag

        return block_diag(*self.blocks)

    def apply(self, x) -> np.ndarray:
        """Apply blockwise to the rows of ``x`` (``Phi`` or measurements)."""
        x = np.asarray(x)
        L = self.blocks[0].shape[0]
        xs = x.reshape(len(self.blocks), L, -1)
        out = np.einsum("mab,mbk->mak", np.stack(self.blocks), xs)
        return out.reshape(x.shape)


@dataclass
class MeasurementDataset:
    """Measurements of one or more user locations sharing one sensing matrix."""

    frames: TrainingFrames
    Y: list  # per location, (M L_r, N_c)
    cfg: TrainingConfig
    channels: list = field(default_factory=list)

    @property
    def Phi(self) -> np.ndarray:
        return self.frames.Phi

    @property
    def n_locations(self) -> int:
        return len(self.Y)

    @property
    def n_subcarriers(self) -> int:
        return self.Y[0].shape[1]

    @property
    def sigma2(self) -> float:
        return self.cfg.sigma2

    @property
    def sigma2_eff(self) -> float:
        return self.cfg.sigma2_eff

    @property
    def whitening_blocks(self) -> list:
        return [W.conj().T @ W for W in self.frames.W]

    def whitened(self):
        """``(Phi_w, [Y_w^(u)])`` with noise covariance ``sigma2_eff * I``."""
        op = whitening_operator(self)
        return op.apply(self.Phi), [op.apply(Y) for Y in self.Y]

    def stacked(self) -> np.ndarray:
        return np.hstack(self.Y)


def whitening_operator(dataset: MeasurementDataset) -> WhiteningOperator:
    blocks, singular = [], False
    for G in dataset.whitening_blocks:
        R, s = _inv_sqrt_psd(G)
        blocks.append(R)
        singular |= s
    if singular:
        warnings.warn("singular combiner Gram block; using eigen-truncated inverse root", RuntimeWarning)
    return WhiteningOperator(blocks, singular)


def simulate_training(
    channel: ChannelRealization,
    cfg: TrainingConfig,
    frames: TrainingFrames | None = None,
    seed=None,
    noiseless: bool = False,
) -> MeasurementDataset:
    """Spread, transmit, combine and de-spread the training pilots at one location.

    Frame ``i`` is sent ``N_rep`` times with the same ``F_i, W_i, q_i`` and
    pilot; the receiver divides by the pilot and averages the repetitions.
    """
    n_c, n_r, n_t = channel.freq.shape
    if frames is None:
        frames = make_frames(n_t, n_r, n_c, cfg)
    if frames.pilots.shape[1] != n_c:
        raise ValueError("frame pilots do not match the number of subcarriers")
    rng = np.random.default_rng(seed)
    M, L_r = frames.M, frames.W.shape[2]
    # received (before combining) noiseless signal H[c] F_i q_i r_i[c], (M, N_c, N_r)
    Fq = np.einsum("mtl,ml->mt", frames.F, frames.q)
    clean = np.einsum("crt,mt->mcr", channel.freq, Fq) * frames.pilots[:, :, None]
    acc = np.zeros((M, n_c, n_r), dtype=complex)
    std = 0.0 if noiseless else np.sqrt(cfg.sigma2 / 2)
    for _ in range(cfg.N_rep):
        noise = std * (rng.standard_normal(clean.shape) + 1j * rng.standard_normal(clean.shape))
        acc += clean + noise
    avg = acc / cfg.N_rep / frames.pilots[:, :, None]
    y = np.einsum("mrl,mcr->mlc", frames.W.conj(), avg)
    return MeasurementDataset(frames, [y.reshape(M * L_r, n_c)], cfg, [channel])


def stack_locations(datasets) -> MeasurementDataset:
    """Merge single-location datasets that share the same training frames."""
    datasets = list(datasets)
    if not datasets:
        raise ValueError("no datasets to stack")
    ref = datasets[0]
    for d in datasets[1:]:
        same = (
            d.frames.F.shape == ref.frames.F.shape
            and np.array_equal(d.frames.F, ref.frames.F)
            and np.array_equal(d.frames.W, ref.frames.W)
            and np.array_equal(d.frames.q, ref.frames.q)
        )
        if not same:
            raise ValueError("all locations must share the same sensing matrix")
        if d.Y[0].shape != ref.Y[0].shape:
            raise ValueError("measurement dimensions differ between locations")
    Y = [y for d in datasets for y in d.Y]
    chans = [c for d in datasets for c in d.channels]
    return MeasurementDataset(ref.frames, Y, ref.cfg, chans)


def measurement_tensor(Y_stacked, Phi, n_r: int, n_t: int) -> np.ndarray:
    """``refold(Phi^+ Y)`` as an ``(N_r, N_t, columns)`` tensor (mode-3 unfolding transposed)."""
    proj = pinv(Phi) @ Y_stacked
    return refold(proj.T, 3, (n_r, n_t, proj.shape[1]))
