"""Geometric frequency-selective mmWave channels with array impairments."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .arrays import (
    ArraySpec,
    ImpairmentRealization,
    gain_phase_matrix,
    ideal_impairments,
    steering_vector,
)
from .tensor import kron, khatri_rao

__all__ = [
    "ChannelConfig",
    "PathSet",
    "ChannelRealization",
    "raised_cosine",
    "sample_paths",
    "delay_tap",
    "delay_taps",
    "freq_channel",
    "freq_channels",
    "generate_channel",
    "grid_angles",
    "virtual_dictionary",
    "iarm_dictionaries",
]

TS_80211AD = 1.0 / 1.76e9


def raised_cosine(tau, Ts: float = TS_80211AD, beta: float = 0.8):
    """Raised-cosine pulse ``p(tau)`` with unit peak.

    The removable singularities at ``tau = +-Ts / (2 beta)`` are replaced by
    their limit ``(pi / 4) sinc(1 / (2 beta))``.
    """
    if not 0 <= beta <= 1:
        raise ValueError(f"roll-off must be in [0, 1], got {beta}")
    x = np.asarray(tau, dtype=float) / Ts
    main = np.sinc(x)
    if beta == 0:
        return main
    den = 1.0 - (2.0 * beta * x) ** 2
    singular = np.isclose(np.abs(x), 1.0 / (2.0 * beta), rtol=0, atol=1e-12)
    safe_den = np.where(singular, 1.0, den)
    out = np.where(
        singular,
        (np.pi / 4) * np.sinc(1.0 / (2.0 * beta)),
        main * np.cos(np.pi * beta * x) / safe_den,
    )
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ChannelConfig:
    tx: ArraySpec = field(default_factory=lambda: ArraySpec("ULA", 8))
    rx: ArraySpec = field(default_factory=lambda: ArraySpec("ULA", 4))
    n_clusters: int = 6
    rays_per_cluster: int = 1
    ray_spread: float = 0.0
    n_taps: int = 16
    n_subcarriers: int = 16
    Ts: float = TS_80211AD
    rolloff: float = 0.8

    def __post_init__(self):
        if min(self.n_clusters, self.rays_per_cluster, self.n_taps, self.n_subcarriers) < 1:
            raise ValueError("channel counts must be >= 1")

    @property
    def n_paths(self) -> int:
        return self.n_clusters * self.rays_per_cluster


@dataclass
class PathSet:
    """Per-ray angles (radians), complex gains and delays (seconds)."""

    aoa: np.ndarray
    aod: np.ndarray
    gains: np.ndarray
    delays: np.ndarray
    n_clusters: int
    rays_per_cluster: int

    @property
    def n_paths(self) -> int:
        return self.aoa.size

    @property
    def ray_delays(self) -> np.ndarray:
        return np.repeat(self.delays, self.rays_per_cluster)


def sample_paths(cfg: ChannelConfig, seed=None) -> PathSet:
    """Draw angles uniformly in each array's sector, ``CN(0, 1)`` gains and uniform delays."""
    rng = np.random.default_rng(seed)
    nc, nr = cfg.n_clusters, cfg.rays_per_cluster

    def draw(sector):
        lo, hi = sector
        centers = rng.uniform(lo, hi, size=nc)
        offsets = cfg.ray_spread * rng.uniform(-0.5, 0.5, size=(nc, nr))
        return np.clip(centers[:, None] + offsets, lo, hi).reshape(-1)

    aoa = draw(cfg.rx.sector)
    aod = draw(cfg.tx.sector)
    gains = (rng.standard_normal(nc * nr) + 1j * rng.standard_normal(nc * nr)) / np.sqrt(2)
    delays = rng.uniform(0.0, (cfg.n_taps - 1) * cfg.Ts, size=nc)
    return PathSet(aoa, aod, gains, delays, nc, nr)


def _effective_responses(cfg, paths, imp_r, imp_t):
    """``C_R Gamma_R A_R`` and ``C_T Gamma_T A_T`` evaluated at the path angles."""
    R = imp_r.coupling @ gain_phase_matrix(imp_r) @ steering_vector(cfg.rx, imp_r, paths.aoa)
    T = imp_t.coupling @ gain_phase_matrix(imp_t) @ steering_vector(cfg.tx, imp_t, paths.aod)
    return R, T


def _tap_gains(cfg: ChannelConfig, paths: PathSet) -> np.ndarray:
    """Diagonals of the tap gain matrices, shape ``(n_taps, n_paths)``."""
    scale = np.sqrt(cfg.tx.n_antennas * cfg.rx.n_antennas / cfg.n_paths)
    d = np.arange(cfg.n_taps)[:, None]
    p = raised_cosine(d * cfg.Ts - paths.ray_delays[None, :], cfg.Ts, cfg.rolloff)
    return scale * paths.gains[None, :] * p


def delay_tap(d: int, cfg: ChannelConfig, paths: PathSet, imp_r, imp_t) -> np.ndarray:
    """Delay-tap matrix ``H_d = C_R G_R A_R Delta_d A_T^* G_T^* C_T^*``."""
    if not 0 <= d < cfg.n_taps:
        raise ValueError(f"tap index must be in [0, {cfg.n_taps}), got {d}")
    R, T = _effective_responses(cfg, paths, imp_r, imp_t)
    return (R * _tap_gains(cfg, paths)[d]) @ T.conj().T


def delay_taps(cfg: ChannelConfig, paths: PathSet, imp_r, imp_t) -> np.ndarray:
    """All tap matrices stacked as ``(n_taps, N_r, N_t)``."""
    R, T = _effective_responses(cfg, paths, imp_r, imp_t)
    return np.einsum("rp,dp,tp->drt", R, _tap_gains(cfg, paths), T.conj())


def freq_channel(taps, c: int, n_subcarriers: int) -> np.ndarray:
    """``H[c] = sum_d H_d exp(-j 2 pi c d / N_c)``."""
    if not 0 <= c < n_subcarriers:
        raise ValueError(f"subcarrier index must be in [0, {n_subcarriers}), got {c}")
    taps = np.asarray(taps)
    w = np.exp(-2j * np.pi * c * np.arange(taps.shape[0]) / n_subcarriers)
    return np.tensordot(w, taps, axes=(0, 0))


def freq_channels(taps, n_subcarriers: int) -> np.ndarray:
    taps = np.asarray(taps)
    c = np.arange(n_subcarriers)[:, None]
    d = np.arange(taps.shape[0])[None, :]
    return np.tensordot(np.exp(-2j * np.pi * c * d / n_subcarriers), taps, axes=(1, 0))


@dataclass
class ChannelRealization:
    cfg: ChannelConfig
    paths: PathSet
    imp_r: ImpairmentRealization
    imp_t: ImpairmentRealization
    taps: np.ndarray
    freq: np.ndarray

    @property
    def subcarrier_gains(self) -> np.ndarray:
        """Diagonal of ``Delta[c]`` for every subcarrier, shape ``(N_c, n_paths)``."""
        g = _tap_gains(self.cfg, self.paths)
        n_c = self.cfg.n_subcarriers
        w = np.exp(-2j * np.pi * np.outer(np.arange(n_c), np.arange(self.cfg.n_taps)) / n_c)
        return w @ g

    def responses(self):
        return _effective_responses(self.cfg, self.paths, self.imp_r, self.imp_t)

    def vec_freq(self) -> np.ndarray:
        """Columns ``vec(H[c])``, shape ``(N_r N_t, N_c)``."""
        n_c = self.freq.shape[0]
        return self.freq.transpose(2, 1, 0).reshape(-1, n_c)


def generate_channel(
    cfg: ChannelConfig,
    imp_r: ImpairmentRealization | None = None,
    imp_t: ImpairmentRealization | None = None,
    seed=None,
    paths: PathSet | None = None,
) -> ChannelRealization:
    imp_r = imp_r if imp_r is not None else ideal_impairments(cfg.rx.n_antennas)
    imp_t = imp_t if imp_t is not None else ideal_impairments(cfg.tx.n_antennas)
    if paths is None:
        paths = sample_paths(cfg, seed)
    taps = delay_taps(cfg, paths, imp_r, imp_t)
    return ChannelRealization(cfg, paths, imp_r, imp_t, taps, freq_channels(taps, cfg.n_subcarriers))


def grid_angles(spec: ArraySpec, G: int, grid: str = "angle") -> np.ndarray:
    """``G`` quantized angles: uniform in the sector, or uniform in ``sin`` over [-pi/2, pi/2)."""
    i = np.arange(G)
    if grid == "angle":
        lo, hi = spec.sector
        return lo + (hi - lo) * i / G
    if grid == "sine":
        return np.arcsin(-1.0 + 2.0 * i / G)
    raise ValueError(f"unknown grid {grid!r}")


def virtual_dictionary(
    spec: ArraySpec,
    G: int,
    imp: ImpairmentRealization | None = None,
    grid: str = "angle",
    normalize: bool = True,
) -> np.ndarray:
    """Array responses on a ``G``-point angle grid (``n x G``).

    Without ``imp`` this is the ideal array response matrix (IARM).  With
    ``imp`` the columns are ``C Gamma a(angle)`` on the impaired manifold.
    """
    if G < spec.n_antennas:
        raise ValueError(f"grid size {G} must be >= number of antennas {spec.n_antennas}")
    ang = grid_angles(spec, G, grid)
    A = steering_vector(spec, imp, ang)
    if imp is not None:
        A = imp.coupling @ gain_phase_matrix(imp) @ A
        if normalize:
            A = A / np.linalg.norm(A, axis=0)
    return A


def iarm_dictionaries(cfg: ChannelConfig, K_r: int, K_t: int, grid: str = "angle"):
    """Ideal receive/transmit dictionaries and their combined form ``conj(D_T) kron D_R``."""
    D_R = virtual_dictionary(cfg.rx, K_r, grid=grid)
    D_T = virtual_dictionary(cfg.tx, K_t, grid=grid)
    return D_R, D_T, kron(D_T.conj(), D_R)


def channel_from_dictionary(R, T, g) -> np.ndarray:
    """``vec(H) = (conj(T) kr R) g`` helper used by tests and the CRLB code."""
    return khatri_rao(np.conj(T), R) @ g
