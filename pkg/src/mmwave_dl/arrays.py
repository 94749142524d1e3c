"""Array manifolds (ULA/UCA), hardware impairments and their derivatives.

Distances are measured in carrier wavelengths, so ``lambda = 1`` everywhere.
Spacing errors are stored as position offsets ``eps[m-1]`` of element ``m``
(``m = 1..n-1``) relative to its nominal location; element 0 is the reference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ArraySpec",
    "ImpairmentProfile",
    "ImpairmentRealization",
    "ideal_impairments",
    "sample_impairments",
    "coupling_from_coefficients",
    "element_positions",
    "steering_vector",
    "steering_derivative_angle",
    "steering_derivative_spacing",
    "gain_phase_matrix",
    "coupling_derivative",
    "coupling_parameters",
    "DEFAULT_PROFILE",
    "IDEAL_PROFILE",
]

GEOMETRIES = ("ULA", "UCA")


@dataclass(frozen=True)
class ArraySpec:
    geometry: str = "ULA"
    n_antennas: int = 8
    nominal_spacing: float = 0.5
    sector: tuple[float, float] = (-np.pi / 3, np.pi / 3)

    def __post_init__(self):
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"geometry must be one of {GEOMETRIES}, got {self.geometry!r}")
        if self.n_antennas < 1:
            raise ValueError("n_antennas must be >= 1")
        if self.nominal_spacing <= 0:
            raise ValueError("nominal_spacing must be positive")
        lo, hi = self.sector
        if not (-np.pi <= lo < hi <= np.pi):
            raise ValueError(f"sector {self.sector} must lie within [-pi, pi]")

    @property
    def radius(self) -> float:
        """UCA radius giving an arc spacing of ``nominal_spacing`` between neighbours."""
        return self.n_antennas * self.nominal_spacing / (2 * np.pi)


@dataclass(frozen=True)
class ImpairmentProfile:
    """Statistics used when drawing an :class:`ImpairmentRealization`.

    ``spacing_jitter`` is the half-width of the uniform distribution of each
    inter-element gap around the nominal spacing.  Coupling magnitudes are
    log-uniform in ``coupling_range``; a zero upper bound disables coupling.
    """

    gain_std: float = 0.05
    phase_std: float = np.deg2rad(20.0)
    spacing_jitter: float = 0.1
    coupling_range: tuple[float, float] = (0.01, 0.4)

    def __post_init__(self):
        lo, hi = self.coupling_range
        if min(self.gain_std, self.phase_std, self.spacing_jitter, lo, hi) < 0:
            raise ValueError("impairment magnitudes must be nonnegative")
        if hi > 0 and not (0 < lo <= hi):
            raise ValueError("coupling_range must satisfy 0 < lo <= hi")


DEFAULT_PROFILE = ImpairmentProfile()
IDEAL_PROFILE = ImpairmentProfile(0.0, 0.0, 0.0, (0.0, 0.0))


def _complex_to_json(z) -> list:
    z = np.asarray(z, dtype=complex)
    return np.stack([z.real, z.imag], axis=-1).tolist()


def _complex_from_json(v) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


@dataclass
class ImpairmentRealization:
    spacing_errors: np.ndarray
    gains: np.ndarray
    phases: np.ndarray
    coupling: np.ndarray
    structure: str = "toeplitz"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.spacing_errors = np.asarray(self.spacing_errors, dtype=float).reshape(-1)
        self.gains = np.asarray(self.gains, dtype=float).reshape(-1)
        self.phases = np.asarray(self.phases, dtype=float).reshape(-1)
        self.coupling = np.asarray(self.coupling, dtype=complex)
        n = self.gains.size
        if self.spacing_errors.size != max(n - 1, 0) or self.phases.size != n:
            raise ValueError("inconsistent impairment vector lengths")
        if self.coupling.shape != (n, n):
            raise ValueError("coupling matrix must be n x n")
        if np.any(self.gains <= 0):
            raise ValueError("gains must be positive")
        if not np.allclose(np.diag(self.coupling), 1.0):
            raise ValueError("coupling matrix must have a unit diagonal")

    @property
    def n(self) -> int:
        return self.gains.size

    @property
    def offsets(self) -> np.ndarray:
        """Per-element position offsets including the zero reference element."""
        return np.concatenate([[0.0], self.spacing_errors])

    def to_dict(self) -> dict:
        return {
            "spacing_errors": self.spacing_errors.tolist(),
            "gains": self.gains.tolist(),
            "phases": self.phases.tolist(),
            "coupling": _complex_to_json(self.coupling),
            "structure": self.structure,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ImpairmentRealization":
        return cls(
            spacing_errors=d["spacing_errors"],
            gains=d["gains"],
            phases=d["phases"],
            coupling=_complex_from_json(d["coupling"]),
            structure=d.get("structure", "toeplitz"),
            meta=d.get("meta", {}),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "ImpairmentRealization":
        return cls.from_dict(json.loads(s))


def ideal_impairments(n: int, structure: str = "toeplitz") -> ImpairmentRealization:
    return ImpairmentRealization(
        np.zeros(max(n - 1, 0)), np.ones(n), np.zeros(n), np.eye(n, dtype=complex), structure
    )


def coupling_from_coefficients(n: int, coeffs, structure: str = "toeplitz") -> np.ndarray:
    """Build a unit-diagonal symmetric coupling matrix.

    ``toeplitz``: ``coeffs[k-1]`` sits on the +-k-th diagonals (``k = 1..n-1``).
    ``circulant``: ``coeffs[k-1]`` couples elements at circular distance ``k``
    (``k = 1..n//2``).
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    idx = np.arange(n)
    if structure == "toeplitz":
        lag = np.abs(idx[:, None] - idx[None, :])
    elif structure == "circulant":
        d = np.abs(idx[:, None] - idx[None, :])
        lag = np.minimum(d, n - d)
    else:
        raise ValueError(f"unknown coupling structure {structure!r}")
    table = np.concatenate([[1.0 + 0j], coeffs])
    if lag.max(initial=0) >= table.size:
        raise ValueError(f"need {lag.max()} coupling coefficients, got {coeffs.size}")
    return table[lag]


def sample_impairments(
    spec: ArraySpec, rng_seed=None, profile: ImpairmentProfile = DEFAULT_PROFILE
) -> ImpairmentRealization:
    """Draw gain/phase errors, spacing perturbations and mutual coupling.

    Gains are ``1 + gain_std * N(0, 1)`` and phases ``phase_std * N(0, 1)``.
    Each gap is uniform in ``nominal +- spacing_jitter``.  Coupling follows a
    symmetric Toeplitz (ULA) or circulant (UCA) pattern whose magnitudes are
    log-uniform in ``coupling_range`` and decay with element distance.
    """
    rng = np.random.default_rng(rng_seed)
    n = spec.n_antennas
    gains = 1.0 + profile.gain_std * rng.standard_normal(n)
    # keep gains physical for extreme draws
    gains = np.maximum(gains, 1e-3)
    phases = profile.phase_std * rng.standard_normal(n)
    gaps = spec.nominal_spacing + rng.uniform(
        -profile.spacing_jitter, profile.spacing_jitter, size=max(n - 1, 0)
    )
    spacing_errors = np.cumsum(gaps) - spec.nominal_spacing * np.arange(1, n)

    structure = "toeplitz" if spec.geometry == "ULA" else "circulant"
    n_coeffs = n - 1 if structure == "toeplitz" else n // 2
    lo, hi = profile.coupling_range
    if hi > 0 and n_coeffs > 0:
        mags = np.exp(rng.uniform(np.log(lo), np.log(hi), size=n_coeffs))
        mags = np.sort(mags)[::-1]
        coeffs = mags * np.exp(2j * np.pi * rng.uniform(size=n_coeffs))
    else:
        coeffs = np.zeros(n_coeffs, dtype=complex)
    coupling = coupling_from_coefficients(n, coeffs, structure)
    return ImpairmentRealization(spacing_errors, gains, phases, coupling, structure)


def element_positions(spec: ArraySpec, imp: ImpairmentRealization | None = None) -> np.ndarray:
    """ULA: positions along the axis.  UCA: angular positions in radians."""
    n = spec.n_antennas
    off = np.zeros(n) if imp is None else imp.offsets
    if spec.geometry == "ULA":
        return np.arange(n) * spec.nominal_spacing + off
    return 2 * np.pi * np.arange(n) / n + off / spec.radius


def _angles(angle):
    a = np.asarray(angle, dtype=float)
    return a.reshape(-1), a.ndim == 0


def steering_vector(spec: ArraySpec, imp: ImpairmentRealization | None, angle) -> np.ndarray:
    """Unit-norm array response, ``n x 1`` for a scalar angle or ``n x P`` for P angles."""
    ang, _ = _angles(angle)
    n = spec.n_antennas
    pos = element_positions(spec, imp)
    if spec.geometry == "ULA":
        phase = -2j * np.pi * pos[:, None] * np.sin(ang)[None, :]
    else:
        kr = 2 * np.pi * spec.radius
        phase = 1j * kr * np.cos(ang[None, :] - pos[:, None])
    return np.exp(phase) / np.sqrt(n)


def steering_derivative_angle(spec: ArraySpec, imp: ImpairmentRealization | None, angle) -> np.ndarray:
    """Derivative of :func:`steering_vector` with respect to the angle."""
    ang, _ = _angles(angle)
    a = steering_vector(spec, imp, ang)
    pos = element_positions(spec, imp)
    if spec.geometry == "ULA":
        return -2j * np.pi * pos[:, None] * np.cos(ang)[None, :] * a
    kr = 2 * np.pi * spec.radius
    return -1j * kr * np.sin(ang[None, :] - pos[:, None]) * a


def steering_derivative_spacing(
    spec: ArraySpec, imp: ImpairmentRealization | None, angle, j: int
) -> np.ndarray:
    """Derivative with respect to the position offset of element ``j`` (1-based gap index).

    Only entry ``j`` is nonzero.
    """
    n = spec.n_antennas
    if not 1 <= j <= n - 1:
        raise ValueError(f"gap index must be in [1, {n - 1}], got {j}")
    ang, _ = _angles(angle)
    a = steering_vector(spec, imp, ang)
    out = np.zeros_like(a)
    if spec.geometry == "ULA":
        out[j] = -2j * np.pi * np.sin(ang) * a[j]
    else:
        pos = element_positions(spec, imp)
        out[j] = 2j * np.pi * np.sin(ang - pos[j]) * a[j]
    return out


def gain_phase_matrix(imp: ImpairmentRealization) -> np.ndarray:
    return np.diag(imp.gains * np.exp(1j * imp.phases))


def coupling_parameters(n: int, structure: str = "symmetric") -> list[tuple[int, int]]:
    """Independent coupling parameters as 1-based ``(i, j)`` pairs."""
    if structure == "symmetric":
        return [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    if structure == "toeplitz":
        return [(1, 1 + k) for k in range(1, n)]
    if structure == "circulant":
        return [(1, 1 + k) for k in range(1, n // 2 + 1)]
    raise ValueError(f"unknown coupling structure {structure!r}")


def coupling_derivative(n: int, i: int, j: int, structure: str = "symmetric") -> np.ndarray:
    """Indicator matrix of the entries of ``C`` driven by coefficient ``c_{i,j}``.

    Indices are 1-based with ``i < j``.  Under the ``toeplitz``/``circulant``
    conventions only pairs ``(1, 1 + k)`` are free parameters; any other pair
    yields a zero matrix.
    """
    if not (1 <= i < j <= n):
        raise ValueError(f"need 1 <= i < j <= {n}, got ({i}, {j})")
    out = np.zeros((n, n))
    if structure == "symmetric":
        out[i - 1, j - 1] = out[j - 1, i - 1] = 1.0
        return out
    if (i, j) not in coupling_parameters(n, structure):
        return out
    k = j - i
    e = np.zeros(n - 1 if structure == "toeplitz" else n // 2, dtype=complex)
    e[k - 1] = 1.0
    return (coupling_from_coefficients(n, e, structure) - np.eye(n)).real
