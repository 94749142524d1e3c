"""Combined and separable dictionaries with unit-norm atoms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import kron


@dataclass
class Dictionary:
    """Either ``Psi`` (combined) or the factor pair ``D_R, D_T`` (separable)."""

    Psi: np.ndarray | None = None
    D_R: np.ndarray | None = None
    D_T: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.Psi is None) == (self.D_R is None or self.D_T is None):
            raise ValueError("give either Psi or both D_R and D_T")

    @classmethod
    def combined(cls, Psi, **prov) -> "Dictionary":
        return cls(Psi=np.asarray(Psi, dtype=complex), provenance=prov)

    @classmethod
    def separable(cls, D_R, D_T, **prov) -> "Dictionary":
        return cls(D_R=np.asarray(D_R, dtype=complex), D_T=np.asarray(D_T, dtype=complex), provenance=prov)

    @property
    def kind(self) -> str:
        return "combined" if self.Psi is not None else "separable"

    @property
    def matrix(self) -> np.ndarray:
        """The combined form; ``conj(D_T) kron D_R`` for separable dictionaries."""
        if self.Psi is not None:
            return self.Psi
        return kron(self.D_T.conj(), self.D_R)

    @property
    def n_atoms(self) -> int:
        return self.matrix.shape[1] if self.Psi is not None else self.D_R.shape[1] * self.D_T.shape[1]

    def max_norm_error(self) -> float:
        mats = [self.Psi] if self.Psi is not None else [self.D_R, self.D_T]
        return max(float(np.max(np.abs(np.linalg.norm(m, axis=0) - 1))) for m in mats)
