"""Sample covariance, its eigendecomposition, and projection bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionError,
    InternalError,
    InvalidBasis,
    InvalidVector,
    SymmetryError,
)
from .model import PopulationModel

__all__ = [
    "SampleSpectrum",
    "sample_covariance",
    "eig_desc",
    "match_spike_indices",
    "projection_norm",
]

_SYM_TOL = 1e-10
_UNIT_TOL = 1e-8


@dataclass
class SampleSpectrum:
    """Eigenvalues in descending order with column-matched eigenvectors."""

    eigenvalues: np.ndarray  # (p,) descending
    eigenvectors: np.ndarray  # (p, p), column j pairs with eigenvalues[j]

    @property
    def p(self) -> int:
        return self.eigenvalues.size


def sample_covariance(t: np.ndarray, x: np.ndarray) -> np.ndarray:
    """B = (1/n) T X X' T', symmetrized against round-off."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise DimensionError(f"T must be square, got shape {t.shape}")
    if x.ndim != 2 or x.shape[0] != t.shape[0]:
        raise DimensionError(
            f"X must be p x n with p = {t.shape[0]}, got shape {x.shape}"
        )
    n = x.shape[1]
    y = t @ x  # (p, n)
    b = (y @ y.T) / n
    return (b + b.T) * 0.5


def eig_desc(b: np.ndarray) -> SampleSpectrum:
    """Descending eigendecomposition of a symmetric matrix."""
    b = np.asarray(b, dtype=float)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise DimensionError(f"need a square matrix, got shape {b.shape}")
    asym = float(np.max(np.abs(b - b.T))) if b.size else 0.0
    if asym > _SYM_TOL:
        raise SymmetryError(f"matrix asymmetry {asym:.3e} exceeds {_SYM_TOL}")
    vals, vecs = np.linalg.eigh(b)
    order = np.argsort(vals)[::-1]
    return SampleSpectrum(eigenvalues=vals[order], eigenvectors=vecs[:, order])


def match_spike_indices(model: PopulationModel) -> dict[int, list[int]]:
    """Sample eigenvalue ranks (0-based) claimed by each spike group.

    Upper groups take the top ranks in descending spike order; lower groups
    fill from the bottom, the smallest spike taking the very last ranks.
    Returns {group_index: [ranks]} with groups numbered by descending value,
    matching PopulationModel.spikes order.
    """
    p = model.p
    top = 0
    bottom = p
    out: dict[int, list[int]] = {}
    # upper groups, largest first, off the top
    for k, s in enumerate(model.spikes):
        if s.side != "upper":
            continue
        out[k] = list(range(top, top + s.multiplicity))
        top += s.multiplicity
    # lower groups, smallest first, off the bottom
    for k in reversed(range(len(model.spikes))):
        s = model.spikes[k]
        if s.side != "lower":
            continue
        out[k] = list(range(bottom - s.multiplicity, bottom))
        bottom -= s.multiplicity
    if top > bottom:
        raise InternalError("spike rank ranges overlap; p too small for M")
    return out


def projection_norm(v_block: np.ndarray, f: np.ndarray) -> float:
    """Squared norm of the projection of sample eigenvector f onto span(v_block).

    v_block is p x m_k with orthonormal columns (one spike group's
    population eigenvectors); f must be unit length.
    """
    v_block = np.asarray(v_block, dtype=float)
    f = np.asarray(f, dtype=float)
    if v_block.ndim == 1:
        v_block = v_block[:, np.newaxis]
    if f.ndim != 1 or f.size != v_block.shape[0]:
        raise InvalidVector(
            f"vector length {f.shape} does not match basis rows {v_block.shape}"
        )
    gram = v_block.T @ v_block
    if not np.allclose(gram, np.eye(v_block.shape[1]), atol=_UNIT_TOL):
        raise InvalidBasis("projection basis columns are not orthonormal")
    nrm = float(f @ f)
    if abs(nrm - 1.0) > _UNIT_TOL:
        raise InvalidVector(f"eigenvector norm {nrm} is not 1 within {_UNIT_TOL}")
    coeffs = v_block.T @ f
    return float(coeffs @ coeffs)
