"""Entry distributions, seeded draws, and the localization coefficient.

All distributions are standardized (mean 0, variance 1) and need a finite
fourth moment with room to spare; Student-t is admitted only for dof >= 5.
Seeding is explicit everywhere: same seed, same bytes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidBasis, TailConditionError

__all__ = [
    "EntryDistribution",
    "draw_entries",
    "fourth_moment",
    "kappa_x",
    "replicate_rng",
]

_SQRT3 = float(np.sqrt(3.0))

_KINDS = ("gaussian", "rademacher", "uniform", "student_t")


@dataclass(frozen=True)
class EntryDistribution:
    """Standardized entry law for the data matrix X.

    kind = "gaussian"   N(0, 1)
    kind = "rademacher" +-1 with equal probability
    kind = "uniform"    uniform on [-sqrt(3), sqrt(3)]
    kind = "student_t"  t(dof) scaled to unit variance, dof >= 5
    """

    kind: str
    dof: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise DimensionError(
                f"unknown entry distribution {self.kind!r}, expected one of {_KINDS}"
            )
        if self.kind == "student_t":
            if self.dof is None:
                raise TailConditionError("student_t needs a dof parameter")
            if self.dof < 5:
                raise TailConditionError(
                    f"student_t dof must be >= 5 for usable fourth-moment control, "
                    f"got {self.dof}"
                )
        elif self.dof is not None:
            raise DimensionError(f"{self.kind} takes no dof parameter")


def fourth_moment(dist: EntryDistribution) -> float:
    """Exact E[x^4] of the standardized law."""
    if dist.kind == "gaussian":
        return 3.0
    if dist.kind == "rademacher":
        return 1.0
    if dist.kind == "uniform":
        # E[u^4] on [-a, a] is a^4/5; with a = sqrt(3): 9/5
        return 1.8
    # student_t: t(v) has E[t^4] = 3 v^2 / ((v-2)(v-4)); scaling by
    # sqrt((v-2)/v) to unit variance leaves 3 (v-2) / (v-4)
    v = float(dist.dof)
    return 3.0 * (v - 2.0) / (v - 4.0)


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    """Independent stream for one Monte Carlo replicate.

    Streams are spawned from SeedSequence(seed, spawn_key=(replicate,)), so
    replicate r's draws do not depend on how many replicates run, in what
    order, or on how work is split across processes.
    """
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(replicate,)))
    )


def draw_entries(
    dist: EntryDistribution, p: int, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw a p x n matrix of iid standardized entries."""
    if p < 1 or n < 1:
        raise DimensionError(f"need positive dimensions, got p={p}, n={n}")
    if dist.kind == "gaussian":
        return rng.standard_normal((p, n))
    if dist.kind == "rademacher":
        return rng.integers(0, 2, size=(p, n)).astype(float) * 2.0 - 1.0
    if dist.kind == "uniform":
        return rng.uniform(-_SQRT3, _SQRT3, size=(p, n))
    v = float(dist.dof)
    return rng.standard_t(v, size=(p, n)) * np.sqrt((v - 2.0) / v)


def kappa_x(u1: np.ndarray, group_cols, ex4: float) -> float:
    """Localization coefficient of one spike group.

    kappa = (sum_i sum_t u_{ti}^4 + sum_{i1 != i2} sum_t u_{ti1}^2 u_{ti2}^2)
            * (E[x^4] - 3),
    where i runs over `group_cols` (column indices into the p x M basis
    `u1`) and t over coordinates. Zero for Gaussian entries, and O(1/p)
    whenever the group's columns are delocalized.
    """
    u1 = np.asarray(u1, dtype=float)
    if u1.ndim != 2:
        raise InvalidBasis(f"basis must be a 2d array, got shape {u1.shape}")
    p, m = u1.shape
    gram = u1.T @ u1
    if not np.allclose(gram, np.eye(m), atol=1e-8):
        raise InvalidBasis("basis columns are not orthonormal within 1e-8")
    cols = list(group_cols)
    if any(i < 0 or i >= m for i in cols):
        raise InvalidBasis(f"column indices {cols} out of range for {m} columns")
    if len(set(cols)) != len(cols):
        raise InvalidBasis(f"duplicate column indices {cols}")

    block = u1[:, cols]  # (p, m_k)
    sq = block**2
    quartic = float(np.sum(block**4))
    cross = float(np.sum(sq.T @ sq)) - float(np.sum(sq * sq))
    return (quartic + cross) * (ex4 - 3.0)
