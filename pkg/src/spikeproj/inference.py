"""Pivotal test for a hypothesized spike eigenspace.

Null: the population spike direction equals a given unit vector v. The
statistic compares the observed squared projection of v onto the matching
sample eigenvector with its asymptotic center nu, scales by the spike, and
studentizes with the plug-in variance

    vartheta(d2) = tau(d2) * G(psi),
    tau = (nu')^2 * ((1 - c)/psi^2 + c * integral (x - psi)^{-2} dF(x)),
    G   = Var(R) / (1 + c * m3(psi) * d2)^2,
    Var(R) = (2 theta + beta * omega) * d2^2,
    theta = 1 + 2 c m1(psi) + c m2(psi),
    omega = 1 + 2 c m1(psi) + (c (1 + m1) / (psi - c (1 + m1)))^2,

with beta = E[x^4] - 3 the entry excess kurtosis and m1, m2, m3 the bulk
moments of `stieltjes.bulk_moments`. Everything is evaluated at the spike
estimate (adaptive mode, the default) or at a supplied true spike (oracle
mode); sqrt(n) * T1 / sqrt(vartheta) is asymptotically standard normal
either way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import InvalidBasis, SpikeNotDetectable, VarianceError
from .model import BulkSpectrum, psi
from .asymptotics import nu, nu_prime
from .spectral import SampleSpectrum, projection_norm
from .stieltjes import bulk_moments, estimate_spike

__all__ = [
    "Hypothesis",
    "TestOutcome",
    "theta_omega",
    "vartheta",
    "statistic_T",
    "statistic_T1",
    "statistic_T2",
]


@dataclass(frozen=True)
class Hypothesis:
    """Hypothesized spike directions at given sample ranks.

    index_set: sample eigenvalue ranks (0-based) the spikes should occupy.
    projector_basis: p x |J| matrix, column j is the hypothesized direction
    for index_set[j]; columns must be orthonormal.
    """

    index_set: tuple[int, ...]
    projector_basis: np.ndarray

    def __post_init__(self) -> None:
        basis = np.asarray(self.projector_basis, dtype=float)
        if basis.ndim == 1:
            basis = basis[:, np.newaxis]
        object.__setattr__(self, "projector_basis", basis)
        if len(self.index_set) != basis.shape[1]:
            raise InvalidBasis(
                f"{len(self.index_set)} indices but {basis.shape[1]} basis columns"
            )
        if len(set(self.index_set)) != len(self.index_set):
            raise InvalidBasis(f"duplicate indices in {self.index_set}")
        gram = basis.T @ basis
        if not np.allclose(gram, np.eye(basis.shape[1]), atol=1e-8):
            raise InvalidBasis("hypothesis basis columns are not orthonormal")


@dataclass(frozen=True)
class TestOutcome:
    t1: float
    t2: float
    p_value: float
    reject: bool
    level: float
    spike_estimate: float
    vartheta: float
    mode: str  # "adaptive" | "oracle"


def theta_omega(psi1: float, c: float, bulk: BulkSpectrum) -> tuple[float, float]:
    """(theta, omega) entering Var(R) at outlier location psi1."""
    m1, m2, _, _ = bulk_moments(psi1, c, bulk)
    theta = 1.0 + 2.0 * c * m1 + c * m2
    lever = c * (1.0 + m1)
    denom = psi1 - lever
    if denom == 0.0:
        raise VarianceError(f"omega undefined: psi = {psi1} equals c (1 + m1)")
    omega = 1.0 + 2.0 * c * m1 + (lever / denom) ** 2
    return theta, omega


def vartheta(d2: float, c: float, bulk: BulkSpectrum, ex4: float = 3.0) -> float:
    """Variance of sqrt(n) T1: tau(d2) * G(psi(d2)).

    Raises VarianceError when d2 sits in the non-detectable window (the
    plug-in breaks down there) or the assembled variance is not positive.
    """
    try:
        z = psi(d2, c, bulk)
        nup = nu_prime(d2, c, bulk)
        center = nu(d2, c, bulk)
    except SpikeNotDetectable as exc:
        raise VarianceError(
            f"spike value {d2} is inside the detection transition window"
        ) from exc
    _, _, m3, rsq = bulk_moments(z, c, bulk)
    theta, omega = theta_omega(z, c, bulk)
    beta = ex4 - 3.0
    var_r = (2.0 * theta + beta * omega) * d2**2
    shrink = 1.0 + c * m3 * d2
    g = var_r / shrink**2
    tau = nup**2 * ((1.0 - c) / z**2 + c * rsq)
    out = tau * g
    if not np.isfinite(out) or out <= 0.0:
        raise VarianceError(
            f"assembled test variance {out} is not positive at d2 = {d2} "
            f"(entry fourth moment {ex4}); center was {center:.6g}"
        )
    return out


def statistic_T(
    spectrum: SampleSpectrum,
    hypothesis: Hypothesis,
    spike_estimates: dict[int, float],
    c: float,
    bulk: BulkSpectrum,
) -> float:
    """Unnormalized eigenspace statistic sum_i (<v_i, P v_i> - nu(d2_i)).

    P projects on the sample eigenvectors at the hypothesis ranks;
    `spike_estimates` maps each rank to its (estimated or known) spike.
    Raises IndexError when a rank has no estimate or is out of range.
    """
    p = spectrum.p
    total = 0.0
    basis = hypothesis.projector_basis
    f_block = []
    for rank in hypothesis.index_set:
        if not 0 <= rank < p:
            raise IndexError(f"rank {rank} out of range for p = {p}")
        f_block.append(spectrum.eigenvectors[:, rank])
    f_block = np.column_stack(f_block)  # (p, |J|)
    for j, rank in enumerate(hypothesis.index_set):
        if rank not in spike_estimates:
            raise IndexError(f"no spike estimate supplied for rank {rank}")
        v = basis[:, j]
        proj = projection_norm(f_block, v / np.linalg.norm(v))
        total += proj - nu(spike_estimates[rank], c, bulk)
    return total


def statistic_T1(
    v1: np.ndarray,
    f1: np.ndarray,
    d2_scale: float,
    d2_plug: float,
    c: float,
    bulk: BulkSpectrum,
) -> float:
    """(<v1, f1>^2 - nu(d2_plug)) / d2_scale.

    d2_plug feeds the center (the spike estimate in adaptive use), d2_scale
    the normalization (the same estimate, or the true spike in oracle use).
    """
    if d2_scale <= 0.0:
        raise VarianceError(f"scale spike must be positive, got {d2_scale}")
    proj = float(np.dot(v1, f1)) ** 2
    return (proj - nu(d2_plug, c, bulk)) / d2_scale


def statistic_T2(
    spectrum: SampleSpectrum,
    n: int,
    hypothesis: Hypothesis,
    c: float,
    bulk: BulkSpectrum,
    ex4: float = 3.0,
    level: float = 0.05,
    mode: str = "adaptive",
    d2_oracle: float | None = None,
) -> TestOutcome:
    """Studentized single-direction eigenspace test.

    Estimates the spike from the sample eigenvalue at the hypothesis rank,
    centers and studentizes the squared projection, and compares the
    two-sided p-value against `level`. Adaptive mode (default) plugs the
    estimate everywhere; oracle mode uses `d2_oracle` in both the scale and
    the variance, keeping the estimate only for reporting.
    """
    if len(hypothesis.index_set) != 1:
        raise InvalidBasis(
            "the studentized test handles one direction; "
            f"got {len(hypothesis.index_set)} indices"
        )
    if mode not in ("adaptive", "oracle"):
        raise VarianceError(f"unknown mode {mode!r}")
    if mode == "oracle" and d2_oracle is None:
        raise VarianceError("oracle mode needs d2_oracle")
    if not 0.0 < level < 1.0:
        raise VarianceError(f"level must be in (0, 1), got {level}")

    rank = hypothesis.index_set[0]
    d2_hat = estimate_spike(spectrum.eigenvalues, rank, n)
    d2_use = d2_hat if mode == "adaptive" else float(d2_oracle)

    v1 = hypothesis.projector_basis[:, 0]
    f1 = spectrum.eigenvectors[:, rank]
    try:
        t1 = statistic_T1(v1, f1, d2_use, d2_use, c, bulk)
    except SpikeNotDetectable as exc:
        raise VarianceError(
            f"plug-in spike {d2_use} fell inside the detection window"
        ) from exc
    vt = vartheta(d2_use, c, bulk, ex4=ex4)
    t2 = float(np.sqrt(n) * t1 / np.sqrt(vt))
    p_value = 2.0 * float(norm.sf(abs(t2)))
    return TestOutcome(
        t1=float(t1),
        t2=t2,
        p_value=p_value,
        reject=bool(p_value < level),
        level=float(level),
        spike_estimate=float(d2_hat),
        vartheta=float(vt),
        mode=mode,
    )
