"""Limit law of squared eigenvector projections at detectable spikes.

For a spike d2 of multiplicity m_k, the squared projection of the population
spike space onto a matching sample eigenvector concentrates at

    nu(d2) = 1 / (1 + d2 * rho(d2)),   rho = m1(psi) + psi * m2(psi),

with Gaussian fluctuations of order 1/sqrt(n) whose variance is
theta_k / (1 + d2 rho)^4, where

    theta_k = d2^2 * (2 sigma_k / m_k + kappa * rho^2 / m_k^2),
    sigma_k = m2 + 2 psi m3 + psi^2 m4   (all transforms at psi(d2)).

The variance is that of the group-averaged projection: for multiplicity
m_k the statistic is the mean of ||P f_r||^2 over the group's m_k sample
eigenvectors. Couplings of distinct in-group eigenvectors to any fixed
outside direction are asymptotically independent, so a single projection
fluctuates with m_k times this variance.

kappa is the localization coefficient of `randgen.kappa_x`; it vanishes for
Gaussian entries and for delocalized spike bases.

Every quantity can be evaluated a second time against a finite-p reference
law (aspect ratio p/n and the realized population spectrum with the group's
own eigenvalues removed). At moderate p the neighbouring spike groups,
invisible in the limit law because their weight is O(1/p), dominate both
the centering shift and the variance through (psi - t)^{-4} resonances, so
predictions against the reference law are the ones to compare with data.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InternalError, SpikeNotDetectable
from .model import BulkSpectrum, psi, psi_prime
from .stieltjes import companion_derivatives

__all__ = ["ProjectionLaw", "nu", "nu_prime", "projection_law"]


@dataclass(frozen=True)
class ProjectionLaw:
    """Asymptotic law of one spike group's squared projections."""

    spike: float
    multiplicity: int
    kappa: float
    psi: float  # limit outlier location
    psi_n: float  # finite-p outlier location (equals psi if no reference law)
    center_limit: float  # nu at the limit law
    center_n: float  # center against the finite-p reference law
    rho_k: float
    sigma_k: float
    theta_k: float
    variance: float  # CLT variance of sqrt(n) (proj - center), limit law
    variance_n: float  # same, against the finite-p reference law


def _require_detectable(d2: float, c: float, bulk: BulkSpectrum) -> None:
    slope = psi_prime(d2, c, bulk)
    if slope <= 0.0:
        raise SpikeNotDetectable(
            f"spike {d2} is below the detection threshold at c = {c} "
            f"(psi slope {slope:.6g} <= 0)"
        )


def _rho(d2: float, c: float, bulk: BulkSpectrum) -> tuple[float, float, float]:
    """(psi, rho, m2) at the spike; rho = m1 + psi m2 evaluated at psi(d2)."""
    z = psi(d2, c, bulk)
    m1, m2, _, _ = companion_derivatives(z, c, bulk)
    return z, m1 + z * m2, m2


def nu(d2: float, c: float, bulk: BulkSpectrum) -> float:
    """Limiting squared projection 1 / (1 + d2 rho(d2)).

    Raises SpikeNotDetectable when psi'(d2) <= 0: below the phase
    transition the sample eigenvector carries no signal and the law
    degenerates.
    """
    _require_detectable(d2, c, bulk)
    _, rho, _ = _rho(d2, c, bulk)
    return 1.0 / (1.0 + d2 * rho)


def nu_prime(d2: float, c: float, bulk: BulkSpectrum) -> float:
    """d nu / d d2, by the chain rule through psi (no finite differences).

    rho'(d2) = psi'(d2) * (2 m2 + 2 psi m3), since m1' = m2 and
    (psi m2)' = psi'(m2 + 2 psi m3) along z = psi(d2).
    """
    _require_detectable(d2, c, bulk)
    z = psi(d2, c, bulk)
    m1, m2, m3, _ = companion_derivatives(z, c, bulk)
    rho = m1 + z * m2
    slope = psi_prime(d2, c, bulk)
    rho_d = slope * (2.0 * m2 + 2.0 * z * m3)
    return -(rho + d2 * rho_d) / (1.0 + d2 * rho) ** 2


def _law_at(
    d2: float, m_k: int, kappa: float, c: float, bulk: BulkSpectrum
) -> tuple[float, float, float, float, float, float]:
    """(psi, rho, sigma, theta, center, variance) under one population law."""
    _require_detectable(d2, c, bulk)
    z = psi(d2, c, bulk)
    m1, m2, m3, m4 = companion_derivatives(z, c, bulk)
    rho = m1 + z * m2
    sigma = m2 + 2.0 * z * m3 + z**2 * m4
    if sigma <= 0.0:
        raise InternalError(
            f"sigma = {sigma} not positive at d2 = {d2}; transform branch broken"
        )
    theta = d2**2 * (2.0 * sigma / m_k + kappa * rho**2 / m_k**2)
    center = 1.0 / (1.0 + d2 * rho)
    return z, rho, sigma, theta, center, theta * center**4


def projection_law(
    d2: float,
    m_k: int,
    kappa: float,
    c: float,
    bulk: BulkSpectrum,
    c_n: float | None = None,
    bulk_n: BulkSpectrum | None = None,
) -> ProjectionLaw:
    """Full first-order law for one spike group.

    The limit quantities use (c, bulk). When (c_n, bulk_n) is supplied,
    typically c_n = p/n and bulk_n the realized population law with this
    group's own eigenvalues removed, psi_n, center_n and variance_n are
    recomputed against it. The reported rho/sigma/theta stay those of the
    limit law.
    """
    if m_k < 1:
        raise InternalError(f"multiplicity must be >= 1, got {m_k}")
    z, rho, sigma, theta, center, variance = _law_at(d2, m_k, kappa, c, bulk)

    if (c_n is None) != (bulk_n is None):
        raise InternalError("supply both c_n and bulk_n, or neither")
    if bulk_n is not None:
        z_n, _, _, _, center_n, variance_n = _law_at(d2, m_k, kappa, c_n, bulk_n)
    else:
        z_n, center_n, variance_n = z, center, variance

    return ProjectionLaw(
        spike=float(d2),
        multiplicity=int(m_k),
        kappa=float(kappa),
        psi=z,
        psi_n=z_n,
        center_limit=center,
        center_n=center_n,
        rho_k=rho,
        sigma_k=sigma,
        theta_k=theta,
        variance=variance,
        variance_n=variance_n,
    )
