"""Companion Stieltjes transform of the bulk sample law, and its inverses.

For a bulk population law H (finite atom mixture) and aspect ratio c = p/n,
the companion transform m(z) of the limiting sample law solves the fixed
point

    z = zeta(m) := -1/m + c * sum_t w_t * t / (1 + t m).

Outside the bulk support the equation has a unique real solution on the
spike-inversion half line m < 0 with zeta'(m) > 0; that root satisfies
m(psi(d2)) = -1/d2 for every detectable spike d2. At non-detectable spikes
(possible only when c >= 1 pushes psi(d2) below zero) the package follows
the analytic continuation through the bulk: the unique remaining real root
on m < 0, which keeps the inversion identity exact there as well. Points
with no m < 0 root are inside the bulk support. The sub-bulk gap (0, lower
edge) that opens when c > 1 has its Stieltjes branch at m > 0 and is not
part of this calculus; no psi value or sample outlier lands there.

Derivatives come from implicit differentiation of the fixed point, never
from finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import (
    BranchError,
    DivergentEstimate,
    InsideSupportError,
    NoBulkError,
    SingularityError,
)
from .model import BulkSpectrum

__all__ = [
    "TransformPoint",
    "EmpiricalTransform",
    "companion_m",
    "companion_derivatives",
    "bulk_moments",
    "transform_point",
    "multiroot_filter",
    "empirical_m",
    "estimate_spike",
]

_RESIDUAL_TOL = 1e-12
_CLUSTER_ARM = 0.2  # relative gap below which eigenvalues cluster together


# --------------------------------------------------------------------------
# fixed point and its m-derivatives
# --------------------------------------------------------------------------


def _zeta(m: float, c: float, t: np.ndarray, w: np.ndarray) -> float:
    return -1.0 / m + c * float(np.sum(w * t / (1.0 + t * m)))


def _zeta_prime(m: float, c: float, t: np.ndarray, w: np.ndarray) -> float:
    return 1.0 / m**2 - c * float(np.sum(w * t**2 / (1.0 + t * m) ** 2))


def _zeta_second(m: float, c: float, t: np.ndarray, w: np.ndarray) -> float:
    return -2.0 / m**3 + 2.0 * c * float(np.sum(w * t**3 / (1.0 + t * m) ** 3))


def _zeta_third(m: float, c: float, t: np.ndarray, w: np.ndarray) -> float:
    return 6.0 / m**4 - 6.0 * c * float(np.sum(w * t**4 / (1.0 + t * m) ** 4))


def _negative_intervals(t: np.ndarray) -> list[tuple[float, float]]:
    """Open intervals of m < 0 between the poles {-1/t_j} and 0."""
    poles = sorted(-1.0 / tj for tj in t)  # ascending, all negative
    intervals = [(-np.inf, poles[0])]
    for a, b in zip(poles[:-1], poles[1:]):
        intervals.append((a, b))
    intervals.append((poles[-1], 0.0))
    return intervals


def _interval_grid(a: float, b: float) -> np.ndarray:
    """Sample points clustered toward both endpoints (poles of zeta)."""
    if np.isinf(a):
        # unbounded to the left: geometric sweep of distances below b
        scale = max(abs(b), 1.0)
        s = scale * np.logspace(-13.0, 13.0, 160)
        return (b - s)[::-1]
    width = b - a
    s = width * np.logspace(-13.0, np.log10(0.5), 80)
    pts = np.concatenate([a + s, (b - s)[::-1]])
    return np.unique(pts)


def _roots_in_interval(
    z: float, c: float, t: np.ndarray, w: np.ndarray, a: float, b: float
) -> list[float]:
    grid = _interval_grid(a, b)
    vals = np.array([_zeta(m, c, t, w) - z for m in grid])
    ok = np.isfinite(vals)
    grid, vals = grid[ok], vals[ok]
    roots = []
    for i in range(len(grid) - 1):
        v0, v1 = vals[i], vals[i + 1]
        if v0 == 0.0:
            roots.append(float(grid[i]))
            continue
        if v0 * v1 < 0.0:
            r = brentq(
                lambda m: _zeta(m, c, t, w) - z,
                grid[i],
                grid[i + 1],
                xtol=1e-15,
                rtol=8.9e-16,
                maxiter=200,
            )
            roots.append(float(r))
    if vals.size and vals[-1] == 0.0:
        roots.append(float(grid[-1]))
    # Just outside a support edge the two real roots coalesce; a close pair
    # can dip through zero between consecutive grid points without changing
    # sign at either. Refine interior extrema that point toward zero and
    # split any dip that crosses into its two bracketed roots.
    f = lambda m: _zeta(m, c, t, w) - z
    for i in range(1, len(grid) - 1):
        v0, v1, v2 = vals[i - 1], vals[i], vals[i + 1]
        if v0 * v1 <= 0.0 or v1 * v2 <= 0.0:
            continue  # the crossing scan above already covers this cell
        if not (abs(v1) < abs(v0) and abs(v1) < abs(v2)):
            continue
        sgn = 1.0 if v1 > 0.0 else -1.0
        res = minimize_scalar(
            lambda m: sgn * f(m),
            bounds=(grid[i - 1], grid[i + 1]),
            method="bounded",
            options={"xatol": 1e-14},
        )
        m_star = float(res.x)
        f_star = sgn * float(res.fun)
        if f_star == 0.0:
            roots.append(m_star)
        elif f_star * v1 < 0.0:
            for lo, hi in ((grid[i - 1], m_star), (m_star, grid[i + 1])):
                r = brentq(f, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)
                roots.append(float(r))
    return roots


def _polish(m: float, z: float, c: float, t: np.ndarray, w: np.ndarray) -> float:
    for _ in range(3):
        slope = _zeta_prime(m, c, t, w)
        if slope == 0.0 or not np.isfinite(slope):
            break
        step = (_zeta(m, c, t, w) - z) / slope
        if not np.isfinite(step) or m - step >= 0.0:
            break
        m -= step
    return m


def companion_m(z: float, c: float, bulk: BulkSpectrum) -> float:
    """Real companion transform value m(z) on the spike-inversion branch.

    Raises InsideSupportError when z lies inside the bulk sample support
    (no real root with m < 0), and BranchError if a unique branch cannot
    be isolated (does not happen for finite atom mixtures away from
    support edges).
    """
    z = float(z)
    if c < 0:
        raise BranchError(f"aspect ratio must be >= 0, got {c}")
    if c == 0.0:
        if z == 0.0:
            raise InsideSupportError("transform undefined at z = 0 when c = 0")
        return -1.0 / z

    t, w = bulk.values, bulk.weights
    candidates: list[float] = []
    for a, b in _negative_intervals(t):
        candidates.extend(_roots_in_interval(z, c, t, w, a, b))

    candidates = [_polish(m, z, c, t, w) for m in candidates]
    # drop duplicates from adjacent brackets
    uniq: list[float] = []
    for m in sorted(candidates):
        if not uniq or abs(m - uniq[-1]) > 1e-13 * max(1.0, abs(m)):
            uniq.append(m)

    rising = [m for m in uniq if _zeta_prime(m, c, t, w) > 0.0]
    if len(rising) == 1:
        root = rising[0]
    elif len(rising) > 1:
        raise BranchError(
            f"multiple rising-branch roots at z = {z}: {rising}; support edge?"
        )
    elif not uniq:
        raise InsideSupportError(
            f"z = {z} lies inside the bulk sample support (no inversion root)"
        )
    else:
        # analytic continuation at a non-detectable spike: psi(d2) < 0 and
        # the fixed point keeps a unique falling root on the outermost
        # interval, still satisfying m(psi(d2)) = -1/d2
        if z >= 0.0:
            raise InsideSupportError(
                f"z = {z} lies inside the bulk sample support "
                "(only falling-branch roots found)"
            )
        root = uniq[0]  # most negative root, the lower-spike continuation

    if abs(_zeta(root, c, t, w) - z) > _RESIDUAL_TOL * max(1.0, abs(z)):
        raise BranchError(f"fixed-point residual too large at z = {z}")
    return float(root)


def companion_derivatives(
    z: float, c: float, bulk: BulkSpectrum
) -> tuple[float, float, float, float]:
    """(m1, m2, m3, m4): value and Taylor coefficients of m at z.

    m(z + h) = m1 + m2 h + m3 h^2 + m4 h^3 + O(h^4); equivalently
    m2 = m', m3 = m''/2, m4 = m'''/6, all by implicit differentiation of
    the fixed point, so they inherit the root's machine accuracy.
    """
    m = companion_m(z, c, bulk)
    if c == 0.0:
        return m, 1.0 / z**2, -1.0 / z**3, 1.0 / z**4
    t, w = bulk.values, bulk.weights
    zp = _zeta_prime(m, c, t, w)
    if zp == 0.0 or not np.isfinite(zp):
        raise BranchError(f"degenerate branch slope at z = {z}")
    zpp = _zeta_second(m, c, t, w)
    zppp = _zeta_third(m, c, t, w)
    m2 = 1.0 / zp
    m3 = -zpp / (2.0 * zp**3)
    m4 = (3.0 * zpp**2 - zp * zppp) / (6.0 * zp**5)
    return m, m2, m3, m4


# --------------------------------------------------------------------------
# moments of the bulk sample law itself
# --------------------------------------------------------------------------


def bulk_moments(
    z: float, c: float, bulk: BulkSpectrum
) -> tuple[float, float, float, float]:
    """(m1, m2, m3, resolvent_sq) of the bulk sample law F at real z.

    m1 = integral x/(z-x) dF, m2 = integral x^2/(z-x)^2 dF,
    m3 = integral x/(z-x)^2 dF, resolvent_sq = integral 1/(x-z)^2 dF.
    Uses s_F = (m + (1-c)/z)/c, exact for every c > 0 including c >= 1
    (the point mass F puts at zero when c > 1 is inside s_F already);
    c = 0 reduces to moments of H.
    """
    z = float(z)
    if z == 0.0:
        raise SingularityError("bulk moments undefined at z = 0")
    if c == 0.0:
        t, w = bulk.values, bulk.weights
        s = float(np.sum(w / (t - z)))
        sp = float(np.sum(w / (t - z) ** 2))
    else:
        m1c, m2c, _, _ = companion_derivatives(z, c, bulk)
        s = (m1c + (1.0 - c) / z) / c
        sp = (m2c - (1.0 - c) / z**2) / c
    bm1 = -1.0 - z * s
    bm2 = 1.0 + 2.0 * z * s + z**2 * sp
    bm3 = s + z * sp
    return bm1, bm2, bm3, sp


@dataclass(frozen=True)
class TransformPoint:
    """Companion transform and bulk-law moments evaluated at one point z."""

    z: float
    m1: float
    m2: float
    m3: float
    m4: float
    bulk_m1: float
    bulk_m2: float
    bulk_m3: float
    resolvent_sq: float


def transform_point(z: float, c: float, bulk: BulkSpectrum) -> TransformPoint:
    m1, m2, m3, m4 = companion_derivatives(z, c, bulk)
    bm1, bm2, bm3, rsq = bulk_moments(z, c, bulk)
    return TransformPoint(
        z=float(z),
        m1=m1,
        m2=m2,
        m3=m3,
        m4=m4,
        bulk_m1=bm1,
        bulk_m2=bm2,
        bulk_m3=bm3,
        resolvent_sq=rsq,
    )


# --------------------------------------------------------------------------
# empirical transform from one observed spectrum
# --------------------------------------------------------------------------


def multiroot_filter(eigenvalues, target_index: int) -> list[int]:
    """Indices clustered with the target eigenvalue (target included).

    Eigenvalues i and j cluster when |l_i - l_j| / max(l_i, l_j) <= 0.2;
    clustered neighbors are near-degenerate outliers of the same spike
    group and must not feed the empirical transform's bulk sum.
    """
    l = np.asarray(eigenvalues, dtype=float)
    if l.ndim != 1 or l.size == 0:
        raise NoBulkError(f"need a 1d eigenvalue array, got shape {l.shape}")
    if not 0 <= target_index < l.size:
        raise IndexError(f"target index {target_index} out of range for {l.size}")
    li = l[target_index]
    denom = np.maximum(np.abs(l), abs(li))
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.abs(l - li) / denom
    rel[denom == 0.0] = 0.0  # both zero: identical, cluster together
    members = np.nonzero(rel <= _CLUSTER_ARM)[0]
    return sorted(int(j) for j in members)


@dataclass(frozen=True)
class EmpiricalTransform:
    """Plug-in companion transform at one sample outlier."""

    target_index: int
    target_value: float
    excluded: tuple[int, ...]
    c_tilde: float
    m_hat: float
    m_underline_hat: float


def empirical_m(eigenvalues, target_index: int, n: int) -> EmpiricalTransform:
    """Empirical companion transform at eigenvalue `target_index`.

    m_hat averages 1/(l_j - l_target) over non-clustered eigenvalues;
    the companion value uses the cluster-corrected aspect ratio
    c_tilde = (p - |cluster|) / n.
    """
    l = np.asarray(eigenvalues, dtype=float)
    cluster = multiroot_filter(l, target_index)
    keep = np.setdiff1d(np.arange(l.size), np.array(cluster, dtype=int))
    if keep.size < 1:
        raise NoBulkError(
            "every eigenvalue clusters with the target; no bulk left to average"
        )
    li = float(l[target_index])
    if li == 0.0:
        raise DivergentEstimate("target eigenvalue is zero; no outlier to invert")
    diffs = l[keep] - li
    if np.any(diffs == 0.0):
        raise DivergentEstimate(f"non-clustered eigenvalue equals target {li}")
    m_hat = float(np.mean(1.0 / diffs))
    c_tilde = keep.size / float(n)
    m_under = -(1.0 - c_tilde) / li + c_tilde * m_hat
    return EmpiricalTransform(
        target_index=int(target_index),
        target_value=li,
        excluded=tuple(cluster),
        c_tilde=c_tilde,
        m_hat=m_hat,
        m_underline_hat=m_under,
    )


def estimate_spike(eigenvalues, target_index: int, n: int) -> float:
    """Spike estimate -1 / m_underline_hat at one sample outlier."""
    emp = empirical_m(eigenvalues, target_index, n)
    mu = emp.m_underline_hat
    if not np.isfinite(mu) or mu == 0.0:
        raise DivergentEstimate(f"empirical companion transform {mu} unusable")
    d2 = -1.0 / mu
    if d2 <= 0.0:
        raise DivergentEstimate(
            f"estimate {d2} is not a positive spike; target sits inside the bulk"
        )
    return d2
