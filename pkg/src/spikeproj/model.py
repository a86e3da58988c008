"""Population model: spikes riding on a finite-atom bulk spectrum.

The population covariance is Sigma = T T' where T = V diag(D1, D2) U'.
Spike eigenvalues (with small fixed multiplicities) sit outside the range
of the bulk atoms; the bulk is a finite mixture of point masses whose count
grows with dimension p. T carries square roots: a spike d2 on Sigma appears
as sqrt(d2) on T's singular values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateSpikes,
    DimensionError,
    InternalError,
    SingularityError,
)

__all__ = [
    "SpikeSpec",
    "BulkSpectrum",
    "Rotation",
    "PopulationModel",
    "FactorDecomposition",
    "SpikeValidation",
    "build_model",
    "factorize",
    "psi",
    "psi_prime",
    "validate_spikes",
    "empirical_population_law",
]

_WEIGHT_TOL = 1e-12


# --------------------------------------------------------------------------
# types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SpikeSpec:
    """One spike group: eigenvalue `value` with multiplicity `multiplicity`.

    `side` records where the value sits relative to the bulk atoms:
    "upper" strictly above the largest atom, "lower" strictly below the
    smallest. Detectability is a separate question (see `validate_spikes`).
    """

    value: float
    multiplicity: int
    side: str  # "upper" | "lower"


@dataclass(frozen=True)
class BulkSpectrum:
    """Finite atom mixture H = sum_t weight_t * delta(value_t).

    Atoms are stored in descending value order. Weights must sum to one.
    """

    atoms: tuple[tuple[float, float], ...]  # ((value, weight), ...)

    def __post_init__(self) -> None:
        if not self.atoms:
            raise DimensionError("bulk spectrum needs at least one atom")
        vals = [v for v, _ in self.atoms]
        wts = [w for _, w in self.atoms]
        if any(v <= 0 for v in vals):
            raise DimensionError(f"bulk atom values must be positive, got {vals}")
        if any(w <= 0 for w in wts):
            raise DimensionError(f"bulk atom weights must be positive, got {wts}")
        if len(set(vals)) != len(vals):
            raise DegenerateSpikes(f"bulk atoms must be distinct, got {vals}")
        if abs(sum(wts) - 1.0) > _WEIGHT_TOL:
            raise DimensionError(
                f"bulk weights must sum to 1 within {_WEIGHT_TOL}, got {sum(wts)!r}"
            )
        ordered = tuple(sorted(self.atoms, key=lambda a: -a[0]))
        object.__setattr__(self, "atoms", ordered)

    @classmethod
    def single(cls, value: float = 1.0) -> "BulkSpectrum":
        return cls(atoms=((value, 1.0),))

    @classmethod
    def from_pairs(cls, pairs) -> "BulkSpectrum":
        return cls(atoms=tuple((float(v), float(w)) for v, w in pairs))

    @property
    def values(self) -> np.ndarray:  # (A,)
        return np.array([v for v, _ in self.atoms], dtype=float)

    @property
    def weights(self) -> np.ndarray:  # (A,)
        return np.array([w for _, w in self.atoms], dtype=float)

    @property
    def max_atom(self) -> float:
        return self.atoms[0][0]

    @property
    def min_atom(self) -> float:
        return self.atoms[-1][0]


@dataclass(frozen=True)
class Rotation:
    """How the factor T mixes coordinates.

    kind = "identity":            T is diagonal, eigenvectors are axis vectors.
    kind = "bidiagonal":          orthogonal factor of the QR decomposition of
                                  the symmetric tridiagonal matrix with unit
                                  diagonal and `tau` off the diagonal; mixes
                                  neighboring coordinates, fully deterministic.
    kind = "random_orthogonal":   Haar-distributed orthogonal matrix drawn from
                                  `seed`; delocalizes every eigenvector.
    """

    kind: str = "identity"
    tau: float = 0.5
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("identity", "bidiagonal", "random_orthogonal"):
            raise DimensionError(f"unknown rotation kind {self.kind!r}")
        if self.kind == "random_orthogonal" and self.seed is None:
            raise DimensionError("random_orthogonal rotation needs a seed")


@dataclass(frozen=True)
class PopulationModel:
    """Validated spike + bulk description at dimension p."""

    spikes: tuple[SpikeSpec, ...]  # descending value order
    bulk: BulkSpectrum
    p: int
    rotation: Rotation = field(default_factory=Rotation)

    @property
    def total_spike_count(self) -> int:
        return sum(s.multiplicity for s in self.spikes)

    @property
    def group_count(self) -> int:
        return len(self.spikes)


@dataclass
class FactorDecomposition:
    """T = V diag(D1, D2) U' with the spike block leading.

    D1 holds sqrt of spike slot values (length M), D2 sqrt of bulk slot
    values (length p - M). `spike_slots` and `bulk_slots` are the population
    eigenvalues of Sigma = T T' in slot order.
    """

    T: np.ndarray  # (p, p)
    V: np.ndarray  # (p, p) orthogonal
    U: np.ndarray  # (p, p) orthogonal
    D1: np.ndarray  # (M,)
    D2: np.ndarray  # (p - M,)
    spike_slots: np.ndarray  # (M,)   spike eigenvalues, group order
    bulk_slots: np.ndarray  # (p - M,) bulk eigenvalues, descending atoms
    group_slices: tuple[slice, ...]  # slot range of each spike group

    @property
    def V1(self) -> np.ndarray:  # (p, M) population spike eigenvectors
        return self.V[:, : self.D1.size]

    @property
    def U1(self) -> np.ndarray:  # (p, M) right factor columns for the spikes
        return self.U[:, : self.D1.size]


@dataclass(frozen=True)
class SpikeValidation:
    """Report row for one spike group under aspect ratio c."""

    value: float
    multiplicity: int
    side: str
    psi_value: float
    psi_slope: float
    detectable: bool


# --------------------------------------------------------------------------
# construction
# --------------------------------------------------------------------------


def build_model(
    spikes,
    bulk: BulkSpectrum,
    p: int,
    rotation: Rotation | None = None,
) -> PopulationModel:
    """Validate and assemble a population model.

    Parameters
    ----------
    spikes : iterable of (value, multiplicity)
        Spike eigenvalues of Sigma with their multiplicities. Values must be
        distinct, positive, outside the closed bulk atom range.
    bulk : BulkSpectrum
    p : int
        Dimension; must leave room for at least one bulk slot (p >= M + 1).
    rotation : Rotation, optional
    """
    pairs = [(float(v), int(m)) for v, m in spikes]
    if not pairs:
        raise DegenerateSpikes("need at least one spike")
    for v, m in pairs:
        if v <= 0:
            raise DegenerateSpikes(f"spike values must be positive, got {v}")
        if m < 1:
            raise DegenerateSpikes(f"multiplicities must be >= 1, got {m} for {v}")
    vals = [v for v, _ in pairs]
    if len(set(vals)) != len(vals):
        raise DegenerateSpikes(f"spike values must be distinct, got {vals}")

    hi, lo = bulk.max_atom, bulk.min_atom
    tagged = []
    for v, m in sorted(pairs, key=lambda t: -t[0]):
        if any(v == a for a in bulk.values):
            raise SingularityError(
                f"spike {v} coincides with a bulk atom; psi would be singular"
            )
        if v > hi:
            side = "upper"
        elif v < lo:
            side = "lower"
        else:
            raise DegenerateSpikes(
                f"spike {v} lies inside the bulk atom range [{lo}, {hi}]; "
                "interior spikes have no outlier rank and are not supported"
            )
        tagged.append(SpikeSpec(value=v, multiplicity=m, side=side))

    total = sum(s.multiplicity for s in tagged)
    if p < total + 1:
        raise DimensionError(
            f"p = {p} leaves no bulk slot for M = {total} spike directions"
        )
    return PopulationModel(
        spikes=tuple(tagged),
        bulk=bulk,
        p=int(p),
        rotation=rotation if rotation is not None else Rotation(),
    )


def _bulk_slot_counts(bulk: BulkSpectrum, slots: int) -> list[int]:
    """Integer atom counts for `slots` bulk positions, largest remainder.

    Leftover slots (from rounding) go to the smallest atoms first, so a
    half/half two-atom bulk with an odd slot count puts the extra slot on
    the smaller atom.
    """
    raw = [w * slots for w in bulk.weights]
    counts = [int(np.floor(r)) for r in raw]
    leftover = slots - sum(counts)
    # order candidate atoms by remainder (desc), breaking ties toward the
    # smaller atom value (atoms are stored descending, so larger index wins)
    order = sorted(
        range(len(counts)),
        key=lambda i: (-(raw[i] - counts[i]), -i),
    )
    for i in order[:leftover]:
        counts[i] += 1
    if any(c < 0 for c in counts) or sum(counts) != slots:
        raise InternalError("bulk slot allocation failed")
    return counts


def _fixed_sign_q(a: np.ndarray) -> np.ndarray:
    """Orthogonal QR factor with R's diagonal forced positive (deterministic)."""
    q, r = np.linalg.qr(a)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs[np.newaxis, :]


def _rotation_matrix(rotation: Rotation, p: int) -> np.ndarray:
    if rotation.kind == "identity":
        return np.eye(p)
    if rotation.kind == "bidiagonal":
        gamma = np.eye(p)
        off = np.full(p - 1, rotation.tau)
        gamma += np.diag(off, k=1) + np.diag(off, k=-1)
        return _fixed_sign_q(gamma)
    # random_orthogonal
    rng = np.random.default_rng(rotation.seed)
    return _fixed_sign_q(rng.standard_normal((p, p)))


def factorize(model: PopulationModel) -> FactorDecomposition:
    """Build T = V diag(D1, D2) U' realizing the declared spectrum exactly.

    Slot layout: spike groups first (descending value, multiplicity copies
    each), then bulk atoms (descending value, counts from the largest
    remainder rule). With identity rotation U = V = I and T is diagonal;
    otherwise U = V = Q for the rotation's orthogonal Q, so Sigma = T T'
    has eigenvalues exactly equal to the slot values with eigenvectors Q's
    columns.
    """
    p, m_total = model.p, model.total_spike_count

    spike_slots = []
    group_slices = []
    pos = 0
    for s in model.spikes:
        spike_slots.extend([s.value] * s.multiplicity)
        group_slices.append(slice(pos, pos + s.multiplicity))
        pos += s.multiplicity
    spike_slots = np.array(spike_slots, dtype=float)

    counts = _bulk_slot_counts(model.bulk, p - m_total)
    bulk_slots = np.repeat(model.bulk.values, counts)

    d1 = np.sqrt(spike_slots)
    d2 = np.sqrt(bulk_slots)
    diag = np.concatenate([d1, d2])

    q = _rotation_matrix(model.rotation, p)
    if model.rotation.kind == "identity":
        t = np.diag(diag)
    else:
        t = (q * diag[np.newaxis, :]) @ q.T

    decomp = FactorDecomposition(
        T=t,
        V=q,
        U=q,
        D1=d1,
        D2=d2,
        spike_slots=spike_slots,
        bulk_slots=bulk_slots,
        group_slices=tuple(group_slices),
    )

    # spectrum round trip: eig(T T') must match the declared slot multiset
    declared = np.sort(np.concatenate([spike_slots, bulk_slots]))
    realized = np.sort(np.linalg.eigvalsh(t @ t.T))
    scale = max(declared[-1], 1.0)
    if np.max(np.abs(declared - realized)) > 1e-8 * scale:
        raise InternalError(
            "factorization does not reproduce the declared spectrum; "
            f"max deviation {np.max(np.abs(declared - realized)):.3e}"
        )
    return decomp


# --------------------------------------------------------------------------
# the spike-to-outlier map psi
# --------------------------------------------------------------------------


def _check_psi_args(d2: float, c: float, bulk: BulkSpectrum) -> None:
    if d2 <= 0:
        raise SingularityError(f"psi needs a positive argument, got {d2}")
    if c < 0:
        raise DimensionError(f"aspect ratio c must be >= 0, got {c}")
    if np.any(bulk.values == d2):
        raise SingularityError(f"psi({d2}) hits a bulk atom, transform undefined")


def psi(d2: float, c: float, bulk: BulkSpectrum) -> float:
    """Outlier location map: psi(d2) = d2 (1 + c * sum_t w_t t / (d2 - t)).

    For a detectable spike d2, the matching sample eigenvalue converges to
    psi(d2). Defined for any d2 off the atoms; detectability is the sign of
    `psi_prime`.
    """
    d2 = float(d2)
    _check_psi_args(d2, c, bulk)
    t, w = bulk.values, bulk.weights
    return d2 * (1.0 + c * float(np.sum(w * t / (d2 - t))))


def psi_prime(d2: float, c: float, bulk: BulkSpectrum) -> float:
    """Derivative of `psi`; positive exactly when the spike is detectable."""
    d2 = float(d2)
    _check_psi_args(d2, c, bulk)
    t, w = bulk.values, bulk.weights
    frac = w * t / (d2 - t)
    return 1.0 + c * float(np.sum(frac)) - c * d2 * float(np.sum(frac / (d2 - t)))


def validate_spikes(model: PopulationModel, c: float) -> list[SpikeValidation]:
    """Detectability report for every spike group at aspect ratio c.

    Report only: non-detectable spikes are flagged, not rejected, since a
    model can legitimately carry sub-threshold spikes.
    """
    rows = []
    for s in model.spikes:
        slope = psi_prime(s.value, c, model.bulk)
        rows.append(
            SpikeValidation(
                value=s.value,
                multiplicity=s.multiplicity,
                side=s.side,
                psi_value=psi(s.value, c, model.bulk),
                psi_slope=slope,
                detectable=slope > 0.0,
            )
        )
    return rows


def empirical_population_law(
    decomp: FactorDecomposition, exclude_group: int | None = None
) -> BulkSpectrum:
    """Uniform law on the realized population eigenvalues.

    With `exclude_group` = k (0-based index into the model's descending
    group order), the m_k eigenvalues of that spike group are removed and
    the law is uniform on the remaining p - m_k slot values. This is the
    finite-p reference law used for finite-sample centering: the evaluated
    group must not contribute an atom at its own location.
    """
    slots = [decomp.spike_slots, decomp.bulk_slots]
    if exclude_group is not None:
        sl = decomp.group_slices[exclude_group]
        keep = np.ones(decomp.spike_slots.size, dtype=bool)
        keep[sl] = False
        slots = [decomp.spike_slots[keep], decomp.bulk_slots]
    values = np.concatenate(slots)
    uniq, counts = np.unique(values, return_counts=True)
    total = values.size
    pairs = [(float(v), float(n) / total) for v, n in zip(uniq, counts)]
    return BulkSpectrum.from_pairs(pairs)
