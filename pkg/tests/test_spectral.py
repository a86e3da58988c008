import numpy as np
import pytest

from spikeproj import (
    BulkSpectrum,
    DimensionError,
    EntryDistribution,
    InvalidBasis,
    InvalidVector,
    Rotation,
    SymmetryError,
    build_model,
    draw_entries,
    eig_desc,
    factorize,
    match_spike_indices,
    nu,
    projection_norm,
    psi,
    replicate_rng,
    sample_covariance,
)


# ------------------------------------------------------------ covariance + eig


def test_sample_covariance_small_exact():
    t = np.eye(2)
    x = np.array([[1.0, -1.0, 2.0], [0.0, 1.0, 1.0]])
    b = sample_covariance(t, x)
    np.testing.assert_allclose(b, (x @ x.T) / 3.0)
    np.testing.assert_array_equal(b, b.T)


def test_sample_covariance_applies_the_factor():
    t = np.diag([2.0, 1.0])
    x = np.array([[1.0, 1.0], [1.0, -1.0]])
    np.testing.assert_allclose(sample_covariance(t, x), np.diag([4.0, 1.0]))


def test_sample_covariance_shape_checks():
    with pytest.raises(DimensionError):
        sample_covariance(np.ones((2, 3)), np.ones((2, 4)))
    with pytest.raises(DimensionError):
        sample_covariance(np.eye(2), np.ones((3, 4)))


def test_eig_desc_orders_and_pairs():
    spec = eig_desc(np.diag([1.0, 5.0, 3.0]))
    np.testing.assert_array_equal(spec.eigenvalues, [5.0, 3.0, 1.0])
    # column j carries eigenvalue j: check via the Rayleigh quotient
    b = np.diag([1.0, 5.0, 3.0])
    for j in range(3):
        v = spec.eigenvectors[:, j]
        assert v @ b @ v == pytest.approx(spec.eigenvalues[j])
    assert spec.p == 3


def test_eig_desc_rejects_asymmetry():
    m = np.array([[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(SymmetryError):
        eig_desc(m)


# ------------------------------------------------------------- rank bookkeeping


def test_match_spike_indices_top_and_bottom():
    model = build_model(
        [(4.0, 1), (3.0, 2), (0.2, 2), (0.1, 1)], BulkSpectrum.single(1.0), 12
    )
    ranks = match_spike_indices(model)
    assert ranks[0] == [0]
    assert ranks[1] == [1, 2]
    assert ranks[2] == [9, 10]  # second-smallest group sits above the smallest
    assert ranks[3] == [11]
    claimed = sorted(r for v in ranks.values() for r in v)
    assert len(set(claimed)) == len(claimed)


def test_match_spike_indices_upper_only():
    model = build_model([(9.0, 2), (5.0, 1)], BulkSpectrum.single(1.0), 8)
    assert match_spike_indices(model) == {0: [0, 1], 1: [2]}


# ------------------------------------------------------------- projection norm


def test_projection_norm_exact_plane():
    block = np.eye(4)[:, :2]
    f = np.array([0.6, 0.8, 0.0, 0.0])
    assert projection_norm(block, f) == pytest.approx(1.0)
    f = np.array([0.6, 0.0, 0.8, 0.0])
    assert projection_norm(block, f) == pytest.approx(0.36)
    assert projection_norm(block, np.eye(4)[:, 3]) == 0.0


def test_projection_norm_accepts_a_single_vector_block():
    v = np.array([1.0, 0.0, 0.0])
    f = np.array([0.0, 1.0, 0.0])
    assert projection_norm(v, f) == 0.0


def test_projection_norm_input_checks():
    with pytest.raises(InvalidBasis):
        projection_norm(np.ones((3, 2)), np.array([1.0, 0.0, 0.0]))
    with pytest.raises(InvalidVector):
        projection_norm(np.eye(3)[:, :1], np.array([2.0, 0.0, 0.0]))
    with pytest.raises(InvalidVector):
        projection_norm(np.eye(3)[:, :1], np.eye(4)[:, 0])


# ------------------------------------------------------------- one-shot physics


def test_top_eigenpair_lands_where_the_theory_says():
    # single detectable spike: the top sample eigenvalue sits near psi and
    # the top sample eigenvector leans on e1 with squared overlap near nu
    bulk = BulkSpectrum.single(1.0)
    model = build_model([(4.0, 1)], bulk, 40, Rotation("identity"))
    dec = factorize(model)
    x = draw_entries(EntryDistribution("gaussian"), 40, 400, replicate_rng(3, 0))
    spec = eig_desc(sample_covariance(dec.T, x))
    c = 0.1
    assert spec.eigenvalues[0] == pytest.approx(psi(4.0, c, bulk), rel=0.08)
    overlap = projection_norm(dec.V1[:, 0], spec.eigenvectors[:, 0])
    assert overlap == pytest.approx(nu(4.0, c, bulk), abs=0.06)
