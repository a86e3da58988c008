import numpy as np
import pytest

from spikeproj import (
    DimensionError,
    EntryDistribution,
    InvalidBasis,
    TailConditionError,
    draw_entries,
    fourth_moment,
    kappa_x,
    replicate_rng,
)

GAUSS = EntryDistribution("gaussian")


# ----------------------------------------------------------- distribution spec


def test_fourth_moments_are_exact():
    assert fourth_moment(GAUSS) == 3.0
    assert fourth_moment(EntryDistribution("rademacher")) == 1.0
    assert fourth_moment(EntryDistribution("uniform")) == 1.8
    # 3 (v - 2) / (v - 4) after scaling t(v) to unit variance
    assert fourth_moment(EntryDistribution("student_t", dof=6)) == pytest.approx(6.0)
    assert fourth_moment(EntryDistribution("student_t", dof=10)) == pytest.approx(4.0)


def test_unknown_distribution_kind_rejected():
    with pytest.raises(DimensionError):
        EntryDistribution("laplace")


def test_student_t_tail_condition():
    with pytest.raises(TailConditionError):
        EntryDistribution("student_t")
    with pytest.raises(TailConditionError):
        EntryDistribution("student_t", dof=4)
    EntryDistribution("student_t", dof=5)  # boundary is admitted


def test_dof_is_student_t_only():
    with pytest.raises(DimensionError):
        EntryDistribution("gaussian", dof=7)


# ------------------------------------------------------------------ raw draws


def test_rademacher_draws_are_signs():
    x = draw_entries(EntryDistribution("rademacher"), 40, 60, replicate_rng(1, 0))
    assert set(np.unique(x)) == {-1.0, 1.0}


def test_uniform_draws_are_bounded_with_unit_variance():
    x = draw_entries(EntryDistribution("uniform"), 200, 500, replicate_rng(1, 0))
    root3 = np.sqrt(3.0)
    assert np.all(np.abs(x) <= root3)
    assert np.var(x) == pytest.approx(1.0, abs=0.02)
    assert np.mean(x) == pytest.approx(0.0, abs=0.02)


def test_student_t_draws_are_standardized():
    x = draw_entries(
        EntryDistribution("student_t", dof=8), 300, 600, replicate_rng(5, 0)
    )
    assert np.var(x) == pytest.approx(1.0, abs=0.05)
    assert np.mean(x) == pytest.approx(0.0, abs=0.02)


def test_draws_need_positive_dimensions():
    with pytest.raises(DimensionError):
        draw_entries(GAUSS, 0, 5, replicate_rng(1, 0))


# -------------------------------------------------------------------- seeding


def test_replicate_streams_are_reproducible_and_distinct():
    a = draw_entries(GAUSS, 8, 8, replicate_rng(42, 3))
    b = draw_entries(GAUSS, 8, 8, replicate_rng(42, 3))
    c = draw_entries(GAUSS, 8, 8, replicate_rng(42, 4))
    d = draw_entries(GAUSS, 8, 8, replicate_rng(43, 3))
    np.testing.assert_array_equal(a, b)
    assert np.max(np.abs(a - c)) > 1e-6
    assert np.max(np.abs(a - d)) > 1e-6


def test_replicate_stream_ignores_execution_order():
    # replicate 7 drawn cold equals replicate 7 drawn after 0..6
    cold = draw_entries(GAUSS, 5, 5, replicate_rng(9, 7))
    for r in range(8):
        warm = draw_entries(GAUSS, 5, 5, replicate_rng(9, r))
    np.testing.assert_array_equal(cold, warm)


# ------------------------------------------------------ localization constant


def test_kappa_single_axis_column():
    # one fully localized direction: sum u^4 = 1, no cross term
    assert kappa_x(np.eye(4), [0], 1.0) == pytest.approx(-2.0)
    assert kappa_x(np.eye(4), [0], 3.0) == 0.0
    assert kappa_x(np.eye(4), [0], 1.8) == pytest.approx(-1.2)


def test_kappa_axis_pair_adds_per_column():
    assert kappa_x(np.eye(4), [0, 1], 1.0) == pytest.approx(-4.0)


def test_kappa_counts_shared_support_cross_term():
    # two columns living on the same two coordinates: quartic = 1 and the
    # cross term contributes another 1, same total as disjoint axis pairs
    v = np.array([[1.0, 1.0], [1.0, -1.0], [0.0, 0.0]]) / np.sqrt(2.0)
    assert kappa_x(v, [0, 1], 1.0) == pytest.approx(-4.0)


def test_kappa_vanishes_for_delocalized_columns():
    p = 400
    flat = np.ones((p, 1)) / np.sqrt(p)
    assert kappa_x(flat, [0], 1.0) == pytest.approx(-2.0 / p)


def test_kappa_rejects_bad_bases():
    with pytest.raises(InvalidBasis):
        kappa_x(np.ones((4, 2)), [0], 1.0)  # not orthonormal
    with pytest.raises(InvalidBasis):
        kappa_x(np.eye(3), [5], 1.0)  # column out of range
    with pytest.raises(InvalidBasis):
        kappa_x(np.ones(4), [0], 1.0)  # not a matrix
