import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deconfound import diagnostics
from deconfound.errors import DegenerateDataError, ShapeError, ValidationError


def brute_force_hausdorff(A, B):
    d = np.sqrt(((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2))
    return max(d.min(axis=1).max(), d.min(axis=0).max())


class TestPropensitySummary:
    def test_point_mass_single_bin(self):
        p = np.full(8, 0.5)
        t = np.tile([0, 1], 4)
        edges, treated, control, extreme = diagnostics.propensity_summary(p, t)
        assert treated.sum() == 4 and control.sum() == 4
        assert (treated > 0).sum() == 1 and (control > 0).sum() == 1
        assert extreme == 0.0

    def test_extreme_fraction_half(self):
        p = np.array([0.005, 0.5, 0.995, 0.5])
        t = np.array([0, 1, 1, 0])
        *_, extreme = diagnostics.propensity_summary(p, t)
        assert extreme == 0.5

    def test_empty_arm_rejected(self):
        with pytest.raises(DegenerateDataError):
            diagnostics.propensity_summary(np.full(4, 0.5), np.ones(4, dtype=int))

    def test_out_of_range_rejected(self):
        with pytest.raises(ValidationError):
            diagnostics.propensity_summary(np.array([1.5, 0.5]), np.array([0, 1]))

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            diagnostics.propensity_summary(np.full(3, 0.5), np.array([0, 1]))


class TestMinMaxStandardize:
    def test_definition(self):
        out = diagnostics.min_max_standardize(np.array([[2.0], [4.0], [6.0]]))
        np.testing.assert_array_equal(out[:, 0], [0.0, 0.5, 1.0])

    def test_identity_on_unit_range(self):
        col = np.array([[0.0], [0.25], [1.0]])
        np.testing.assert_array_equal(diagnostics.min_max_standardize(col), col)

    def test_constant_column_convention(self):
        out = diagnostics.min_max_standardize(np.full((3, 1), 3.0))
        np.testing.assert_array_equal(out[:, 0], [0.5, 0.5, 0.5])


class TestIoss:
    def test_identical_supports_zero(self):
        q = np.array([[0.1], [0.4], [0.9], [0.1], [0.4], [0.9]])
        t = np.array([1, 1, 1, 0, 0, 0])
        assert diagnostics.ioss(q, t) == 0.0

    def test_one_dimensional_hand_value(self):
        # after min-max standardization the arm supports are {0, .25, .5}
        # and {.5, .75, 1}; directed distances are both 0.5
        q = np.array([[0.0], [0.25], [0.5], [0.5], [0.75], [1.0]])
        t = np.array([1, 1, 1, 0, 0, 0])
        assert diagnostics.ioss(q, t) == 0.5

    def test_label_swap_symmetry(self):
        rng = np.random.default_rng(0)
        q = rng.normal(size=(40, 2))
        t = rng.integers(2, size=40)
        if t.sum() in (0, 40):
            t[0] = 1 - t[0]
        assert diagnostics.ioss(q, t) == diagnostics.ioss(q, 1 - t)

    def test_row_permutation_invariance(self):
        rng = np.random.default_rng(1)
        q = rng.normal(size=(30, 2))
        t = np.tile([0, 1], 15)
        perm = rng.permutation(30)
        assert diagnostics.ioss(q, t) == pytest.approx(
            diagnostics.ioss(q[perm], t[perm]), abs=1e-12)

    def test_monotone_separation_on_grids(self):
        values = []
        for b in [0.3, 0.5, 0.7, 0.9]:
            arm1 = np.linspace(0.0, 0.3, 8)
            arm0 = np.linspace(b, 1.0, 8)
            q = np.concatenate([arm1, arm0])[:, None]
            t = np.array([1] * 8 + [0] * 8)
            values.append(diagnostics.ioss(q, t))
        assert all(x <= y + 1e-12 for x, y in zip(values, values[1:]))

    def test_single_arm_rejected(self):
        with pytest.raises(DegenerateDataError):
            diagnostics.ioss(np.zeros((4, 1)), np.ones(4, dtype=int))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 3), st.integers(4, 30))
    def test_matches_brute_force(self, seed, d, n_per_arm):
        rng = np.random.default_rng(seed)
        q = rng.normal(size=(2 * n_per_arm, d))
        t = np.array([1] * n_per_arm + [0] * n_per_arm)
        std = diagnostics.min_max_standardize(q)
        expected = brute_force_hausdorff(std[:n_per_arm], std[n_per_arm:]) / np.sqrt(d)
        assert diagnostics.ioss(q, t) == expected

    def test_in_unit_interval(self):
        rng = np.random.default_rng(9)
        q = rng.normal(size=(60, 3))
        t = np.tile([0, 1], 30)
        assert 0.0 <= diagnostics.ioss(q, t) <= 1.0


class TestReport:
    def test_counts_sum_per_arm(self):
        rng = np.random.default_rng(4)
        p = rng.uniform(0.05, 0.95, 60)
        t = np.tile([0, 1], 30)
        q = rng.normal(size=(60, 2))
        rep = diagnostics.diagnostics_report(p, t, q)
        assert rep.treated_counts.sum() == rep.n_treated == 30
        assert rep.control_counts.sum() == rep.n_control == 30
        assert 0.0 <= rep.extreme_fraction <= 1.0
        assert 0.0 <= rep.ioss <= 1.0
