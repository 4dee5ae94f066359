"""Spline basis against a literal truncated-power oracle, knot placement."""

import numpy as np
import pytest
import warnings
from hypothesis import given, settings
from hypothesis import strategies as st

from denma.errors import MissingKnots, TooFewDistinctDoses
from denma.splines import (
    KnotSet,
    build_design,
    dose_effect,
    export_knots,
    place_knots,
    rcs_basis,
)


def oracle_basis(x, knots):
    """Independent literal implementation of the truncated-power formula."""

    def pp3(v):
        return v * v * v if v > 0 else 0.0

    K = len(knots)
    t_last, t_pen = knots[-1], knots[-2]
    denom = t_last - t_pen
    out = [float(x)]
    for m in range(1, K - 1):
        t_m = knots[m - 1]
        out.append(
            pp3(x - t_m)
            - ((t_last - t_m) / denom) * pp3(x - t_pen)
            + ((t_pen - t_m) / denom) * pp3(x - t_last)
        )
    return np.array(out)


class TestKnotPlacement:
    def test_even_grid_quantiles(self):
        ks = place_knots([10, 20, 30, 40, 50], (0.25, 0.5, 0.75), agent_id="a")
        assert ks.knots == (20.0, 30.0, 40.0)

    def test_sensitivity_percentiles_supported(self):
        ks = place_knots([10, 20, 30, 40, 50], (0.10, 0.20, 0.30), agent_id="a")
        assert ks.knots == pytest.approx((10.4, 10.8, 11.2))
        assert len(ks.knots) == 3

    def test_collision_nudged_to_strict_order(self):
        with pytest.warns(UserWarning, match="collision"):
            ks = place_knots([10, 10, 10, 50], agent_id="a")
        assert all(b > a for a, b in zip(ks.knots, ks.knots[1:]))
        assert ks.knots[0] >= 10 and ks.knots[-1] <= 50
        # quantile oracle for the uncollided knot
        assert ks.knots[2] == pytest.approx(np.quantile([10, 10, 10, 50], 0.75))

    def test_too_few_distinct_doses(self):
        with pytest.raises(TooFewDistinctDoses):
            place_knots([10, 10, 50], agent_id="a")

    def test_bad_percentiles(self):
        with pytest.raises(ValueError):
            place_knots([1, 2, 3, 4], (0.5, 0.25, 0.75))
        with pytest.raises(ValueError):
            place_knots([1, 2, 3, 4], (0.0, 0.5, 0.75))

    def test_duplicates_weight_the_multiset(self):
        # arm multiset, not unique doses: duplicates pull quantiles
        ks_unique = place_knots([10, 20, 30, 40], agent_id="a")
        ks_weighted = place_knots([10, 10, 10, 20, 30, 40], agent_id="a")
        assert ks_weighted.knots[0] < ks_unique.knots[0]

    def test_knotset_validation(self):
        with pytest.raises(ValueError):
            KnotSet("a", (1.0, 1.0, 2.0))
        with pytest.raises(ValueError):
            KnotSet("a", (1.0, 2.0))


class TestBasis:
    def test_zero_dose_is_zero_vector(self):
        ks = KnotSet("a", (10.0, 20.0, 30.0))
        assert rcs_basis(0.0, ks) == pytest.approx((0.0, 0.0))

    def test_hand_computed_value(self):
        # knots (10,20,30), x=25: 15^3 - 2*5^3 + 0 = 3125
        ks = KnotSet("a", (10.0, 20.0, 30.0))
        b = rcs_basis(25.0, ks)
        assert b[0] == 25.0
        assert b[1] == pytest.approx(3125.0, rel=1e-14)

    def test_tail_values_linear(self):
        ks = KnotSet("a", (10.0, 20.0, 30.0))
        vals = rcs_basis(np.array([40.0, 50.0, 60.0]), ks)[:, 1]
        assert vals == pytest.approx([12000.0, 18000.0, 24000.0], rel=1e-14)
        assert np.diff(vals, 2)[0] == pytest.approx(0.0, abs=1e-9 * vals[-1])

    def test_matches_oracle_on_random_draws(self):
        rng = np.random.default_rng(20260810)
        for _ in range(1000):
            kappa = int(rng.integers(3, 6))
            knots = np.sort(rng.uniform(0.5, 100.0, size=kappa))
            while np.any(np.diff(knots) < 1e-3):
                knots = np.sort(rng.uniform(0.5, 100.0, size=kappa))
            x = rng.uniform(0.0, 150.0)
            got = rcs_basis(x, tuple(knots))
            want = oracle_basis(x, tuple(knots))
            np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)

    def test_identically_zero_below_first_knot(self):
        ks = KnotSet("a", (10.0, 20.0, 30.0, 45.0))
        xs = np.linspace(0.0, 10.0, 50)
        assert np.all(rcs_basis(xs, ks)[:, 1:] == 0.0)

    def test_continuity_and_derivatives_at_knots(self):
        ks = KnotSet("a", (10.0, 25.0, 30.0))
        h = 1e-4
        for t in ks.knots:
            for col in range(1, ks.n_coefs):
                f = lambda x: rcs_basis(float(x), ks)[col]
                below, above = f(t - h), f(t + h)
                scale = max(1.0, abs(f(t)))
                assert abs(above - below) < 1e-6 * max(scale, 1.0)
                d_below = (f(t) - f(t - h)) / h
                d_above = (f(t + h) - f(t)) / h
                assert d_above - d_below == pytest.approx(0.0, abs=1e-2)
                dd_below = (f(t) - 2 * f(t - h) + f(t - 2 * h)) / h**2
                dd_above = (f(t + 2 * h) - 2 * f(t + h) + f(t)) / h**2
                assert dd_above - dd_below == pytest.approx(0.0, abs=2e-2 * max(abs(dd_above), 1.0))

    def test_second_difference_vanishes_beyond_last_knot(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            knots = tuple(np.sort(rng.uniform(1.0, 50.0, size=3)))
            xs = knots[-1] + np.array([1.0, 2.0, 3.0]) * rng.uniform(0.5, 5.0)
            vals = rcs_basis(xs, knots)[:, 1]
            second = vals[2] - 2 * vals[1] + vals[0]
            assert abs(second) <= 1e-9 * max(1.0, abs(vals[2]))

    @given(
        c1=st.floats(-5, 5, allow_nan=False),
        c2=st.floats(-5, 5, allow_nan=False),
        t0=st.floats(1, 40),
        gap1=st.floats(0.5, 30),
        gap2=st.floats(0.5, 30),
    )
    @settings(max_examples=100, deadline=None)
    def test_placebo_anchoring_for_any_coefficients(self, c1, c2, t0, gap1, gap2):
        knots = (t0, t0 + gap1, t0 + gap1 + gap2)
        assert dose_effect(0.0, knots, (c1, c2)) == 0.0

    def test_general_kappa_dimensions(self):
        for kappa in (3, 4, 5):
            knots = tuple(float(10 * (i + 1)) for i in range(kappa))
            assert rcs_basis(12.3, knots).shape == (kappa - 1,)


class TestDesign:
    def test_placebo_rows_zero_and_missing_knots(self, small_dataset):
        knots = {
            "drugA": KnotSet("drugA", (10.0, 20.0, 30.0)),
            "drugB": KnotSet("drugB", (10.0, 20.0, 30.0)),
        }
        design = build_design(small_dataset, knots)
        arms = [arm for s in small_dataset.studies for arm in s.arms]
        for row, arm in zip(design.matrix, arms):
            if arm.is_placebo:
                assert np.all(row == 0.0)
        assert np.all(np.isfinite(design.matrix))
        with pytest.raises(MissingKnots):
            build_design(small_dataset, {"drugA": knots["drugA"]})

    def test_design_row_matches_basis(self, small_dataset):
        knots = {
            "drugA": KnotSet("drugA", (10.0, 20.0, 30.0)),
            "drugB": KnotSet("drugB", (10.0, 20.0, 30.0)),
        }
        design = build_design(small_dataset, knots)
        arms = [arm for s in small_dataset.studies for arm in s.arms]
        for row, arm in zip(design.matrix, arms):
            if arm.agent_id == "drugA" and arm.dose == 25.0:
                assert row == pytest.approx((25.0, 3125.0))

    def test_export_knots(self, tmp_path):
        knots = {"drugA": KnotSet("drugA", (10.0, 20.0, 30.0))}
        path = tmp_path / "knots.csv"
        export_knots(knots, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "agent,t1,t2,t3"
        assert lines[1].startswith("drugA,10.0,20.0,30.0")
