import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccfund import (
    GridSpec,
    LinearAdditiveRefund,
    PprRefund,
    RefundScheme,
    SolverError,
    certify_cm,
    default_linear_slope,
    refund_share,
    scheme_from_tag,
    threshold_general,
    threshold_ppr,
    thresholds,
)
from conftest import random_instance


class _ConstantRefund(RefundScheme):
    """Negative control: pays the same no matter the contribution."""

    tag = "constant"

    def __init__(self, level=0.3):
        self.level = level

    def share(self, x, bonus, total):
        return self.level + 0.0 * np.asarray(x)


class TestRefundShare:
    def test_sole_contributor_takes_full_pool(self):
        assert refund_share(PprRefund(), 4.0, 2.0, 4.0) == pytest.approx(2.0)

    def test_proportional_share(self):
        assert refund_share(PprRefund(), 1.0, 2.0, 4.0) == pytest.approx(0.5)

    def test_linear(self):
        assert refund_share(LinearAdditiveRefund(0.1), 7.0, 2.0, 9.0) == pytest.approx(0.7)

    def test_zero_total_pays_nothing(self):
        assert refund_share(PprRefund(), 0.0, 2.0, 0.0) == 0.0

    def test_negative_inputs_rejected(self):
        with pytest.raises(ValueError, match="non-negative"):
            refund_share(PprRefund(), -1.0, 2.0, 4.0)
        with pytest.raises(ValueError, match="non-negative"):
            refund_share(PprRefund(), 1.0, -2.0, 4.0)


class TestCertifyCm:
    def test_ppr_passes(self):
        report = certify_cm(PprRefund())
        assert report.passed
        assert report.min_forward_difference > 0
        assert report.first_violation is None

    def test_linear_passes_with_slope_step_difference(self):
        grid = GridSpec()
        report = certify_cm(LinearAdditiveRefund(0.1), grid)
        assert report.passed
        assert report.min_forward_difference == pytest.approx(0.1 * report.step)

    def test_constant_scheme_fails(self):
        report = certify_cm(_ConstantRefund())
        assert not report.passed
        assert report.first_violation is not None

    def test_degenerate_grid_rejected(self):
        with pytest.raises(ValueError, match="degenerate"):
            certify_cm(PprRefund(), GridSpec(points=1))


class TestThresholdPpr:
    def test_worked_example_first_value(self):
        bar = threshold_ppr(10.9, 10.0, 1.0)
        assert bar == pytest.approx(9.909090909090908, abs=1e-12)
        assert round(bar, 2) == 9.91

    def test_worked_example_second_value(self):
        assert threshold_ppr(1.089, 10.0, 1.0) == pytest.approx(0.99, abs=1e-12)

    def test_zero_valuation(self):
        assert threshold_ppr(0.0, 10.0, 1.0) == 0.0

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            threshold_ppr(1.0, 0.0, 1.0)


class TestThresholdGeneral:
    def test_matches_closed_form_for_proportional(self):
        bar = threshold_general(PprRefund(), 10.9, 10.0, 1.0)
        assert bar == pytest.approx(threshold_ppr(10.9, 10.0, 1.0), abs=1e-9)

    def test_linear_algebraic_oracle(self):
        # theta - x = a x  =>  x = theta / (1 + a)
        assert threshold_general(LinearAdditiveRefund(0.1), 11.0, 10.0, 1.0) == pytest.approx(
            10.0, abs=1e-9
        )

    def test_zero_valuation(self):
        assert threshold_general(PprRefund(), 0.0, 10.0, 1.0) == 0.0

    def test_randomized_agreement_with_closed_form(self):
        rng = np.random.default_rng(7)
        for _ in range(500):
            theta = rng.uniform(0.0, 20.0)
            target = rng.uniform(0.5, 20.0)
            bonus = rng.uniform(0.1, 10.0)
            bar = threshold_general(PprRefund(), theta, target, bonus)
            assert abs(bar - threshold_ppr(theta, target, bonus)) <= 1e-9

    def test_own_pool_convention_also_solvable(self):
        # with the pool tracking own contribution the indifference point shifts
        bar = threshold_general(PprRefund(), 6.0, 10.0, 2.0, others_total=4.0)
        assert 0.0 < bar < 6.0
        assert 6.0 - bar == pytest.approx(bar / (4.0 + bar) * 2.0, abs=1e-8)

    def test_no_sign_change_reports_bracket(self):
        class _NegativeRefund(RefundScheme):
            tag = "negative"

            def share(self, x, bonus, total):
                return -np.asarray(x) * 0.5

        with pytest.raises(SolverError, match="no sign change"):
            threshold_general(_NegativeRefund(), 5.0, 10.0, 1.0)


class TestThresholdMatrix:
    def test_closed_form_elementwise(self):
        rng = np.random.default_rng(11)
        inst = random_instance(rng, n=4, p=3)
        thr = thresholds(inst)
        for i in range(4):
            for j in range(3):
                expected = threshold_ppr(
                    float(inst.valuations[i, j]),
                    float(inst.targets[j]),
                    float(inst.bonuses[j]),
                )
                assert thr[i, j] == pytest.approx(expected, abs=1e-12)

    def test_full_bonus_thresholds_sum_to_target(self):
        rng = np.random.default_rng(13)
        for _ in range(300):
            inst = random_instance(rng, bonus_fraction=1.0)
            thr = thresholds(inst)
            sums = thr.sum(axis=0)
            assert np.all(np.abs(sums - inst.targets) <= 1e-6 * inst.targets)

    def test_zero_valuation_row_gives_zero_thresholds(self):
        from ccfund import Instance

        inst = Instance(
            [[8.0, 6.0], [0.0, 0.0]], [3.0, 3.0], [4.0, 3.0], [2.0, 1.5], PprRefund()
        )
        assert np.all(thresholds(inst)[1] == 0.0)

    def test_scheme_override(self):
        rng = np.random.default_rng(19)
        inst = random_instance(rng, n=2, p=2, scheme=LinearAdditiveRefund(0.2))
        thr = thresholds(inst, scheme=PprRefund())
        expected = inst.targets * inst.valuations / (inst.bonuses + inst.targets)
        assert np.allclose(thr, expected, atol=1e-12)


class TestThresholdProperties:
    @given(
        theta=st.floats(0.0, 50.0),
        target=st.floats(0.1, 50.0),
        bonus=st.floats(0.05, 25.0),
    )
    @settings(max_examples=200)
    def test_threshold_between_zero_and_valuation(self, theta, target, bonus):
        bar = threshold_general(PprRefund(), theta, target, bonus)
        assert -1e-12 <= bar <= theta + 1e-12

    @given(
        theta=st.floats(0.01, 50.0),
        bump=st.floats(0.01, 10.0),
        target=st.floats(0.1, 50.0),
        bonus=st.floats(0.05, 25.0),
    )
    @settings(max_examples=200)
    def test_threshold_monotone_in_valuation(self, theta, bump, target, bonus):
        low = threshold_general(PprRefund(), theta, target, bonus)
        high = threshold_general(PprRefund(), theta + bump, target, bonus)
        assert high >= low - 1e-9

    def test_indifference_consistency(self):
        rng = np.random.default_rng(23)
        for _ in range(200):
            theta = rng.uniform(0.1, 20.0)
            target = rng.uniform(0.5, 20.0)
            bonus = rng.uniform(0.1, 10.0)
            scheme = PprRefund() if rng.random() < 0.5 else LinearAdditiveRefund(rng.uniform(0.05, 0.5))
            bar = threshold_general(scheme, theta, target, bonus)
            assert abs(theta - bar - scheme.share(bar, bonus, target)) <= 1e-8


class TestSchemeSelection:
    def test_tags_round_trip(self):
        assert isinstance(scheme_from_tag("ppr"), PprRefund)
        linear = scheme_from_tag("linear-additive", 0.25)
        assert isinstance(linear, LinearAdditiveRefund)
        assert linear.slope == 0.25

    def test_linear_requires_slope(self):
        with pytest.raises(ValueError, match="slope"):
            scheme_from_tag("linear-additive")

    def test_unknown_tag(self):
        with pytest.raises(ValueError, match="unknown"):
            scheme_from_tag("exotic")

    def test_default_slope_bounds_payout(self):
        vartheta = np.array([10.0, 20.0])
        targets = np.array([4.0, 8.0])
        slope = default_linear_slope(vartheta, targets)
        assert slope == pytest.approx(6.0 / 20.0)
        # on an unfunded project the pool is never exceeded
        assert slope * targets.max() <= (vartheta - targets).min()
