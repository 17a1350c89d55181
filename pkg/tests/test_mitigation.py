import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exprep.estimators import Estimate
from exprep.mitigation import (
    ExtrapolationFailed,
    MitigationError,
    MitigationReport,
    NoiseLadder,
    chi2_metric,
    combine_strategies,
    compatible,
    consistency_check,
    decohered_precheck,
    exponential_extrapolate,
    mitigate,
    nssd_metric,
    polynomial_extrapolate,
    readout_correct,
    readout_invert,
    readout_ratio,
    resample_pipeline,
    richardson_extrapolate,
    richardson_weights,
    run_strategies,
)
from exprep.noise import NoiseSpec, ReadoutCalibration, apply_readout_channel, run_calibration

E = Estimate


def ladder(values, errors=None):
    errors = [0.01] * len(values) if errors is None else errors
    return NoiseLadder.from_arrays(values, errors)


class TestNoiseLadder:
    def test_eps(self):
        np.testing.assert_array_equal(ladder([1, 1, 1, 1]).eps, [1, 3, 5, 7])

    def test_must_start_at_one(self):
        with pytest.raises(MitigationError):
            NoiseLadder.from_arrays([1, 1], [0, 0], ks=[2, 3])

    def test_must_increase(self):
        with pytest.raises(MitigationError):
            NoiseLadder.from_arrays([1, 1], [0, 0], ks=[1, 1])


class TestReadout:
    def test_identity_calibration(self):
        counts = np.array([300, 200, 400, 100])
        cal = ReadoutCalibration.ideal(2)
        a = np.array([0, 1, 0, 1.0])
        est = readout_invert(counts, cal, a)
        assert est.value == pytest.approx(0.3)
        assert est.stderr == pytest.approx(math.sqrt(0.3 * 0.7 / 1000))

    def test_symmetric_fixed_point(self):
        cal = ReadoutCalibration([0.1], [0.1], [0.0], [0.0])
        rc = readout_correct(np.array([500, 500]), cal)
        np.testing.assert_allclose(rc.probs, [0.5, 0.5])

    def test_round_trip(self):
        rng = np.random.default_rng(3)
        p = rng.dirichlet(np.ones(4))
        rates = np.array([[0.1, 0.05], [0.1, 0.05]])
        noisy = apply_readout_channel(p, rates)
        counts = rng.multinomial(10**6, noisy)
        cal = ReadoutCalibration(rates[:, 0], rates[:, 1], [0, 0], [0, 0])
        for j in range(4):
            a = np.eye(4)[j]
            est = readout_invert(counts, cal, a)
            assert abs(est.value - p[j]) <= 5 * est.stderr

    def test_error_coverage(self):
        # calibration and shot noise both propagate: about 68% within 1 sigma
        spec = NoiseSpec(readout=(0.05, 0.08))
        p = np.array([0.6, 0.1, 0.25, 0.05])
        noisy = apply_readout_channel(p, spec.readout_rates(2))
        rng = np.random.default_rng(21)
        a = np.array([0, 1, 0, 1.0])
        hits = 0
        trials = 400
        for i in range(trials):
            cal = run_calibration(spec, 2, 2000, rng)
            est = readout_invert(rng.multinomial(4000, noisy), cal, a)
            hits += abs(est.value - a @ p) <= est.stderr
        assert 0.58 <= hits / trials <= 0.85

    def test_clipping(self):
        cal = ReadoutCalibration([0.1], [0.1], [0.01], [0.01])
        rc = readout_correct(np.array([920, 80]), cal, m_sigma=5)  # linear -0.025
        assert rc.method == "clipped"
        assert rc.probs.min() == 0

    def test_least_squares(self):
        cal = ReadoutCalibration([0.2], [0.2], [0.0], [0.0])
        rc = readout_correct(np.array([10**6, 0]), cal)
        assert rc.method == "least-squares"
        assert np.all(rc.probs >= 0)
        assert rc.probs.sum() == pytest.approx(1, abs=1e-3)

    def test_ratio(self):
        counts = np.array([400, 100, 300, 200])
        cal = ReadoutCalibration.ideal(2)
        est = readout_ratio(counts, cal, [0, 0, 1, 0], [1, 0, 1, 0], scale=2.0)
        assert est.value == pytest.approx(2 * 300 / 700)

    def test_size_mismatch(self):
        with pytest.raises(MitigationError):
            readout_correct(np.array([1, 2, 3, 4]), ReadoutCalibration.ideal(3))


class TestRichardson:
    def test_constant(self):
        assert richardson_extrapolate(ladder([0.7, 0.7])).value == pytest.approx(0.7, abs=1e-15)

    def test_first_order_literal(self):
        assert richardson_extrapolate(ladder([0.9, 0.8])).value == 0.5 * (3 * 0.9 - 0.8)
        assert richardson_extrapolate(ladder([0.9, 0.8])).value == pytest.approx(0.95)

    @given(st.floats(-2, 2), st.floats(-0.2, 0.2))
    def test_linear(self, a, b):
        lad = ladder([a + b * 1, a + b * 3])
        assert richardson_extrapolate(lad).value == pytest.approx(a, abs=1e-12)

    def test_higher_order_cubic(self):
        f = lambda x: 0.5 - 0.1 * x + 0.01 * x**2 - 0.001 * x**3
        lad = ladder([f(x) for x in (1, 3, 5, 7)])
        assert richardson_extrapolate(lad, 3).value == pytest.approx(0.5, abs=1e-12)

    def test_weights_sum_to_one(self):
        assert richardson_weights([1, 3, 5, 7]).sum() == pytest.approx(1)

    def test_too_short(self):
        with pytest.raises(MitigationError):
            richardson_extrapolate(ladder([1, 1]), 2)


class TestPolynomial:
    def test_constant(self):
        fit = polynomial_extrapolate(ladder([0.4] * 4))
        assert fit.degree == 0 and fit.estimate.value == pytest.approx(0.4)

    def test_quadratic(self):
        rng = np.random.default_rng(0)
        f = lambda x: 0.9 - 0.05 * x + 0.004 * x**2
        err = 1e-6
        vals = [f(x) + rng.normal(0, err) for x in (1, 3, 5, 7)]
        fit = polynomial_extrapolate(ladder(vals, [err] * 4))
        assert fit.degree == 2
        assert abs(fit.estimate.value - 0.9) <= 5 * fit.estimate.stderr

    def test_wild_data(self):
        with pytest.raises(ExtrapolationFailed):
            polynomial_extrapolate(ladder([0.1, 0.9, 0.05, 0.7], [1e-6] * 4), max_degree=2)


class TestExponential:
    def test_constant(self):
        assert exponential_extrapolate(ladder([0.3, 0.3])).value == pytest.approx(0.3)

    def test_printed_example(self):
        assert exponential_extrapolate(ladder([0.8, 0.512])).value == pytest.approx(1.0)

    @given(st.floats(0.1, 2), st.floats(0.001, 0.2), st.integers(2, 4))
    def test_exact_exponential(self, a, c, k):
        vals = [a * math.exp(-c * (2 * j - 1)) for j in range(1, 5)]
        assert exponential_extrapolate(ladder(vals), k).value == pytest.approx(a, abs=1e-12)

    def test_sign_change(self):
        with pytest.raises(ExtrapolationFailed):
            exponential_extrapolate(ladder([0.1, -0.1]))

    def test_missing_level(self):
        with pytest.raises(MitigationError):
            exponential_extrapolate(ladder([0.1, 0.2]), 3)


class TestConsistency:
    def test_identical(self):
        r = consistency_check([E(0.5, 0.01)] * 4)
        assert all(r.ctest) and r.error_count == 0 and r.chosen_index == 1
        assert r.flag == "no-extrapolation-needed"

    def test_outlier_counts_errors(self):
        r = consistency_check([E(0, .01), E(0, .01), E(1, .01), E(0, .01)])
        # k=1, k=2 fail against k=3, k=3 fails against k=4: retry on first three
        assert r.flag == "failed"
        assert r.error_count == 5

    def test_second_entry_chosen(self):
        r = consistency_check([E(0.5, .01), E(0.8, .01), E(0.8, .01), E(0.8, .01)])
        assert r.chosen_index == 2 and r.error_count == 1
        # the only failure is at the lowest order
        assert r.flag == "error-free"

    def test_extrapolated_when_higher_orders_fail(self):
        r = consistency_check([E(0.5, .01), E(0.7, .01), E(0.8, .01), E(0.8, .01)])
        assert r.chosen_index == 3 and r.error_count == 2
        assert r.flag == "extrapolated"
        r = consistency_check([E(0.8, .01), E(0.8, .01), E(0.8, .01)])
        assert r.flag == "no-extrapolation-needed"

    def test_retry_drops_top(self):
        r = consistency_check([E(0.5, .01), E(0.5, .01), E(0.9, .01)])
        assert r.chosen_index == 1 and r.error_count == 2

    def test_all_incompatible(self):
        r = consistency_check([E(0.1, .001), E(0.3, .001), E(0.6, .001), E(0.9, .001)])
        assert r.flag == "failed" and r.chosen_index is None

    def test_compatible(self):
        assert compatible(E(0.0, 0.3), E(0.5, 0.4))
        assert not compatible(E(0.0, 0.3), E(0.51, 0.4))
        assert compatible(E(0.0, 0.3), E(0.9, 0.4), m_sigma=2)


class TestCombine:
    def test_linear_fit_wins(self):
        lin = E(0.3, 0.1)
        assert combine_strategies([(E(0.9, 0.01), 0, True)], linear_fit=lin) is lin

    def test_min_count(self):
        out = combine_strategies([(E(0.4, 0.1), 0, True), (E(0.9, 0.01), 2, True)])
        assert out.value == pytest.approx(0.4) and out.stderr == pytest.approx(0.1)

    def test_inverse_variance(self):
        out = combine_strategies([(E(0.4, 0.1), 1, True), (E(0.4, 0.1), 1, True)])
        assert out.value == pytest.approx(0.4)
        assert out.stderr == pytest.approx(0.1 / math.sqrt(2))

    def test_all_failed(self):
        with pytest.raises(ExtrapolationFailed):
            combine_strategies([(None, 3, False)])


class TestPipeline:
    def test_noiseless_round_trip(self):
        rep = mitigate(ladder([0.6] * 4, [0] * 4), resamples=100, seed=1)
        assert rep.flag == "no-extrapolation-needed"
        assert rep.fully_mitigated.value == pytest.approx(0.6)
        assert rep.fully_mitigated.stderr == 0

    def test_zero_errors_resampling_is_deterministic(self):
        lad = ladder([0.8 - 0.03 * x for x in (1, 3, 5, 7)], [0] * 4)
        est = resample_pipeline(lad, 50, seed=2)
        assert est.stderr == 0
        assert est.value == pytest.approx(0.8, abs=1e-12)

    def test_failing_ladder(self):
        lad = ladder([0.1, 0.9, 0.05, 0.7], [1e-6] * 4)
        rep = mitigate(lad, resamples=100, seed=3)
        assert rep.flag == "failed" and rep.fully_mitigated is None
        with pytest.raises(ExtrapolationFailed):
            resample_pipeline(lad, 100, seed=3)

    def test_report_contract(self):
        with pytest.raises(MitigationError):
            MitigationReport(E(1), E(1), None, "averaged")
        with pytest.raises(MitigationError):
            MitigationReport(E(1), E(1), E(1), "bogus")

    def test_strategy_results(self):
        lad = ladder([0.8 - 0.03 * x for x in (1, 3, 5, 7)], [0.001] * 4)
        res = {r.name: r for r in run_strategies(lad)}
        assert res["richardson"].estimate.value == pytest.approx(0.8)
        assert res["polynomial"].chosen_index == 2
        assert res["polynomial"].estimate.value == pytest.approx(0.8)

    def test_unknown_strategy(self):
        with pytest.raises(MitigationError):
            run_strategies(ladder([1, 1]), strategies=("magic",))

    def test_decohered_precheck(self):
        lad = ladder([0.6, 0.45, 0.26, 0.25], [0.01] * 4)
        assert len(decohered_precheck(lad, 0.25)) == 2
        near = ladder([0.255, 0.25, 0.25], [0.01] * 3)
        assert len(decohered_precheck(near, 0.25)) == 3

    @settings(max_examples=5, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_seeded_determinism(self, seed):
        lad = ladder([0.77, 0.70, 0.64, 0.58], [0.01] * 4)
        a = mitigate(lad, resamples=200, seed=seed)
        b = mitigate(lad, resamples=200, seed=seed)
        assert a == b

    def test_coverage(self):
        # linear ladder with known noise: the 68% interval covers the truth
        rng = np.random.default_rng(77)
        hits = 0
        trials = 500
        err = 0.01
        for _ in range(trials):
            vals = [0.8 - 0.03 * x + rng.normal(0, err) for x in (1, 3, 5, 7)]
            est = mitigate(ladder(vals, [err] * 4), resamples=200,
                           seed=int(rng.integers(2**31)))
            if est.fully_mitigated is not None:
                hits += abs(est.fully_mitigated.value - 0.8) <= est.fully_mitigated.stderr
        assert 0.55 <= hits / trials <= 0.85


class TestMetrics:
    def test_chi2(self):
        assert chi2_metric([1.0], [E(1.2, 0.1)]) == pytest.approx(4)
        assert chi2_metric([1, 2], [E(1, 0.1), E(2, 0.1)]) == 0
        assert chi2_metric([0, 0, 0], [E(0.1, 0.1)] * 3) == pytest.approx(3)

    def test_chi2_zero_error(self):
        with pytest.raises(MitigationError):
            chi2_metric([1.0], [E(1.0, 0.0)])

    def test_nssd(self):
        assert nssd_metric([1, 2], [1, 2]) == 0
        assert nssd_metric([1, 2, 3], [1.1, 2.2, 3.3]) == pytest.approx(1)
        assert nssd_metric([1, 1], [E(1.05), E(1.05)]) == pytest.approx(0.5)

    def test_nssd_zero_theory(self):
        with pytest.raises(MitigationError):
            nssd_metric([0, 0], [1, 1])
