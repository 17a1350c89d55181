import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from exprep.circuits import LCU_VARIANTS, LCUSpec, TDPrepSpec, lcu_full_circuit
from exprep.estimators import (
    Estimate,
    EstimatorError,
    depolarized_predictions,
    estimate_from_counts,
    lcu_exact,
    lcu_observables,
    lcu_run,
    ratio_error_bound,
    td_exact,
    td_observables,
    td_run,
)
from exprep.noise import NoiseSpec, apply_global_depolarizing, noisy_probabilities
from exprep.operators import (
    PauliSum,
    lambda_norm,
    nuclear_op_first_q,
    nuclear_op_second_q,
    second_quantized_simple_op,
    simple_op,
)
from exprep.simulator import ShotHistogram, bits_to_index, new_basis_state

GRID16 = np.linspace(0, math.pi, 16)


def lcu_setup(variant, t):
    if variant == "simple-1q":
        return simple_op(t), "0", "1"
    if variant.startswith("simple-2q"):
        return second_quantized_simple_op(t), "10", "01"
    if variant == "nuclear-1q":
        return nuclear_op_first_q(t), "1", "0"
    return nuclear_op_second_q("B", t), "10", "01"


def within(est, ref, nsig=5, floor=1e-12):
    return abs(est.value - ref) <= nsig * est.stderr + floor


class TestEstimate:
    def test_negative_stderr(self):
        with pytest.raises(EstimatorError):
            Estimate(0.5, -1.0)

    def test_nan_stderr(self):
        with pytest.raises(EstimatorError):
            Estimate(0.5, float("nan"))


class TestTDExact:
    def test_pauli_x(self):
        op = PauliSum.from_signed(1, [(1.0, "X")])
        ps, state, f = td_exact(op, new_basis_state(1), 0.3)
        assert ps == pytest.approx(math.sin(0.3) ** 2, abs=1e-12)
        assert ps == pytest.approx(0.08733, abs=5e-6)
        assert f == pytest.approx(1.0)

    @given(st.floats(0, math.pi))
    def test_simple_family_window(self, t):
        ps, _, f = td_exact(simple_op(t), new_basis_state(1), 0.3)
        assert 0.0846 <= ps <= 0.09
        assert f >= 1 - 0.09 * lambda_norm(simple_op(t)) ** 2 / 6 - 1e-12

    def test_gamma_range(self):
        with pytest.raises(EstimatorError):
            td_exact(simple_op(0.3), new_basis_state(1), 0.0)

    def test_annihilated(self):
        op = PauliSum.from_signed(1, [(0.5, "I"), (-0.5, "Z")])
        with pytest.raises(Exception):
            td_exact(op, new_basis_state(1), 0.3)


class TestTDRun:
    def test_theta_zero_shots(self):
        r = td_run(TDPrepSpec(simple_op(0.0), 0.3, variant="simple"), new_basis_state(1),
                   10**6, seed=1, final="1")
        assert within(r.p_success, math.sin(0.3) ** 2)
        assert r.p_transition.value == pytest.approx(1.0)

    def test_identity_cannot_flip(self):
        r = td_run(TDPrepSpec(simple_op(math.pi / 2), 0.3, variant="simple"),
                   new_basis_state(1), 10**5, seed=2, final="1")
        assert r.p_transition.value == 0.0

    def test_zero_success_flag(self):
        r = td_run(TDPrepSpec(simple_op(0.3), 1e-5, variant="simple"), new_basis_state(1),
                   1000, seed=3, final="1")
        assert r.failed and "zero-success" in r.flags

    def test_exact_mode(self):
        op = nuclear_op_first_q(0.8)
        r = td_run(TDPrepSpec(op, 0.3, variant="nuclear"), new_basis_state(1, "1"), None,
                   final="0")
        ps, state, _ = td_exact(op, new_basis_state(1, "1"), 0.3)
        assert r.p_success.value == pytest.approx(ps, abs=1e-12)
        assert r.p_transition.value == pytest.approx(abs(state.amplitudes[0]) ** 2,
                                                     abs=1e-12)

    def test_ancilla_one_rejected(self):
        with pytest.raises(EstimatorError):
            td_run(TDPrepSpec(simple_op(0.3), 0.3, 1, "simple"), new_basis_state(1), 10,
                   seed=1, final="1")

    def test_final_required(self):
        with pytest.raises(EstimatorError):
            td_run(TDPrepSpec(simple_op(0.3), 0.3, variant="simple"), new_basis_state(1), 10)

    @pytest.mark.parametrize("t", GRID16)
    def test_convergence(self, t):
        for op, psi, fin, var in [(simple_op(t), "0", "1", "simple"),
                                  (nuclear_op_first_q(t), "1", "0", "nuclear")]:
            ps, state, _ = td_exact(op, new_basis_state(1, psi), 0.3)
            pt = abs(state.amplitudes[bits_to_index(fin)]) ** 2
            r = td_run(TDPrepSpec(op, 0.3, variant=var), new_basis_state(1, psi), 10**6,
                       seed=int(t * 1000), final=fin)
            assert within(r.p_success, ps)
            assert within(r.p_transition, pt)


class TestLCURun:
    def test_hopping(self):
        a, b = lcu_run(LCUSpec(second_quantized_simple_op(0.0), "simple-2q-optimized"),
                       new_basis_state(2, "10"), None, final="01")
        assert a.p_success.value == pytest.approx(1.0)
        assert a.p_transition.value == pytest.approx(1.0)
        assert b.p_transition.value == pytest.approx(1.0)

    def test_quarter_angle(self):
        a, _ = lcu_run(LCUSpec(simple_op(math.pi / 4), "simple-1q"), new_basis_state(1),
                       None, final="1")
        assert a.p_success.value == pytest.approx(0.5, abs=1e-10)

    @given(st.floats(0, math.pi))
    def test_nuclear_1q_floor(self, t):
        op = nuclear_op_first_q(t)
        ps, _ = lcu_exact(op, new_basis_state(1, "1"))
        assert ps >= 0.5 - 1e-12

    @pytest.mark.parametrize("variant", LCU_VARIANTS)
    @pytest.mark.parametrize("t", GRID16[::3])
    def test_estimators_coincide_noiseless(self, variant, t):
        op, psi, fin = lcu_setup(variant, t)
        a, b = lcu_run(LCUSpec(op, variant), new_basis_state(op.n_qubits, psi), None,
                       final=fin)
        ps, state = lcu_exact(op, new_basis_state(op.n_qubits, psi))
        assert a.p_success.value == pytest.approx(ps, abs=1e-10)
        assert a.p_transition.value == pytest.approx(b.p_transition.value, abs=1e-10)
        assert b.p_transition.value == pytest.approx(
            abs(state.amplitudes[bits_to_index(fin)]) ** 2, abs=1e-10)

    @pytest.mark.parametrize("variant", LCU_VARIANTS)
    def test_convergence(self, variant):
        for i, t in enumerate(GRID16):
            op, psi, fin = lcu_setup(variant, t)
            psi0 = new_basis_state(op.n_qubits, psi)
            ps, state = lcu_exact(op, psi0)
            pt = abs(state.amplitudes[bits_to_index(fin)]) ** 2
            a, b = lcu_run(LCUSpec(op, variant), psi0, 10**6, seed=i, final=fin)
            assert within(a.p_success, ps)
            assert within(a.p_transition, pt)
            assert within(b.p_transition, pt)
            combined = math.hypot(a.p_transition.stderr, b.p_transition.stderr)
            assert abs(a.p_transition.value - b.p_transition.value) <= 5 * combined + 1e-12


class TestEstimateFromCounts:
    def test_ratio(self):
        obs = td_observables(1, "1")
        # index = ancilla + 2*system; success ancilla 1
        counts = np.array([50, 30, 0, 20])
        r = estimate_from_counts(counts, obs, "TD-Pt")
        assert r.p_success.value == pytest.approx(0.5)
        assert r.p_transition.value == pytest.approx(0.4)
        assert r.p_transition.stderr == pytest.approx(math.sqrt(0.24 / 50))

    def test_joint_scaled(self):
        obs = lcu_observables(1, 1, "1")
        counts = np.array([60, 0, 40, 0])
        r = estimate_from_counts(counts, obs, "LCU-PtA", scale=2.0)
        assert r.p_transition.value == pytest.approx(0.8)

    def test_unknown_kind(self):
        with pytest.raises(EstimatorError):
            estimate_from_counts(np.array([1, 1, 1, 1]), td_observables(1, "1"), "XYZ")

    def test_no_shots(self):
        with pytest.raises(EstimatorError):
            estimate_from_counts(np.zeros(4, int), td_observables(1, "1"), "TD-Pt")

    def test_length_check(self):
        with pytest.raises(EstimatorError):
            td_observables(1, "10")


class TestDepolarized:
    def test_identity_channel(self):
        assert depolarized_predictions(0.3, 0.7, 2, 1, 0.0) == pytest.approx((0.3, 0.7, 0.7))

    def test_full_channel(self):
        assert depolarized_predictions(0.3, 0.7, 1, 1, 1.0)[0] == pytest.approx(0.5)

    def test_density_matrix_oracle(self):
        k, n, eps, ps, m = 2, 2, 0.1, 0.5, 0.8
        d = 2 ** (n + k)
        psi = np.zeros(d)
        final = 1  # system index
        psi[0 + (final << k)] = math.sqrt(ps * m)
        psi[0 + (2 << k)] = math.sqrt(ps * (1 - m))
        psi[3] = math.sqrt(1 - ps)
        rho = (1 - eps) * np.outer(psi, psi) + eps * np.eye(d) / d
        idx = np.arange(d)
        succ = (idx & (2**k - 1)) == 0
        num = succ & ((idx >> k) == final)
        diag = np.diag(rho)
        ref = (diag[succ].sum(), diag[num].sum() / diag[succ].sum(), diag[num].sum() / ps)
        np.testing.assert_allclose(depolarized_predictions(ps, m, k, n, eps), ref,
                                   atol=1e-14)

    def test_domain(self):
        with pytest.raises(EstimatorError):
            depolarized_predictions(0.5, 0.5, 1, 1, 1.5)

    def test_sampled_matches_prediction(self):
        op = second_quantized_simple_op(0.6)
        spec = LCUSpec(op, "simple-2q-optimized")
        psi0 = new_basis_state(2, "10").tensor(new_basis_state(2))
        probs = noisy_probabilities(lcu_full_circuit(spec), psi0, NoiseSpec())
        ps, state = lcu_exact(op, new_basis_state(2, "10"))
        m = abs(state.amplitudes[bits_to_index("01")]) ** 2
        obs = lcu_observables(2, 2, "01")
        rng = np.random.default_rng(5)
        for eps in (0.05, 0.2, 0.5):
            hist = ShotHistogram.from_array(rng.multinomial(10**6, probs), 4)
            hist = apply_global_depolarizing(hist, eps, rng)
            a = estimate_from_counts(hist.as_array(), obs, "LCU-PtA", 1 / ps)
            b = estimate_from_counts(hist.as_array(), obs, "LCU-PtB")
            ps_e, m_e, mt_e = depolarized_predictions(ps, m, 2, 2, eps)
            assert within(a.p_success, ps_e)
            assert within(b.p_transition, m_e)
            assert within(a.p_transition, mt_e)

    @pytest.mark.parametrize("k", [2, 3, 4])
    def test_ratio_bound(self, k):
        rng = np.random.default_rng(k)
        for _ in range(500):
            n = int(rng.integers(1, 4))
            ps = rng.uniform(0.05, 1)
            m = rng.uniform(0, 1)
            eps = rng.uniform(0, 0.5)
            _, m_e, _ = depolarized_predictions(ps, m, k, n, eps)
            assert abs(m_e - m) <= ratio_error_bound(ps, m, k, n, eps) + 1e-15

    def test_bound_infinite_at_full_noise(self):
        assert ratio_error_bound(0.5, 0.5, 2, 2, 1.0) == math.inf
