import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from exprep.bounds import (
    FIDELITY_FLOOR_MIN,
    BoundsError,
    TDBoundInputs,
    family_bounds,
    gamma_for_fidelity,
    guaranteed_ps_floor,
    imperfect_evolution_bounds,
    ps_upper_for_fidelity,
    taylor_sine_bounds,
    td_bounds,
    trace_distance_shift,
)
from exprep.circuits import td_unitary_reference
from exprep.estimators import td_exact
from exprep.operators import (
    PauliSum,
    exact_excited_state,
    lambda_norm,
    matrix_functions,
    nuclear_op_first_q,
)
from exprep.simulator import StateVector, new_basis_state

WORDS2 = ["".join(w) for w in itertools.product("IXYZ", repeat=2)]


def random_op(rng, n=2):
    words = ["".join(w) for w in itertools.product("IXYZ", repeat=n)]
    k = int(rng.integers(1, len(words) + 1))
    chosen = rng.choice(len(words), size=k, replace=False)
    return PauliSum.from_signed(n, [(rng.normal(), words[i]) for i in chosen])


def random_state(rng, n):
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return StateVector(n, v / np.linalg.norm(v))


def random_unitary(rng, d, delta):
    """Unitary W with ||W - 1|| = delta (spectral norm)."""
    h = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = (h + h.conj().T) / 2
    h /= np.max(np.abs(np.linalg.eigvalsh(h)))
    t = 2 * math.asin(delta / 2)  # |e^{it} - 1| = delta
    return expm(1j * t * h)


class TestInputs:
    @pytest.mark.parametrize("kw", [dict(Lambda=0), dict(eta=2.0), dict(gamma=2.0),
                                    dict(F_min=0.0), dict(delta_U=-1),
                                    dict(delta_U=0.1, delta_V=0.3)])
    def test_rejects(self, kw):
        base = dict(gamma=0.3, Lambda=1.0, eta=1.0)
        base.update(kw)
        with pytest.raises(BoundsError):
            TDBoundInputs(**base)


class TestTDBounds:
    def test_gamma_zero(self):
        b = td_bounds(TDBoundInputs(0.0, 1.0, 1.0))
        assert (b.ps_lower, b.ps_upper_a, b.ps_upper_b, b.f_lower) == (0, 0, 0, 1)

    def test_simple_family(self):
        b = td_bounds(TDBoundInputs(0.3, math.sqrt(2), 1.0))
        assert b.ps_lower == pytest.approx(0.0846, abs=5e-5)
        assert b.ps_upper_b == pytest.approx(0.09)
        assert b.f_lower >= 0.97
        assert b.ps_lower <= b.ps_upper

    def test_nuclear_family(self):
        ts = np.linspace(0, math.pi, 2001)
        lams, etas = [], []
        for t in ts:
            op = nuclear_op_first_q(t)
            lams.append(lambda_norm(op))
            etas.append(exact_excited_state(op, new_basis_state(1, "1")).eta)
        b = family_bounds(0.3, lams, etas)
        assert b.ps_lower == pytest.approx(0.045, abs=5e-4)
        assert b.ps_upper == pytest.approx(0.738, abs=1e-3)

    def test_family_gamma_check(self):
        with pytest.raises(BoundsError):
            family_bounds(1.0, [1.0, 3.0], [1.0, 1.0])

    def test_monotone_in_gamma(self):
        lam, eta = 1.7, 1.2
        gs = np.linspace(0, math.pi / (2 * lam), 200)
        a = [td_bounds(TDBoundInputs(g, lam, eta)).ps_upper_a for g in gs]
        b = [td_bounds(TDBoundInputs(g, lam, eta)).ps_upper_b for g in gs]
        assert np.all(np.diff(a) >= 0) and np.all(np.diff(b) >= 0)

    def test_randomized_against_exact(self):
        rng = np.random.default_rng(2024)
        violations = 0
        for _ in range(1000):
            n = int(rng.integers(1, 3))
            op = random_op(rng, n)
            psi = random_state(rng, n)
            lam = lambda_norm(op)
            eta = np.linalg.norm(op.matrix() @ psi.amplitudes)
            if eta < 1e-9:
                continue
            g = rng.uniform(1e-3, 1) * math.pi / (2 * lam)
            b = td_bounds(TDBoundInputs(g, lam, eta))
            ps, _, f = td_exact(op, psi, g)
            ok = (b.ps_lower <= ps + 1e-12 and ps <= b.ps_upper_a + 1e-12
                  and ps <= b.ps_upper_b + 1e-12 and f >= b.f_lower - 1e-12)
            violations += not ok
        assert violations == 0


class TestGammaSelection:
    def test_fidelity_one(self):
        g = gamma_for_fidelity(1.0, 2.0)
        assert g.exact == 0 and g.warning

    def test_reference_choice(self):
        g = gamma_for_fidelity(0.97, math.sqrt(2))
        assert g.exact == pytest.approx(0.3)
        assert g.imperfect == pytest.approx(math.sqrt(0.03) / math.sqrt(2))

    def test_cap(self):
        g = gamma_for_fidelity(0.1, 1.0)
        assert g.exact == pytest.approx(math.pi / 2) and g.warning

    def test_ps_upper_small_infidelity(self):
        assert ps_upper_for_fidelity(0.999) == pytest.approx(0.006, rel=1e-2)

    @given(st.floats(0.8, 0.9999), st.floats(0.5, 3.0))
    def test_budget_guarantees_fidelity(self, fmin, lam):
        g = gamma_for_fidelity(fmin, lam).exact
        assert td_bounds(TDBoundInputs(g, lam, lam / 2)).f_lower >= fmin - 1e-12


class TestPsFloor:
    def test_trivial(self):
        assert guaranteed_ps_floor(1.0, 2.0, 2.0) == pytest.approx(1.0)

    def test_validity_edge(self):
        guaranteed_ps_floor(0.59, 1.0, 1.0)
        with pytest.raises(BoundsError):
            guaranteed_ps_floor(0.58, 1.0, 1.0)
        assert FIDELITY_FLOOR_MIN == pytest.approx(0.5888, abs=1e-4)

    def test_value(self):
        assert guaranteed_ps_floor(0.97, 1.0, math.sqrt(2)) == pytest.approx(0.47)

    def test_floor_holds_when_gamma_lambda_at_least_one(self):
        # the printed floor is the exact-evolution lower bound with gamma^2
        # replaced by 1/Lambda^2, so it guarantees P_s once gamma Lambda >= 1
        rng = np.random.default_rng(8)
        for _ in range(1000):
            op = random_op(rng)
            psi = random_state(rng, 2)
            lam = lambda_norm(op)
            eta = np.linalg.norm(op.matrix() @ psi.amplitudes)
            g = rng.uniform(1, math.pi / 2) / lam
            ps, _, f = td_exact(op, psi, g)
            f_guaranteed = 1 - (g * lam) ** 2 / 6
            assert f >= f_guaranteed - 1e-12
            assert ps >= guaranteed_ps_floor(f_guaranteed, eta, lam) - 1e-12

    def test_floor_not_a_guarantee_for_short_times(self):
        # gamma = 0.3, Lambda = sqrt(2): P_s is near 0.085, far below 0.47
        ps, _, f = td_exact(PauliSum.from_signed(1, [(1 / math.sqrt(2), "X"),
                                                     (1 / math.sqrt(2), "I")]),
                            new_basis_state(1), 0.3)
        assert ps < guaranteed_ps_floor(0.97, 1.0, math.sqrt(2))


class TestImperfectEvolution:
    def test_zero_error(self):
        r = imperfect_evolution_bounds(TDBoundInputs(0.3, 1.0, 1.0), p_s=0.08)
        assert r.cos_alpha_floor == 1
        assert r.ps_window == (0.08, 0.08)

    def test_budget_ratio(self):
        r = imperfect_evolution_bounds(TDBoundInputs(0.3, 1.2, 0.9, F_min=0.95))
        assert r.delta_U_budget_gamma == pytest.approx(r.delta_V_budget_gamma / 2)
        assert r.delta_U_budget_fidelity == pytest.approx(r.delta_V_budget_fidelity / 2)

    def test_printed_forms(self):
        g, lam, eta, f = 0.3, 1.2, 0.9, 0.95
        r = imperfect_evolution_bounds(TDBoundInputs(g, lam, eta, F_min=f, delta_V=0.01))
        assert r.delta_V_budget_gamma == pytest.approx(eta**2 / 4 * g**4 * eta**2 * lam**2)
        assert r.delta_V_budget_fidelity == pytest.approx(eta**2 / (2 * lam**2) * (1 - f) ** 2)
        assert r.f_floor == pytest.approx(
            (1 - (g * lam) ** 2 / 2) - (2 - (g * lam) ** 2 / 3) * 0.01 / (g * eta) ** 2)

    def test_delta_u_implies_delta_v(self):
        a = imperfect_evolution_bounds(TDBoundInputs(0.3, 1, 1, delta_U=0.01), p_s=0.1)
        b = imperfect_evolution_bounds(TDBoundInputs(0.3, 1, 1, delta_V=0.02), p_s=0.1)
        assert a == b

    def test_zero_gamma_eta(self):
        with pytest.raises(BoundsError):
            imperfect_evolution_bounds(TDBoundInputs(0.0, 1.0, 1.0))

    def test_perturbation_oracle(self):
        rng = np.random.default_rng(99)
        op = nuclear_op_first_q(0.7)
        lam = lambda_norm(op)
        psi = new_basis_state(1, "1")
        g = 0.3
        u = matrix_functions(op, g).exp
        v = td_unitary_reference(op, g)
        full = np.kron(psi.amplitudes, [1, 0])  # ancilla LSB in |0>
        ps, _, _ = td_exact(op, psi, g)
        eta = np.linalg.norm(op.matrix() @ psi.amplitudes)
        for _ in range(100):
            du = rng.uniform(1e-4, 0.2)
            ut = u @ random_unitary(rng, 2, du)
            assert np.linalg.norm(ut - u, 2) == pytest.approx(du, rel=1e-8)
            # V~ built from U~ exactly as V from U
            h = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
            hz = np.kron(np.eye(2), np.diag([1, -1]) @ h)
            ctrl = np.kron(ut.conj().T, np.diag([1, 0])) + np.kron(ut, np.diag([0, 1]))
            vt = hz @ ctrl @ np.kron(np.eye(2), h)
            assert np.linalg.norm(vt - v, 2) <= 2 * du + 1e-12
            out = vt @ full
            pst = float(np.sum(np.abs(out[1::2]) ** 2))
            r = imperfect_evolution_bounds(TDBoundInputs(g, lam, eta, delta_U=du), p_s=ps)
            assert r.ps_window[0] - 1e-12 <= pst <= r.ps_window[1] + 1e-12

    def test_trace_distance_chain(self):
        rng = np.random.default_rng(5)
        proj = np.diag([0, 1, 0, 1]).astype(complex)
        for _ in range(500):
            delta = rng.uniform(0, 0.5)
            a_u = random_unitary(rng, 4, rng.uniform(0.1, 1.5))
            b_u = a_u @ random_unitary(rng, 4, delta)
            psi = random_state(rng, 2).amplitudes
            shift, sin_a, dist = trace_distance_shift(a_u @ psi, b_u @ psi, proj)
            assert dist <= delta + 1e-12
            assert shift <= sin_a + 1e-12


class TestTaylorSine:
    def test_small_gamma(self):
        r = taylor_sine_bounds(nuclear_op_first_q(0.4), new_basis_state(1, "1"), 1e-8)
        assert max(abs(x) for x in r.xsin + r.sin2[:3]) < 1e-14

    def test_pauli_x(self):
        op = PauliSum.from_signed(1, [(1.0, "X")])
        r = taylor_sine_bounds(op, new_basis_state(1), 0.5)
        assert r.sin2[1] == pytest.approx(math.sin(0.5) ** 2)
        assert r.sin2[0] == pytest.approx(0.25 * (1 - 0.25 / 3))
        assert r.sin2[3] == pytest.approx(math.sin(0.5) ** 2)

    def test_random_two_qubit(self):
        rng = np.random.default_rng(17)
        for _ in range(1000):
            op = random_op(rng)
            g = rng.uniform(1e-3, 1) * math.pi / (2 * lambda_norm(op))
            taylor_sine_bounds(op, random_state(rng, 2), g)

    def test_gamma_limit(self):
        op = PauliSum.from_signed(1, [(1.0, "X")])
        with pytest.raises(BoundsError):
            taylor_sine_bounds(op, new_basis_state(1), 2.0)

    def test_non_hermitian(self):
        op = PauliSum.from_signed(1, [(1j, "X")])
        with pytest.raises(BoundsError):
            taylor_sine_bounds(op, new_basis_state(1), 0.1)
