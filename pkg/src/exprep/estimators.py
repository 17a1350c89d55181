"""Protocol execution and success/transition probability estimators.

Both protocols measure every logical qubit. A shot is a success when the
ancilla register shows the accepting outcome (``"1"`` for the time-dependent
method, all zeros for LCU). The transition numerator counts successful
shots whose system register equals the designated final basis state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuits import LCUSpec, TDPrepSpec, lcu_full_circuit, td_circuit
from .noise import NoiseSpec, noisy_probabilities, simulate_with_cnot_noise
from .operators import PauliSum, exact_excited_state, lambda_norm, matrix_functions
from .simulator import (
    StateVector,
    bits_to_index,
    fidelity,
    new_basis_state,
)

__all__ = [
    "EstimatorError",
    "Estimate",
    "ProtocolResult",
    "Observables",
    "td_exact",
    "lcu_exact",
    "td_observables",
    "lcu_observables",
    "estimate_from_counts",
    "td_run",
    "lcu_run",
    "depolarized_predictions",
    "ratio_error_bound",
]


class EstimatorError(ValueError):
    """Invalid protocol input."""


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "stderr", float(self.stderr))
        if not math.isfinite(self.stderr) or self.stderr < 0:
            raise EstimatorError(f"invalid standard error {self.stderr}")


@dataclass(frozen=True)
class ProtocolResult:
    p_success: Estimate
    p_transition: Estimate | None
    estimator_kind: str  # TD-Pt, LCU-PtA or LCU-PtB
    shots: int
    flags: tuple[str, ...] = ()

    @property
    def failed(self) -> bool:
        return self.p_transition is None


@dataclass(frozen=True)
class Observables:
    """Outcome masks over the full logical register for one protocol."""

    n_ancilla: int
    n_system: int
    accept: str  # ancilla bitstring
    final: str  # system bitstring
    success_mask: np.ndarray = field(repr=False)
    numerator_mask: np.ndarray = field(repr=False)

    def success_probability(self, probs: np.ndarray) -> float:
        return float(np.sum(probs[..., self.success_mask], axis=-1))

    def numerator(self, probs: np.ndarray) -> float:
        return float(np.sum(probs[..., self.numerator_mask], axis=-1))


def _observables(n_anc: int, n_sys: int, accept: str, final: str) -> Observables:
    if len(accept) != n_anc or len(final) != n_sys:
        raise EstimatorError("accept/final bitstrings have the wrong length")
    idx = np.arange(2 ** (n_anc + n_sys))
    anc = idx & ((1 << n_anc) - 1)
    sysv = idx >> n_anc
    succ = anc == bits_to_index(accept)
    num = succ & (sysv == bits_to_index(final))
    return Observables(n_anc, n_sys, accept, final, succ, num)


def td_observables(n_system: int, final: str) -> Observables:
    return _observables(1, n_system, "1", final)


def lcu_observables(n_ancilla: int, n_system: int, final: str) -> Observables:
    return _observables(n_ancilla, n_system, "0" * n_ancilla, final)


# ---------------------------------------------------------------------------
# exact references
# ---------------------------------------------------------------------------


def td_exact(op: PauliSum, psi0: StateVector, gamma: float
             ) -> tuple[float, StateVector, float]:
    """Success probability, post-selected state and fidelity to O|psi0>."""
    lam = lambda_norm(op)
    if not 0 < gamma <= math.pi / (2 * lam) + 1e-12:
        raise EstimatorError("gamma must lie in (0, pi/(2 Lambda)]")
    ref = exact_excited_state(op, psi0)
    v = matrix_functions(op, gamma).sin @ psi0.amplitudes
    ps = float(np.vdot(v, v).real)
    if ps < 1e-300:
        raise EstimatorError("zero success probability")
    state = StateVector(op.n_qubits, v / math.sqrt(ps))
    return ps, state, fidelity(state, ref.state)


def lcu_exact(op: PauliSum, psi0: StateVector) -> tuple[float, StateVector]:
    """``P_s = eta^2 / Lambda^2`` and the normalised ``O|psi0>``."""
    ref = exact_excited_state(op, psi0)
    return ref.eta**2 / lambda_norm(op) ** 2, ref.state


# ---------------------------------------------------------------------------
# shot estimators
# ---------------------------------------------------------------------------


def estimate_from_counts(counts: np.ndarray, obs: Observables,
                         kind: str, scale: float = 1.0,
                         flags: tuple[str, ...] = ()) -> ProtocolResult:
    """Binomial estimates from a count array over the logical register.

    ``kind`` selects the transition estimator: ``TD-Pt`` and ``LCU-PtB`` are
    the ratio ``numerator / successes``; ``LCU-PtA`` is ``scale`` times the
    joint frequency, with ``scale = 1 / (expected P_s)``.
    """
    counts = np.asarray(counts)
    shots = int(counts.sum())
    if shots < 1:
        raise EstimatorError("no shots")
    n_s = int(counts[obs.success_mask].sum())
    n_n = int(counts[obs.numerator_mask].sum())
    ps = n_s / shots
    p_s = Estimate(ps, math.sqrt(ps * (1 - ps) / shots))
    if n_s == 0:
        return ProtocolResult(p_s, None, kind, shots, flags + ("zero-success",))
    if kind in ("TD-Pt", "LCU-PtB"):
        r = n_n / n_s
        pt = Estimate(r, math.sqrt(r * (1 - r) / n_s))
    elif kind == "LCU-PtA":
        f = n_n / shots
        pt = Estimate(scale * f, scale * math.sqrt(f * (1 - f) / shots))
    else:
        raise EstimatorError(f"unknown estimator {kind!r}")
    return ProtocolResult(p_s, pt, kind, shots, flags)


def _system_input(psi0: StateVector, n_anc: int) -> StateVector:
    return psi0.tensor(new_basis_state(n_anc))


def _sample(circuit, state, shots, noise, seed) -> np.ndarray:
    if noise is None:
        noise = NoiseSpec()
    if shots is None:
        return noisy_probabilities(circuit, state, noise)
    return simulate_with_cnot_noise(circuit, state, noise, shots, seed).as_array()


def td_run(spec: TDPrepSpec, psi0: StateVector, shots: int | None,
           noise: NoiseSpec | None = None, seed=None, final: str | None = None
           ) -> ProtocolResult:
    """Run the time-dependent circuit and estimate ``P_s`` and ``P_t``.

    ``shots=None`` returns the exact (infinite-shot) values under ``noise``.
    """
    n_sys = spec.operator.n_qubits
    if final is None:
        raise EstimatorError("final basis state required")
    if spec.ancilla_index != 0:
        raise EstimatorError("shot estimators expect the ancilla on qubit 0")
    circ = td_circuit(spec)
    obs = td_observables(n_sys, final)
    data = _sample(circ, _system_input(psi0, 1), shots, noise, seed)
    if shots is None:
        return _exact_result(data, obs, "TD-Pt")
    return estimate_from_counts(data, obs, "TD-Pt")


def lcu_run(spec: LCUSpec, psi0: StateVector, shots: int | None,
            noise: NoiseSpec | None = None, seed=None, final: str | None = None
            ) -> tuple[ProtocolResult, ProtocolResult]:
    """Run an LCU circuit; return the (P_t^A, P_t^B) results of one data set."""
    if final is None:
        raise EstimatorError("final basis state required")
    m = spec.ancilla_count
    circ = lcu_full_circuit(spec)
    obs = lcu_observables(m, spec.n_system, final)
    ps_expected, _ = lcu_exact(spec.operator, psi0)
    data = _sample(circ, _system_input(psi0, m), shots, noise, seed)
    if shots is None:
        return (_exact_result(data, obs, "LCU-PtA", 1 / ps_expected),
                _exact_result(data, obs, "LCU-PtB"))
    return (estimate_from_counts(data, obs, "LCU-PtA", 1 / ps_expected),
            estimate_from_counts(data, obs, "LCU-PtB"))


def _exact_result(probs: np.ndarray, obs: Observables, kind: str,
                  scale: float = 1.0) -> ProtocolResult:
    ps = obs.success_probability(probs)
    num = obs.numerator(probs)
    if ps < 1e-14:
        return ProtocolResult(Estimate(ps), None, kind, 0, ("zero-success",))
    pt = scale * num if kind == "LCU-PtA" else num / ps
    return ProtocolResult(Estimate(ps), Estimate(pt), kind, 0, ("exact",))


# ---------------------------------------------------------------------------
# depolarizing analytics
# ---------------------------------------------------------------------------


def depolarized_predictions(p_s: float, m: float, k: int, n: int, eps: float,
                            p_s_known: float | None = None
                            ) -> tuple[float, float, float]:
    """``(P_s^E, m^E, m~^E)`` under a global depolarizing channel.

    ``p_s_known`` is the a-priori success probability used by the rescaled
    estimator ``m~`` (defaults to ``p_s``).
    """
    if not 0 <= eps <= 1:
        raise EstimatorError("eps must lie in [0, 1]")
    d = 2 ** (n + k)
    ps_e = (1 - eps) * p_s + eps / 2**k
    if ps_e <= 0:
        raise EstimatorError("depolarized success probability is zero")
    joint = (1 - eps) * p_s * m + eps / d
    known = p_s if p_s_known is None else p_s_known
    m_e = joint / ps_e
    m_tilde = joint / known
    return ps_e, m_e, m_tilde


def ratio_error_bound(p_s: float, m: float, k: int, n: int, eps: float) -> float:
    """Upper bound on ``|m^E - m|`` for the ratio estimator."""
    if eps >= 1:
        return math.inf
    d = 2 ** (n + k)
    a = eps / (1 - eps)
    return a * (1 / (d * p_s) + m / (2**k * p_s) + a / (d * 2**k * p_s**2))
