"""Dense state-vector simulation.

Bitstrings are written qubit-0-first: character ``i`` of ``"10"`` is the value
of qubit ``i``. The basis index of a bitstring is ``sum(b_i * 2**i)`` so qubit
0 is the least-significant bit.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .gates import ATOL, Circuit, GateError, PlacedGate

__all__ = [
    "SimulationError",
    "ImpossibleOutcomeError",
    "StateVector",
    "MeasurementDistribution",
    "ShotHistogram",
    "bits_to_index",
    "index_to_bits",
    "new_basis_state",
    "apply_matrix",
    "apply_gate",
    "run_circuit",
    "embed_logical",
    "logical_probabilities",
    "circuit_unitary",
    "measurement_distribution",
    "sample_shots",
    "post_select",
    "reduced_state",
    "marginal_probabilities",
    "fidelity",
]

MAX_QUBITS = 20
IMPOSSIBLE_PROB = 1e-14


class SimulationError(ValueError):
    """Bad dimensions, indices or arguments for the simulator."""


class ImpossibleOutcomeError(SimulationError):
    """Post-selected outcome has (numerically) zero probability."""


def bits_to_index(bits: str) -> int:
    if any(c not in "01" for c in bits):
        raise SimulationError(f"invalid bitstring {bits!r}")
    return sum(1 << i for i, c in enumerate(bits) if c == "1")


def index_to_bits(index: int, n: int) -> str:
    return "".join("1" if (index >> i) & 1 else "0" for i in range(n))


@dataclass(frozen=True)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise SimulationError(f"unsupported qubit count {self.n_qubits}")
        amp = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amp.size != 2**self.n_qubits:
            raise SimulationError(
                f"{amp.size} amplitudes for {self.n_qubits} qubits"
            )
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def from_array(cls, amps, normalize: bool = False) -> "StateVector":
        amps = np.asarray(amps, dtype=complex).reshape(-1)
        n = int(round(np.log2(amps.size)))
        if 2**n != amps.size:
            raise SimulationError("length is not a power of two")
        if normalize:
            nrm = np.linalg.norm(amps)
            if nrm == 0:
                raise SimulationError("cannot normalize the zero vector")
            amps = amps / nrm
        return cls(n, amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self, other: "StateVector") -> "StateVector":
        """``other`` occupies the low qubits, ``self`` the high ones."""
        return StateVector(self.n_qubits + other.n_qubits,
                           np.kron(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class MeasurementDistribution:
    qubits: tuple[int, ...]
    probabilities: Mapping[str, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "qubits", tuple(self.qubits))
        total = sum(self.probabilities.values())
        if self.probabilities and abs(total - 1.0) > 1e-9:
            raise SimulationError(f"probabilities sum to {total}")

    def as_array(self) -> np.ndarray:
        """Probabilities indexed by ``bits_to_index`` over ``qubits``."""
        out = np.zeros(2 ** len(self.qubits))
        for b, p in self.probabilities.items():
            out[bits_to_index(b)] = p
        return out


@dataclass(frozen=True)
class ShotHistogram:
    counts: Mapping[str, int]
    total_shots: int
    rng_seed: int | None = None

    def __post_init__(self) -> None:
        if sum(self.counts.values()) != self.total_shots:
            raise SimulationError("counts do not sum to total_shots")

    @property
    def n_bits(self) -> int:
        return len(next(iter(self.counts))) if self.counts else 0

    def as_array(self) -> np.ndarray:
        out = np.zeros(2**self.n_bits, dtype=np.int64)
        for b, c in self.counts.items():
            out[bits_to_index(b)] += c
        return out

    @classmethod
    def from_array(cls, counts: np.ndarray, n_bits: int,
                   seed: int | None = None) -> "ShotHistogram":
        d = {index_to_bits(i, n_bits): int(c)
             for i, c in enumerate(counts) if c > 0}
        return cls(d, int(np.sum(counts)), seed)

    def frequency(self, predicate) -> float:
        hits = sum(c for b, c in self.counts.items() if predicate(b))
        return hits / self.total_shots


def new_basis_state(n_qubits: int, bitstring: str | None = None) -> StateVector:
    if bitstring is None:
        bitstring = "0" * n_qubits
    if len(bitstring) != n_qubits:
        raise SimulationError(
            f"bitstring {bitstring!r} does not have {n_qubits} bits"
        )
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[bits_to_index(bitstring)] = 1.0
    return StateVector(n_qubits, amps)


def apply_matrix(psi: np.ndarray, mat: np.ndarray, qubits: Sequence[int],
                 n: int) -> np.ndarray:
    """Apply a local matrix to the last axis of ``psi`` (shape ``(..., 2**n)``).

    ``qubits[0]`` is the most-significant bit of the local matrix index.
    """
    k = len(qubits)
    lead = psi.shape[:-1]
    t = psi.reshape((-1,) + (2,) * n)
    # tensor axis of qubit q is 1 + (n - 1 - q)
    axes = [1 + n - 1 - q for q in qubits]
    t = np.moveaxis(t, axes, list(range(1, k + 1)))
    shp = t.shape
    t = t.reshape(shp[0], 2**k, -1)
    t = np.matmul(mat, t)
    t = t.reshape(shp)
    t = np.moveaxis(t, list(range(1, k + 1)), axes)
    return t.reshape(lead + (2**n,))


def _check_gate(gate: PlacedGate, n: int) -> None:
    if max(gate.qubits) >= n:
        raise SimulationError(
            f"{gate.kind} on {gate.qubits} out of range for {n} qubits"
        )


def apply_gate(state: StateVector, gate: PlacedGate) -> StateVector:
    _check_gate(gate, state.n_qubits)
    amps = apply_matrix(state.amplitudes, gate.matrix, gate.qubits,
                        state.n_qubits)
    return StateVector(state.n_qubits, amps)


def embed_logical(circuit: Circuit, state: StateVector) -> np.ndarray:
    """Place a logical input state onto the circuit's physical qubits."""
    lay = circuit.layout_in()
    if state.n_qubits != len(lay):
        raise SimulationError(
            f"state has {state.n_qubits} qubits, circuit expects {len(lay)}"
        )
    if circuit.initial_layout is None:
        return np.array(state.amplitudes)
    n = circuit.n_qubits
    out = np.zeros(2**n, dtype=complex)
    idx = np.arange(2**state.n_qubits)
    phys = np.zeros_like(idx)
    for i, p in enumerate(lay):
        phys |= ((idx >> i) & 1) << p
    out[phys] = state.amplitudes
    return out


def run_circuit(circuit: Circuit, state: StateVector | None = None
                ) -> StateVector:
    """Apply every gate of ``circuit`` to a logical input state.

    The result lives on the circuit's physical qubits; use
    ``circuit.layout_out()`` to locate logical qubits afterwards.
    """
    if state is None:
        state = new_basis_state(circuit.n_logical)
    psi = embed_logical(circuit, state)
    n = circuit.n_qubits
    for g in circuit.gates:
        _check_gate(g, n)
        psi = apply_matrix(psi, g.matrix, g.qubits, n)
    return StateVector(n, psi)


def logical_probabilities(circuit: Circuit, probs: np.ndarray) -> np.ndarray:
    """Marginal of physical outcome probabilities onto the logical qubits."""
    n = circuit.n_qubits
    if circuit.initial_layout is None:
        return np.asarray(probs, dtype=float)
    return marginal_probabilities(np.asarray(probs, dtype=float),
                                  circuit.layout_out(), n)


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Dense physical unitary (columns are images of basis states)."""
    n = circuit.n_qubits
    if n > 12:
        raise SimulationError("dense unitary limited to 12 qubits")
    u = np.eye(2**n, dtype=complex)  # rows = basis inputs
    for g in circuit.gates:
        _check_gate(g, n)
        u = apply_matrix(u, g.matrix, g.qubits, n)
    return u.T


def _check_qubits(qubits: Sequence[int], n: int) -> tuple[int, ...]:
    qubits = tuple(int(q) for q in qubits)
    if any(q < 0 or q >= n for q in qubits):
        raise SimulationError(f"qubit index out of range in {qubits}")
    if len(set(qubits)) != len(qubits):
        raise SimulationError(f"duplicate qubit in {qubits}")
    return qubits


def marginal_probabilities(probs: np.ndarray, qubits: Sequence[int],
                           n: int) -> np.ndarray:
    """Marginal over ``qubits``; output indexed qubit-list-first (LSB first)."""
    idx = np.arange(2**n)
    sub = np.zeros_like(idx)
    for j, q in enumerate(qubits):
        sub |= ((idx >> q) & 1) << j
    return np.bincount(sub, weights=probs, minlength=2 ** len(qubits))


def measurement_distribution(state: StateVector, qubits: Sequence[int] | None = None
                             ) -> MeasurementDistribution:
    n = state.n_qubits
    if qubits is None:
        qubits = range(n)
    qubits = _check_qubits(qubits, n)
    probs = np.abs(state.amplitudes) ** 2
    probs = probs / probs.sum()
    marg = marginal_probabilities(probs, qubits, n)
    k = len(qubits)
    return MeasurementDistribution(
        qubits, {index_to_bits(i, k): float(p) for i, p in enumerate(marg)}
    )


def sample_shots(dist: MeasurementDistribution, shots: int, seed: int
                 ) -> ShotHistogram:
    if shots < 1:
        raise SimulationError("shots must be >= 1")
    if not dist.probabilities:
        raise SimulationError("empty distribution")
    keys = sorted(dist.probabilities)
    p = np.array([dist.probabilities[k] for k in keys], dtype=float)
    p = np.clip(p, 0.0, None)
    p = p / p.sum()
    rng = np.random.default_rng(seed)
    draws = rng.multinomial(shots, p)
    counts = {k: int(c) for k, c in zip(keys, draws) if c > 0}
    return ShotHistogram(counts, shots, seed)


def post_select(state: StateVector, qubits: Sequence[int], outcome: str
                ) -> tuple[float, StateVector]:
    """Project ``qubits`` onto ``outcome``; return probability and new state.

    The returned state keeps all qubits (the measured ones are left in the
    outcome basis state).
    """
    n = state.n_qubits
    qubits = _check_qubits(qubits, n)
    if len(outcome) != len(qubits):
        raise SimulationError("outcome length does not match qubit list")
    idx = np.arange(2**n)
    mask = np.ones(2**n, dtype=bool)
    for q, b in zip(qubits, outcome):
        mask &= ((idx >> q) & 1) == int(b)
    amps = np.where(mask, state.amplitudes, 0)
    prob = float(np.sum(np.abs(amps) ** 2))
    if prob < IMPOSSIBLE_PROB:
        raise ImpossibleOutcomeError(
            f"outcome {outcome!r} on {qubits} has probability {prob:.3g}"
        )
    return prob, StateVector(n, amps / np.sqrt(prob))


def reduced_state(state: StateVector, keep: Sequence[int]) -> StateVector:
    """Extract a pure factor on ``keep`` when the rest is a basis state."""
    n = state.n_qubits
    keep = _check_qubits(keep, n)
    rest = [q for q in range(n) if q not in keep]
    amps = state.amplitudes
    k = int(np.argmax(np.abs(amps)))
    idx = np.arange(2**n)
    mask = np.ones(2**n, dtype=bool)
    for q in rest:
        mask &= ((idx >> q) & 1) == ((k >> q) & 1)
    if abs(np.sum(np.abs(amps[mask]) ** 2) - np.sum(np.abs(amps) ** 2)) > 1e-9:
        raise SimulationError("state is not a product with a basis state")
    out = np.zeros(2 ** len(keep), dtype=complex)
    sub = np.zeros_like(idx)
    for j, q in enumerate(keep):
        sub |= ((idx >> q) & 1) << j
    out[sub[mask]] = amps[mask]
    return StateVector(len(keep), out)


def fidelity(a: StateVector, b: StateVector) -> float:
    if a.n_qubits != b.n_qubits:
        raise SimulationError("dimension mismatch")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)
