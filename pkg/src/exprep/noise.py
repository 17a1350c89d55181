"""Simulated hardware noise.

Noise sites are every CNOT of the gate-expanded circuit (two-qubit
depolarizing), a global depolarizing mix over all measured qubits, and
independent per-qubit readout flips. Histograms are over the circuit's
logical qubits, ancillas first.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .gates import Circuit, PlacedGate, expand_gates
from .simulator import (
    ShotHistogram,
    SimulationError,
    StateVector,
    apply_matrix,
    embed_logical,
    index_to_bits,
    logical_probabilities,
    new_basis_state,
)

__all__ = [
    "NoiseError",
    "CalibrationError",
    "NoiseSpec",
    "ReadoutCalibration",
    "DEFAULT_NOISE",
    "amplify_noise",
    "readout_matrices",
    "apply_readout_channel",
    "apply_readout_noise",
    "apply_global_depolarizing",
    "noisy_probabilities",
    "simulate_with_cnot_noise",
    "run_calibration",
]

_PAULIS = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]
_PAULI2 = [np.kron(a, b) for a in _PAULIS for b in _PAULIS]


class NoiseError(ValueError):
    """Invalid noise parameters."""


class CalibrationError(ValueError):
    """Readout calibration cannot be inverted."""


@dataclass(frozen=True)
class NoiseSpec:
    """Noise parameters.

    ``readout`` is either one ``(e0, e1)`` pair used for every qubit or a
    tuple of per-qubit pairs. ``e0`` is the probability of reading 1 after
    preparing 0, ``e1`` of reading 0 after preparing 1.
    """

    readout: tuple = (0.0, 0.0)
    cnot_depol: float = 0.0
    global_depol: float = 0.0
    cnot_repetition: int = 1

    def __post_init__(self) -> None:
        ro = self.readout
        if len(ro) == 2 and all(isinstance(x, (int, float)) for x in ro):
            ro = (float(ro[0]), float(ro[1]))
        else:
            ro = tuple((float(a), float(b)) for a, b in ro)
        object.__setattr__(self, "readout", ro)
        for e in np.ravel(ro):
            if not 0 <= e < 1:
                raise NoiseError(f"readout rate {e} outside [0, 1)")
        if not 0 <= self.cnot_depol < 1:
            raise NoiseError("cnot_depol must lie in [0, 1)")
        if not 0 <= self.global_depol <= 1:
            raise NoiseError("global_depol must lie in [0, 1]")
        if int(self.cnot_repetition) != self.cnot_repetition or self.cnot_repetition < 1:
            raise NoiseError("cnot_repetition must be an integer >= 1")

    def readout_rates(self, n: int) -> np.ndarray:
        """Array of shape ``(n, 2)`` holding ``(e0, e1)`` per qubit."""
        ro = self.readout
        if isinstance(ro[0], float):
            return np.tile(np.array(ro), (n, 1))
        if len(ro) != n:
            raise NoiseError(f"{len(ro)} readout pairs for {n} qubits")
        return np.array(ro, dtype=float)

    @property
    def has_readout(self) -> bool:
        return bool(np.any(np.ravel(self.readout)))

    @property
    def noiseless(self) -> bool:
        return not self.has_readout and self.cnot_depol == 0 and self.global_depol == 0


DEFAULT_NOISE = NoiseSpec(readout=(0.02, 0.02), cnot_depol=0.01)


def amplify_noise(circuit: Circuit, k: int) -> Circuit:
    """Replace each CNOT by ``2k - 1`` copies (SWAPs etc. expanded first)."""
    if int(k) != k or k < 1:
        raise NoiseError("k must be an integer >= 1")
    circ = expand_gates(circuit)
    if k == 1:
        return circ
    out: list[PlacedGate] = []
    for g in circ.gates:
        out += [g] * (2 * k - 1) if g.kind == "CNOT" else [g]
    return circ.with_gates(out)


# ---------------------------------------------------------------------------
# readout
# ---------------------------------------------------------------------------


def readout_matrices(rates: np.ndarray) -> list[np.ndarray]:
    """Per-qubit confusion matrices ``P[measured, prepared]``."""
    return [np.array([[1 - e0, e1], [e0, 1 - e1]]) for e0, e1 in rates]


def _apply_per_qubit(probs: np.ndarray, mats: Sequence[np.ndarray]) -> np.ndarray:
    """Apply ``mats[q]`` to bit ``q`` of a probability vector (qubit 0 = LSB)."""
    n = len(mats)
    out = np.asarray(probs, dtype=float)
    lead = out.shape[:-1]
    for q, m in enumerate(mats):
        out = apply_matrix(out.reshape(lead + (2**n,)).astype(complex), m, [q], n).real
    return out


def apply_readout_channel(probs: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """Exact outcome distribution after independent readout flips."""
    return _apply_per_qubit(probs, readout_matrices(rates))


def apply_readout_noise(hist: ShotHistogram, spec: NoiseSpec,
                        seed: int | np.random.Generator | None) -> ShotHistogram:
    """Flip each measured bit of every shot independently."""
    n = hist.n_bits
    rates = spec.readout_rates(n)
    if not np.any(rates) or hist.total_shots == 0:
        return hist
    rng = np.random.default_rng(seed)
    counts = hist.as_array()
    out = np.zeros_like(counts)
    for idx in np.flatnonzero(counts):
        e = np.zeros(2**n)
        e[idx] = 1.0
        row = np.clip(apply_readout_channel(e, rates), 0, None)
        out += rng.multinomial(counts[idx], row / row.sum())
    return ShotHistogram.from_array(out, n, hist.rng_seed)


def apply_global_depolarizing(hist: ShotHistogram, eps: float,
                              seed: int | np.random.Generator | None
                              ) -> ShotHistogram:
    """With probability ``eps`` replace each shot by a uniform bitstring."""
    if not 0 <= eps <= 1:
        raise NoiseError("eps must lie in [0, 1]")
    if eps == 0 or hist.total_shots == 0:
        return hist
    rng = np.random.default_rng(seed)
    n = hist.n_bits
    counts = hist.as_array()
    hit = rng.binomial(counts, eps)
    counts = counts - hit + rng.multinomial(int(hit.sum()), np.full(2**n, 2.0**-n))
    return ShotHistogram.from_array(counts, n, hist.rng_seed)


# ---------------------------------------------------------------------------
# CNOT depolarizing
# ---------------------------------------------------------------------------


def _full_depolarize(rho: np.ndarray, q: int, n: int) -> np.ndarray:
    """Replace qubit ``q`` by the maximally mixed state (rho is 2^n x 2^n)."""
    hi, lo = 2 ** (n - 1 - q), 2**q
    t = rho.reshape(hi, 2, lo, hi, 2, lo)
    tr = 0.5 * (t[:, 0, :, :, 0, :] + t[:, 1, :, :, 1, :])
    out = np.zeros_like(t)
    out[:, 0, :, :, 0, :] = tr
    out[:, 1, :, :, 1, :] = tr
    return out.reshape(rho.shape)


def _evolve_density(circuit: Circuit, psi: np.ndarray, p: float) -> np.ndarray:
    n = circuit.n_qubits
    rho = np.outer(psi, psi.conj()).reshape(-1)
    for g in circuit.gates:
        # row index holds qubits n..2n-1, column index qubits 0..n-1
        rho = apply_matrix(rho, g.matrix, [n + q for q in g.qubits], 2 * n)
        rho = apply_matrix(rho, g.matrix.conj(), list(g.qubits), 2 * n)
        if g.kind == "CNOT" and p > 0:
            r = rho.reshape(2**n, 2**n)
            mixed = _full_depolarize(_full_depolarize(r, g.qubits[0], n),
                                     g.qubits[1], n)
            rho = ((1 - p) * r + p * mixed).reshape(-1)
    return np.real(np.diag(rho.reshape(2**n, 2**n))).copy()


def _evolve_trajectories(circuit: Circuit, psi: np.ndarray, p: float,
                         shots: int, rng: np.random.Generator) -> np.ndarray:
    """Sample one outcome per shot with stochastic Pauli insertion."""
    n = circuit.n_qubits
    batch = np.tile(psi, (shots, 1))
    for g in circuit.gates:
        batch = apply_matrix(batch, g.matrix, g.qubits, n)
        if g.kind == "CNOT" and p > 0:
            fire = rng.random(shots) < p
            which = rng.integers(0, 16, size=shots)
            for k in range(1, 16):
                sel = np.flatnonzero(fire & (which == k))
                if sel.size:
                    batch[sel] = apply_matrix(batch[sel], _PAULI2[k], g.qubits, n)
    probs = np.abs(batch) ** 2
    probs /= probs.sum(axis=1, keepdims=True)
    cum = np.cumsum(probs, axis=1)
    u = rng.random((shots, 1))
    return np.minimum((cum < u).sum(axis=1), 2**n - 1)


def _check_input(circuit: Circuit, psi0: StateVector | None) -> StateVector:
    if psi0 is None:
        psi0 = new_basis_state(circuit.n_logical)
    if psi0.n_qubits != circuit.n_logical:
        raise SimulationError("input state does not match the circuit width")
    return psi0


def noisy_probabilities(circuit: Circuit, psi0: StateVector | None,
                        spec: NoiseSpec) -> np.ndarray:
    """Exact outcome distribution over logical qubits under ``spec``.

    The CNOT channel is ``rho -> (1-p) rho + p (1/4 (x) Tr_ab rho)``, the
    average of a uniformly drawn two-qubit Pauli inserted with probability p.
    """
    psi0 = _check_input(circuit, psi0)
    circ = amplify_noise(circuit, spec.cnot_repetition)
    psi = embed_logical(circ, psi0)
    probs = _evolve_density(circ, psi, spec.cnot_depol)
    probs = logical_probabilities(circ, probs)
    q = circ.n_logical
    eps = spec.global_depol
    if eps:
        probs = (1 - eps) * probs + eps / 2**q
    if spec.has_readout:
        probs = apply_readout_channel(probs, spec.readout_rates(q))
    probs = np.clip(probs, 0, None)
    return probs / probs.sum()


def simulate_with_cnot_noise(circuit: Circuit, psi0: StateVector | None,
                             spec: NoiseSpec, shots: int,
                             seed: int | np.random.Generator | None,
                             method: str = "density") -> ShotHistogram:
    """Shot histogram over logical qubits with all noise in ``spec``.

    ``method="density"`` samples the exact channel-averaged distribution;
    ``method="trajectory"`` inserts Paulis shot by shot. Both have the same
    outcome statistics.
    """
    if shots < 1:
        raise SimulationError("shots must be >= 1")
    rng = np.random.default_rng(seed)
    psi0 = _check_input(circuit, psi0)
    q = circuit.n_logical
    if method == "density":
        probs = noisy_probabilities(circuit, psi0, spec)
        # draw in sorted-bitstring order, the order sample_shots uses, so a
        # noiseless spec reproduces plain sampling for the same seed
        order = np.array(sorted(range(2**q), key=lambda i: index_to_bits(i, q)))
        counts = np.zeros(2**q, dtype=np.int64)
        counts[order] = rng.multinomial(shots, probs[order])
        tag = seed if isinstance(seed, (int, np.integer)) else None
        return ShotHistogram.from_array(counts, q, tag)
    if method != "trajectory":
        raise NoiseError(f"unknown method {method!r}")
    circ = amplify_noise(circuit, spec.cnot_repetition)
    psi = embed_logical(circ, psi0)
    phys = _evolve_trajectories(circ, psi, spec.cnot_depol, shots, rng)
    lay = circ.layout_out()
    logical = np.zeros_like(phys)
    for i, ph in enumerate(lay):
        logical |= ((phys >> ph) & 1) << i
    hist = ShotHistogram.from_array(np.bincount(logical, minlength=2**q), q)
    hist = apply_global_depolarizing(hist, spec.global_depol, rng)
    return apply_readout_noise(hist, spec, rng)


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReadoutCalibration:
    """Estimated readout confusion; ``full`` is the optional 2^n matrix."""

    e0: np.ndarray
    e1: np.ndarray
    de0: np.ndarray
    de1: np.ndarray
    full: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        for name in ("e0", "e1", "de0", "de1"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        d = 1 - self.e0 - self.e1
        if np.any(d <= 0):
            raise CalibrationError("calibration is not invertible (e0 + e1 >= 1)")

    @property
    def n_qubits(self) -> int:
        return int(self.e0.size)

    @property
    def matrices(self) -> list[np.ndarray]:
        return readout_matrices(np.stack([self.e0, self.e1], axis=1))

    @classmethod
    def ideal(cls, n: int) -> "ReadoutCalibration":
        z = np.zeros(n)
        return cls(z, z, z, z)


def run_calibration(spec: NoiseSpec, n_qubits: int, shots: int | None,
                    seed: int | np.random.Generator | None,
                    mode: str = "factorized") -> ReadoutCalibration:
    """Simulate prepare-and-measure calibration runs.

    ``factorized``: for each qubit prepare |0> and |1> (2n runs) and count
    flips. ``full``: prepare all 2^n basis states. ``shots=None`` gives the
    infinite-shot limit with zero uncertainties.
    """
    rates = spec.readout_rates(n_qubits)
    rng = np.random.default_rng(seed)
    if shots is not None and shots < 1:
        raise NoiseError("shots must be >= 1")
    if shots is None:
        e0, e1 = rates[:, 0].copy(), rates[:, 1].copy()
        de0 = de1 = np.zeros(n_qubits)
    else:
        e0 = np.array([rng.binomial(shots, r) for r in rates[:, 0]]) / shots
        e1 = np.array([rng.binomial(shots, r) for r in rates[:, 1]]) / shots
        de0 = np.sqrt(e0 * (1 - e0) / shots)
        de1 = np.sqrt(e1 * (1 - e1) / shots)
    full = None
    if mode == "full":
        dim = 2**n_qubits
        full = np.zeros((dim, dim))
        for j in range(dim):
            e = np.zeros(dim)
            e[j] = 1.0
            col = apply_readout_channel(e, rates)
            if shots is not None:
                col = rng.multinomial(shots, np.clip(col, 0, None) / col.sum()) / shots
            full[:, j] = col
    elif mode != "factorized":
        raise NoiseError(f"unknown calibration mode {mode!r}")
    return ReadoutCalibration(e0, e1, de0, de1, full)
