"""Pauli-sum excitation operators, norms and exact matrix functions."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .simulator import StateVector

__all__ = [
    "OperatorError",
    "PauliTerm",
    "PauliSum",
    "NuclearOpParams",
    "ExcitedStateRef",
    "MatrixFunctions",
    "G_P",
    "G_N",
    "pauli_matrix",
    "simple_op",
    "second_quantized_simple_op",
    "nuclear_coefficients",
    "nuclear_op_first_q",
    "nuclear_op_second_q",
    "nuclear_op_uniform",
    "nuclear_uniform_angle",
    "lambda_norm",
    "exact_excited_state",
    "matrix_functions",
    "jordan_wigner_annihilation",
    "operator_to_text",
    "operator_from_text",
]

G_P = 5.586
G_N = -3.826
ETA_MIN = 1e-12
_PHASES = {1: "+", -1: "-", 1j: "+i", -1j: "-i"}

_P1 = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class OperatorError(ValueError):
    """Invalid operator construction or evaluation."""


def pauli_matrix(word: str) -> np.ndarray:
    """Dense matrix of a Pauli word; character ``i`` acts on qubit ``i``."""
    if any(c not in _P1 for c in word):
        raise OperatorError(f"invalid Pauli word {word!r}")
    # qubit 0 is the least-significant bit -> rightmost Kronecker factor
    return reduce(np.kron, [_P1[c] for c in reversed(word)])


@dataclass(frozen=True)
class PauliTerm:
    coeff: float  # lambda_k > 0
    phase: complex  # one of +1, -1, +i, -i
    word: str

    def __post_init__(self) -> None:
        if not self.coeff > 0:
            raise OperatorError(f"coefficient must be > 0, got {self.coeff}")
        ph = complex(self.phase)
        match = [p for p in _PHASES if abs(ph - p) < 1e-12]
        if not match:
            raise OperatorError(f"phase must be +-1 or +-i, got {self.phase}")
        object.__setattr__(self, "phase", complex(match[0]))
        object.__setattr__(self, "coeff", float(self.coeff))

    @property
    def unitary(self) -> np.ndarray:
        return self.phase * pauli_matrix(self.word)


@dataclass(frozen=True)
class PauliSum:
    """``O = sum_k coeff_k * phase_k * P_k`` with every ``coeff_k > 0``."""

    n_qubits: int
    terms: tuple[PauliTerm, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple(self.terms))
        for t in self.terms:
            if len(t.word) != self.n_qubits:
                raise OperatorError(
                    f"word {t.word!r} does not have {self.n_qubits} letters"
                )

    @classmethod
    def from_signed(cls, n_qubits: int, items: Sequence[tuple[complex, str]],
                    tol: float = 0.0) -> "PauliSum":
        """Build from signed coefficients, dropping terms with ``|c| <= tol``."""
        terms = []
        for c, w in items:
            c = complex(c)
            if abs(c) <= tol:
                continue
            if abs(c.imag) < 1e-15:
                terms.append(PauliTerm(abs(c.real), 1 if c.real > 0 else -1, w))
            elif abs(c.real) < 1e-15:
                terms.append(PauliTerm(abs(c.imag), 1j if c.imag > 0 else -1j, w))
            else:
                raise OperatorError("coefficients must be real or imaginary")
        return cls(n_qubits, tuple(terms))

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([t.coeff for t in self.terms])

    def signed(self) -> list[tuple[complex, str]]:
        return [(t.coeff * t.phase, t.word) for t in self.terms]

    def matrix(self) -> np.ndarray:
        dim = 2**self.n_qubits
        m = np.zeros((dim, dim), dtype=complex)
        for t in self.terms:
            m += t.coeff * t.unitary
        return m

    def coefficient_of(self, word: str) -> complex:
        return sum((t.coeff * t.phase for t in self.terms if t.word == word), 0j)

    def scaled(self, factor: float) -> "PauliSum":
        if factor == 0:
            raise OperatorError("scale factor must be non-zero")
        return PauliSum(self.n_qubits, tuple(
            PauliTerm(t.coeff * abs(factor),
                      t.phase * (1 if factor > 0 else -1), t.word)
            for t in self.terms))


def lambda_norm(op: PauliSum) -> float:
    """1-norm of the coefficient vector."""
    return float(sum(t.coeff for t in op.terms))


# ---------------------------------------------------------------------------
# model operators
# ---------------------------------------------------------------------------


def simple_op(theta: float) -> PauliSum:
    """``cos(theta) X + sin(theta) 1`` on one qubit."""
    return PauliSum.from_signed(
        1, [(math.sin(theta), "I"), (math.cos(theta), "X")], tol=1e-15
    )


def second_quantized_simple_op(theta: float) -> PauliSum:
    """``cos(theta)/2 (X0 X1 + Y0 Y1) + sin(theta) 1`` on two qubits."""
    c = math.cos(theta) / 2
    return PauliSum.from_signed(
        2, [(math.sin(theta), "II"), (c, "XX"), (c, "YY")], tol=1e-15
    )


def jordan_wigner_annihilation(k: int, n: int) -> np.ndarray:
    """``c_k`` as a dense matrix, including the Z string on qubits ``< k``."""
    lower = (_P1["X"] + 1j * _P1["Y"]) / 2  # |0><1|
    mats = [_P1["Z"]] * k + [lower] + [_P1["I"]] * (n - k - 1)
    return reduce(np.kron, list(reversed(mats)))


@dataclass(frozen=True)
class NuclearOpParams:
    theta_prime: float
    g_p: float = G_P
    g_n: float = G_N
    mu_n: float = 1.0


def nuclear_coefficients(params: NuclearOpParams) -> tuple[float, float]:
    """Return ``(alpha, beta)`` of the magnetic-dipole excitation operator."""
    t = params.theta_prime
    alpha = math.sin(t) * (params.g_p + params.g_n) * params.mu_n / 4
    beta = params.mu_n * (params.g_p - params.g_n) * math.cos(t) / (2 * math.sqrt(2))
    return alpha, beta


def nuclear_op_first_q(params: NuclearOpParams | float) -> PauliSum:
    """``alpha 1 + beta X + coeff_z Z`` with ``coeff_z = -alpha``.

    The matrix is ``[[0, beta], [beta, 2 alpha]]``.
    """
    if not isinstance(params, NuclearOpParams):
        params = NuclearOpParams(float(params))
    alpha, beta = nuclear_coefficients(params)
    coeff_z = -alpha
    return PauliSum.from_signed(
        1, [(alpha, "I"), (beta, "X"), (coeff_z, "Z")], tol=1e-15
    )


def nuclear_op_second_q(variant: str, params: NuclearOpParams | float) -> PauliSum:
    """Two-qubit encodings whose ``{|01>, |10>}`` block is ``[[0,b],[b,2a]]``.

    Variant ``"A"``: ``a 1 + b/2 (XX + YY) + a Z1``.
    Variant ``"B"``: ``a 1 + b/2 (XX + YY) - a/2 (Z0 - Z1)``.
    """
    if not isinstance(params, NuclearOpParams):
        params = NuclearOpParams(float(params))
    a, b = nuclear_coefficients(params)
    if variant == "A":
        items = [(a, "II"), (b / 2, "XX"), (b / 2, "YY"), (a, "IZ")]
    elif variant == "B":
        items = [(a, "II"), (b / 2, "XX"), (b / 2, "YY"),
                 (-a / 2, "ZI"), (a / 2, "IZ")]
    else:
        raise OperatorError(f"unknown variant {variant!r}")
    return PauliSum.from_signed(2, items, tol=1e-15)


def nuclear_op_uniform(theta: float) -> PauliSum:
    """``sin 1 + cos/2 (X0X1 + Y0Y1) - sin/2 (Z0 - Z1)``."""
    s, c = math.sin(theta), math.cos(theta)
    return PauliSum.from_signed(
        2, [(s, "II"), (c / 2, "XX"), (c / 2, "YY"), (-s / 2, "ZI"),
            (s / 2, "IZ")], tol=1e-15,
    )


def nuclear_uniform_angle(params: NuclearOpParams | float) -> tuple[float, float]:
    """Angle ``phi`` and scale ``r`` with ``O_B = r * O_M(phi)``."""
    if not isinstance(params, NuclearOpParams):
        params = NuclearOpParams(float(params))
    a, b = nuclear_coefficients(params)
    return math.atan2(a, b), math.hypot(a, b)


# ---------------------------------------------------------------------------
# exact references
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExcitedStateRef:
    eta: float
    state: StateVector


def exact_excited_state(op: PauliSum, psi0: StateVector) -> ExcitedStateRef:
    if psi0.n_qubits != op.n_qubits:
        raise OperatorError("operator and state dimensions differ")
    v = op.matrix() @ psi0.amplitudes
    eta = float(np.linalg.norm(v))
    if eta <= ETA_MIN:
        raise OperatorError("operator annihilates the initial state")
    return ExcitedStateRef(eta, StateVector(op.n_qubits, v / eta))


@dataclass(frozen=True)
class MatrixFunctions:
    exp: np.ndarray  # exp(-i gamma O)
    sin: np.ndarray
    cos: np.ndarray


def matrix_functions(op: PauliSum | np.ndarray, gamma: float) -> MatrixFunctions:
    m = op.matrix() if isinstance(op, PauliSum) else np.asarray(op, dtype=complex)
    if m.shape[0] > 2**12:
        raise OperatorError("dense matrix functions limited to 12 qubits")
    w, v = np.linalg.eigh(m)
    vh = v.conj().T

    def f(vals):
        return (v * vals) @ vh

    return MatrixFunctions(
        exp=f(np.exp(-1j * gamma * w)),
        sin=f(np.sin(gamma * w)),
        cos=f(np.cos(gamma * w)),
    )


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------


def operator_to_text(op: PauliSum) -> str:
    """One term per line: ``<sign>lambda PAULI_STRING``."""
    lines = []
    for t in op.terms:
        lines.append(f"{_PHASES[t.phase]}{t.coeff!r} {t.word}")
    return "\n".join(lines) + "\n"


def operator_from_text(text: str) -> PauliSum:
    terms = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            coef, word = line.split()
        except ValueError:
            raise OperatorError(f"malformed term {raw!r}") from None
        if coef.startswith(("+i", "-i")):
            phase = 1j if coef[0] == "+" else -1j
            val = float(coef[2:])
        else:
            phase = -1 if coef.startswith("-") else 1
            val = float(coef.lstrip("+-"))
        terms.append(PauliTerm(val, phase, word))
    if not terms:
        raise OperatorError("no terms")
    n = len(terms[0].word)
    return PauliSum(n, tuple(terms))
