"""Analytic success-probability and fidelity bounds for the time-dependent method.

All functions are pure. The bounds are sufficient conditions; tests only ever
check inequality directions against exact dense evaluations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .operators import PauliSum, lambda_norm, matrix_functions
from .simulator import StateVector

__all__ = [
    "BoundsError",
    "BoundViolation",
    "TDBoundInputs",
    "BoundSet",
    "GammaBudget",
    "ImperfectEvolutionBounds",
    "TaylorSineBounds",
    "FIDELITY_FLOOR_MIN",
    "td_bounds",
    "family_bounds",
    "gamma_for_fidelity",
    "ps_upper_for_fidelity",
    "guaranteed_ps_floor",
    "imperfect_evolution_bounds",
    "taylor_sine_bounds",
    "trace_distance_shift",
]

# smallest F_min for which gamma <= pi/(2 Lambda) keeps the floor valid
FIDELITY_FLOOR_MIN = 1 - math.pi**2 / 24
_TOL = 1e-12


class BoundsError(ValueError):
    """Inputs outside the domain of a bound."""


class BoundViolation(AssertionError):
    """A numerically evaluated sandwich failed its ordering."""


@dataclass(frozen=True)
class TDBoundInputs:
    gamma: float
    Lambda: float
    eta: float
    F_min: float = 1.0
    delta_U: float = 0.0
    delta_V: float = 0.0

    def __post_init__(self) -> None:
        if not self.Lambda > 0:
            raise BoundsError("Lambda must be positive")
        if self.eta < 0 or self.eta > self.Lambda * (1 + _TOL):
            raise BoundsError("eta must lie in [0, Lambda]")
        if not 0 <= self.gamma <= math.pi / (2 * self.Lambda) * (1 + _TOL):
            raise BoundsError("gamma must lie in [0, pi/(2 Lambda)]")
        if not 0 < self.F_min <= 1:
            raise BoundsError("F_min must lie in (0, 1]")
        if self.delta_U < 0 or self.delta_V < 0:
            raise BoundsError("operator-norm errors must be non-negative")
        if self.delta_U > 0 and self.delta_V > 2 * self.delta_U * (1 + _TOL):
            raise BoundsError("delta_V cannot exceed 2 delta_U")


@dataclass(frozen=True)
class BoundSet:
    ps_lower: float
    ps_upper_a: float  # sin^2(gamma Lambda)
    ps_upper_b: float  # gamma^2 eta^2
    f_lower: float

    @property
    def ps_upper(self) -> float:
        return min(self.ps_upper_a, self.ps_upper_b)


def td_bounds(inputs: TDBoundInputs) -> BoundSet:
    g, lam, eta = inputs.gamma, inputs.Lambda, inputs.eta
    gl2 = (g * lam) ** 2
    ge2 = (g * eta) ** 2
    return BoundSet(
        ps_lower=ge2 * (1 - gl2 / 3),
        ps_upper_a=math.sin(g * lam) ** 2,
        ps_upper_b=ge2,
        f_lower=1 - gl2 / 6,
    )


def family_bounds(gamma: float, lambdas: Sequence[float],
                  etas: Sequence[float]) -> BoundSet:
    """Uniform bounds over a family of operators evaluated at one ``gamma``.

    The floor pairs the smallest ``eta`` with the largest ``Lambda``; the
    ceilings take the largest values. ``gamma`` must be admissible for every
    member.
    """
    lam = np.asarray(lambdas, dtype=float)
    eta = np.asarray(etas, dtype=float)
    if lam.size == 0 or lam.shape != eta.shape:
        raise BoundsError("lambdas and etas must be non-empty and equal length")
    if gamma * lam.max() > math.pi / 2 * (1 + _TOL):
        raise BoundsError("gamma exceeds pi/(2 Lambda) for some member")
    gl2 = (gamma * lam.max()) ** 2
    return BoundSet(
        ps_lower=gamma**2 * eta.min() ** 2 * (1 - gl2 / 3),
        ps_upper_a=math.sin(gamma * lam.max()) ** 2,
        ps_upper_b=(gamma * eta.max()) ** 2,
        f_lower=1 - gl2 / 6,
    )


# ---------------------------------------------------------------------------
# gamma selection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GammaBudget:
    exact: float  # sqrt(6(1-F))/Lambda
    imperfect: float  # sqrt(1-F)/Lambda
    warning: str | None = None


def gamma_for_fidelity(F_min: float, Lambda: float) -> GammaBudget:
    """Largest time step guaranteeing ``F >= F_min``."""
    if not 0 < F_min <= 1:
        raise BoundsError("F_min must lie in (0, 1]")
    if not Lambda > 0:
        raise BoundsError("Lambda must be positive")
    if F_min == 1:
        return GammaBudget(0.0, 0.0, "F_min = 1 admits only gamma = 0")
    d = 1 - F_min
    exact = math.sqrt(6 * d) / Lambda
    warning = None
    if exact > math.pi / (2 * Lambda):
        exact = math.pi / (2 * Lambda)
        warning = "budget capped at pi/(2 Lambda)"
    return GammaBudget(exact, math.sqrt(d) / Lambda, warning)


def ps_upper_for_fidelity(F_min: float) -> float:
    """``sin^2(sqrt(6(1-F_min)))``; about ``6(1-F_min)`` for small infidelity."""
    if not 0 < F_min <= 1:
        raise BoundsError("F_min must lie in (0, 1]")
    x = min(math.sqrt(6 * (1 - F_min)), math.pi / 2)
    return math.sin(x) ** 2


def guaranteed_ps_floor(F_min: float, eta: float, Lambda: float) -> float:
    """``(eta/Lambda)^2 (2 F_min - 1)``, valid for ``F_min >= 1 - pi^2/24``.

    This is the exact-evolution floor ``gamma^2 eta^2 (1 - gamma^2 Lambda^2/3)``
    with ``gamma^2`` replaced by ``1/Lambda^2`` and ``F_min`` by the guaranteed
    fidelity, so it bounds ``P_s`` only for ``gamma Lambda >= 1``. Shorter
    evolutions give smaller success probabilities.
    """
    if F_min > 1 or F_min < FIDELITY_FLOOR_MIN:
        raise BoundsError(
            f"F_min must lie in [{FIDELITY_FLOOR_MIN:.4f}, 1], got {F_min}")
    if not Lambda > 0 or eta < 0:
        raise BoundsError("need Lambda > 0 and eta >= 0")
    return (eta / Lambda) ** 2 * (2 * F_min - 1)


# ---------------------------------------------------------------------------
# imperfect evolution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ImperfectEvolutionBounds:
    cos_alpha_floor: float
    shift: float  # delta_V sqrt(1 - delta_V^2/4)
    ps_window: tuple[float, float]
    f_floor: float
    delta_V_budget_gamma: float  # eta^2/4 gamma^4 eta^2 Lambda^2
    delta_V_budget_fidelity: float  # eta^2/(2 Lambda^2) (1-F_min)^2
    delta_U_budget_gamma: float
    delta_U_budget_fidelity: float


def imperfect_evolution_bounds(inputs: TDBoundInputs, p_s: float | None = None
                               ) -> ImperfectEvolutionBounds:
    """Bounds for an approximate evolution with ``||V~ - V|| <= delta_V``.

    If ``delta_V`` is zero but ``delta_U`` is set, ``delta_V = 2 delta_U`` is
    used. With ``p_s`` given the window is centred on it; otherwise it widens
    the exact-evolution interval of :func:`td_bounds`. The fidelity floor and
    the error budgets are evaluated exactly as printed in the source formulas.
    """
    dv = inputs.delta_V if inputs.delta_V > 0 else 2 * inputs.delta_U
    if not 0 <= dv <= 2:
        raise BoundsError("delta_V must lie in [0, 2]")
    g, lam, eta = inputs.gamma, inputs.Lambda, inputs.eta
    ge2 = (g * eta) ** 2
    if ge2 == 0:
        raise BoundsError("f_floor needs gamma^2 eta^2 > 0")
    gl2 = (g * lam) ** 2
    shift = dv * math.sqrt(1 - dv**2 / 4)
    if p_s is None:
        b = td_bounds(inputs)
        lo, hi = b.ps_lower, b.ps_upper
    else:
        lo = hi = float(p_s)
    f_floor = (1 - gl2 / 2) - (2 - gl2 / 3) * dv / ge2
    dv_gamma = eta**2 / 4 * g**4 * eta**2 * lam**2
    dv_fid = eta**2 / (2 * lam**2) * (1 - inputs.F_min) ** 2
    return ImperfectEvolutionBounds(
        cos_alpha_floor=1 - dv**2 / 2,
        shift=shift,
        ps_window=(lo - shift, hi + shift),
        f_floor=f_floor,
        delta_V_budget_gamma=dv_gamma,
        delta_V_budget_fidelity=dv_fid,
        delta_U_budget_gamma=dv_gamma / 2,
        delta_U_budget_fidelity=dv_fid / 2,
    )


def trace_distance_shift(a: np.ndarray, b: np.ndarray, projector: np.ndarray
                         ) -> tuple[float, float, float]:
    """``(|<psi|P|psi> - <phi|P|phi>|, |sin alpha|, ||a - b||)`` for two states."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    pa = float(np.vdot(a, projector @ a).real)
    pb = float(np.vdot(b, projector @ b).real)
    ov = abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b))
    return abs(pa - pb), math.sqrt(max(0.0, 1 - ov**2)), float(np.linalg.norm(a - b))


# ---------------------------------------------------------------------------
# Taylor sandwiches
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TaylorSineBounds:
    """Both sandwiches for ``X = gamma O``.

    ``xsin = (<X^2>(1 - L^2/6), <X sin X>, <X^2>)`` and
    ``sin2 = (<X^2>(1 - L^2/3), <sin^2 X>, <X sin X>, sin^2 L)`` with
    ``L = gamma Lambda``.
    """

    xsin: tuple[float, float, float]
    sin2: tuple[float, float, float, float]


def taylor_sine_bounds(op: PauliSum, psi0: StateVector, gamma: float,
                       tol: float = 1e-12) -> TaylorSineBounds:
    m = op.matrix()
    if not np.allclose(m, m.conj().T, atol=1e-12):
        raise BoundsError("operator must be Hermitian")
    lam = lambda_norm(op)
    L = gamma * lam
    if L > math.pi / 2 * (1 + _TOL):
        raise BoundsError("gamma Lambda must not exceed pi/2")
    psi = psi0.amplitudes
    x = gamma * m
    s = matrix_functions(op, gamma).sin
    xpsi, spsi = x @ psi, s @ psi
    x2 = float(np.vdot(xpsi, xpsi).real)
    xs = float(np.vdot(xpsi, spsi).real)
    s2 = float(np.vdot(spsi, spsi).real)
    out = TaylorSineBounds(
        xsin=(x2 * (1 - L**2 / 6), xs, x2),
        sin2=(x2 * (1 - L**2 / 3), s2, xs, math.sin(L) ** 2),
    )
    a, b, c = out.xsin
    d, e, f, h = out.sin2
    if not (a <= b + tol and b <= c + tol):
        raise BoundViolation(f"<X sin X> sandwich violated: {out.xsin}")
    if not (d <= e + tol and e <= f + tol and e <= h + tol):
        raise BoundViolation(f"<sin^2 X> sandwich violated: {out.sin2}")
    return out
