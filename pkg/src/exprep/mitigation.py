"""Readout and zero-noise error mitigation plus quality metrics.

Noise ladders hold read-out mitigated observables ``O_k`` measured with every
CNOT repeated ``2k - 1`` times; ``eps_k = 2k - 1`` is used as the noise
coordinate in all fits. The extrapolation pipeline runs vectorised over a
leading batch axis so that resampling stays cheap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import nnls

from .estimators import Estimate
from .noise import ReadoutCalibration
from .simulator import ShotHistogram

__all__ = [
    "MitigationError",
    "ExtrapolationFailed",
    "NoiseLadder",
    "PolynomialFit",
    "ConsistencyResult",
    "StrategyResult",
    "MitigationReport",
    "FLAGS",
    "STRATEGIES",
    "ReadoutCorrected",
    "readout_correct",
    "readout_invert",
    "readout_ratio",
    "richardson_weights",
    "richardson_extrapolate",
    "polynomial_extrapolate",
    "exponential_extrapolate",
    "compatible",
    "consistency_check",
    "combine_strategies",
    "run_strategies",
    "decohered_precheck",
    "resample_pipeline",
    "mitigate",
    "chi2_metric",
    "nssd_metric",
]

FLAGS = ("no-extrapolation-needed", "error-free", "extrapolated", "averaged", "failed")
STRATEGIES = ("richardson", "polynomial", "exponential")
N_EX_MAX = 4
_SLACK = 1e-12  # absolute slack in compatibility tests (rounding only)
_ERR_FLOOR = 1e-12


class MitigationError(ValueError):
    """Invalid mitigation input."""


class ExtrapolationFailed(RuntimeError):
    """A single extrapolation strategy could not produce a value."""


# ---------------------------------------------------------------------------
# ladders
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseLadder:
    """``(k, O_k)`` pairs with strictly increasing ``k`` starting at 1."""

    entries: tuple[tuple[int, Estimate], ...]

    def __post_init__(self) -> None:
        ents = tuple((int(k), e) for k, e in self.entries)
        object.__setattr__(self, "entries", ents)
        ks = [k for k, _ in ents]
        if not ks or ks[0] != 1 or any(b <= a for a, b in zip(ks, ks[1:])):
            raise MitigationError("ladder k values must increase strictly from 1")

    @classmethod
    def from_arrays(cls, values: Sequence[float], errors: Sequence[float],
                    ks: Sequence[int] | None = None) -> "NoiseLadder":
        ks = range(1, len(values) + 1) if ks is None else ks
        return cls(tuple((k, Estimate(v, e)) for k, v, e in zip(ks, values, errors)))

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def ks(self) -> np.ndarray:
        return np.array([k for k, _ in self.entries])

    @property
    def eps(self) -> np.ndarray:
        return 2.0 * self.ks - 1

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for _, e in self.entries])

    @property
    def errors(self) -> np.ndarray:
        return np.array([e.stderr for _, e in self.entries])

    def truncated(self, n: int) -> "NoiseLadder":
        return NoiseLadder(self.entries[:n])


# ---------------------------------------------------------------------------
# readout mitigation
# ---------------------------------------------------------------------------


def _counts(hist) -> tuple[np.ndarray, int]:
    arr = hist.as_array() if isinstance(hist, ShotHistogram) else np.asarray(hist)
    shots = int(arr.sum())
    if shots < 1:
        raise MitigationError("empty histogram")
    return arr.astype(float), shots


def _per_qubit_inverse(cal: ReadoutCalibration) -> tuple[list, list]:
    """Per-qubit ``P^-1`` and first-order ``Var[P^-1]`` as printed."""
    pinv, var = [], []
    for e0, e1, de0, de1 in zip(cal.e0, cal.e1, cal.de0, cal.de1):
        d = 1 - e0 - e1
        pinv.append(np.array([[1 - e1, -e1], [-e0, 1 - e0]]) / d)
        d01 = (de0**2 + de1**2) / d**2
        l0, l1 = de0**2 + (1 - e0) ** 2 * d01**2, de1**2 + (1 - e1) ** 2 * d01**2
        r0, r1 = de0**2 + e0**2 * d01**2, de1**2 + e1**2 * d01**2
        var.append(np.array([[l1, r1], [r0, l0]]) / d**2)
    return pinv, var


def _kron_lsb(mats: Sequence[np.ndarray]) -> np.ndarray:
    # qubit 0 is the least-significant bit -> rightmost factor
    out = np.ones((1, 1))
    for m in reversed(list(mats)):
        out = np.kron(out, m)
    return out


@dataclass(frozen=True)
class ReadoutCorrected:
    """Corrected probabilities with the pieces needed for error propagation."""

    probs: np.ndarray  # central values after clipping / constrained refit
    linear: np.ndarray  # plain P^-1 p_e
    measured: np.ndarray  # p_e
    shots: int
    pinv: np.ndarray = field(repr=False)
    var_pinv: np.ndarray = field(repr=False)
    method: str = "linear"  # linear, clipped or least-squares

    def variance(self, weights: np.ndarray) -> float:
        """Variance of ``weights . p`` from shot noise and calibration errors.

        The shot term is the multinomial delta-method variance of the linear
        inversion; the calibration term is ``sum_i a_i^2 sum_j Var[P^-1]_ij
        p_e,j^2``.
        """
        a = np.asarray(weights, dtype=float)
        pe = self.measured
        c = self.pinv.T @ a
        shot = (np.dot(c * c, pe) - np.dot(c, pe) ** 2) / self.shots
        cal = float((a * a) @ (self.var_pinv @ (pe * pe)))
        return max(0.0, float(shot)) + cal


def readout_correct(hist, cal: ReadoutCalibration, m_sigma: float = 1.0
                    ) -> ReadoutCorrected:
    """Invert the factorised calibration; repair negative probabilities.

    Negative entries compatible with zero at ``m_sigma`` are set to zero;
    otherwise a non-negative least-squares fit through the forward matrix is
    used for the central values.
    """
    counts, shots = _counts(hist)
    n = int(round(math.log2(counts.size)))
    if 2**n != counts.size or n != cal.n_qubits:
        raise MitigationError("histogram and calibration sizes differ")
    pe = counts / shots
    pq, vq = _per_qubit_inverse(cal)
    pinv = _kron_lsb(pq)
    var = np.zeros_like(pinv)
    for q in range(n):
        var += _kron_lsb([vq[r] if r == q else pq[r] ** 2 for r in range(n)])
    lin = pinv @ pe
    out = ReadoutCorrected(lin.copy(), lin, pe, shots, pinv, var)
    neg = lin < 0
    if not neg.any():
        return out
    sig = np.array([math.sqrt(out.variance(np.eye(lin.size)[j])) if neg[j] else 0.0
                    for j in range(lin.size)])
    if np.all(lin[neg] + m_sigma * sig[neg] >= 0):
        p = np.where(neg, 0.0, lin)
        return ReadoutCorrected(p, lin, pe, shots, pinv, var, "clipped")
    fwd = _kron_lsb(cal.matrices)
    w = 1e3
    a = np.vstack([fwd, w * np.ones((1, fwd.shape[1]))])
    b = np.concatenate([pe, [w]])
    p, _ = nnls(a, b)
    return ReadoutCorrected(p, lin, pe, shots, pinv, var, "least-squares")


def readout_invert(hist, cal: ReadoutCalibration, observable_weights,
                   m_sigma: float = 1.0) -> Estimate:
    """Readout-mitigated estimate of ``sum_i a_i p_i``."""
    rc = readout_correct(hist, cal, m_sigma)
    a = np.asarray(observable_weights, dtype=float)
    if a.shape != rc.probs.shape:
        raise MitigationError("observable weights have the wrong length")
    return Estimate(float(a @ rc.probs), math.sqrt(rc.variance(a)))


def readout_ratio(hist, cal: ReadoutCalibration, numerator_weights,
                  denominator_weights, scale: float = 1.0,
                  m_sigma: float = 1.0) -> Estimate:
    """Readout-mitigated ``scale * (a.p) / (b.p)``; error via linearisation."""
    rc = readout_correct(hist, cal, m_sigma)
    a = np.asarray(numerator_weights, dtype=float)
    b = np.asarray(denominator_weights, dtype=float)
    den = float(b @ rc.probs)
    if den <= 0:
        raise MitigationError("non-positive corrected denominator")
    r = float(a @ rc.probs) / den
    g = (a - r * b) / den
    return Estimate(scale * r, scale * math.sqrt(rc.variance(g)))


# ---------------------------------------------------------------------------
# single extrapolations
# ---------------------------------------------------------------------------


def richardson_weights(eps: Sequence[float]) -> np.ndarray:
    """Lagrange weights at zero for the given noise coordinates."""
    xs = [Fraction(x).limit_denominator() for x in eps]
    out = []
    for i, xi in enumerate(xs):
        w = Fraction(1)
        for j, xj in enumerate(xs):
            if j != i:
                w *= xj / (xj - xi)
        out.append(float(w))
    return np.array(out)


def richardson_extrapolate(ladder: NoiseLadder, order: int = 1) -> Estimate:
    """Order-``M`` Richardson estimate from the first ``M + 1`` entries."""
    if order < 1 or len(ladder) < order + 1:
        raise MitigationError(f"order {order} needs {order + 1} ladder entries")
    sub = ladder.truncated(order + 1)
    v, e = sub.values, sub.errors
    if order == 1 and tuple(sub.ks) == (1, 2):
        # literal first-order combination
        return Estimate(0.5 * (3 * v[0] - v[1]), 0.5 * math.hypot(3 * e[0], e[1]))
    w = richardson_weights(sub.eps)
    return Estimate(float(w @ v), float(math.sqrt((w * w) @ (e * e))))


@dataclass(frozen=True)
class PolynomialFit:
    estimate: Estimate
    degree: int
    chi2: float  # reduced chi^2 of the fit (0 when there are no dof)


def _poly_batch(v: np.ndarray, e: np.ndarray, eps: np.ndarray, deg: int
                ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Weighted polynomial fits over a batch: intercept, its error, chi2/dof."""
    n = eps.size
    x = np.vander(eps, deg + 1, increasing=True)  # (n, deg+1)
    w = 1.0 / np.maximum(e, _ERR_FLOOR) ** 2  # (B, n)
    xtwx = np.einsum("ni,bn,nj->bij", x, w, x)
    xtwy = np.einsum("ni,bn,bn->bi", x, w, v)
    cov = np.linalg.inv(xtwx)
    beta = np.einsum("bij,bj->bi", cov, xtwy)
    resid = v - beta @ x.T
    chi2 = np.sum(w * resid**2, axis=1)
    dof = n - deg - 1
    chi2r = chi2 / dof if dof > 0 else np.zeros_like(chi2)
    return beta[:, 0], np.sqrt(cov[:, 0, 0]), chi2r


def polynomial_extrapolate(ladder: NoiseLadder, max_degree: int = 3) -> PolynomialFit:
    """Lowest-degree weighted fit with reduced ``chi^2 <= 1``."""
    v, e = ladder.values[None], ladder.errors[None]
    for deg in range(min(max_degree, len(ladder) - 1) + 1):
        b0, err, chi2 = _poly_batch(v, e, ladder.eps, deg)
        if chi2[0] <= 1:
            return PolynomialFit(Estimate(b0[0], err[0]), deg, float(chi2[0]))
    raise ExtrapolationFailed("no polynomial degree reaches chi^2 <= 1")


def _exp_batch(o1: np.ndarray, ok: np.ndarray, e1: np.ndarray, ek: np.ndarray,
               k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a = 1.0 / (2 * (k - 1))
    good = (o1 * ok > 0)
    r = np.where(good, o1 / np.where(good, ok, 1.0), 1.0)
    val = o1 * r**a
    err = np.sqrt(((1 + a) * val / np.where(good, o1, 1.0) * e1) ** 2
                  + (a * val / np.where(good, ok, 1.0) * ek) ** 2)
    return np.where(good, val, np.nan), np.where(good, err, np.nan), good


def exponential_extrapolate(ladder: NoiseLadder, k: int = 2) -> Estimate:
    """Two-point fit ``O_F = O_1 (O_1 / O_k)^(1/(2(k-1)))``."""
    ks = list(ladder.ks)
    if k < 2 or k not in ks:
        raise MitigationError(f"ladder has no entry k={k}")
    j = ks.index(k)
    v, e = ladder.values, ladder.errors
    val, err, good = _exp_batch(v[:1], v[j:j + 1], e[:1], e[j:j + 1], k)
    if not good[0]:
        raise ExtrapolationFailed("sign change or zero in exponential fit")
    return Estimate(val[0], err[0])


# ---------------------------------------------------------------------------
# consistency checking
# ---------------------------------------------------------------------------


def compatible(a: Estimate, b: Estimate, m_sigma: float = 1.0) -> bool:
    return abs(a.value - b.value) <= m_sigma * math.hypot(a.stderr, b.stderr) + _SLACK


def _algorithm1(vals, errs, valid, m, n):
    """Algorithm 1 on the first ``n`` entries of each batch row.

    Invalid entries fail their own test and are skipped as comparison
    partners. Returns ``ctest``, the number of failures per row and the
    number of failures above the lowest order.
    """
    v, e, ok = vals[:, :n], errs[:, :n], valid[:, :n]
    diff = np.abs(v[:, :, None] - v[:, None, :])
    tol = m * np.sqrt(e[:, :, None] ** 2 + e[:, None, :] ** 2) + _SLACK
    with np.errstate(invalid="ignore"):
        comp = (diff <= tol) | ~ok[:, None, :]
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    ctest = ok & np.all(comp | ~upper, axis=2)
    return ctest, np.sum(~ctest, axis=1), np.sum(~ctest[:, 1:], axis=1)


def _consistency_batch(vals, errs, valid, m):
    """Vectorised check with one retry; returns (chosen, count, ctest, high).

    ``count`` tallies every failed order as the pseudocode does; ``high``
    only those above the lowest order, which decides the error-free flag.

    ``chosen`` is the 0-based index of the lowest entry that passes and has
    at least one valid higher entry to be checked against; -1 when failed.
    """
    b, n = vals.shape
    chosen = np.full(b, -1)
    count = np.zeros(b, dtype=int)
    high = np.zeros(b, dtype=int)
    ctest_out = np.zeros((b, n), dtype=bool)
    todo = np.ones(b, dtype=bool)
    for nn in (n, n - 1):
        if nn < 2:
            break
        ctest, c, h = _algorithm1(vals, errs, valid, m, nn)
        okv = valid[:, :nn]
        # valid entries strictly above index i
        higher = np.cumsum(okv[:, ::-1], axis=1)[:, ::-1] - okv > 0
        passing = ctest & higher
        first = np.where(passing.any(axis=1), passing.argmax(axis=1), -1)
        count[todo] += c[todo]
        high[todo] += h[todo]
        ctest_out[todo] = False
        ctest_out[todo, :nn] = ctest[todo]
        hit = todo & (first >= 0)
        chosen[hit] = first[hit]
        todo &= first < 0
        if not todo.any():
            break
    return chosen, count, ctest_out, high


def _flag(chosen: int, high: int) -> str:
    """Flag from the chosen 0-based order and the failures above order 1."""
    if chosen < 0:
        return "failed"
    if chosen == 0:
        return "no-extrapolation-needed"
    return "error-free" if high == 0 else "extrapolated"


@dataclass(frozen=True)
class ConsistencyResult:
    ctest: tuple[bool, ...]
    error_count: int
    chosen_index: int | None  # 1-based order, None when failed
    flag: str


def consistency_check(results: Sequence[Estimate], m_sigma: float = 1.0
                      ) -> ConsistencyResult:
    """Lowest order compatible with all higher orders, with one retry.

    ``ctest`` reports the last attempt that was run. The highest remaining
    order has nothing left to be checked against and therefore only serves
    as a reference.
    """
    if len(results) < 2:
        raise MitigationError("need at least two results")
    v = np.array([[r.value for r in results]])
    e = np.array([[r.stderr for r in results]])
    chosen, count, ctest, high = _consistency_batch(v, e, np.isfinite(v), m_sigma)
    c = int(chosen[0])
    return ConsistencyResult(tuple(bool(x) for x in ctest[0]), int(count[0]),
                             c + 1 if c >= 0 else None, _flag(c, int(high[0])))


# ---------------------------------------------------------------------------
# strategy sequences and combination
# ---------------------------------------------------------------------------


def _sequences(v, e, eps):
    """Extrapolated sequences ``O^e_k`` for each strategy over a batch."""
    b, n = v.shape
    out = {}
    # Richardson: order k-1 from the first k entries
    rv, re = [v[:, 0]], [e[:, 0]]
    for k in range(2, n + 1):
        if k == 2 and eps[0] == 1 and eps[1] == 3:
            rv.append(0.5 * (3 * v[:, 0] - v[:, 1]))
            re.append(0.5 * np.hypot(3 * e[:, 0], e[:, 1]))
            continue
        w = richardson_weights(eps[:k])
        rv.append(v[:, :k] @ w)
        re.append(np.sqrt((e[:, :k] ** 2) @ (w * w)))
    rv, re = np.stack(rv, 1), np.stack(re, 1)
    out["richardson"] = (rv, re, np.ones((b, n), dtype=bool))
    # polynomial: O_1, then intercepts of degree 1..n-1 over all entries
    pv, pe, pok = [v[:, 0]], [e[:, 0]], [np.ones(b, dtype=bool)]
    for deg in range(1, n):
        b0, err, chi2 = _poly_batch(v, e, eps, deg)
        pv.append(b0)
        pe.append(err)
        pok.append(chi2 <= 1)
    out["polynomial"] = (np.stack(pv, 1), np.stack(pe, 1), np.stack(pok, 1))
    # exponential: O_1, then two-point fits with O_k
    xv, xe, xok = [v[:, 0]], [e[:, 0]], [np.ones(b, dtype=bool)]
    ks = (eps + 1) / 2
    for j in range(1, n):
        val, err, good = _exp_batch(v[:, 0], v[:, j], e[:, 0], e[:, j], int(ks[j]))
        xv.append(val)
        xe.append(err)
        xok.append(good)
    out["exponential"] = (np.stack(xv, 1), np.stack(xe, 1), np.stack(xok, 1))
    return out


@dataclass(frozen=True)
class StrategyResult:
    name: str
    estimate: Estimate | None
    error_count: int
    chosen_index: int | None  # 1-based
    flag: str

    @property
    def ok(self) -> bool:
        return self.estimate is not None


def _run_batch(v, e, eps, m, strategies):
    """Per-strategy (value, err, count, chosen) arrays of shape (B,)."""
    seqs = _sequences(v, e, eps)
    res = {}
    for name in strategies:
        sv, se, sok = seqs[name]
        chosen, count, _, high = _consistency_batch(sv, se, sok, m)
        idx = np.maximum(chosen, 0)[:, None]
        val = np.take_along_axis(sv, idx, 1)[:, 0]
        err = np.take_along_axis(se, idx, 1)[:, 0]
        res[name] = (val, err, count, chosen, high)
    return res


def _combine_batch(res, strategies):
    """Apply the combination rule row-wise; returns value, err, ok, n_used."""
    vals = np.stack([res[s][0] for s in strategies], 1)
    errs = np.stack([res[s][1] for s in strategies], 1)
    cnt = np.stack([res[s][2] for s in strategies], 1)
    ok = np.stack([res[s][3] >= 0 for s in strategies], 1)
    b = vals.shape[0]
    big = np.iinfo(np.int64).max
    cmin = np.min(np.where(ok, cnt, big), axis=1)
    sel = ok & (cnt == cmin[:, None])
    if "polynomial" in strategies:
        j = strategies.index("polynomial")
        # the global linear fit is the degree-1 entry of the polynomial sequence
        lin = ok[:, j] & (res["polynomial"][3] == 1)
        sel = np.where(lin[:, None], np.eye(len(strategies), dtype=bool)[j], sel)
    zero = sel & (errs <= 0)
    use_eq = zero.any(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(sel, 1.0 / np.where(errs > 0, errs, 1.0) ** 2, 0.0)
        w = np.where(use_eq[:, None], zero.astype(float), w)
        wsum = w.sum(axis=1)
        val = np.sum(w * np.nan_to_num(vals), axis=1) / wsum
        err = np.where(use_eq, 0.0, 1.0 / np.sqrt(wsum))
    good = ok.any(axis=1)
    return (np.where(good, val, np.nan), np.where(good, err, np.nan), good,
            sel.sum(axis=1), sel)


def run_strategies(ladder: NoiseLadder, m_sigma: float = 1.0,
                   strategies: Sequence[str] = STRATEGIES) -> list[StrategyResult]:
    """Consistency-checked result of each extrapolation strategy."""
    if len(ladder) < 2:
        raise MitigationError("need at least two ladder entries")
    for s in strategies:
        if s not in STRATEGIES:
            raise MitigationError(f"unknown strategy {s!r}")
    res = _run_batch(ladder.values[None], ladder.errors[None], ladder.eps,
                     m_sigma, tuple(strategies))
    out = []
    for s in strategies:
        val, err, cnt, ch, hi = (x[0] for x in res[s])
        c = int(ch)
        est = Estimate(val, err) if c >= 0 else None
        out.append(StrategyResult(s, est, int(cnt), c + 1 if c >= 0 else None,
                                  _flag(c, int(hi))))
    return out


def combine_strategies(per_strategy: Sequence[tuple[Estimate | None, int, bool]],
                       linear_fit: Estimate | None = None) -> Estimate:
    """Linear fit if it succeeded, else the inverse-variance mean of the
    non-failed results with the smallest error count."""
    if linear_fit is not None:
        return linear_fit
    good = [(est, c) for est, c, ok in per_strategy if ok and est is not None]
    if not good:
        raise ExtrapolationFailed("every strategy failed")
    cmin = min(c for _, c in good)
    sel = [est for est, c in good if c == cmin]
    errs = np.array([s.stderr for s in sel])
    vals = np.array([s.value for s in sel])
    if np.any(errs <= 0):
        z = errs <= 0
        return Estimate(float(vals[z].mean()), 0.0)
    w = 1 / errs**2
    return Estimate(float(w @ vals / w.sum()), float(1 / math.sqrt(w.sum())))


# ---------------------------------------------------------------------------
# full pipeline
# ---------------------------------------------------------------------------


def decohered_precheck(ladder: NoiseLadder, reference: float,
                       m_sigma: float = 1.0) -> NoiseLadder:
    """Drop top entries indistinguishable from the fully decohered value.

    Only applied when the lowest-noise entry is itself distinguishable from
    ``reference``; at least two entries are always kept.
    """
    first = ladder.entries[0][1]
    ref = Estimate(reference)
    if compatible(first, ref, m_sigma):
        return ladder
    n = len(ladder)
    while n > 2 and compatible(ladder.entries[n - 1][1], ref, m_sigma):
        n -= 1
    return ladder.truncated(n)


def resample_pipeline(ladder: NoiseLadder, M_resamples: int = 1000, seed=None,
                      m_sigma: float = 1.0,
                      strategies: Sequence[str] = STRATEGIES) -> Estimate:
    """Gaussian resampling of the ladder with a full extrapolation per sample.

    Returns the mean and the half-width of the central 68% interval. The
    input errors are kept for the consistency tests of every sample.
    """
    value, err, _ = _resample(ladder, M_resamples, seed, m_sigma, tuple(strategies))
    return Estimate(value, err)


def _resample(ladder, m_res, seed, m_sigma, strategies):
    if m_res < 1:
        raise MitigationError("need at least one resample")
    rng = np.random.default_rng(seed)
    v, e = ladder.values, ladder.errors
    samples = rng.normal(v, e, size=(m_res, v.size))
    errs = np.broadcast_to(e, samples.shape)
    res = _run_batch(samples, errs, ladder.eps, m_sigma, strategies)
    val, _, good, _, _ = _combine_batch(res, strategies)
    frac_failed = 1 - good.mean()
    if frac_failed > 0.5:
        raise ExtrapolationFailed(f"{frac_failed:.0%} of resamples failed")
    x = val[good]
    lo, hi = np.percentile(x, [15.865525393145708, 84.13447460685429])
    return float(x.mean()), float(max(0.0, (hi - lo) / 2)), float(frac_failed)


@dataclass(frozen=True)
class MitigationReport:
    bare: Estimate
    ro_mitigated: Estimate
    fully_mitigated: Estimate | None
    flag: str
    error_counts: dict = field(default_factory=dict)
    strategies_used: tuple[str, ...] = ()
    levels_used: int = 0

    def __post_init__(self) -> None:
        if self.flag not in FLAGS:
            raise MitigationError(f"unknown flag {self.flag!r}")
        if (self.flag == "failed") != (self.fully_mitigated is None):
            raise MitigationError("failed reports carry no mitigated value")


def mitigate(ladder: NoiseLadder, bare: Estimate | None = None,
             m_sigma: float = 1.0, resamples: int | None = 1000, seed=None,
             decohered_reference: float | None = None,
             strategies: Sequence[str] = STRATEGIES) -> MitigationReport:
    """Full zero-noise pipeline on a read-out mitigated ladder.

    The flag, error counts and strategy selection come from the central
    values; with ``resamples`` the value and error come from resampling.
    """
    strategies = tuple(strategies)
    ro = ladder.entries[0][1]
    bare = ro if bare is None else bare
    if decohered_reference is not None:
        ladder = decohered_precheck(ladder, decohered_reference, m_sigma)
    res = _run_batch(ladder.values[None], ladder.errors[None], ladder.eps,
                     m_sigma, strategies)
    val, err, good, n_used, sel = _combine_batch(res, strategies)
    counts = {s: int(res[s][2][0]) for s in strategies}
    if not good[0]:
        return MitigationReport(bare, ro, None, "failed", counts, (), len(ladder))
    used = tuple(s for s, on in zip(strategies, sel[0]) if on)
    flags = {_flag(int(res[s][3][0]), int(res[s][4][0])) for s in used}
    flag = flags.pop() if len(flags) == 1 else "averaged"
    if len(used) > 1 and flag != "no-extrapolation-needed":
        flag = "averaged"
    est = Estimate(val[0], err[0])
    if resamples:
        try:
            mean, half, _ = _resample(ladder, resamples, seed, m_sigma, strategies)
        except ExtrapolationFailed:
            return MitigationReport(bare, ro, None, "failed", counts, used, len(ladder))
        est = Estimate(mean, half)
    return MitigationReport(bare, ro, est, flag, counts, used, len(ladder))


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def chi2_metric(theory: Sequence[float], experiment: Sequence[Estimate]) -> float:
    """``sum (v_e - v_t)^2 / err_e^2`` (not divided by the number of points)."""
    if len(theory) != len(experiment):
        raise MitigationError("theory and experiment lengths differ")
    total = 0.0
    for t, e in zip(theory, experiment):
        if not e.stderr > 0:
            raise MitigationError("zero error bar in chi^2")
        total += (e.value - t) ** 2 / e.stderr**2
    return total


def nssd_metric(theory: Sequence[float], experiment: Sequence[Estimate | float],
                r: float = 0.1) -> float:
    """``sqrt(sum (v_e - v_t)^2 / sum (r v_t)^2)``."""
    if len(theory) != len(experiment):
        raise MitigationError("theory and experiment lengths differ")
    t = np.asarray(theory, dtype=float)
    e = np.array([x.value if isinstance(x, Estimate) else float(x) for x in experiment])
    den = np.sum((r * t) ** 2)
    if den == 0:
        raise MitigationError("nssd denominator is zero")
    return float(math.sqrt(np.sum((e - t) ** 2) / den))
