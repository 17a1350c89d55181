"""Batch sweeps over operator angles with noise ladders and mitigation."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .circuits import (
    LCU_VARIANTS,
    LCUSpec,
    TDPrepSpec,
    lcu_full_circuit,
    td_circuit,
)
from .estimators import (
    Estimate,
    Observables,
    estimate_from_counts,
    lcu_exact,
    lcu_observables,
    td_exact,
    td_observables,
)
from .mitigation import (
    MitigationError,
    NoiseLadder,
    chi2_metric,
    mitigate,
    nssd_metric,
    readout_invert,
    readout_ratio,
)
from .noise import NoiseSpec, run_calibration, simulate_with_cnot_noise
from .operators import (
    PauliSum,
    nuclear_op_first_q,
    nuclear_op_second_q,
    second_quantized_simple_op,
    simple_op,
)
from .simulator import StateVector, new_basis_state

__all__ = [
    "ConfigError",
    "ThetaGrid",
    "ExperimentConfig",
    "ObservableRecord",
    "SweepRecord",
    "MetricRow",
    "Problem",
    "problem_for",
    "parse_config_text",
    "config_from_mapping",
    "run_sweep",
    "summarize",
    "format_summary",
    "records_to_csv",
    "records_to_json",
    "records_from_json",
    "emit",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ("theta", "observable", "exact", "bare", "bare_err", "ro", "ro_err",
               "full", "full_err", "flag")
MITIGATION_MODES = ("off", "ro-only", "full")
LEVELS = ("bare", "ro", "full")
N_LADDER = 4


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ThetaGrid:
    count: int = 16
    lo: float = 0.0
    hi: float = math.pi
    spacing: str = "uniform"  # uniform (endpoints included) or midpoint

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ConfigError("theta grid needs at least one point")
        if not 0 <= self.lo <= self.hi <= math.pi + 1e-12:
            raise ConfigError("theta grid must lie within [0, pi]")
        if self.spacing not in ("uniform", "midpoint"):
            raise ConfigError(f"unknown spacing {self.spacing!r}")

    def points(self) -> np.ndarray:
        if self.spacing == "uniform":
            return np.linspace(self.lo, self.hi, self.count)
        h = (self.hi - self.lo) / self.count
        return self.lo + h * (np.arange(self.count) + 0.5)


@dataclass(frozen=True)
class ExperimentConfig:
    protocol: str = "lcu"
    variant: str = "simple-2q-routed"
    theta_grid: ThetaGrid = field(default_factory=ThetaGrid)
    gamma: float = 0.3
    shots_per_level: int = 8192
    noise: NoiseSpec = field(default_factory=lambda: NoiseSpec((0.02, 0.02), 0.01))
    mitigation: str = "full"
    seeds: tuple[int, ...] = (0,)
    output_path: str | None = None
    resamples: int = 1000
    m_sigma: float = 1.0
    calibration_shots: int | None = None  # defaults to shots_per_level
    workers: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.protocol not in ("td", "lcu"):
            raise ConfigError(f"unknown protocol {self.protocol!r}")
        allowed = ("simple", "nuclear") if self.protocol == "td" else LCU_VARIANTS
        if self.variant not in allowed:
            raise ConfigError(f"variant {self.variant!r} not valid for {self.protocol}")
        if self.shots_per_level < 1:
            raise ConfigError("shots must be >= 1")
        if self.mitigation not in MITIGATION_MODES:
            raise ConfigError(f"mitigation must be one of {MITIGATION_MODES}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.resamples < 0 or self.workers < 1:
            raise ConfigError("resamples must be >= 0 and workers >= 1")


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------


def parse_config_text(text: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


def _default_count(variant: str) -> int:
    return 20 if variant.startswith("nuclear") else 16


def config_from_mapping(m: dict[str, str]) -> ExperimentConfig:
    """Build a config from string values (file keys and CLI overrides)."""
    known = {"protocol", "variant", "gamma", "shots", "noise.pe", "noise.e0",
             "noise.e1", "noise.global", "mitigation", "seed", "seeds", "out",
             "theta.count", "theta.min", "theta.max", "theta.spacing",
             "resamples", "m_sigma", "calibration.shots", "workers"}
    unknown = set(m) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        protocol = m.get("protocol", "lcu")
        variant = m.get("variant", "simple" if protocol == "td" else "simple-2q-routed")
        grid = ThetaGrid(
            int(m.get("theta.count", _default_count(variant))),
            float(m.get("theta.min", 0.0)),
            float(m.get("theta.max", math.pi)),
            m.get("theta.spacing", "uniform"),
        )
        noise = NoiseSpec(
            (float(m.get("noise.e0", 0.02)), float(m.get("noise.e1", 0.02))),
            float(m.get("noise.pe", 0.01)),
            float(m.get("noise.global", 0.0)),
        )
        seeds_txt = m.get("seeds", m.get("seed", "0"))
        seeds = tuple(int(s) for s in seeds_txt.replace(",", " ").split())
        cal = m.get("calibration.shots")
        return ExperimentConfig(
            protocol=protocol,
            variant=variant,
            theta_grid=grid,
            gamma=float(m.get("gamma", 0.3)),
            shots_per_level=int(m.get("shots", 8192)),
            noise=noise,
            mitigation=m.get("mitigation", "full"),
            seeds=seeds,
            output_path=m.get("out"),
            resamples=int(m.get("resamples", 1000)),
            m_sigma=float(m.get("m_sigma", 1.0)),
            calibration_shots=int(cal) if cal else None,
            workers=int(m.get("workers", 1)),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# problem definitions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Problem:
    """Operator, circuit and measurement masks for one angle."""

    operator: PauliSum
    psi0: StateVector
    final: str
    circuit: object
    observables: Observables
    exact: dict[str, float]
    ps_scale: float  # 1 / expected P_s, used by the P_t^A estimator
    n_logical: int


def _op_and_states(protocol: str, variant: str, theta: float
                   ) -> tuple[PauliSum, str, str]:
    if protocol == "td":
        if variant == "simple":
            return simple_op(theta), "0", "1"
        return nuclear_op_first_q(theta), "1", "0"
    if variant == "simple-1q":
        return simple_op(theta), "0", "1"
    if variant.startswith("simple-2q"):
        return second_quantized_simple_op(theta), "10", "01"
    if variant == "nuclear-1q":
        return nuclear_op_first_q(theta), "1", "0"
    return nuclear_op_second_q("B", theta), "10", "01"


def problem_for(config: ExperimentConfig, theta: float) -> Problem:
    op, init, final = _op_and_states(config.protocol, config.variant, theta)
    psi0 = new_basis_state(op.n_qubits, init)
    fidx = int(final[::-1], 2)
    if config.protocol == "td":
        spec = TDPrepSpec(op, config.gamma, variant=config.variant)
        circ = td_circuit(spec)
        obs = td_observables(op.n_qubits, final)
        ps, state, _ = td_exact(op, psi0, config.gamma)
        pt = abs(state.amplitudes[fidx]) ** 2
        exact = {"P_s": ps, "P_t": pt}
        scale = 1.0
    else:
        spec = LCUSpec(op, config.variant)
        circ = lcu_full_circuit(spec)
        obs = lcu_observables(spec.ancilla_count, op.n_qubits, final)
        ps, state = lcu_exact(op, psi0)
        pt = abs(state.amplitudes[fidx]) ** 2
        exact = {"P_s": ps, "P_t^A": pt, "P_t^B": pt}
        scale = 1 / ps
    anc = obs.n_ancilla
    return Problem(op, psi0, final, circ, obs,
                   {k: float(v) for k, v in exact.items()}, scale, anc + op.n_qubits)


def _decohered(name: str, obs: Observables, scale: float) -> float:
    """Value of each observable for a maximally mixed register."""
    if name == "P_s":
        return 2.0**-obs.n_ancilla
    if name == "P_t^A":
        return scale * 2.0 ** -(obs.n_ancilla + obs.n_system)
    return 2.0**-obs.n_system


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ObservableRecord:
    name: str
    exact: float
    bare: Estimate | None
    ro: Estimate | None
    full: Estimate | None
    flag: str


@dataclass(frozen=True)
class SweepRecord:
    theta: float
    seed: int
    exact_ps: float
    exact_pt: float
    observables: tuple[ObservableRecord, ...]
    flags: tuple[str, ...] = ()


def _seed(seed: int, i_theta: int, level: int, purpose: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, i_theta, level, purpose])


def _bare_estimates(counts: np.ndarray, prob: Problem, protocol: str
                    ) -> dict[str, Estimate | None]:
    obs = prob.observables
    if protocol == "td":
        r = estimate_from_counts(counts, obs, "TD-Pt")
        return {"P_s": r.p_success, "P_t": r.p_transition}
    a = estimate_from_counts(counts, obs, "LCU-PtA", prob.ps_scale)
    b = estimate_from_counts(counts, obs, "LCU-PtB")
    return {"P_s": a.p_success, "P_t^A": a.p_transition, "P_t^B": b.p_transition}


def _ro_estimates(counts: np.ndarray, cal, prob: Problem, names, m_sigma
                  ) -> dict[str, Estimate | None]:
    obs = prob.observables
    succ = obs.success_mask.astype(float)
    num = obs.numerator_mask.astype(float)
    out: dict[str, Estimate | None] = {}
    for name in names:
        try:
            if name == "P_s":
                out[name] = readout_invert(counts, cal, succ, m_sigma)
            elif name == "P_t^A":
                out[name] = readout_invert(counts, cal, prob.ps_scale * num, m_sigma)
            else:
                out[name] = readout_ratio(counts, cal, num, succ, 1.0, m_sigma)
        except MitigationError:
            out[name] = None
    return out


def _run_point(args) -> list[SweepRecord]:
    config, i_theta, theta = args
    try:
        prob = problem_for(config, theta)
    except Exception as exc:  # attach the offending angle
        exc.args = (f"theta={theta!r}: {exc}",) + exc.args[1:]
        raise
    names = tuple(prob.exact)
    levels = N_LADDER if config.mitigation == "full" else 1
    cal_shots = config.calibration_shots or config.shots_per_level
    input_state = prob.psi0.tensor(new_basis_state(prob.observables.n_ancilla))
    records = []
    for seed in config.seeds:
        ladders_counts = []
        for k in range(1, levels + 1):
            spec = replace(config.noise, cnot_repetition=k)
            hist = simulate_with_cnot_noise(prob.circuit, input_state, spec,
                                            config.shots_per_level,
                                            np.random.default_rng(_seed(seed, i_theta, k, 0)))
            ladders_counts.append(hist.as_array())
        bare = _bare_estimates(ladders_counts[0], prob, config.protocol)
        ro: dict[str, Estimate | None] = {n: None for n in names}
        full: dict[str, Estimate | None] = {n: None for n in names}
        flags = {n: "off" for n in names}
        if config.mitigation != "off":
            cal = run_calibration(config.noise, prob.n_logical, cal_shots,
                                  np.random.default_rng(_seed(seed, i_theta, 0, 1)))
            per_level = [_ro_estimates(c, cal, prob, names, config.m_sigma)
                         for c in ladders_counts]
            ro = dict(per_level[0])
            flags = {n: "ro-only" for n in names}
            if config.mitigation == "full":
                for j, n in enumerate(names):
                    ests = [lv[n] for lv in per_level]
                    if any(e is None for e in ests):
                        flags[n] = "failed"
                        continue
                    ladder = NoiseLadder(tuple(enumerate(ests, 1)))
                    rep = mitigate(ladder, bare[n] or ests[0], config.m_sigma,
                                   config.resamples or None,
                                   _seed(seed, i_theta, 0, 2 + j),
                                   _decohered(n, prob.observables, prob.ps_scale))
                    full[n] = rep.fully_mitigated
                    flags[n] = rep.flag
        obs_records = tuple(
            ObservableRecord(n, prob.exact[n], bare[n], ro[n], full[n], flags[n])
            for n in names)
        pt_name = "P_t" if config.protocol == "td" else "P_t^B"
        rec_flags = tuple(sorted({f for f in flags.values() if f == "failed"}))
        records.append(SweepRecord(float(theta), int(seed), prob.exact["P_s"],
                                   prob.exact[pt_name], obs_records, rec_flags))
    return records


def run_sweep(config: ExperimentConfig) -> list[SweepRecord]:
    """Records ordered by angle, then seed; independent of ``workers``."""
    jobs = [(config, i, float(t)) for i, t in enumerate(config.theta_grid.points())]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            chunks = list(pool.map(_run_point, jobs))
    else:
        chunks = [_run_point(j) for j in jobs]
    return [r for chunk in chunks for r in chunk]


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricRow:
    observable: str
    level: str
    chi2: float
    nssd: float
    n_points: int
    n_missing: int


def summarize(records: Sequence[SweepRecord], seed: int | None = None,
              r: float = 0.1) -> list[MetricRow]:
    """chi^2 and nssd per observable and mitigation level.

    Points without a value or with a zero error bar are left out of chi^2
    and counted in ``n_missing``; nssd uses every available value.
    """
    if not records:
        raise ConfigError("no records to summarize")
    if seed is not None:
        records = [rec for rec in records if rec.seed == seed]
        if not records:
            raise ConfigError(f"no records for seed {seed}")
    names = [o.name for o in records[0].observables]
    rows = []
    for name in names:
        for level in LEVELS:
            th, ex, th_all, ex_all = [], [], [], []
            missing = 0
            for rec in records:
                o = next(x for x in rec.observables if x.name == name)
                est = getattr(o, level)
                if est is None:
                    missing += 1
                    continue
                th_all.append(o.exact)
                ex_all.append(est)
                if est.stderr > 0:
                    th.append(o.exact)
                    ex.append(est)
                else:
                    missing += 1
            chi2 = chi2_metric(th, ex) if ex else math.nan
            try:
                nssd = nssd_metric(th_all, ex_all, r) if ex_all else math.nan
            except MitigationError:
                nssd = math.nan
            rows.append(MetricRow(name, level, chi2, nssd, len(th), missing))
    return rows


def format_summary(rows: Sequence[MetricRow]) -> str:
    lines = [f"{'observable':<10} {'level':<6} {'chi2':>12} {'nssd':>10} {'points':>7}"]
    for r in rows:
        lines.append(f"{r.observable:<10} {r.level:<6} {r.chi2:>12.3f} "
                     f"{r.nssd:>10.4f} {r.n_points:>7d}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _num(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def records_to_csv(records: Sequence[SweepRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("seed",) + CSV_COLUMNS)
    for rec in records:
        for o in rec.observables:
            row = [rec.seed, repr(rec.theta), o.name, repr(o.exact)]
            for est in (o.bare, o.ro, o.full):
                row += [_num(est.value if est else None), _num(est.stderr if est else None)]
            row.append(o.flag)
            w.writerow(row)
    return buf.getvalue()


def _est_dict(e: Estimate | None):
    return None if e is None else {"value": e.value, "stderr": e.stderr}


def records_to_json(records: Sequence[SweepRecord]) -> str:
    data = []
    for rec in records:
        d = asdict(rec)
        d["observables"] = [
            {"name": o.name, "exact": o.exact, "bare": _est_dict(o.bare),
             "ro": _est_dict(o.ro), "full": _est_dict(o.full), "flag": o.flag}
            for o in rec.observables]
        d["flags"] = list(rec.flags)
        data.append(d)
    return json.dumps(data, indent=1, sort_keys=True) + "\n"


def records_from_json(text: str) -> list[SweepRecord]:
    def est(d):
        return None if d is None else Estimate(d["value"], d["stderr"])

    out = []
    for d in json.loads(text):
        obs = tuple(ObservableRecord(o["name"], o["exact"], est(o["bare"]),
                                     est(o["ro"]), est(o["full"]), o["flag"])
                    for o in d["observables"])
        out.append(SweepRecord(d["theta"], d["seed"], d["exact_ps"], d["exact_pt"],
                               obs, tuple(d["flags"])))
    return out


def emit(records: Sequence[SweepRecord], path: str, fmt: str = "csv") -> None:
    if fmt == "csv":
        text = records_to_csv(records)
    elif fmt == "json":
        text = records_to_json(records)
    else:
        raise ConfigError(f"unknown format {fmt!r}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
