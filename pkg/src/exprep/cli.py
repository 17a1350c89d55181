"""Command-line entry point: ``exprep run`` and ``exprep gates``."""
from __future__ import annotations

import argparse
import sys
from typing import Sequence

from .circuits import LCU_VARIANTS, LCUSpec, TDPrepSpec, lcu_full_circuit, td_circuit
from .experiment import (
    ConfigError,
    config_from_mapping,
    emit,
    format_summary,
    parse_config_text,
    records_to_csv,
    records_to_json,
    run_sweep,
    summarize,
)
from .gates import cnot_count
from .operators import (
    nuclear_op_first_q,
    nuclear_op_second_q,
    second_quantized_simple_op,
    simple_op,
)

# CLI flag -> config key
_FLAGS = {
    "protocol": "protocol",
    "variant": "variant",
    "gamma": "gamma",
    "shots": "shots",
    "noise_pe": "noise.pe",
    "noise_e0": "noise.e0",
    "noise_e1": "noise.e1",
    "mitigation": "mitigation",
    "seed": "seeds",
    "out": "out",
    "theta_count": "theta.count",
    "resamples": "resamples",
    "workers": "workers",
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="exprep", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a theta sweep and write records")
    r.add_argument("config", nargs="?", help="key = value configuration file")
    r.add_argument("--protocol", choices=("td", "lcu"))
    r.add_argument("--variant")
    r.add_argument("--gamma")
    r.add_argument("--shots")
    r.add_argument("--noise.pe", dest="noise_pe")
    r.add_argument("--noise.e0", dest="noise_e0")
    r.add_argument("--noise.e1", dest="noise_e1")
    r.add_argument("--mitigation", choices=("off", "ro-only", "full"))
    r.add_argument("--seed", help="one seed or a comma-separated list")
    r.add_argument("--theta-count", dest="theta_count")
    r.add_argument("--resamples")
    r.add_argument("--workers")
    r.add_argument("--out", help="output file (default: stdout)")
    r.add_argument("--format", choices=("csv", "json"), default="csv")
    r.add_argument("--strict", action="store_true",
                   help="exit with status 1 if any result is flagged failed")
    r.add_argument("--summary", action="store_true",
                   help="print the chi^2 / nssd table to stderr")
    sub.add_parser("gates", help="print CNOT counts of every built circuit")
    return p


def _run(args) -> int:
    mapping: dict[str, str] = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            mapping.update(parse_config_text(fh.read()))
    for attr, key in _FLAGS.items():
        val = getattr(args, attr)
        if val is not None:
            mapping[key] = val
    config = config_from_mapping(mapping)
    records = run_sweep(config)
    if config.output_path:
        emit(records, config.output_path, args.format)
    else:
        text = records_to_csv(records) if args.format == "csv" else records_to_json(records)
        sys.stdout.write(text)
    if args.summary:
        for seed in config.seeds:
            sys.stderr.write(f"seed {seed}\n")
            sys.stderr.write(format_summary(summarize(records, seed)))
    failed = any(o.flag == "failed" for rec in records for o in rec.observables)
    return 1 if args.strict and failed else 0


def _gates() -> int:
    theta = 0.7
    rows = [("td simple", td_circuit(TDPrepSpec(simple_op(theta), 0.3))),
            ("td nuclear", td_circuit(TDPrepSpec(nuclear_op_first_q(theta), 0.3,
                                                 variant="nuclear")))]
    for v in LCU_VARIANTS:
        if v == "simple-1q":
            op = simple_op(theta)
        elif v.startswith("simple-2q"):
            op = second_quantized_simple_op(theta)
        elif v == "nuclear-1q":
            op = nuclear_op_first_q(theta)
        else:
            op = nuclear_op_second_q("B", theta)
        rows.append((f"lcu {v}", lcu_full_circuit(LCUSpec(op, v))))
    for name, circ in rows:
        print(f"{name:<26} {cnot_count(circ):>3}")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run(args)
        return _gates()
    except (ConfigError, ValueError, OSError) as exc:
        print(f"exprep: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
