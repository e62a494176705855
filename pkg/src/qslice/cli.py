"""Command-line entry point.

Verbs: ``run``, ``validate``, ``modes``, ``fock-check`` and ``report``.
Exit codes: 0 success, 2 invalid configuration, 3 audit failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, tomllib, validate
from .fock_kernel import FockError, fock_battery
from .lattice_phonon import LatticeError, lattice_from_dict, normal_modes, write_mode_table, mode_width
from .measurement import CaptureSignError, ConservationError, SinkLeakError, read_ledger
from .scenarios import BUNDLED, load_bundled
from .tdse import StepAuditError

EXIT_OK, EXIT_CONFIG, EXIT_AUDIT = 0, 2, 3
AUDIT_ERRORS = (ConservationError, SinkLeakError, CaptureSignError, StepAuditError)


def load_config(arg: str) -> RunConfig:
    """Load a config file, or a bundled scenario when ``arg`` names one."""
    path = Path(arg)
    if path.exists():
        return RunConfig.load(path)
    if arg in BUNDLED:
        return load_bundled(arg)
    raise ConfigError(f"no config file or bundled scenario named {arg!r}")


def _print(data) -> None:
    print(json.dumps(data, indent=2, sort_keys=True))


def cmd_run(args) -> int:
    from .runner import run

    config = load_config(args.config)
    report = run(config, args.out, with_reference=not args.no_reference)
    summary = {"name": report.name, "captured": report.ledger["total_captured"],
               "records": report.ledger["records"],
               "max_identity_residual": report.audit["max_identity_residual"],
               "max_step_residual": report.audit["max_step_residual"],
               "overlap": report.overlap["status"], "born_l1": report.born_l1,
               "wall_clock": report.wall_clock}
    _print(summary)
    return EXIT_OK


def cmd_validate(args) -> int:
    audit = validate(load_config(args.config))
    _print({"valid": True, **audit})
    return EXIT_OK


def cmd_modes(args) -> int:
    try:
        spec = tomllib.loads(Path(args.lattice_config).read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read lattice config: {exc}") from exc
    block = spec.get("lattice", spec)
    try:
        lat = lattice_from_dict(block)
        modes = normal_modes(lat, float(spec.get("hbar", 1.0)), spec.get("zero_width"))
    except (KeyError, TypeError, LatticeError) as exc:
        raise ConfigError(f"invalid lattice: {exc}") from exc
    if args.out:
        write_mode_table(modes, args.out)
    print("index,omega,m_eff,width")
    for m in modes.modes:
        print(f"{m.index},{m.omega!r},{m.mass!r},{mode_width(m, modes.hbar)!r}")
    print(f"# zero modes removed: {modes.zero_modes_removed}", file=sys.stderr)
    return EXIT_OK


def cmd_fock_check(args) -> int:
    try:
        rep = fock_battery(args.modes, args.max_n, args.trials, args.seed)
    except FockError as exc:
        raise ConfigError(str(exc)) from exc
    _print({"passed": rep.passed, "trials": rep.trials, "max_commutator": rep.max_commutator,
            "max_aa": rep.max_aa, "max_cc": rep.max_cc, "number_exact": rep.number_exact,
            "create_injective": rep.create_injective, "ladder_identity": rep.ladder_identity})
    return EXIT_OK if rep.passed else EXIT_AUDIT


def summarize_ledger(path) -> dict:
    """Per-body captured probability and record counts from a ledger file."""
    records, summary = read_ledger(path)
    ranges = {k.split(":", 1)[1]: tuple(int(x) for x in v.split()) for k, v in summary.items()
              if k.startswith("sites:")}
    bodies = {}
    for name, (first, count) in ranges.items():
        mine = [r for r in records if first <= r["site_id"] < first + count]
        bodies[name] = {"captured": math.fsum(r["probability"] for r in mine), "records": len(mine),
                        "sites_hit": len({r["site_id"] for r in mine})}
    return {"records": len(records), "total_captured": math.fsum(r["probability"] for r in records),
            "bodies": bodies, "summary": summary}


def cmd_report(args) -> int:
    out = Path(args.dir)
    ledger = out / args.ledger
    if not ledger.exists():
        raise ConfigError(f"no ledger file at {ledger}")
    _print(summarize_ledger(ledger))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qslice", description="Flux-sliced measurement simulator.")
    sub = p.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="run a scenario config")
    r.add_argument("config", help="TOML file or bundled scenario name")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--no-reference", action="store_true", help="skip the reference computation")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="cross-validate a config without running it")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)

    m = sub.add_parser("modes", help="normal modes of a lattice config")
    m.add_argument("lattice_config")
    m.add_argument("--out", help="write the mode table to this file")
    m.set_defaults(func=cmd_modes)

    f = sub.add_parser("fock-check", help="run the Fock-space property battery")
    f.add_argument("--modes", type=int, default=4)
    f.add_argument("--max-n", type=int, default=5)
    f.add_argument("--trials", type=int, default=100)
    f.add_argument("--seed", type=int, default=0)
    f.set_defaults(func=cmd_fock_check)

    s = sub.add_parser("report", help="re-summarize the ledger in a run directory")
    s.add_argument("dir")
    s.add_argument("--ledger", default="ledger.csv")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AUDIT_ERRORS as exc:
        print(f"audit failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_AUDIT


if __name__ == "__main__":
    sys.exit(main())
