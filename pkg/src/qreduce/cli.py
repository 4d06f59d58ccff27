"""Command-line front end.

Exit codes: 0 success, 1 a check failed or the input admits no requested
construction, 2 the input could not be parsed or is not a valid object.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import math
import os
import sys
from typing import Iterator, Sequence, TextIO

import numpy as np

from qreduce import serialization as ser
from qreduce.apparatus import from_output_states, measure
from qreduce.dilation import (
    construct_nondegenerate_dilation,
    dilate_cp_distribution,
    realize,
    verify_realization,
)
from qreduce.errors import (
    CountMismatch,
    DegenerateObservable,
    DimensionError,
    InconsistentAction,
    InvalidOperator,
    NotCompatible,
    NotCP,
    NotIsometry,
    ParseError,
    ZeroProbability,
)
from qreduce.operators import DEFAULT_TOL, Tolerances, as_density
from qreduce.randomness import make_rng
from qreduce.sequential import chain_probabilities, joint_distribution, sample_trajectory
from qreduce.verification import REF_REALIZATION, Report, verify_apparatus, verify_model, verify_superoperator

EXIT_OK, EXIT_FAIL, EXIT_PARSE = 0, 1, 2
SEED_ENV = "QREDUCE_SEED"
REALIZATION_TOL = 1e-9

# flag suffix -> Tolerances field
_TOL_FLAGS = {
    "herm": "herm",
    "idempotency": "idempotency",
    "trace": "trace",
    "psd": "psd",
    "group": "group",
    "norm": "normalization",
    "cp": "cp",
    "rank": "rank",
    "prob-floor": "prob_floor",
    "outcome": "outcome",
}


class CheckFailed(Exception):
    """A verification report contains a failing check."""


class UsageError(Exception):
    """Invalid combination of command-line options."""


def fmt(x: float) -> str:
    """Fixed 12-significant-digit rendering used by every table."""
    return f"{x:.12g}"


# --- loading ---------------------------------------------------------------------


@contextlib.contextmanager
def _loading(path: str) -> Iterator[None]:
    """Report malformed or invalid inputs as parse failures."""
    try:
        yield
    except ParseError:
        raise
    except (InvalidOperator, DimensionError, CountMismatch, NotIsometry, ValueError) as exc:
        raise ParseError(f"{path}: {exc}") from None


def _load_state(path: str, tol: Tolerances) -> np.ndarray:
    with _loading(path):
        return as_density(ser.matrix_from_json(ser.load_json(path)), tol)


def _load_apparatus(path: str, tol: Tolerances):
    with _loading(path):
        return ser.apparatus_from_json(ser.load_json(path), tol)


def _tolerances(args: argparse.Namespace) -> Tolerances:
    overrides = {field: getattr(args, "tol_" + flag.replace("-", "_")) for flag, field in _TOL_FLAGS.items()}
    try:
        return DEFAULT_TOL.with_overrides(**overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# --- output ----------------------------------------------------------------------


def _emit_json(obj, out: TextIO) -> None:
    out.write(json.dumps(obj, indent=1) + "\n")


def _emit_table(header: Sequence[str], rows: Sequence[Sequence[str]], out: TextIO) -> None:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    out.write("  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip() + "\n")
    for r in rows:
        out.write("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() + "\n")


def _emit_report(report: Report, args, out: TextIO, extra: dict | None = None) -> None:
    if args.format == "json":
        _emit_json({**(extra or {}), **report.as_dict()}, out)
        return
    for k, v in (extra or {}).items():
        out.write(f"{k}: {v}\n")
    rows = [
        [c.name, "pass" if c.passed else "FAIL", fmt(c.deviation), c.reference]
        for c in report.checks
    ]
    _emit_table(["check", "verdict", "deviation", "reference"], rows, out)
    out.write(f"overall: {'pass' if report.passed else 'FAIL'}\n")


def _matrix_rows(m: np.ndarray) -> list[str]:
    def entry(z: complex) -> str:
        if abs(z.imag) == 0.0:
            return fmt(z.real)
        return f"{fmt(z.real)}{'+' if z.imag >= 0 else '-'}{fmt(abs(z.imag))}j"

    return ["[" + ", ".join(entry(z) for z in row) + "]" for row in m]


# --- commands --------------------------------------------------------------------


def cmd_verify(args, out: TextIO) -> int:
    tol = _tolerances(args)
    with _loading(args.file):
        doc = ser.load_json(args.file)
        kind = ser.detect_kind(doc)
        if kind == "apparatus":
            target = ser.apparatus_from_json(doc, tol, validate=False)
        elif kind == "superoperator":
            target = ser.superop_from_json(doc)
        elif kind == "model":
            target = ser.model_from_json(doc, tol)
        else:
            raise ParseError(f"{args.file}: an observable alone has nothing to verify")
    if kind == "apparatus":
        report = verify_apparatus(target, args.samples, args.seed_value, tol)
    elif kind == "superoperator":
        report = verify_superoperator(target, args.samples, args.seed_value, tol)
    else:
        report = verify_model(target, seed=args.seed_value, tol=tol)
    _emit_report(report, args, out, {"kind": kind})
    if not report.passed:
        raise CheckFailed(", ".join(f"{c.name} [{c.reference}]" for c in report.failures()))
    return EXIT_OK


def cmd_dilate(args, out: TextIO) -> int:
    tol = _tolerances(args)
    with _loading(args.file):
        doc = ser.load_json(args.file)
        if ser.is_compact_apparatus(doc):
            A, states = ser.compact_apparatus_parts(doc, tol)
            states = [as_density(s, tol) for s in states]
            target = None
        else:
            target = ser.apparatus_from_json(doc, tol)
    if target is None:
        model = construct_nondegenerate_dilation(A, states, tol)
        target = from_output_states(A, states, tol)
        route = "nondegenerate output states"
    else:
        model = dilate_cp_distribution(target, tol=tol)
        route = "Kraus isometry"
    dev = verify_realization(model, target, seed=args.seed_value)
    ser.dump_json(ser.model_to_json(model), args.output)
    report = Report()
    report.add("realization deviation (trace norm)", dev <= REALIZATION_TOL, dev, REF_REALIZATION)
    _emit_report(report, args, out, {"route": route, "probe_dim": model.probe_dim, "model": args.output})
    if not report.passed:
        raise CheckFailed("realized apparatus differs from the input")
    return EXIT_OK


def cmd_realize(args, out: TextIO) -> int:
    tol = _tolerances(args)
    with _loading(args.model):
        model = ser.model_from_json(ser.load_json(args.model), tol)
    app = realize(model)
    doc = ser.apparatus_to_json(app)
    if args.output:
        ser.dump_json(doc, args.output)
    if args.format == "json":
        _emit_json(doc if not args.output else {"apparatus": args.output, "outcomes": app.outcomes}, out)
    else:
        effects = app.opdist.effects()
        rows = [[fmt(x), fmt(float(np.trace(effects[x]).real))] for x in app.outcomes]
        _emit_table(["outcome", "effect trace"], rows, out)
        out.write(f"normalization deviation: {fmt(app.opdist.normalization_error())}\n")
    return EXIT_OK


def cmd_measure(args, out: TextIO) -> int:
    tol = _tolerances(args)
    app = _load_apparatus(args.apparatus, tol)
    rho = _load_state(args.state, tol)
    stats = measure(app, rho)
    if args.format == "json":
        _emit_json({
            "outcomes": [
                {"outcome": x, "probability": r.probability,
                 "state": None if r.state is None else ser.matrix_to_json(r.state)}
                for x, r in stats.entries.items()
            ]
        }, out)
        return EXIT_OK
    _emit_table(["outcome", "probability"], [[fmt(x), fmt(r.probability)] for x, r in stats.entries.items()], out)
    for x, r in stats.entries.items():
        out.write(f"state after {fmt(x)}:")
        if r.state is None:
            out.write(" indefinite (zero probability)\n")
        else:
            out.write("\n" + "".join(f"  {line}\n" for line in _matrix_rows(r.state)))
    return EXIT_OK


def cmd_joint(args, out: TextIO) -> int:
    tol = _tolerances(args)
    app1 = _load_apparatus(args.app1, tol)
    app2 = _load_apparatus(args.app2, tol)
    rho = _load_state(args.state, tol)
    j = joint_distribution(app1, app2, rho)
    if args.format == "json":
        _emit_json(ser.joint_to_json(j), out)
    else:
        _emit_table(["x", "y", "probability"], [[fmt(x), fmt(y), fmt(p)] for (x, y), p in j.entries.items()], out)
    return EXIT_OK


def _summary_rows(counts: dict, runs: int, exact: dict) -> list[dict]:
    rows = []
    for key in sorted(set(exact) | set(counts)):
        p = max(exact.get(key, 0.0), 0.0)
        freq = counts.get(key, 0) / runs
        se = math.sqrt(p * (1 - p) / runs)
        within = abs(freq - p) <= 3 * se if se > 0 else freq == p
        rows.append({"outcomes": list(key), "count": counts.get(key, 0), "frequency": freq,
                     "exact": p, "stderr": se, "within_3se": bool(within)})
    return rows


def cmd_simulate(args, out: TextIO) -> int:
    tol = _tolerances(args)
    if args.seed is None:
        raise UsageError(f"simulate needs --seed or the {SEED_ENV} environment variable")
    if args.runs < 1:
        raise UsageError("--runs must be positive")
    with _loading(args.chain):
        apps = ser.chain_from_json(ser.load_json(args.chain), tol)
    rho0 = _load_state(args.state, tol)
    rng = make_rng(args.seed)
    counts: dict[tuple[float, ...], int] = {}
    sink = None
    if args.output:
        sink = open(args.output, "w")
    elif not args.summary:
        sink = out
    try:
        for run in range(args.runs):
            steps = sample_trajectory(apps, rho0, rng)
            key = tuple(s.outcome for s in steps)
            counts[key] = counts.get(key, 0) + 1
            if sink is not None:
                for i, s in enumerate(steps):
                    sink.write(json.dumps(ser.trajectory_record(i, s.outcome, s.state, run)) + "\n")
    finally:
        if sink is not None and sink is not out:
            sink.close()
    if args.summary:
        rows = _summary_rows(counts, args.runs, chain_probabilities(apps, rho0))
        if args.format == "json":
            _emit_json({"runs": args.runs, "seed": args.seed, "sequences": rows}, out)
        else:
            _emit_table(
                ["outcomes", "count", "frequency", "exact", "stderr", "within 3se"],
                [[" ".join(fmt(v) for v in r["outcomes"]), str(r["count"]), fmt(r["frequency"]),
                  fmt(r["exact"]), fmt(r["stderr"]), "yes" if r["within_3se"] else "no"] for r in rows],
                out,
            )
    return EXIT_OK


# --- parser ----------------------------------------------------------------------


def _seed_from_env() -> int | None:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("table", "json"), default="table")
    common.add_argument("--seed", type=int, default=None,
                        help=f"random seed (falls back to ${SEED_ENV})")
    tols = common.add_argument_group("tolerances")
    for flag, field in _TOL_FLAGS.items():
        tols.add_argument(f"--tol-{flag}", type=float, default=None, metavar="X",
                          help=f"override {field} (default {getattr(DEFAULT_TOL, field):g})")

    parser = argparse.ArgumentParser(prog="qreduce", description="Measuring-apparatus calculus toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="run the verification suite on a file")
    p.add_argument("file")
    p.add_argument("--samples", type=int, default=1000, help="positivity samples per operation")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("dilate", parents=[common], help="synthesize an indirect measurement model")
    p.add_argument("file")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_dilate)

    p = sub.add_parser("realize", parents=[common], help="apparatus of an indirect measurement model")
    p.add_argument("model")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_realize)

    p = sub.add_parser("measure", parents=[common], help="output distribution and output states")
    p.add_argument("apparatus")
    p.add_argument("state")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("joint", parents=[common], help="joint distribution of two successive measurements")
    p.add_argument("app1")
    p.add_argument("app2")
    p.add_argument("state")
    p.set_defaults(func=cmd_joint)

    p = sub.add_parser("simulate", parents=[common], help="sample trajectories of a measurement chain")
    p.add_argument("chain")
    p.add_argument("state")
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--summary", action="store_true", help="print empirical vs exact frequencies")
    p.add_argument("-o", "--output", help="write JSON-lines trajectories here")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Sequence[str] | None = None, out: TextIO | None = None, err: TextIO | None = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.seed is None:
            args.seed = _seed_from_env()
        args.seed_value = 0 if args.seed is None else args.seed
        return args.func(args, out)
    except (ParseError, UsageError) as exc:
        err.write(f"qreduce: error: {exc}\n")
        return EXIT_PARSE
    except CheckFailed as exc:
        err.write(f"qreduce: check failed: {exc}\n")
        return EXIT_FAIL
    except (NotCP, DegenerateObservable, NotCompatible, DimensionError, CountMismatch,
            ZeroProbability, InconsistentAction, InvalidOperator) as exc:
        err.write(f"qreduce: {type(exc).__name__}: {exc}\n")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
