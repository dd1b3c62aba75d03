"""Command-line entry point.

Exit codes: 0 success, 1 verification or statistical failure, 2 usage,
config or parse error, 3 abort-rate breach.
"""

import argparse
import sys

import numpy as np

from . import curves as cv
from . import io
from . import matcore as mc
from . import verify
from .errors import (
    ClampExceeded,
    CompletenessViolation,
    ConfigError,
    ParseError,
    ShapeMismatch,
    SingularResidual,
    WeakPovmError,
)
from .harness import compare_multi, run_ensemble
from .instrument import InstrumentClass, binary_reduce, validate, validate_multi, weakness
from .walk import QuantumState, WalkConfig

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_ABORT = 3


def fmt(v) -> str:
    """12 significant digits; complex values as ``re+imj``."""
    if v is None:
        return "nan"
    if isinstance(v, complex) or np.iscomplexobj(v):
        z = complex(v)
        return f"{z.real:.12g}{z.imag:+.12g}j"
    return f"{float(v):.12g}"


def _print_matrix(m, out) -> None:
    for row in np.asarray(m):
        print("  [" + ", ".join(fmt(z) for z in row) + "]", file=out)


def _spectrum(m) -> str:
    h = mc.dagger(m) @ m
    w = np.linalg.eigvalsh(0.5 * (h + mc.dagger(h)))
    return "[" + ", ".join(fmt(v) for v in w) + "]"


def cmd_validate(args, out=None) -> int:
    out = out or sys.stdout
    try:
        ops = io.load_instrument(args.file)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if len(ops) == 2:
            inst = validate(*ops)
            print(f"class: {inst.kind}", file=out)
            print(f"dimension: {inst.dim}", file=out)
            print(f"completeness residual: {fmt(inst.residual)}", file=out)
            for j, m in enumerate(inst.operators, start=1):
                print(f"spectrum M{j}^dagger M{j}: {_spectrum(m)}", file=out)
            return EXIT_OK
        multi = validate_multi(ops)
        residual = mc.fro(sum(mc.dagger(m) @ m for m in multi.operators) - np.eye(multi.dim))
        print(f"class: {multi.n}-outcome", file=out)
        print(f"dimension: {multi.dim}", file=out)
        print(f"completeness residual: {fmt(residual)}", file=out)
        for j, m in enumerate(multi.operators, start=1):
            print(f"spectrum M{j}^dagger M{j}: {_spectrum(m)}", file=out)
        if multi.n >= 2:
            for k, node in enumerate(binary_reduce(multi), start=1):
                print(f"reduction node {k}: {node.instrument.kind}", file=out)
        return EXIT_OK
    except CompletenessViolation as exc:
        print(f"invalid: completeness residual {fmt(exc.residual)}", file=out)
        return EXIT_FAIL
    except SingularResidual as exc:
        print(f"invalid: {exc}", file=out)
        return EXIT_FAIL
    except ShapeMismatch as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _load_state(path, dim) -> QuantumState:
    if path is None:
        return QuantumState.maximally_mixed(dim)
    state = io.load_state(path)
    if state.dim != dim:
        raise ConfigError(f"state dimension {state.dim} != instrument dimension {dim}")
    return state


def cmd_simulate(args, out=None) -> int:
    out = out or sys.stdout
    if args.trajectories < 100:
        print(f"usage error: --trajectories must be at least 100, got {args.trajectories}",
              file=sys.stderr)
        return EXIT_USAGE
    try:
        config = WalkConfig(args.epsilon, args.threshold, seed=args.seed,
                            max_steps=args.max_steps, x0=args.x0)
        config.check_clamp(cv.X_CLAMP)
        multi = validate_multi(io.load_instrument(args.instrument))
        state = _load_state(args.state, multi.dim)
        keep = bool(args.trajectories_out or args.csv)
        if multi.n == 2:
            curve = cv.OperatorCurve(validate(*multi.operators))
            report = run_ensemble(curve, state.rho, config, args.trajectories, keep_rows=keep,
                                  log_steps=args.log_steps, backend=args.backend)
        elif multi.n > 2:
            report = compare_multi(multi, state.rho, config, args.trajectories, keep_rows=keep,
                                   backend=args.backend)
        else:
            raise ConfigError("simulation needs at least two outcomes")
    except (ParseError, ConfigError, ShapeMismatch, CompletenessViolation, SingularResidual) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    print(f"{'outcome':>8} {'target':>20} {'empirical':>20} {'z':>20}", file=out)
    for lab, target, freq, z in report.summary_rows():
        print(f"{lab:>8} {fmt(target):>20} {fmt(freq):>20} {fmt(z):>20}", file=out)
    print(f"trajectories: {report.n_trajectories}  aborted: {report.aborted}  "
          f"degenerate: {report.degenerate}  mean steps: {fmt(report.mean_steps)}", file=out)
    print("max final-state trace distance: "
          + ", ".join(fmt(t) for t in report.max_trace_distance), file=out)
    print(f"gate: {'pass' if report.gate_ok else 'FAIL'}", file=out)

    if args.out:
        io.write_json(args.out, report.to_json_dict())
    if args.trajectories_out:
        rows = [{k: v for k, v in r.items() if k != "traceDistance"} for r in report.rows]
        io.write_jsonl(args.trajectories_out, rows)
    if args.csv:
        report.write_csv(args.csv)

    if report.abort_breach:
        print(f"abort rate {fmt(report.abort_rate)} exceeds limit", file=sys.stderr)
        return EXIT_ABORT
    return EXIT_OK if report.gate_ok else EXIT_FAIL


def cmd_verify(args, out=None) -> int:
    out = out or sys.stdout
    results = verify.run_suite(args.suite, seeds=args.seeds, base_seed=args.base_seed)
    first_fail = None
    for suite, checks in results.items():
        for c in checks:
            status = "ok" if c.passed else "FAIL"
            print(f"{suite:12} {c.name:45} {fmt(c.residual):>20}  tol {fmt(c.tol):<8} {status}", file=out)
            if not c.passed and first_fail is None:
                first_fail = (suite, c)
    if first_fail is not None:
        suite, c = first_fail
        print(f"first failure: {suite}: {c.name} residual {fmt(c.residual)}", file=out)
        return EXIT_FAIL
    return EXIT_OK


def cmd_curve(args, out=None) -> int:
    out = out or sys.stdout
    try:
        ops = io.load_instrument(args.instrument)
        if len(ops) != 2:
            raise ConfigError("curve needs a two-outcome instrument")
        curve = cv.OperatorCurve(validate(*ops))
        m = cv.weak_op(curve, args.x, args.y)
    except ClampExceeded as exc:
        print(f"clamp violation: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, ConfigError, ShapeMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CompletenessViolation as exc:
        print(f"invalid instrument: completeness residual {fmt(exc.residual)}", file=sys.stderr)
        return EXIT_FAIL
    print(f"class: {curve.kind}", file=out)
    print(f"M({fmt(args.x)}, {fmt(args.y)}) =", file=out)
    _print_matrix(m, out)
    rep = weakness(m)
    print(f"weakness scalar: {fmt(rep.scalar)}", file=out)
    print(f"weakness deviation: {fmt(rep.deviation)}", file=out)
    if curve.kind is InstrumentClass.GENERAL:
        v, _ = mc.polar_decompose(m)
        print(f"polar factor unitarity residual: {fmt(mc.fro(mc.dagger(v) @ v - np.eye(curve.dim)))}",
              file=out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="weakpovm", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="classify an instrument file")
    v.add_argument("file")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("simulate", help="run a Monte Carlo ensemble of walks")
    s.add_argument("--instrument", required=True)
    s.add_argument("--state")
    s.add_argument("--epsilon", type=float, required=True)
    s.add_argument("--threshold", type=float, required=True)
    s.add_argument("--trajectories", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-steps", type=int)
    s.add_argument("--x0", type=float, default=0.0, help="start position (projective only)")
    s.add_argument("--out", help="ensemble report JSON")
    s.add_argument("--trajectories-out", help="per-trajectory JSONL")
    s.add_argument("--csv", help="per-trajectory CSV")
    s.add_argument("--log-steps", action="store_true")
    s.add_argument("--backend", choices=("numba", "numpy"))
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("verify", help="run an invariant suite")
    r.add_argument("suite", choices=verify.SUITES + ("all",))
    r.add_argument("--seeds", type=int, default=100)
    r.add_argument("--base-seed", type=int, default=0)
    r.set_defaults(func=cmd_verify)

    c = sub.add_parser("curve", help="print M(x, y) for an instrument")
    c.add_argument("--instrument", required=True)
    c.add_argument("--x", type=float, required=True)
    c.add_argument("--y", type=float, required=True)
    c.set_defaults(func=cmd_curve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except WeakPovmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
