"""Command line front end.

Four commands over system description files:

* ``simulate``  integrate and write a trajectory table plus a JSON summary;
* ``classify``  closedness and holonomy verdicts for the constraint set;
* ``check``     the invariant suite with one line per check;
* ``derive``    print the assembled two-form, energy differential and
  residual expressions at the initial state.

Exit codes: 0 on success, 1 for input errors (bad flags or files), 2 for
runtime failures (solver errors, failed checks).  Outputs contain no
timestamps or environment data, so repeated runs are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .checks import run_check_suite
from .constraints import Classification, closedness_test, frobenius_test
from .dynamics import (
    InconsistentConstraints,
    LagrangianSystem,
    NonHolomorphicLagrangian,
    PhaseState,
    SingularKahlerMatrix,
    Trajectory,
    assemble_kahler_matrix,
    diagnostics,
    energy_differential,
    integrate,
    solve_semispray,
)
from .expressions import EvalDomainError, ParseError
from .systemfile import (
    DEFAULT_DT,
    DEFAULT_SAMPLES,
    DEFAULT_SEED,
    DEFAULT_TOL,
    SystemFileError,
    SystemSpec,
    parse_system_file,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_RUNTIME = 2


class _ArgumentParser(argparse.ArgumentParser):
    """argparse variant that reports usage problems as input errors (1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _defaults_block() -> dict:
    return {
        "dt": DEFAULT_DT,
        "samples": DEFAULT_SAMPLES,
        "tol": DEFAULT_TOL,
        "seed": DEFAULT_SEED,
    }


def _complex_json(value: complex) -> List[float]:
    return [float(value.real), float(value.imag)]


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _csv_header(m: int, r: int) -> List[str]:
    names = ["t"]
    for i in range(1, m + 1):
        names += [f"z{i}_re", f"z{i}_im"]
    for i in range(1, m + 1):
        names += [f"w{i}_re", f"w{i}_im"]
    for a in range(1, r + 1):
        names += [f"lambda{a}_re", f"lambda{a}_im"]
    names += ["E_re", "E_im", "residual_symplectic"]
    for a in range(1, r + 1):
        names += [f"omega{a}_residual"]
    names += ["semispray_defect"]
    return names


def _trajectory_rows(system: LagrangianSystem, trajectory: Trajectory) -> List[List[float]]:
    m, r = system.m, system.r
    rows = []
    for sample in trajectory.samples:
        state, sol = sample.state, sample.solution
        row = [state.t]
        for c in state.z:
            row += [c.real, c.imag]
        for c in state.w:
            row += [c.real, c.imag]
        for lam in sol.multipliers:
            row += [lam.real, lam.imag]
        row += [sample.energy.real, sample.energy.imag, sol.residual_symplectic]
        if r:
            W = system._W_eval(state.z, state.w)
            xiv = np.asarray(sol.xi.components)
            per_form = np.abs(W.T @ xiv)
            row += [float(v) for v in per_form]
        row += [sol.semispray_defect]
        rows.append([float(v) for v in row])
    return rows


def _write_csv(path: Path, header: List[str], rows: List[List[float]]) -> None:
    lines = [f"# columns={len(header)}", ",".join(header)]
    for row in rows:
        lines.append(",".join(repr(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def cmd_simulate(args) -> int:
    spec = parse_system_file(args.system)
    t1 = spec.t1 if args.t1 is None else args.t1
    dt = spec.dt if args.dt is None else args.dt
    system = spec.build_system()
    trajectory = integrate(system, spec.initial_state(), t1, dt)
    report = diagnostics(trajectory)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = _csv_header(system.m, system.r)
    rows = _trajectory_rows(system, trajectory)
    if args.format == "csv":
        _write_csv(out / f"{spec.name}_trajectory.csv", header, rows)
    else:
        _write_json(
            out / f"{spec.name}_trajectory.json",
            {"columns": header, "rows": rows},
        )

    summary = {
        "defaults": _defaults_block(),
        "system": {
            "name": spec.name,
            "m": spec.m,
            "r": spec.r,
            "lagrangian": spec.lagrangian_text,
            "constraints": list(spec.constraint_names),
        },
        "integrator": {"t1": t1, "dt": dt},
        "status": trajectory.status,
        "failure_time": trajectory.failure_time,
        "failure_kind": trajectory.failure_kind,
        "samples": report.samples,
        "csv_columns": len(header),
        "max_energy_drift": report.max_energy_drift,
        "mean_energy_drift": report.mean_energy_drift,
        "max_constraint_residual": report.max_constraint_residual,
        "max_symplectic_residual": report.max_symplectic_residual,
        "max_semispray_defect": report.max_semispray_defect,
        "energy_initial": (
            _complex_json(trajectory.samples[0].energy) if trajectory.samples else None
        ),
    }
    _write_json(out / f"{spec.name}_summary.json", summary)

    if trajectory.status == "completed":
        print(f"{spec.name}: completed, {report.samples} samples,"
              f" max energy drift {report.max_energy_drift:.3e}")
        return EXIT_OK
    print(f"{spec.name}: {trajectory.status} ({trajectory.failure_kind})"
          f" at t={trajectory.failure_time:g}")
    return EXIT_RUNTIME


def _classification_json(spec: SystemSpec, closed, cls: Classification) -> dict:
    witness = None
    if cls.witness is not None:
        w = cls.witness
        witness = {
            "form": spec.constraint_names[w.form_index],
            "z": [_complex_json(c) for c in w.z],
            "w": [_complex_json(c) for c in w.w],
            "x_hol": [_complex_json(c) for c in w.x.hol],
            "x_fib": [_complex_json(c) for c in w.x.fib],
            "y_hol": [_complex_json(c) for c in w.y.hol],
            "y_fib": [_complex_json(c) for c in w.y.fib],
            "value": w.value,
        }
    return {
        "defaults": _defaults_block(),
        "system": {"name": spec.name, "m": spec.m, "r": spec.r},
        "parameters": {"samples": cls.samples, "seed": cls.seed, "tol": cls.tol},
        "closedness": {
            name: bool(flag) for name, flag in zip(spec.constraint_names, closed)
        },
        "verdict": cls.verdict.value,
        "max_bracket": cls.max_bracket,
        "valid_samples": cls.valid_samples,
        "deficient_samples": cls.deficient_samples,
        "witness": witness,
    }


def cmd_classify(args) -> int:
    spec = parse_system_file(args.system)
    try:
        cs = spec.constraint_set()
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    samples = DEFAULT_SAMPLES if args.samples is None else args.samples
    seed = spec.seed if args.seed is None else args.seed
    tol = DEFAULT_TOL if args.tol is None else args.tol
    closed = closedness_test(cs, samples=samples, seed=seed, tol=tol)
    cls = frobenius_test(cs, samples=samples, seed=seed, tol=tol)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / f"{spec.name}_classification.json",
                _classification_json(spec, closed, cls))
    print(f"{spec.name}: {cls.verdict.value}"
          f" (max bracket {cls.max_bracket:.3e},"
          f" {cls.valid_samples} valid / {cls.deficient_samples} deficient samples)")
    return EXIT_OK


def cmd_check(args) -> int:
    spec = parse_system_file(args.system)
    t1 = spec.t1 if args.t1 is None else args.t1
    dt = spec.dt if args.dt is None else args.dt
    samples = 20 if args.samples is None else args.samples
    seed = spec.seed if args.seed is None else args.seed
    system = spec.build_system()
    results = run_check_suite(
        system,
        spec.initial_state(),
        t1,
        dt,
        samples=samples,
        seed=seed,
        overrides=spec.tolerances,
        tol_all=args.tol,
    )
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        extra = f"  [{res.note}]" if res.note else ""
        print(f"{status}  {res.name:<14} measured={res.measured:.6e}"
              f"  threshold={res.threshold:.6e}{extra}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(
        out / f"{spec.name}_check.json",
        {
            "defaults": _defaults_block(),
            "system": {"name": spec.name, "m": spec.m, "r": spec.r},
            "parameters": {"t1": t1, "dt": dt, "samples": samples, "seed": seed},
            "checks": [
                {
                    "name": r.name,
                    "measured": r.measured,
                    "threshold": r.threshold,
                    "passed": r.passed,
                    "note": r.note,
                }
                for r in results
            ],
            "all_passed": all(r.passed for r in results),
        },
    )
    failing = [r.name for r in results if not r.passed]
    if failing:
        print(f"failing checks: {', '.join(failing)}")
        return EXIT_RUNTIME
    return EXIT_OK


def _format_complex(value: complex) -> str:
    return f"{value.real:+.6e}{value.imag:+.6e}i"


def cmd_derive(args) -> int:
    spec = parse_system_file(args.system)
    system = spec.build_system()
    state = spec.initial_state()
    m, r = system.m, system.r

    print(f"system {spec.name}: m={m}, r={r}")
    print(f"L = {spec.lagrangian_text}")
    print()
    print("two-form coefficient matrix at the initial state"
          " (rows/columns ordered dz1..dzm, dw1..dwm):")
    K = assemble_kahler_matrix(system, state).as_matrix()
    for p in range(2 * m):
        print("  [" + ", ".join(_format_complex(K[p, q]) for q in range(2 * m)) + "]")
    print()

    try:
        sol = solve_semispray(system, state)
    except (SingularKahlerMatrix, InconsistentConstraints, EvalDomainError) as err:
        print(f"solve failed at the initial state: {err}")
        return EXIT_RUNTIME

    print("solved field components:")
    for i, v in enumerate(sol.xi.hol, start=1):
        print(f"  xi{i}    = {_format_complex(v)}")
    for i, v in enumerate(sol.xi.fib, start=1):
        print(f"  xibar{i} = {_format_complex(v)}")
    for a, lam in enumerate(sol.multipliers, start=1):
        print(f"  lambda{a} = {_format_complex(lam)}")
    print()

    dE = energy_differential(system, state, sol.xi)
    print("energy differential coefficients (dz then dw):")
    for i, c in enumerate(dE.a, start=1):
        print(f"  dz{i}: {_format_complex(complex(c))}")
    for i, c in enumerate(dE.b, start=1):
        print(f"  dw{i}: {_format_complex(complex(c))}")
    print()

    print("residual expressions (time derivative expanded along the field):")
    for j in range(m):
        dt_terms = " + ".join(
            f"({system._A[j][i]})*xi{i + 1} + ({system._H[j][i]})*xibar{i + 1}"
            for i in range(m)
        )
        lam_terms = "".join(
            f" - ({system.constraints[a].coefficients[j]})*lambda{a + 1}"
            for a in range(r)
        )
        print(f"  z{j + 1}: ({system._Lz[j]}) - i*({dt_terms}){lam_terms}")
    for j in range(m):
        dt_terms = " + ".join(
            f"({system._H[i][j]})*xi{i + 1} + ({system._B[j][i]})*xibar{i + 1}"
            for i in range(m)
        )
        lam_terms = "".join(
            f" - ({system.constraints[a].coefficients[m + j]})*lambda{a + 1}"
            for a in range(r)
        )
        print(f"  w{j + 1}: ({system._Lw[j]}) + i*({dt_terms}){lam_terms}")
    print()
    print("pointwise residuals: "
          f"symplectic {sol.residual_symplectic:.3e}, "
          f"constraints {sol.residual_constraints:.3e}, "
          f"semispray defect {sol.semispray_defect:.3e}")
    return EXIT_OK


def build_parser() -> _ArgumentParser:
    parser = _ArgumentParser(
        prog="kahlermech",
        description="Constrained Lagrangian mechanics on flat complex phase charts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_format=False, with_integrator=False, with_sampling=False):
        p.add_argument("--system", required=True, help="path to a system file")
        p.add_argument("--out", default=".", help="output directory")
        if with_format:
            p.add_argument("--format", choices=("csv", "json"), default="csv",
                           help="trajectory output format")
        if with_integrator:
            p.add_argument("--t1", type=float, default=None, help="final time override")
            p.add_argument("--dt", type=float, default=None, help="step size override")
        if with_sampling:
            p.add_argument("--tol", type=float, default=None, help="tolerance override")
            p.add_argument("--samples", type=int, default=None, help="sample count")
            p.add_argument("--seed", type=int, default=None, help="sampling seed")

    p = sub.add_parser("simulate", help="integrate a system and write outputs")
    common(p, with_format=True, with_integrator=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("classify", help="closedness and holonomy verdicts")
    common(p, with_sampling=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("check", help="run the invariant suite")
    common(p, with_integrator=True, with_sampling=True)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("derive", help="print assembled objects at the initial state")
    common(p)
    p.set_defaults(func=cmd_derive)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemFileError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except (ParseError, NonHolomorphicLagrangian) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as err:  # runtime failures keep the 0/1/2 contract
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
