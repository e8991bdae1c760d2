"""Command-line front end.

Exit codes: 0 success, 2 invalid input or failed validation, 1 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .basis import EigenSolverError, ComplementError, save_bases
from .constitutive import Kappa, NortonHoff, check_assumption
from .diagnostics import EnergyReport, compare_variants, weak_residuals
from .fem import SingularMatrixError
from .io import atomic_write_text, write_csv
from .mms import COUPLED, CONSTANT, COUPLED_LADDER, HEAT_LADDER, HEAT_ONLY, MMSRow, Rung, mms_verify, observed_orders
from .ode import NonFiniteError, StepSizeUnderflow
from .runner import (
    SweepRow, basis_report, run_scenario, sweep_is_cauchy, two_level_sweep, write_outputs,
)
from .scenario import BUNDLED, Scenario, ScenarioError, bundled

log = logging.getLogger("tvesim")

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2
BASIS_TOL = 1e-9


class ValidationFailure(Exception):
    """A check ran to completion and failed."""


def _load_scenario(args) -> Scenario:
    src = args.scenario
    if src is None:
        sc = bundled("homogeneous")
    elif src in BUNDLED and not Path(src).exists():
        sc = bundled(src)
    else:
        try:
            sc = Scenario.load(src)
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario {src}: {exc}") from None
    sc = sc.with_overrides(k=args.k, l=args.l, k_trunc=args.k_trunc, variant=args.variant,
                           tol=args.tol, seed=args.seed)
    if getattr(args, "p", None) is not None:
        if args.p < 2:
            raise ScenarioError(f"growth exponent p must be >= 2, got {args.p}")
        sc.material.p = float(args.p)
    return sc


def _out_dir(args, sc: Scenario | None = None) -> Path:
    return Path(args.out if args.out is not None else (sc.output.dir if sc else "out"))


def cmd_check_constitutive(args) -> int:
    if args.p < 2:
        raise ScenarioError(f"growth exponent p must be >= 2, got {args.p}")
    law = NortonHoff(args.p, Kappa(args.kappa_base, args.kappa_amp, args.kappa_scale))
    rep = check_assumption(law, args.samples, radius=args.radius, seed=args.seed or 0)
    text = rep.as_text()
    print(text)
    if args.out is not None:
        atomic_write_text(Path(args.out) / "constitutive.txt", text + "\n")
    if not rep.admissible:
        raise ValidationFailure("constitutive law violates the admissibility assumption")
    return EXIT_OK


def cmd_basis(args) -> int:
    sc = _load_scenario(args)
    assembly = sc.assemble()
    bases = sc.bases(assembly)
    rep = basis_report(bases)
    out = _out_dir(args, sc)
    save_bases(out / "bases.bin", bases)
    text = "\n".join(f"{k} = {v!r}" for k, v in rep.items())
    atomic_write_text(out / "basis_report.txt", text + "\n")
    print(text)
    worst = max(rep.values(), default=0.0)
    if worst > BASIS_TOL:
        raise ValidationFailure(f"basis check failed: worst deviation {worst:.3e}")
    return EXIT_OK


def cmd_run(args) -> int:
    sc = _load_scenario(args)
    result = run_scenario(sc)
    out = _out_dir(args, sc)
    written = write_outputs(result, out)
    if args.weak:
        wr = weak_residuals(result.trajectory)
        text = (f"worst_momentum_residual = {wr.worst_momentum!r}\n"
                f"worst_heat_residual = {wr.worst_heat!r}\n"
                f"plastic_recovery_deviation = {wr.plastic_recovery!r}\n")
        atomic_write_text(out / "weak_residuals.txt", text)
    for path in written:
        print(path)
    return EXIT_OK


def cmd_compare_variants(args) -> int:
    sc = _load_scenario(args)
    if not sc.homogeneous:
        raise ScenarioError("compare-variants needs homogeneous data (g = 0, f = 0, g_theta = 0)")
    problem = sc.problem()
    theta0, eps0 = sc.initial_fields(problem.bases)
    cmp = compare_variants(problem, theta0, eps0, sc.integrator_config(), sc.time.t_end,
                           sc.time.samples, gamma=args.gamma)
    out = _out_dir(args, sc)
    write_csv(out / "energy_symmetric.csv", EnergyReport.HEADER, cmp.symmetric.rows())
    write_csv(out / "energy_broken.csv", EnergyReport.HEADER, cmp.broken.rows())
    atomic_write_text(out / "compare.txt", cmp.as_text() + "\n")
    print(cmp.as_text())
    return EXIT_OK


def cmd_sweep(args) -> int:
    sc = _load_scenario(args)
    rows = two_level_sweep(sc)
    out = _out_dir(args, sc)
    write_csv(out / "sweep.csv", SweepRow.HEADER, [r.as_tuple() for r in rows])
    ok = sweep_is_cauchy(rows)
    for r in rows:
        print(",".join(str(v) for v in r.as_tuple()))
    print(f"cauchy = {ok}")
    if not ok:
        raise ValidationFailure("refinement differences are not decreasing")
    return EXIT_OK


def cmd_mms(args) -> int:
    law = Scenario().law() if args.p is None else NortonHoff(args.p)
    cases = {
        "heat": (HEAT_ONLY, HEAT_LADDER),
        "coupled": (COUPLED, COUPLED_LADDER),
        "constant": (CONSTANT, (Rung((2, 2, 2), 1, 6, 1e-12),)),
    }
    sol, ladder = cases[args.case]
    rows = mms_verify(sol, ladder, law)
    out = Path(args.out if args.out is not None else "out")
    write_csv(out / f"mms_{args.case}.csv", MMSRow.HEADER, [r.as_tuple() for r in rows])
    for r in rows:
        print(",".join(repr(v) for v in r.as_tuple()))
    if len(rows) > 1:
        orders = observed_orders(rows)
        print("theta_orders = " + ",".join(f"{o:.3f}" for o in orders))
        errs = [r.err_theta for r in rows]
        if args.case == "heat" and np.min(orders) < 1.8:
            raise ValidationFailure("heat-only convergence order below 1.8")
        if any(b >= a for a, b in zip(errs, errs[1:])):
            raise ValidationFailure("errors do not decrease monotonically")
    elif args.case == "constant" and max(rows[0].err_theta, rows[0].err_u, rows[0].err_eps_p) > 1e-10:
        raise ValidationFailure("constant manufactured solution not reproduced")
    return EXIT_OK


def _common(p: argparse.ArgumentParser, scenario=True):
    if scenario:
        p.add_argument("--scenario", help="scenario YAML file or bundled name (homogeneous, loaded)")
        p.add_argument("--k", type=int, help="displacement / strain modes")
        p.add_argument("--l", type=int, help="temperature / complement modes")
        p.add_argument("--k-trunc", dest="k_trunc", type=float, help="heat-source truncation level")
        p.add_argument("--variant", choices=("symmetric", "broken", "nonlinear"))
        p.add_argument("--tol", type=float, help="integrator rtol = atol")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tvesim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"tvesim {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-constitutive", help="sample the admissibility assumption of a Norton-Hoff law")
    _common(p, scenario=False)
    p.add_argument("--p", type=float, default=3.0)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--radius", type=float, default=10.0)
    p.add_argument("--kappa-base", type=float, default=1.0)
    p.add_argument("--kappa-amp", type=float, default=1.0)
    p.add_argument("--kappa-scale", type=float, default=1.0)
    p.set_defaults(func=cmd_check_constitutive)

    p = sub.add_parser("basis", help="build and validate the Galerkin bases, write a cache")
    _common(p)
    p.set_defaults(func=cmd_basis)

    p = sub.add_parser("run", help="integrate a scenario and write CSV, field dumps and a report")
    _common(p)
    p.add_argument("--p", type=float, help="override the growth exponent")
    p.add_argument("--weak", action="store_true", help="also evaluate weak-form residuals")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare-variants", help="symmetric vs broken coupling energy balance")
    _common(p)
    p.add_argument("--gamma", type=float, help="broken-coupling constant (default: offset from the theta range)")
    p.set_defaults(func=cmd_compare_variants)

    p = sub.add_parser("sweep", help="two-level (k, l) refinement study")
    _common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("mms", help="manufactured-solution verification")
    _common(p, scenario=False)
    p.add_argument("--case", choices=("heat", "coupled", "constant"), default="heat")
    p.add_argument("--p", type=float)
    p.set_defaults(func=cmd_mms)
    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, ValidationFailure) as exc:
        print(f"tvesim: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"tvesim: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (StepSizeUnderflow, NonFiniteError, EigenSolverError, ComplementError,
            SingularMatrixError, OSError, RuntimeError, FloatingPointError) as exc:
        print(f"tvesim: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - last resort, keep the exit-code contract
        log.debug("unexpected failure", exc_info=True)
        print(f"tvesim: unexpected error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
