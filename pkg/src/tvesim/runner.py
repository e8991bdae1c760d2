"""Scenario execution and output files."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .basis import eigen_residuals
from .diagnostics import BoundMonitor, EnergyReport, bound_monitor, energy_report
from .galerkin import Problem, Trajectory, initial_state, integrate, reconstruct
from .io import atomic_write_text, write_csv, write_field_dump
from .scenario import Scenario

log = logging.getLogger(__name__)


@dataclass
class RunResult:
    scenario: Scenario
    problem: Problem
    trajectory: Trajectory
    energy: EnergyReport
    bounds: BoundMonitor


def run_scenario(scenario: Scenario, assembly=None, bases=None) -> RunResult:
    problem = scenario.problem(assembly, bases)
    theta0, eps0 = scenario.initial_fields(problem.bases)
    state0 = initial_state(problem, theta0, eps0)
    config = scenario.integrator_config()
    traj = integrate(problem, state0, config, scenario.time.t_end, scenario.time.samples)
    report = energy_report(traj)
    bounds = bound_monitor(traj, report)
    log.info("run %s: %d rhs evaluations, max |R| = %.3e", scenario.name, traj.n_eval, report.max_residual)
    return RunResult(scenario, problem, traj, report, bounds)


def _time_tag(t: float) -> str:
    return f"{t:.6f}".rstrip("0").rstrip(".").replace(".", "p") or "0"


def write_outputs(result: RunResult, out_dir) -> list[Path]:
    """``energy.csv``, ``bounds.csv``, ``fields_<t>.bin`` and ``report.txt``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    rep = result.energy
    write_csv(out / "energy.csv", EnergyReport.HEADER, rep.rows())
    written.append(out / "energy.csv")
    bd = result.bounds.as_dict()
    write_csv(out / "bounds.csv", ("quantity", "value"), [(k, float(v)) for k, v in bd.items()])
    written.append(out / "bounds.csv")

    p = result.problem
    traj = result.trajectory
    mesh_hash = p.assembly.mesh.hash()
    lt, k, lz = traj.sizes
    for t in result.scenario.output.field_times:
        if not traj.times[0] <= t <= traj.times[-1]:
            log.warning("field time %g outside the run, skipped", t)
            continue
        i = int(np.argmin(np.abs(traj.times - t)))
        state = traj.state(i) if abs(traj.times[i] - t) < 1e-12 else None
        if state is None:
            from .galerkin import GalerkinState

            state = GalerkinState.from_xi(t, traj.xi_at(t), traj.sizes)
        f = reconstruct(p, state)
        path = out / f"fields_{_time_tag(t)}.bin"
        write_field_dump(path, mesh_hash, k, lt, lz, p.variant.kind, t,
                         {"theta": f.theta_qp, "eps_p": f.eps_p, "T": f.T, "sigma": f.sigma, "strain": f.strain})
        written.append(path)
    atomic_write_text(out / "report.txt", run_report_text(result))
    written.append(out / "report.txt")
    return written


def run_report_text(result: RunResult) -> str:
    sc = result.scenario
    traj = result.trajectory
    rep = result.energy
    lt, k, lz = traj.sizes
    lines = [
        f"scenario = {sc.name}",
        f"variant = {result.problem.variant.kind}",
        f"flags = {','.join(traj.flags) or 'none'}",
        f"k = {k}",
        f"l_theta = {lt}",
        f"l_zeta = {lz}",
        f"k_trunc = {sc.galerkin.k_trunc!r}",
        f"method = {traj.config.method}",
        f"rtol = {traj.config.rtol!r}",
        f"atol = {traj.config.atol!r}",
        f"rhs_evaluations = {traj.n_eval}",
        f"t_end = {float(traj.times[-1])!r}",
        f"E_initial = {float(rep.E[0])!r}",
        f"E_final = {float(rep.E[-1])!r}",
        f"H_initial = {float(rep.H[0])!r}",
        f"H_final = {float(rep.H[-1])!r}",
        f"max_abs_residual = {rep.max_residual!r}",
        f"min_dissipation = {float(np.min(rep.dissipation))!r}",
    ]
    if k:
        lines.append(f"max_abs_alpha_minus_gamma = {max_alpha_gamma_gap(traj)!r}")
    lines += [f"bound.{key} = {float(v)!r}" for key, v in result.bounds.as_dict().items()]
    return "\n".join(lines) + "\n"


def max_alpha_gamma_gap(traj: Trajectory) -> float:
    lt, k, _ = traj.sizes
    gap = 0.0
    for i in range(len(traj.times)):
        st = traj.state(i)
        gap = max(gap, float(np.max(np.abs(st.alpha - st.gamma))))
    return gap


@dataclass
class SweepRow:
    stage: str
    k: int
    l: int
    E_final: float
    delta: float  # |E(T) - previous E(T)| within the stage, nan for the first rung

    HEADER = ("stage", "k", "l", "E_final", "abs_delta")

    def as_tuple(self):
        return (self.stage, self.k, self.l, self.E_final, self.delta)


L_LADDER = (4, 8, 16)
K_LADDER = (4, 8, 16)


def two_level_sweep(scenario: Scenario, k_fixed: int = 8, l_ladder=L_LADDER, k_ladder=K_LADDER) -> list[SweepRow]:
    """Refine ``l`` at fixed ``k``, then ``k`` with ``l = 2k`` (the limit order of the construction)."""
    assembly = scenario.assemble()
    rows = []
    for stage, pairs in (("l", [(k_fixed, l) for l in l_ladder]), ("k", [(k, 2 * k) for k in k_ladder])):
        prev = None
        for k, l in pairs:
            sc = scenario.with_overrides(k=k, l=l)
            res = run_scenario(sc, assembly=assembly)
            e = float(res.energy.E[-1])
            rows.append(SweepRow(stage, k, l, e, float("nan") if prev is None else abs(e - prev)))
            prev = e
    return rows


def sweep_is_cauchy(rows: list[SweepRow], noise: float = 2.0) -> bool:
    """Each successive difference within a stage is at most ``noise`` times the previous one."""
    for stage in ("l", "k"):
        d = [r.delta for r in rows if r.stage == stage and np.isfinite(r.delta)]
        if any(b > noise * a for a, b in zip(d, d[1:])):
            return False
    return True


def basis_report(bases) -> dict:
    """Orthonormality and eigen-residual figures for a basis set."""
    from .basis import d_gram

    a = bases.assembly
    out = {}
    if bases.k:
        out["disp_gram_error"] = float(np.max(np.abs(d_gram(a, bases.disp.strains) - np.eye(bases.k))))
        out["disp_eig_residual"] = float(np.max(eigen_residuals(a.K_u, a.M_u, bases.disp.vectors,
                                                                bases.disp.eigenvalues)))
    if bases.l_theta:
        V = bases.temp.vectors
        out["temp_gram_error"] = float(np.max(np.abs(V @ (a.M_theta @ V.T) - np.eye(bases.l_theta))))
        out["temp_eig_residual"] = float(np.max(eigen_residuals(a.K_theta, a.M_theta, V,
                                                                bases.temp.eigenvalues)))
    if bases.l_zeta:
        out["comp_gram_error"] = float(np.max(np.abs(d_gram(a, bases.comp.fields) - np.eye(bases.l_zeta))))
        if bases.k:
            out["cross_gram_error"] = float(np.max(np.abs(d_gram(a, bases.disp.strains, bases.comp.fields))))
    return out
