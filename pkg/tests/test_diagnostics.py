import numpy as np
import pytest

from tvesim.basis import build_bases
from tvesim.diagnostics import (
    bound_monitor, compare_variants, energy_report, legendre_probe, potential_energy, probe_indices,
    time_bump, weak_residuals,
)
from tvesim.fem import BoxMesh, assemble
from tvesim.galerkin import CouplingVariant, GalerkinState, Problem, initial_state, integrate
from tvesim.lifting import LiftedFields
from tvesim.ode import IntegratorConfig
from tvesim.tensor import ElasticityTensor, IDENTITY, deviatoric

TOL = 1e-9


@pytest.fixture(scope="module")
def relaxation(bases4, law):
    """Symmetric homogeneous run: theta0 = v2, small traceless eps_p0."""
    problem = Problem(bases4, LiftedFields(bases4.assembly), law, CouplingVariant())
    a = bases4.assembly
    eps0 = np.tile(deviatoric(np.array([0.05, -0.02, 0.01, 0.03, -0.04, 0.02])), (a.n_qp, 1))
    state0 = initial_state(problem, bases4.temp.vectors[1], eps0)
    return integrate(problem, state0, IntegratorConfig(rtol=TOL, atol=TOL), 1.0, 11)


def test_zero_trajectory(problem4):
    traj = integrate(problem4, GalerkinState.zeros(problem4.sizes), IntegratorConfig(), 0.5, 5)
    rep = energy_report(traj)
    for col in (rep.E, rep.H, rep.residual):
        assert np.max(np.abs(col)) < 1e-30


def test_unit_strain_energy():
    a = assemble(BoxMesh.cube(2), ElasticityTensor.identity())
    bases = build_bases(a, 1, 6)
    problem = Problem(bases, LiftedFields(a), None, CouplingVariant())
    # the first six complement fields are constants; represent e = I by them
    Z = bases.comp.fields
    delta = -np.array([np.sum(a.weights * (Z[m] @ IDENTITY)) for m in range(6)])
    E = potential_energy(problem, np.zeros(1), np.zeros(1), delta)
    assert abs(E - 1.5) < 1e-12


def test_symmetric_run_balances(relaxation):
    rep = energy_report(relaxation)
    assert rep.max_residual <= 10 * TOL
    assert np.all(rep.dissipation >= 0)
    assert np.all(np.diff(rep.E) <= 1e-14)
    assert np.all(rep.E >= 0)


def test_bound_monitor_is_finite(relaxation):
    bm = bound_monitor(relaxation)
    assert bm.finite()
    assert bm.energy_stress == pytest.approx(bm.sup_E + bm.stress_Lp ** bm.p)
    assert bm.sup_E > 0 and bm.theta_W1q > 0


def test_probe_family():
    idx = probe_indices()
    assert len(idx) == 20 and idx[0] == (0, 0, 0)
    assert max(sum(m) for m in idx) <= 3
    mesh = BoxMesh.cube(2)
    x = mesh.nodes
    assert np.allclose(legendre_probe(mesh, (0, 0, 0), x), 1.0)
    assert np.allclose(legendre_probe(mesh, (1, 0, 0), x), 2 * x[:, 0] - 1)


def test_time_bump_vanishes_at_ends():
    val, der = time_bump(np.array([0.0, 0.5, 1.0]), 0.0, 1.0)
    assert val[0] == val[2] == 0.0 and val[1] == pytest.approx(1.0)
    h = 1e-6
    t = 0.3
    fd = (time_bump(np.array([t + h]), 0, 1)[0] - time_bump(np.array([t - h]), 0, 1)[0]) / (2 * h)
    assert fd[0] == pytest.approx(time_bump(np.array([t]), 0, 1)[1][0], rel=1e-6)


def test_weak_residuals_in_span_and_constant_probe(relaxation):
    p = relaxation.problem
    a = p.assembly
    in_span = [a.expand(w) for w in p.bases.disp.vectors]
    const = [np.ones(a.n_nodes)]
    wr = weak_residuals(relaxation, momentum_probes=in_span, heat_probes=const)
    assert wr.worst_momentum <= 1e-9
    assert wr.worst_heat <= 10 * TOL


def test_default_probes_report_finite_values(relaxation):
    wr = weak_residuals(relaxation)
    assert wr.momentum.shape == (20,) and wr.heat.shape == (20,)
    assert np.all(np.isfinite(wr.momentum)) and np.all(np.isfinite(wr.heat))


def test_broken_coupling_is_inactive_without_volume_change(bases4, law):
    a = bases4.assembly
    problem = Problem(bases4, LiftedFields(a), law, CouplingVariant())
    eps0 = np.tile(deviatoric(np.array([0.1, -0.05, 0.0, 0.02, 0.0, 0.0])), (a.n_qp, 1))
    cmp = compare_variants(problem, np.zeros(a.n_nodes), eps0, IntegratorConfig(rtol=TOL, atol=TOL), 0.5, 6)
    assert cmp.symmetric.max_residual <= 10 * TOL
    assert cmp.broken.max_residual <= 10 * TOL
    assert abs(cmp.drift_quadrature) <= 10 * TOL
