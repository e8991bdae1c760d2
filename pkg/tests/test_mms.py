import numpy as np
import pytest

from tvesim.constitutive import Kappa, NortonHoff
from tvesim.mms import (
    CONSTANT, COUPLED, COUPLED_LADDER, HEAT_LADDER, HEAT_ONLY, Manufactured, Rung, mms_verify, observed_orders,
)
from tvesim.tensor import ElasticityTensor, contract, deviatoric


@pytest.fixture(scope="module")
def law():
    return NortonHoff(3.0, Kappa())


def test_constant_solution_needs_no_sources(law):
    src = CONSTANT.sources(ElasticityTensor.isotropic(1.0, 1.0), law)
    x = np.random.default_rng(0).random((10, 3))
    assert src.plastic is None
    assert np.max(np.abs(src.heat(x, 0.3))) == 0.0


def test_heat_source_matches_finite_differences(law):
    D = ElasticityTensor.isotropic(1.0, 1.0)
    src = HEAT_ONLY.sources(D, law)
    x = np.random.default_rng(1).random((8, 3))
    t, h = 0.4, 1e-4
    th = HEAT_ONLY.theta
    dt = (th(x, t + h) - th(x, t - h)) / (2 * h)
    e1 = np.array([h, 0.0, 0.0])
    lap = (th(x + e1, t) - 2 * th(x, t) + th(x - e1, t)) / h ** 2
    assert np.max(np.abs(src.heat(x, t) - (dt - lap))) < 1e-5


def test_coupled_sources_close_the_flow_rule(law):
    D = ElasticityTensor.isotropic(1.0, 1.0)
    src = COUPLED.sources(D, law)
    x = np.random.default_rng(2).random((5, 3))
    t = 0.3
    S = np.broadcast_to(deviatoric(-(COUPLED.eps_p(t) @ D.voigt.T)), (5, 6))
    G = law(COUPLED.theta(x, t), S)
    assert np.allclose(G + src.plastic(x, t), COUPLED.eps_p_rate(t))
    # the heat source removes the dissipation of the manufactured state
    plain = Manufactured(COUPLED.c0, COUPLED.amplitude).sources(D, law).heat(x, t)
    assert np.allclose(plain - src.heat(x, t), contract(S, G))


def test_constant_solution_is_reproduced(law):
    row = mms_verify(CONSTANT, (Rung((2, 2, 2), 1, 6, 1e-12),), law)[0]
    assert max(row.err_theta, row.err_u, row.err_eps_p) <= 1e-10


def test_heat_ladder_is_second_order(law):
    rows = mms_verify(HEAT_ONLY, HEAT_LADDER, law)
    orders = observed_orders(rows)
    assert np.all(orders >= 1.8)
    ratios = [a.err_theta / b.err_theta for a, b in zip(rows, rows[1:])]
    assert min(ratios) >= 3.5


def test_coupled_ladder_decreases(law):
    rows = mms_verify(COUPLED, COUPLED_LADDER, law)
    for key in ("err_theta", "err_u", "err_eps_p"):
        errs = [getattr(r, key) for r in rows]
        assert all(b < a for a, b in zip(errs, errs[1:])), key
