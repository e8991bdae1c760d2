import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tvesim.scenario import BUNDLED, Scenario, ScenarioError, bundled
from tvesim.tensor import norm

finite = st.floats(min_value=0.01, max_value=100.0, allow_nan=False, allow_infinity=False)


@st.composite
def scenarios(draw):
    sc = Scenario(name=draw(st.text("abcxyz_", min_size=1, max_size=8)), seed=draw(st.integers(0, 2 ** 31)),
                  variant=draw(st.sampled_from(["symmetric", "broken", "nonlinear"])))
    sc.material.p = draw(st.floats(2.0, 6.0))
    sc.material.lame_mu = draw(finite)
    sc.material.alpha = draw(finite)
    sc.material.kappa_amp = draw(st.floats(0.0, 5.0))
    sc.galerkin.k = draw(st.integers(1, 40))
    sc.galerkin.l = draw(st.integers(1, 40))
    sc.galerkin.k_trunc = draw(finite)
    tol = draw(st.floats(1e-12, 1e-3))
    sc.integrator.rtol = sc.integrator.atol = tol
    sc.mesh.cells = [draw(st.integers(2, 8)) for _ in range(3)]
    sc.mesh.extents = [draw(finite) for _ in range(3)]
    sc.data.g = [{"constant": [draw(finite), 0.0, 0.0],
                  "gradient": [[0.0] * 3] * 3,
                  "time": {"kind": draw(st.sampled_from(["const", "sin", "linear"])), "omega": 1.5,
                           "amplitude": draw(finite)}}]
    sc.validate()
    return sc


@settings(max_examples=40, deadline=None)
@given(scenarios())
def test_round_trip_is_stable(sc):
    text = sc.dumps()
    back = Scenario.loads(text)
    assert back == sc
    assert back.dumps() == text


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_scenarios_load(name):
    sc = bundled(name)
    assert sc.name == name
    assert Scenario.loads(sc.dumps()) == sc


def test_homogeneous_flag():
    assert bundled("homogeneous").homogeneous
    assert not bundled("loaded").homogeneous


def test_unknown_bundled_name():
    with pytest.raises(ScenarioError):
        bundled("nope")


@pytest.mark.parametrize("text", [
    "material: {p: 1.5}",
    "variant: other",
    "mesh: {cells: [1, 4, 4]}",
    "galerkin: {k: 0}",
    "galerkin: {k_trunc: -1}",
    "integrator: {rtol: 0}",
    "integrator: {method: euler}",
    "time: {t_end: 0}",
    "initial: {theta_kind: random}",
    "unknown_key: 1",
    "material: 3",
    "material: {p: abc}",
    "[1, 2",
    "- just a list",
])
def test_validation_errors(text):
    with pytest.raises(ScenarioError):
        Scenario.loads(text)


def test_overrides_validate():
    sc = bundled("homogeneous")
    assert sc.with_overrides(k=4, l=5, tol=1e-6).galerkin.l == 5
    with pytest.raises(ScenarioError):
        sc.with_overrides(variant="bogus")


def test_initial_fields_are_seeded(bases4):
    sc = bundled("homogeneous")
    th1, e1 = sc.initial_fields(bases4)
    th2, e2 = sc.initial_fields(bases4)
    assert np.array_equal(e1, e2) and np.array_equal(th1, th2)
    _, e3 = sc.with_overrides(seed=5).initial_fields(bases4)
    assert not np.array_equal(e1, e3)
    assert np.allclose(norm(e1), sc.initial.eps_radius)
    assert np.allclose(e1[:, :3].sum(axis=1), 0.0)


def test_eigenmode_index_out_of_range(bases4):
    sc = bundled("homogeneous")
    sc.initial.theta_index = 99
    with pytest.raises(ScenarioError):
        sc.initial_fields(bases4)


def test_save_and_load(tmp_path):
    sc = bundled("loaded")
    sc.save(tmp_path / "s.yaml")
    assert Scenario.load(tmp_path / "s.yaml") == sc
