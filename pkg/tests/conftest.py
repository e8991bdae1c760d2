import numpy as np
import pytest

from tvesim.basis import build_bases
from tvesim.constitutive import Kappa, NortonHoff
from tvesim.fem import BoxMesh, assemble
from tvesim.galerkin import CouplingVariant, Problem
from tvesim.lifting import LiftedFields
from tvesim.tensor import ElasticityTensor


@pytest.fixture(scope="session")
def D():
    return ElasticityTensor.isotropic(1.0, 1.0)


@pytest.fixture(scope="session")
def asm2(D):
    return assemble(BoxMesh.cube(2), D)


@pytest.fixture(scope="session")
def asm4(D):
    return assemble(BoxMesh.cube(4), D)


@pytest.fixture(scope="session")
def bases4(asm4):
    return build_bases(asm4, 8, 8)


@pytest.fixture(scope="session")
def law():
    return NortonHoff(3.0, Kappa())


@pytest.fixture
def problem4(bases4, law):
    return Problem(bases4, LiftedFields(bases4.assembly), law, CouplingVariant("symmetric"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_acceptance_lines = []


@pytest.fixture
def criterion(request, record_property):
    """Record ``(number, ok, detail)`` for the acceptance summary, print it, then assert."""

    def check(number: int, ok: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        record_property("acceptance", line)
        assert ok, line

    return check


def pytest_runtest_logreport(report):
    if report.when == "call":
        _acceptance_lines.extend(v for k, v in report.user_properties if k == "acceptance")


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_lines):
            terminalreporter.write_line(line)
