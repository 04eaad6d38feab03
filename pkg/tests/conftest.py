from dataclasses import replace

import pytest

from smheat import catalog
from smheat.sm import SmSpec
from smheat.solver import Scenario


def make_scenario(u0=("gaussian_bump", (1.0,)), f=("zero", ()), sigma=("constant", (1.0,)),
                  sm="wiener", sm_kw=None, **kw):
    sm_spec = SmSpec.create(sm, **(sm_kw or {}))
    base = dict(a=1.0, horizon=1.0, x_min=-4.0, x_max=4.0, n_t=6, n_x=41)
    base.update(kw)
    return Scenario(u0=catalog.make("u0", *u0), f=catalog.make("f", *f),
                    sigma=catalog.make("sigma", *sigma), sm=sm_spec, **base)


@pytest.fixture
def full_scenario():
    return make_scenario(f=("bounded_logistic", (1.0,)), sigma=("time_space_sine", (1.0, 2.0, 1.0)))


@pytest.fixture
def fbm_weight():
    return catalog.make("weight", "constant", (1.0,))


__all__ = ["make_scenario", "replace"]


# one line per acceptance criterion, echoed after the test session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
