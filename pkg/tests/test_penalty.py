import math

import numpy as np
import pyomo.environ as pyo
import pytest

from steelflex.errors import ConfigurationError
from steelflex.penalty import (
    PenaltyConfig,
    PenaltyMechanism,
    UnitPenalty,
    config_epigraph_gap,
    cut_points,
    encode_penalty,
    epigraph_gap,
    epigraph_value,
    exact_penalty,
    exact_phi,
    tangent_cuts,
)


def test_m3_deadband_is_exactly_zero():
    unit = UnitPenalty()
    for delta in np.linspace(-0.05, 0.05, 11):
        assert exact_penalty(PenaltyMechanism.M3, unit, float(delta)) == 0.0
    cuts = tangent_cuts(2.0, 0.05, 16, 1.15)
    assert epigraph_value(0.03, cuts) == 0.0


def test_m3_exact_value():
    assert exact_phi(0.55, 2.0, 0.05) == pytest.approx(math.e - 1.0, rel=1e-12)
    assert exact_penalty(PenaltyMechanism.M3, UnitPenalty(), 0.55) == pytest.approx(1.71828, abs=1e-5)


def test_m1_is_absolute_value():
    assert exact_penalty(PenaltyMechanism.M1, UnitPenalty(), -0.3) == pytest.approx(0.3)


def test_m2_hinge_is_asymmetric():
    unit = UnitPenalty(alpha_up=1.0, alpha_down=3.0, eps_up=0.1, eps_down=0.2)
    assert exact_penalty(PenaltyMechanism.M2, unit, 0.3) == pytest.approx(0.2)
    assert exact_penalty(PenaltyMechanism.M2, unit, -0.3) == pytest.approx(0.3)


def test_sixteen_cuts_stay_within_one_percent():
    gap = epigraph_gap(2.0, 0.05, 16, 1.15, grid_points=101)
    assert gap["max_rel_gap"] <= 0.01
    assert gap["max_abs_gap"] >= 0.0


def test_cuts_under_approximate_and_touch():
    beta, eps = 2.0, 0.05
    cuts = tangent_cuts(beta, eps, 16, 1.15)
    for c in cut_points(eps, 16, 1.15):
        assert epigraph_value(float(c), cuts) == pytest.approx(exact_phi(float(c), beta, eps), rel=1e-12)
    for x in np.linspace(0.0, 1.0, 57):
        assert epigraph_value(float(x), cuts) <= exact_phi(float(x), beta, eps) + 1e-12


def test_cut_points_span_deadband_to_one():
    points = cut_points(0.05, 16, 1.15)
    assert points[0] == pytest.approx(0.05)
    assert points[-1] == pytest.approx(1.0)
    assert np.all(np.diff(points) > 0)


def test_too_few_cuts_rejected():
    with pytest.raises(ConfigurationError):
        PenaltyConfig(tangent_cut_count=1).check()


def test_config_gap_zero_for_linear_mechanisms():
    assert config_epigraph_gap(PenaltyConfig(mechanism="m2")) == {"max_abs_gap": 0.0, "max_rel_gap": 0.0}


def test_unknown_unit_rejected():
    with pytest.raises(ValueError):
        PenaltyConfig(units={"BOF": UnitPenalty()})


@pytest.mark.parametrize("mechanism", ["m1", "m2", "m3"])
def test_encoding_adds_components(mechanism):
    m = pyo.ConcreteModel()
    m.T = pyo.RangeSet(0, 2)
    m.x = pyo.Var(m.T, bounds=(-1, 1))
    expr = encode_penalty(m, PenaltyConfig(mechanism=mechanism), "AE", list(m.T), lambda t: m.x[t])
    assert expr is not None
    names = [c.local_name for c in m.component_objects(pyo.Constraint)]
    assert any(name.startswith("pen_AE") for name in names)


@pytest.mark.solver
def test_m3_encoding_reaches_cut_envelope():
    m = pyo.ConcreteModel()
    m.T = pyo.RangeSet(0, 0)
    m.x = pyo.Var(m.T, bounds=(0.55, 0.55))
    config = PenaltyConfig(mechanism="m3")
    m.obj = pyo.Objective(expr=encode_penalty(m, config, "SF", list(m.T), lambda t: m.x[t]))
    pyo.SolverFactory("appsi_highs").solve(m)
    expected = epigraph_value(0.55, tangent_cuts(2.0, 0.05, 16, 1.15))
    assert pyo.value(m.obj) == pytest.approx(expected, rel=1e-6)
    assert pyo.value(m.obj) == pytest.approx(math.e - 1.0, rel=0.01)
