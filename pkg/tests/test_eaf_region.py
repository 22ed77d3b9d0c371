import time

import numpy as np
import pytest

from steelflex.config import DATA_DIR
from steelflex.eaf_region import (
    CarbonBalanceCoefficients,
    EafMaterialSpec,
    EafPolytope,
    calibration_report,
    carbon_flows,
    membership,
    min_max_power,
    sample_members,
    solve_single_material,
    vertices,
)
from steelflex.errors import EafRegionError, EmptyRegionError, InfeasibleBoundsError

A_EQ = [[3.24e-4, 3.11e-3, 2.35e-3, -1.0], [9.79e-4, 5.50e-3, 5.26e-3, 0.0]]


def generous(z_max=(1100.0, 200.0, 200.0, 1.0), target=1.0) -> EafPolytope:
    return EafPolytope(A_EQ, [0.0, target], [0.0] * 4, list(z_max))


def test_cdri_intensity_matches_calibration_point():
    started = time.perf_counter()
    z = solve_single_material(generous(), "CDRI", 1.0)
    assert z.p_eaf == pytest.approx(3.11e-3 / 5.50e-3, rel=1e-12)
    assert abs(z.p_eaf * 1000.0 - 566.0) <= 1.0

    report = calibration_report(generous())
    assert report["predicted_kwh_per_t"] == pytest.approx(565.4545, abs=1e-3)
    assert abs(report["relative_error"] * 100.0 - 4.1) <= 0.1
    assert time.perf_counter() - started < 1.0


def test_bundled_calibration_file_loads():
    polytope = EafPolytope.load(DATA_DIR / "eaf_calibration.json")
    assert polytope.intensity("CDRI") == pytest.approx(0.565454545, rel=1e-6)


def test_scrap_only_intensity():
    z = solve_single_material(generous(), "SCRAP", 1.0)
    assert z.p_eaf == pytest.approx(0.446768, abs=1e-6)
    assert z.x[0] == 0.0 and z.x[1] == 0.0


def test_single_material_on_box_boundary_is_member():
    x_cdri = 1.0 / 5.50e-3
    polytope = generous(z_max=(1100.0, x_cdri, 200.0, 1.0))
    z = solve_single_material(polytope, "CDRI", 1.0)
    assert z.x[1] == pytest.approx(x_cdri)
    assert membership(polytope, z).member


def test_single_material_outside_bounds_raises():
    with pytest.raises(InfeasibleBoundsError):
        solve_single_material(generous(z_max=(1100.0, 100.0, 200.0, 1.0)), "CDRI", 1.0)


def test_membership_detects_energy_violation():
    polytope = generous()
    z = solve_single_material(polytope, "CDRI", 1.0).as_vector()
    z[3] += 0.01
    result = membership(polytope, z)
    assert not result.member
    assert result.residuals[0] == pytest.approx(0.01, rel=1e-9)
    assert result.residuals[1] == pytest.approx(0.0, abs=1e-12)


def test_sampled_members_satisfy_balances_and_bounds():
    started = time.perf_counter()
    polytope = generous()
    samples = sample_members(polytope, 1000, seed=7)
    residuals = np.abs(samples @ polytope.a_eq.T - polytope.b_eq)
    assert residuals.max() <= 1e-6
    assert np.all(samples >= polytope.z_min - 1e-9)
    assert np.all(samples <= polytope.z_max + 1e-9)

    rng = np.random.default_rng(3)
    for _ in range(100):
        i, j = rng.integers(0, len(samples), 2)
        w = rng.uniform()
        assert membership(polytope, w * samples[i] + (1 - w) * samples[j]).member
    assert time.perf_counter() - started < 5.0


@pytest.mark.parametrize("factor", [0.5, 2.0])
def test_region_is_homogeneous_in_steel_target(factor):
    polytope = generous()
    scaled = polytope.scaled(factor)
    for z in sample_members(polytope, 50, seed=11):
        assert membership(scaled, factor * z).member
    base = min_max_power(polytope, 1.0)
    big = min_max_power(scaled, factor)
    assert big.p_min == pytest.approx(factor * base.p_min, abs=1e-9)
    assert big.p_max == pytest.approx(factor * base.p_max, abs=1e-9)


def test_min_max_power_degenerate_cdri_only():
    polytope = EafPolytope(A_EQ, [0.0, 1.0], [0.0] * 4, [0.0, 200.0, 0.0, 1.0])
    power = min_max_power(polytope, 1.0)
    assert power.p_min == pytest.approx(0.565454545, rel=1e-9)
    assert power.p_max == pytest.approx(power.p_min, rel=1e-12)


def test_min_max_power_extremes_at_scrap_and_cdri_vertices():
    polytope = generous(z_max=(0.0, 200.0, 200.0, 1.0))
    power = min_max_power(polytope, 1.0)
    assert power.p_min == pytest.approx(2.35e-3 / 5.26e-3, rel=1e-9)
    assert power.p_max == pytest.approx(3.11e-3 / 5.50e-3, rel=1e-9)
    assert power.witness_min.x[2] > 0 and power.witness_min.x[1] == pytest.approx(0.0, abs=1e-9)
    assert power.witness_max.x[1] > 0 and power.witness_max.x[2] == pytest.approx(0.0, abs=1e-9)

    brute = vertices(polytope, 1.0)
    assert len(brute) <= 8
    assert brute[:, 3].min() == pytest.approx(power.p_min)
    assert brute[:, 3].max() == pytest.approx(power.p_max)


def test_min_max_power_zero_target():
    power = min_max_power(generous(), 0.0)
    assert (power.p_min, power.p_max) == (0.0, 0.0)
    assert power.witness_min.as_vector().tolist() == [0.0] * 4


def test_min_max_power_empty_region():
    with pytest.raises(EmptyRegionError):
        min_max_power(generous(z_max=(10.0, 10.0, 10.0, 1.0)), 1.0)


def test_rejects_wrong_energy_row():
    a_eq = [row[:] for row in A_EQ]
    a_eq[0][3] = -2.0
    with pytest.raises(EafRegionError):
        EafPolytope(a_eq, [0.0, 1.0], [0.0] * 4, [1.0] * 4)


def test_carbon_flows():
    zero = carbon_flows(CarbonBalanceCoefficients(), 10.0, 5.0)
    assert (zero.carbon_powder, zero.lime, zero.co2) == (0.0, 0.0, 0.0)

    coeffs = CarbonBalanceCoefficients(
        psi_c_carbon=3.67, psi_c_lime=0.44, psi_c_scrap=0.005, psi_carbon_per_steel=0.01, psi_lime_per_steel=0.05
    )
    flows = carbon_flows(coeffs, 100.0, 20.0)
    assert flows.carbon_powder == pytest.approx(1.0)
    assert flows.lime == pytest.approx(5.0)
    assert flows.co2 == pytest.approx(5.97)

    doubled = carbon_flows(coeffs, 200.0, 40.0)
    assert doubled.co2 == pytest.approx(2 * flows.co2)


def test_material_spec_round_trip_mass():
    spec = EafMaterialSpec("HDRI", 1.617, 600.0)
    assert spec.heat_per_tonne == pytest.approx(970.2)
    assert spec.mass(spec.sensible_heat(12.5)) == pytest.approx(12.5)
