import numpy as np
import pytest

from steelflex.auditor import audit_schedule, replay
from steelflex.errors import AuditError, SolverError
from steelflex.penalty import CORE_UNITS, epigraph_value, tangent_cuts
from steelflex.scheduler import Mode, ProblemSpec, build_bd, build_dd
from steelflex.solver import SolveStatus, economic_terms, solve

pytestmark = pytest.mark.solver


def cut_penalty(plant, config, trajectory, baseline):
    """Epigraph penalty the M3 encoding minimizes, evaluated on decoded trajectories."""
    total = 0.0
    for unit in CORE_UNITS:
        params = config.unit(unit)
        delta = (trajectory[unit] - baseline[unit]) / plant.core_capacity(unit)
        for sign in (1, -1):
            alpha, beta, eps = params.side(sign)
            cuts = tangent_cuts(beta, eps, config.tangent_cut_count, config.cut_grading)
            total += params.omega * alpha * sum(epigraph_value(sign * float(d), cuts) for d in delta)
    return total


def test_bd_on_bundled_plant(bundled_plant, bundled_scenario):
    solution = solve(build_bd(ProblemSpec(Mode.BD, bundled_plant, bundled_scenario)))
    frame = solution.frame
    assert solution.status == SolveStatus.OPTIMAL
    assert len(frame) == 24
    np.testing.assert_allclose(frame["p_ae"], 330.0, atol=1e-6)
    np.testing.assert_allclose(frame["eaf_steel"], 110.0, atol=1e-6)
    assert frame["dri_p"].sum() == pytest.approx(2400.0, rel=1e-9)
    assert frame["eaf_steel"].sum() == pytest.approx(2640.0, rel=1e-9)
    assert frame["CDRIS_level"].iloc[-1] == pytest.approx(300.0, abs=1e-6)
    assert frame["p_sell"].sum() <= 0.2 * bundled_scenario.res.sum() + 1e-6
    assert solution.mip_gap <= 1e-4
    assert replay(frame, ProblemSpec(Mode.BD, bundled_plant, bundled_scenario)).passed


def test_objective_decomposition(toy_plant, toy_scenario, exact_settings):
    solution = solve(build_bd(ProblemSpec(Mode.BD, toy_plant, toy_scenario)), exact_settings)
    terms = economic_terms(solution.frame, toy_plant, solution.peak)
    assert solution.economic_cost == pytest.approx(
        terms["c_grid"] + terms["c_op"] - terms["r_sell"] + terms["peak_cost"]
    )
    assert solution.objective == pytest.approx(solution.economic_cost)
    assert solution.peak == pytest.approx(solution.frame["p_buy"].max(), abs=1e-6)


def test_zero_prices_give_zero_objective(make_toy, toy_scenario):
    zero_prices = {k: 0.0 for k in ("rho_peak", "rho_curt", "rho_thl", "rho_hl", "rho_h2_bf", "rho_vent")}
    plant = make_toy(prices=zero_prices, costs={"energy": {}, "material": {}})
    scenario = toy_scenario.with_values({"price_buy": np.zeros(12), "price_sell": np.zeros(12)})
    solution = solve(build_bd(ProblemSpec(Mode.BD, plant, scenario)))
    assert solution.objective == pytest.approx(0.0, abs=1e-9)


def test_locked_baseline_with_inconsistent_order_is_infeasible(make_toy, toy_scenario):
    plant = make_toy(orders={"SF": 100.0 * 12 - 10.0})
    with pytest.raises(SolverError) as info:
        solve(build_bd(ProblemSpec(Mode.BD, plant, toy_scenario)))
    assert info.value.status == "infeasible"


def test_lp_relaxation_solves_without_gap(toy_plant, toy_scenario, exact_settings):
    spec = ProblemSpec(Mode.BD, toy_plant, toy_scenario, exclusivity=False)
    first = solve(build_bd(spec), exact_settings)
    second = solve(build_bd(ProblemSpec(Mode.BD, toy_plant, toy_scenario, exclusivity=False)), exact_settings)
    assert first.mip_gap == 0.0
    assert first.objective == pytest.approx(second.objective, rel=1e-12)
    milp_solution = solve(build_bd(ProblemSpec(Mode.BD, toy_plant, toy_scenario)), exact_settings)
    assert first.objective <= milp_solution.objective + 1e-6 * max(1.0, abs(milp_solution.objective))


def test_dd_without_penalty_equals_unlocked_bd(toy_plant, toy_scenario, exact_settings):
    bd = solve(build_bd(ProblemSpec(Mode.BD, toy_plant, toy_scenario)), exact_settings)
    free = solve(build_bd(ProblemSpec(Mode.BD, toy_plant, toy_scenario, lock_core=False)), exact_settings)
    dd = solve(build_dd(ProblemSpec(Mode.DD, toy_plant, toy_scenario, reference=bd.core())), exact_settings)
    assert dd.objective == pytest.approx(free.objective, rel=1e-6)
    assert dd.objective <= bd.objective + 1e-6 * abs(bd.objective)


def test_dd_at_baseline_has_zero_deviation_penalty(make_toy, toy_scenario, exact_settings):
    plant = make_toy(penalty={"lambda_p": 200.0})
    bd = solve(build_bd(ProblemSpec(Mode.BD, plant, toy_scenario)), exact_settings)
    locked = ProblemSpec(Mode.DD, plant, toy_scenario, reference=bd.core(), lock_core=True)
    dd = solve(build_dd(locked), exact_settings)
    assert dd.breakdown["d_p"] == pytest.approx(0.0, abs=1e-9)


def test_deviation_penalty_shrinks_with_weight(make_toy, make_scenario, exact_settings):
    plant = make_toy(periods=4)
    scenario = make_scenario(4, offset=16)
    bd = solve(build_bd(ProblemSpec(Mode.BD, plant, scenario)), exact_settings)
    penalties = []
    for lambda_p in (0.0, 50.0, 200.0, 2000.0):
        config = plant.penalty.model_copy(update={"lambda_p": lambda_p})
        dd = solve(
            build_dd(ProblemSpec(Mode.DD, plant, scenario, reference=bd.core(), penalty=config)), exact_settings
        )
        penalties.append(cut_penalty(plant, config, dd.core(), bd.core()))
    for a, b in zip(penalties, penalties[1:]):
        assert b <= a + 1e-6 * max(1.0, a)


def test_auditor_catches_tampered_schedule(toy_plant, toy_scenario):
    spec = ProblemSpec(Mode.BD, toy_plant, toy_scenario)
    solution = solve(build_bd(spec))
    frame = solution.frame.copy()
    frame.loc[3, "p_buy"] += 5.0
    report = replay(frame, spec)
    assert "power_balance" in report.violations
    with pytest.raises(AuditError):
        audit_schedule(frame, spec)

    frame = solution.frame.copy()
    frame.loc[2, "BESS_level"] += 1.0
    assert "BESS_dynamics" in replay(frame, spec).violations


def test_auditor_checks_bounds_and_caps(toy_plant, toy_scenario):
    spec = ProblemSpec(Mode.BD, toy_plant, toy_scenario)
    solution = solve(build_bd(spec))
    assert replay(solution.frame, spec, peak=solution.peak).passed

    region = toy_plant.eaf.polytope()
    steel = solution.frame.loc[0, "eaf_steel"]
    quota = toy_plant.grid.psi_sell * toy_scenario.res.sum()
    corruptions = {
        "eaf_box": ("x_scrap", region.z_max[2] * steel / region.steel_target + 50.0),
        "eaf_steel_bounds": ("eaf_steel", toy_plant.eaf.steel_max + 5.0),
        "sell_cap": ("p_sell", quota + 10.0),
        "sf_bounds": ("sf_qss", toy_plant.shaft_furnace.qss_bounds[1] + 5.0),
        "msr_bounds": ("msr_qss", toy_plant.methanol.qss_bounds[1] + 1.0),
        "ae_bounds": ("p_ae", toy_plant.electrolyzer.p_max + 10.0),
        "heater_bounds": ("p_leh", toy_plant.heaters.leh_max + 5.0),
        "peak": ("p_buy", solution.peak + 5.0),
    }
    for family, (column, value) in corruptions.items():
        frame = solution.frame.copy()
        frame.loc[0, column] = value
        assert family in replay(frame, spec, peak=solution.peak).violations, family
        with pytest.raises(AuditError) as info:
            audit_schedule(frame, spec, peak=solution.peak)
        assert family in info.value.details["residuals"], family


def test_end_state_carries_levels(toy_plant, toy_scenario):
    solution = solve(build_bd(ProblemSpec(Mode.BD, toy_plant, toy_scenario)))
    state = solution.end_state(0)
    assert state.sf_qss == pytest.approx(100.0)
    assert state.levels["BESS"] == pytest.approx(solution.frame["BESS_level"].iloc[0])
    assert state.pending_hot == pytest.approx(solution.frame["hot_out"].iloc[0])


def test_unknown_backend_raises(toy_plant, toy_scenario):
    from steelflex.config import SolverSettings

    with pytest.raises(SolverError) as info:
        solve(build_bd(ProblemSpec(Mode.BD, toy_plant, toy_scenario)), SolverSettings(name="no_such_solver"))
    assert info.value.status == "unavailable"
