import numpy as np
import pyomo.environ as pyo
import pytest

from steelflex.errors import ConfigurationError, InfeasibleOrderError
from steelflex.scheduler import (
    Mode,
    Offer,
    PlantState,
    ProblemSpec,
    RealizedContext,
    build,
    build_bd,
    build_bi,
    build_offers,
    core_trajectory,
    remaining_sell_quota,
)


def reference(plant, periods):
    return {u: np.full(periods, plant.core_baseline(u)) for u in ("AE", "SF", "EAF", "MSR")}


def test_offers_from_net_loads():
    offer = build_offers(np.array([100.0, 50.0, 80.0]), np.array([60.0, 70.0, 80.0]))
    np.testing.assert_allclose(offer.p_mag, [40.0, 20.0, 0.0])
    np.testing.assert_allclose(offer.direction, [1.0, -1.0, 0.0])
    np.testing.assert_allclose(offer.p_offer, [40.0, -20.0, 0.0])
    assert offer.offered.tolist() == [True, True, False]


def test_offer_below_sign_tolerance_is_dropped():
    offer = build_offers(np.array([10.0]), np.array([10.0 + 1e-9]))
    assert offer.p_mag[0] == 0.0 and offer.direction[0] == 0.0


def test_offer_lengths_must_match():
    with pytest.raises(ConfigurationError):
        build_offers(np.zeros(3), np.zeros(2))


def test_initial_state_from_plant(toy_plant):
    state = PlantState.initial(toy_plant)
    assert state.sf_qss == toy_plant.shaft_furnace.qss_base
    assert state.pending_hot == toy_plant.shaft_furnace.initial_pending_hot
    assert state.levels == {"BESS": 100.0, "HT": 30.0}


def test_full_horizon_modes_reject_windows(toy_plant, toy_scenario):
    with pytest.raises(ConfigurationError):
        ProblemSpec(Mode.BD, toy_plant, toy_scenario.window(0, 4))


def test_dd_needs_reference(toy_plant, toy_scenario):
    with pytest.raises(ConfigurationError):
        ProblemSpec(Mode.DD, toy_plant, toy_scenario)


def test_di_needs_offer_and_benchmark(toy_plant, toy_scenario):
    window = toy_scenario.window(0, 4)
    with pytest.raises(ConfigurationError):
        ProblemSpec(Mode.DI, toy_plant, window, reference=reference(toy_plant, 4))
    spec = ProblemSpec(
        Mode.DI,
        toy_plant,
        window,
        reference=reference(toy_plant, 4),
        reference_netload=np.zeros(4),
        offer=Offer.zeros(4),
    )
    assert not spec.lock_core
    assert not spec.ends_at_horizon


def test_offers_rejected_outside_di(toy_plant, toy_scenario):
    with pytest.raises(ConfigurationError):
        ProblemSpec(Mode.BD, toy_plant, toy_scenario, offer=Offer.zeros(12))


def test_window_beyond_horizon_rejected(toy_plant, toy_scenario):
    with pytest.raises(ConfigurationError):
        ProblemSpec(Mode.BI, toy_plant, toy_scenario.window(0, 8), start=6)


def test_order_above_capacity_is_infeasible(make_toy, toy_scenario):
    plant = make_toy(orders={"SF": 150.0 * 12 + 1.0})
    with pytest.raises(InfeasibleOrderError):
        build_bd(ProblemSpec(Mode.BD, plant, toy_scenario))


def test_order_below_minimum_output_is_infeasible(make_toy, toy_scenario):
    plant = make_toy(orders={"EAF": 10.0})
    with pytest.raises(InfeasibleOrderError):
        build_bd(ProblemSpec(Mode.BD, plant, toy_scenario))


def test_sell_quota_is_floored_at_zero(toy_plant, toy_scenario):
    window = toy_scenario.window(4, 8)
    spec = ProblemSpec(
        Mode.BI, toy_plant, window, start=4, realized=RealizedContext(peak=0.0, sell_cum=1e6, res_cum=100.0)
    )
    assert remaining_sell_quota(spec) == 0.0
    fresh = ProblemSpec(Mode.BI, toy_plant, window, start=4, realized=RealizedContext(res_cum=100.0))
    expected = toy_plant.grid.psi_sell * (100.0 + float(window.res.sum()))
    assert remaining_sell_quota(fresh) == pytest.approx(expected)


def test_bd_model_locks_core_units(toy_plant, toy_scenario):
    milp = build_bd(ProblemSpec(Mode.BD, toy_plant, toy_scenario))
    m = milp.model
    assert hasattr(m, "core_lock") and hasattr(m, "order_def") and hasattr(m, "sell_cap")
    assert milp.has_binaries
    assert len(m.T) == 12


def test_bi_model_tracks_reference_only_when_weighted(make_toy, toy_scenario):
    window = toy_scenario.window(0, 4)
    soc = {"BESS": np.full(4, 0.5), "HT": np.full(4, 0.5)}
    plain = build_bi(ProblemSpec(Mode.BI, make_toy(), window), soc_reference=soc)
    assert not hasattr(plain.model, "soc_split")
    assert plain.terms["d_rf"] == 0.0

    weighted = build_bi(ProblemSpec(Mode.BI, make_toy(penalty={"lambda_rf": 10.0}), window), soc_reference=soc)
    assert hasattr(weighted.model, "soc_split")
    assert list(weighted.model.tracked) == ["BESS", "HT"]
    assert hasattr(weighted.model, "sell_quota")


def test_di_model_pieces(make_toy, toy_scenario):
    plant = make_toy(penalty={"lambda_p": 50.0, "lambda_s": 100.0})
    window = toy_scenario.window(0, 4)
    spec = ProblemSpec(
        Mode.DI,
        plant,
        window,
        reference=reference(plant, 4),
        reference_netload=np.full(4, 200.0),
        offer=Offer(np.array([10.0, 0.0, 5.0, 0.0]), np.array([1.0, 0.0, -1.0, 0.0])),
        pacing={"SF": (300.0, 400.0), "EAF": (400.0, 440.0)},
    )
    milp = build(spec)
    m = milp.model
    assert not hasattr(m, "core_lock")
    assert hasattr(m, "shortfall_def") and hasattr(m, "pacing")
    assert not hasattr(m, "silo_terminal")
    assert any(c.local_name.startswith("pen_AE_cuts") for c in m.component_objects(pyo.Constraint))
    assert milp.weights["d_s"] == 100.0


def test_no_exclusivity_means_no_binaries(toy_plant, toy_scenario):
    milp = build_bd(ProblemSpec(Mode.BD, toy_plant, toy_scenario, exclusivity=False))
    assert not milp.has_binaries


def test_core_trajectory_columns():
    values = {"p_ae": [1.0], "sf_qss": [2.0], "eaf_steel": [3.0], "msr_qss": [4.0], "other": [5.0]}
    core = core_trajectory(values)
    assert {u: v.tolist() for u, v in core.items()} == {"AE": [1.0], "SF": [2.0], "EAF": [3.0], "MSR": [4.0]}


def test_lp_dump(tmp_path, toy_plant, toy_scenario):
    milp = build_bd(ProblemSpec(Mode.BD, toy_plant, toy_scenario))
    path = tmp_path / "bd.lp"
    milp.write_lp(str(path))
    assert "power_balance" in path.read_text()
