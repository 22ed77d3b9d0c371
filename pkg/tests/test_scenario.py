import numpy as np
import pandas as pd
import pytest

from steelflex.config import DATA_DIR
from steelflex.errors import ConfigurationError, InputFileError, LengthMismatchError
from steelflex.scenario import FEATURES, SCENARIO_COLUMNS, ExogenousScenario, load_history


def test_bundled_scenario_shape(bundled_scenario):
    assert len(bundled_scenario) == 24
    solar = bundled_scenario.column("solar_mw")
    price = bundled_scenario.column("price_buy")
    assert 10 <= int(np.argmax(solar)) <= 14
    assert 17 <= int(np.argmax(price)) <= 21
    assert np.all(bundled_scenario.column("h2_demand_t") >= 0.3)


def test_res_is_wind_plus_solar(bundled_scenario):
    np.testing.assert_allclose(
        bundled_scenario.res, bundled_scenario.column("wind_mw") + bundled_scenario.column("solar_mw")
    )


def test_window_and_features(bundled_scenario):
    window = bundled_scenario.window(4, 12)
    assert len(window) == 8
    assert window.column("t")[0] == 4
    features = bundled_scenario.features(5)
    assert set(features) == set(FEATURES)
    assert all(len(v) == 5 for v in features.values())
    with pytest.raises(LengthMismatchError):
        bundled_scenario.window(20, 30)


def test_from_arrays():
    scenario = ExogenousScenario.from_arrays(
        wind_mw=[1, 2], solar_mw=[0, 0], price_buy=[10, 20], price_sell=[5, 5], h2_demand_t=[1, 1], heat_demand_mwh=[0, 0]
    )
    assert scenario.column("t").tolist() == [0, 1]
    with pytest.raises(LengthMismatchError):
        ExogenousScenario.from_arrays(wind_mw=[1, 2], solar_mw=[0])


def _frame(**changes) -> pd.DataFrame:
    data = {c: [0.0, 1.0, 2.0] for c in SCENARIO_COLUMNS}
    data["t"] = [0, 1, 2]
    data.update(changes)
    return pd.DataFrame(data)


def test_rejects_missing_column():
    with pytest.raises(ConfigurationError):
        ExogenousScenario(_frame().drop(columns=["price_sell"]))


def test_rejects_non_increasing_t():
    with pytest.raises(ConfigurationError):
        ExogenousScenario(_frame(t=[0, 2, 1]))


def test_rejects_negative_power():
    with pytest.raises(ConfigurationError):
        ExogenousScenario(_frame(wind_mw=[0.0, -1.0, 0.0]))


def test_negative_prices_are_allowed():
    scenario = ExogenousScenario(_frame(price_buy=[-5.0, 1.0, 2.0]))
    assert scenario.column("price_buy")[0] == -5.0


def test_history_loads_sorted():
    scenarios = load_history(DATA_DIR / "history")
    assert [s.name for s in scenarios] == ["day_01", "day_02", "day_03", "day_04"]
    assert {len(s) for s in scenarios} == {24}


def test_history_errors(tmp_path):
    with pytest.raises(InputFileError):
        load_history(tmp_path / "absent")
    with pytest.raises(InputFileError):
        load_history(tmp_path)
    _frame().to_csv(tmp_path / "a.csv", index=False)
    _frame(**{c: [0.0, 1.0] for c in SCENARIO_COLUMNS}).to_csv(tmp_path / "b.csv", index=False)
    with pytest.raises(LengthMismatchError):
        load_history(tmp_path)
