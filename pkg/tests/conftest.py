import copy
import json

import numpy as np
import pytest

from steelflex.config import DATA_DIR, PlantConfig, SolverSettings
from steelflex.scenario import ExogenousScenario


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run full-day pipeline tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "solver: needs the HiGHS MILP backend")
    config.addinivalue_line("markers", "slow: full-day pipeline runs, enabled with --runslow")


def _highs_available() -> bool:
    try:
        import pyomo.environ as pyo

        return bool(pyo.SolverFactory("appsi_highs").available(exception_flag=False))
    except Exception:
        return False


def pytest_collection_modifyitems(config, items):
    skip_solver = pytest.mark.skip(reason="appsi_highs not available")
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    highs = None
    for item in items:
        if "slow" in item.keywords and not config.getoption("--runslow"):
            item.add_marker(skip_slow)
            continue
        if "solver" in item.keywords:
            if highs is None:
                highs = _highs_available()
            if not highs:
                item.add_marker(skip_solver)


@pytest.fixture(scope="session")
def bundled_document():
    with open(DATA_DIR / "plant_config.json", "r", encoding="utf-8") as f:
        return json.load(f)


@pytest.fixture
def bundled_plant(bundled_document) -> PlantConfig:
    return PlantConfig.from_dict(copy.deepcopy(bundled_document))


@pytest.fixture
def bundled_scenario() -> ExogenousScenario:
    return ExogenousScenario.load(DATA_DIR / "synthetic_scenario.csv")


def toy_document(base: dict, periods: int = 12, storages=("BESS", "HT"), lookahead: int = None) -> dict:
    """Bundled plant cut down to a short horizon and a few storages, orders at baseline output."""
    doc = copy.deepcopy(base)
    doc["horizon"] = {"periods": periods, "dt_hours": 1.0, "lookahead": lookahead or periods}
    doc["storages"] = [s for s in doc["storages"] if s["storage_id"] in storages]
    doc["tracking"]["storages"] = [s for s in doc["tracking"]["storages"] if s in storages]
    doc["orders"] = {
        "SF": doc["shaft_furnace"]["qss_base"] * periods,
        "EAF": doc["eaf"]["steel_base"] * periods,
    }
    doc["penalty"].update(lambda_p=0.0, lambda_rf=0.0, lambda_s=0.0)
    doc["forecast"] = {"da_error_frac": 0.0, "id_error_frac": 0.0, "shared_day_ahead_draw": True}
    return doc


@pytest.fixture
def toy_plant(bundled_document) -> PlantConfig:
    return PlantConfig.from_dict(toy_document(bundled_document))


def toy_scenario_for(periods: int = 12, offset: int = 6) -> ExogenousScenario:
    """Slice of the bundled scenario covering the solar peak and the evening price peak."""
    full = ExogenousScenario.load(DATA_DIR / "synthetic_scenario.csv")
    window = full.window(offset, offset + periods)
    frame = window.frame.copy()
    frame["t"] = np.arange(periods)
    return ExogenousScenario(frame, name=f"toy{periods}")


@pytest.fixture
def toy_scenario() -> ExogenousScenario:
    return toy_scenario_for()


@pytest.fixture
def exact_settings() -> SolverSettings:
    return SolverSettings(mip_gap=1e-9, threads=1, seed=0)


@pytest.fixture
def make_toy(bundled_document):
    """Factory for toy plants; keyword arguments go to ``toy_document`` or patch top-level sections."""

    def factory(periods: int = 12, storages=("BESS", "HT"), lookahead: int = None, **sections) -> PlantConfig:
        doc = toy_document(bundled_document, periods, storages, lookahead)
        for key, value in sections.items():
            if isinstance(value, dict) and isinstance(doc.get(key), dict):
                doc[key].update(value)
            else:
                doc[key] = value
        return PlantConfig.from_dict(doc)

    return factory


@pytest.fixture
def make_scenario():
    return toy_scenario_for
