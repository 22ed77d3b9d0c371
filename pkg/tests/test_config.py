import copy
import json

import pytest

from steelflex.config import DATA_DIR, Config, PlantConfig, SolverSettings
from steelflex.errors import ConfigurationError, InputFileError


def test_bundled_plant_is_valid_and_synthetic(bundled_plant):
    assert bundled_plant.synthetic
    assert bundled_plant.horizon.periods == 24
    assert set(bundled_plant.storage_ids) == {"BESS", "HT", "CDRIS", "ScS", "CST", "LTS"}
    assert bundled_plant.orders == {"SF": 2400.0, "EAF": 2640.0}


def test_orders_match_baseline_output(bundled_plant):
    periods = bundled_plant.horizon.periods
    assert bundled_plant.orders["SF"] == pytest.approx(periods * bundled_plant.core_baseline("SF"))
    assert bundled_plant.orders["EAF"] == pytest.approx(periods * bundled_plant.core_baseline("EAF"))


def test_core_capacity_and_step_output(bundled_plant):
    assert bundled_plant.core_capacity("AE") == 450.0
    assert bundled_plant.core_capacity("MSR") == 8.0
    assert bundled_plant.max_step_output("SF") == 150.0
    with pytest.raises(ConfigurationError):
        bundled_plant.max_step_output("MSR")


def test_embedded_region_is_consistent_with_calibration(bundled_plant):
    polytope = bundled_plant.eaf.polytope()
    assert polytope.intensity("CDRI") * 1000.0 == pytest.approx(565.45, abs=0.01)
    assert bundled_plant.eaf.material_spec("CDRI").heat_per_tonne == pytest.approx(172.7)


def test_unknown_field_is_rejected(bundled_document):
    doc = copy.deepcopy(bundled_document)
    doc["grid"]["voltage"] = 110
    with pytest.raises(ConfigurationError) as info:
        PlantConfig.from_dict(doc)
    assert any("grid.voltage" in e for e in info.value.details["errors"])


def test_order_on_non_order_unit_is_rejected(bundled_document):
    doc = copy.deepcopy(bundled_document)
    doc["orders"]["MSR"] = 10.0
    with pytest.raises(ConfigurationError):
        PlantConfig.from_dict(doc)


def test_duplicate_storage_is_rejected(bundled_document):
    doc = copy.deepcopy(bundled_document)
    doc["storages"].append(dict(doc["storages"][0]))
    with pytest.raises(ConfigurationError):
        PlantConfig.from_dict(doc)


def test_missing_file_and_bad_json(tmp_path):
    with pytest.raises(InputFileError):
        PlantConfig.load(tmp_path / "absent.json")
    broken = tmp_path / "plant_config.json"
    broken.write_text("{not json")
    with pytest.raises(ConfigurationError):
        PlantConfig.load(broken)


def test_save_and_reload(tmp_path, bundled_plant):
    path = tmp_path / "plant.json"
    bundled_plant.save(path)
    assert PlantConfig.load(path) == bundled_plant


def test_config_dir_falls_back_to_bundled_files(tmp_path):
    config = Config(str(tmp_path))
    assert config.path_for("scenario") == DATA_DIR / "synthetic_scenario.csv"
    with pytest.raises(ConfigurationError):
        config.path_for("weather")


def test_load_plant_writes_default(tmp_path):
    config = Config(str(tmp_path / "cfg"))
    plant = config.load_plant()
    assert (tmp_path / "cfg" / "plant_config.json").exists()
    assert plant.synthetic


def test_write_defaults_keeps_existing(tmp_path):
    config = Config(str(tmp_path))
    written = config.write_defaults()
    assert {p.name for p in written} == {"plant_config.json", "eaf_calibration.json", "scenario.csv", "history"}
    (tmp_path / "plant_config.json").write_text(json.dumps({"marker": True}))
    assert config.write_defaults() == []
    assert json.loads((tmp_path / "plant_config.json").read_text()) == {"marker": True}
    assert len(list((tmp_path / "history").glob("*.csv"))) == 4


def test_solver_settings_from_env(monkeypatch):
    monkeypatch.setenv("STEELFLEX_MIP_GAP", "1e-6")
    monkeypatch.setenv("STEELFLEX_THREADS", "2")
    settings = SolverSettings.from_env(seed=5)
    assert settings.mip_gap == 1e-6
    assert settings.threads == 2
    assert settings.seed == 5
    assert SolverSettings.from_env(seed=1, mip_gap=0.0).mip_gap == 0.0
