"""Configuration management module.

The plant is described by a single JSON document validated into a
``PlantConfig`` model. ``Config`` resolves the documents of a configuration
directory, falling back to the bundled synthetic plant, and writes the bundled
files as defaults when asked to initialise a directory.
"""
import json
import logging
import os
import shutil
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from steelflex.eaf_region import (
    MATERIALS,
    CarbonBalanceCoefficients,
    EafMaterialSpec,
    EafPolytope,
)
from steelflex.errors import ConfigurationError, InputFileError
from steelflex.penalty import CORE_UNITS, PenaltyConfig
from steelflex.process_units import (
    HehCoefficients,
    LagUnitId,
    LagUnitParams,
    MsrStoichiometry,
    StorageId,
    StorageParams,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
ORDER_UNITS = ("SF", "EAF")
DATA_DIR = Path(__file__).parent / "data"


class HorizonConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    periods: int = Field(24, ge=1, description="T, number of scheduling periods")
    dt_hours: float = Field(1.0, gt=0, description="Period length, hours")
    lookahead: int = Field(8, ge=1, description="L, rolling window length in periods")


class ElectrolyzerConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    psi_ae: float = Field(..., gt=0, description="Hydrogen produced per MWh, t/MWh")
    p_min: float = Field(..., ge=0, description="Minimum power, MW")
    p_max: float = Field(..., gt=0, description="Maximum power, MW")
    p_base: float = Field(..., ge=0, description="Baseline operating power, MW")

    @model_validator(mode="after")
    def _check_range(self):
        if not self.p_min <= self.p_base <= self.p_max:
            raise ValueError("electrolyzer p_base must lie in [p_min, p_max]")
        return self


class LagUnitConfig(LagUnitParams):
    qss_base: float = Field(..., ge=0, description="Baseline quasi-steady output, t/h")
    qss_initial: Optional[float] = Field(None, ge=0, description="Quasi-steady output before the horizon, t/h")

    @model_validator(mode="after")
    def _check_base(self):
        lo, hi = self.qss_bounds
        if not lo - 1e-9 <= self.qss_base <= hi + 1e-9:
            raise ValueError(f"{self.unit_id.value} qss_base must lie in [{lo}, {hi}]")
        return self

    @property
    def initial(self) -> float:
        return self.qss_base if self.qss_initial is None else self.qss_initial


class ShaftFurnaceConfig(LagUnitConfig):
    unit_id: LagUnitId = LagUnitId.SF
    psi_h_dri: float = Field(..., ge=0, description="Hydrogen per tonne DRI, t/t")
    initial_pending_hot: float = Field(0.0, ge=0, description="Hot DRI discharged in the period before the horizon, t/h")


class MethanolConfig(LagUnitConfig):
    unit_id: LagUnitId = LagUnitId.MSR
    stoichiometry: MsrStoichiometry


class EafRegionDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    a_eq: List[List[float]]
    b_eq: List[float]
    z_min: List[float]
    z_max: List[float]


class EafMaterialConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    specific_heat: float = Field(..., gt=0, description="c_p, heat-equivalent units per tonne per kelvin")
    delta_temperature: float = Field(..., ge=0, description="Charging minus reference temperature, K")


class EafConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    region: EafRegionDocument = Field(..., description="Per-heat H-representation; b_eq[1] is the reference heat mass")
    materials: Dict[str, EafMaterialConfig]
    steel_min: float = Field(..., ge=0, description="Minimum steel output, t/h")
    steel_max: float = Field(..., gt=0, description="Maximum steel output, t/h")
    steel_base: float = Field(..., ge=0, description="Baseline steel output, t/h")
    carbon: CarbonBalanceCoefficients = Field(default_factory=CarbonBalanceCoefficients)

    @field_validator("carbon", mode="before")
    @classmethod
    def _carbon(cls, value):
        if isinstance(value, dict):
            return CarbonBalanceCoefficients(**value)
        return value

    @model_validator(mode="after")
    def _check(self):
        missing = set(MATERIALS) - set(self.materials)
        if missing:
            raise ValueError(f"EAF materials missing: {sorted(missing)}")
        if not self.steel_min <= self.steel_base <= self.steel_max:
            raise ValueError("EAF steel_base must lie in [steel_min, steel_max]")
        return self

    def polytope(self) -> EafPolytope:
        return EafPolytope.from_dict(self.region.model_dump())

    def material_spec(self, material: str) -> EafMaterialSpec:
        m = self.materials[material]
        return EafMaterialSpec(material, m.specific_heat, m.delta_temperature)


class HeaterConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    heh: HehCoefficients
    leh_efficiency: float = Field(0.98, gt=0, le=1, description="Low-temperature heater efficiency")
    leh_max: float = Field(..., ge=0, description="Low-temperature heater power limit, MW")


class AuxiliaryConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    psi_er_comp: float = Field(..., ge=0, description="Compressor MW per MW of electrolysis")
    psi_ec_comp: float = Field(..., ge=0, description="Compressor MW per t/h of DRI (recovered hydrogen)")
    psi_e_exp: float = Field(..., ge=0, description="Expander MWh per tonne hydrogen expanded")
    psi_ccs: float = Field(..., ge=0, description="Carbon capture MWh per tonne CO2")


class GridConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    capacity: float = Field(..., gt=0, description="Grid connection capacity, MW; also the exclusivity big-M")
    psi_sell: float = Field(..., ge=0, le=1, description="Maximum share of on-site RES energy sold")


class PriceConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    rho_peak: float = Field(..., ge=0, description="Capacity charge, USD per MW of peak purchase")
    rho_curt: float = Field(..., ge=0, description="Curtailment cost, USD/MWh")
    rho_thl: float = Field(..., ge=0, description="Thermal sale price, USD/MWh")
    rho_hl: float = Field(..., ge=0, description="Hydrogen sale price, USD/t")
    rho_h2_bf: float = Field(..., ge=0, description="Terminal hydrogen backfilling cost, USD/t")
    rho_vent: float = Field(0.0, ge=0, description="CO2 venting cost, USD/t")


class CostConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    energy: Dict[str, float] = Field(default_factory=dict, description="C_i^E, USD/MWh per electric unit")
    material: Dict[str, float] = Field(default_factory=dict, description="C_j^M, USD/t per material unit")

    @field_validator("energy")
    @classmethod
    def _energy_units(cls, value):
        unknown = set(value) - {"AE", "EAF", "HEH", "LEH", "COMP", "CCS"}
        if unknown:
            raise ValueError(f"Unknown electric units in costs: {sorted(unknown)}")
        return value

    @field_validator("material")
    @classmethod
    def _material_units(cls, value):
        unknown = set(value) - {"SF", "EAF", "MSR"}
        if unknown:
            raise ValueError(f"Unknown material units in costs: {sorted(unknown)}")
        return value


class TrackingConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    storages: List[StorageId] = Field(
        default_factory=lambda: [StorageId.BESS, StorageId.HT, StorageId.CDRIS, StorageId.LTS],
        description="Storages whose normalized level follows the kernel reference",
    )
    bandwidths: Dict[str, float] = Field(default_factory=dict, description="Kernel bandwidth per feature")
    strict_kernel: bool = Field(False, description="Raise instead of falling back to uniform weights")


class ForecastConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    da_error_frac: float = Field(0.10, ge=0, description="Day-ahead multiplicative error bound")
    id_error_frac: float = Field(0.05, ge=0, description="Intra-day multiplicative error bound")
    shared_day_ahead_draw: bool = Field(True, description="DD reuses the BD day-ahead forecast draw")


class PlantConfig(BaseModel):
    """Complete plant description: coefficients, capacities, storages, prices, orders and penalties."""

    model_config = ConfigDict(extra="forbid")

    schema_version: str = SCHEMA_VERSION
    synthetic: bool = Field(False, description="Values are illustrative rather than measured")
    description: str = ""
    horizon: HorizonConfig = Field(default_factory=HorizonConfig)
    electrolyzer: ElectrolyzerConfig
    shaft_furnace: ShaftFurnaceConfig
    methanol: MethanolConfig
    eaf: EafConfig
    heaters: HeaterConfig
    auxiliary: AuxiliaryConfig
    grid: GridConfig
    prices: PriceConfig
    costs: CostConfig = Field(default_factory=CostConfig)
    storages: List[StorageParams] = Field(default_factory=list)
    orders: Dict[str, float] = Field(default_factory=dict, description="M_v^order per order unit, tonnes")
    penalty: PenaltyConfig = Field(default_factory=PenaltyConfig)
    tracking: TrackingConfig = Field(default_factory=TrackingConfig)
    forecast: ForecastConfig = Field(default_factory=ForecastConfig)

    @field_validator("orders")
    @classmethod
    def _order_units(cls, value: Dict[str, float]):
        unknown = set(value) - set(ORDER_UNITS)
        if unknown:
            raise ValueError(f"Orders only apply to {ORDER_UNITS}, got {sorted(unknown)}")
        if any(v < 0 for v in value.values()):
            raise ValueError("Orders must be nonnegative")
        return value

    @field_validator("storages")
    @classmethod
    def _unique_storages(cls, value: List[StorageParams]):
        ids = [s.storage_id for s in value]
        if len(ids) != len(set(ids)):
            raise ValueError("Each storage may be configured once")
        return value

    @model_validator(mode="after")
    def _check_units(self):
        if self.shaft_furnace.unit_id != LagUnitId.SF:
            raise ValueError("shaft_furnace.unit_id must be SF")
        if self.methanol.unit_id != LagUnitId.MSR:
            raise ValueError("methanol.unit_id must be MSR")
        return self

    def storage(self, storage_id: Union[str, StorageId]) -> Optional[StorageParams]:
        storage_id = StorageId(storage_id)
        for s in self.storages:
            if s.storage_id == storage_id:
                return s
        return None

    @property
    def storage_ids(self) -> List[str]:
        return [s.storage_id.value for s in self.storages]

    def core_capacity(self, unit: str) -> float:
        """Rated normalization capacity psi_u,max of a core unit."""
        override = self.penalty.unit(unit).psi_max
        if override is not None:
            return override
        return {
            "AE": self.electrolyzer.p_max,
            "SF": self.shaft_furnace.max_discharge,
            "EAF": self.eaf.steel_max,
            "MSR": self.methanol.max_discharge,
        }[unit]

    def core_baseline(self, unit: str) -> float:
        return {
            "AE": self.electrolyzer.p_base,
            "SF": self.shaft_furnace.qss_base,
            "EAF": self.eaf.steel_base,
            "MSR": self.methanol.qss_base,
        }[unit]

    def max_step_output(self, unit: str) -> float:
        """Largest production of an order unit in one period, tonnes."""
        dt = self.horizon.dt_hours
        if unit == "SF":
            return self.shaft_furnace.qss_bounds[1] * dt
        if unit == "EAF":
            return self.eaf.steel_max * dt
        raise ConfigurationError(f"{unit} is not an order unit", unit=unit)

    @classmethod
    def from_dict(cls, data: Dict, source: str = "<dict>") -> "PlantConfig":
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigurationError(
                f"Invalid plant configuration {source}: {e.error_count()} error(s)",
                path=source,
                errors=[f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()],
            ) from None

    @classmethod
    def load(cls, path: Union[str, Path]) -> "PlantConfig":
        path = Path(path)
        try:
            with open(path, "r", encoding="utf-8") as f:
                content = f.read()
        except FileNotFoundError:
            raise InputFileError(f"Plant configuration not found: {path}", path=str(path)) from None
        except OSError as e:
            raise InputFileError(f"Cannot read plant configuration {path}: {e}", path=str(path)) from None
        try:
            data = json.loads(content)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Failed to parse plant configuration {path}: {e}", path=str(path)) from None
        return cls.from_dict(data, str(path))

    def save(self, path: Union[str, Path]):
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.model_dump_json(indent=2))


class SolverSettings(BaseModel):
    """Backend selection and determinism controls for every solve."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = "appsi_highs"
    mip_gap: float = Field(1e-4, ge=0)
    threads: int = Field(1, ge=1)
    seed: int = 0
    time_limit: Optional[float] = Field(None, gt=0)

    @classmethod
    def from_env(cls, seed: int = 0, **overrides) -> "SolverSettings":
        values = {
            "name": os.getenv("STEELFLEX_SOLVER", "appsi_highs"),
            "mip_gap": float(os.getenv("STEELFLEX_MIP_GAP", "1e-4")),
            "threads": int(os.getenv("STEELFLEX_THREADS", "1")),
            "seed": seed,
        }
        time_limit = os.getenv("STEELFLEX_TIME_LIMIT")
        if time_limit:
            values["time_limit"] = float(time_limit)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class Config:
    """Locates the plant, EAF region, scenario and history inputs of a configuration directory."""

    def __init__(self, config_dir: Optional[str] = None):
        self.config_dir = Path(os.path.expanduser(config_dir)) if config_dir else None
        self.config_files = {
            "plant": "plant_config.json",
            "eaf_region": "eaf_calibration.json",
            "scenario": "scenario.csv",
            "history": "history",
        }
        self.bundled_files = {
            "plant": DATA_DIR / "plant_config.json",
            "eaf_region": DATA_DIR / "eaf_calibration.json",
            "scenario": DATA_DIR / "synthetic_scenario.csv",
            "history": DATA_DIR / "history",
        }

    def path_for(self, kind: str) -> Path:
        """Path of an input, preferring the configuration directory over the bundled copy."""
        if kind not in self.config_files:
            raise ConfigurationError(f"Unknown configuration item: {kind}")
        if self.config_dir is not None:
            candidate = self.config_dir / self.config_files[kind]
            if candidate.exists():
                return candidate
        return self.bundled_files[kind]

    def load_plant(self) -> PlantConfig:
        if self.config_dir is not None and not (self.config_dir / self.config_files["plant"]).exists():
            logger.info(f"No plant configuration in {self.config_dir}, writing bundled default")
            self.write_defaults(kinds=["plant"])
        return PlantConfig.load(self.path_for("plant"))

    def load_eaf_region(self) -> EafPolytope:
        return EafPolytope.load(self.path_for("eaf_region"))

    def save_plant(self, plant: PlantConfig):
        if self.config_dir is None:
            raise ConfigurationError("Cannot save into the bundled data directory")
        self.config_dir.mkdir(parents=True, exist_ok=True)
        plant.save(self.config_dir / self.config_files["plant"])

    def write_defaults(self, kinds: Optional[List[str]] = None, overwrite: bool = False) -> List[Path]:
        """Copy bundled inputs into the configuration directory.

        Args:
            kinds: Items to write; all of them when omitted.
            overwrite: Replace files that already exist.

        Returns:
            Paths written.
        """
        if self.config_dir is None:
            raise ConfigurationError("No configuration directory given")
        self.config_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for kind in kinds or list(self.config_files):
            source = self.bundled_files[kind]
            target = self.config_dir / self.config_files[kind]
            if target.exists() and not overwrite:
                logger.info(f"Keeping existing {target}")
                continue
            if source.is_dir():
                if target.exists():
                    shutil.rmtree(target)
                shutil.copytree(source, target)
            else:
                shutil.copyfile(source, target)
            written.append(target)
            logger.info(f"Wrote {target}")
        return written


def cache_settings() -> Tuple[Path, int]:
    """Directory and TTL (days) of the perfect-information trajectory cache."""
    cache_dir = Path(os.path.expanduser(os.getenv("STEELFLEX_CACHE_DIR", "~/.cache/steelflex")))
    ttl_days = int(os.getenv("STEELFLEX_CACHE_TTL_DAYS", "7"))
    return cache_dir, ttl_days
