"""Process unit models: shaft furnace and methanol reactor lags, heat balance,
DRI routing and the generalized storage family.

All functions here are pure and work on per-period amounts (tonnes, MWh).
"""
import logging
import math
from enum import Enum
from typing import NamedTuple, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from steelflex.errors import (
    InvalidCoefficientError,
    RoutingError,
    SiloOverflowError,
    SiloUnderflowError,
    SimultaneousChargeDischargeError,
    StorageBoundError,
)

logger = logging.getLogger(__name__)

FLOW_TOL = 1e-9


class LagUnitId(str, Enum):
    SF = "SF"
    MSR = "MSR"


class StorageId(str, Enum):
    BESS = "BESS"
    LTS = "LTS"
    HT = "HT"
    CDRIS = "CDRIS"
    SCS = "ScS"
    CST = "CST"


class LagUnitParams(BaseModel):
    """First-order lag unit (shaft furnace or methanol reactor)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    unit_id: LagUnitId
    transition_time_constant: float = Field(..., gt=0, description="T_trans, hours")
    qss_min_frac: float = Field(..., ge=0, le=1, description="Minimum quasi-steady output, fraction of max_discharge")
    qss_max_frac: float = Field(..., ge=0, le=1, description="Maximum quasi-steady output, fraction of max_discharge")
    ramp_up_frac: float = Field(..., description="Upper bound on qss change per step, fraction of max_discharge")
    ramp_down_frac: float = Field(..., description="Lower bound on qss change per step (signed), fraction of max_discharge")
    max_discharge: float = Field(..., gt=0, description="M_dis^max, tonnes per hour")

    @model_validator(mode="after")
    def _check_fractions(self):
        if self.qss_min_frac > self.qss_max_frac:
            raise ValueError("qss_min_frac must not exceed qss_max_frac")
        if self.ramp_down_frac > self.ramp_up_frac:
            raise ValueError("ramp_down_frac must not exceed ramp_up_frac")
        return self

    @property
    def qss_bounds(self) -> Tuple[float, float]:
        return self.qss_min_frac * self.max_discharge, self.qss_max_frac * self.max_discharge

    @property
    def ramp_bounds(self) -> Tuple[float, float]:
        return self.ramp_down_frac * self.max_discharge, self.ramp_up_frac * self.max_discharge


class DriRoutingState(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    silo_level: float = Field(..., ge=0, description="S_DRI, tonnes")
    silo_capacity: float = Field(..., ge=0, description="S_DRI^max, tonnes")
    pending_hot: float = Field(0.0, ge=0, description="Previous-period hot DRI awaiting EAF charge, tonnes")

    @model_validator(mode="after")
    def _check_level(self):
        if self.silo_level > self.silo_capacity + FLOW_TOL:
            raise ValueError("silo_level exceeds silo_capacity")
        return self


class MsrStoichiometry(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    psi_h_metha: float = Field(..., gt=0, description="Hydrogen per methanol, t/t")
    psi_c_metha: float = Field(..., gt=0, description="CO2 per methanol, t/t")


class HehCoefficients(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    psi_tth: float = Field(..., ge=0, description="Heating demand per tonne DRI, MWh/t")
    psi_th_re: float = Field(..., ge=0, le=1, description="Heat-recovery efficiency")
    psi_eh: float = Field(..., gt=0, description="Electric-heating conversion coefficient")
    psi_ftg: float = Field(..., ge=0, description="Top-gas heat recovered per tonne DRI, MWh/t")
    psi_whb: float = Field(..., ge=0, description="Waste-heat boiler recovery per tonne cooled DRI, MWh/t")


class StorageParams(BaseModel):
    """One member of the generalized storage family (carrier units per storage)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    storage_id: StorageId
    e_min: float = Field(0.0, ge=0, description="Minimum level")
    e_max: float = Field(..., ge=0, description="Maximum level")
    p_ch_max: float = Field(..., ge=0, description="Maximum charge rate per hour")
    p_dis_max: float = Field(..., ge=0, description="Maximum discharge rate per hour")
    eta_ch: float = Field(1.0, gt=0, le=1, description="Charge efficiency")
    eta_dis: float = Field(1.0, gt=0, le=1, description="Discharge efficiency")
    e_initial: float = Field(..., ge=0, description="Starting level")

    @model_validator(mode="after")
    def _check_levels(self):
        if not self.e_min <= self.e_initial <= self.e_max:
            raise ValueError(f"{self.storage_id.value}: e_initial must lie in [e_min, e_max]")
        return self


class HehBalance(NamedTuple):
    power: float
    surplus: float


def lag_alpha(params: LagUnitParams, dt: float) -> float:
    return math.exp(-dt / params.transition_time_constant)


def lag_output(params: LagUnitParams, qss_prev: float, qss_next: float, dt: float) -> float:
    """Actual output over a step when the quasi-steady set point moves from qss_prev to qss_next."""
    alpha = lag_alpha(params, dt)
    return alpha * qss_prev + (1.0 - alpha) * qss_next


def heh_balance(coeffs: HehCoefficients, dri_produced: float, dri_to_silo: float) -> HehBalance:
    """Electric heater power and any surplus recovered heat (electric equivalent)."""
    if coeffs.psi_eh <= 0:
        raise InvalidCoefficientError("psi_eh must be positive", psi_eh=coeffs.psi_eh)
    if dri_to_silo < -FLOW_TOL or dri_to_silo > dri_produced + FLOW_TOL:
        raise RoutingError(
            "dri_to_silo must lie in [0, dri_produced]", dri_produced=dri_produced, dri_to_silo=dri_to_silo
        )
    recovered = coeffs.psi_th_re * (coeffs.psi_ftg * dri_produced + coeffs.psi_whb * dri_to_silo) / coeffs.psi_eh
    net = coeffs.psi_tth * dri_produced - recovered
    if net < 0:
        return HehBalance(0.0, -net)
    return HehBalance(net, 0.0)


def heh_power(coeffs: HehCoefficients, dri_produced: float, dri_to_silo: float) -> float:
    balance = heh_balance(coeffs, dri_produced, dri_to_silo)
    if balance.surplus > 0:
        logger.warning(f"HEH surplus heat event: recovery exceeds demand by {balance.surplus:.4f} MWh")
    return balance.power


def step_dri_routing(
    state: DriRoutingState, dri_produced: float, hot_out: float, cold_to_eaf: float
) -> DriRoutingState:
    """Advance the DRI routing one period.

    The EAF hot charge for this period is ``state.pending_hot``; the new state
    carries ``hot_out`` forward as next period's hot charge.
    """
    if hot_out < -FLOW_TOL or hot_out > dri_produced + FLOW_TOL:
        raise RoutingError("hot_out must lie in [0, dri_produced]", hot_out=hot_out, dri_produced=dri_produced)
    if cold_to_eaf < -FLOW_TOL:
        raise RoutingError("cold_to_eaf must be nonnegative", cold_to_eaf=cold_to_eaf)

    inflow = dri_produced - hot_out
    level = state.silo_level + inflow - cold_to_eaf
    if level < -FLOW_TOL:
        raise SiloUnderflowError(
            f"Silo underflow: {cold_to_eaf:.6g} t requested, {state.silo_level + inflow:.6g} t available",
            bound="silo_min",
            level=level,
        )
    if level > state.silo_capacity + FLOW_TOL:
        raise SiloOverflowError(
            f"Silo overflow: level {level:.6g} t exceeds capacity {state.silo_capacity:.6g} t",
            bound="silo_capacity",
            level=level,
        )
    return DriRoutingState(
        silo_level=min(max(level, 0.0), state.silo_capacity),
        silo_capacity=state.silo_capacity,
        pending_hot=max(hot_out, 0.0),
    )


def msr_demands(stoich: MsrStoichiometry, methanol_out: float) -> Tuple[float, float]:
    """Hydrogen and CO2 consumed by the methanol reactor."""
    return stoich.psi_h_metha * methanol_out, stoich.psi_c_metha * methanol_out


def step_storage(params: StorageParams, e: float, p_ch: float, p_dis: float, dt: float) -> float:
    """Next storage level after charging p_ch and discharging p_dis for dt hours."""
    name = params.storage_id.value
    if p_ch > FLOW_TOL and p_dis > FLOW_TOL:
        raise SimultaneousChargeDischargeError(
            f"{name}: simultaneous charge ({p_ch:.6g}) and discharge ({p_dis:.6g})", storage=name
        )
    if p_ch < -FLOW_TOL or p_ch > params.p_ch_max + FLOW_TOL:
        raise StorageBoundError(f"{name}: charge rate {p_ch:.6g} outside [0, {params.p_ch_max}]", storage=name)
    if p_dis < -FLOW_TOL or p_dis > params.p_dis_max + FLOW_TOL:
        raise StorageBoundError(f"{name}: discharge rate {p_dis:.6g} outside [0, {params.p_dis_max}]", storage=name)

    level = e + (params.eta_ch * p_ch - p_dis / params.eta_dis) * dt
    if level < params.e_min - FLOW_TOL or level > params.e_max + FLOW_TOL:
        raise StorageBoundError(
            f"{name}: level {level:.6g} outside [{params.e_min}, {params.e_max}]", storage=name, level=level
        )
    return level
