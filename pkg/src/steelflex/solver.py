"""Solve a compiled MilpModel and decode it into a DispatchSolution."""
import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd
import pyomo.environ as pyo
from pyomo.opt import TerminationCondition

from steelflex.auditor import audit_schedule
from steelflex.config import PlantConfig, SolverSettings
from steelflex.errors import DecodeMismatchError, SolverError
from steelflex.penalty import PenaltyMechanism, config_epigraph_gap
from steelflex.scheduler import MilpModel, Mode, PlantState, core_trajectory

logger = logging.getLogger(__name__)

OBJECTIVE_RTOL = 1e-6
ZERO_TOL = 1e-10

# Frame columns decoded from model components of the same name
VAR_COLUMNS = [
    "p_buy", "p_sell", "p_curt", "p_ae", "sf_qss", "msr_qss", "eaf_steel", "hot_out",
    "p_heh", "heh_surplus", "p_leh", "co2_vent", "hl_sell", "thl_load",
]
EXPR_COLUMNS = [
    "dri_p", "methanol", "silo_in", "cold_to_eaf", "scrap", "hdri_charge", "x_hdri", "x_cdri",
    "x_scrap", "p_eaf", "carbon_powder", "lime", "co2_eaf", "p_ccs", "p_comp", "p_exp",
]
EXOGENOUS_COLUMNS = ["wind_mw", "solar_mw", "price_buy", "price_sell", "h2_demand_t", "heat_demand_mwh"]
ELECTRIC_COLUMNS = {"AE": "p_ae", "EAF": "p_eaf", "HEH": "p_heh", "LEH": "p_leh", "COMP": "p_comp", "CCS": "p_ccs"}
MATERIAL_COLUMNS = {"SF": "dri_p", "EAF": "eaf_steel", "MSR": "methanol"}


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ERROR = "error"


@dataclass
class DispatchSolution:
    """Decoded schedule of one solve.

    ``frame`` has one row per period of the model with stable column names;
    ``t`` holds the global period index.
    """

    mode: Mode
    start: int
    status: SolveStatus
    frame: pd.DataFrame
    peak: float
    objective: float
    breakdown: Dict[str, float]
    mip_gap: float = 0.0
    runtime: float = 0.0
    epigraph_gap: float = 0.0
    storage_ids: List[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.frame)

    def column(self, name: str) -> np.ndarray:
        return self.frame[name].to_numpy(dtype=float)

    @property
    def netload(self) -> np.ndarray:
        return self.column("netload")

    @property
    def economic_cost(self) -> float:
        b = self.breakdown
        return b["c_grid"] + b["c_op"] - b["r_sell"] + b["peak_cost"]

    def core(self) -> Dict[str, np.ndarray]:
        return core_trajectory(self.frame)

    def end_state(self, index: int = -1) -> PlantState:
        """Plant state after the period at local ``index``."""
        row = self.frame.iloc[index]
        return PlantState(
            sf_qss=float(row["sf_qss"]),
            msr_qss=float(row["msr_qss"]),
            pending_hot=float(row["hot_out"]),
            levels={s: float(row[f"{s}_level"]) for s in self.storage_ids},
        )


def economic_terms(frame: pd.DataFrame, plant: PlantConfig, peak: float) -> Dict[str, float]:
    """Grid cost, operating cost, sales revenue and peak charge recomputed from decoded columns."""
    dt = plant.horizon.dt_hours
    prices, costs = plant.prices, plant.costs
    col = lambda name: frame[name].to_numpy(dtype=float)

    c_grid = float(np.sum(col("price_buy") * col("p_buy") + prices.rho_curt * col("p_curt")) * dt)
    op = prices.rho_vent * col("co2_vent")
    for unit, column in ELECTRIC_COLUMNS.items():
        op = op + costs.energy.get(unit, 0.0) * col(column)
    for unit, column in MATERIAL_COLUMNS.items():
        op = op + costs.material.get(unit, 0.0) * col(column)
    c_op = float(np.sum(op) * dt)
    r_sell = float(
        np.sum(col("price_sell") * col("p_sell") + prices.rho_thl * col("thl_load") + prices.rho_hl * col("hl_sell")) * dt
    )
    return {"c_grid": c_grid, "c_op": c_op, "r_sell": r_sell, "peak_cost": prices.rho_peak * peak}


def _value(component) -> float:
    v = pyo.value(component, exception=False)
    if v is None:
        return 0.0
    v = float(v)
    return 0.0 if abs(v) < ZERO_TOL else v


def decode(milp: MilpModel) -> pd.DataFrame:
    m, spec = milp.model, milp.spec
    periods = list(m.T)
    data = {"t": [spec.start + t for t in periods]}
    for name in EXOGENOUS_COLUMNS:
        data[name] = spec.scenario.column(name)
    for name in VAR_COLUMNS + EXPR_COLUMNS:
        component = getattr(m, name)
        data[name] = [_value(component[t]) for t in periods]
    if hasattr(m, "b_grid"):
        data["b_grid"] = [round(_value(m.b_grid[t])) for t in periods]
    else:
        data["b_grid"] = [int(_value(m.p_sell[t]) > 0) for t in periods]
    for s in m.storage_ids:
        data[f"{s}_ch"] = [_value(m.ch[s, t]) for t in periods]
        data[f"{s}_dis"] = [_value(m.dis[s, t]) for t in periods]
        data[f"{s}_level"] = [_value(m.level[s, t]) for t in periods]
        if hasattr(m, "u_ch"):
            data[f"{s}_mode"] = [round(_value(m.u_ch[s, t])) for t in periods]
        else:
            data[f"{s}_mode"] = [int(c > 0) for c in data[f"{s}_ch"]]

    frame = pd.DataFrame(data)
    frame["netload"] = frame["p_buy"] - frame["p_sell"]
    frame["p_re"] = frame["wind_mw"] + frame["solar_mw"]
    bess_ch = frame["BESS_ch"] if "BESS_ch" in frame else 0.0
    frame["p_load"] = (
        frame["p_eaf"] + bess_ch + frame["p_ae"] + frame["p_comp"] + frame["p_heh"] + frame["p_leh"] + frame["p_ccs"]
    )
    return frame


def _configure(opt, settings: SolverSettings):
    name = settings.name.lower()
    if "highs" in name:
        opt.options["mip_rel_gap"] = settings.mip_gap
        opt.options["threads"] = settings.threads
        opt.options["random_seed"] = settings.seed
        if settings.time_limit:
            opt.options["time_limit"] = settings.time_limit
    elif name == "cbc":
        opt.options["ratioGap"] = settings.mip_gap
        opt.options["threads"] = settings.threads
        opt.options["randomCbcSeed"] = settings.seed
        if settings.time_limit:
            opt.options["seconds"] = settings.time_limit
    elif name == "glpk":
        opt.options["mipgap"] = settings.mip_gap
        if settings.time_limit:
            opt.options["tmlim"] = settings.time_limit
    else:
        logger.warning(f"No option mapping for solver {settings.name}; using its defaults")


def _status(results) -> SolveStatus:
    tc = results.solver.termination_condition
    if tc == TerminationCondition.optimal:
        return SolveStatus.OPTIMAL
    if tc in (TerminationCondition.infeasible, TerminationCondition.infeasibleOrUnbounded):
        return SolveStatus.INFEASIBLE
    if tc == TerminationCondition.unbounded:
        return SolveStatus.UNBOUNDED
    if tc in (TerminationCondition.maxTimeLimit, TerminationCondition.maxIterations):
        ub = results.problem.upper_bound
        if ub is not None and math.isfinite(ub):
            return SolveStatus.FEASIBLE
    return SolveStatus.ERROR


def _bounds(results):
    ub, lb = results.problem.upper_bound, results.problem.lower_bound
    ub = float(ub) if ub is not None and math.isfinite(ub) else None
    lb = float(lb) if lb is not None and math.isfinite(lb) else None
    return ub, lb


def solve(
    milp: MilpModel,
    settings: Optional[SolverSettings] = None,
    window: Optional[int] = None,
    dump_lp: Optional[Union[str, Path]] = None,
) -> DispatchSolution:
    """Solve ``milp`` and return the decoded, audited schedule.

    Args:
        milp: Compiled model from one of the scheduler builders.
        settings: Backend, gap and determinism controls.
        window: Rolling instant reported in errors.
        dump_lp: Write the model in LP format here before solving.

    Returns:
        DispatchSolution with status optimal or feasible.

    Raises:
        SolverError: Backend unavailable or failed, or the problem is infeasible/unbounded.
        DecodeMismatchError: Recomputed objective disagrees with the solver's.
        AuditError: Decoded schedule violates a replayed constraint.
    """
    settings = settings or SolverSettings()
    spec = milp.spec
    label = f"{spec.mode.value.upper()}@{spec.start}"
    if dump_lp:
        milp.write_lp(dump_lp)
        logger.info(f"Wrote LP for {label} to {dump_lp}")

    opt = pyo.SolverFactory(settings.name)
    if opt is None or not opt.available(exception_flag=False):
        raise SolverError(f"Solver {settings.name} is not available", status="unavailable", window=window)
    _configure(opt, settings)

    started = time.perf_counter()
    try:
        results = opt.solve(milp.model, load_solutions=False)
    except Exception as e:
        raise SolverError(f"{label}: solver {settings.name} failed: {e}", status="error", window=window) from e
    runtime = time.perf_counter() - started

    status = _status(results)
    if status not in (SolveStatus.OPTIMAL, SolveStatus.FEASIBLE):
        raise SolverError(
            f"{label}: solver returned {results.solver.termination_condition}",
            status=status.value,
            window=window,
            mode=spec.mode.value,
        )
    if status == SolveStatus.FEASIBLE:
        logger.warning(f"{label}: time limit reached, using best feasible schedule")
    milp.model.solutions.load_from(results)

    frame = decode(milp)
    peak = _value(milp.model.p_peak)
    breakdown = economic_terms(frame, spec.plant, peak)
    for name in ("d_p", "d_rf", "d_s"):
        breakdown[name] = _value(milp.terms[name])

    weights = milp.weights
    recomputed = sum(weights[k] * v for k, v in breakdown.items())
    ub, lb = _bounds(results)
    reported = ub if ub is not None else _value(milp.model.objective)
    if abs(recomputed - reported) > OBJECTIVE_RTOL * max(1.0, abs(reported)):
        raise DecodeMismatchError(
            f"{label}: recomputed objective {recomputed:.10g} differs from solver objective {reported:.10g}",
            status=status.value,
            window=window,
            recomputed=recomputed,
            reported=reported,
        )

    gap = 0.0
    if ub is not None and lb is not None and milp.has_binaries:
        gap = max(0.0, (ub - lb) / max(abs(ub), 1e-10))

    epigraph = 0.0
    if spec.penalty.mechanism == PenaltyMechanism.M3 and spec.penalty.lambda_p > 0 and spec.mode in (Mode.DD, Mode.DI):
        epigraph = config_epigraph_gap(spec.penalty)["max_rel_gap"]

    solution = DispatchSolution(
        mode=spec.mode,
        start=spec.start,
        status=status,
        frame=frame,
        peak=peak,
        objective=recomputed,
        breakdown=breakdown,
        mip_gap=gap,
        runtime=runtime,
        epigraph_gap=epigraph,
        storage_ids=list(milp.model.storage_ids),
    )
    audit_schedule(frame, spec, window=window, peak=peak)
    logger.debug(f"{label}: {status.value}, objective {recomputed:.6f}, gap {gap:.2e}, {runtime:.2f}s")
    return solution
