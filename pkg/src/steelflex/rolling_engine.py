"""Day-ahead to intra-day pipeline.

Order of execution for a full run:

1. BD on the day-ahead forecast.
2. BI rolling over the truth: at instant k the current period is revealed,
   the rest of the window is an intra-day forecast, and only the first step
   is committed.
3. DD on the day-ahead forecast against the BD trajectory; offers follow
   from the BD and DD net loads.
4. DI rolling against the BI window plans, with offers, pacing and penalties.
5. Realized global cost and the order-completion audit.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from steelflex.config import ORDER_UNITS, PlantConfig, SolverSettings
from steelflex.errors import ConfigurationError, OrderShortfallError, PacingInfeasibleError, SolverError
from steelflex.penalty import CORE_UNITS, PenaltyConfig, exact_penalty
from steelflex.references import HistoryLibrary, soc_reference
from steelflex.run_logger import RunLogger
from steelflex.scenario import NONNEGATIVE_COLUMNS, VALUE_COLUMNS, ExogenousScenario
from steelflex.scheduler import (
    ORDER_COLUMNS,
    MilpModel,
    Mode,
    Offer,
    PlantState,
    ProblemSpec,
    RealizedContext,
    build,
    build_offers,
    core_trajectory,
)
from steelflex.solver import DispatchSolution, economic_terms, solve

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-9
ORDER_RTOL = 1e-6
STAGES = {
    "bd": (Mode.BD,),
    "bi": (Mode.BI,),
    "dd": (Mode.BD, Mode.DD),
    "di": (Mode.BD, Mode.BI, Mode.DD, Mode.DI),
    "full": (Mode.BD, Mode.BI, Mode.DD, Mode.DI),
}


class PacingMode(str, Enum):
    ARM = "arm"
    FCFB = "fcfb"


@dataclass
class ForecastModel:
    da_error_frac: float = 0.10
    id_error_frac: float = 0.05
    lookahead: int = 8
    seed: int = 0
    shared_day_ahead_draw: bool = True

    def __post_init__(self):
        if self.da_error_frac < 0 or self.id_error_frac < 0:
            raise ConfigurationError("Forecast error fractions must be nonnegative")
        if self.lookahead < 1:
            raise ConfigurationError("Lookahead must be at least one period", lookahead=self.lookahead)

    @classmethod
    def from_plant(cls, plant: PlantConfig, seed: int = 0, **overrides) -> "ForecastModel":
        values = {
            "da_error_frac": plant.forecast.da_error_frac,
            "id_error_frac": plant.forecast.id_error_frac,
            "lookahead": plant.horizon.lookahead,
            "seed": seed,
            "shared_day_ahead_draw": plant.forecast.shared_day_ahead_draw,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


def simulate_forecast(
    truth: Sequence[float],
    error_frac: float,
    horizon: Optional[int] = None,
    seed: Union[int, Sequence[int]] = 0,
    nonnegative: bool = True,
) -> np.ndarray:
    """Multiplicative forecast truth * (1 + e), e ~ U[-error_frac, error_frac] i.i.d.

    Args:
        truth: Realized series.
        error_frac: Error bound.
        horizon: Number of leading periods to forecast; the whole series when omitted.
        seed: Seed or seed sequence entropy for ``numpy.random.default_rng``.
        nonnegative: Floor the forecast at zero.
    """
    truth = np.asarray(truth, dtype=float)
    n = len(truth) if horizon is None else horizon
    if error_frac < 0:
        raise ConfigurationError("error_frac must be nonnegative", error_frac=error_frac)
    rng = np.random.default_rng(seed)
    e = rng.uniform(-error_frac, error_frac, n)
    forecast = truth[:n] * (1.0 + e)
    return np.maximum(forecast, 0.0) if nonnegative else forecast


def _perturb(scenario: ExogenousScenario, error_frac: float, stream: Sequence[int], name: str) -> ExogenousScenario:
    values = {}
    for i, column in enumerate(VALUE_COLUMNS):
        values[column] = simulate_forecast(
            scenario.column(column), error_frac, seed=[*stream, i], nonnegative=column in NONNEGATIVE_COLUMNS
        )
    return scenario.with_values(values, name=name)


def day_ahead_forecast(truth: ExogenousScenario, forecast: ForecastModel, draw: int = 0) -> ExogenousScenario:
    return _perturb(truth, forecast.da_error_frac, [forecast.seed, 0, draw], f"{truth.name}-da{draw}")


def intraday_window(truth: ExogenousScenario, forecast: ForecastModel, k: int, length: int) -> ExogenousScenario:
    """Window [k, k + length) with period k revealed and the rest forecast."""
    window = truth.window(k, k + length)
    if length == 1 or forecast.id_error_frac == 0:
        return window
    noisy = _perturb(window, forecast.id_error_frac, [forecast.seed, 1, k], window.name)
    values = {c: np.concatenate([[window.column(c)[0]], noisy.column(c)[1:]]) for c in VALUE_COLUMNS}
    return window.with_values(values, name=f"{truth.name}-id{k}")


def pacing_bounds(
    mode: PacingMode, residual: float, window_length: int, horizon: int, k: int, max_step_output: float
) -> Tuple[float, float]:
    """Bounds on the production of a rolling window.

    Args:
        mode: ARM or FCFB.
        residual: Remaining order R at the start of instant k, tonnes.
        window_length: Look-ahead L (clamped to T - k + 1).
        horizon: T.
        k: Rolling instant, 1-based.
        max_step_output: Largest production in one period, tonnes.

    Raises:
        PacingInfeasibleError: R exceeds what the remaining periods can produce.
    """
    if not 1 <= k <= horizon:
        raise ConfigurationError(f"Rolling instant {k} outside [1, {horizon}]")
    remaining = horizon - k + 1
    length = min(window_length, remaining)
    if residual <= RESIDUAL_TOL:
        return 0.0, 0.0
    capacity = remaining * max_step_output
    if residual > capacity * (1 + 1e-9):
        raise PacingInfeasibleError(
            f"Remaining order {residual:.6g} t exceeds remaining capacity {capacity:.6g} t at k={k}",
            k=k,
            residual=residual,
            capacity=capacity,
        )
    if length == remaining:
        return residual, residual
    if PacingMode(mode) == PacingMode.ARM:
        lower = length / remaining * residual
    else:
        lower = max(0.0, residual - (remaining - length) * max_step_output)
    return min(lower, residual), residual


@dataclass
class RollingLedger:
    """Realized bookkeeping of a rolling run."""

    plant: PlantConfig
    state: PlantState
    orders: Dict[str, float]
    k: int = 0
    rows: List[pd.Series] = field(default_factory=list)
    sell_cum: float = 0.0
    res_cum: float = 0.0
    peak: float = 0.0
    peak_history: List[float] = field(default_factory=list)
    production: Dict[str, float] = field(default_factory=dict)

    @classmethod
    def start(cls, plant: PlantConfig) -> "RollingLedger":
        return cls(
            plant=plant,
            state=PlantState.initial(plant),
            orders=dict(plant.orders),
            production={v: 0.0 for v in ORDER_UNITS},
        )

    def residual(self, unit: str) -> float:
        return self.orders.get(unit, 0.0) - self.production.get(unit, 0.0)

    def context(self) -> RealizedContext:
        return RealizedContext(peak=self.peak, sell_cum=self.sell_cum, res_cum=self.res_cum)

    def commit(self, solution: DispatchSolution):
        """Realize the first step of a window plan."""
        dt = self.plant.horizon.dt_hours
        row = solution.frame.iloc[0].copy()
        self.rows.append(row)
        self.sell_cum += float(row["p_sell"]) * dt
        self.res_cum += float(row["p_re"]) * dt
        self.peak = max(self.peak, float(row["p_buy"]))
        self.peak_history.append(self.peak)
        for unit, column in ORDER_COLUMNS.items():
            self.production[unit] += float(row[column]) * dt
            if unit in self.orders and self.residual(unit) < -RESIDUAL_TOL * max(1.0, self.orders[unit]):
                logger.warning(f"{unit} production exceeds its order by {-self.residual(unit):.6g} t at k={self.k}")
        self.state = solution.end_state(0)
        self.k += 1

    @property
    def realized(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows).reset_index(drop=True)


@dataclass
class RunRecord:
    """Everything a pipeline run produced."""

    plant: PlantConfig
    truth: ExogenousScenario
    forecast: ForecastModel
    penalty: PenaltyConfig
    pacing: PacingMode
    stages: Tuple[Mode, ...]
    bd: Optional[DispatchSolution] = None
    dd: Optional[DispatchSolution] = None
    bi_plans: List[DispatchSolution] = field(default_factory=list)
    di_plans: List[DispatchSolution] = field(default_factory=list)
    bi_ledger: Optional[RollingLedger] = None
    di_ledger: Optional[RollingLedger] = None
    offers: Optional[Offer] = None
    di_soc_reference: Dict[str, np.ndarray] = field(default_factory=dict)
    costs: Dict[str, Dict[str, float]] = field(default_factory=dict)
    statuses: List[Dict] = field(default_factory=list)

    @property
    def bi_realized(self) -> Optional[pd.DataFrame]:
        return self.bi_ledger.realized if self.bi_ledger else None

    @property
    def di_realized(self) -> Optional[pd.DataFrame]:
        return self.di_ledger.realized if self.di_ledger else None

    def delivered(self) -> np.ndarray:
        """Intra-day delivered net-load deviation netload_BI - netload_DI."""
        return self.bi_realized["netload"].to_numpy(float) - self.di_realized["netload"].to_numpy(float)


class _Runner:
    def __init__(
        self,
        record: RunRecord,
        settings: SolverSettings,
        library: Optional[HistoryLibrary],
        run_logger: Optional[RunLogger],
        dump_lp_dir: Optional[Path],
    ):
        self.record = record
        self.plant = record.plant
        self.settings = settings
        self.library = library
        self.run_logger = run_logger
        self.dump_lp_dir = Path(dump_lp_dir) if dump_lp_dir else None
        if record.penalty.lambda_rf > 0 and library is None:
            logger.warning("lambda_rf > 0 but no history library; SoC tracking disabled")

    def solve(self, spec: ProblemSpec, window: int) -> DispatchSolution:
        phase = spec.mode.value
        milp: MilpModel = build(spec)
        dump = self.dump_lp_dir / f"{phase}_{window:03d}.lp" if self.dump_lp_dir else None
        try:
            solution = solve(milp, self.settings, window=window, dump_lp=dump)
        except SolverError as e:
            self.record.statuses.append({"phase": phase, "window": window, "status": e.status})
            if self.run_logger:
                self.run_logger.log_solve(phase, window, spec.length, type(e).__name__, details=e.to_dict()["details"])
            raise
        self.record.statuses.append(
            {"phase": phase, "window": window, "status": solution.status.value, "mip_gap": solution.mip_gap}
        )
        if self.run_logger:
            self.run_logger.log_solve(
                phase, window, spec.length, solution.status.value, solution.objective, solution.runtime, solution.mip_gap
            )
        return solution

    def soc_window(self, k: int, length: int) -> Optional[Dict[str, np.ndarray]]:
        if self.library is None or self.record.penalty.lambda_rf == 0:
            return None
        ref = soc_reference(
            self.library,
            self.record.truth.features(k + 1),
            k,
            periods=range(k, k + length),
            strict=self.plant.tracking.strict_kernel,
        )
        return ref.levels

    def window_length(self, k: int) -> int:
        return min(self.record.forecast.lookahead, self.plant.horizon.periods - k)

    def run_bd(self):
        scenario = day_ahead_forecast(self.record.truth, self.record.forecast, draw=0)
        spec = ProblemSpec(Mode.BD, self.plant, scenario, penalty=self.record.penalty)
        self.record.bd = self.solve(spec, 0)
        logger.info(f"BD solved: economic cost {self.record.bd.economic_cost:.2f}")

    def run_bi(self):
        ledger = RollingLedger.start(self.plant)
        for k in range(self.plant.horizon.periods):
            length = self.window_length(k)
            spec = ProblemSpec(
                Mode.BI,
                self.plant,
                intraday_window(self.record.truth, self.record.forecast, k, length),
                start=k,
                initial_state=ledger.state,
                soc_reference=self.soc_window(k, length),
                realized=ledger.context(),
                penalty=self.record.penalty,
            )
            plan = self.solve(spec, k)
            self.record.bi_plans.append(plan)
            ledger.commit(plan)
        self.record.bi_ledger = ledger
        logger.info(f"BI rolled over {ledger.k} periods, realized peak {ledger.peak:.2f} MW")

    def run_dd(self):
        forecast = self.record.forecast
        draw = 0 if forecast.shared_day_ahead_draw else 1
        scenario = day_ahead_forecast(self.record.truth, forecast, draw=draw)
        spec = ProblemSpec(Mode.DD, self.plant, scenario, reference=self.record.bd.core(), penalty=self.record.penalty)
        self.record.dd = self.solve(spec, 0)
        self.record.offers = build_offers(self.record.bd.netload, self.record.dd.netload)
        if not np.any(self.record.offers.offered):
            logger.warning("DD schedule matches BD net load everywhere: empty offer set")
        logger.info(f"DD solved: economic cost {self.record.dd.economic_cost:.2f}")

    def run_di(self, pacing: PacingMode):
        ledger = RollingLedger.start(self.plant)
        horizon = self.plant.horizon.periods
        refs = {n: np.zeros(horizon) for n in (self.library.soc if self.library is not None else {})}
        for k in range(horizon):
            length = self.window_length(k)
            bi_plan = self.record.bi_plans[k]
            bounds = {
                v: pacing_bounds(pacing, ledger.residual(v), length, horizon, k + 1, self.plant.max_step_output(v))
                for v in self.plant.orders
            }
            soc = self.soc_window(k, length)
            if soc is not None:
                for n, levels in soc.items():
                    refs[n][k] = levels[0]
            spec = ProblemSpec(
                Mode.DI,
                self.plant,
                intraday_window(self.record.truth, self.record.forecast, k, length),
                start=k,
                initial_state=ledger.state,
                reference=bi_plan.core(),
                reference_netload=bi_plan.netload,
                soc_reference=soc,
                offer=self.record.offers.window(k, k + length),
                pacing=bounds,
                realized=ledger.context(),
                penalty=self.record.penalty,
            )
            plan = self.solve(spec, k)
            self.record.di_plans.append(plan)
            ledger.commit(plan)
        self.record.di_ledger = ledger
        if self.library is not None and self.record.penalty.lambda_rf > 0:
            self.record.di_soc_reference = refs
        logger.info(f"DI rolled over {ledger.k} periods with {pacing.value.upper()} pacing")


def realized_costs(record: RunRecord) -> Dict[str, Dict[str, float]]:
    """Realized cost breakdowns of the rolling phases and the DI global objective."""
    plant, penalty = record.plant, record.penalty
    costs: Dict[str, Dict[str, float]] = {}
    for name, solution in (("bd", record.bd), ("dd", record.dd)):
        if solution is not None:
            costs[name] = dict(solution.breakdown, economic=solution.economic_cost, objective=solution.objective)

    for name, ledger in (("bi", record.bi_ledger), ("di", record.di_ledger)):
        if ledger is None:
            continue
        terms = economic_terms(ledger.realized, plant, ledger.peak)
        terms["economic"] = terms["c_grid"] + terms["c_op"] - terms["r_sell"] + terms["peak_cost"]
        costs[name] = terms

    if record.di_ledger is not None and record.bi_ledger is not None:
        bi, di = record.bi_realized, record.di_realized
        d_p = 0.0
        bi_core, di_core = core_trajectory(bi), core_trajectory(di)
        for unit in CORE_UNITS:
            delta = (di_core[unit] - bi_core[unit]) / plant.core_capacity(unit)
            d_p += sum(exact_penalty(penalty.mechanism, penalty.unit(unit), float(x)) for x in delta)
        offers = record.offers
        d_s = float(np.sum(np.maximum(0.0, offers.p_mag - offers.direction * record.delivered())))
        d_rf = 0.0
        for n, ref in record.di_soc_reference.items():
            e_max = plant.storage(n).e_max
            d_rf += float(np.sum(np.abs(di[f"{n}_level"].to_numpy(float) / e_max - ref)))
        backfill = 0.0
        if "HT" in plant.storage_ids:
            backfill = plant.prices.rho_h2_bf * (float(bi["HT_level"].iloc[-1]) - float(di["HT_level"].iloc[-1]))
        di_cost = costs["di"]
        di_cost.update(d_p=d_p, d_s=d_s, d_rf=d_rf, backfill=backfill)
        di_cost["global"] = (
            di_cost["economic"]
            + penalty.lambda_p * d_p
            + penalty.lambda_rf * d_rf
            + penalty.lambda_s * d_s
            + backfill
        )
    return costs


def audit_orders(plant: PlantConfig, ledger: RollingLedger):
    for unit, order in plant.orders.items():
        produced = ledger.production[unit]
        if abs(produced - order) > ORDER_RTOL * max(1.0, order):
            raise OrderShortfallError(
                f"{unit} realized production {produced:.6g} t misses its order {order:.6g} t",
                unit=unit,
                produced=produced,
                order=order,
            )


def run_pipeline(
    plant: PlantConfig,
    truth: ExogenousScenario,
    library: Optional[HistoryLibrary] = None,
    forecast: Optional[ForecastModel] = None,
    penalty: Optional[PenaltyConfig] = None,
    pacing: Union[PacingMode, str] = PacingMode.ARM,
    settings: Optional[SolverSettings] = None,
    stages: str = "full",
    run_logger: Optional[RunLogger] = None,
    dump_lp_dir: Optional[Union[str, Path]] = None,
) -> RunRecord:
    """Run the requested stages of the pipeline on one realized scenario.

    Args:
        plant: Plant configuration.
        truth: Realized exogenous scenario over the full horizon.
        library: History library for SoC references; tracking is skipped without one.
        forecast: Forecast errors, look-ahead and seed.
        penalty: Penalty configuration; the plant's when omitted.
        pacing: ARM or FCFB order pacing for DI.
        settings: Solver settings.
        stages: One of bd, bi, dd, di, full.
        run_logger: Receives one record per solve.
        dump_lp_dir: Write every model in LP format into this directory.

    Returns:
        RunRecord with solutions, ledgers, offers, costs and solve statuses.
    """
    if stages not in STAGES:
        raise ConfigurationError(f"Unknown stage selection {stages}", choices=sorted(STAGES))
    if len(truth) != plant.horizon.periods:
        raise ConfigurationError(
            f"Scenario has {len(truth)} periods, plant horizon is {plant.horizon.periods}",
            scenario=truth.name,
        )
    penalty = penalty or plant.penalty
    penalty.check()
    forecast = forecast or ForecastModel.from_plant(plant)
    pacing = PacingMode(pacing)
    settings = settings or SolverSettings(seed=forecast.seed)
    if dump_lp_dir:
        Path(dump_lp_dir).mkdir(parents=True, exist_ok=True)

    record = RunRecord(plant, truth, forecast, penalty, pacing, STAGES[stages])
    runner = _Runner(record, settings, library, run_logger, dump_lp_dir)
    modes = record.stages
    if Mode.BD in modes:
        runner.run_bd()
    if Mode.BI in modes:
        runner.run_bi()
    if Mode.DD in modes:
        runner.run_dd()
    if Mode.DI in modes:
        runner.run_di(pacing)
        audit_orders(plant, record.di_ledger)
    record.costs = realized_costs(record)
    return record
