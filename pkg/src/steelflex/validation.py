"""Input validation: schema and cross-consistency findings, never raising."""
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

from steelflex.config import PlantConfig
from steelflex.eaf_region import min_max_power
from steelflex.errors import SteelFlexError
from steelflex.penalty import PenaltyMechanism
from steelflex.scenario import ExogenousScenario, load_history

logger = logging.getLogger(__name__)


@dataclass
class Finding:
    code: str
    message: str
    details: Dict = field(default_factory=dict)


@dataclass
class ValidationReport:
    findings: List[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def add(self, code: str, message: str, **details):
        self.findings.append(Finding(code, message, details))

    def to_dict(self) -> Dict:
        return {"ok": self.ok, "findings": [asdict(f) for f in self.findings]}


def _error_finding(report: ValidationReport, code: str, error: SteelFlexError):
    report.add(code, error.message, **error.to_dict()["details"])


def check_plant(plant: PlantConfig, report: ValidationReport):
    """Cross-consistency of a schema-valid plant document."""
    horizon = plant.horizon.periods
    dt = plant.horizon.dt_hours
    for unit, order in plant.orders.items():
        capacity = horizon * plant.max_step_output(unit)
        if order > capacity * (1 + 1e-9):
            report.add(
                "order_capacity",
                f"{unit} order {order:.6g} t exceeds horizon capacity {capacity:.6g} t",
                unit=unit,
                order=order,
                capacity=capacity,
            )
        baseline = horizon * dt * (plant.shaft_furnace.qss_base if unit == "SF" else plant.eaf.steel_base)
        if abs(order - baseline) > 1e-6 * max(1.0, order):
            report.add(
                "order_lock",
                f"{unit} order {order:.6g} t differs from baseline output {baseline:.6g} t; locked BD/BI cannot meet it",
                unit=unit,
                order=order,
                baseline=baseline,
            )
    silo = plant.storage("CDRIS")
    if silo is not None and abs(silo.e_initial - 0.5 * silo.e_max) > 1e-9 * max(1.0, silo.e_max):
        report.add(
            "silo_initial",
            f"CDRIS starts at {silo.e_initial:.6g} t but must end at half capacity {0.5 * silo.e_max:.6g} t",
            initial=silo.e_initial,
            terminal=0.5 * silo.e_max,
        )
    penalty = plant.penalty
    if penalty.mechanism == PenaltyMechanism.M3 and penalty.tangent_cut_count < 2:
        report.add("tangent_cuts", "M3 penalty needs at least 2 tangent cuts", count=penalty.tangent_cut_count)
    if plant.horizon.lookahead > horizon:
        report.add("lookahead", f"Lookahead {plant.horizon.lookahead} exceeds horizon {horizon}")
    try:
        polytope = plant.eaf.polytope()
        min_max_power(polytope, polytope.steel_target)
    except SteelFlexError as e:
        _error_finding(report, "eaf_region", e)


def validate_inputs(
    config: Union[str, Path],
    scenario: Optional[Union[str, Path]] = None,
    history: Optional[Union[str, Path]] = None,
) -> ValidationReport:
    """Schema and cross-consistency report for a plant document, scenario and history directory."""
    report = ValidationReport()
    plant = None
    try:
        plant = PlantConfig.load(config)
    except SteelFlexError as e:
        _error_finding(report, "schema", e)
    if plant is not None:
        check_plant(plant, report)

    if scenario is not None:
        try:
            truth = ExogenousScenario.load(scenario)
            if plant is not None and len(truth) != plant.horizon.periods:
                report.add(
                    "grid",
                    f"Scenario has {len(truth)} periods, plant horizon is {plant.horizon.periods}",
                    scenario=len(truth),
                    horizon=plant.horizon.periods,
                )
        except SteelFlexError as e:
            _error_finding(report, "scenario", e)

    if history is not None:
        try:
            scenarios = load_history(history)
            if plant is not None and len(scenarios[0]) != plant.horizon.periods:
                report.add(
                    "grid",
                    f"History scenarios have {len(scenarios[0])} periods, plant horizon is {plant.horizon.periods}",
                )
        except SteelFlexError as e:
            _error_finding(report, "history", e)

    for finding in report.findings:
        logger.info(f"[{finding.code}] {finding.message}")
    return report
