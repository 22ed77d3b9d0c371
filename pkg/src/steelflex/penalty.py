"""Process-deviation penalty configuration and its MILP encoding.

Three mechanisms are supported:

* M1, linear symmetric: ``omega * |dpsi|`` with no deadband.
* M2, asymmetric deadband hinge: ``omega * alpha_s * (sigma_s * dpsi - eps_s)_+`` per side.
* M3, exponential asymmetric deadband: ``omega * alpha_s * (exp(beta_s * (sigma_s * dpsi - eps_s)_+) - 1)``,
  encoded as an epigraph variable above a set of tangent lines.

``dpsi`` is the deviation from the reference trajectory normalized by the
unit's rated capacity, so it lies in [-1, 1].
"""
import logging
import math
from enum import Enum
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional, Tuple

import numpy as np
import pyomo.environ as pyo
from pydantic import BaseModel, ConfigDict, Field, field_validator

from steelflex.errors import ConfigurationError

logger = logging.getLogger(__name__)

CORE_UNITS = ("AE", "SF", "EAF", "MSR")


class PenaltyMechanism(str, Enum):
    M1 = "m1"
    M2 = "m2"
    M3 = "m3"


class UnitPenalty(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    omega: float = Field(1.0, ge=0, description="Unit weight")
    alpha_up: float = Field(1.0, ge=0, description="Penalty amplitude for upward deviation")
    alpha_down: float = Field(1.0, ge=0, description="Penalty amplitude for downward deviation")
    beta_up: float = Field(2.0, gt=0, description="Steepness for upward deviation (M3)")
    beta_down: float = Field(2.0, gt=0, description="Steepness for downward deviation (M3)")
    eps_up: float = Field(0.05, ge=0, description="Upward deadband, p.u.")
    eps_down: float = Field(0.05, ge=0, description="Downward deadband, p.u.")
    psi_max: Optional[float] = Field(
        None, gt=0, description="Normalization capacity; defaults to the unit's rated capacity"
    )

    def side(self, sign: int) -> Tuple[float, float, float]:
        """(alpha, beta, eps) for sign +1 (up) or -1 (down)."""
        if sign > 0:
            return self.alpha_up, self.beta_up, self.eps_up
        return self.alpha_down, self.beta_down, self.eps_down


class PenaltyConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mechanism: PenaltyMechanism = PenaltyMechanism.M3
    lambda_p: float = Field(50.0, ge=0, description="Process-deviation weight, USD per p.u.")
    lambda_rf: float = Field(0.0, ge=0, description="SoC reference-tracking weight")
    lambda_s: float = Field(0.0, ge=0, description="Offer-shortfall weight, USD per MW")
    units: Dict[str, UnitPenalty] = Field(
        default_factory=lambda: {u: UnitPenalty() for u in CORE_UNITS},
        description="Per core-unit penalty tables",
    )
    tangent_cut_count: int = Field(16, description="Tangent cuts per side for M3")
    cut_grading: float = Field(
        1.15, ge=1.0, description="Cut spacing ratio; 1.0 spaces cuts evenly over [eps, 1]"
    )

    @field_validator("units")
    @classmethod
    def _known_units(cls, value: Dict[str, UnitPenalty]):
        unknown = set(value) - set(CORE_UNITS)
        if unknown:
            raise ValueError(f"Unknown core units in penalty table: {sorted(unknown)}")
        return value

    def unit(self, name: str) -> UnitPenalty:
        return self.units.get(name, UnitPenalty())

    def check(self):
        if self.mechanism == PenaltyMechanism.M3 and self.tangent_cut_count < 2:
            raise ConfigurationError(
                "M3 penalty needs at least 2 tangent cuts", tangent_cut_count=self.tangent_cut_count
            )


class TangentCut(NamedTuple):
    slope: float
    intercept: float


def exact_phi(x: float, beta: float, eps: float) -> float:
    """Exponential deadband penalty for a one-sided deviation x = sigma * dpsi."""
    return math.expm1(beta * max(0.0, x - eps))


def hinge_phi(x: float, eps: float) -> float:
    return max(0.0, x - eps)


def exact_penalty(mechanism: PenaltyMechanism, unit: UnitPenalty, delta: float) -> float:
    """Exact weighted penalty of one normalized deviation (both sides)."""
    if mechanism == PenaltyMechanism.M1:
        return unit.omega * abs(delta)
    total = 0.0
    for sign in (1, -1):
        alpha, beta, eps = unit.side(sign)
        x = sign * delta
        phi = hinge_phi(x, eps) if mechanism == PenaltyMechanism.M2 else exact_phi(x, beta, eps)
        total += alpha * phi
    return unit.omega * total


def cut_points(eps: float, count: int, grading: float = 1.0) -> np.ndarray:
    """Deviations in [eps, 1] where tangent lines touch the exponential branch."""
    if count < 2:
        raise ConfigurationError("At least 2 tangent cuts are required", tangent_cut_count=count)
    if eps >= 1.0:
        return np.array([eps])
    k = np.arange(count, dtype=float)
    if grading == 1.0:
        frac = k / (count - 1)
    else:
        frac = (grading ** k - 1.0) / (grading ** (count - 1) - 1.0)
    return eps + (1.0 - eps) * frac


def tangent_cuts(beta: float, eps: float, count: int, grading: float = 1.0) -> List[TangentCut]:
    cuts = []
    for c in cut_points(eps, count, grading):
        slope = beta * math.exp(beta * (c - eps))
        cuts.append(TangentCut(slope, exact_phi(c, beta, eps) - slope * c))
    return cuts


def epigraph_value(x: float, cuts: Iterable[TangentCut]) -> float:
    """Smallest phi satisfying every cut and phi >= 0."""
    return max(0.0, max(cut.slope * x + cut.intercept for cut in cuts))


def epigraph_gap(
    beta: float, eps: float, count: int, grading: float = 1.0, grid_points: int = 101
) -> Dict[str, float]:
    """Worst under-approximation of the cut envelope on a deviation grid over [-1, 1].

    Relative error is measured only where the exact penalty is positive.
    """
    cuts = tangent_cuts(beta, eps, count, grading)
    max_abs, max_rel = 0.0, 0.0
    for delta in np.linspace(-1.0, 1.0, grid_points):
        x = abs(float(delta))
        exact = exact_phi(x, beta, eps)
        gap = exact - epigraph_value(x, cuts)
        max_abs = max(max_abs, gap)
        if exact > 1e-12:
            max_rel = max(max_rel, gap / exact)
    return {"max_abs_gap": max_abs, "max_rel_gap": max_rel}


def config_epigraph_gap(config: PenaltyConfig) -> Dict[str, float]:
    """Largest cut gap over every configured unit and side (zero unless M3)."""
    worst = {"max_abs_gap": 0.0, "max_rel_gap": 0.0}
    if config.mechanism != PenaltyMechanism.M3:
        return worst
    for name in CORE_UNITS:
        unit = config.unit(name)
        for sign in (1, -1):
            _, beta, eps = unit.side(sign)
            gap = epigraph_gap(beta, eps, config.tangent_cut_count, config.cut_grading)
            worst = {k: max(worst[k], gap[k]) for k in worst}
    return worst


def encode_penalty(
    block: pyo.Block,
    config: PenaltyConfig,
    unit_name: str,
    periods: Iterable,
    deviation: Callable[[object], object],
) -> pyo.Expression:
    """Add penalty variables and constraints for one core unit to ``block``.

    Args:
        block: Pyomo block (or model) receiving the components.
        config: Penalty configuration.
        unit_name: Core unit the deviation belongs to.
        periods: Index set of the deviation.
        deviation: Callable returning the normalized deviation expression for a period.

    Returns:
        Expression for ``omega * sum_t sum_s alpha_s * Phi_s`` (unweighted by lambda_p).
    """
    config.check()
    unit = config.unit(unit_name)
    periods = list(periods)
    prefix = f"pen_{unit_name}"

    if config.mechanism == PenaltyMechanism.M1:
        d_up = pyo.Var(periods, bounds=(0, None))
        d_down = pyo.Var(periods, bounds=(0, None))
        block.add_component(f"{prefix}_up", d_up)
        block.add_component(f"{prefix}_down", d_down)
        block.add_component(
            f"{prefix}_split",
            pyo.Constraint(periods, rule=lambda b, t: deviation(t) == d_up[t] - d_down[t]),
        )
        return unit.omega * sum(d_up[t] + d_down[t] for t in periods)

    terms = []
    for sign, tag in ((1, "up"), (-1, "down")):
        alpha, beta, eps = unit.side(sign)
        if alpha == 0 or eps >= 1.0:
            continue
        phi = pyo.Var(periods, bounds=(0, None))
        block.add_component(f"{prefix}_phi_{tag}", phi)

        if config.mechanism == PenaltyMechanism.M2:
            block.add_component(
                f"{prefix}_hinge_{tag}",
                pyo.Constraint(periods, rule=lambda b, t, s=sign, e=eps, p=phi: p[t] >= s * deviation(t) - e),
            )
        else:
            cuts = tangent_cuts(beta, eps, config.tangent_cut_count, config.cut_grading)
            block.add_component(
                f"{prefix}_cuts_{tag}",
                pyo.Constraint(
                    periods,
                    range(len(cuts)),
                    rule=lambda b, t, c, s=sign, cs=cuts, p=phi: p[t] >= cs[c].slope * s * deviation(t) + cs[c].intercept,
                ),
            )
        terms.append(alpha * sum(phi[t] for t in periods))

    if not terms:
        return 0.0
    return unit.omega * sum(terms)
