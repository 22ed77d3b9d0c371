"""Demand-response evaluation metrics."""
import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from steelflex.errors import ConfigurationError, LengthMismatchError, MissingUnitError
from steelflex.penalty import CORE_UNITS
from steelflex.scheduler import core_trajectory

logger = logging.getLogger(__name__)


def _aligned(*series: Sequence[float]):
    arrays = [np.asarray(s, dtype=float) for s in series]
    if len({len(a) for a in arrays}) != 1:
        raise LengthMismatchError("Series differ in length", lengths=[len(a) for a in arrays])
    return arrays


@dataclass
class EffectiveCapacity:
    per_period: np.ndarray
    average: float
    empty: bool = False


def effective_capacity(
    p_mag: Sequence[float], direction: Sequence[float], netload_bi: Sequence[float], netload_di: Sequence[float]
) -> EffectiveCapacity:
    """Delivered capacity per period, clamped to [0, offer], and its mean over offered periods."""
    p_mag, direction, nl_bi, nl_di = _aligned(p_mag, direction, netload_bi, netload_di)
    delivered = np.maximum(0.0, direction * (nl_bi - nl_di))
    b_eff = np.minimum(p_mag, delivered)
    offered = p_mag > 0
    b_eff = np.where(offered, b_eff, 0.0)
    if not offered.any():
        logger.warning("No offered periods; average effective capacity set to 0")
        return EffectiveCapacity(b_eff, 0.0, empty=True)
    return EffectiveCapacity(b_eff, float(np.mean(b_eff[offered])))


def recovery_ramp(netload: Sequence[float], mask: Optional[Sequence[bool]] = None) -> float:
    """Largest one-step increase of the net load, optionally over masked starting periods only."""
    netload = np.asarray(netload, dtype=float)
    if len(netload) < 2:
        raise LengthMismatchError("Recovery ramp needs at least two periods")
    steps = np.diff(netload)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if len(mask) not in (len(netload), len(steps)):
            raise LengthMismatchError(
                "Recovery-ramp mask must cover every period or every step", lengths=[len(mask), len(netload)]
            )
        mask = mask[: len(steps)]
        if not mask.any():
            return 0.0
        steps = steps[mask]
    return float(np.max(steps))


@dataclass
class MatchingDegree:
    value: float
    degenerate: bool = False


def matching_degree(load: Sequence[float], res: Sequence[float]) -> MatchingDegree:
    """1 - sum|dload - dres| / (sum|dload| + sum|dres|); 1 when both series are constant."""
    load, res = _aligned(load, res)
    if len(load) < 2:
        raise LengthMismatchError("Matching degree needs at least two periods")
    d_load, d_res = np.diff(load), np.diff(res)
    denominator = float(np.sum(np.abs(d_load)) + np.sum(np.abs(d_res)))
    if denominator == 0:
        logger.warning("Load and RES are both constant; matching degree defined as 1")
        return MatchingDegree(1.0, degenerate=True)
    value = 1.0 - float(np.sum(np.abs(d_load - d_res))) / denominator
    return MatchingDegree(min(1.0, max(0.0, value)))


def nri(series: Sequence[float], capacity: float) -> float:
    """Normalized regulation intensity: total variation divided by rated capacity."""
    if capacity <= 0:
        raise ConfigurationError("NRI capacity must be positive", capacity=capacity)
    series = np.asarray(series, dtype=float)
    if len(series) < 2:
        raise LengthMismatchError("NRI needs at least two periods")
    return float(np.sum(np.abs(np.diff(series))) / capacity)


@dataclass
class DeviationStats:
    rate: float
    distribution: Dict[str, np.ndarray]

    def max_abs(self) -> float:
        return max((float(np.max(np.abs(v))) for v in self.distribution.values() if len(v)), default=0.0)

    def to_frame(self, phase: str) -> pd.DataFrame:
        rows = [
            {"phase": phase, "unit": unit, "t": t, "delta_psi": float(d)}
            for unit, values in self.distribution.items()
            for t, d in enumerate(values)
        ]
        return pd.DataFrame(rows, columns=["phase", "unit", "t", "delta_psi"])


def deviation_stats(
    trajectory: Mapping[str, Sequence[float]],
    baseline: Mapping[str, Sequence[float]],
    capacities: Mapping[str, float],
) -> DeviationStats:
    """Normalized deviations per core unit and their summed absolute value."""
    missing = [u for u in CORE_UNITS if u not in trajectory or u not in baseline or u not in capacities]
    if missing:
        raise MissingUnitError(f"Core units missing from deviation inputs: {missing}", units=missing)
    distribution = {}
    for unit in CORE_UNITS:
        series, base = _aligned(trajectory[unit], baseline[unit])
        distribution[unit] = (series - base) / capacities[unit]
    rate = float(sum(np.sum(np.abs(d)) for d in distribution.values()))
    return DeviationStats(rate, distribution)


@dataclass
class MetricsReport:
    avg_effective_capacity: float
    effective_capacity_empty: bool
    recovery_ramp: float
    matching_degree: float
    matching_degree_bi: Optional[float]
    matching_degree_degenerate: bool
    nri: Dict[str, float]
    deviation_rate: float
    max_abs_deviation: float
    deviation_rate_dd: Optional[float] = None
    max_abs_deviation_dd: Optional[float] = None
    cost_breakdown: Dict[str, float] = field(default_factory=dict)
    deviation_distribution: Dict[str, list] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return asdict(self)


def build_report(record) -> Tuple[MetricsReport, pd.DataFrame]:
    """Metrics of a run with DI and BI phases, plus the deviation table for export."""
    plant = record.plant
    bi, di = record.bi_realized, record.di_realized
    offers = record.offers
    capacity = effective_capacity(offers.p_mag, offers.direction, bi["netload"], di["netload"])
    match_di = matching_degree(di["p_load"], di["p_re"])
    match_bi = matching_degree(bi["p_load"], bi["p_re"])
    capacities = {u: plant.core_capacity(u) for u in CORE_UNITS}

    di_core, bi_core = core_trajectory(di), core_trajectory(bi)
    stats = deviation_stats(di_core, bi_core, capacities)
    frames = [stats.to_frame("di")]
    dd_stats = None
    if record.dd is not None and record.bd is not None:
        dd_stats = deviation_stats(record.dd.core(), record.bd.core(), capacities)
        frames.insert(0, dd_stats.to_frame("dd"))

    report = MetricsReport(
        avg_effective_capacity=capacity.average,
        effective_capacity_empty=capacity.empty,
        recovery_ramp=recovery_ramp(di["netload"]),
        matching_degree=match_di.value,
        matching_degree_bi=match_bi.value,
        matching_degree_degenerate=match_di.degenerate,
        nri={u: nri(di_core[u], capacities[u]) for u in CORE_UNITS},
        deviation_rate=stats.rate,
        max_abs_deviation=stats.max_abs(),
        deviation_rate_dd=dd_stats.rate if dd_stats else None,
        max_abs_deviation_dd=dd_stats.max_abs() if dd_stats else None,
        cost_breakdown=dict(record.costs.get("di", {})),
        deviation_distribution={u: [float(x) for x in v] for u, v in stats.distribution.items()},
    )
    return report, pd.concat(frames, ignore_index=True)
