"""Constraint-replay auditor.

Re-checks a decoded schedule against the plant balances with plain numpy,
independently of the model that produced it. Residuals are normalized by
the largest term of each row (floored at 1).
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from steelflex.errors import AuditError
from steelflex.process_units import lag_alpha
from steelflex.scheduler import remaining_sell_quota

logger = logging.getLogger(__name__)

AUDIT_TOL = 1e-6


@dataclass
class AuditReport:
    residuals: Dict[str, float] = field(default_factory=dict)
    tolerance: float = AUDIT_TOL

    @property
    def violations(self) -> List[str]:
        return sorted(k for k, v in self.residuals.items() if v > self.tolerance)

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def worst(self) -> float:
        return max(self.residuals.values(), default=0.0)


def _residual(lhs: List[np.ndarray], rhs: List[np.ndarray]) -> float:
    """Largest normalized |sum(lhs) - sum(rhs)| over periods."""
    terms = [np.asarray(x, dtype=float) for x in lhs + rhs]
    scale = np.maximum(1.0, np.max(np.abs(np.vstack(terms)), axis=0))
    diff = np.sum(lhs, axis=0) - np.sum(rhs, axis=0)
    return float(np.max(np.abs(diff) / scale))


def _over(values: np.ndarray, limit, scale: float = 1.0) -> float:
    """Largest normalized amount by which values exceed limit."""
    excess = np.asarray(values, dtype=float) - limit
    return float(max(0.0, np.max(excess)) / max(1.0, scale))


def replay(frame: pd.DataFrame, spec, peak: Optional[float] = None) -> AuditReport:
    """Residual of every replayed constraint family of ``spec`` on ``frame``.

    ``peak`` is the scalar peak-purchase variable; its row is skipped when omitted.
    """
    plant, state, dt = spec.plant, spec.initial_state, spec.dt
    col = lambda name: frame[name].to_numpy(dtype=float)
    zero = np.zeros(len(frame))
    flow = lambda s, kind: col(f"{s}_{kind}") if f"{s}_{kind}" in frame else zero
    report = AuditReport()
    r = report.residuals

    r["power_balance"] = _residual(
        [col("wind_mw"), col("solar_mw"), col("p_buy"), col("p_exp"), flow("BESS", "dis")],
        [col("p_sell"), col("p_eaf"), flow("BESS", "ch"), col("p_ae"), col("p_comp"), col("p_heh"),
         col("p_leh"), col("p_ccs"), col("p_curt")],
    )
    sf, msr = plant.shaft_furnace, plant.methanol
    r["hydrogen_balance"] = _residual(
        [plant.electrolyzer.psi_ae * col("p_ae"), flow("HT", "dis")],
        [sf.psi_h_dri * col("dri_p"), msr.stoichiometry.psi_h_metha * col("methanol"), col("hl_sell"), flow("HT", "ch")],
    )
    r["co2_balance"] = _residual(
        [col("co2_eaf"), flow("CST", "dis")],
        [msr.stoichiometry.psi_c_metha * col("methanol"), flow("CST", "ch"), col("co2_vent")],
    )
    heaters = plant.heaters
    r["heat_balance"] = _residual(
        [heaters.leh_efficiency * col("p_leh"), heaters.heh.psi_eh * col("heh_surplus"), flow("LTS", "dis")],
        [col("thl_load"), flow("LTS", "ch")],
    )

    # DRI routing and lags
    r["dri_routing"] = _residual([col("dri_p")], [col("hot_out"), col("silo_in")])
    hot_prev = np.concatenate([[state.pending_hot], col("hot_out")[:-1]])
    r["hot_charge_delay"] = _residual([col("hdri_charge")], [hot_prev])
    for name, unit, prev, qss, out in (
        ("sf_lag", sf, state.sf_qss, "sf_qss", "dri_p"),
        ("msr_lag", msr, state.msr_qss, "msr_qss", "methanol"),
    ):
        a = lag_alpha(unit, dt)
        q = col(qss)
        q_prev = np.concatenate([[prev], q[:-1]])
        r[name] = _residual([col(out)], [a * q_prev, (1 - a) * q])
        lo, hi = unit.ramp_bounds
        step = q - q_prev
        r[f"{name}_ramp"] = max(_over(step, hi, unit.max_discharge), _over(-step, -lo, unit.max_discharge))
        q_lo, q_hi = unit.qss_bounds
        r[f"{name.split('_')[0]}_bounds"] = max(_over(q, q_hi, unit.max_discharge), _over(-q, -q_lo, unit.max_discharge))

    # EAF region: both balances, then the box scaled to each period's steel output
    eaf = plant.eaf
    region = eaf.polytope()
    x = [col("x_hdri"), col("x_cdri"), col("x_scrap")]
    steel = col("eaf_steel")
    r["eaf_mass"] = _residual([c * xi for c, xi in zip(region.psi_mi, x)], [steel * dt])
    r["eaf_energy"] = _residual([c * xi for c, xi in zip(region.psi_mt, x)], [col("p_eaf") * dt])
    scale = steel * dt / region.steel_target
    box = []
    for j, value in enumerate(x + [col("p_eaf") * dt]):
        lo, hi = float(region.z_min[j]), float(region.z_max[j])
        norm = float(np.max(hi * scale, initial=1.0))
        box.append(_over(value, hi * scale, norm))
        if lo > 0:
            box.append(_over(-value, -lo * scale, norm))
    r["eaf_box"] = max(box)
    r["eaf_steel_bounds"] = max(_over(steel, eaf.steel_max, eaf.steel_max), _over(-steel, -eaf.steel_min, eaf.steel_max))

    # Electric unit limits
    ae = plant.electrolyzer
    p_ae = col("p_ae")
    r["ae_bounds"] = max(_over(p_ae, ae.p_max, ae.p_max), _over(-p_ae, -ae.p_min, ae.p_max))
    heaters_scale = max(1.0, heaters.leh_max)
    r["heater_bounds"] = max(
        _over(col("p_leh"), heaters.leh_max, heaters_scale),
        _over(-col("p_leh"), 0.0, heaters_scale),
        _over(-col("p_heh"), 0.0),
        _over(-col("heh_surplus"), 0.0),
    )

    # Storage dynamics and bounds
    for s in plant.storages:
        sid = s.storage_id.value
        if f"{sid}_level" not in frame:
            continue
        level = col(f"{sid}_level")
        prev = np.concatenate([[state.levels.get(sid, s.e_initial)], level[:-1]])
        ch, dis = col(f"{sid}_ch"), col(f"{sid}_dis")
        r[f"{sid}_dynamics"] = _residual([level], [prev, s.eta_ch * ch * dt, -dis / s.eta_dis * dt])
        r[f"{sid}_bounds"] = max(_over(level, s.e_max, s.e_max), _over(-level, -s.e_min, s.e_max))
        if spec.exclusivity:
            r[f"{sid}_exclusive"] = float(np.max(np.minimum(ch, dis)) / max(1.0, s.p_ch_max, s.p_dis_max))
        if sid == "CDRIS" and spec.ends_at_horizon:
            r["silo_terminal"] = abs(float(level[-1]) - 0.5 * s.e_max) / max(1.0, s.e_max)

    # Grid
    res = col("wind_mw") + col("solar_mw")
    r["curtailment_bound"] = _over(col("p_curt"), res, float(np.max(res, initial=1.0)))
    cap = plant.grid.capacity
    r["grid_bounds"] = max(_over(col("p_buy"), cap, cap), _over(col("p_sell"), cap, cap))
    if spec.exclusivity:
        r["grid_exclusive"] = float(np.max(np.minimum(col("p_buy"), col("p_sell"))) / max(1.0, cap))

    # Sales cap: whole-day share of RES, or the remaining quota inside a rolling window
    sold = float(np.sum(col("p_sell"))) * dt
    if spec.mode.rolling:
        quota = remaining_sell_quota(spec)
    else:
        quota = plant.grid.psi_sell * float(np.sum(res)) * dt
    r["sell_cap"] = _over(sold, quota, quota)

    if peak is not None:
        floor = min(spec.realized.peak, cap) if spec.mode.rolling else 0.0
        r["peak"] = max(_over(col("p_buy"), peak, cap), _over(floor, peak, cap))
    return report


def audit_schedule(
    frame: pd.DataFrame, spec, window: Optional[int] = None, tol: float = AUDIT_TOL, peak: Optional[float] = None
) -> AuditReport:
    """Replay the constraints and raise AuditError on any residual above ``tol``."""
    report = replay(frame, spec, peak=peak)
    report.tolerance = tol
    if not report.passed:
        worst = {k: report.residuals[k] for k in report.violations}
        raise AuditError(
            f"Schedule {spec.mode.value.upper()}@{spec.start} fails audit: {', '.join(report.violations)}",
            status="audit",
            window=window,
            residuals=worst,
        )
    logger.debug(f"Audit passed for {spec.mode.value.upper()}@{spec.start}, worst residual {report.worst:.2e}")
    return report
