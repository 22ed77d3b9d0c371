"""Compilation of the four scheduling problems into pyomo MILP models.

Every problem shares the plant block built by ``_build_plant``; the mode
builders add the core-unit lock, order, sell-cap, reference-tracking,
offer-shortfall, penalty and pacing pieces that distinguish them:

* BD  baseline day-ahead: lock, exact orders, full-horizon sell cap.
* BI  baseline intra-day window: lock, SoC tracking, realized peak, sell quota.
* DD  DR day-ahead: exact orders, sell cap, deviation penalty against BD.
* DI  DR intra-day window: tracking, shortfall, penalty against BI, pacing, sell quota.

Material flows are rates (t/h) and powers are MW; amounts per period are
rate times ``dt``.
"""
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pyomo.environ as pyo

from steelflex.config import ORDER_UNITS, PlantConfig
from steelflex.errors import ConfigurationError, InfeasibleOrderError
from steelflex.penalty import CORE_UNITS, PenaltyConfig, encode_penalty
from steelflex.process_units import StorageId, lag_alpha
from steelflex.scenario import ExogenousScenario

logger = logging.getLogger(__name__)

OFFER_SIGN_TOL = 1e-6
ENERGY_COST_UNITS = ("AE", "EAF", "HEH", "LEH", "COMP", "CCS")
MATERIAL_COST_UNITS = ("SF", "EAF", "MSR")


class Mode(str, Enum):
    BD = "bd"
    BI = "bi"
    DD = "dd"
    DI = "di"

    @property
    def rolling(self) -> bool:
        return self in (Mode.BI, Mode.DI)


@dataclass
class PlantState:
    """Unit states carried from one commitment to the next."""

    sf_qss: float
    msr_qss: float
    pending_hot: float
    levels: Dict[str, float] = field(default_factory=dict)

    @classmethod
    def initial(cls, plant: PlantConfig) -> "PlantState":
        return cls(
            sf_qss=plant.shaft_furnace.initial,
            msr_qss=plant.methanol.initial,
            pending_hot=plant.shaft_furnace.initial_pending_hot,
            levels={s.storage_id.value: s.e_initial for s in plant.storages},
        )


@dataclass(frozen=True)
class Offer:
    """Day-ahead DR offer: magnitude P_mag and direction d per period."""

    p_mag: np.ndarray
    direction: np.ndarray

    @property
    def p_offer(self) -> np.ndarray:
        return self.direction * self.p_mag

    @property
    def offered(self) -> np.ndarray:
        return self.p_mag > 0

    def window(self, start: int, stop: int) -> "Offer":
        return Offer(self.p_mag[start:stop], self.direction[start:stop])

    @classmethod
    def zeros(cls, periods: int) -> "Offer":
        return cls(np.zeros(periods), np.zeros(periods))


@dataclass
class RealizedContext:
    """What the rolling ledger has realized before the current window."""

    peak: float = 0.0
    sell_cum: float = 0.0
    res_cum: float = 0.0


@dataclass
class ProblemSpec:
    mode: Mode
    plant: PlantConfig
    scenario: ExogenousScenario
    start: int = 0
    initial_state: Optional[PlantState] = None
    reference: Optional[Dict[str, np.ndarray]] = None
    reference_netload: Optional[np.ndarray] = None
    soc_reference: Optional[Dict[str, np.ndarray]] = None
    offer: Optional[Offer] = None
    pacing: Optional[Dict[str, Tuple[float, float]]] = None
    realized: RealizedContext = field(default_factory=RealizedContext)
    penalty: Optional[PenaltyConfig] = None
    lock_core: Optional[bool] = None
    exclusivity: bool = True

    def __post_init__(self):
        self.mode = Mode(self.mode)
        if self.initial_state is None:
            self.initial_state = PlantState.initial(self.plant)
        if self.penalty is None:
            self.penalty = self.plant.penalty
        if self.lock_core is None:
            self.lock_core = self.mode in (Mode.BD, Mode.BI)

        if self.start + self.length > self.horizon:
            raise ConfigurationError(
                f"Window [{self.start}, {self.start + self.length}) exceeds horizon {self.horizon}"
            )
        if not self.mode.rolling and (self.start != 0 or self.length != self.horizon):
            raise ConfigurationError(f"{self.mode.value.upper()} is a full-horizon problem")
        if self.mode in (Mode.DD, Mode.DI):
            if self.reference is None:
                raise ConfigurationError(f"{self.mode.value.upper()} needs a baseline reference trajectory")
            missing = [u for u in CORE_UNITS if u not in self.reference]
            if missing:
                raise ConfigurationError(f"Baseline reference lacks core units {missing}")
        if self.mode == Mode.DI:
            if self.offer is None or self.reference_netload is None:
                raise ConfigurationError("DI needs the day-ahead offer and the BI net-load benchmark")
            if len(self.offer.p_mag) != self.length or len(self.reference_netload) != self.length:
                raise ConfigurationError("DI offer and benchmark must cover the window")
        elif self.offer is not None or self.pacing is not None:
            raise ConfigurationError("Offers and pacing bounds only apply to DI")

    @property
    def length(self) -> int:
        return len(self.scenario)

    @property
    def horizon(self) -> int:
        return self.plant.horizon.periods

    @property
    def dt(self) -> float:
        return self.plant.horizon.dt_hours

    @property
    def ends_at_horizon(self) -> bool:
        return self.start + self.length == self.horizon


@dataclass
class MilpModel:
    """A compiled pyomo model plus the named pieces of its objective."""

    model: pyo.ConcreteModel
    spec: ProblemSpec
    terms: Dict[str, object] = field(default_factory=dict)

    @property
    def weights(self) -> Dict[str, float]:
        p = self.spec.penalty
        return {
            "c_grid": 1.0,
            "c_op": 1.0,
            "r_sell": -1.0,
            "peak_cost": 1.0,
            "d_p": p.lambda_p,
            "d_rf": p.lambda_rf,
            "d_s": p.lambda_s,
        }

    @property
    def has_binaries(self) -> bool:
        return any(v.is_binary() for v in self.model.component_data_objects(pyo.Var, active=True))

    def write_lp(self, path: str):
        """Dump the model in LP format with symbolic variable names."""
        self.model.write(str(path), io_options={"symbolic_solver_labels": True})


def _storage_flow(m, storage: str, kind: str, t):
    if storage in m.storage_ids:
        return getattr(m, kind)[storage, t]
    return 0.0


def _build_plant(spec: ProblemSpec) -> MilpModel:
    plant, sc, state, dt = spec.plant, spec.scenario, spec.initial_state, spec.dt
    n = spec.length
    m = pyo.ConcreteModel(name=f"{spec.mode.value}_{spec.start}")
    m.T = pyo.RangeSet(0, n - 1)

    res = sc.res
    price_buy = sc.column("price_buy")
    price_sell = sc.column("price_sell")
    h2_cap = sc.column("h2_demand_t")
    heat_cap = sc.column("heat_demand_mwh")
    wind, solar = sc.column("wind_mw"), sc.column("solar_mw")
    cap = plant.grid.capacity

    # Grid trades
    m.p_buy = pyo.Var(m.T, bounds=(0, cap))
    m.p_sell = pyo.Var(m.T, bounds=(0, cap))
    m.p_curt = pyo.Var(m.T, bounds=lambda m, t: (0, res[t]))
    m.p_peak = pyo.Var(bounds=(0, cap))
    if spec.exclusivity:
        m.b_grid = pyo.Var(m.T, domain=pyo.Binary)
        m.sell_excl = pyo.Constraint(m.T, rule=lambda m, t: m.p_sell[t] <= cap * m.b_grid[t])
        m.buy_excl = pyo.Constraint(m.T, rule=lambda m, t: m.p_buy[t] <= cap * (1 - m.b_grid[t]))
    m.peak_def = pyo.Constraint(m.T, rule=lambda m, t: m.p_peak >= m.p_buy[t])
    if spec.mode.rolling and spec.realized.peak > 0:
        m.p_peak.setlb(min(spec.realized.peak, cap))

    # Core units
    ae = plant.electrolyzer
    sf, msr = plant.shaft_furnace, plant.methanol
    eaf = plant.eaf
    m.p_ae = pyo.Var(m.T, bounds=(ae.p_min, ae.p_max))
    m.sf_qss = pyo.Var(m.T, bounds=sf.qss_bounds)
    m.msr_qss = pyo.Var(m.T, bounds=msr.qss_bounds)
    m.eaf_steel = pyo.Var(m.T, bounds=(eaf.steel_min, eaf.steel_max))

    # Storage family
    m.storage_ids = pyo.Set(initialize=plant.storage_ids, ordered=True)
    params = {s.storage_id.value: s for s in plant.storages}
    m.ch = pyo.Var(m.storage_ids, m.T, bounds=lambda m, s, t: (0, params[s].p_ch_max))
    m.dis = pyo.Var(m.storage_ids, m.T, bounds=lambda m, s, t: (0, params[s].p_dis_max))
    m.level = pyo.Var(m.storage_ids, m.T, bounds=lambda m, s, t: (params[s].e_min, params[s].e_max))

    def level_rule(m, s, t):
        p = params[s]
        prev = state.levels.get(s, p.e_initial) if t == 0 else m.level[s, t - 1]
        return m.level[s, t] == prev + (p.eta_ch * m.ch[s, t] - m.dis[s, t] / p.eta_dis) * dt

    m.level_def = pyo.Constraint(m.storage_ids, m.T, rule=level_rule)
    if spec.exclusivity and plant.storages:
        m.u_ch = pyo.Var(m.storage_ids, m.T, domain=pyo.Binary)
        m.ch_excl = pyo.Constraint(
            m.storage_ids, m.T, rule=lambda m, s, t: m.ch[s, t] <= params[s].p_ch_max * m.u_ch[s, t]
        )
        m.dis_excl = pyo.Constraint(
            m.storage_ids, m.T, rule=lambda m, s, t: m.dis[s, t] <= params[s].p_dis_max * (1 - m.u_ch[s, t])
        )

    # Lagged outputs and ramps
    a_sf, a_msr = lag_alpha(sf, dt), lag_alpha(msr, dt)
    sf_prev = lambda m, t: state.sf_qss if t == 0 else m.sf_qss[t - 1]
    msr_prev = lambda m, t: state.msr_qss if t == 0 else m.msr_qss[t - 1]
    m.dri_p = pyo.Expression(m.T, rule=lambda m, t: a_sf * sf_prev(m, t) + (1 - a_sf) * m.sf_qss[t])
    m.methanol = pyo.Expression(m.T, rule=lambda m, t: a_msr * msr_prev(m, t) + (1 - a_msr) * m.msr_qss[t])
    sf_lo, sf_hi = sf.ramp_bounds
    msr_lo, msr_hi = msr.ramp_bounds
    m.sf_ramp = pyo.Constraint(m.T, rule=lambda m, t: (sf_lo, m.sf_qss[t] - sf_prev(m, t), sf_hi))
    m.msr_ramp = pyo.Constraint(m.T, rule=lambda m, t: (msr_lo, m.msr_qss[t] - msr_prev(m, t), msr_hi))

    # DRI routing: produced = hot + silo inflow, hot charge delayed one period
    has_silo = StorageId.CDRIS.value in params
    has_scrap_silo = StorageId.SCS.value in params
    m.hot_out = pyo.Var(m.T, bounds=(0, None))
    if not has_scrap_silo:
        m.scrap_supply = pyo.Var(m.T, bounds=(0, None))
    m.silo_in = pyo.Expression(m.T, rule=lambda m, t: _storage_flow(m, "CDRIS", "ch", t))
    m.cold_to_eaf = pyo.Expression(m.T, rule=lambda m, t: _storage_flow(m, "CDRIS", "dis", t))
    m.scrap = pyo.Expression(
        m.T, rule=lambda m, t: m.dis["ScS", t] if has_scrap_silo else m.scrap_supply[t]
    )
    m.hdri_charge = pyo.Expression(m.T, rule=lambda m, t: state.pending_hot if t == 0 else m.hot_out[t - 1])
    m.routing = pyo.Constraint(m.T, rule=lambda m, t: m.dri_p[t] == m.hot_out[t] + m.silo_in[t])
    if not has_silo:
        logger.debug("No CDRIS configured: all DRI is hot charged")

    # EAF region scaled to the period's steel output
    region = eaf.polytope()
    m_ref = region.steel_target
    if m_ref <= 0:
        raise ConfigurationError("EAF region b_eq[1] (reference heat mass) must be positive")
    heat = {mat: eaf.material_spec(mat).heat_per_tonne for mat in ("HDRI", "CDRI", "SCRAP")}
    m.x_hdri = pyo.Expression(m.T, rule=lambda m, t: heat["HDRI"] * m.hdri_charge[t] * dt)
    m.x_cdri = pyo.Expression(m.T, rule=lambda m, t: heat["CDRI"] * m.cold_to_eaf[t] * dt)
    m.x_scrap = pyo.Expression(m.T, rule=lambda m, t: heat["SCRAP"] * m.scrap[t] * dt)
    z = lambda m, t: (m.x_hdri[t], m.x_cdri[t], m.x_scrap[t])
    psi_mt, psi_mi = region.psi_mt, region.psi_mi
    m.p_eaf = pyo.Expression(m.T, rule=lambda m, t: sum(c * x for c, x in zip(psi_mt, z(m, t))) / dt)
    m.eaf_mass = pyo.Constraint(
        m.T, rule=lambda m, t: sum(c * x for c, x in zip(psi_mi, z(m, t))) == m.eaf_steel[t] * dt
    )
    scale = lambda m, t: m.eaf_steel[t] * dt / m_ref

    def box_rule(m, t, j):
        value = m.p_eaf[t] * dt if j == 3 else z(m, t)[j]
        lo, hi = float(region.z_min[j]), float(region.z_max[j])
        return (lo * scale(m, t) <= value) if lo > 0 else pyo.Constraint.Skip

    def box_upper(m, t, j):
        value = m.p_eaf[t] * dt if j == 3 else z(m, t)[j]
        return value <= float(region.z_max[j]) * scale(m, t)

    m.J = pyo.RangeSet(0, 3)
    m.eaf_box_lo = pyo.Constraint(m.T, m.J, rule=box_rule)
    m.eaf_box_hi = pyo.Constraint(m.T, m.J, rule=box_upper)

    # Carbon balance, capture and venting
    cb = eaf.carbon
    m.carbon_powder = pyo.Expression(m.T, rule=lambda m, t: cb.psi_carbon_per_steel * m.eaf_steel[t])
    m.lime = pyo.Expression(m.T, rule=lambda m, t: cb.psi_lime_per_steel * m.eaf_steel[t])
    m.co2_eaf = pyo.Expression(
        m.T,
        rule=lambda m, t: cb.psi_c_carbon * m.carbon_powder[t] + cb.psi_c_lime * m.lime[t] + cb.psi_c_scrap * m.scrap[t],
    )
    m.co2_vent = pyo.Var(m.T, bounds=(0, None))
    stoich = msr.stoichiometry
    m.co2_balance = pyo.Constraint(
        m.T,
        rule=lambda m, t: m.co2_eaf[t] + _storage_flow(m, "CST", "dis", t)
        == stoich.psi_c_metha * m.methanol[t] + _storage_flow(m, "CST", "ch", t) + m.co2_vent[t],
    )

    # Auxiliary electric loads
    aux, heaters = plant.auxiliary, plant.heaters
    heh = heaters.heh
    m.p_ccs = pyo.Expression(m.T, rule=lambda m, t: aux.psi_ccs * m.co2_eaf[t])
    m.p_comp = pyo.Expression(m.T, rule=lambda m, t: aux.psi_er_comp * m.p_ae[t] + aux.psi_ec_comp * m.dri_p[t])
    m.hl_sell = pyo.Var(m.T, bounds=lambda m, t: (0, h2_cap[t]))
    m.thl_load = pyo.Var(m.T, bounds=lambda m, t: (0, heat_cap[t]))
    m.p_exp = pyo.Expression(
        m.T, rule=lambda m, t: (sf.psi_h_dri * m.dri_p[t] + m.hl_sell[t]) * aux.psi_e_exp
    )
    m.p_heh = pyo.Var(m.T, bounds=(0, None))
    m.heh_surplus = pyo.Var(m.T, bounds=(0, None))
    m.heh_balance = pyo.Constraint(
        m.T,
        rule=lambda m, t: m.p_heh[t] - m.heh_surplus[t]
        == heh.psi_tth * m.dri_p[t] - heh.psi_th_re * (heh.psi_ftg * m.dri_p[t] + heh.psi_whb * m.silo_in[t]) / heh.psi_eh,
    )
    m.p_leh = pyo.Var(m.T, bounds=(0, heaters.leh_max))

    # Carrier balances
    m.power_balance = pyo.Constraint(
        m.T,
        rule=lambda m, t: wind[t] + solar[t] + m.p_buy[t] + m.p_exp[t] + _storage_flow(m, "BESS", "dis", t)
        == m.p_sell[t] + m.p_eaf[t] + _storage_flow(m, "BESS", "ch", t) + m.p_ae[t] + m.p_comp[t]
        + m.p_heh[t] + m.p_leh[t] + m.p_ccs[t] + m.p_curt[t],
    )
    m.h2_balance = pyo.Constraint(
        m.T,
        rule=lambda m, t: ae.psi_ae * m.p_ae[t] + _storage_flow(m, "HT", "dis", t)
        == sf.psi_h_dri * m.dri_p[t] + stoich.psi_h_metha * m.methanol[t] + m.hl_sell[t] + _storage_flow(m, "HT", "ch", t),
    )
    m.heat_balance = pyo.Constraint(
        m.T,
        rule=lambda m, t: heaters.leh_efficiency * m.p_leh[t] + heh.psi_eh * m.heh_surplus[t]
        + _storage_flow(m, "LTS", "dis", t)
        == m.thl_load[t] + _storage_flow(m, "LTS", "ch", t),
    )

    # Silo boundary condition applies whenever the model reaches the horizon end
    if has_silo and spec.ends_at_horizon:
        silo = params["CDRIS"]
        m.silo_terminal = pyo.Constraint(expr=m.level["CDRIS", n - 1] == 0.5 * silo.e_max)

    # Objective pieces
    energy_cost = plant.costs.energy
    material_cost = plant.costs.material
    prices = plant.prices
    electric = {
        "AE": m.p_ae, "EAF": m.p_eaf, "HEH": m.p_heh, "LEH": m.p_leh, "COMP": m.p_comp, "CCS": m.p_ccs,
    }
    material = {"SF": m.dri_p, "EAF": m.eaf_steel, "MSR": m.methanol}
    m.core = {"AE": m.p_ae, "SF": m.sf_qss, "EAF": m.eaf_steel, "MSR": m.msr_qss}

    terms = {
        "c_grid": sum((price_buy[t] * m.p_buy[t] + prices.rho_curt * m.p_curt[t]) * dt for t in m.T),
        "c_op": sum(
            (
                sum(energy_cost.get(u, 0.0) * electric[u][t] for u in ENERGY_COST_UNITS)
                + sum(material_cost.get(u, 0.0) * material[u][t] for u in MATERIAL_COST_UNITS)
                + prices.rho_vent * m.co2_vent[t]
            )
            * dt
            for t in m.T
        ),
        "r_sell": sum(
            (price_sell[t] * m.p_sell[t] + prices.rho_thl * m.thl_load[t] + prices.rho_hl * m.hl_sell[t]) * dt
            for t in m.T
        ),
        "peak_cost": prices.rho_peak * m.p_peak,
        "d_p": 0.0,
        "d_rf": 0.0,
        "d_s": 0.0,
    }
    return MilpModel(m, spec, terms)


def production_expr(m, unit: str, t):
    """Per-period production rate of an order unit."""
    if unit == "SF":
        return m.dri_p[t]
    if unit == "EAF":
        return m.eaf_steel[t]
    raise ConfigurationError(f"{unit} is not an order unit")


def _check_order_capacity(spec: ProblemSpec):
    plant = spec.plant
    dt = spec.dt
    lows = {"SF": plant.shaft_furnace.qss_bounds[0] * dt, "EAF": plant.eaf.steel_min * dt}
    for unit, order in plant.orders.items():
        upper = spec.length * plant.max_step_output(unit)
        lower = spec.length * lows[unit]
        if order > upper * (1 + 1e-9):
            raise InfeasibleOrderError(
                f"{unit} order {order:.6g} t exceeds horizon capacity {upper:.6g} t", unit=unit, order=order
            )
        if order < lower * (1 - 1e-9):
            raise InfeasibleOrderError(
                f"{unit} order {order:.6g} t is below minimum horizon output {lower:.6g} t", unit=unit, order=order
            )


def _add_core_lock(milp: MilpModel):
    m, plant = milp.model, milp.spec.plant
    base = {u: plant.core_baseline(u) for u in CORE_UNITS}
    m.core_lock = pyo.Constraint(CORE_UNITS, m.T, rule=lambda m, u, t: m.core[u][t] == base[u])


def _add_orders(milp: MilpModel):
    m, spec = milp.model, milp.spec
    orders = spec.plant.orders
    if not orders:
        logger.warning("No production orders configured")
        return
    m.order_def = pyo.Constraint(
        list(orders),
        rule=lambda m, v: sum(production_expr(m, v, t) for t in m.T) * spec.dt == orders[v],
    )


def _add_full_sell_cap(milp: MilpModel):
    m, spec = milp.model, milp.spec
    res = spec.scenario.res
    m.sell_cap = pyo.Constraint(
        expr=sum(m.p_sell[t] for t in m.T) <= spec.plant.grid.psi_sell * float(res.sum())
    )


def remaining_sell_quota(spec: ProblemSpec) -> float:
    """max(0, psi_sell * (realized + window RES energy) - realized sales energy)."""
    window_res = float(spec.scenario.res.sum()) * spec.dt
    quota = spec.plant.grid.psi_sell * (spec.realized.res_cum + window_res) - spec.realized.sell_cum
    return max(0.0, quota)


def _add_sell_quota(milp: MilpModel):
    m, spec = milp.model, milp.spec
    m.sell_quota = pyo.Constraint(expr=sum(m.p_sell[t] for t in m.T) * spec.dt <= remaining_sell_quota(spec))


def _add_tracking(milp: MilpModel):
    m, spec = milp.model, milp.spec
    if spec.soc_reference is None or spec.penalty.lambda_rf == 0:
        return
    tracked = [
        s.value for s in spec.plant.tracking.storages
        if s.value in m.storage_ids and s.value in spec.soc_reference
    ]
    if not tracked:
        return
    e_max = {s: spec.plant.storage(s).e_max for s in tracked}
    ref = spec.soc_reference
    m.tracked = pyo.Set(initialize=tracked, ordered=True)
    m.soc_up = pyo.Var(m.tracked, m.T, bounds=(0, None))
    m.soc_down = pyo.Var(m.tracked, m.T, bounds=(0, None))
    m.soc_split = pyo.Constraint(
        m.tracked,
        m.T,
        rule=lambda m, s, t: m.level[s, t] / e_max[s] - float(ref[s][t]) == m.soc_up[s, t] - m.soc_down[s, t],
    )
    milp.terms["d_rf"] = sum(m.soc_up[s, t] + m.soc_down[s, t] for s in m.tracked for t in m.T)


def _add_penalty(milp: MilpModel):
    m, spec = milp.model, milp.spec
    if spec.penalty.lambda_p == 0:
        return
    plant, ref = spec.plant, spec.reference
    total = 0.0
    for unit in CORE_UNITS:
        psi_max = plant.core_capacity(unit)
        deviation = lambda t, u=unit, c=psi_max: (m.core[u][t] - float(ref[u][t])) / c
        total = total + encode_penalty(m, spec.penalty, unit, list(m.T), deviation)
    milp.terms["d_p"] = total


def _add_shortfall(milp: MilpModel):
    m, spec = milp.model, milp.spec
    if spec.penalty.lambda_s == 0:
        return
    offer, nl_ref = spec.offer, spec.reference_netload
    m.shortfall = pyo.Var(m.T, bounds=(0, None))
    m.shortfall_def = pyo.Constraint(
        m.T,
        rule=lambda m, t: m.shortfall[t]
        >= float(offer.p_mag[t]) - float(offer.direction[t]) * (float(nl_ref[t]) - (m.p_buy[t] - m.p_sell[t])),
    )
    milp.terms["d_s"] = sum(m.shortfall[t] for t in m.T)


def _add_pacing(milp: MilpModel):
    m, spec = milp.model, milp.spec
    if not spec.pacing:
        return
    bounds = spec.pacing
    m.pacing = pyo.Constraint(
        list(bounds),
        rule=lambda m, v: (bounds[v][0], sum(production_expr(m, v, t) for t in m.T) * spec.dt, bounds[v][1]),
    )


def _finish(milp: MilpModel) -> MilpModel:
    m = milp.model
    weights = milp.weights
    m.objective = pyo.Objective(
        expr=sum(weights[k] * v for k, v in milp.terms.items() if weights[k] != 0), sense=pyo.minimize
    )
    logger.debug(
        f"Built {milp.spec.mode.value.upper()} model at t={milp.spec.start} with "
        f"{m.nvariables()} variables and {m.nconstraints()} constraints"
    )
    return milp


def _expect(spec: ProblemSpec, mode: Mode):
    if spec.mode != mode:
        raise ConfigurationError(f"Expected a {mode.value.upper()} problem, got {spec.mode.value.upper()}")


def build_bd(spec: ProblemSpec) -> MilpModel:
    """Baseline day-ahead schedule with core units held at their baseline states."""
    _expect(spec, Mode.BD)
    _check_order_capacity(spec)
    milp = _build_plant(spec)
    if spec.lock_core:
        _add_core_lock(milp)
    _add_full_sell_cap(milp)
    _add_orders(milp)
    return _finish(milp)


def build_bi(spec: ProblemSpec, soc_reference: Optional[Dict[str, np.ndarray]] = None) -> MilpModel:
    """One rolling window of the baseline intra-day MPC."""
    _expect(spec, Mode.BI)
    if soc_reference is not None:
        spec = replace(spec, soc_reference=soc_reference)
    milp = _build_plant(spec)
    if spec.lock_core:
        _add_core_lock(milp)
    _add_sell_quota(milp)
    _add_tracking(milp)
    return _finish(milp)


def build_dd(spec: ProblemSpec) -> MilpModel:
    """DR day-ahead schedule: units free to deviate from BD at a penalty."""
    _expect(spec, Mode.DD)
    _check_order_capacity(spec)
    milp = _build_plant(spec)
    if spec.lock_core:
        _add_core_lock(milp)
    _add_full_sell_cap(milp)
    _add_orders(milp)
    _add_penalty(milp)
    return _finish(milp)


def build_di(spec: ProblemSpec) -> MilpModel:
    """One rolling window of DR intra-day delivery against the BI benchmark."""
    _expect(spec, Mode.DI)
    milp = _build_plant(spec)
    if spec.lock_core:
        _add_core_lock(milp)
    _add_sell_quota(milp)
    _add_tracking(milp)
    _add_penalty(milp)
    _add_shortfall(milp)
    _add_pacing(milp)
    return _finish(milp)


BUILDERS: Dict[Mode, Callable[[ProblemSpec], MilpModel]] = {
    Mode.BD: build_bd,
    Mode.BI: build_bi,
    Mode.DD: build_dd,
    Mode.DI: build_di,
}


def build(spec: ProblemSpec) -> MilpModel:
    return BUILDERS[spec.mode](spec)


def build_offers(netload_base: np.ndarray, netload_dr: np.ndarray) -> Offer:
    """Day-ahead offer from baseline and DR net loads: B = base - dr, P_mag = |B|, d = sign(B).

    Periods with |B| below the sign tolerance carry no offer.
    """
    netload_base = np.asarray(netload_base, dtype=float)
    netload_dr = np.asarray(netload_dr, dtype=float)
    if netload_base.shape != netload_dr.shape:
        raise ConfigurationError("Net-load series differ in length")
    b = netload_base - netload_dr
    offered = np.abs(b) > OFFER_SIGN_TOL
    p_mag = np.where(offered, np.abs(b), 0.0)
    direction = np.where(offered, np.sign(b), 0.0)
    return Offer(p_mag, direction)


def core_trajectory(values: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
    """Subset of a column mapping holding the core-unit states."""
    columns = {"AE": "p_ae", "SF": "sf_qss", "EAF": "eaf_steel", "MSR": "msr_qss"}
    return {u: np.asarray(values[c], dtype=float) for u, c in columns.items()}


ORDER_COLUMNS = {"SF": "dri_p", "EAF": "eaf_steel"}
