"""Electric arc furnace operating feasible region.

The region is the convex polytope

    Gamma = {z | A_eq z = b_eq, z_min <= z <= z_max},   z = [x_HDRI, x_CDRI, x_SCRAP, P_EAF]

where x_i are charged sensible heats and P_EAF is the electric energy per heat.
Row 0 of A_eq is the energy balance (psi_MT,i with -1 on P_EAF), row 1 the
metallic mass balance (psi_MI,i with 0 on P_EAF). P_EAF is in MWh and steel in
tonnes; x_i are in the heat-equivalent units fixed by c_p,i and the psi
coefficients.
"""
import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from steelflex.errors import (
    EafRegionError,
    EmptyRegionError,
    InfeasibleBoundsError,
    InputFileError,
    SingularCoefficientError,
)

logger = logging.getLogger(__name__)

MATERIALS = ("HDRI", "CDRI", "SCRAP")
P_EAF_INDEX = 3
MEMBERSHIP_TOL = 1e-6
BOUND_SLACK_TOL = 1e-9
MEASURED_CDRI_KWH_PER_T = 590.0


def material_index(material: str) -> int:
    try:
        return MATERIALS.index(material.upper())
    except ValueError:
        raise EafRegionError(f"Unknown EAF material: {material}", material=material) from None


@dataclass(frozen=True)
class EafMaterialSpec:
    """Thermal description of one charge material (x_i = c_p,i * M_i * dT_i)."""

    material_id: str
    specific_heat: float
    delta_temperature: float

    def __post_init__(self):
        material_index(self.material_id)
        if self.specific_heat <= 0:
            raise EafRegionError(f"specific_heat must be positive for {self.material_id}")
        if self.delta_temperature < 0:
            raise EafRegionError(f"delta_temperature must be nonnegative for {self.material_id}")

    @property
    def heat_per_tonne(self) -> float:
        return self.specific_heat * self.delta_temperature

    def sensible_heat(self, mass: float) -> float:
        return self.heat_per_tonne * mass

    def mass(self, sensible_heat: float) -> float:
        """Charged mass recovered from a sensible-heat state component."""
        if self.heat_per_tonne == 0:
            raise SingularCoefficientError(
                f"Cannot recover {self.material_id} mass with zero c_p*dT", material=self.material_id
            )
        return sensible_heat / self.heat_per_tonne


@dataclass(frozen=True)
class EafState:
    x: Tuple[float, float, float]
    p_eaf: float

    def as_vector(self) -> np.ndarray:
        return np.array([*self.x, self.p_eaf], dtype=float)

    @classmethod
    def from_vector(cls, z: Sequence[float]) -> "EafState":
        z = np.asarray(z, dtype=float)
        return cls(x=(float(z[0]), float(z[1]), float(z[2])), p_eaf=float(z[3]))


@dataclass(frozen=True)
class EafPolytope:
    """H-representation of the EAF region. Immutable once built."""

    a_eq: np.ndarray
    b_eq: np.ndarray
    z_min: np.ndarray
    z_max: np.ndarray

    def __post_init__(self):
        for name, shape in (("a_eq", (2, 4)), ("b_eq", (2,)), ("z_min", (4,)), ("z_max", (4,))):
            value = np.array(getattr(self, name), dtype=float)
            if value.shape != shape:
                raise EafRegionError(f"{name} must have shape {shape}, got {value.shape}")
            value.setflags(write=False)
            object.__setattr__(self, name, value)

        if self.a_eq[0, P_EAF_INDEX] != -1.0:
            raise EafRegionError("Energy-balance row must carry exactly -1 on P_EAF")
        if self.a_eq[1, P_EAF_INDEX] != 0.0:
            raise EafRegionError("Mass-balance row must carry exactly 0 on P_EAF")
        if np.any(self.a_eq[:, :P_EAF_INDEX] <= 0):
            raise EafRegionError("All psi_MT,i and psi_MI,i coefficients must be positive")
        if np.any(self.z_min > self.z_max):
            raise EafRegionError("z_min must not exceed z_max componentwise")

    @property
    def psi_mt(self) -> np.ndarray:
        return self.a_eq[0, :P_EAF_INDEX]

    @property
    def psi_mi(self) -> np.ndarray:
        return self.a_eq[1, :P_EAF_INDEX]

    @property
    def steel_target(self) -> float:
        return float(self.b_eq[1])

    def with_target(self, steel_target: float) -> "EafPolytope":
        """Same bounds, different per-heat steel output."""
        return EafPolytope(self.a_eq, np.array([self.b_eq[0], steel_target]), self.z_min, self.z_max)

    def scaled(self, factor: float) -> "EafPolytope":
        """Region for `factor` times the steel target, bounds scaled alike."""
        if factor < 0:
            raise EafRegionError("Scale factor must be nonnegative")
        return EafPolytope(self.a_eq, self.b_eq * factor, self.z_min * factor, self.z_max * factor)

    def intensity(self, material: str) -> float:
        """Electric energy per tonne of steel when charging only `material` (MWh/t)."""
        i = material_index(material)
        return float(self.psi_mt[i] / self.psi_mi[i])

    def to_dict(self) -> Dict[str, List]:
        return {
            "a_eq": self.a_eq.tolist(),
            "b_eq": self.b_eq.tolist(),
            "z_min": self.z_min.tolist(),
            "z_max": self.z_max.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "EafPolytope":
        try:
            return cls(data["a_eq"], data["b_eq"], data["z_min"], data["z_max"])
        except KeyError as e:
            raise EafRegionError(f"EAF region document is missing {e}") from None

    @classmethod
    def load(cls, path: Union[str, Path]) -> "EafPolytope":
        path = Path(path)
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError:
            raise InputFileError(f"EAF region file not found: {path}", path=str(path)) from None
        except json.JSONDecodeError as e:
            raise EafRegionError(f"Failed to parse EAF region file {path}: {e}", path=str(path)) from None
        logger.debug(f"Loaded EAF region from {path}")
        return cls.from_dict(data)

    def save(self, path: Union[str, Path]):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)


@dataclass(frozen=True)
class CarbonBalanceCoefficients:
    psi_c_carbon: float = 0.0
    psi_c_lime: float = 0.0
    psi_c_scrap: float = 0.0
    psi_carbon_per_steel: float = 0.0
    psi_lime_per_steel: float = 0.0

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) < 0:
                raise EafRegionError(f"Carbon-balance coefficient {name} must be nonnegative")


@dataclass(frozen=True)
class CarbonFlows:
    carbon_powder: float
    lime: float
    co2: float


@dataclass(frozen=True)
class MembershipResult:
    member: bool
    residuals: np.ndarray
    min_bound_slack: float

    def __bool__(self):
        return self.member


@dataclass(frozen=True)
class PowerRange:
    p_min: float
    p_max: float
    witness_min: EafState
    witness_max: EafState
    vertices: np.ndarray = field(repr=False, default=None)


def _bound_tol(value: float) -> float:
    return BOUND_SLACK_TOL * max(1.0, abs(value))


def solve_single_material(polytope: EafPolytope, material: str, steel_target: float) -> EafState:
    """Unique region point that charges only `material` for `steel_target` tonnes."""
    if steel_target <= 0:
        raise EafRegionError("steel_target must be positive", steel_target=steel_target)
    i = material_index(material)
    psi_mi = polytope.psi_mi[i]
    if psi_mi == 0:
        raise SingularCoefficientError(f"psi_MI for {material} is zero", material=material)

    z = np.zeros(4)
    z[i] = steel_target / psi_mi
    z[P_EAF_INDEX] = polytope.psi_mt[i] * z[i]

    for j, (lo, hi) in enumerate(zip(polytope.z_min, polytope.z_max)):
        if z[j] < lo - _bound_tol(lo) or z[j] > hi + _bound_tol(hi):
            raise InfeasibleBoundsError(
                f"{material}-only solution violates bound on component {j}: {z[j]:.6g} not in [{lo}, {hi}]",
                material=material,
                component=j,
            )
    return EafState.from_vector(z)


def membership(polytope: EafPolytope, z: Union[EafState, Sequence[float]]) -> MembershipResult:
    """Test z against both balances and the box; residuals are always returned."""
    vec = z.as_vector() if isinstance(z, EafState) else np.asarray(z, dtype=float)
    if vec.shape != (4,):
        return MembershipResult(False, np.full(2, np.inf), -np.inf)

    row_scale = np.max(np.abs(polytope.a_eq), axis=1)
    residuals = np.abs(polytope.a_eq @ vec - polytope.b_eq) / row_scale
    slack = np.minimum(vec - polytope.z_min, polytope.z_max - vec)
    min_slack = float(np.min(slack))
    member = bool(np.all(residuals <= MEMBERSHIP_TOL) and min_slack >= -BOUND_SLACK_TOL)
    return MembershipResult(member, residuals, min_slack)


def vertices(polytope: EafPolytope, steel_target: Optional[float] = None) -> np.ndarray:
    """Vertices of the two-dimensional affine slice, by enumerating active box bounds.

    Two of the four components sit on a bound; the equalities fix the other two.
    """
    if steel_target is not None:
        polytope = polytope.with_target(steel_target)
    a, b = polytope.a_eq, polytope.b_eq
    found: List[np.ndarray] = []

    for fixed in itertools.combinations(range(4), 2):
        free = [j for j in range(4) if j not in fixed]
        basis = a[:, free]
        if abs(np.linalg.det(basis)) < 1e-14:
            continue
        for sides in itertools.product((0, 1), repeat=2):
            z = np.zeros(4)
            for j, side in zip(fixed, sides):
                z[j] = polytope.z_max[j] if side else polytope.z_min[j]
            z[free] = np.linalg.solve(basis, b - a[:, list(fixed)] @ z[list(fixed)])
            if membership(polytope, z):
                if not any(np.allclose(z, v, rtol=1e-9, atol=1e-9) for v in found):
                    found.append(z)
    return np.array(found).reshape(-1, 4)


def min_max_power(polytope: EafPolytope, steel_target: float) -> PowerRange:
    """Extreme EAF electricity over the region for a given steel output.

    The LP optimum of a linear objective is attained at a vertex, so both
    extremes come from the enumerated vertex set.
    """
    if steel_target == 0 and np.all(polytope.z_min <= 0) and np.all(polytope.z_max >= 0):
        zero = EafState.from_vector(np.zeros(4))
        return PowerRange(0.0, 0.0, zero, zero, np.zeros((1, 4)))

    verts = vertices(polytope, steel_target)
    if len(verts) == 0:
        raise EmptyRegionError(
            f"EAF region is empty for steel target {steel_target}", steel_target=steel_target
        )
    powers = verts[:, P_EAF_INDEX]
    lo, hi = int(np.argmin(powers)), int(np.argmax(powers))
    return PowerRange(
        float(powers[lo]),
        float(powers[hi]),
        EafState.from_vector(verts[lo]),
        EafState.from_vector(verts[hi]),
        verts,
    )


def sample_members(
    polytope: EafPolytope, n: int, seed: int = 0, steel_target: Optional[float] = None
) -> np.ndarray:
    """Random region points drawn as Dirichlet-weighted vertex combinations."""
    verts = vertices(polytope, steel_target)
    if len(verts) == 0:
        raise EmptyRegionError("Cannot sample an empty EAF region")
    rng = np.random.default_rng(seed)
    weights = rng.dirichlet(np.ones(len(verts)), size=n)
    return weights @ verts


def carbon_flows(coeffs: CarbonBalanceCoefficients, steel_out: float, scrap_in: float) -> CarbonFlows:
    """Auxiliary carbon powder, lime and resulting CO2 for one period."""
    if steel_out < 0 or scrap_in < 0:
        raise EafRegionError("steel_out and scrap_in must be nonnegative")
    carbon = coeffs.psi_carbon_per_steel * steel_out
    lime = coeffs.psi_lime_per_steel * steel_out
    co2 = coeffs.psi_c_carbon * carbon + coeffs.psi_c_lime * lime + coeffs.psi_c_scrap * scrap_in
    return CarbonFlows(carbon, lime, co2)


def calibration_report(polytope: EafPolytope, measured_kwh_per_t: float = MEASURED_CDRI_KWH_PER_T) -> Dict[str, float]:
    """CDRI-only electricity intensity against a measured plant value."""
    predicted = polytope.intensity("CDRI") * 1000.0
    return {
        "predicted_kwh_per_t": predicted,
        "measured_kwh_per_t": measured_kwh_per_t,
        "relative_error": (measured_kwh_per_t - predicted) / measured_kwh_per_t,
    }
