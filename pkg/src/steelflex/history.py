"""Perfect-information SoC trajectories for the reference library.

Each history scenario is scheduled once with full knowledge of its own
exogenous series (a BD solve). The normalized levels of the tracked
storages become that scenario's SoC trajectories. Results are cached by the
hash of the plant document, the scenario and the solver backend.
"""
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from steelflex.config import PlantConfig, SolverSettings, cache_settings
from steelflex.errors import LengthMismatchError
from steelflex.references import HistoryLibrary
from steelflex.scenario import ExogenousScenario
from steelflex.scheduler import Mode, ProblemSpec, build_bd
from steelflex.solve_cache import SolveCache, cache_key
from steelflex.solver import solve

logger = logging.getLogger(__name__)


def tracked_storages(plant: PlantConfig) -> List[str]:
    configured = set(plant.storage_ids)
    return [s.value for s in plant.tracking.storages if s.value in configured]


def perfect_information_soc(
    plant: PlantConfig, scenario: ExogenousScenario, settings: Optional[SolverSettings] = None
) -> Dict[str, np.ndarray]:
    """Normalized level trajectories E/E_max of the tracked storages under a BD solve of ``scenario``."""
    if len(scenario) != plant.horizon.periods:
        raise LengthMismatchError(
            f"History scenario {scenario.name} has {len(scenario)} periods, plant horizon is {plant.horizon.periods}"
        )
    solution = solve(build_bd(ProblemSpec(Mode.BD, plant, scenario)), settings)
    return {s: solution.column(f"{s}_level") / plant.storage(s).e_max for s in tracked_storages(plant)}


def build_library(
    plant: PlantConfig,
    scenarios: Sequence[ExogenousScenario],
    settings: Optional[SolverSettings] = None,
    cache: Optional[SolveCache] = None,
) -> HistoryLibrary:
    """Solve (or fetch from cache) every history scenario and assemble the library."""
    settings = settings or SolverSettings()
    plant_json = plant.model_dump_json()
    trajectories: Dict[str, List[np.ndarray]] = {s: [] for s in tracked_storages(plant)}
    for scenario in scenarios:
        key = cache_key(plant_json, scenario.frame.to_csv(index=False), settings.name)
        soc = cache.get(key) if cache is not None else None
        if soc is None:
            logger.info(f"Solving perfect-information schedule for history scenario {scenario.name}")
            soc = {s: v.tolist() for s, v in perfect_information_soc(plant, scenario, settings).items()}
            if cache is not None:
                cache.set(key, soc)
        else:
            logger.debug(f"Using cached trajectories for {scenario.name}")
        for s in trajectories:
            trajectories[s].append(np.asarray(soc[s], dtype=float))
    return HistoryLibrary.from_scenarios(
        scenarios,
        {s: np.vstack(v) for s, v in trajectories.items()},
        bandwidths=plant.tracking.bandwidths,
    )


def default_cache() -> SolveCache:
    cache_dir, ttl_days = cache_settings()
    return SolveCache(str(Path(cache_dir) / "perfect_information.json"), ttl_days=ttl_days)
