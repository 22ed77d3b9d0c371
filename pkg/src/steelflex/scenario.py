"""Exogenous time series: RES availability, prices and sale caps."""
import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd

from steelflex.errors import ConfigurationError, InputFileError, LengthMismatchError

logger = logging.getLogger(__name__)

SCENARIO_COLUMNS = ["t", "wind_mw", "solar_mw", "price_buy", "price_sell", "h2_demand_t", "heat_demand_mwh"]
VALUE_COLUMNS = SCENARIO_COLUMNS[1:]
NONNEGATIVE_COLUMNS = ("wind_mw", "solar_mw", "h2_demand_t", "heat_demand_mwh")

# Kernel feature q -> scenario column
FEATURES = {
    "wind": "wind_mw",
    "solar": "solar_mw",
    "buy_price": "price_buy",
    "sell_price": "price_sell",
    "hydrogen_load": "h2_demand_t",
    "thermal_load": "heat_demand_mwh",
}


class ExogenousScenario:
    """Validated, immutable view over a scenario frame indexed 0..T-1."""

    def __init__(self, frame: pd.DataFrame, name: str = "scenario"):
        missing = [c for c in SCENARIO_COLUMNS if c not in frame.columns]
        if missing:
            raise ConfigurationError(f"Scenario {name} is missing columns {missing}", scenario=name)
        frame = frame[SCENARIO_COLUMNS].copy()
        if frame[VALUE_COLUMNS].isna().any().any():
            raise ConfigurationError(f"Scenario {name} has empty cells", scenario=name)
        t = frame["t"].to_numpy()
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise ConfigurationError(f"Scenario {name}: column t must be strictly increasing", scenario=name)
        for column in NONNEGATIVE_COLUMNS:
            if (frame[column] < 0).any():
                raise ConfigurationError(f"Scenario {name}: column {column} has negative values", scenario=name)
        frame[VALUE_COLUMNS] = frame[VALUE_COLUMNS].astype(float)
        self.frame = frame.reset_index(drop=True)
        self.name = name

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ExogenousScenario":
        path = Path(path)
        try:
            frame = pd.read_csv(path)
        except FileNotFoundError:
            raise InputFileError(f"Scenario file not found: {path}", path=str(path)) from None
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise InputFileError(f"Cannot read scenario {path}: {e}", path=str(path)) from None
        logger.debug(f"Loaded scenario {path} with {len(frame)} periods")
        return cls(frame, name=path.stem)

    @classmethod
    def from_arrays(cls, name: str = "scenario", **columns) -> "ExogenousScenario":
        lengths = {len(v) for v in columns.values()}
        if len(lengths) != 1:
            raise LengthMismatchError("Scenario columns differ in length", lengths=sorted(lengths))
        n = lengths.pop()
        data = {"t": np.arange(n)}
        data.update({k: np.asarray(v, dtype=float) for k, v in columns.items()})
        return cls(pd.DataFrame(data), name=name)

    def __len__(self) -> int:
        return len(self.frame)

    def column(self, name: str) -> np.ndarray:
        return self.frame[name].to_numpy(dtype=float)

    @property
    def res(self) -> np.ndarray:
        """On-site renewable availability P_s + P_w, MW."""
        return self.column("wind_mw") + self.column("solar_mw")

    def window(self, start: int, stop: int) -> "ExogenousScenario":
        if not 0 <= start < stop <= len(self):
            raise LengthMismatchError(f"Window [{start}, {stop}) outside scenario of length {len(self)}")
        return ExogenousScenario(self.frame.iloc[start:stop], name=f"{self.name}[{start}:{stop}]")

    def with_values(self, values: Dict[str, np.ndarray], name: Optional[str] = None) -> "ExogenousScenario":
        frame = self.frame.copy()
        for column, series in values.items():
            frame[column] = np.asarray(series, dtype=float)
        return ExogenousScenario(frame, name=name or self.name)

    def features(self, stop: Optional[int] = None) -> Dict[str, np.ndarray]:
        """Kernel feature series, optionally truncated to the prefix [0, stop)."""
        return {q: self.column(c)[:stop] for q, c in FEATURES.items()}

    def to_csv(self, path: Union[str, Path]):
        self.frame.to_csv(path, index=False)


def load_history(directory: Union[str, Path]) -> List[ExogenousScenario]:
    """Every ``*.csv`` scenario in a history directory, sorted by file name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise InputFileError(f"History directory not found: {directory}", path=str(directory))
    scenarios = [ExogenousScenario.load(p) for p in sorted(directory.glob("*.csv"))]
    if not scenarios:
        raise InputFileError(f"No history scenarios in {directory}", path=str(directory))
    lengths = {len(s) for s in scenarios}
    if len(lengths) != 1:
        raise LengthMismatchError("History scenarios do not share a time grid", lengths=sorted(lengths))
    return scenarios
