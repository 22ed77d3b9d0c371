"""Kernel-weighted SoC references from a library of historical scenarios.

At period t the similarity of scenario s is the product over features q of

    exp(-||g_q[0..t] - g_q^s[0..t]||^2 / (2 * sigma_q^2 * (t + 1)))

and the reference level of storage n is the similarity-weighted mean of the
scenarios' perfect-information normalized levels.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from steelflex.errors import ConfigurationError, DegenerateKernelError, LengthMismatchError
from steelflex.scenario import FEATURES, ExogenousScenario

logger = logging.getLogger(__name__)

MIN_BANDWIDTH = 1e-6


@dataclass
class HistoryLibrary:
    """Historical feature series (S x T per feature) and SoC trajectories (S x T per storage)."""

    features: Dict[str, np.ndarray]
    soc: Dict[str, np.ndarray]
    bandwidths: Dict[str, float] = field(default_factory=dict)
    names: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.features = {q: np.atleast_2d(np.asarray(v, dtype=float)) for q, v in self.features.items()}
        self.soc = {n: np.atleast_2d(np.asarray(v, dtype=float)) for n, v in self.soc.items()}
        missing = [q for q in FEATURES if q not in self.features]
        if missing:
            raise ConfigurationError(f"History library lacks features {missing}")
        shapes = {v.shape for v in list(self.features.values()) + list(self.soc.values())}
        if len(shapes) != 1:
            raise LengthMismatchError("History scenarios do not share a time grid", shapes=sorted(shapes))
        bandwidths = {q: self._pooled_std(q) for q in self.features}
        bandwidths.update(self.bandwidths)
        bad = {q: s for q, s in bandwidths.items() if not s > 0}
        if bad:
            raise ConfigurationError(f"Kernel bandwidths must be positive: {bad}")
        self.bandwidths = bandwidths
        if not self.names:
            self.names = [f"s{i}" for i in range(self.size)]

    def _pooled_std(self, q: str) -> float:
        return max(float(np.std(self.features[q])), MIN_BANDWIDTH)

    @property
    def size(self) -> int:
        return next(iter(self.features.values())).shape[0]

    @property
    def periods(self) -> int:
        return next(iter(self.features.values())).shape[1]

    @classmethod
    def from_scenarios(
        cls,
        scenarios: Sequence[ExogenousScenario],
        soc: Mapping[str, Sequence[Sequence[float]]],
        bandwidths: Optional[Dict[str, float]] = None,
    ) -> "HistoryLibrary":
        features = {q: np.vstack([s.features()[q] for s in scenarios]) for q in FEATURES}
        return cls(
            features=features,
            soc={n: np.asarray(v, dtype=float) for n, v in soc.items()},
            bandwidths=dict(bandwidths or {}),
            names=[s.name for s in scenarios],
        )


@dataclass
class SocReference:
    weights: np.ndarray
    levels: Dict[str, float]
    degenerate: bool = False


def kernel_weights(
    library: HistoryLibrary, observed: Mapping[str, Sequence[float]], t: int, strict: bool = False
) -> Tuple[np.ndarray, bool]:
    """Normalized similarity weights of the library scenarios at period t.

    Returns:
        Tuple of the weight vector and whether the uniform fallback was used.
    """
    if not 0 <= t < library.periods:
        raise LengthMismatchError(f"Period {t} outside library grid of {library.periods}")
    kernel = np.ones(library.size)
    for q, series in library.features.items():
        prefix = np.asarray(observed[q], dtype=float)[: t + 1]
        if len(prefix) != t + 1:
            raise LengthMismatchError(f"Observed {q} has {len(prefix)} values, need {t + 1}")
        sq = np.sum((series[:, : t + 1] - prefix) ** 2, axis=1)
        kernel = kernel * np.exp(-sq / (2.0 * library.bandwidths[q] ** 2 * (t + 1)))

    total = float(np.sum(kernel))
    if total > 0:
        return kernel / total, False
    if strict:
        raise DegenerateKernelError(f"All kernel similarities underflow at t={t}", period=t)
    logger.warning(f"Degenerate kernel at t={t}; using uniform weights over {library.size} scenarios")
    return np.full(library.size, 1.0 / library.size), True


def soc_reference(
    library: HistoryLibrary,
    observed: Mapping[str, Sequence[float]],
    t: int,
    periods: Optional[Sequence[int]] = None,
    strict: bool = False,
) -> SocReference:
    """Reference normalized SoC per storage at period t.

    Args:
        library: Historical scenarios with perfect-information SoC trajectories.
        observed: Realized feature series, at least the prefix [0, t].
        t: Current period; weights use the observed prefix up to and including t.
        periods: When given, levels are arrays over these periods using the weights at t.
        strict: Raise DegenerateKernelError instead of falling back to uniform weights.
    """
    weights, degenerate = kernel_weights(library, observed, t, strict=strict)
    cols = [t] if periods is None else list(periods)
    levels = {}
    for n, traj in library.soc.items():
        blended = weights @ traj[:, cols]
        levels[n] = float(blended[0]) if periods is None else blended
    return SocReference(weights, levels, degenerate)
