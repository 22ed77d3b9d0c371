import numpy as np
import pytest

from steelflex.errors import ConfigurationError, DegenerateKernelError, LengthMismatchError
from steelflex.references import HistoryLibrary, kernel_weights, soc_reference
from steelflex.scenario import FEATURES


def library(feature_rows, soc_rows, bandwidth=None):
    features = {q: np.asarray(feature_rows, dtype=float) for q in FEATURES}
    bandwidths = {q: bandwidth for q in FEATURES} if bandwidth else {}
    return HistoryLibrary(features=features, soc={"BESS": soc_rows}, bandwidths=bandwidths)


def observed(series):
    return {q: np.asarray(series, dtype=float) for q in FEATURES}


def test_single_scenario_reference_is_its_trajectory():
    lib = library([[1.0, 2.0, 3.0]], [[0.2, 0.4, 0.6]])
    for t in range(3):
        ref = soc_reference(lib, observed([9.0, 9.0, 9.0]), t)
        assert ref.weights.tolist() == [1.0]
        assert ref.levels["BESS"] == pytest.approx([0.2, 0.4, 0.6][t])


def test_identical_scenarios_share_weight():
    lib = library([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]], [[0.1, 0.1, 0.1], [0.5, 0.5, 0.5]])
    ref = soc_reference(lib, observed([0.0, 5.0, 1.0]), 2)
    np.testing.assert_allclose(ref.weights, [0.5, 0.5])
    assert ref.levels["BESS"] == pytest.approx(0.3)


def test_matching_prefix_dominates_with_small_bandwidth():
    lib = library([[0.0, 1.0, 2.0], [3.0, 4.0, 5.0]], [[0.1, 0.2, 0.3], [0.9, 0.8, 0.7]], bandwidth=0.1)
    ref = soc_reference(lib, observed([0.0, 1.0, 2.0]), 1)
    assert ref.weights[0] == pytest.approx(1.0, abs=1e-12)
    assert ref.levels["BESS"] == pytest.approx(0.2)


def test_hand_computed_kernel():
    lib = library([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]], [[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]], bandwidth=1.0)
    weights, degenerate = kernel_weights(lib, observed([0.0, 0.0, 0.0]), 1)
    # six features, each with squared distance 2 over (t + 1) = 2 periods
    k1 = np.exp(-2.0 / (2.0 * 1.0 * 2)) ** len(FEATURES)
    np.testing.assert_allclose(weights, [1.0 / (1.0 + k1), k1 / (1.0 + k1)])
    assert not degenerate


def test_window_of_levels():
    lib = library([[1.0, 2.0, 3.0]], [[0.2, 0.4, 0.6]])
    ref = soc_reference(lib, observed([1.0, 2.0, 3.0]), 0, periods=range(0, 3))
    np.testing.assert_allclose(ref.levels["BESS"], [0.2, 0.4, 0.6])


def test_degenerate_kernel_falls_back_or_raises():
    lib = library([[0.0, 0.0], [1.0, 1.0]], [[0.0, 0.0], [1.0, 1.0]], bandwidth=1e-6)
    far = observed([1e6, 1e6])
    ref = soc_reference(lib, far, 1)
    assert ref.degenerate
    np.testing.assert_allclose(ref.weights, [0.5, 0.5])
    with pytest.raises(DegenerateKernelError):
        soc_reference(lib, far, 1, strict=True)


def test_prefix_too_short():
    lib = library([[0.0, 0.0, 0.0]], [[0.0, 0.0, 0.0]])
    with pytest.raises(LengthMismatchError):
        kernel_weights(lib, observed([0.0]), 2)


def test_pooled_bandwidth_is_floored():
    lib = library([[2.0, 2.0], [2.0, 2.0]], [[0.0, 0.0], [1.0, 1.0]])
    assert all(s == pytest.approx(1e-6) for s in lib.bandwidths.values())


def test_non_positive_bandwidth_rejected():
    with pytest.raises(ConfigurationError):
        library([[0.0, 1.0]], [[0.0, 1.0]], bandwidth=-1.0)
