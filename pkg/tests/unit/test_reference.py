import numpy as np
import pytest

from mxfar.core.reference import build_grid, extract_reference, rule_of_thumb_bandwidth, shift_series
from mxfar.core.types import Panel, ReferenceGrid
from mxfar.exceptions import DegenerateReferenceError, SpecError
from mxfar.models import ModelConfig, ReferenceSpec


def _exogenous_panel(exogenous):
    exogenous = np.asarray(exogenous, dtype=float)
    values = np.random.default_rng(0).normal(size=(exogenous.shape[0], 1, exogenous.shape[1]))
    return Panel(values=values, group_of=np.zeros(exogenous.shape[0], dtype=int),
                 subject_ids=tuple(str(n + 1) for n in range(exogenous.shape[0])), exogenous=exogenous)


def test_shift_series():
    shifted = shift_series(np.array([1.0, 2.0, 3.0, 4.0]), 1)
    assert np.isnan(shifted[0])
    np.testing.assert_array_equal(shifted[1:], [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(shift_series(np.array([1.0, 2.0]), 0), [1.0, 2.0])


def test_channel_reference_uses_past_values(noise_panel):
    reference = extract_reference(noise_panel, ReferenceSpec.from_channel(2, 3))
    np.testing.assert_array_equal(reference.values[:, 3:], noise_panel.values[:, 1, :-3])
    assert not reference.usable[:, :3].any()
    assert reference.usable[:, 3:].all()
    assert reference.pooled(start=5).shape == (3 * 55,)


def test_exogenous_reference_passes_through():
    series = np.random.default_rng(2).normal(size=(2, 12))
    panel = _exogenous_panel(series)
    reference = extract_reference(panel, ReferenceSpec.exogenous(0))
    np.testing.assert_array_equal(reference.values, series)
    assert reference.usable.all()
    lagged = extract_reference(panel, ReferenceSpec.exogenous(2))
    np.testing.assert_array_equal(lagged.values[:, 2:], series[:, :-2])
    assert not lagged.usable[:, :2].any()


def test_reference_errors(noise_panel):
    with pytest.raises(SpecError):
        extract_reference(noise_panel, ReferenceSpec.from_channel(3, 1))
    with pytest.raises(SpecError):
        extract_reference(noise_panel, ReferenceSpec.from_channel(1, 60))
    with pytest.raises(SpecError):
        extract_reference(noise_panel, ReferenceSpec.exogenous(0))


def test_grid_midpoints_unit_interval():
    panel = _exogenous_panel([np.r_[0.5, np.linspace(0, 1, 9)]])
    config = ModelConfig(p=1, reference=ReferenceSpec.exogenous(0), bandwidth=0.5, grid_size=2, grid_clip=(0, 1))
    np.testing.assert_allclose(build_grid(panel, config).points, [0.25, 0.75])


def test_grid_midpoints_symmetric_interval():
    panel = _exogenous_panel([np.r_[0.0, np.linspace(-1, 1, 21)]])
    config = ModelConfig(p=1, reference=ReferenceSpec.exogenous(0), bandwidth=0.5, grid_size=4, grid_clip=(0, 1))
    np.testing.assert_allclose(build_grid(panel, config).points, [-0.75, -0.25, 0.25, 0.75])


def test_grid_inside_clipped_range(noise_panel):
    config = ModelConfig(p=2, reference=ReferenceSpec.from_channel(1, 1), bandwidth=1.0, grid_size=7)
    grid = build_grid(noise_panel, config)
    pooled = extract_reference(noise_panel, config.reference).pooled(config.burn_in)
    low, high = np.quantile(pooled, config.grid_clip)
    assert grid.size == 7
    assert np.all(np.diff(grid.points) > 0)
    assert low <= grid.points.min() and grid.points.max() <= high


def test_constant_reference_is_degenerate():
    panel = _exogenous_panel(np.ones((2, 10)))
    config = ModelConfig(p=1, reference=ReferenceSpec.exogenous(0), bandwidth=0.5)
    with pytest.raises(DegenerateReferenceError):
        build_grid(panel, config)
    with pytest.raises(DegenerateReferenceError):
        rule_of_thumb_bandwidth(panel, config.reference)


def test_segment_of_closes_last_segment():
    grid = ReferenceGrid(edges=np.array([0.0, 0.5, 1.0]))
    np.testing.assert_array_equal(grid.segment_of([0.0, 0.49, 0.5, 1.0, -5.0, 5.0]), [0, 0, 1, 1, 0, 1])


def test_rule_of_thumb_bandwidth(noise_panel):
    spec = ReferenceSpec.from_channel(1, 1)
    pooled = extract_reference(noise_panel, spec).pooled(1)
    expected = 1.06 * np.std(pooled) * pooled.size ** -0.2
    assert rule_of_thumb_bandwidth(noise_panel, spec, start=1) == pytest.approx(expected)
