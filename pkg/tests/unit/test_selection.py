import math

import numpy as np
import pytest

from mxfar.estimator import fit_mxfar, predict_panel
from mxfar.exceptions import SelectionError, SubseriesError
from mxfar.models import ModelConfig, ReferenceSpec
from mxfar.selection import ape_for_candidate, candidate_configs, default_horizon, select_model, subseries_lengths


@pytest.fixture(scope="module")
def base_config():
    return ModelConfig(p=1, reference=ReferenceSpec.from_channel(2, 2), bandwidth=1.0, grid_size=5)


def test_horizon_and_lengths():
    assert default_horizon(200) == 20
    assert default_horizon(59) == 5
    assert subseries_lengths(200, 20, 4) == [180, 160, 140, 120]
    with pytest.raises(SubseriesError):
        subseries_lengths(80, 20, 4)
    with pytest.raises(SubseriesError):
        subseries_lengths(80, 0, 4)


def test_ape_equals_scripted_loop(expar_panel, base_config):
    result = ape_for_candidate(expar_panel, base_config, r=20, n_subseries=2)
    expected = []
    for length in (180, 160):
        config = base_config.updated(bandwidth=(200 / length) ** 0.2)
        grid = fit_mxfar(expar_panel.truncated(length), config)
        predictions = predict_panel(grid, expar_panel, fill_gaps=True, start=length, stop=length + 20)
        expected.append(np.sum((expar_panel.values[:, :, length:length + 20] - predictions) ** 2))
    np.testing.assert_allclose(result.per_subseries, expected)
    assert result.ape == pytest.approx(sum(expected))
    assert not result.failed


def test_candidate_order(base_config):
    references = [ReferenceSpec.from_channel(1, 1), ReferenceSpec.from_channel(2, 2)]
    candidates = candidate_configs(base_config, [0.5, 1.0], [1, 2], references)
    assert len(candidates) == 8
    assert [(c.p, c.reference.channel, c.bandwidth) for c in candidates[:3]] == [(1, 1, 0.5), (1, 1, 1.0), (1, 2, 0.5)]


def test_failed_candidate_gets_infinite_ape(expar_panel, base_config):
    report = select_model(expar_panel, base_config, [1e-4, 1.0], [1], [base_config.reference], r=20, n_subseries=2)
    assert math.isinf(report.ape[0])
    assert 0 in report.failures
    assert report.best == 1
    assert report.best_config.bandwidth == 1.0

    frame = report.to_frame()
    assert list(frame.columns) == ["h", "p", "ref_channel", "ref_lag", "ape_q1", "ape_q2", "ape", "best_flag"]
    assert frame["best_flag"].tolist() == [0, 1]


def test_all_candidates_failing(expar_panel, base_config):
    with pytest.raises(SelectionError):
        select_model(expar_panel, base_config, [1e-5, 1e-4], [1], [base_config.reference], r=20, n_subseries=2)


def test_short_series_rejected_before_fitting(expar_panel, base_config):
    with pytest.raises(SubseriesError):
        select_model(expar_panel, base_config, [1.0], [1], [base_config.reference], r=60, n_subseries=4)


def test_selection_independent_of_threads(expar_panel, base_config):
    args = (expar_panel, base_config, [0.8, 1.2], [1], [base_config.reference])
    serial = select_model(*args, r=20, n_subseries=2, threads=1)
    parallel = select_model(*args, r=20, n_subseries=2, threads=2)
    np.testing.assert_array_equal(serial.ape, parallel.ape)
    assert serial.best == parallel.best
