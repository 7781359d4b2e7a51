import dataclasses

import numpy as np
import pytest

from mxfar.core.kernels import scaled_kernel_weight
from mxfar.core.types import Panel
from mxfar.estimator import (
    ChannelVariance,
    VarianceComponents,
    build_local_design,
    estimate_variance_components,
    fit_far_local,
    fit_independent,
    fit_mxfar,
    fit_mxfar_channel,
    lag_matrix,
    lagged_rows,
    predict_one_step,
    predict_panel,
    residuals,
)
from mxfar.estimator.henderson import penalty_matrix
from mxfar.estimator.export import COEFFICIENTS_FILE, FIT_SUMMARY_FILE, SUBJECT_EFFECTS_FILE, write_coefficient_grid
from mxfar.exceptions import EmptyDesignError, FitFailureError, GapError, VarianceUndefinedError
from mxfar.models import ModelConfig, ReferenceSpec


def test_lag_matrix_layout():
    values = np.arange(12, dtype=float).reshape(2, 6)     # k=2, T=6
    lags = lag_matrix(values, 2, 2)
    # row t: [Y_1(t-1), Y_2(t-1), Y_1(t-2), Y_2(t-2)]
    np.testing.assert_array_equal(lags[0], [1, 7, 0, 6])
    assert lags.shape == (4, 4)


def test_lagged_rows_needs_usable_points(noise_panel):
    config = ModelConfig(p=1, reference=ReferenceSpec.from_channel(1, 1), bandwidth=1.0)
    with pytest.raises(EmptyDesignError):
        lagged_rows(noise_panel, config, start=noise_panel.n_time)


def test_local_design_shapes(two_group_panel):
    config = ModelConfig(p=1, reference=ReferenceSpec.from_channel(2, 2), bandwidth=1.0)
    design = build_local_design(two_group_panel, config, 0, 0.0)
    n_rows = two_group_panel.n_time - 2
    assert design.X.shape == (6 * n_rows, 2 * 4)
    assert design.Z_dense().shape == (6 * n_rows, 6 * 4)
    assert design.n_local == 4
    # subject 4 belongs to group 1, so its rows only fill the second column block
    rows = design.row_slices[3]
    assert np.all(design.X[rows, :4] == 0.0)
    np.testing.assert_array_equal(design.X[rows, 4:], design.Z_blocks[3])
    assert design.effective_sample().shape == (2,)


def test_far_local_matches_weighted_least_squares_oracle(noise_panel):
    config = ModelConfig(p=1, reference=ReferenceSpec.from_channel(1, 1), kernel="gaussian", bandwidth=0.8)
    u0 = 0.2
    alpha, beta = fit_far_local(noise_panel, config, 1, u0)

    lags = lag_matrix(noise_panel.values, 1, 1).reshape(-1, 2)
    u = noise_panel.values[:, 0, :-1].reshape(-1)
    y = noise_panel.values[:, 1, 1:].reshape(-1)
    design = np.hstack([lags, lags * (u - u0)[:, None]])
    root = np.sqrt(scaled_kernel_weight("gaussian", u, u0, 0.8))
    theta, *_ = np.linalg.lstsq(design * root[:, None], y * root, rcond=None)
    np.testing.assert_allclose(alpha, theta[:2], rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(beta, theta[2:], rtol=1e-6, atol=1e-8)


def test_wide_bandwidth_recovers_linear_ar():
    rng = np.random.default_rng(8)
    values = np.zeros((1, 1, 2000))
    for t in range(1, 2000):
        values[0, 0, t] = 0.5 * values[0, 0, t - 1] + rng.normal()
    panel = Panel(values=values, group_of=[0], subject_ids=("1",))
    config = ModelConfig(p=1, reference=ReferenceSpec.from_channel(1, 1), bandwidth=1e6)
    alpha, beta = fit_far_local(panel, config, 0, 0.0)
    # linear truth: flat coefficient curve
    assert alpha[0] == pytest.approx(0.5, abs=0.1)
    assert beta[0] == pytest.approx(0.0, abs=0.1)


def test_fit_shapes(expar_fit, expar_panel):
    assert expar_fit.size == 10
    assert expar_fit.alpha().shape == (10, 1, 2, 2)
    assert expar_fit.sigma2_eps().shape == (10, 2)
    assert expar_fit.subject_coefficients(fill_gaps=True).shape == (4, 10, 2, 2)
    assert len(expar_fit.gaps) <= 2
    assert expar_fit.variance_components.sigma2_alpha.shape == (2, 2)
    assert np.all(expar_fit.variance_components.sigma2_alpha >= expar_fit.config.variance_floor)


def test_fit_recovers_constant_expar_column(expar_fit):
    alpha = expar_fit.alpha()[:, 0]
    fitted = ~np.isnan(alpha[:, 0, 0])
    # f_{1,1} = -0.3 everywhere
    assert np.mean(alpha[fitted, 0, 0]) == pytest.approx(-0.3, abs=0.15)


def test_single_subject_uses_floor_variance(expar_panel, expar_config):
    single = expar_panel.subset([0])
    grid = fit_mxfar(single, expar_config)
    floor = VarianceComponents.floor(2, 2, expar_config.variance_floor)
    np.testing.assert_array_equal(grid.variance_components.sigma2_alpha, floor.sigma2_alpha)
    with pytest.raises(VarianceUndefinedError):
        estimate_variance_components(single, expar_config, 0, [0.0])


@pytest.mark.parametrize("u0", [-0.5, 0.0, 0.5])
def test_single_subject_alpha_is_far_estimate(expar_panel, expar_config, u0):
    single = expar_panel.subset([0])
    floor = VarianceComponents.floor(2, 2, expar_config.variance_floor)
    for channel in range(2):
        fit = fit_mxfar_channel(single, expar_config, channel, u0, floor.channel(channel))
        alpha, beta = fit_far_local(single, expar_config, channel, u0)
        np.testing.assert_allclose(fit.alpha[0], alpha, atol=1e-6)
        np.testing.assert_allclose(fit.beta[0], beta, atol=1e-6)
        assert np.all(np.abs(fit.a) < 1e-6)


def _replicated_panel(panel, copies=3):
    values = np.repeat(panel.values[:1], copies, axis=0)
    return Panel(values=values, group_of=np.zeros(copies, dtype=int),
                 subject_ids=tuple(f"copy{n}" for n in range(copies)))


def test_identical_subjects_have_floor_variance_and_pooled_alpha(expar_panel, expar_config):
    panel = _replicated_panel(expar_panel)
    floor = expar_config.variance_floor
    variance = estimate_variance_components(panel, expar_config, 0, [-0.5, 0.0, 0.5])
    np.testing.assert_array_equal(variance.sigma2_alpha, np.full(2, floor))
    np.testing.assert_array_equal(variance.sigma2_beta, np.full(2, floor))

    fit = fit_mxfar_channel(panel, expar_config, 0, 0.0, variance)
    alpha, beta = fit_far_local(panel, expar_config, 0, 0.0)
    np.testing.assert_allclose(fit.alpha[0], alpha, atol=1e-6)
    np.testing.assert_allclose(fit.beta[0], beta, atol=1e-6)
    # the copies agree with the single-subject estimate
    single_alpha, _ = fit_far_local(expar_panel.subset([0]), expar_config, 0, 0.0)
    np.testing.assert_allclose(fit.alpha[0], single_alpha, atol=1e-6)


def test_variance_components_ignore_subject_order(expar_panel, expar_config):
    points = [-0.5, 0.0, 0.5]
    shuffled = expar_panel.subset([2, 0, 3, 1])
    for channel in range(2):
        original = estimate_variance_components(expar_panel, expar_config, channel, points)
        permuted = estimate_variance_components(shuffled, expar_config, channel, points)
        np.testing.assert_allclose(permuted.sigma2_alpha, original.sigma2_alpha, rtol=1e-10)
        np.testing.assert_allclose(permuted.sigma2_beta, original.sigma2_beta, rtol=1e-10)


def test_negated_group_means_give_opposite_alpha(two_group_panel):
    config = ModelConfig(p=1, reference=ReferenceSpec.from_channel(2, 2), bandwidth=1.0)
    variance = estimate_variance_components(two_group_panel, config, 1, [-0.5, 0.0, 0.5])
    fit = fit_mxfar_channel(two_group_panel, config, 1, 0.0, variance)
    assert fit.alpha.shape == (2, 2)
    # f_{2,2} = 0.3 in group 1 and -0.3 in group 2
    assert fit.alpha[0, 1] > 0.1
    assert fit.alpha[1, 1] < -0.1


def test_two_subject_fit_matches_dense_mixed_model_solve(expar_panel, expar_config):
    pair = expar_panel.subset([1, 3])
    variance = ChannelVariance(sigma2_alpha=np.array([0.05, 0.02]), sigma2_beta=np.array([0.01, 0.01]))
    u0 = 0.2
    fit = fit_mxfar_channel(pair, expar_config, 0, u0, variance)

    design = build_local_design(pair, expar_config, 0, u0)
    ginv = penalty_matrix(variance, expar_config.penalty_scale, float(design.weights.max()),
                          expar_config.variance_floor)
    full = np.hstack([design.X, design.Z_dense()])
    weighted = full * design.weights[:, None]
    system = full.T @ weighted
    n_fixed = design.X.shape[1]
    system[n_fixed:, n_fixed:] += np.diag(np.tile(ginv, 2))
    solution = np.linalg.solve(system, weighted.T @ design.response)

    theta, gamma = solution[:n_fixed], solution[n_fixed:].reshape(2, n_fixed)
    np.testing.assert_allclose(fit.alpha[0], theta[:2], rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(fit.beta[0], theta[2:], rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(fit.a, gamma[:, :2], rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(fit.b, gamma[:, 2:], rtol=1e-6, atol=1e-8)


def test_thread_count_does_not_change_results(expar_panel, expar_config, expar_fit):
    threaded = fit_mxfar(expar_panel, expar_config, threads=3)
    np.testing.assert_array_equal(threaded.alpha(), expar_fit.alpha())
    np.testing.assert_array_equal(threaded.random_intercepts(), expar_fit.random_intercepts())


def test_one_step_prediction_matches_panel_prediction(expar_fit, expar_panel):
    predictions = predict_panel(expar_fit, expar_panel, fill_gaps=True)
    start = expar_fit.config.burn_in
    for subject, t in [(0, start), (2, 57), (3, expar_panel.n_time - 1)]:
        try:
            single = predict_one_step(expar_fit, expar_panel, subject, t)
        except GapError:
            continue
        np.testing.assert_allclose(single, predictions[subject, :, t - start])
    with pytest.raises(IndexError):
        predict_one_step(expar_fit, expar_panel, 0, start - 1)


def test_gap_raises_unless_filled(expar_fit, expar_panel):
    fits = list(expar_fit.fits)
    fits[0] = None
    gapped = dataclasses.replace(expar_fit, fits=tuple(fits))
    assert 0 in gapped.gaps
    with pytest.raises(GapError):
        predict_panel(gapped, expar_panel)
    filled = residuals(gapped, expar_panel, fill_gaps=True)
    assert np.all(np.isfinite(filled.values))
    assert filled.rss() > 0


def test_too_many_gaps_fail_the_fit(expar_panel, expar_config):
    narrow = expar_config.updated(bandwidth=1e-4)
    floor = VarianceComponents.floor(2, 2, narrow.variance_floor)
    with pytest.raises(FitFailureError):
        fit_mxfar(expar_panel, narrow, variance_components=floor)


def test_independent_fits(expar_panel, expar_config, expar_fit):
    grid, coefficients = fit_independent(expar_panel, expar_config, grid=expar_fit.grid)
    assert coefficients.shape == (4, 10, 2, 2)
    np.testing.assert_array_equal(grid.points, expar_fit.points)


def test_export(tmp_path, expar_fit):
    paths = write_coefficient_grid(expar_fit, tmp_path)
    names = {path.name for path in paths}
    assert {COEFFICIENTS_FILE, SUBJECT_EFFECTS_FILE, FIT_SUMMARY_FILE} <= names
