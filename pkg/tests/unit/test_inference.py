import math

import numpy as np
import pytest

from mxfar.exceptions import BootstrapError, SpecError
from mxfar.inference import (
    POOLING_ALL,
    POOLING_SUBJECT,
    band_quantiles,
    center_residuals,
    coefficient_bands,
    fit_null_mevar,
    generate_recursive,
    nonlinearity_test,
    replicate_rng,
    resample_residuals,
    rss_ratio,
    run_replicates,
)
from mxfar.models import GeneratorSpec, ModelConfig, ReferenceSpec
from mxfar.simulator import simulate


@pytest.fixture(scope="module")
def var_panel():
    spec = GeneratorSpec(kind="var", n_subjects=3, n_time=80, burn_in=50, random_effect_sd=0.05, seed=2)
    return simulate(spec).panel


@pytest.fixture(scope="module")
def var_config():
    return ModelConfig(p=1, reference=ReferenceSpec.from_channel(2, 2), bandwidth=1.5, grid_size=5)


def test_replicate_streams():
    first = replicate_rng(4, 0).normal(size=3)
    np.testing.assert_array_equal(first, replicate_rng(4, 0).normal(size=3))
    assert not np.array_equal(first, replicate_rng(4, 1).normal(size=3))
    assert not np.array_equal(first, replicate_rng(4, 0, stream=(1,)).normal(size=3))


def test_center_residuals():
    values = np.random.default_rng(0).normal(loc=3.0, size=(2, 3, 50))
    centered = center_residuals(values)
    assert np.max(np.abs(centered.mean(axis=2))) <= 1e-12
    np.testing.assert_allclose(values - centered, np.broadcast_to(values.mean(axis=2, keepdims=True), values.shape))


def test_subject_pooling_keeps_vectors_within_subject():
    pool = np.arange(2 * 2 * 5, dtype=float).reshape(2, 2, 5)
    drawn = resample_residuals(pool, np.random.default_rng(1), POOLING_SUBJECT)
    assert drawn.shape == pool.shape
    for n in range(2):
        for t in range(5):
            # whole k-vectors are drawn from the subject's own pool
            assert any(np.array_equal(drawn[n, :, t], pool[n, :, s]) for s in range(5))


def test_pooled_resampling_draws_from_all_subjects():
    pool = np.arange(3 * 2 * 40, dtype=float).reshape(3, 2, 40)
    drawn = resample_residuals(pool, np.random.default_rng(1), POOLING_ALL)
    vectors = {tuple(pool[n, :, t]) for n in range(3) for t in range(40)}
    assert all(tuple(drawn[n, :, t]) in vectors for n in range(3) for t in range(40))
    assert not np.all(drawn[0] < 80)
    with pytest.raises(SpecError):
        resample_residuals(pool, np.random.default_rng(1), "block")


def test_generate_recursive(var_panel):
    innovations = np.ones((3, 2, var_panel.n_time - 2))
    zero = np.zeros((3, 2, 2))
    generated = generate_recursive(var_panel, 2, 1, lambda values, t: zero, innovations)
    np.testing.assert_array_equal(generated.values[:, :, :2], var_panel.values[:, :, :2])
    np.testing.assert_array_equal(generated.values[:, :, 2:], innovations)
    assert generated.subject_ids == var_panel.subject_ids

    explosive = np.broadcast_to(2.0 * np.eye(2), (3, 2, 2))
    with pytest.raises(BootstrapError):
        generate_recursive(var_panel, 2, 1, lambda values, t: explosive, innovations)


def test_run_replicates_drops_failures():
    def replicate(b, rng):
        if b == 3:
            raise BootstrapError("diverged")
        return b

    run = run_replicates(replicate, 8, seed=0)
    assert run.dropped == [3]
    assert run.results == [0, 1, 2, 4, 5, 6, 7]
    assert run.n_effective == 7

    with pytest.raises(BootstrapError):
        run_replicates(lambda b, rng: replicate(3, rng) if b < 3 else b, 8, seed=0)
    with pytest.raises(SpecError):
        run_replicates(replicate, 0, seed=0)


def test_rss_ratio():
    assert rss_ratio(3.0, 2.0) == pytest.approx(0.5)
    assert rss_ratio(0.0, 0.0) == 0.0
    assert math.isinf(rss_ratio(1.0, 0.0))


def test_null_model(var_panel):
    null = fit_null_mevar(var_panel, 1, start=2)
    assert null.group_means.shape == (1, 2, 2)
    assert null.subject_coefficients.shape == (3, 2, 2)
    # generator uses 0.5 I plus small subject effects
    np.testing.assert_allclose(null.group_means[0], 0.5 * np.eye(2), atol=0.2)
    assert null.residuals(var_panel).shape == (3, 2, var_panel.n_time - 2)
    assert null.rss(var_panel) > 0
    with pytest.raises(SpecError):
        fit_null_mevar(var_panel, 2, start=1)


def test_nonlinearity_test_is_reproducible(var_panel, var_config):
    first = nonlinearity_test(var_panel, var_config, 4, seed=9, threads=1)
    second = nonlinearity_test(var_panel, var_config, 4, seed=9, threads=2)
    np.testing.assert_array_equal(first.bootstrap_statistics, second.bootstrap_statistics)
    assert first.statistic == second.statistic
    assert 0.0 <= first.p_value <= 1.0
    assert first.n_replicates + len(first.dropped) == 4
    assert first.statistic == pytest.approx(first.rss0 / first.rss1 - 1)
    assert list(first.to_frame().columns) == ["replicate", "L_boot"]


def test_band_quantiles():
    samples = np.arange(101, dtype=float)[:, None]
    lower, upper = band_quantiles(samples, 0.9)
    np.testing.assert_allclose(lower, [5.0])
    np.testing.assert_allclose(upper, [95.0])
    with pytest.raises(SpecError):
        band_quantiles(samples, 1.0)


def test_coefficient_bands(var_panel, var_config):
    band = coefficient_bands(var_panel, var_config, 4, 0.9, seed=1)
    assert band.lower.shape == band.estimate.shape == (5, 1, 2, 2)
    finite = np.isfinite(band.lower) & np.isfinite(band.upper)
    assert np.all(band.lower[finite] <= band.upper[finite])
    frame = band.to_frame()
    assert list(frame.columns) == ["channel", "group", "target_lag_channel", "lag", "u0", "alpha", "lower", "upper"]
    assert len(frame) == 2 * 1 * 2 * (5 - len(band.grid.gaps))
