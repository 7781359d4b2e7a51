import networkx as nx
import numpy as np
import pytest

from mxfar.exceptions import SpecError
from mxfar.models import GeneratorSpec, ModelConfig, ReferenceSpec
from mxfar.simulator import simulate
from mxfar.spectral import (
    amplitude_regimes,
    bar_f,
    edge_significance,
    fpdc,
    lag_matrices,
    mean_fpdc,
    network_summary,
    omega_grid,
    split_windows,
    subject_fpdc,
    zero_link,
)
from mxfar.spectral.fpdc import check_omegas


def direct_pdc(matrices, omega):
    """PDC straight from lag matrices A_1..A_p"""
    k = matrices.shape[-1]
    transfer = np.eye(k, dtype=complex)
    for lag, A in enumerate(matrices, start=1):
        transfer = transfer - A * np.exp(-2j * np.pi * omega * lag)
    return transfer / np.sqrt(np.sum(np.abs(transfer) ** 2, axis=0, keepdims=True))


def test_omega_grid():
    omegas = omega_grid(64)
    assert omegas.shape == (64,)
    assert omegas[0] == pytest.approx(1 / 130)
    assert np.all((omegas > 0) & (omegas < 0.5))
    with pytest.raises(SpecError):
        check_omegas([0.0, 0.25])


def test_lag_matrix_split():
    rows = np.array([[1.0, 2.0, 3.0, 4.0],
                     [5.0, 6.0, 7.0, 8.0]])
    matrices = lag_matrices(rows)
    np.testing.assert_array_equal(matrices[0], [[1, 2], [5, 6]])
    np.testing.assert_array_equal(matrices[1], [[3, 4], [7, 8]])


def test_fpdc_matches_direct_formula():
    rng = np.random.default_rng(0)
    rows = rng.uniform(-0.4, 0.4, size=(3, 6))
    matrices = lag_matrices(rows)
    for omega in (0.05, 0.2, 0.45):
        np.testing.assert_allclose(fpdc(rows, omega), direct_pdc(matrices, omega), atol=1e-12)
    np.testing.assert_allclose(bar_f(np.zeros((2, 2)), 0.1), np.eye(2))


def test_fpdc_range_and_column_sums():
    rows = np.random.default_rng(1).normal(scale=0.5, size=(7, 3, 3))
    values = np.abs(fpdc(rows, omega_grid(16)))                  # (7, 16, 3, 3)
    assert np.all(values >= 0) and np.all(values <= 1 + 1e-12)
    np.testing.assert_allclose(np.sum(values ** 2, axis=-2), 1.0, atol=1e-12)


def test_mean_of_coefficients_is_not_mean_of_fpdc():
    first = np.array([[0.5, 0.4], [0.0, 0.2]])
    second = np.array([[-0.5, -0.4], [0.3, 0.2]])
    of_mean = fpdc(0.5 * (first + second), 0.1)
    mean_of = 0.5 * (fpdc(first, 0.1) + fpdc(second, 0.1))
    assert not np.allclose(of_mean, mean_of)


def test_group_and_subject_surfaces(expar_fit):
    omegas = omega_grid(8)
    surface = mean_fpdc(expar_fit, 0, omegas)
    assert surface.values.shape == (2, 2, 8, 10)
    fitted = [m for m in range(expar_fit.size) if expar_fit.fits[m] is not None]
    m = fitted[0]
    np.testing.assert_allclose(surface.values[:, :, 3, m], fpdc(expar_fit.alpha()[m, 0], omegas[3]))
    np.testing.assert_allclose(surface.column_sums()[:, :, fitted], 1.0, atol=1e-12)

    frame = surface.to_frame()
    assert list(frame.columns) == ["scope", "target", "source", "omega", "u0", "real", "imag", "modulus"]
    assert len(frame) == 2 * 2 * 8 * 10

    one = subject_fpdc(expar_fit, 1, omegas)
    assert one.scope == "subject 2"
    with pytest.raises(SpecError):
        mean_fpdc(expar_fit, 1)
    with pytest.raises(SpecError):
        subject_fpdc(expar_fit, 4)


def test_zero_link():
    table = np.ones((5, 2, 4))
    zeroed = zero_link(table, target=0, source=1, n_channels=2)
    np.testing.assert_array_equal(zeroed[:, 0], [[1, 0, 1, 0]] * 5)
    np.testing.assert_array_equal(zeroed[:, 1], table[:, 1])
    assert table[0, 0, 1] == 1.0


def test_amplitude_regimes(expar_panel, expar_config):
    regimes = amplitude_regimes(expar_panel, expar_config)
    assert list(regimes) == ["small", "large"]
    assert regimes["small"] < regimes["large"]


@pytest.fixture(scope="module")
def small_var():
    spec = GeneratorSpec(kind="var", n_subjects=3, n_time=80, burn_in=50, random_effect_sd=0.05, seed=4)
    config = ModelConfig(p=1, reference=ReferenceSpec.from_channel(2, 2), bandwidth=1.5, grid_size=5)
    return simulate(spec).panel, config


def test_edge_significance(small_var):
    panel, config = small_var
    result = edge_significance(panel, config, 3, 0.1, omegas=omega_grid(4), seed=3)
    assert result.significant.shape == (1, 2, 2, 2)
    assert result.modulus.shape == (1, 2, 4, 2, 2)
    assert not result.significant[:, :, 0, 0].any()
    assert np.isnan(result.threshold[0, 0, 1, 1])
    assert result.labels == ["small", "large"]
    assert result.level == pytest.approx(0.9)
    assert len(result.to_frame()) == 2 * 4 * 2 * 2

    again = edge_significance(panel, config, 3, 0.1, omegas=omega_grid(4), seed=3, threads=2)
    np.testing.assert_array_equal(again.threshold, result.threshold)
    with pytest.raises(SpecError):
        edge_significance(panel, config, 3, 1.5)


def test_split_windows(expar_panel):
    windows = split_windows(expar_panel, 60)
    assert len(windows) == 3
    np.testing.assert_array_equal(windows[1].values, expar_panel.values[:, :, 60:120])
    with pytest.raises(SpecError):
        split_windows(expar_panel, 0)


def test_network_summary():
    flags = np.zeros((1, 2, 2, 2), dtype=bool)
    flags[0, 0, 0, 1] = True
    other = flags.copy()
    other[0, 1, 1, 0] = True
    summary = network_summary([flags, other, flags, flags], ["small", "large"])
    assert summary.n_windows == 4
    assert summary.proportions[0, 0, 0, 1] == 1.0
    assert summary.proportions[0, 1, 1, 0] == 0.25

    frame = summary.to_frame()
    assert list(frame.columns) == ["group", "regime", "source", "target", "proportion"]
    row = frame[(frame.regime == "large") & (frame.source == 1) & (frame.target == 2)]
    assert row.proportion.item() == 0.25

    graph = summary.to_graph(0, "small")
    assert isinstance(graph, nx.DiGraph)
    assert list(graph.edges) == [("ch_2", "ch_1")]
    dot = summary.to_dot()
    assert dot.startswith("digraph")
    assert '"g0_large_ch_1" -> "g0_large_ch_2"' in dot

    with pytest.raises(SpecError):
        network_summary([], ["small"])
