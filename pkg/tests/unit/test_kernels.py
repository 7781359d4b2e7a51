import numpy as np
import pytest
from scipy.integrate import quad

from mxfar.core.kernels import kernel_value, scaled_kernel_weight
from mxfar.core.types import KernelKind
from mxfar.exceptions import InvalidBandwidthError


def test_epanechnikov_values():
    assert kernel_value(KernelKind.EPANECHNIKOV, 0.0) == pytest.approx(0.75)
    assert kernel_value(KernelKind.EPANECHNIKOV, 1.0) == 0.0
    assert kernel_value(KernelKind.EPANECHNIKOV, -1.5) == 0.0
    assert kernel_value("epanechnikov", 0.5) == pytest.approx(0.5625)


def test_gaussian_peak():
    assert kernel_value(KernelKind.GAUSSIAN, 0.0) == pytest.approx(1 / np.sqrt(2 * np.pi))


@pytest.mark.parametrize("kind", list(KernelKind))
def test_kernels_symmetric_and_integrate_to_one(kind):
    u = np.linspace(-3, 3, 61)
    np.testing.assert_allclose(kernel_value(kind, u), kernel_value(kind, -u))
    total, _ = quad(lambda z: kernel_value(kind, z), -10, 10, points=[-1, 1])
    assert total == pytest.approx(1.0, abs=1e-8)


def test_scaled_weight():
    assert scaled_kernel_weight(KernelKind.EPANECHNIKOV, 2.0, 2.0, 0.5) == pytest.approx(1.5)
    weights = scaled_kernel_weight(KernelKind.EPANECHNIKOV, np.array([0.0, 0.4, 0.6]), 0.0, 0.5)
    np.testing.assert_allclose(weights, [1.5, 1.5 * (1 - 0.64), 0.0])


@pytest.mark.parametrize("h", [0.0, -1.0, np.inf, np.nan])
def test_scaled_weight_rejects_bad_bandwidth(h):
    with pytest.raises(InvalidBandwidthError):
        scaled_kernel_weight(KernelKind.GAUSSIAN, 0.0, 0.0, h)
