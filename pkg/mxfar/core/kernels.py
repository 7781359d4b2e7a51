"""Kernel functions K and scaled weights K_h(u - u0) = K((u - u0)/h)/h"""
import numpy as np

from mxfar.core.types import KernelKind
from mxfar.exceptions import InvalidBandwidthError

_GAUSSIAN_NORM = 1.0 / np.sqrt(2.0 * np.pi)


def epanechnikov(z):
    z = np.asarray(z, dtype=float)
    return np.where(np.abs(z) <= 1.0, 0.75 * (1.0 - z ** 2), 0.0)


def gaussian(z):
    z = np.asarray(z, dtype=float)
    return _GAUSSIAN_NORM * np.exp(-0.5 * z ** 2)


_KERNELS = {
    KernelKind.EPANECHNIKOV: epanechnikov,
    KernelKind.GAUSSIAN: gaussian,
}


def kernel_value(kind: KernelKind, u):
    """
    Evaluate K(u); scalars in, float out, arrays in, arrays out.

    Args:
        kind: Kernel family
        u: Point(s) at which to evaluate

    Returns:
        Kernel value(s), nonnegative and symmetric in u
    """
    value = _KERNELS[KernelKind(kind)](u)
    return float(value) if np.ndim(value) == 0 else value


def scaled_kernel_weight(kind: KernelKind, u, u0: float, h: float):
    """
    Local weight h^{-1} K((u - u0)/h).

    Raises:
        InvalidBandwidthError: if h is not strictly positive
    """
    if not (h > 0) or not np.isfinite(h):
        raise InvalidBandwidthError(f"Bandwidth must be positive and finite, got {h}")
    weight = _KERNELS[KernelKind(kind)]((np.asarray(u, dtype=float) - u0) / h) / h
    return float(weight) if np.ndim(weight) == 0 else weight
