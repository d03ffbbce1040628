"""Named analytic field catalog for the experiment harness.

Wave-number variations and right-hand sides come from a fixed catalog
rather than a runtime expression parser, so the analytic continuation of
each entry onto the rotated contour is explicit and reviewed per entry.
All entries are windowed to vanish at nodes with any coordinate at or
beyond the support bound.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .grid import EcsAxis, sample_field, support_window
from .tensor import CpTensor, cp_from_terms


def _gauss(*coords):
    total = coords[0] ** 2
    for c in coords[1:]:
        total = total + c ** 2
    return np.exp(-total)


def _exp_ridge(x, y):
    # |x - y| continued onto the contour as sqrt((x - y)^2); the principal
    # branch keeps a positive real part along the rotated rays.
    return np.exp(-np.sqrt((x - y) ** 2 + 0j))


def _windowed_axis_gauss(axis: EcsAxis, bound: float) -> np.ndarray:
    mask = (axis.nodes.real < bound - 1e-14) & (np.abs(axis.nodes.imag) < 1e-14)
    return np.exp(-axis.nodes ** 2) * mask


CHI_PROFILES = ("none", "gauss-well", "exp-ridge")
RHS_PROFILES = ("gauss", "none")


def chi_function(profile: str, k0_squared: complex, dimension: int):
    """Analytic chi with k^2 = k0^2 (1 + chi); None for a constant field."""
    if profile == "none":
        return None
    if profile == "gauss-well":
        return lambda *coords: _gauss(*coords) / k0_squared
    if profile == "exp-ridge":
        if dimension != 2:
            raise ConfigError("chi", "exp-ridge is a 2D profile")
        return lambda x, y: -_exp_ridge(x, y) / k0_squared
    raise ConfigError("chi", f"unknown profile {profile!r}")


def rhs_function(profile: str):
    if profile == "gauss":
        return lambda *coords: -_gauss(*coords)
    if profile == "none":
        return lambda *coords: np.zeros_like(coords[0])
    raise ConfigError("rhs", f"unknown profile {profile!r}")


def separable_k_terms(profile: str, k0_squared: complex, axes, bound: float):
    """K = sum of separable terms for profiles with an exact split;
    None when no exact finite-rank form exists (dense path)."""
    ones = [np.ones(ax.size, dtype=complex) for ax in axes]
    constant = (complex(k0_squared), ones)
    if profile == "none":
        return [constant]
    if profile == "gauss-well":
        gausses = [_windowed_axis_gauss(ax, bound) for ax in axes]
        return [constant, (1.0 + 0.0j, gausses)]
    return None


def wavenumber_cp(profile: str, k0_squared: complex, axes, bound: float) -> CpTensor | None:
    """Exact CP form of the full k^2 field where the profile is separable."""
    terms = separable_k_terms(profile, k0_squared, axes, bound)
    if terms is None:
        return None
    return cp_from_terms(terms)


def sample_windowed(axes, func, bound: float) -> np.ndarray:
    """Sample an analytic field and window it to the support box."""
    if func is None:
        shape = tuple(ax.size for ax in axes)
        return np.zeros(shape, dtype=complex)
    return sample_field(axes, func) * support_window(axes, bound)
