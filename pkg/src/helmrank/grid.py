"""Exterior-complex-scaled 1D axes and finite-difference operators.

An axis consists of uniformly spaced real nodes on (start, ecs_start]
followed by nodes continuing along the complex ray
``ecs_start + t * exp(i*theta)`` with the same arc-length step.  Outgoing
waves decay exponentially on the rotated part, so homogeneous Dirichlet
conditions at both contour ends close the domain.  Second derivatives are
discretized with the three-point stencil evaluated on the (complex) node
coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, SamplingError

_CEIL_GUARD = 1e-9


@dataclass(frozen=True)
class EcsAxis:
    """One coordinate axis with an exterior complex-scaled tail.

    Attributes:
        interior_count: number of real interior nodes M.
        nodes: all node coordinates, real nodes first, then the rotated tail.
        step: uniform real spacing h of the interior nodes.
        rotation_angle: rotation angle theta of the exterior ray (radians).
        ecs_start: real coordinate b where the rotation begins.
        exterior_count: number of nodes on the rotated ray.
        domain_start: coordinate of the Dirichlet wall preceding the first node.
    """

    interior_count: int
    nodes: np.ndarray
    step: float
    rotation_angle: float
    ecs_start: float
    exterior_count: int
    domain_start: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=complex))

    @property
    def size(self) -> int:
        return self.interior_count + self.exterior_count

    @property
    def interior_nodes(self) -> np.ndarray:
        """Real part of the non-rotated nodes (imaginary part is zero)."""
        return self.nodes[: self.interior_count].real.copy()

    def steps(self) -> np.ndarray:
        """Complex step sizes between consecutive nodes, including the step
        from the Dirichlet wall at ``domain_start`` to the first node."""
        left = np.concatenate(([complex(self.domain_start)], self.nodes[:-1]))
        return self.nodes - left


def build_ecs_axis(
    interior_count: int,
    domain_end: float,
    rotation_angle: float,
    ecs_fraction: float,
    domain_start: float = 0.0,
) -> EcsAxis:
    """Build an axis with M real nodes on (domain_start, domain_end] and an
    exterior complex-scaled tail beyond ``domain_end``.

    The exterior node count is ``ceil(ecs_fraction * M)`` with a minimum of
    one node; the exterior step has the same arc length h as the interior.
    """
    if not isinstance(interior_count, (int, np.integer)) or interior_count < 2:
        raise ParameterError(f"interior_count must be an integer >= 2, got {interior_count!r}")
    for name, value in (("domain_end", domain_end), ("rotation_angle", rotation_angle),
                        ("ecs_fraction", ecs_fraction), ("domain_start", domain_start)):
        if not math.isfinite(value):
            raise ParameterError(f"{name} must be finite, got {value!r}")
    if not 0.0 < rotation_angle < math.pi / 2:
        raise ParameterError(f"rotation_angle must lie in (0, pi/2), got {rotation_angle}")
    if domain_end <= domain_start:
        raise ParameterError("domain_end must exceed domain_start")
    if ecs_fraction < 0.0:
        raise ParameterError(f"ecs_fraction must be nonnegative, got {ecs_fraction}")

    m = int(interior_count)
    h = (domain_end - domain_start) / m
    # Guard against float fuzz in fraction*M before taking the ceiling.
    exterior = max(1, math.ceil(ecs_fraction * m - _CEIL_GUARD))
    interior_nodes = domain_start + h * np.arange(1, m + 1)
    ray = domain_end + h * np.exp(1j * rotation_angle) * np.arange(1, exterior + 1)
    nodes = np.concatenate([interior_nodes.astype(complex), ray])
    return EcsAxis(
        interior_count=m,
        nodes=nodes,
        step=h,
        rotation_angle=rotation_angle,
        ecs_start=float(domain_end),
        exterior_count=exterior,
        domain_start=float(domain_start),
    )


def real_axis(interior_count: int, domain_start: float, domain_end: float) -> EcsAxis:
    """Plain uniform real axis without an absorbing tail (both ends Dirichlet).

    Used by oracle problems where a self-adjoint operator is required.
    """
    if not isinstance(interior_count, (int, np.integer)) or interior_count < 2:
        raise ParameterError(f"interior_count must be an integer >= 2, got {interior_count!r}")
    if domain_end <= domain_start:
        raise ParameterError("domain_end must exceed domain_start")
    m = int(interior_count)
    h = (domain_end - domain_start) / (m + 1)
    nodes = domain_start + h * np.arange(1, m + 1)
    return EcsAxis(
        interior_count=m,
        nodes=nodes.astype(complex),
        step=h,
        rotation_angle=0.0,
        ecs_start=float(domain_end),
        exterior_count=0,
        domain_start=float(domain_start),
    )


def second_derivative(axis: EcsAxis) -> np.ndarray:
    """Tridiagonal second-derivative matrix on the axis contour.

    Values outside the grid are treated as zero (homogeneous Dirichlet at
    both contour ends).  On uniform stretches this is the standard
    (1, -2, 1)/h^2 stencil; across the rotation junction the one-sided
    nonuniform rule 2/(h_l(h_l+h_r)), -2/(h_l h_r), 2/(h_r(h_l+h_r)) is used.
    """
    n = axis.size
    steps = axis.steps()
    h_left = steps
    h_right = np.concatenate([steps[1:], [steps[-1]]])
    d = np.zeros((n, n), dtype=complex)
    i = np.arange(n)
    d[i, i] = -2.0 / (h_left * h_right)
    d[i[1:], i[:-1]] = 2.0 / (h_left[1:] * (h_left[1:] + h_right[1:]))
    d[i[:-1], i[1:]] = 2.0 / (h_right[:-1] * (h_left[:-1] + h_right[:-1]))
    return d


def sample_field(axes, f) -> np.ndarray:
    """Sample ``f`` at every node tuple of the given axes.

    ``f`` receives complex coordinates; analytic continuation onto the
    rotated contour is the caller's responsibility.  Non-finite samples
    raise :class:`SamplingError` naming the offending index.
    """
    d = len(axes)
    if not 2 <= d <= 3:
        raise ParameterError(f"sample_field supports 2 or 3 axes, got {d}")
    grids = np.meshgrid(*[ax.nodes for ax in axes], indexing="ij")
    values = np.asarray(f(*grids), dtype=complex)
    if values.shape != grids[0].shape:
        values = np.broadcast_to(values, grids[0].shape).astype(complex)
    bad = ~np.isfinite(values)
    if bad.any():
        index = tuple(int(k) for k in np.argwhere(bad)[0])
        raise SamplingError(index, complex(values[index]))
    return values


@dataclass(frozen=True)
class WaveNumberField:
    """Squared wave number split as ``k^2 = k0^2 * (1 + chi)``.

    ``variation`` holds grid samples of chi, windowed to vanish exactly at
    nodes with any coordinate at or beyond ``support_bound``.
    """

    constant_part: complex
    variation: np.ndarray
    support_bound: float

    def squared(self) -> np.ndarray:
        """Samples of k^2 on the grid."""
        return self.constant_part * (1.0 + self.variation)


def support_window(axes, bound: float) -> np.ndarray:
    """Indicator grid that is 1 where every coordinate is strictly inside
    the support box (real part below ``bound``) and 0 elsewhere."""
    masks = [(ax.nodes.real < bound - 1e-14) & (np.abs(ax.nodes.imag) < 1e-14) for ax in axes]
    grids = np.meshgrid(*masks, indexing="ij")
    window = np.ones(grids[0].shape)
    for g in grids:
        window = window * g
    return window


def sample_wavenumber(axes, k0_squared: complex, chi, support_bound: float) -> WaveNumberField:
    """Sample a space-dependent wave number with the variation windowed to
    the support box."""
    if chi is None:
        shape = tuple(ax.size for ax in axes)
        variation = np.zeros(shape, dtype=complex)
    else:
        variation = sample_field(axes, chi) * support_window(axes, support_bound)
    return WaveNumberField(
        constant_part=complex(k0_squared),
        variation=variation,
        support_bound=float(support_bound),
    )
