"""Far-field evaluation and angular cross sections.

Once the interior wave is known, the scattered field outside the
computational box follows from the constant-wave-number Green's function
applied to the effective source f + k0^2 * chi * u, which is supported
inside the box.  Quadrant problems with Dirichlet walls on the coordinate
axes are handled with image sources, which is the minimal construction
consistent with the homogeneous boundary conditions; results for such
model problems are qualitative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import hankel1

from .errors import ParameterError
from .grid import EcsAxis


@dataclass
class FarfieldScene:
    """Interior data needed for exterior evaluation.

    ``chi_interior`` and ``f_interior`` are samples on the interior real
    sub-grid (absorbing tails excluded), already windowed to vanish at and
    beyond the support bound.  ``dirichlet_images`` enables the 4-term
    image sum for quadrant problems with walls on the coordinate axes.
    """

    axes: list
    k0_squared: complex
    chi_interior: np.ndarray
    f_interior: np.ndarray
    dirichlet_images: bool = False

    def __post_init__(self):
        if not 2 <= len(self.axes) <= 3:
            raise ParameterError("farfield supports 2 or 3 axes")
        if self.dirichlet_images and any(abs(ax.domain_start) > 1e-14 for ax in self.axes):
            raise ParameterError("image sources assume walls at coordinate zero")

    @property
    def dimension(self) -> int:
        return len(self.axes)

    @property
    def k0(self) -> complex:
        return complex(np.sqrt(self.k0_squared))

    @property
    def support_bound(self) -> float:
        return min(ax.ecs_start for ax in self.axes)

    def interior_coordinates(self):
        return [ax.interior_nodes for ax in self.axes]

    def quadrature_weights(self):
        """Per-axis trapezoidal weights over [domain_start, ecs_start]; the
        wall value is zero so its half-weight drops out."""
        weights = []
        for ax in self.axes:
            w = np.full(ax.interior_count, ax.step)
            w[-1] = 0.5 * ax.step
            weights.append(w)
        return weights


def effective_source(scene: FarfieldScene, u_interior: np.ndarray) -> np.ndarray:
    """g = f + k0^2 * chi * u on the interior grid; vanishes outside the
    support box by construction of the windowed fields."""
    u_interior = np.asarray(u_interior, dtype=complex)
    if u_interior.shape != scene.f_interior.shape:
        raise ParameterError("solution does not match the interior grid")
    return scene.f_interior + scene.k0_squared * scene.chi_interior * u_interior


def _greens_function(k0: complex, distance: np.ndarray, dimension: int) -> np.ndarray:
    if dimension == 2:
        return 0.25j * hankel1(0, k0 * distance)
    return np.exp(1j * k0 * distance) / (4.0 * np.pi * distance)


def _point_in_box(scene: FarfieldScene, point) -> bool:
    bound = scene.support_bound
    return all(
        ax.domain_start < float(c) < bound for ax, c in zip(scene.axes, point)
    )


def evaluate_exterior(scene: FarfieldScene, g: np.ndarray, point) -> complex:
    """Green's-function quadrature of the effective source at one exterior
    point."""
    point = tuple(float(c) for c in point)
    if len(point) != scene.dimension:
        raise ParameterError("evaluation point dimension mismatch")
    if _point_in_box(scene, point):
        raise ParameterError(f"evaluation point {point} lies inside the support box")
    coords = scene.interior_coordinates()
    weights = scene.quadrature_weights()
    grids = np.meshgrid(*coords, indexing="ij")
    wgrid = np.meshgrid(*weights, indexing="ij")
    wtotal = np.ones_like(wgrid[0])
    for w in wgrid:
        wtotal = wtotal * w

    reflections = [np.ones(scene.dimension)]
    signs = [1.0]
    if scene.dirichlet_images:
        reflections = []
        signs = []
        for mask in range(2 ** scene.dimension):
            refl = np.array(
                [-1.0 if (mask >> j) & 1 else 1.0 for j in range(scene.dimension)]
            )
            reflections.append(refl)
            signs.append((-1.0) ** bin(mask).count("1"))

    total = 0.0 + 0.0j
    for refl, sign in zip(reflections, signs):
        dist2 = np.zeros_like(grids[0], dtype=float)
        for j, gcoord in enumerate(grids):
            dist2 = dist2 + (point[j] - refl[j] * gcoord) ** 2
        dist = np.sqrt(dist2)
        total += sign * np.sum(wtotal * g * _greens_function(scene.k0, dist, scene.dimension))
    return complex(total)


def farfield_amplitude(scene: FarfieldScene, g: np.ndarray, angle: float,
                       radius: float) -> complex:
    """Scattered-wave amplitude along one direction with the leading
    outgoing 2D factor exp(i k0 rho)/sqrt(rho) divided out."""
    if scene.dimension != 2:
        raise ParameterError("amplitude extraction is implemented for 2D scenes")
    point = (radius * np.cos(angle), radius * np.sin(angle))
    value = evaluate_exterior(scene, g, point)
    return value * np.sqrt(radius) * np.exp(-1j * scene.k0 * radius)


def cross_section(scene: FarfieldScene, u_interior: np.ndarray, angles,
                  radius: float | None = None) -> np.ndarray:
    """Relative single-differential cross section |A(angle)|^2, normalized
    to unit maximum.

    Angles are hyperangles in (0, pi/2); the extraction radius defaults to
    2.5 times the support bound.  Absolute normalization is out of scope,
    so only the shape is meaningful.
    """
    if scene.dimension != 2:
        raise ParameterError("cross sections are implemented for 2D scenes")
    angles = np.asarray(angles, dtype=float)
    if angles.size and (angles.min() <= 0.0 or angles.max() >= np.pi / 2):
        raise ParameterError("angles must lie strictly inside (0, pi/2)")
    if radius is None:
        radius = 2.5 * scene.support_bound
    g = effective_source(scene, u_interior)
    values = np.array(
        [abs(farfield_amplitude(scene, g, a, radius)) ** 2 for a in angles]
    )
    peak = values.max() if values.size else 0.0
    if peak > 0.0:
        values = values / peak
    return values
