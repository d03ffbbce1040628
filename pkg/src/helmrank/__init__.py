"""Low-rank and Tucker-tensor solvers for 2D/3D Helmholtz scattering
problems with exterior-complex-scaled absorbing boundaries."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    BandStructureError,
    ConfigError,
    HelmrankError,
    ParameterError,
    ResourceLimitError,
    SamplingError,
    SingularSystemError,
)
