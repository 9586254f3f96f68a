"""Simulation and inference for point processes with function-valued marks.

Subpackage map:

- ``core``      state spaces, cadlag paths, configurations, path metrics
- ``ground``    ground-process simulators and thinning
- ``marks``     functional-mark models and mark densities
- ``geometry``  union-of-disks sections and coverage
- ``stats``     summary statistics, trace-variogram, kriging, identity checks
- ``infer``     intensity functionals, likelihoods and estimation schemes
- ``cli``       command-line entry point

Hot numeric kernels are numba-compiled; set ``FMPP_NO_NUMBA=1`` to force the
pure NumPy fallback (see ``benchmarks/bench_kernels.py`` for a comparison).
"""
from .core import (
    AuxMark,
    AuxMeasure,
    CadlagPath,
    Configuration,
    MarkedPoint,
    ReferenceSpec,
    SampleSchedule,
    Window,
    configuration_from_json,
    configuration_to_json,
    cylinder_contains,
    ground_projection,
    shift,
    skorohod_distance,
    temporal_projection,
    uniform_distance,
)
from .errors import NonConvergenceError, NumericalError, ValidationError

__version__ = "0.1.0"

__all__ = [
    "AuxMark",
    "AuxMeasure",
    "CadlagPath",
    "Configuration",
    "MarkedPoint",
    "ReferenceSpec",
    "SampleSchedule",
    "Window",
    "configuration_from_json",
    "configuration_to_json",
    "cylinder_contains",
    "ground_projection",
    "shift",
    "skorohod_distance",
    "temporal_projection",
    "uniform_distance",
    "ValidationError",
    "NumericalError",
    "NonConvergenceError",
    "__version__",
]
