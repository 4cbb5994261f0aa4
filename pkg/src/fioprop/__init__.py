"""fioprop: Schrodinger propagators as Fourier integral operators.

Pipeline: Hamilton flow with variational data -> inversion of the flow
maps -> action-integral phase -> oscillatory parametrix E and defect G ->
Volterra-corrected propagator U, with estimate suites measuring the decay
bounds every stage is supposed to satisfy.
"""

__version__ = "0.1.0"

from .backend import backend_name
from .errors import FiopropError
from .grid import FreqGrid, SpaceGrid, TimeWindow

__all__ = [
    "FiopropError",
    "FreqGrid",
    "SpaceGrid",
    "TimeWindow",
    "__version__",
    "backend_name",
]
