"""Exact symbolic checks for graded symplectic (QP) manifolds and the algebroids they induce."""

__version__ = "0.1.0"

from .errors import QPError  # noqa: E402
from .graded_core import GradedAlgebra, GradedCoordinate, GradedPolynomial, Symbol  # noqa: E402
from .bracket_engine import Chart, CheckReport, master_obstruction, poisson_bracket  # noqa: E402

__all__ = [
    "__version__",
    "QPError",
    "GradedAlgebra",
    "GradedCoordinate",
    "GradedPolynomial",
    "Symbol",
    "Chart",
    "CheckReport",
    "master_obstruction",
    "poisson_bracket",
]
