"""gencourant: symbolic-numeric calculus on the generalized tangent bundle
TM (+) T*M of a coordinate chart.

Layers, bottom to top:

- ``expr``     scalar fields as expression trees (parse, differentiate,
               evaluate, simplify) plus chart sampling
- ``tensors``  dense variance-aware tensor fields and index algebra
- ``riemann``  classical operators of the chart metric (Levi-Civita
               connection, curvature, codifferential, Laplacian)
- ``gtb``      pairing, twisted Dorfman bracket, generalized metrics,
               bivector twists, Koszul bracket and Lie-algebroid calculus
- ``gconn``    metric-compatible torsion-free connections on the double
               bundle, their curvature tensors, and the exact quadratic
               Lie-algebra case
- ``streff``   string-background residuals (beta functions, flatness and
               block-diagonality identities, symplectic-gravity side)
- ``scene``/``cli``  scene files, residual reports and the command line
"""

from .errors import (
    ChartMismatch,
    CommandError,
    CyclicConstraintViolated,
    DegreeMismatch,
    DomainError,
    ExprSyntaxError,
    GencourantError,
    InvalidLieAlgebra,
    NotAntisymmetric,
    NotClosed,
    NotPositiveDefinite,
    NotTwistedPoisson,
    SceneError,
    SingularB,
    SingularMetric,
    SlotError,
    UnknownSymbol,
)
from .expr import Chart, Expr, chart, differentiate, evaluate, parse_expr, simplify

__all__ = [
    "Chart",
    "Expr",
    "chart",
    "differentiate",
    "evaluate",
    "parse_expr",
    "simplify",
    "GencourantError",
    "ExprSyntaxError",
    "UnknownSymbol",
    "DomainError",
    "ChartMismatch",
    "SlotError",
    "SingularMetric",
    "DegreeMismatch",
    "NotClosed",
    "NotPositiveDefinite",
    "NotAntisymmetric",
    "SingularB",
    "NotTwistedPoisson",
    "CyclicConstraintViolated",
    "InvalidLieAlgebra",
    "SceneError",
    "CommandError",
]

__version__ = "0.1.0"
