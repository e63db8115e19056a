"""Divergence kernels from gauge pairs, deformed exponential families,
q-Gaussian repetition laws and dependent law-of-large-numbers experiments."""

from .errors import DomainError, InfeasibleError, NoSolutionError
from .gauge import (
    Interval,
    ScalarFn,
    GaugeTriple,
    DerivedFunctions,
    EquivalenceTransform,
    builtin_gauge,
    derived,
    d_htau,
    exp_htau,
    apply_equivalence,
    gauge_from_pair,
    delta_pair,
    legendre_conjugate,
    conjugate_fn,
    gauge_to_json,
    gauge_from_json,
)
from . import discrete
from . import qgauss
from . import lln

__version__ = "0.1.0"
