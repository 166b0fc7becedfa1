"""Linear Dirac geometry, the Cartan-Dirac structure on matrix groups, and its
recovery by reducing a lattice model of connections on an interval."""

from . import cartan, holonomy, linalg, liegroup, qham, reduction
from .holonomy import DiscreteConnection, GaugeElement
from .liegroup import get_group, subalgebra_from_spec
from .linalg import LinearRelation, MetrizedSpace, Subspace
from .qham import QHamSpace, check_axioms, conjugacy_class, fuse
from .reduction import reduce_dirac, reduce_fiber, reduce_morphism, reduce_splitting

__version__ = "0.1.0"

__all__ = [
    "cartan",
    "holonomy",
    "linalg",
    "liegroup",
    "qham",
    "reduction",
    "DiscreteConnection",
    "GaugeElement",
    "LinearRelation",
    "MetrizedSpace",
    "QHamSpace",
    "Subspace",
    "check_axioms",
    "conjugacy_class",
    "fuse",
    "get_group",
    "reduce_dirac",
    "reduce_fiber",
    "reduce_morphism",
    "reduce_splitting",
    "subalgebra_from_spec",
]
