"""Exact computation with prefix-rewriting automorphisms of Cantor space."""

from .cantor import (
    EMPTY,
    FULL,
    CantorError,
    CantorPoint,
    ClopenSet,
    MeasureSpec,
    boolean,
    canonicalize,
    dyadic_chunk,
    measure,
    point,
    point_in,
    split_indexed,
)
from .automorphism import (
    BudgetExceeded,
    Cocycle,
    InvalidAutomorphism,
    Literal,
    MapError,
    PeriodicDecomposition,
    PrefixAutomorphism,
    ResolutionDiverges,
    ResolutionTable,
    Scheme,
    apply_point,
    bitflip,
    build,
    compose,
    conjugate,
    counter,
    drift_map,
    finite_exchange,
    full_group_cocycle,
    identity,
    image_clopen,
    invert,
    odometer,
    periodic_decomposition,
    power,
    resolve,
    saturation_clopen,
    scheme_automorphism,
)

__all__ = [name for name in dir() if not name.startswith("_")]
