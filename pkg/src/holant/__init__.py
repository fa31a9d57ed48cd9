"""Holant problems: evaluation, holographic transforms, and dichotomy classification."""

from .scalars import EXACT, FLOAT, Backend, GaussQ, get_backend, parse_scalar, format_scalar
from .sigcore import (
    LocalMap,
    Signature,
    SymmetricSignature,
    apply_local,
    connected_factors,
    constants,
    from_symmetric,
    is_degenerate,
    named_state,
    proportional,
    tensor,
    to_symmetric,
)

__version__ = "0.1.0"

__all__ = [
    "EXACT", "FLOAT", "Backend", "GaussQ", "get_backend", "parse_scalar", "format_scalar",
    "LocalMap", "Signature", "SymmetricSignature", "apply_local", "connected_factors",
    "constants", "from_symmetric", "is_degenerate", "named_state", "proportional",
    "tensor", "to_symmetric",
]
