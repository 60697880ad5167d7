"""fraisselab: a desk-scale workbench for amalgamation classes.

Decides (at bounded scale) whether a class splits, builds finite limit
stages with absorbing partitions, plays the extension game on the
splitting side, extends partial isomorphisms globally on the other side,
and carries the rational-metric analogue of the whole story.
"""

__version__ = "0.1.0"

from .structures import (  # noqa: F401
    FinStructure,
    PartialMap,
    RqfType,
    Signature,
    StructureError,
    canonical_form,
    enumerate_rqf_types,
    find_embeddings,
    induced_substructure,
)
