"""Verifiable toolkit for cyclic block designs and disjoint difference families."""

__version__ = "0.1.0"

from .blocks import (
    Block,
    block_mask,
    canonical_base_block,
    difference_multiset,
    make_block,
    orbit_blocks,
    orbit_length,
    translate,
)
from .designs import (
    CyclicDesign,
    InconsistencyError,
    Orbit,
    ShortOrbitReport,
    develop,
    rebuild_from_blocks,
    short_orbit_analysis,
    validate_design,
)
from .families import (
    CheckResult,
    DifferenceFamily,
    cdf_design_roundtrip,
    is_cdf,
    is_ddf,
    is_symmetric_ddf,
)
from .generate import (
    ConstructionError,
    EnumerationBudget,
    EnumerationStats,
    construct_sts_cdf,
    enumerate_cdfs,
    enumerate_cyclic_sts,
    superimpose,
)
