"""Validated numerics for covering relations on vector bundles over the circle."""

from .covering import (
    Condition,
    CoveringReport,
    Mode,
    Verdict,
    check_entry,
    check_exit,
    check_expansion,
    compute_degree,
    nhim_min_k,
    recheck_failure,
    verify_fiber_covering,
    verify_full_covering,
    verify_sequence,
)
from .dynamics import EtaLift, HomotopySpec, MapSpec, builtin, eval_homotopy
from .enclosure import EnclosureDomain, EnclosureRun, propagate, theta_slice
from .geometry import Cell, CellBatch, DomainSpec, SubdivisionScheme, exit_faces, subdivide, wrap
from .interval import PI, TWO_PI, Interval

__version__ = "0.1.0"
