"""
Report and plot-data writers.

Cells go to CSV with the header

    step,theta_lo,theta_hi,x_lo,x_hi,y_lo,y_hi,status

one row per cell, endpoints written with ``repr`` so they read back as the
exact same floats. ``status`` is ``kept``/``discarded`` for enclosure cells
and the failing condition for covering witnesses. Point clouds (orbits,
images of the domain) carry the seam orientation of the stable bundle so a
plotter can glue θ = 0 to θ = period correctly. Covering reports go to JSON
with stable keys and a ``format`` marker.
"""

import csv
import json
import logging
import os
from typing import Dict, Iterable, Iterator, List, Optional, Sequence

import numpy as np

from .covering import CoveringReport, FailedCell
from .enclosure import EnclosureStep
from .geometry import CellBatch, DomainSpec

logger = logging.getLogger(__name__)

CELL_FIELDS = ["step", "theta_lo", "theta_hi", "x_lo", "x_hi", "y_lo", "y_hi", "status"]
POINT_FIELDS = ["iterate", "theta", "x", "y", "stable_seam"]
SWEEP_FIELDS = ["beta", "x"]
REPORT_FORMAT = "bundle-covering-report/1"


def _ensure_parent(path: str):
    parent = os.path.dirname(os.fspath(path))
    if parent:
        os.makedirs(parent, exist_ok=True)


def seam_orientation(mobius_stable: bool) -> str:
    return "orientation-reversing" if mobius_stable else "orientation-preserving"


def cell_rows(
    cells: CellBatch,
    step: int = 0,
    kept: Optional[np.ndarray] = None,
    statuses: Optional[Sequence[str]] = None,
) -> Iterator[Dict]:
    for i in range(len(cells)):
        if statuses is not None:
            status = statuses[i]
        else:
            status = "kept" if kept is None or kept[i] else "discarded"
        yield {
            "step": step,
            "theta_lo": repr(float(cells.theta.lo[i])),
            "theta_hi": repr(float(cells.theta.hi[i])),
            "x_lo": repr(float(cells.x.lo[i])),
            "x_hi": repr(float(cells.x.hi[i])),
            "y_lo": repr(float(cells.y.lo[i])),
            "y_hi": repr(float(cells.y.hi[i])),
            "status": status,
        }


def _write_rows(rows: Iterable[Dict], path, fields: List[str] = CELL_FIELDS, what: str = "cells") -> int:
    _ensure_parent(path)
    count = 0
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
            count += 1
    logger.info(f"Wrote {count} {what} to {path}")
    return count


def export_cells(cells: CellBatch, path, step: int = 0) -> int:
    """Write one batch of cells (status ``kept``); returns the row count"""
    return _write_rows(cell_rows(cells, step), path)


def export_witnesses(failed: Sequence[FailedCell], path) -> int:
    """Write failing cells of a covering check, status = the condition that failed"""
    cells = CellBatch.from_cells(f.cell for f in failed)
    return _write_rows(cell_rows(cells, statuses=[f.condition.value for f in failed]), path)


def export_steps(steps: Iterable[EnclosureStep], path, survivors_only: bool = False) -> int:
    """Write every cell of every enclosure step with its kept/discarded status"""

    def rows():
        for step in steps:
            if survivors_only:
                yield from cell_rows(step.survivors, step.index)
            else:
                yield from cell_rows(step.cells, step.index, step.kept)

    return _write_rows(rows(), path)


def export_points(points: np.ndarray, labels: np.ndarray, path, mobius_stable: bool = False) -> int:
    """Write an (n, 3) array of (θ, x, y) points; ``labels`` fills the iterate column"""
    seam = seam_orientation(mobius_stable)

    def rows():
        for label, (theta, x, y) in zip(labels, points):
            yield {"iterate": int(label), "theta": repr(float(theta)), "x": repr(float(x)), "y": repr(float(y)),
                   "stable_seam": seam}

    return _write_rows(rows(), path, POINT_FIELDS, "points")


def export_sweep(rows: np.ndarray, path) -> int:
    """Write (β, x) pairs of a parameter sweep"""
    return _write_rows(
        ({"beta": repr(float(beta)), "x": repr(float(x))} for beta, x in rows), path, SWEEP_FIELDS, "sweep points"
    )


def report_document(report: CoveringReport, domain: Optional[DomainSpec] = None) -> Dict:
    doc = {"format": REPORT_FORMAT, **report.to_dict()}
    if domain is not None:
        doc["domain"] = {**domain.describe(), "stable_seam": seam_orientation(domain.mobius_stable)}
    return doc


def export_report(report: CoveringReport, path, domain: Optional[DomainSpec] = None) -> None:
    _ensure_parent(path)
    with open(path, "w") as f:
        json.dump(report_document(report, domain), f, indent=2, ensure_ascii=False)
        f.write("\n")
    logger.info(f"Wrote {report.verdict.value} report to {path}")
