import csv
import json

import numpy as np

from bundle_covering.covering import Condition, CoveringReport, FailedCell, Mode, Verdict
from bundle_covering.enclosure import EnclosureStep
from bundle_covering.geometry import Cell, CellBatch, DomainSpec, SubdivisionScheme, subdivide
from bundle_covering.interval import Interval
from bundle_covering.reporting import (
    CELL_FIELDS,
    POINT_FIELDS,
    REPORT_FORMAT,
    SWEEP_FIELDS,
    export_cells,
    export_points,
    export_report,
    export_steps,
    export_sweep,
    export_witnesses,
)


def test_empty_cell_list_writes_header_only(tmp_path) -> None:
    path = tmp_path / "cells.csv"
    assert export_cells(CellBatch.empty(), path) == 0
    assert path.read_text() == ",".join(CELL_FIELDS) + "\n"


def test_cells_read_back_exactly(tmp_path) -> None:
    cells = subdivide(DomainSpec.from_radii("1", "1.2"), SubdivisionScheme(1, 3, 2, 2))
    path = tmp_path / "out" / "cells.csv"
    assert export_cells(cells, path, step=2) == 12
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 12
    assert {row["step"] for row in rows} == {"2"}
    assert float(rows[0]["theta_hi"]) == float(cells.theta.hi[0])
    assert float(rows[-1]["y_hi"]) == float(cells.y.hi[-1])


def test_rerun_is_byte_identical(tmp_path) -> None:
    cells = subdivide(DomainSpec.from_radii("1", "1.2"), SubdivisionScheme(1, 5, 3, 3))
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    export_cells(cells, first)
    export_cells(cells, second)
    assert first.read_bytes() == second.read_bytes()


def test_steps_carry_status(tmp_path) -> None:
    cells = subdivide(DomainSpec.from_radii("1", "1.2"), SubdivisionScheme(1, 2, 1, 1))
    steps = [EnclosureStep(0, cells, np.array([True, False]))]
    path = tmp_path / "steps.csv"
    export_steps(steps, path)
    with open(path, newline="") as f:
        assert [row["status"] for row in csv.DictReader(f)] == ["kept", "discarded"]
    assert export_steps(steps, path, survivors_only=True) == 1


def test_report_document(tmp_path) -> None:
    report = CoveringReport(Verdict.VERIFIED, Mode.FULL, "cap_homotopy", True, True, True, degree=3)
    path = tmp_path / "report.json"
    export_report(report, path)
    doc = json.loads(path.read_text())
    assert doc["format"] == REPORT_FORMAT
    assert doc["verdict"] == "VERIFIED"
    assert doc["failed_cells"] == []
    assert doc["degree"] == 3 and doc["deg2"] == 1


def test_report_marks_stable_seam(tmp_path) -> None:
    report = CoveringReport(Verdict.NOT_VERIFIED, Mode.FIBER, "custom", reason="exit condition not certified")
    path = tmp_path / "report.json"
    export_report(report, path, DomainSpec.from_radii("1", "1", mobius_stable=True))
    domain = json.loads(path.read_text())["domain"]
    assert domain["mobius_stable"] is True
    assert domain["stable_seam"] == "orientation-reversing"
    assert domain["r_u"] == [1.0, 1.0]


def test_witnesses_carry_failing_condition(tmp_path) -> None:
    face = Cell(Interval(0.0, 1.0), Interval(1.0), Interval(-1.2, 0.0), Interval(0.0, 0.25))
    inner = Cell(Interval(1.0, 2.0), Interval(-0.5, 0.5), Interval(1.0, 1.2), Interval(0.75, 1.0))
    failed = [FailedCell(Condition.EXIT, face), FailedCell(Condition.ENTRY, inner)]
    path = tmp_path / "witnesses.csv"
    assert export_witnesses(failed, path) == 2
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    assert [row["status"] for row in rows] == ["exit", "entry"]
    assert float(rows[0]["x_lo"]) == 1.0
    assert export_witnesses([], path) == 0
    assert path.read_text() == ",".join(CELL_FIELDS) + "\n"


def test_points_carry_seam_orientation(tmp_path) -> None:
    points = np.array([[0.5, 0.1, -0.2], [6.0, -0.3, 0.4]])
    path = tmp_path / "images.csv"
    assert export_points(points, np.array([1, 2]), path, mobius_stable=True) == 2
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        rows = list(reader)
    assert reader.fieldnames == POINT_FIELDS
    assert [row["iterate"] for row in rows] == ["1", "2"]
    assert float(rows[1]["theta"]) == 6.0 and float(rows[0]["y"]) == -0.2
    assert {row["stable_seam"] for row in rows} == {"orientation-reversing"}
    export_points(points, np.array([0, 0]), path)
    with open(path, newline="") as f:
        assert {row["stable_seam"] for row in csv.DictReader(f)} == {"orientation-preserving"}


def test_sweep_rows(tmp_path) -> None:
    path = tmp_path / "sweep.csv"
    assert export_sweep(np.array([[0.0, 0.0], [0.8, 0.3872983346207417]]), path) == 2
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(SWEEP_FIELDS)
    assert lines[2] == "0.8,0.3872983346207417"
