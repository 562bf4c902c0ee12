"""
Covering verification engine.

Certifies, on finite subdivisions, the conditions of a covering relation
for a homotopy h on the domain D:

- exit:       h([0,1] × D⁻) misses D (the image x-interval is disjoint from
              [-r_u, r_u] on one side or the other),
- entry:      h([0,1] × D) misses D⁺ (image x disjoint from [-r_u, r_u], or
              image y strictly inside [-r_s, r_s]),
- expansion:  |A_θ| > 1 for every θ,
- degree:     deg(η) is odd (full coverings only).

A cell that fails is halved along its widest coordinate and its children are
rechecked, breadth first, for up to ``refine_depth`` levels. Cells still
failing after that are reported as witnesses. NOT_VERIFIED means "could not
verify", never "the covering fails".

Cells are checked in fixed-size chunks; chunks may run on a thread pool and
results are merged in input order, so reports do not depend on ``jobs``.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .dynamics import EtaLift, HomotopySpec, eval_homotopy_batch, family_members
from .errors import CoveringError, DegreeError, EvaluationError, ParameterError
from .geometry import (
    COORDINATES,
    Cell,
    CellBatch,
    DomainSpec,
    SubdivisionScheme,
    exit_faces,
    subdivide,
)
from .interval import (
    Interval,
    certainly_greater,
    certainly_less,
    intersects,
    parts,
    power,
    subset_interior,
    width,
)

logger = logging.getLogger(__name__)

DEFAULT_REFINE_DEPTH = 10
DEGREE_DEPTH_LIMIT = 24
CHUNK_SIZE = 32768
# refinement stops early rather than letting a hopeless check grow without bound
MAX_REFINE_CELLS = 2_000_000
# witnesses kept per condition; the total count is always reported
MAX_WITNESSES = 1000


class Verdict(str, Enum):
    VERIFIED = "VERIFIED"
    NOT_VERIFIED = "NOT_VERIFIED"
    ERROR = "ERROR"


class Mode(str, Enum):
    FIBER = "fiber"
    FULL = "full"
    SEQUENCE = "sequence"


class Condition(str, Enum):
    EXIT = "exit"
    ENTRY = "entry"
    EXPANSION = "expansion"
    DEGREE = "degree"


def _params_dict(params: Dict[str, Interval]) -> Dict:
    return {k: [float(v.lo), float(v.hi)] for k, v in params.items()}


@dataclass
class FailedCell:
    """A cell on which a condition could not be certified; ``params`` pins family parameters"""

    condition: Condition
    cell: Cell
    params: Dict[str, Interval] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        out = {"condition": self.condition.value, "cell": self.cell.to_dict()}
        if self.params:
            out["params"] = _params_dict(self.params)
        return out


@dataclass
class ConditionResult:
    condition: Condition
    ok: bool
    cells_checked: int = 0
    failed_cells: List[FailedCell] = field(default_factory=list)
    failed_count: int = 0


@dataclass
class CoveringReport:
    verdict: Verdict
    mode: Mode
    name: str = ""
    exit_ok: bool = False
    entry_ok: bool = False
    expansion_ok: bool = False
    degree: Optional[int] = None
    reason: str = ""
    cells_checked: Dict[str, int] = field(default_factory=dict)
    failed_cells: List[FailedCell] = field(default_factory=list)
    failed_count: int = 0
    wall_time: float = 0.0
    members: List["CoveringReport"] = field(default_factory=list)
    first_failing_index: Optional[int] = None

    @property
    def verified(self) -> bool:
        return self.verdict is Verdict.VERIFIED

    @property
    def deg2(self) -> Optional[int]:
        return None if self.degree is None else self.degree % 2

    def to_dict(self) -> Dict:
        return {
            "verdict": self.verdict.value,
            "mode": self.mode.value,
            "name": self.name,
            "exit_ok": self.exit_ok,
            "entry_ok": self.entry_ok,
            "expansion_ok": self.expansion_ok,
            "degree": self.degree,
            "deg2": self.deg2,
            "reason": self.reason,
            "cells_checked": dict(self.cells_checked),
            "failed_cells": [f.to_dict() for f in self.failed_cells],
            "failed_count": self.failed_count,
            "wall_time": self.wall_time,
            "members": [m.to_dict() for m in self.members],
            "first_failing_index": self.first_failing_index,
        }


# --- cell tests -------------------------------------------------------------

CellTest = Callable[[CellBatch], np.ndarray]


def _x_escapes(x: Interval, d: DomainSpec) -> np.ndarray:
    box = d.x_box
    return np.asarray(certainly_less(x, box)) | np.asarray(certainly_greater(x, box))


def exit_test(h: HomotopySpec, d: DomainSpec) -> CellTest:
    def test(cells: CellBatch) -> np.ndarray:
        _, x, _ = eval_homotopy_batch(h, cells)
        return _x_escapes(x, d)

    return test


def entry_test(h: HomotopySpec, d: DomainSpec) -> CellTest:
    def test(cells: CellBatch) -> np.ndarray:
        _, x, y = eval_homotopy_batch(h, cells)
        inside = np.asarray(subset_interior(y, d.y_inner))
        if not d.has_unstable:
            return inside
        return _x_escapes(x, d) | inside

    return test


def expansion_test(h: HomotopySpec, d: DomainSpec) -> CellTest:
    def test(cells: CellBatch) -> np.ndarray:
        if not d.has_unstable:
            return np.ones(len(cells), dtype=bool)
        return np.asarray(certainly_greater(abs(h.expansion(cells.theta)), 1))

    return test


def run_chunks(test: CellTest, cells: CellBatch, jobs: int) -> np.ndarray:
    """Apply a vectorised cell test chunk by chunk; results keep input order"""
    chunks = list(cells.chunks(CHUNK_SIZE))
    if not chunks:
        return np.zeros(0, dtype=bool)
    if jobs <= 1 or len(chunks) == 1:
        results = [test(chunk) for chunk in chunks]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            results = list(executor.map(test, chunks))
    return np.concatenate([np.atleast_1d(r) for r in results])


def _certify(
    cells: CellBatch,
    test: CellTest,
    refine_depth: int,
    jobs: int,
    coordinates: Sequence[str] = COORDINATES,
):
    """Check cells, refining failures breadth first; returns (cells checked, failing leaves)"""
    checked = 0
    leaves = []
    pending = cells
    for level in range(refine_depth + 1):
        if not len(pending):
            break
        ok = run_chunks(test, pending, jobs)
        checked += len(pending)
        failed = pending.select(~ok)
        if not len(failed):
            pending = CellBatch.empty()
            break
        widths = np.stack([np.atleast_1d(width(failed.coordinate(c))) for c in coordinates])
        splittable = widths.max(axis=0) > 0
        leaves.append(failed.select(~splittable))
        pending = failed.select(splittable)
        if level == refine_depth:
            break
        if 2 * len(pending) > MAX_REFINE_CELLS:
            logger.warning(
                f"Stopping refinement at level {level}: {len(pending)} failing cells exceed the budget"
            )
            break
        logger.debug(f"Refinement level {level + 1}: bisecting {len(pending)} failing cells")
        pending = pending.bisect_widest(coordinates)
    leaves.append(pending)
    return checked, CellBatch.concat(leaves)


def _check_over_family(
    h: HomotopySpec,
    condition: Condition,
    make_cells: Callable[[], CellBatch],
    make_test: Callable[[HomotopySpec], CellTest],
    s: SubdivisionScheme,
    refine_depth: int,
    jobs: int,
    coordinates: Sequence[str] = COORDINATES,
) -> ConditionResult:
    result = ConditionResult(condition, ok=True)
    cells = make_cells()
    for assignment, member in family_members(h, s.n_family):
        checked, failed = _certify(cells, make_test(member), refine_depth, jobs, coordinates)
        result.cells_checked += checked
        result.failed_count += len(failed)
        room = MAX_WITNESSES - len(result.failed_cells)
        if room > 0:
            result.failed_cells.extend(
                FailedCell(condition, cell, assignment) for cell in failed.select(slice(0, room))
            )
    result.ok = result.failed_count == 0
    level = logging.INFO if result.ok else logging.WARNING
    logger.log(
        level,
        f"{h.name}: {condition.value} condition {'certified' if result.ok else 'not certified'} "
        f"({result.cells_checked} cells checked, {result.failed_count} failing)",
    )
    return result


def check_exit(
    h: HomotopySpec,
    d: DomainSpec,
    s: SubdivisionScheme,
    refine_depth: int = DEFAULT_REFINE_DEPTH,
    jobs: int = 1,
) -> ConditionResult:
    """Certify h([0,1] × D⁻) ∩ D = ∅ on the exit faces"""
    if not d.has_unstable:
        return ConditionResult(Condition.EXIT, ok=True)
    return _check_over_family(
        h,
        Condition.EXIT,
        lambda: exit_faces(d, s),
        lambda member: exit_test(member, d),
        s,
        refine_depth,
        jobs,
        ("alpha", "theta", "y"),
    )


def check_entry(
    h: HomotopySpec,
    d: DomainSpec,
    s: SubdivisionScheme,
    refine_depth: int = DEFAULT_REFINE_DEPTH,
    jobs: int = 1,
) -> ConditionResult:
    """Certify h([0,1] × D) ∩ D⁺ = ∅ on the full grid"""
    return _check_over_family(
        h,
        Condition.ENTRY,
        lambda: subdivide(d, s),
        lambda member: entry_test(member, d),
        s,
        refine_depth,
        jobs,
    )


def check_expansion(
    h: HomotopySpec, d: DomainSpec, n_theta: int, n_family: int = 10
) -> ConditionResult:
    """Certify |A_θ| > 1 on n_theta parts of the base circle"""
    if not d.has_unstable:
        return ConditionResult(Condition.EXPANSION, ok=True)
    theta = parts(d.theta_box, n_theta)
    n = len(theta)
    cells = CellBatch(theta, d.x_box.broadcast((n,)), d.y_box.broadcast((n,)), Interval(np.ones(n)))
    return _check_over_family(
        h,
        Condition.EXPANSION,
        lambda: cells,
        lambda member: expansion_test(member, d),
        SubdivisionScheme(n_theta=n_theta, n_family=n_family),
        0,
        1,
        ("theta",),
    )


# --- degree -----------------------------------------------------------------


def compute_degree(eta: EtaLift, n_theta: int = 64, depth_limit: int = DEGREE_DEPTH_LIMIT) -> int:
    """Rigorous degree of the circle map with lift eta

    The base circle is cut into n_theta segments; a segment whose lift image is
    not narrower than half a period is halved, up to ``depth_limit`` times. The
    increments of the lift across the segments are summed and the total must
    meet exactly one multiple of the period.
    """
    if n_theta < 1:
        raise ParameterError(f"n_theta must be positive, got {n_theta}")
    period = eta.period
    half = 0.5 * float(period.lo)
    grid = np.linspace(0.0, float(period.lo), n_theta + 1)[:-1]
    for depth in range(depth_limit + 1):
        ends = np.append(grid[1:], float(period.hi))
        too_wide = np.atleast_1d(width(eta(Interval(grid, ends)))) >= half
        if not too_wide.any():
            break
        if depth == depth_limit:
            raise DegreeError("degree not certifiable at depth limit")
        midpoints = 0.5 * grid[too_wide] + 0.5 * ends[too_wide]
        grid = np.unique(np.concatenate([grid, midpoints]))

    starts = eta(Interval(grid))
    finishes = Interval.concat([eta(Interval(grid[1:])), eta(period)])
    total = (finishes - starts).total()
    first = math.floor(float(total.lo) / float(period.hi)) - 1
    last = math.ceil(float(total.hi) / float(period.lo)) + 1
    candidates = [k for k in range(first, last + 1) if intersects(Interval.coerce(k) * period, total)]
    if len(candidates) != 1:
        raise DegreeError(
            f"degree not certifiable: lift increment {total} meets multiples {candidates} of the period"
        )
    degree = candidates[0]
    if eta.declared_degree is not None and eta.declared_degree != degree:
        logger.warning(f"Computed degree {degree} differs from declared degree {eta.declared_degree}")
    logger.info(f"Degree of eta {eta.description or ''} is {degree} ({len(grid)} segments)")
    return degree


def _degree_result(h: HomotopySpec, d: DomainSpec, s: SubdivisionScheme):
    """(degree or None, reason, failure) over all family members"""
    degrees = set()
    for assignment, member in family_members(h, s.n_family):
        try:
            degree = compute_degree(member.eta, s.n_theta)
        except DegreeError as e:
            return None, str(e), _degree_failure(d, assignment)
        if degree % 2 == 0:
            return degree, "deg₂ = 0", _degree_failure(d, assignment)
        degrees.add(degree)
    if len(degrees) > 1:
        return None, f"degree differs across the family: {sorted(degrees)}", _degree_failure(d, {})
    return degrees.pop(), "", None


def _degree_failure(d: DomainSpec, assignment) -> FailedCell:
    return FailedCell(Condition.DEGREE, Cell(d.theta_box, d.x_box, d.y_box), dict(assignment))


# --- verification -----------------------------------------------------------


def _summarise(results: List[ConditionResult]) -> str:
    failing = [
        f"{r.condition.value} condition not certified on {r.failed_count} cells"
        for r in results
        if not r.ok
    ]
    return "; ".join(failing)


def _fiber_checks(h, d, s, refine_depth, jobs) -> List[ConditionResult]:
    return [
        check_exit(h, d, s, refine_depth, jobs),
        check_entry(h, d, s, refine_depth, jobs),
        check_expansion(h, d, s.n_theta, s.n_family),
    ]


def _error_report(h: HomotopySpec, mode: Mode, error: CoveringError, start: float) -> CoveringReport:
    logger.error(f"{h.name}: evaluation failed: {error}")
    return CoveringReport(
        Verdict.ERROR, mode, h.name, reason=str(error), wall_time=time.time() - start
    )


def _build_report(h, mode, results, start, degree=None, degree_reason="", degree_failure=None):
    exit_r, entry_r, expansion_r = results
    report = CoveringReport(
        Verdict.VERIFIED,
        mode,
        h.name,
        exit_ok=exit_r.ok,
        entry_ok=entry_r.ok,
        expansion_ok=expansion_r.ok,
        degree=degree,
        cells_checked={r.condition.value: r.cells_checked for r in results},
    )
    for r in results:
        report.failed_cells.extend(r.failed_cells)
        report.failed_count += r.failed_count
    reasons = [_summarise(results)] if not all(r.ok for r in results) else []
    if degree_failure is not None:
        report.failed_cells.append(degree_failure)
        report.failed_count += 1
        reasons.append(degree_reason)
    if report.failed_cells:
        report.verdict = Verdict.NOT_VERIFIED
        report.reason = "; ".join(reasons)
    report.wall_time = time.time() - start
    return report


def verify_fiber_covering(
    h: HomotopySpec,
    d: DomainSpec,
    s: SubdivisionScheme,
    refine_depth: int = DEFAULT_REFINE_DEPTH,
    jobs: int = 1,
) -> CoveringReport:
    """Exit, entry and expansion; no degree condition"""
    start = time.time()
    try:
        results = _fiber_checks(h, d, s, refine_depth, jobs)
    except EvaluationError as e:
        return _error_report(h, Mode.FIBER, e, start)
    return _build_report(h, Mode.FIBER, results, start)


def verify_full_covering(
    h: HomotopySpec,
    d: DomainSpec,
    s: SubdivisionScheme,
    refine_depth: int = DEFAULT_REFINE_DEPTH,
    jobs: int = 1,
) -> CoveringReport:
    """Fiber conditions plus an odd degree of η"""
    start = time.time()
    try:
        results = _fiber_checks(h, d, s, refine_depth, jobs)
        degree, reason, failure = _degree_result(h, d, s)
    except EvaluationError as e:
        return _error_report(h, Mode.FULL, e, start)
    return _build_report(h, Mode.FULL, results, start, degree, reason, failure)


def verify_sequence(
    hs: Sequence[HomotopySpec],
    d: DomainSpec,
    s: SubdivisionScheme,
    refine_depth: int = DEFAULT_REFINE_DEPTH,
    jobs: int = 1,
) -> CoveringReport:
    """Every member must verify as a full covering; reports the first failing index"""
    if not hs:
        raise ParameterError("sequence verification needs at least one homotopy")
    start = time.time()
    report = CoveringReport(Verdict.VERIFIED, Mode.SEQUENCE, " -> ".join(h.name for h in hs))
    for index, h in enumerate(hs):
        member = verify_full_covering(h, d, s, refine_depth, jobs)
        report.members.append(member)
        for condition, count in member.cells_checked.items():
            report.cells_checked[condition] = report.cells_checked.get(condition, 0) + count
        if not member.verified and report.first_failing_index is None:
            report.first_failing_index = index
            report.verdict = member.verdict
            report.reason = f"member {index} ({h.name}): {member.reason}"
            report.failed_cells = list(member.failed_cells)
            report.failed_count = member.failed_count
    report.exit_ok = all(m.exit_ok for m in report.members)
    report.entry_ok = all(m.entry_ok for m in report.members)
    report.expansion_ok = all(m.expansion_ok for m in report.members)
    degrees = {m.degree for m in report.members}
    report.degree = degrees.pop() if len(degrees) == 1 else None
    report.wall_time = time.time() - start
    return report


def recheck_failure(h: HomotopySpec, d: DomainSpec, failure: FailedCell, n_theta: int = 64) -> bool:
    """True if the witness still fails its condition when checked alone, without refinement"""
    member = h.with_params(**failure.params) if failure.params else h
    if failure.condition is Condition.DEGREE:
        try:
            return compute_degree(member.eta, n_theta) % 2 == 0
        except DegreeError:
            return True
    tests = {
        Condition.EXIT: exit_test,
        Condition.ENTRY: entry_test,
        Condition.EXPANSION: expansion_test,
    }
    cells = CellBatch.from_cells([failure.cell])
    return not bool(tests[failure.condition](member, d)(cells)[0])


# --- rate helper ------------------------------------------------------------


def nhim_min_k(C, lam) -> int:
    """Smallest k >= 1 with C·λ^k < 1, certified with outward rounding"""
    C = Interval.coerce(C)
    lam = Interval.coerce(lam)
    if not C.lo > 0:
        raise ParameterError(f"C must be positive, got {C}")
    if not (lam.lo > 0 and lam.hi < 1):
        raise ParameterError(f"lambda must lie in (0, 1), got {lam}")

    def certified(k: int) -> bool:
        return bool((C * power(lam, k)).hi < 1)

    estimate = math.log(1.0 / float(C.hi)) / math.log(float(lam.hi))
    k = max(1, math.floor(estimate))
    while not certified(k):
        k += 1
    while k > 1 and certified(k - 1):
        k -= 1
    return k
