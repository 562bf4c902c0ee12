"""
Enclosure of the set of points that stay in a domain.

Cover the domain with a grid of cells, iterate each cell with interval
images and discard it once an image is certainly outside the domain. Every
refinement step bisects the survivors in θ, x and y (8 children each) and
repeats. Any point whose orbit stays in the domain for ``max_iterates`` steps
lies in a survivor at every step.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from .covering import run_chunks
from .dynamics import MapSpec
from .errors import IntervalError, ParameterError
from .geometry import CellBatch, reduce_angle
from .interval import TWO_PI, Interval, certainly_greater, certainly_less, contains, parts, power, sqr

logger = logging.getLogger(__name__)

DEFAULT_GRID = (32, 16, 16)
DEFAULT_MAX_ITERATES = 3
DEFAULT_REFINE_STEPS = 2
# images wider than this stop iterating and keep their cell
BLOW_UP_BOUND = 1e50


@dataclass(frozen=True)
class EnclosureDomain:
    """Box [0, period] × x × y, optionally cut down to the disc x² + y² < r²"""

    x: Interval
    y: Interval
    disc_radius: Optional[Interval] = None
    period: Interval = TWO_PI

    @classmethod
    def box(cls, r="2", disc: bool = False) -> "EnclosureDomain":
        radius = Interval.coerce(r)
        if not radius.lo > 0:
            raise ParameterError(f"domain radius must be positive, got {radius}")
        side = Interval(-radius.hi, radius.hi)
        return cls(side, side, radius if disc else None)

    @property
    def theta_box(self) -> Interval:
        return Interval(0.0, self.period.hi)

    def outside(self, x: Interval, y: Interval) -> np.ndarray:
        """Cells whose (x, y) certainly lie outside the domain"""
        out = (
            np.asarray(certainly_less(x, self.x))
            | np.asarray(certainly_greater(x, self.x))
            | np.asarray(certainly_less(y, self.y))
            | np.asarray(certainly_greater(y, self.y))
        )
        if self.disc_radius is not None:
            out |= np.asarray(certainly_greater(sqr(x) + sqr(y), power(self.disc_radius, 2)))
        return out


@dataclass
class EnclosureStep:
    index: int
    cells: CellBatch
    kept: np.ndarray

    @property
    def survivors(self) -> CellBatch:
        return self.cells.select(self.kept)


@dataclass(frozen=True)
class EnclosureRun:
    domain: EnclosureDomain
    map: MapSpec
    grid: Tuple[int, int, int] = DEFAULT_GRID
    max_iterates: int = DEFAULT_MAX_ITERATES
    refine_steps: int = DEFAULT_REFINE_STEPS
    steps: List[EnclosureStep] = field(default_factory=list)

    @property
    def survivors(self) -> List[CellBatch]:
        return [step.survivors for step in self.steps]


def _initial_cells(domain: EnclosureDomain, grid: Tuple[int, int, int]) -> CellBatch:
    n_theta, n_x, n_y = grid
    theta, x, y = parts(domain.theta_box, n_theta), parts(domain.x, n_x), parts(domain.y, n_y)
    i, j, k = (a.reshape(-1) for a in np.meshgrid(np.arange(n_theta), np.arange(n_x), np.arange(n_y), indexing="ij"))
    return CellBatch(theta[i], x[j], y[k])


def _escape_test(run: EnclosureRun):
    def escapes(cells: CellBatch) -> np.ndarray:
        try:
            return _iterate(run, cells)
        except IntervalError as e:
            if len(cells) == 1:
                logger.debug(f"Keeping cell after evaluation failure: {e}")
                return np.zeros(1, dtype=bool)
            half = len(cells) // 2
            return np.concatenate(
                [escapes(cells.select(slice(0, half))), escapes(cells.select(slice(half, None)))]
            )

    return escapes


def _iterate(run: EnclosureRun, cells: CellBatch) -> np.ndarray:
    """Cells with an image certainly outside the domain within max_iterates steps"""
    escaped = np.zeros(len(cells), dtype=bool)
    active = np.arange(len(cells))
    theta, x, y = cells.theta, cells.x, cells.y
    for _ in range(run.max_iterates):
        if not len(active):
            break
        theta, x, y = run.map.eval(theta, x, y)
        out = run.domain.outside(x, y)
        escaped[active[out]] = True
        bounded = (np.maximum(np.abs(x.lo), np.abs(x.hi)) < BLOW_UP_BOUND) & (
            np.maximum(np.abs(y.lo), np.abs(y.hi)) < BLOW_UP_BOUND
        )
        stay = ~out & bounded
        active = active[stay]
        theta = reduce_angle(theta[stay], run.domain.period)
        x, y = x[stay], y[stay]
    return escaped


def propagate(run: EnclosureRun, jobs: int = 1) -> EnclosureRun:
    """Run the discard-and-refine loop and return the run with its steps filled in"""
    if run.max_iterates < 1:
        raise ParameterError(f"max_iterates must be at least 1, got {run.max_iterates}")
    if run.refine_steps < 0:
        raise ParameterError(f"refine_steps must be non-negative, got {run.refine_steps}")
    if any(n < 1 for n in run.grid):
        raise ParameterError(f"grid counts must be positive, got {run.grid}")

    escapes = _escape_test(run)
    steps = []
    cells = _initial_cells(run.domain, run.grid)
    for index in range(run.refine_steps + 1):
        if index:
            cells = steps[-1].survivors.bisect_all()
        kept = ~run.domain.outside(cells.x, cells.y)
        if kept.any():
            candidates = cells.select(kept)
            kept[kept] = ~run_chunks(escapes, candidates, jobs)
        steps.append(EnclosureStep(index, cells, kept))
        logger.info(f"Enclosure step {index}: {int(kept.sum())} of {len(cells)} cells kept")
    return replace(run, steps=steps)


def theta_slice(run: EnclosureRun, theta: float, step: Optional[int] = None) -> CellBatch:
    """Survivors whose θ-interval contains theta (reduced modulo the period first)"""
    if not run.steps:
        raise ParameterError("enclosure run has not been propagated")
    survivors = run.steps[-1 if step is None else step].survivors
    if not len(survivors):
        return survivors
    angle = float(np.mod(theta, float(run.domain.period.lo)))
    return survivors.select(np.asarray(contains(survivors.theta, angle)))
