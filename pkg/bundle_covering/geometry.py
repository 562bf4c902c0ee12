"""
Domain geometry over the base circle.

D is the product of the base circle [0, period) with the fiber boxes
|x| <= r_u and |y| <= r_s. D⁻ (exit set) is |x| = r_u, D⁺ (entry set) is
|y| = r_s. Radii are interval enclosures of the configured decimals, so:

- D is covered by the outer box [-r.hi, r.hi] (used for subdivision and for
  disjointness tests),
- "strictly inside [-r_s, r_s]" is tested against the inner box
  [-r_s.lo, r_s.lo].

Cells are handled in batches (``CellBatch``), one numpy array per coordinate,
so a whole grid is evaluated with a single vectorised interval expression.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ParameterError
from .interval import TWO_PI, UNIT, Interval, parts, width

logger = logging.getLogger(__name__)

COORDINATES = ("alpha", "theta", "x", "y")
SPACE_COORDINATES = ("theta", "x", "y")


def _as_radius(value, name: str) -> Interval:
    radius = Interval.coerce(value)
    if radius.shape:
        raise ParameterError(f"{name} must be a single number, got a batch")
    if not radius.lo > 0:
        raise ParameterError(f"{name} must be strictly positive, got {radius}")
    return radius


@dataclass(frozen=True)
class DomainSpec:
    """The domain D; ``r_u=None`` means there is no unstable direction"""

    r_u: Optional[Interval]
    r_s: Interval
    period: Interval = TWO_PI
    mobius_stable: bool = False

    def __post_init__(self):
        if self.r_u is not None:
            object.__setattr__(self, "r_u", _as_radius(self.r_u, "r_u"))
        object.__setattr__(self, "r_s", _as_radius(self.r_s, "r_s"))
        object.__setattr__(self, "period", _as_radius(self.period, "period"))

    @classmethod
    def from_radii(cls, r_u="1", r_s="1.2", period=None, mobius_stable=False) -> "DomainSpec":
        """Build a domain from exact decimal radii (strings, Fractions or ints)"""
        return cls(
            r_u=None if r_u is None else Interval.coerce(r_u),
            r_s=Interval.coerce(r_s),
            period=TWO_PI if period is None else Interval.coerce(period),
            mobius_stable=mobius_stable,
        )

    @property
    def has_unstable(self) -> bool:
        return self.r_u is not None

    @property
    def x_box(self) -> Interval:
        if self.r_u is None:
            return Interval(0.0)
        return Interval(-self.r_u.hi, self.r_u.hi)

    @property
    def y_box(self) -> Interval:
        return Interval(-self.r_s.hi, self.r_s.hi)

    @property
    def y_inner(self) -> Interval:
        return Interval(-self.r_s.lo, self.r_s.lo)

    @property
    def theta_box(self) -> Interval:
        return Interval(0.0, self.period.hi)

    def describe(self) -> Dict:
        return {
            "r_u": None if self.r_u is None else [float(self.r_u.lo), float(self.r_u.hi)],
            "r_s": [float(self.r_s.lo), float(self.r_s.hi)],
            "period": [float(self.period.lo), float(self.period.hi)],
            "mobius_stable": self.mobius_stable,
        }


@dataclass(frozen=True)
class Cell:
    theta: Interval
    x: Interval
    y: Interval
    alpha: Optional[Interval] = None

    def to_dict(self) -> Dict:
        out = {}
        for name in COORDINATES:
            value = getattr(self, name)
            if value is not None:
                out[name] = [float(value.lo), float(value.hi)]
        return out

    def __str__(self):
        return ", ".join(f"{k}=[{lo!r}, {hi!r}]" for k, (lo, hi) in self.to_dict().items())


@dataclass(frozen=True)
class SubdivisionScheme:
    """Grid counts for α, θ and the fibers; ``n_family`` splits interval parameters"""

    n_alpha: int = 1
    n_theta: int = 1
    n_x: int = 1
    n_y: int = 1
    n_family: int = 10

    def __post_init__(self):
        for name in ("n_alpha", "n_theta", "n_x", "n_y", "n_family"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise ParameterError(f"{name} must be a positive integer, got {value!r}")

    @classmethod
    def parse(cls, text: str, n_family: int = 10) -> "SubdivisionScheme":
        """Parse ``"n_alpha,n_theta,n_x,n_y"``, e.g. ``"4,100,50,50"``"""
        try:
            counts = [int(part) for part in text.split(",")]
        except ValueError as e:
            raise ParameterError(f"invalid scheme {text!r}: counts must be integers") from e
        if len(counts) != 4:
            raise ParameterError(f"invalid scheme {text!r}: expected 4 comma-separated counts")
        return cls(*counts, n_family=n_family)

    def __str__(self):
        return f"{self.n_alpha},{self.n_theta},{self.n_x},{self.n_y}"


class CellBatch(Sequence):
    """Structure-of-arrays batch of cells; every coordinate is an Interval of shape (n,)"""

    __slots__ = ("theta", "x", "y", "alpha")

    def __init__(self, theta: Interval, x: Interval, y: Interval, alpha: Optional[Interval] = None):
        n = len(theta)
        if alpha is None:
            alpha = Interval(np.zeros(n))
        for name, value in (("x", x), ("y", y), ("alpha", alpha)):
            if value.shape != (n,):
                raise ParameterError(f"cell batch coordinate {name} has shape {value.shape}, expected ({n},)")
        self.theta = theta
        self.x = x
        self.y = y
        self.alpha = alpha

    @classmethod
    def empty(cls) -> "CellBatch":
        nothing = Interval(np.empty(0))
        return cls(nothing, nothing, nothing, nothing)

    @classmethod
    def from_cells(cls, cells: Iterable[Cell]) -> "CellBatch":
        cells = list(cells)
        if not cells:
            return cls.empty()
        zero = Interval(0.0)
        coords = {
            name: Interval.concat(
                getattr(c, name) if getattr(c, name) is not None else zero for c in cells
            )
            for name in COORDINATES
        }
        return cls(**coords)

    @staticmethod
    def concat(batches: Iterable["CellBatch"]) -> "CellBatch":
        batches = [b for b in batches if len(b)]
        if not batches:
            return CellBatch.empty()
        return CellBatch(
            **{name: Interval.concat(getattr(b, name) for b in batches) for name in COORDINATES}
        )

    def __len__(self):
        return len(self.theta)

    def __getitem__(self, index) -> Union[Cell, "CellBatch"]:
        if isinstance(index, (int, np.integer)):
            if not -len(self) <= index < len(self):
                raise IndexError(f"cell index {index} out of range for {len(self)} cells")
            return Cell(self.theta[index], self.x[index], self.y[index], self.alpha[index])
        return self.select(index)

    def select(self, index) -> "CellBatch":
        """Sub-batch by boolean mask, index array or slice"""
        return CellBatch(**{name: getattr(self, name)[index] for name in COORDINATES})

    def replace(self, **coords: Interval) -> "CellBatch":
        current = {name: getattr(self, name) for name in COORDINATES}
        current.update(coords)
        return CellBatch(**current)

    def coordinate(self, name: str) -> Interval:
        return getattr(self, name)

    def chunks(self, size: int) -> Iterator["CellBatch"]:
        for start in range(0, len(self), size):
            yield self.select(slice(start, start + size))

    def _split(self, name: str) -> "CellBatch":
        """Halve coordinate ``name`` of every cell; 2 children per cell, interleaved"""
        left, right = getattr(self, name).bisect()
        children = {}
        for other in COORDINATES:
            if other == name:
                lo = np.stack([left.lo, right.lo], axis=1).reshape(-1)
                hi = np.stack([left.hi, right.hi], axis=1).reshape(-1)
                children[other] = Interval(lo, hi)
            else:
                children[other] = getattr(self, other).repeat(2)
        return CellBatch(**children)

    def bisect_widest(self, coordinates: Sequence[str] = COORDINATES) -> "CellBatch":
        """Halve every cell along its widest coordinate among ``coordinates``

        Children are interleaved: cells 2i and 2i+1 of the result come from cell i.
        """
        if not len(self):
            return self
        widths = np.stack([np.atleast_1d(width(getattr(self, name))) for name in coordinates])
        choice = np.argmax(widths, axis=0)
        left = {name: getattr(self, name) for name in COORDINATES}
        right = dict(left)
        for i, name in enumerate(coordinates):
            mask = choice == i
            value = getattr(self, name)
            lo_half, hi_half = value.bisect()
            left[name] = Interval.where(mask, lo_half, left[name])
            right[name] = Interval.where(mask, hi_half, right[name])
        children = {}
        for name in COORDINATES:
            lo = np.stack([left[name].lo, right[name].lo], axis=1).reshape(-1)
            hi = np.stack([left[name].hi, right[name].hi], axis=1).reshape(-1)
            children[name] = Interval(lo, hi)
        return CellBatch(**children)

    def bisect_all(self, coordinates: Sequence[str] = SPACE_COORDINATES) -> "CellBatch":
        """Halve every cell in each of ``coordinates`` (2**len children per cell, grouped per parent)"""
        batch = self
        for name in coordinates:
            batch = batch._split(name)
        return batch

    def volume(self, coordinates: Sequence[str] = SPACE_COORDINATES) -> float:
        total = np.ones(len(self))
        for name in coordinates:
            total = total * (getattr(self, name).hi - getattr(self, name).lo)
        return float(total.sum())

    def __repr__(self):
        return f"CellBatch({len(self)} cells)"


def _grid(axes: List[Tuple[str, Interval]]) -> CellBatch:
    """Cartesian product of per-coordinate part batches, lexicographic in axis order"""
    sizes = [len(values) for _, values in axes]
    indices = np.meshgrid(*[np.arange(n) for n in sizes], indexing="ij")
    coords = {}
    for (name, values), index in zip(axes, indices):
        coords[name] = values[index.reshape(-1)]
    return CellBatch(**coords)


def subdivide(d: DomainSpec, s: SubdivisionScheme) -> CellBatch:
    """Grid cells covering [0,1] × [0,period] × x_box × y_box, ordered by (α, θ, x, y) index"""
    x_parts = parts(d.x_box, s.n_x) if d.has_unstable else Interval(np.zeros(1))
    cells = _grid(
        [
            ("alpha", parts(UNIT, s.n_alpha)),
            ("theta", parts(d.theta_box, s.n_theta)),
            ("x", x_parts),
            ("y", parts(d.y_box, s.n_y)),
        ]
    )
    logger.debug(f"Subdivided domain into {len(cells)} cells (scheme {s})")
    return cells


def exit_faces(d: DomainSpec, s: SubdivisionScheme) -> CellBatch:
    """Cells covering [0,1] × D⁻, ordered by (α, side, θ, y) with the left face first"""
    if not d.has_unstable:
        return CellBatch.empty()
    sides = Interval(np.array([-d.r_u.hi, d.r_u.lo]), np.array([-d.r_u.lo, d.r_u.hi]))
    return _grid(
        [
            ("alpha", parts(UNIT, s.n_alpha)),
            ("x", sides),
            ("theta", parts(d.theta_box, s.n_theta)),
            ("y", parts(d.y_box, s.n_y)),
        ]
    )


def wrap(theta: Interval, period: Interval = TWO_PI) -> Interval:
    """Enclosure of theta reduced modulo period

    Returns [0, period] wherever the reduced interval would not stay connected,
    which includes every input spanning a full period.
    """
    theta = Interval.coerce(theta)
    period = Interval.coerce(period)
    reduced, connected = _reduce(theta, period)
    return Interval.where(connected, reduced, Interval(np.zeros(theta.shape), np.full(theta.shape, period.hi)))


def reduce_angle(theta: Interval, period: Interval = TWO_PI) -> Interval:
    """Like ``wrap`` but leaves an interval unreduced when reduction would widen it"""
    reduced, connected = _reduce(theta, period)
    return Interval.where(connected, reduced, theta)


def _reduce(theta: Interval, period: Interval):
    turns = np.floor(theta.lo / float(period.lo))
    with np.errstate(invalid="ignore"):
        shifted = theta - Interval(turns) * period
    connected = (shifted.lo >= 0) & (shifted.hi < period.lo)
    return shifted, connected
