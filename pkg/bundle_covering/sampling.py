"""
Float point clouds for plotting.

Orbits, images of the domain and the β sweep of the toy family are computed
by evaluating the maps on degenerate intervals and taking midpoints, so they
use the same formulas the covering checks certify. They illustrate the
invariant sets; they prove nothing.
"""

import logging
from fractions import Fraction
from typing import List, Mapping, Optional, Tuple

import numpy as np

from .dynamics import MapSpec, builtin, eval_map_batch
from .enclosure import BLOW_UP_BOUND
from .errors import ParameterError
from .geometry import CellBatch, DomainSpec
from .interval import Interval, midpoint

logger = logging.getLogger(__name__)

DEFAULT_DENSITY = (200, 20, 20)


def step_points(f: MapSpec, points: np.ndarray) -> np.ndarray:
    """One step of f on an (n, 3) array of (θ, x, y); θ reduced to [0, period)"""
    cells = CellBatch(Interval(points[:, 0]), Interval(points[:, 1]), Interval(points[:, 2]))
    images = np.column_stack([np.atleast_1d(midpoint(v)) for v in eval_map_batch(f, cells)])
    images[:, 0] = np.mod(images[:, 0], float(f.period.lo))
    return images


def _bounded(points: np.ndarray, bound: float = BLOW_UP_BOUND) -> np.ndarray:
    return np.all(np.isfinite(points), axis=1) & (np.abs(points[:, 1:]).max(axis=1) < bound)


def sample_orbit(
    f: MapSpec, start: Tuple[float, float, float], n: int, transient: int = 0
) -> np.ndarray:
    """Float orbit of f as an (n, 3) array of (θ, x, y), θ reduced to [0, period)"""
    point = np.array([start], dtype=np.float64)
    orbit = np.empty((n, 3))
    for i in range(transient + n):
        point = step_points(f, point)
        if not _bounded(point)[0]:
            raise ParameterError(f"orbit of {f.name} from {start} escapes to infinity after {i + 1} steps")
        if i >= transient:
            orbit[i - transient] = point[0]
    return orbit


def domain_points(d: DomainSpec, density: Tuple[int, int, int] = DEFAULT_DENSITY) -> np.ndarray:
    """Regular grid of points of D, θ-major like the subdivision"""
    n_theta, n_x, n_y = density
    if min(density) < 1:
        raise ParameterError(f"density counts must be positive, got {density}")
    theta = np.linspace(0.0, float(d.period.lo), n_theta, endpoint=False)
    x = np.zeros(1) if d.r_u is None else np.linspace(-float(d.r_u.lo), float(d.r_u.lo), n_x)
    y = np.linspace(float(d.y_inner.lo), float(d.y_inner.hi), n_y)
    grid = np.meshgrid(theta, x, y, indexing="ij")
    return np.column_stack([g.reshape(-1) for g in grid])


def domain_images(
    f: MapSpec, d: DomainSpec, iterates: int = 2, density: Tuple[int, int, int] = DEFAULT_DENSITY
) -> List[Tuple[int, np.ndarray]]:
    """Point clouds of f(D), f²(D), ...; points that blow up are dropped"""
    if iterates < 1:
        raise ParameterError(f"iterates must be at least 1, got {iterates}")
    points = domain_points(d, density)
    clouds = []
    for k in range(1, iterates + 1):
        points = step_points(f, points)
        points = points[_bounded(points)]
        clouds.append((k, points))
        logger.info(f"{f.name}: {len(points)} points in image {k} of the domain")
    return clouds


def beta_sweep(
    n_beta: int = 101,
    n_points: int = 201,
    transient: int = 500,
    record: int = 50,
    params: Optional[Mapping] = None,
    r_u="1",
) -> np.ndarray:
    """(β, x) pairs of the x-dynamics of toy_fbeta that stay in |x| ≤ r_u

    For each of n_beta values of β in [0, 1], n_points starting values spread
    over [-r_u, r_u] are iterated; after the transient, the next ``record``
    x-values of every point that never left are kept. The x-dynamics is
    decoupled from θ and y, which stay at 0.
    """
    params = dict(params or {})
    if "beta" in params:
        raise ParameterError("the sweep sets beta itself")
    params.setdefault("mu", "1/10")
    if n_beta < 2 or n_points < 1 or record < 1 or transient < 0:
        raise ParameterError(
            f"invalid sweep: n_beta={n_beta}, n_points={n_points}, transient={transient}, record={record}"
        )
    radius = float(Interval.coerce(r_u).lo)
    rows = []
    for i in range(n_beta):
        beta = Fraction(i, n_beta - 1)
        f = builtin("toy_fbeta", {**params, "beta": f"{beta.numerator}/{beta.denominator}"})
        points = np.zeros((n_points, 3))
        points[:, 1] = np.linspace(-radius, radius, n_points)
        for k in range(transient + record):
            points = step_points(f, points)
            points = points[np.abs(points[:, 1]) <= radius]
            if not len(points):
                break
            if k >= transient:
                rows.append(np.column_stack([np.full(len(points), float(beta)), points[:, 1]]))
        logger.debug(f"beta = {beta}: {len(points)} of {n_points} points stay")
    if not rows:
        return np.zeros((0, 2))
    return np.concatenate(rows)
