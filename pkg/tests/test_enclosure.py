import math

import numpy as np
import pytest

from bundle_covering.dynamics import builtin
from bundle_covering.enclosure import (
    EnclosureDomain,
    EnclosureRun,
    EnclosureStep,
    propagate,
    theta_slice,
)
from bundle_covering.errors import ParameterError
from bundle_covering.geometry import CellBatch
from bundle_covering.interval import Interval
from bundle_covering.sampling import sample_orbit

GRID = (16, 8, 8)


@pytest.fixture(scope="module")
def cap_run() -> EnclosureRun:
    domain = EnclosureDomain.box("2", disc=True)
    run = EnclosureRun(domain, builtin("cap_map"), GRID, max_iterates=3, refine_steps=2)
    return propagate(run)


def _inside_any(cells: CellBatch, point) -> bool:
    theta, x, y = point
    return bool(
        np.any(
            (cells.theta.lo <= theta)
            & (theta <= cells.theta.hi)
            & (cells.x.lo <= x)
            & (x <= cells.x.hi)
            & (cells.y.lo <= y)
            & (y <= cells.y.hi)
        )
    )


def test_steps_refine_survivors(cap_run) -> None:
    assert len(cap_run.steps) == 3
    assert len(cap_run.steps[0].cells) == 16 * 8 * 8
    for before, after in zip(cap_run.steps, cap_run.steps[1:]):
        assert len(after.cells) == 8 * int(before.kept.sum())
        assert after.survivors.volume() <= before.survivors.volume() * (1 + 1e-12)
    assert len(cap_run.survivors[-1]) > 0


def test_slice_at_pi_over_three(cap_run) -> None:
    cells = theta_slice(cap_run, math.pi / 3)
    assert len(cells) > 0
    assert np.all(cells.theta.lo <= math.pi / 3)
    assert np.all(cells.theta.hi >= math.pi / 3)


def test_slice_wraps_theta(cap_run) -> None:
    assert len(theta_slice(cap_run, math.pi / 3 + 2 * math.pi)) == len(theta_slice(cap_run, math.pi / 3))


def test_invariant_line_stays_in_survivors(cap_run) -> None:
    # x = 0 is invariant for the cap map
    orbit = sample_orbit(cap_run.map, (0.3, 0.0, 0.0), 1000, transient=10)
    assert np.all(orbit[:, 1] == 0.0)
    for survivors in cap_run.survivors:
        assert all(_inside_any(survivors, point) for point in orbit)


def test_orbit_stays_in_survivors(cap_run) -> None:
    orbit = sample_orbit(cap_run.map, (4.0, -0.46, -0.92), 1000)
    assert np.all(orbit[:, 1] ** 2 + orbit[:, 2] ** 2 < 4.0)
    # off the invariant line
    assert np.abs(orbit[:, 1]).max() > 0.1
    for survivors in cap_run.survivors:
        misses = [point for point in orbit if not _inside_any(survivors, point)]
        assert misses == []


def test_linear_nhim_keeps_cells_at_zero() -> None:
    f = builtin("linear_nhim", {"a": "4", "b": "1/10"})
    run = propagate(EnclosureRun(EnclosureDomain.box("1"), f, (4, 8, 4), max_iterates=3, refine_steps=2))
    survivors = run.survivors[-1]
    assert len(survivors) == 2 * 16 * 16
    assert float(survivors.x.lo.min()) == -0.0625
    assert float(survivors.x.hi.max()) == 0.0625
    assert np.all((survivors.x.lo <= 0.0) & (survivors.x.hi >= 0.0))
    # y contracts, so every y cell survives
    assert float(survivors.y.lo.min()) == -1.0 and float(survivors.y.hi.max()) == 1.0


def test_no_refinement_keeps_initial_grid() -> None:
    domain = EnclosureDomain.box("2")
    run = propagate(EnclosureRun(domain, builtin("cap_map"), (8, 4, 4), refine_steps=0))
    assert len(run.steps) == 1
    step = run.steps[0]
    assert len(step.cells) == 8 * 4 * 4
    assert 0 < int(step.kept.sum()) < len(step.cells)


def test_disc_discards_corners() -> None:
    domain = EnclosureDomain.box("2", disc=True)
    out = domain.outside(Interval(np.array([1.9, 0.0])), Interval(np.array([1.9, 0.0])))
    assert out.tolist() == [True, False]
    assert not EnclosureDomain.box("2").outside(Interval(1.9), Interval(1.9))


def test_empty_slice() -> None:
    domain = EnclosureDomain.box("2")
    cells = CellBatch(Interval(np.array([0.0])), Interval(np.array([0.0])), Interval(np.array([0.0])))
    run = EnclosureRun(domain, builtin("cap_map"), steps=[EnclosureStep(0, cells, np.array([False]))])
    assert len(theta_slice(run, 0.0)) == 0


def test_invalid_runs() -> None:
    domain = EnclosureDomain.box("2")
    with pytest.raises(ParameterError):
        propagate(EnclosureRun(domain, builtin("cap_map"), max_iterates=0))
    with pytest.raises(ParameterError):
        propagate(EnclosureRun(domain, builtin("cap_map"), grid=(0, 1, 1)))
    with pytest.raises(ParameterError):
        theta_slice(EnclosureRun(domain, builtin("cap_map")), 1.0)
    with pytest.raises(ParameterError):
        EnclosureDomain.box("-1")
