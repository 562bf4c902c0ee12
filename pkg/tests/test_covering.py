from fractions import Fraction

import numpy as np
import pytest

from bundle_covering import covering
from bundle_covering.covering import (
    Condition,
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
from bundle_covering.dynamics import (
    EtaLift,
    builtin,
    expression_eta,
    expression_expansion,
    expression_map,
    straight_line_homotopy,
)
from bundle_covering.errors import DegreeError, ParameterError
from bundle_covering.geometry import DomainSpec, SubdivisionScheme
from bundle_covering.interval import Interval

TOY_SCHEME = SubdivisionScheme(4, 16, 8, 8, n_family=4)
CAP_SCHEME = SubdivisionScheme(4, 100, 50, 50)


def _sample_contradictions(h, d, rng, n=10_000) -> int:
    """Sampled points where a float image contradicts the exit or entry certificate"""
    alpha = rng.uniform(0, 1, n)
    theta = rng.uniform(0, float(d.period.lo), n)
    r_u, r_s = float(d.r_u.lo), float(d.r_s.lo)
    y = rng.uniform(-r_s, r_s, n)
    params = {}
    for name in h.family:
        value = h.params[name]
        params[name] = Interval(rng.uniform(float(value.lo), float(value.hi), n))
    member = h.with_params(**params) if params else h

    def image(x):
        out = member.eval(Interval(alpha), Interval(theta), Interval(x), Interval(y))
        return [0.5 * v.lo + 0.5 * v.hi for v in out]

    side = np.where(rng.random(n) < 0.5, -r_u, r_u)
    _, fx, _ = image(side)
    exit_bad = np.abs(fx) <= r_u
    _, fx, fy = image(rng.uniform(-r_u, r_u, n))
    entry_bad = (np.abs(fx) <= r_u) & (np.abs(fy) >= r_s)
    return int(exit_bad.sum() + entry_bad.sum())


# --- acceptance runs ---------------------------------------------------------


@pytest.mark.slow
def test_cap_homotopy_proof_complete(cap_domain, rng) -> None:
    h = builtin("cap_homotopy", {"mu": "1/10"})
    report = verify_full_covering(h, cap_domain, CAP_SCHEME, jobs=1)
    assert report.verdict is Verdict.VERIFIED, report.reason
    assert report.degree == 3
    assert report.failed_cells == []
    assert _sample_contradictions(h, cap_domain, rng) == 0


def test_cap_exit_condition(cap_domain) -> None:
    h = builtin("cap_homotopy")
    result = check_exit(h, cap_domain, SubdivisionScheme(4, 1, 1, 1), refine_depth=0)
    assert result.ok
    assert result.cells_checked == 8


def test_toy_family_full_covering(unit_domain, toy_homotopy, rng) -> None:
    report = verify_full_covering(toy_homotopy, unit_domain, TOY_SCHEME)
    assert report.verdict is Verdict.VERIFIED, report.reason
    assert report.degree == 3
    assert report.deg2 == 1
    assert report.exit_ok and report.entry_ok and report.expansion_ok
    assert _sample_contradictions(toy_homotopy, unit_domain, rng) == 0


def test_even_winding_needs_fiber_mode(unit_domain) -> None:
    h = builtin("toy_homotopy", {"mu": "1/10"}).with_eta(expression_eta("2*theta"))
    full = verify_full_covering(h, unit_domain, TOY_SCHEME)
    assert full.verdict is Verdict.NOT_VERIFIED
    assert full.reason == "deg₂ = 0"
    assert full.degree == 2
    assert [f.condition for f in full.failed_cells] == [Condition.DEGREE]
    fiber = verify_fiber_covering(h, unit_domain, TOY_SCHEME)
    assert fiber.verdict is Verdict.VERIFIED
    assert fiber.degree is None


def test_even_winding_parameter(unit_domain) -> None:
    h = builtin("toy_homotopy", {"mu": "1/10", "winding": "2"})
    assert verify_full_covering(h, unit_domain, TOY_SCHEME).reason == "deg₂ = 0"
    assert verify_fiber_covering(h, unit_domain, TOY_SCHEME).verified


def test_negative_control_has_rechecking_witnesses(cap_domain, broken_cap) -> None:
    report = verify_full_covering(broken_cap, cap_domain, SubdivisionScheme(4, 10, 1, 20), refine_depth=2)
    assert report.verdict is Verdict.NOT_VERIFIED
    assert not report.exit_ok
    exits = [f for f in report.failed_cells if f.condition is Condition.EXIT]
    assert exits
    assert report.failed_count >= len(report.failed_cells)
    for failure in exits[:20]:
        assert recheck_failure(broken_cap, cap_domain, failure)
        # witnesses sit on an exit face in the first half of the homotopy
        assert abs(float(failure.cell.x.lo)) == 1.0
        assert float(failure.cell.x.lo) == float(failure.cell.x.hi)
        assert float(failure.cell.alpha.lo) < 0.5


def test_negative_control_report_document(cap_domain, broken_cap) -> None:
    report = verify_fiber_covering(broken_cap, cap_domain, SubdivisionScheme(4, 10, 1, 20), refine_depth=1)
    doc = report.to_dict()
    assert doc["verdict"] == "NOT_VERIFIED"
    assert doc["failed_cells"]
    assert all(f["condition"] in ("exit", "entry", "expansion") for f in doc["failed_cells"])
    assert set(doc["failed_cells"][0]["cell"]) == {"alpha", "theta", "x", "y"}


def test_coarse_grid_is_not_verified(cap_domain) -> None:
    report = verify_fiber_covering(builtin("cap_homotopy"), cap_domain, SubdivisionScheme(), refine_depth=0)
    assert report.verdict is Verdict.NOT_VERIFIED
    assert report.failed_count >= 1


def test_refinement_rescues_single_cell_grid(cap_domain) -> None:
    h = builtin("cap_homotopy")
    single = SubdivisionScheme()
    assert not check_entry(h, cap_domain, single, refine_depth=12).ok
    entry = check_entry(h, cap_domain, single, refine_depth=20)
    assert entry.ok
    assert entry.cells_checked > 1
    report = verify_full_covering(h, cap_domain, single, refine_depth=20)
    assert report.verdict is Verdict.VERIFIED, report.reason
    assert report.degree == 3


def test_finer_grid_still_verifies(unit_domain, toy_homotopy) -> None:
    finer = SubdivisionScheme(8, 32, 16, 16, n_family=8)
    report = verify_full_covering(toy_homotopy, unit_domain, finer)
    assert report.verdict is Verdict.VERIFIED, report.reason
    assert report.cells_checked["entry"] >= 8 * 32 * 16 * 16 * 8


# --- expansion --------------------------------------------------------------


@pytest.mark.parametrize("coefficient, ok", [("2", True), ("-1.5", True), ("1", False), ("-1", False)])
def test_expansion_is_sign_independent(cap_domain, coefficient, ok) -> None:
    h = builtin("cap_homotopy").with_expansion(expression_expansion(coefficient))
    assert check_expansion(h, cap_domain, 100).ok is ok


def test_unit_expansion_is_not_verified(unit_domain, toy_homotopy) -> None:
    h = toy_homotopy.with_expansion(expression_expansion("1"))
    report = verify_full_covering(h, unit_domain, TOY_SCHEME)
    assert report.verdict is Verdict.NOT_VERIFIED
    assert not report.expansion_ok


def test_no_unstable_direction_uses_entry_only() -> None:
    d = DomainSpec.from_radii(None, "1")
    f = expression_map("contraction", "theta + 1", "0", "y/2 + sin(theta)/4", eta_lift="theta")
    h = straight_line_homotopy(f, unstable=False)
    report = verify_full_covering(h, d, SubdivisionScheme(2, 8, 1, 4))
    assert report.verdict is Verdict.VERIFIED, report.reason
    assert report.cells_checked["exit"] == 0
    assert report.degree == 1


# --- degree -----------------------------------------------------------------


@pytest.mark.parametrize(
    "source, degree",
    [
        ("3*theta", 3),
        ("2*theta", 2),
        ("theta", 1),
        ("-theta", -1),
        ("theta + sin(theta)", 1),
        ("5*theta + 2*cos(3*theta)", 5),
        ("sin(theta)", 0),
    ],
)
def test_compute_degree(source, degree) -> None:
    assert compute_degree(expression_eta(source)) == degree


@pytest.mark.parametrize("source", ["3*theta", "3*theta + sin(theta)/2", "-2*theta + cos(5*theta)"])
def test_degree_does_not_depend_on_segments(source) -> None:
    eta = expression_eta(source)
    degrees = {compute_degree(eta, n_theta=n) for n in (1, 2, 7, 64, 257)}
    assert len(degrees) == 1


def test_cap_degree_does_not_depend_on_segments() -> None:
    eta = builtin("cap_homotopy").eta
    assert {compute_degree(eta, n_theta=n) for n in (1, 3, 100)} == {3}


def test_degree_of_fast_map_needs_refinement() -> None:
    assert compute_degree(expression_eta("101*theta"), n_theta=4) == 101


def test_degree_depth_limit() -> None:
    with pytest.raises(DegreeError, match="depth limit"):
        compute_degree(expression_eta("1000*theta"), n_theta=1, depth_limit=2)


def test_degree_of_constant_lift() -> None:
    eta = EtaLift(lambda theta, params: Interval(2.0), description="2")
    assert compute_degree(eta) == 0


# --- sequences --------------------------------------------------------------


def test_sequence_of_verified_members(unit_domain, toy_homotopy) -> None:
    report = verify_sequence([toy_homotopy, toy_homotopy], unit_domain, TOY_SCHEME)
    assert report.verdict is Verdict.VERIFIED
    assert len(report.members) == 2
    assert report.first_failing_index is None
    assert report.degree == 3
    assert report.cells_checked["entry"] == 2 * report.members[0].cells_checked["entry"]


def test_sequence_reports_first_failing_index(unit_domain, toy_homotopy) -> None:
    even = builtin("toy_homotopy", {"mu": "1/10", "winding": "2"})
    report = verify_sequence([toy_homotopy, even, toy_homotopy], unit_domain, TOY_SCHEME)
    assert report.verdict is Verdict.NOT_VERIFIED
    assert report.first_failing_index == 1
    assert [m.verdict for m in report.members] == [
        Verdict.VERIFIED,
        Verdict.NOT_VERIFIED,
        Verdict.VERIFIED,
    ]
    assert report.to_dict()["members"][1]["reason"] == "deg₂ = 0"


def test_empty_sequence() -> None:
    with pytest.raises(ParameterError):
        verify_sequence([], DomainSpec.from_radii(), SubdivisionScheme())


# --- evaluation errors and determinism --------------------------------------


def test_evaluation_error_gives_error_verdict(unit_domain) -> None:
    f = expression_map("reciprocal", "theta", "1/x", "y", eta_lift="theta", A_coeff="2")
    report = verify_fiber_covering(straight_line_homotopy(f), unit_domain, SubdivisionScheme(1, 2, 2, 2))
    assert report.verdict is Verdict.ERROR
    assert "division by interval containing zero" in report.reason
    assert "cell" in report.reason


def test_reports_do_not_depend_on_jobs(monkeypatch, cap_domain, broken_cap) -> None:
    monkeypatch.setattr(covering, "CHUNK_SIZE", 37)
    scheme = SubdivisionScheme(4, 10, 2, 20)
    serial = verify_full_covering(broken_cap, cap_domain, scheme, refine_depth=2, jobs=1).to_dict()
    threaded = verify_full_covering(broken_cap, cap_domain, scheme, refine_depth=2, jobs=4).to_dict()
    serial.pop("wall_time")
    threaded.pop("wall_time")
    assert serial == threaded


def test_witness_list_is_capped(monkeypatch, cap_domain, broken_cap) -> None:
    monkeypatch.setattr(covering, "MAX_WITNESSES", 5)
    result = check_entry(broken_cap, cap_domain, SubdivisionScheme(1, 4, 1, 2), refine_depth=0)
    assert not result.ok
    assert len(result.failed_cells) <= 5
    assert result.failed_count >= len(result.failed_cells)


# --- rate helper --------------------------------------------------------------


def _brute_force_k(C: Fraction, lam: Fraction) -> int:
    k = 1
    while C * lam ** k >= 1:
        k += 1
    return k


@pytest.mark.parametrize(
    "C, lam, k",
    [("2", "1/4", 1), ("100", "1/2", 7), ("1", "0.9", 1), ("1000", "0.9", 66), ("1/2", "1/2", 1)],
)
def test_nhim_min_k(C, lam, k) -> None:
    assert nhim_min_k(C, lam) == k
    assert _brute_force_k(Fraction(C), Fraction(lam)) == k


def test_nhim_min_k_rejects_bad_rates() -> None:
    with pytest.raises(ParameterError):
        nhim_min_k("2", "1")
    with pytest.raises(ParameterError):
        nhim_min_k("0", "1/2")


@pytest.mark.parametrize("C, lam", [("100", "1/2"), ("2", "1/4")])
def test_linear_nhim_covers_from_min_k(C, lam, unit_domain, rng) -> None:
    k = nhim_min_k(C, lam)
    scheme = SubdivisionScheme(16, 1, 1, 4)
    rates = {"a": str(1 / Fraction(lam)), "b": lam, "C": C}
    for iterates, expected in ((k, Verdict.VERIFIED), (k - 1, Verdict.NOT_VERIFIED)):
        if iterates < 1:
            continue
        f = builtin("linear_nhim", {**rates, "iterates": str(iterates)})
        h = straight_line_homotopy(f)
        report = verify_full_covering(h, unit_domain, scheme, refine_depth=0)
        assert report.verdict is expected, (iterates, report.reason)
        if expected is Verdict.VERIFIED:
            assert _sample_contradictions(h, unit_domain, rng) == 0
