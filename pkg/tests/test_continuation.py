"""Continuation planning: match enumeration, certification, the triple."""

import csv
import math

import numpy as np
import pytest

from blowflow.continuation import (
    conjecture1_triple,
    plan_continuation,
    write_triple_csv,
)
from blowflow.errors import DomainError, PreconditionError, RangeError
from blowflow.expander import scan_ba, solve_expander
from blowflow.shrinker import shrinker_family

# independently computed root of B(A) = -b_1 in d = 3 (different
# integrator and root polish, frozen)
STABLE_SLOPE_D3 = 0.483597577338

# published stable slope, quoted to six digits
STABLE_SLOPE_QUOTED = 0.483668

# published plateau pi/2 + b_1 in d = 3, quoted through a six-digit b_1
PLATEAU_QUOTED_D3 = 2.143937

# per-dimension scan wide enough to certify counts through n = 5; the
# d = 6 far end is set by |b_5| ~ 7.5e-13 against a quadratic envelope
SCAN_FOR = {
    3: (1e-3, 3.0e3, 90),
    4: (1e-3, 4.5e3, 90),
    5: (1e-3, 1.5e4, 100),
    6: (1e-3, 6.5e5, 140),
}

DIMS = (3, 4, 5, 6)


def expected_count(d, n):
    return 2 * n - 3 if d in (3, 4) else 2 * n - 1


@pytest.fixture(scope="module")
def plans(family_d3):
    out = {}
    for d in DIMS:
        fam = family_d3[:5] if d == 3 else shrinker_family(d, 5)
        lo, hi, samples = SCAN_FOR[d]
        bamap = scan_ba(d, lo, hi, samples)
        out[d] = {
            "family": fam,
            "map": bamap,
            "plan": {n: plan_continuation(d, n, fam, bamap) for n in range(1, 6)},
        }
    return out


@pytest.mark.parametrize("d", DIMS)
def test_first_blowup_continuation_is_unique_and_flipped(plans, d):
    plan = plans[d]["plan"][1]
    assert plan.count == 1
    only = plan.stable
    assert only.branch == "flipped"
    assert only.degree_change == 1
    assert only.instability_count == 0
    assert plan.a_star == only.A


def test_stable_slope_value_d3(plans):
    a = plans[3]["plan"][1].a_star
    assert abs(a - STABLE_SLOPE_D3) < 5e-9
    assert abs(a - STABLE_SLOPE_QUOTED) < 1e-4


@pytest.mark.parametrize("d", DIMS)
def test_match_count_growth(plans, d):
    for n in range(2, 6):
        assert plans[d]["plan"][n].count == expected_count(d, n)


@pytest.mark.parametrize("d", DIMS)
def test_branch_parity_of_stable_choice(plans, d):
    # the smallest slope sits on the initial rise of B, where the sign
    # of the crossing ties the branch to the sign of b_n
    for n in range(1, 6):
        stable = plans[d]["plan"][n].stable
        if n % 2:
            assert stable.branch == "flipped"
            assert stable.degree_change == 1
        else:
            assert stable.branch == "same"
            assert stable.degree_change == 0


def test_matches_sorted_and_far_fields_hit(plans):
    plan = plans[3]["plan"][5]
    slopes = [m.A for m in plan.matches]
    assert slopes == sorted(slopes)
    assert len(set(slopes)) == len(slopes)
    for m in plan.matches:
        target = plan.b_n if m.branch == "same" else -plan.b_n
        assert abs(solve_expander(3, m.A).far_field - target) < 1e-8


@pytest.mark.parametrize("d", (3, 5))
def test_instabilities_nondecreasing_in_slope(plans, d):
    counts = [m.instability_count for m in plans[d]["plan"][5].matches]
    assert all(b >= a for a, b in zip(counts, counts[1:]))
    assert counts[0] == 0
    assert counts[-1] >= 1


@pytest.mark.parametrize("d", DIMS)
def test_triple_plateau_identities(plans, d):
    fam = plans[d]["family"]
    tri = conjecture1_triple(d, shrinker=fam[0], bamap=plans[d]["map"])
    assert tri.plateau == pytest.approx(math.pi / 2 + tri.b_1, abs=0.0)
    # the reflected expander's far field lands on the same plateau to
    # the root-refinement tolerance
    flipped = solve_expander(d, tri.a_star)
    assert abs((math.pi - (math.pi / 2 + flipped.far_field)) - tri.plateau) < 1e-8
    if d == 3:
        assert abs(tri.plateau - PLATEAU_QUOTED_D3) < 1e-6


def test_triple_grid_shape_and_origin_jump(plans):
    tri = conjecture1_triple(
        3, y_max=10.0, samples=501, shrinker=plans[3]["family"][0],
        bamap=plans[3]["map"],
    )
    assert tri.y[0] == 0.0 and tri.y[-1] == 10.0 and len(tri.y) == 501
    assert tri.pre_blowup[0] == 0.0
    assert tri.post_blowup[0] == pytest.approx(math.pi, abs=1e-12)
    # both pieces settle toward the plateau by the grid's far end
    assert abs(tri.pre_blowup[-1] - tri.plateau) < 0.02
    assert abs(tri.post_blowup[-1] - tri.plateau) < 0.02
    # and from opposite sides: the shrinker from below, the reflected
    # expander from above (b_1 > 0)
    assert tri.pre_blowup[-1] < tri.plateau < tri.post_blowup[-1]


def test_triple_csv_roundtrip(plans, tmp_path):
    tri = conjecture1_triple(
        3, samples=41, shrinker=plans[3]["family"][0], bamap=plans[3]["map"]
    )
    path = tmp_path / "triple.csv"
    write_triple_csv(tri, path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["y", "pre_blowup", "plateau", "post_blowup"]
    assert len(rows) == 42
    ys = np.array([float(r[0]) for r in rows[1:]])
    pre = np.array([float(r[1]) for r in rows[1:]])
    post = np.array([float(r[3]) for r in rows[1:]])
    assert np.array_equal(ys, tri.y)
    assert np.array_equal(pre, tri.pre_blowup)
    assert np.array_equal(post, tri.post_blowup)
    assert all(float(r[2]) == tri.plateau for r in rows[1:])


def test_range_error_when_scan_stops_short(plans):
    # wide enough for the envelope fit, short of certifying n = 5
    fam = plans[3]["family"]
    short = scan_ba(3, 1e-3, 500.0, 80)
    assert plan_continuation(3, 4, fam, short).count == 5
    with pytest.raises(RangeError) as err:
        plan_continuation(3, 5, fam, short)
    lo_req, hi_req = err.value.required
    assert lo_req <= 1e-3
    assert hi_req > 500.0
    # the suggested extension genuinely certifies
    wide = plans[3]["map"]
    assert wide.A[-1] >= hi_req
    assert plan_continuation(3, 5, fam, wide).count == 7


def test_range_error_when_scan_starts_late(plans):
    fam = plans[3]["family"]
    late = scan_ba(3, 1.0, 1.5e3, 60)
    with pytest.raises(RangeError) as err:
        plan_continuation(3, 1, fam, late)
    assert err.value.required[0] < 1.0


def test_plan_preconditions(plans):
    fam = plans[3]["family"]
    bamap = plans[3]["map"]
    with pytest.raises(DomainError):
        plan_continuation(7, 1, fam, bamap)
    with pytest.raises(PreconditionError):
        plan_continuation(4, 1, fam, bamap)  # map dimension mismatch
    with pytest.raises(PreconditionError):
        plan_continuation(3, 0, fam, bamap)
    with pytest.raises(PreconditionError):
        plan_continuation(3, 9, fam, bamap)  # index not in the family
    with pytest.raises(PreconditionError):
        plan_continuation(3, 1, [solve_expander(3, 1.0)], bamap)
    with pytest.raises(PreconditionError):
        conjecture1_triple(3, samples=1, shrinker=fam[0], bamap=bamap)


def test_plan_report_dict(plans):
    plan = plans[3]["plan"][3]
    rep = plan.as_dict()
    assert rep["d"] == 3 and rep["n"] == 3
    assert rep["N"] == 3 == len(rep["matches"])
    assert rep["A_star"] == plan.a_star
    assert rep["degree_change"] == 1
    assert [m["A"] for m in rep["matches"]] == [m.A for m in plan.matches]


def test_triple_is_self_contained():
    # no precomputed inputs: the default scan must certify n = 1 alone
    tri = conjecture1_triple(3, samples=11)
    assert abs(tri.a_star - STABLE_SLOPE_QUOTED) < 1e-4
