"""Gluing blowup profiles to expanders across the singular time.

A shrinker that drives a blowup leaves behind the far-field trace
pi/2 + b_n.  Any expander whose own far field matches that trace, either
directly (B(A) = b_n) or after the reflection F -> pi - F (B(A) = -b_n),
continues the solution past the singularity.  This module enumerates
the matching slopes from a sampled B(A) map, certifies that none were
missed beyond the scanned range, tags each match with its branch and
instability count, and selects the stable continuation: the smallest
matching slope.

The count of matches grows linearly with the shrinker index; the
enumeration here is what pins the growth rate (2n - 3 below the
monotone range of B, 2n - 1 inside it) and the branch parity: odd
indices continue through the reflected branch and jump the origin value
from 0 to pi, even indices stay on the direct branch.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import PreconditionError, RangeError, SearchError
from .expander import BAMap, find_roots, fit_large_a, scan_ba, solve_expander
from .profiles import SelfSimilarProfile
from .shrinker import find_shrinker
from .specfun import omega_freq
from .spectral import expander_spectrum

__all__ = [
    "ContinuationMatch",
    "ContinuationPlan",
    "Conjecture1Triple",
    "plan_continuation",
    "conjecture1_triple",
    "write_triple_csv",
]

HALF_PI = 0.5 * math.pi

# the large-slope envelope C A^(-(d-2)/2) certifies absence of further
# matches only with some slack over the fitted amplitude
ENVELOPE_SAFETY = 1.05

# a listed match must reproduce the target far field this well
MATCH_TOL = 1e-8

# defaults for the self-contained n = 1 triple: the map must reach the
# envelope-fit window, everything past ~2 is then already certified
_TRIPLE_A_MIN = 1e-3
_TRIPLE_A_MAX = 1.5e3
_TRIPLE_SCAN = 80


@dataclass(frozen=True)
class ContinuationMatch:
    """One expander whose far field glues to a shrinker's trace.

    branch is "same" when B(A) equals the shrinker's far-field constant
    and the profile glues directly, "flipped" when B(A) equals its
    negative and the reflected profile pi - F glues instead.  The
    reflection jumps the origin value from 0 to pi, one extra covering
    of the target: degree_change 1.  Direct gluing keeps it: 0.
    """

    branch: str
    A: float
    degree_change: int
    instability_count: int


@dataclass(frozen=True)
class ContinuationPlan:
    """Certified enumeration of the continuations of one blowup.

    matches lists every gluing expander inside the scanned slope range,
    ascending; the envelope bound over the range's far end guarantees
    the list is complete.  a_star is the smallest matching slope, the
    stable continuation.
    """

    d: int
    n: int
    b_n: float
    matches: tuple
    a_star: float

    @property
    def count(self) -> int:
        return len(self.matches)

    @property
    def stable(self) -> ContinuationMatch:
        return self.matches[0]

    def as_dict(self) -> dict:
        return {
            "d": self.d,
            "n": self.n,
            "b_n": self.b_n,
            "N": self.count,
            "A_star": self.a_star,
            "branch": self.stable.branch,
            "degree_change": self.stable.degree_change,
            "matches": [
                {
                    "A": m.A,
                    "branch": m.branch,
                    "degree_change": m.degree_change,
                    "instability_count": m.instability_count,
                }
                for m in self.matches
            ],
        }


def _find_member(shrinkers: Sequence[SelfSimilarProfile], d: int, n: int):
    for p in shrinkers:
        if p.kind == "shrinker" and p.d == d and p.index == n:
            return p
    raise PreconditionError(f"no shrinker with index {n} in d = {d} among inputs")


def plan_continuation(
    d: int,
    n: int,
    shrinkers: Sequence[SelfSimilarProfile],
    bamap: BAMap,
) -> ContinuationPlan:
    """Enumerate and tag every expander gluing to the n-th shrinker.

    The map must be wide enough to certify completeness: at the low end
    B must still sit below -|b_n| (the rise from -pi/2 is monotone
    there), at the high end the fitted envelope times a 1.05 safety
    factor must have decayed under |b_n|.  A map failing either check
    raises RangeError whose ``required`` tuple gives the slope range
    that would certify.  Stability tags come from the expander
    spectrum; the smallest slope is the selected continuation.
    """
    omega_freq(d)
    if bamap.d != d:
        raise PreconditionError(f"map is for d = {bamap.d}, plan wants d = {d}")
    if n < 1:
        raise PreconditionError(f"shrinker index must be positive, got {n}")
    member = _find_member(shrinkers, d, n)
    b_n = member.far_field
    if b_n == 0.0:
        raise PreconditionError("shrinker far field vanishes, nothing to match")

    c_tilde, _ = fit_large_a(bamap)
    a_hi = float(bamap.A[-1])
    a_lo = float(bamap.A[0])
    power = 0.5 * (d - 2)
    a_req = (ENVELOPE_SAFETY * c_tilde / abs(b_n)) ** (1.0 / power)
    lo_ok = bamap.B[0] < -abs(b_n)
    hi_ok = a_hi >= a_req
    if not (lo_ok and hi_ok):
        # low-end hint from the map's own initial rise slope, forced
        # strictly below the current start (the secant extrapolation is
        # rough once the start sits beyond the linear regime)
        rise = (bamap.B[1] - bamap.B[0]) / (bamap.A[1] - bamap.A[0])
        if lo_ok:
            lo_req = a_lo
        else:
            lo_req = min(
                0.5 * (HALF_PI - abs(b_n)) / max(rise, 1e-3), 0.5 * a_lo
            )
        ends = []
        if not lo_ok:
            ends.append(f"B({a_lo:g}) = {bamap.B[0]:.6g} is not below -|b_n|")
        if not hi_ok:
            ends.append(f"envelope at {a_hi:g} still exceeds |b_n| = {abs(b_n):.3g}")
        raise RangeError(
            "scan cannot certify the match count: " + "; ".join(ends),
            required=(min(a_lo, lo_req), max(a_hi, a_req)),
        )

    matches = []
    for target, branch, jump in ((b_n, "same", 0), (-b_n, "flipped", 1)):
        roots = bamap.roots.get(target)
        if roots is None:
            roots = find_roots(bamap, target)
        for a in roots:
            profile = solve_expander(d, a)
            if abs(profile.far_field - target) > MATCH_TOL:
                raise SearchError(
                    f"refined root A = {a:.12g} missed its target far field "
                    f"by {abs(profile.far_field - target):.3g}"
                )
            report = expander_spectrum(profile, 1)
            matches.append(
                ContinuationMatch(
                    branch=branch,
                    A=a,
                    degree_change=jump,
                    instability_count=report.instability_count,
                )
            )
    if not matches:
        raise SearchError(f"no gluing expander found for n = {n} in d = {d}")
    matches.sort(key=lambda m: m.A)
    return ContinuationPlan(
        d=d, n=n, b_n=b_n, matches=tuple(matches), a_star=matches[0].A
    )


@dataclass(frozen=True)
class Conjecture1Triple:
    """The three pieces of the generic continued blowup, on one grid.

    pre_blowup is the first shrinker (the rescaled shape just before the
    singular time), plateau the far-field trace pi/2 + b_1 the solution
    leaves behind at the singular instant, post_blowup the reflected
    stable expander pi - F that emerges afterwards.  The two profiles
    share the plateau as their far-field limit; the origin value jumps
    from 0 to pi across the singular time.
    """

    d: int
    a_star: float
    b_1: float
    plateau: float
    y: np.ndarray
    pre_blowup: np.ndarray
    post_blowup: np.ndarray


def conjecture1_triple(
    d: int,
    y_max: float = 10.0,
    samples: int = 501,
    shrinker: Optional[SelfSimilarProfile] = None,
    bamap: Optional[BAMap] = None,
) -> Conjecture1Triple:
    """Assemble the generic blowup-continuation triple in dimension d.

    Solves the first shrinker and the stable reflected expander (the
    unique match, certified over the scanned slope range), then samples
    both on a common grid.  A precomputed shrinker or slope map is
    reused when given.
    """
    if samples < 2 or y_max <= 0.0:
        raise PreconditionError("need y_max > 0 and at least two samples")
    if shrinker is None:
        shrinker = find_shrinker(d, 1)
    if bamap is None:
        bamap = scan_ba(d, _TRIPLE_A_MIN, _TRIPLE_A_MAX, _TRIPLE_SCAN)
    plan = plan_continuation(d, 1, [shrinker], bamap)
    flipped = solve_expander(d, plan.a_star)
    y = np.linspace(0.0, y_max, samples)
    return Conjecture1Triple(
        d=d,
        a_star=plan.a_star,
        b_1=shrinker.far_field,
        plateau=HALF_PI + shrinker.far_field,
        y=y,
        pre_blowup=shrinker(y),
        post_blowup=math.pi - flipped(y),
    )


def write_triple_csv(triple: Conjecture1Triple, path) -> None:
    """Machine-precision CSV of the triple: y, pre, plateau, post."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y", "pre_blowup", "plateau", "post_blowup"])
        for i in range(len(triple.y)):
            w.writerow(
                "%.17g" % v
                for v in (
                    triple.y[i],
                    triple.pre_blowup[i],
                    triple.plateau,
                    triple.post_blowup[i],
                )
            )
