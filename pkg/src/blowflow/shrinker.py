"""Self-similar shrinking solutions and their renormalized energy.

The n-th profile leaves the origin with slope a_n, winds n times across
the equator, and settles to pi/2 + b_n at infinity. Construction is
double-sided: an outward shooting leg in logarithmic variables (forward
error growth ~ exp(y^2/4) rules out naive integration into the far
field), a backward leg launched from the algebraic tail ansatz, and a
two-parameter Newton match of (value, slope) at an interior seam.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, PreconditionError, SearchError
from .odeint import OdeProblem, integrate
from .profiles import (
    HALF_PI,
    SHRINK,
    QuinticHermite,
    SelfSimilarProfile,
    deviation_rhs,
    far_field_eval,
    extract_far_field,
    log_rescaled_rhs,
    origin_series_eval,
    profile_second_derivative,
    series_start,
)
from .quadrature import integrate_on_mesh

__all__ = ["shoot_local_series", "find_shrinker", "conformal_energy", "shrinker_family"]

Y_MATCH = 5.0       # seam between the outward and tail legs
Y_TAIL_START = 80.0  # tail ansatz error ~ (1/y)^8 is below 1e-14 here
Y_MAX = 40.0        # dense interpolant domain
Y_COUNT_END = 10.0  # outward discriminant leg horizon

_XI_START = 1e-3    # outward legs start at a*y = min(a,1)*1e-3

_RTOL_COARSE = 5e-9  # bracket scanning; jump location shifts < 1e-9 relative

MAX_INDEX = 10


def shoot_local_series(a: float, y0: float, d: int) -> tuple[float, float]:
    """(f, f') of the local solution with origin slope a, evaluated at y0.

    Requires 0 < y0 <= 1e-3 * min(1, 1/a); the truncation error of the
    series is then below 1e-14 relative.
    """
    _check_dimension(d)
    return series_start(d, a, SHRINK, y0)


def _check_dimension(d: int) -> None:
    if d not in (3, 4, 5, 6):
        raise DomainError(f"profile families exist for d in 3..6, got d = {d}")


def _outward_start(d: int, a: float) -> tuple[float, list[float]]:
    """Initial (x, [phi, phi_x]) for the log-variable outward leg."""
    y0 = _XI_START * min(1.0, 1.0 / a)
    f0, fp0 = origin_series_eval(d, a, SHRINK, y0)
    # phi(x) = f(e^x / a): phi_x = y f'(y)
    return math.log(a * y0), [f0, y0 * fp0]


def _outward_leg(
    d: int,
    a: float,
    y_end: float,
    rtol: float,
    max_step_x: Optional[float] = None,
    events=(),
):
    x0, s0 = _outward_start(d, a)
    problem = OdeProblem(2, log_rescaled_rhs(d, a, SHRINK), s0, (x0, math.log(a * y_end)))
    return integrate(
        problem,
        rtol=rtol,
        atol=rtol * 1e-2,
        events=events,
        max_step=max_step_x,
    )


def _crossing_count(d: int, a: float, rtol: float = 1e-12) -> int:
    """Number of equator crossings of the outward solution before it
    either escapes the strip (-0.2, pi + 0.2) or reaches the horizon."""
    sol = _outward_leg(
        d,
        a,
        Y_COUNT_END,
        rtol,
        events=[
            lambda x, s: s[0] - (math.pi + 0.2),
            lambda x, s: s[0] + 0.2,
        ],
    )
    count = 0
    prev = sol.y[0][0] - HALF_PI
    for state in sol.y[1:]:
        cur = state[0] - HALF_PI
        if (prev < 0.0 <= cur) or (cur < 0.0 <= prev):
            count += 1
        prev = cur
    return count


def _tail_leg(d: int, b: float, y_to: float, rtol: float, record=False, max_step=None):
    """Backward integration of the deviation g = f - pi/2 from the far field.

    Uncapped by default: the matching legs only need the endpoint, and the
    controller handles the (smooth, non-oscillatory) tail fine on its own.
    Assembly passes an explicit cap to keep the dense nodes close enough
    for the quintic reconstruction.
    """
    g0, gp0 = far_field_eval(d, b, SHRINK, Y_TAIL_START)
    problem = OdeProblem(2, deviation_rhs(d, SHRINK), [g0, gp0], (Y_TAIL_START, y_to))
    return integrate(problem, rtol=rtol, atol=rtol * min(1.0, abs(b)) * 1e-2, max_step=max_step)


def _seam_mismatch(d: int, a: float, b: float, rtol: float) -> tuple[float, float]:
    """(value, slope) mismatch of the two legs at the seam y = Y_MATCH."""
    fwd = _outward_leg(d, a, Y_MATCH, rtol)
    phi, phix = fwd.y[-1]
    g_f = phi - HALF_PI
    gp_f = phix / Y_MATCH
    back = _tail_leg(d, b, Y_MATCH, rtol)
    g_b, gp_b = back.y[-1]
    return g_f - g_b, gp_f - gp_b


def _estimate_far_field(d: int, a: float, rtol: float = 1e-12) -> float:
    """Cheap b estimate: continue the outward leg to a moderate radius and
    strip the algebraic tail there. Only used to seed the Newton match.

    The window [5.5, 8] balances tail truncation (the ansatz is an
    asymptotic series in 1/y^2) against forward error growth (the
    inadmissible mode's e^(y^2/4) eventually eats the solution); a is
    bisection-isolated by the time this runs, so y = 8 is still clean.
    """
    y_est = 8.0
    sol = _outward_leg(d, a, y_est, rtol)
    samples = []
    for x, s in zip(sol.x, sol.y):
        y = math.exp(x) / a
        if y >= 5.5:
            samples.append((y, s[0] - HALF_PI))
    if len(samples) < 2:
        samples = [(math.exp(x) / a, s[0] - HALF_PI) for x, s in zip(sol.x[-4:], sol.y[-4:])]
    return extract_far_field(d, SHRINK, samples)


def _bisect_slope(d: int, n: int, lo: float, hi: float, history: list) -> tuple[float, float]:
    """Bisect the crossing-count jump n -> n+1 to relative width 1e-12.

    Two tolerance stages: a cheap pass narrows the bracket to ~1e-9
    relative, then the tight pass restarts from a 100x-widened copy of
    that bracket (guarding against the coarse stage having localized a
    tolerance-shifted jump) and finishes the isolation. If the widened
    bracket fails to bracket at tight tolerance, the whole search
    reruns tight from the original interval.
    """
    k_lo = _crossing_count(d, lo, rtol=_RTOL_COARSE)
    k_hi = _crossing_count(d, hi, rtol=_RTOL_COARSE)
    history.append(("bracket", lo, k_lo, hi, k_hi))
    if not (k_lo <= n and k_hi >= n + 1):
        raise SearchError(
            f"crossing counts {k_lo}..{k_hi} on [{lo}, {hi}] do not bracket family index {n}",
            history=history,
        )
    lo0, hi0 = lo, hi
    while (hi - lo) > 1e-9 * hi:
        mid = 0.5 * (lo + hi)
        if _crossing_count(d, mid, rtol=_RTOL_COARSE) <= n:
            lo = mid
        else:
            hi = mid
    width = hi - lo
    lo = max(lo0, lo - 50.0 * width)
    hi = min(hi0, hi + 50.0 * width)
    if not (_crossing_count(d, lo) <= n and _crossing_count(d, hi) >= n + 1):
        history.append(("coarse-stage-miss", lo, hi))
        lo, hi = lo0, hi0
    while (hi - lo) > 1e-12 * hi:
        mid = 0.5 * (lo + hi)
        if _crossing_count(d, mid) <= n:
            lo = mid
        else:
            hi = mid
    return lo, hi


def _scan_bracket(d: int, n: int, a_prev: Optional[float], history: list) -> tuple[float, float]:
    """Locate a slope interval whose crossing count jumps past n."""
    if a_prev is None:
        grid = [0.5 * 1.35**k for k in range(0, 40)]
        prev_a, prev_k = grid[0], _crossing_count(d, grid[0], rtol=_RTOL_COARSE)
        for a in grid[1:]:
            k = _crossing_count(d, a, rtol=_RTOL_COARSE)
            history.append(("scan", a, k))
            if prev_k <= n and k >= n + 1:
                return prev_a, a
            prev_a, prev_k = a, k
        raise SearchError(f"no slope bracket found for n = {n} in d = {d}", history=history)
    # one oscillation period in log a separates consecutive family members
    from .specfun import omega_freq

    ratio = math.exp(math.pi / omega_freq(d))
    center = a_prev * ratio
    for widen in (0.06, 0.15, 0.35, 0.8):
        lo, hi = center * (1.0 - widen), center * (1.0 + widen)
        k_lo = _crossing_count(d, lo, rtol=_RTOL_COARSE)
        k_hi = _crossing_count(d, hi, rtol=_RTOL_COARSE)
        history.append(("predict", lo, k_lo, hi, k_hi))
        if k_lo <= n and k_hi >= n + 1:
            return lo, hi
    raise SearchError(
        f"predicted bracket near {center} failed for n = {n}, d = {d}", history=history
    )


def _newton_polish(
    d: int, a0: float, b0: float, history: list, rtol: float = 1e-13
) -> tuple[float, float]:
    """Two-parameter Newton iteration on the seam mismatch.

    The Jacobian is finite-differenced lazily and reused while the
    residual keeps contracting fast (it is nearly constant over the
    bisection-isolated basin, and each recomputation costs two full leg
    pairs). The iteration stops on the residual, whose attainable floor
    is set by the legs' tolerance.
    """
    a, b = a0, b0
    jac = None
    best = (math.inf, a, b)
    prev_size = math.inf
    for it in range(15):
        r0 = _seam_mismatch(d, a, b, rtol)
        size = math.hypot(*r0)
        history.append(("newton", it, a, b, size))
        if size < best[0]:
            best = (size, a, b)
        if size < 1e-12 * max(1.0, abs(b)):
            return a, b
        if size > 4.0 * best[0]:
            break  # stalled at the legs' rounding floor
        if jac is None or size > 0.05 * prev_size:
            da = 1e-7 * a
            db = 1e-7 * max(abs(b), 1e-8)
            ra = _seam_mismatch(d, a + da, b, rtol)
            rb = _seam_mismatch(d, a, b + db, rtol)
            jac = (
                (ra[0] - r0[0]) / da,
                (rb[0] - r0[0]) / db,
                (ra[1] - r0[1]) / da,
                (rb[1] - r0[1]) / db,
            )
            det = jac[0] * jac[3] - jac[1] * jac[2]
            if det == 0.0:
                raise SearchError("singular seam Jacobian", history=history)
        j11, j12, j21, j22 = jac
        det = j11 * j22 - j12 * j21
        step_a = (r0[0] * j22 - r0[1] * j12) / det
        step_b = (r0[1] * j11 - r0[0] * j21) / det
        a -= step_a
        b -= step_b
        prev_size = size
        if abs(step_a) <= 1e-15 * abs(a) and abs(step_b) <= 1e-14 * max(abs(b), 1e-300):
            return a, b
    # convergence stalls at the rounding floor of the legs; accept if tiny
    size, a, b = best
    if size < 1e-9 * max(1.0, abs(b)):
        return a, b
    raise SearchError("seam Newton iteration did not converge", history=history)


def _assemble_profile(d: int, n: int, a: float, b: float, rtol: float = 1e-13) -> SelfSimilarProfile:
    # outward dense leg: step cap in x keeps the quintic's curvature error
    # below the normalized-residual budget
    fwd = _outward_leg(d, a, Y_MATCH, rtol, max_step_x=0.008)
    ys, fs, fps, fpps = [], [], [], []
    for x, s in zip(fwd.x, fwd.y):
        y = math.exp(x) / a
        f = s[0]
        fp = s[1] / y
        ys.append(y)
        fs.append(f)
        fps.append(fp)
        fpps.append(profile_second_derivative(d, SHRINK, y, f, fp))

    # tail leg from the far field down to the seam, recording [Y_MATCH, Y_MAX]
    back_cap = lambda y: min(6.0 / max(y, 1.0), 2.1e-3 * y**1.5)
    back = _tail_leg(d, b, Y_MATCH, rtol, max_step=back_cap)
    bys, bfs, bfps, bfpps = [], [], [], []
    for y, s in zip(back.x, back.y):
        if y > Y_MAX:
            continue
        g, gp = s
        bys.append(y)
        bfs.append(HALF_PI + g)
        bfps.append(gp)
        bfpps.append(profile_second_derivative(d, SHRINK, y, HALF_PI + g, gp))
    # exact endpoint node at Y_MAX from the dense tail solution
    gmax, gpmax = back(Y_MAX)
    bys.append(Y_MAX)
    bfs.append(HALF_PI + gmax)
    bfps.append(gpmax)
    bfpps.append(profile_second_derivative(d, SHRINK, Y_MAX, HALF_PI + gmax, gpmax))
    order = np.argsort(bys)
    bys = [bys[i] for i in order]
    bfs = [bfs[i] for i in order]
    bfps = [bfps[i] for i in order]
    bfpps = [bfpps[i] for i in order]

    # drop the duplicated seam node from the tail side
    if bys and abs(bys[0] - ys[-1]) < 1e-12 * Y_MATCH:
        bys, bfs, bfps, bfpps = bys[1:], bfs[1:], bfps[1:], bfpps[1:]

    nodes = np.array(ys + bys)
    interp = QuinticHermite(
        nodes,
        np.array(fs + bfs),
        np.array(fps + bfps),
        np.array(fpps + bfpps),
    )

    vals = np.array(fs + bfs) - HALF_PI
    crossings = int(np.sum(np.abs(np.diff(np.signbit(vals)))))

    return SelfSimilarProfile(
        kind="shrinker",
        d=d,
        slope=a,
        far_field=b,
        y_max=Y_MAX,
        crossings=crossings,
        interpolant=interp,
        series_cut=nodes[0],
        index=n,
    )


def find_shrinker(d: int, n: int, a_prev: Optional[float] = None) -> SelfSimilarProfile:
    """Construct the n-th shrinking profile in dimension d.

    a_prev, when given, seeds the slope bracket from the previous family
    member (one log-period prediction); otherwise a geometric scan finds
    the bracket. The slope is bisected to relative width 1e-12 on the
    crossing-count discriminant, then the (slope, far-field) pair is
    polished by a Newton match of the two construction legs.
    """
    _check_dimension(d)
    if not isinstance(n, int) or isinstance(n, bool) or not 1 <= n <= MAX_INDEX:
        raise DomainError(f"family index must be an integer in 1..{MAX_INDEX}, got {n!r}")

    history: list = []
    lo, hi = _scan_bracket(d, n, a_prev, history)
    lo, hi = _bisect_slope(d, n, lo, hi, history)
    a = 0.5 * (lo + hi)
    b = _estimate_far_field(d, a)
    a, b = _newton_polish(d, a, b, history)
    profile = _assemble_profile(d, n, a, b)
    profile.energy = conformal_energy(profile)
    return profile


def shrinker_family(d: int, n_max: int) -> list[SelfSimilarProfile]:
    """Profiles n = 1 .. n_max, each seeding the next one's bracket."""
    out = []
    a_prev = None
    for n in range(1, n_max + 1):
        p = find_shrinker(d, n, a_prev=a_prev)
        out.append(p)
        a_prev = p.slope
    return out


def conformal_energy(profile: SelfSimilarProfile, npts: int = 10) -> float:
    """Weighted Dirichlet energy
        1/2 int_0^inf (f'^2 + (d-1) sin^2 f / y^2) y^(d-1) e^(-y^2/4) dy.

    Uses the profile's own mesh with Gauss panels per interval plus a
    closed-form Gaussian estimate of the truncated tail (equator value
    of the potential term, the only non-exponentially-small piece).
    Requires y_max >= 20 so the tail estimate's own error stays far
    under the 1e-8 absolute accuracy target.
    """
    if profile.y_max < 20.0:
        raise PreconditionError(
            f"energy quadrature needs y_max >= 20, profile has {profile.y_max}"
        )
    d = profile.d

    def density(y):
        fp = profile.derivative(y)
        f = profile(y)
        return 0.5 * (fp**2 + (d - 1.0) * np.sin(f) ** 2 / y**2) * y ** (d - 1.0) * np.exp(
            -(y**2) / 4.0
        )

    mesh = profile.interpolant.x
    total = integrate_on_mesh(density, mesh, npts=npts)
    # series region [0, series_cut]: integrand ~ d/2 a^2 y^(d-1) there
    cut = profile.series_cut
    if cut > 0.0:
        sub = np.linspace(0.0, cut, 5)
        sub[0] = 1e-300  # avoid 0/0 in sin^2(f)/y^2 at the origin
        total += integrate_on_mesh(density, sub, npts=npts)
    return total + _gaussian_tail(d, profile.y_max)


def _gaussian_tail(d: int, ymax: float) -> float:
    """(d-1)/2 * int_ymax^inf y^(d-3) e^(-y^2/4) dy, exactly.

    sin^2 f = 1 + O(y^-2) past the fit window, so this captures the
    truncated energy up to a relative O(ymax^-2) of an already
    e^(-ymax^2/4)-sized term.
    """
    e = math.exp(-ymax * ymax / 4.0)
    if d == 3:
        base = math.sqrt(math.pi) * math.erfc(ymax / 2.0)
    elif d == 4:
        base = 2.0 * e
    elif d == 5:
        base = 2.0 * ymax * e + 2.0 * math.sqrt(math.pi) * math.erfc(ymax / 2.0)
    else:
        base = (2.0 * ymax * ymax + 8.0) * e
    return 0.5 * (d - 1.0) * base
