"""Self-similar expanding solutions and the map from origin slope to
far-field angle.

Expanders are globally regular: one outward integration per slope, no
shooting. The far-field deviation carries an algebraic tail plus a
Gaussian-decaying mode, so forward integration is stable and the
far-field angle B(A) is read off a window well past the algebraic
tail's convergence radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, PreconditionError, RangeError
from .odeint import OdeProblem, integrate
from .profiles import (
    EXPAND,
    HALF_PI,
    QuinticHermite,
    SelfSimilarProfile,
    far_field_coeffs,
    extract_far_field,
    log_rescaled_rhs,
    origin_series_coeffs,
    profile_second_derivative,
    series_start,
)
from .specfun import omega_freq

__all__ = [
    "BAMap",
    "solve_expander",
    "scan_ba",
    "find_roots",
    "find_turning_points",
    "fit_large_a",
    "far_field_angle",
]

Y_EXT = 50.0        # outward horizon; tail window below
TAIL_LO = 30.0      # extraction window [30, 50]
Y_MAX = 40.0        # dense interpolant domain
_XI_START = 1e-3

_FIT_LO = 1e2       # large-A law fit window
_FIT_HI = 1e4


def _check_dimension(d: int) -> None:
    if d not in (3, 4, 5, 6):
        raise DomainError(f"profile families exist for d in 3..6, got d = {d}")


def _outward_leg(d: int, A: float, y_end: float, rtol: float, max_step_x=None):
    """Integrate the profile in x = ln(A y) from the origin series."""
    y0 = _XI_START * min(1.0, 1.0 / A)
    f0, fp0 = series_start(d, A, EXPAND, y0)
    x0 = math.log(A * y0)
    problem = OdeProblem(
        2, log_rescaled_rhs(d, A, EXPAND), [f0, y0 * fp0], (x0, math.log(A * y_end))
    )
    return integrate(problem, rtol=rtol, atol=rtol * 1e-2, max_step=max_step_x)


def _tail_samples(d: int, A: float, rtol: float = 1e-12) -> list[tuple[float, float]]:
    sol = _outward_leg(d, A, Y_EXT, rtol)
    out = []
    for x, s in zip(sol.x, sol.y):
        y = math.exp(x) / A
        if y >= TAIL_LO:
            out.append((y, s[0] - HALF_PI))
    # the controller takes long steps out here; make sure the window is
    # populated evenly enough for the least-squares touch
    if len(out) < 9:
        ys = np.linspace(TAIL_LO, Y_EXT, 9)
        out = [(float(y), sol(math.log(A * y))[0] - HALF_PI) for y in ys]
    return out


def far_field_angle(d: int, A: float, rtol: float = 1e-12) -> float:
    """B(A) alone, skipping dense-profile assembly (scan workhorse)."""
    _check_dimension(d)
    if A < 0.0:
        raise PreconditionError(f"origin slope must be nonnegative, got {A}")
    if A == 0.0:
        return -HALF_PI
    return extract_far_field(d, EXPAND, _tail_samples(d, A, rtol))


def solve_expander(d: int, A: float) -> SelfSimilarProfile:
    """Expanding profile with origin slope A, far field read to 1e-10.

    A = 0 returns the zero map with B = -pi/2 exactly.
    """
    _check_dimension(d)
    if A < 0.0:
        raise PreconditionError(f"origin slope must be nonnegative, got {A}")
    if A == 0.0:
        nodes = np.linspace(1e-8, Y_MAX, 160)
        zero = np.zeros_like(nodes)
        interp = QuinticHermite(nodes, zero, zero, zero)
        return SelfSimilarProfile(
            kind="expander",
            d=d,
            slope=0.0,
            far_field=-HALF_PI,
            y_max=Y_MAX,
            crossings=0,
            interpolant=interp,
            series_cut=0.0,
            index=None,
        )

    rtol = 1e-13
    sol = _outward_leg(d, A, Y_EXT, rtol, max_step_x=0.008)
    ys, fs, fps, fpps = [], [], [], []
    tail = []
    for x, s in zip(sol.x, sol.y):
        y = math.exp(x) / A
        f = s[0]
        fp = s[1] / y
        if y >= TAIL_LO:
            tail.append((y, f - HALF_PI))
        if y > Y_MAX - 1e-9:
            continue
        ys.append(y)
        fs.append(f)
        fps.append(fp)
        fpps.append(profile_second_derivative(d, EXPAND, y, f, fp))
    phi, phix = sol(math.log(A * Y_MAX))
    ys.append(Y_MAX)
    fs.append(phi)
    fps.append(phix / Y_MAX)
    fpps.append(profile_second_derivative(d, EXPAND, Y_MAX, phi, phix / Y_MAX))

    if len(tail) < 9:
        tys = np.linspace(TAIL_LO, Y_EXT, 9)
        tail = [(float(y), sol(math.log(A * y))[0] - HALF_PI) for y in tys]
    b = extract_far_field(d, EXPAND, tail)

    nodes = np.array(ys)
    interp = QuinticHermite(nodes, np.array(fs), np.array(fps), np.array(fpps))
    vals = np.array(fs) - HALF_PI
    crossings = int(np.sum(np.abs(np.diff(np.signbit(vals)))))
    return SelfSimilarProfile(
        kind="expander",
        d=d,
        slope=A,
        far_field=b,
        y_max=Y_MAX,
        crossings=crossings,
        interpolant=interp,
        series_cut=nodes[0],
        index=None,
    )


@dataclass
class BAMap:
    """Sampled far-field angle as a function of origin slope, with the
    refinements hung off it (roots per target, turning points, the
    large-slope oscillation fit)."""

    d: int
    A: np.ndarray
    B: np.ndarray
    roots: dict = field(default_factory=dict)
    turning_points: list = field(default_factory=list)
    fit: Optional[tuple[float, float]] = None  # (C, delta) of the large-A law

    def interpolate(self, a):
        """B at off-grid slopes, 4-point Lagrange in ln A (the map is
        smooth there; linear interpolation would cap accuracy at the
        grid spacing squared)."""
        a = np.asarray(a, dtype=float)
        scalar = a.ndim == 0
        a = np.atleast_1d(a)
        if np.any(a < self.A[0]) or np.any(a > self.A[-1]):
            raise PreconditionError("interpolation outside scanned range")
        t = np.log(a)
        xs = np.log(self.A)
        i = np.clip(np.searchsorted(xs, t) - 1, 1, len(xs) - 3)
        out = np.zeros_like(t)
        for k in range(4):
            idx = i - 1 + k
            lk = np.ones_like(t)
            for j in range(4):
                if j == k:
                    continue
                lk *= (t - xs[i - 1 + j]) / (xs[idx] - xs[i - 1 + j])
            out += self.B[idx] * lk
        return float(out[0]) if scalar else out


def scan_ba(d: int, a_min: float, a_max: float, samples: int) -> BAMap:
    """Sample B(A) on a log grid with exact endpoints, refining near sign
    changes of B and of its discrete derivative."""
    _check_dimension(d)
    if not (0.0 < a_min < a_max):
        raise PreconditionError(f"need 0 < a_min < a_max, got [{a_min}, {a_max}]")
    if samples < 2:
        raise PreconditionError(f"need at least 2 samples, got {samples}")

    grid = list(np.geomspace(a_min, a_max, samples))
    grid[0], grid[-1] = a_min, a_max  # exact input endpoints
    As = list(grid)
    Bs = [far_field_angle(d, a) for a in As]

    for _ in range(3):
        inserts = []
        for i in range(len(As) - 1):
            split = (Bs[i] < 0.0) != (Bs[i + 1] < 0.0)
            if not split and 0 < i:
                d1 = (Bs[i] - Bs[i - 1]) / math.log(As[i] / As[i - 1])
                d2 = (Bs[i + 1] - Bs[i]) / math.log(As[i + 1] / As[i])
                split = (d1 < 0.0) != (d2 < 0.0)
            if split:
                inserts.append(math.sqrt(As[i] * As[i + 1]))
        if not inserts:
            break
        for a in inserts:
            Bs.append(far_field_angle(d, a))
            As.append(a)
        order = np.argsort(As)
        As = [As[i] for i in order]
        Bs = [Bs[i] for i in order]

    return BAMap(d=d, A=np.array(As), B=np.array(Bs))


def _refine_root(fn, lo, hi, flo, fhi, xtol) -> float:
    """Bracketed root to xtol: bisection until the bracket is modest,
    then secant steps kept inside the bracket (bisection fallback)."""
    while hi - lo > 1e-3 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if (fm < 0.0) == (flo < 0.0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    bisect_next = False
    while hi - lo > xtol:
        width = hi - lo
        denom = fhi - flo
        mid = lo - flo * width / denom if denom != 0.0 else 0.5 * (lo + hi)
        if bisect_next or not lo + 0.01 * width < mid < hi - 0.01 * width:
            mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if fm == 0.0:
            return mid
        if (fm < 0.0) == (flo < 0.0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
        # a secant step that barely moved the bracket earns a bisection
        bisect_next = (hi - lo) > 0.6 * width
    return 0.5 * (lo + hi)


def find_roots(bamap: BAMap, target: float) -> list[float]:
    """Slopes where B(A) equals target, refined to 1e-10 in A."""
    d = bamap.d

    def fn(a):
        return far_field_angle(d, a, rtol=1e-13) - target

    roots = []
    g = bamap.B - target
    for i in range(len(bamap.A) - 1):
        ga, gb = g[i], g[i + 1]
        if ga == 0.0:
            roots.append(float(bamap.A[i]))
            continue
        if (ga < 0.0) == (gb < 0.0):
            continue
        lo, hi = float(bamap.A[i]), float(bamap.A[i + 1])
        roots.append(_refine_root(fn, lo, hi, ga, gb, 1e-10 * max(1.0, hi)))
    if g[-1] == 0.0:
        roots.append(float(bamap.A[-1]))
    roots.sort()
    bamap.roots[target] = roots
    return roots


def _variational_rhs(d: int):
    dm1 = d - 1.0

    def rhs(y, s):
        F, Fp, v, vp = s
        damp = dm1 / y + 0.5 * y
        curv = dm1 / (y * y)
        return [
            Fp,
            -damp * Fp + 0.5 * curv * math.sin(2.0 * F),
            vp,
            -damp * vp + curv * math.cos(2.0 * F) * v,
        ]

    return rhs


def _b_prime(d: int, A: float, rtol: float = 1e-11) -> float:
    """dB/dA via the variational system (finite differences of B(A) are
    hopeless against the oscillatory large-slope regime)."""
    y0 = _XI_START * min(1.0, 1.0 / A)
    f0, fp0 = series_start(d, A, EXPAND, y0)
    # dc3/dA of c3 = -A(4A^2(d-1) + 3 sigma)/(12(d+2)), sigma = +1
    dc3 = -(12.0 * A * A * (d - 1) + 3.0) / (12.0 * (d + 2))
    v0 = y0 + dc3 * y0**3
    vp0 = 1.0 + 3.0 * dc3 * y0 * y0
    problem = OdeProblem(4, _variational_rhs(d), [f0, fp0, v0, vp0], (y0, Y_EXT))
    sol = integrate(problem, rtol=rtol, atol=rtol * 1e-3)

    ys = [y for y in sol.x if y >= TAIL_LO]
    if len(ys) < 9:
        ys = list(np.linspace(TAIL_LO, Y_EXT, 9))
    states = [sol(y) for y in ys]
    B = extract_far_field(d, EXPAND, [(y, s[0] - HALF_PI) for y, s in zip(ys, states)])
    # the deviation's tail is Bdot times the B-derivative of the algebraic
    # tail, linear in Bdot: two-column fit, first neglected order absorbed
    h = 1e-6
    cp = far_field_coeffs(d, B + h, EXPAND)
    cm = far_field_coeffs(d, B - h, EXPAND)
    dc2, dc4, dc6 = ((p - m) / (2.0 * h) for p, m in zip(cp, cm))
    ya = np.array(ys)
    vs = np.array([s[2] for s in states])
    iy2 = 1.0 / (ya * ya)
    col1 = 1.0 + iy2 * (dc2 + iy2 * (dc4 + iy2 * dc6))
    basis = np.column_stack([col1, iy2**4])
    coef, *_ = np.linalg.lstsq(basis, vs, rcond=None)
    return float(coef[0])


def find_turning_points(d: int, a_max: float) -> list[float]:
    """Slopes where dB/dA vanishes, ascending, refined to 1e-8."""
    _check_dimension(d)
    if a_max <= 0.0:
        raise PreconditionError(f"a_max must be positive, got {a_max}")
    a_lo = 0.05
    if a_max <= a_lo:
        return []
    # sign changes of B' are spaced pi/omega in ln A at large A; sample
    # several points per half-period
    step = math.pi / omega_freq(d) / 6.0
    n = max(2, int(math.ceil(math.log(a_max / a_lo) / step)) + 1)
    grid = np.geomspace(a_lo, a_max, n)
    vals = [_b_prime(d, float(a)) for a in grid]
    points = []
    for i in range(len(grid) - 1):
        if (vals[i] < 0.0) == (vals[i + 1] < 0.0):
            continue
        lo, hi = float(grid[i]), float(grid[i + 1])
        points.append(
            _refine_root(
                lambda a: _b_prime(d, a), lo, hi, vals[i], vals[i + 1],
                1e-8 * max(1.0, hi),
            )
        )
    return points


def fit_large_a(bamap: BAMap) -> tuple[float, float]:
    """(C, delta) of B(A) ~ C A^(-(d-2)/2) sin(omega ln A + delta),
    least squares over the scan's samples inside [1e2, 1e4]."""
    d = bamap.d
    mask = (bamap.A >= _FIT_LO) & (bamap.A <= _FIT_HI)
    if int(mask.sum()) < 8:
        raise RangeError(
            "large-slope fit needs samples covering [1e2, 1e4]",
            required=(_FIT_LO, _FIT_HI),
        )
    w = omega_freq(d)
    ln_a = np.log(bamap.A[mask])
    scaled = bamap.B[mask] * bamap.A[mask] ** ((d - 2) / 2.0)
    basis = np.column_stack([np.sin(w * ln_a), np.cos(w * ln_a)])
    (p, q), *_ = np.linalg.lstsq(basis, scaled, rcond=None)
    c = math.hypot(p, q)
    delta = math.atan2(q, p)
    bamap.fit = (c, delta)
    return bamap.fit
