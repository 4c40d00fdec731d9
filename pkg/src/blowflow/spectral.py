"""Mode spectra of the linearized flow around self-similar profiles.

Both linearizations reduce to one ODE family. Around a shrinker the
mode equation is

    v'' + ((d-1)/y - y/2) v' + (lam - (d-1) cos(2 f)/y^2) v = 0

with v ~ y at the origin and v ~ y^(2 lam) at infinity. Around an
expander, stripping the Gaussian factor from the decaying mode
(V = e^{-y^2/4} W) turns the problem into exactly the same equation for
W with the eigenvalue shifted by d/2, so a single double-sided shooting
engine serves both; only the potential cos(2 profile) and the reported
eigenvalue differ.

Shooting is forward from an origin series and inward from the far
field. Inward integration is self-correcting: the inadmissible solution
grows like e^{+y^2/4} outward, hence collapses by hundreds of orders of
magnitude on the way in, so the matching direction at the interior
point is insensitive to how the far-field start vector is truncated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

from .errors import DomainError, PreconditionError
from .odeint import OdeProblem, integrate
from .profiles import (
    QuinticHermite,
    SelfSimilarProfile,
    origin_series_coeffs,
)
from .quadrature import integrate_on_mesh
from .specfun import gamma_phase

__all__ = [
    "SpectrumReport",
    "shrinker_spectrum",
    "expander_spectrum",
    "limit_spectrum",
]

MATCH_Y = 2.0
TAIL_SHRINK = 25.0  # algebraic-tail onset around shrinkers
TAIL_EXPAND = 14.0  # Gaussian-tail onset around expanders (stripped form)
WINDOW = (-100.0, 10.0)
SCAN_STEP = 0.05

# zeros are only counted below this: the last stretch before the tail
# onset can carry an invisible remnant of the start-vector correction,
# and genuine oscillation ends at y = 4 sqrt(lam) < 13 inside the window
_ZERO_TRUST = {TAIL_SHRINK: 24.0, TAIL_EXPAND: 12.5}


# ---------------------------------------------------------------------------
# potential table: cubic Hermite coefficients of cos(2 f(e^t)) on a
# uniform grid in t = ln y (profiles vary on a roughly uniform log scale,
# so a uniform-in-y table would waste nodes at large y and miss the core)

_TABLE_STEP = 0.002


def _potential_table(profile: SelfSimilarProfile, y_lo: float, y_hi: float):
    t_lo = math.log(y_lo) - _TABLE_STEP
    t_hi = math.log(y_hi) + _TABLE_STEP
    n = int(math.ceil((t_hi - t_lo) / _TABLE_STEP)) + 1
    t = np.linspace(t_lo, t_hi, n)
    y = np.exp(t)
    f = profile(y)
    fp = profile.derivative(y)
    p = np.cos(2.0 * f)
    m = -2.0 * y * fp * np.sin(2.0 * f) * (t[1] - t[0])  # dP/dt * h
    p0, p1 = p[:-1], p[1:]
    m0, m1 = m[:-1], m[1:]
    k0 = p0
    k1 = m0
    k2 = -3.0 * p0 + 3.0 * p1 - 2.0 * m0 - m1
    k3 = 2.0 * p0 - 2.0 * p1 + m0 + m1
    return t_lo, 1.0 / (t[1] - t[0]), k0, k1, k2, k3


@numba.njit(cache=True)
def _pot(t, t0, inv_h, k0, k1, k2, k3):
    pos = (t - t0) * inv_h
    i = int(pos)
    if i < 0:
        i = 0
    last = k0.shape[0] - 1
    if i > last:
        i = last
    u = pos - i
    return ((k3[i] * u + k2[i]) * u + k1[i]) * u + k0[i]


@numba.njit(cache=True)
def _leg(lam, dm1, y_a, y_b, v, vp, rtol, atol,
         t0, inv_h, k0, k1, k2, k3, y_zero_max):
    """One shooting leg of the mode equation, renormalized against
    over/underflow. Returns (v, vp, sign changes of v below y_zero_max,
    status) with status 0 on success."""
    direction = 1.0 if y_b > y_a else -1.0
    span = abs(y_b - y_a)
    y = y_a
    h = direction * min(1e-3 * span, 0.1 * abs(y_a))
    if h == 0.0:
        h = direction * 1e-3 * span
    zeros = 0
    sign_prev = 1.0 if v > 0.0 else -1.0
    steps = 0
    while (y_b - y) * direction > 0.0:
        if steps > 2_000_000:
            return v, vp, zeros, 1
        steps += 1
        if (y + h - y_b) * direction > 0.0:
            h = y_b - y

        # Fehlberg 4(5) stages
        p = _pot(math.log(y), t0, inv_h, k0, k1, k2, k3)
        a1 = vp
        b1 = -(dm1 / y - 0.5 * y) * vp - (lam - dm1 * p / (y * y)) * v

        yy = y + 0.25 * h
        tv = v + h * 0.25 * a1
        tp = vp + h * 0.25 * b1
        p = _pot(math.log(yy), t0, inv_h, k0, k1, k2, k3)
        a2 = tp
        b2 = -(dm1 / yy - 0.5 * yy) * tp - (lam - dm1 * p / (yy * yy)) * tv

        yy = y + 0.375 * h
        tv = v + h * (0.09375 * a1 + 0.28125 * a2)
        tp = vp + h * (0.09375 * b1 + 0.28125 * b2)
        p = _pot(math.log(yy), t0, inv_h, k0, k1, k2, k3)
        a3 = tp
        b3 = -(dm1 / yy - 0.5 * yy) * tp - (lam - dm1 * p / (yy * yy)) * tv

        yy = y + h * (12.0 / 13.0)
        tv = v + h * ((1932.0 * a1 - 7200.0 * a2 + 7296.0 * a3) / 2197.0)
        tp = vp + h * ((1932.0 * b1 - 7200.0 * b2 + 7296.0 * b3) / 2197.0)
        p = _pot(math.log(yy), t0, inv_h, k0, k1, k2, k3)
        a4 = tp
        b4 = -(dm1 / yy - 0.5 * yy) * tp - (lam - dm1 * p / (yy * yy)) * tv

        yy = y + h
        tv = v + h * (439.0 / 216.0 * a1 - 8.0 * a2 + 3680.0 / 513.0 * a3 - 845.0 / 4104.0 * a4)
        tp = vp + h * (439.0 / 216.0 * b1 - 8.0 * b2 + 3680.0 / 513.0 * b3 - 845.0 / 4104.0 * b4)
        p = _pot(math.log(yy), t0, inv_h, k0, k1, k2, k3)
        a5 = tp
        b5 = -(dm1 / yy - 0.5 * yy) * tp - (lam - dm1 * p / (yy * yy)) * tv

        yy = y + 0.5 * h
        tv = v + h * (-8.0 / 27.0 * a1 + 2.0 * a2 - 3544.0 / 2565.0 * a3
                      + 1859.0 / 4104.0 * a4 - 11.0 / 40.0 * a5)
        tp = vp + h * (-8.0 / 27.0 * b1 + 2.0 * b2 - 3544.0 / 2565.0 * b3
                       + 1859.0 / 4104.0 * b4 - 11.0 / 40.0 * b5)
        p = _pot(math.log(yy), t0, inv_h, k0, k1, k2, k3)
        a6 = tp
        b6 = -(dm1 / yy - 0.5 * yy) * tp - (lam - dm1 * p / (yy * yy)) * tv

        v5 = v + h * (16.0 / 135.0 * a1 + 6656.0 / 12825.0 * a3
                      + 28561.0 / 56430.0 * a4 - 9.0 / 50.0 * a5 + 2.0 / 55.0 * a6)
        p5 = vp + h * (16.0 / 135.0 * b1 + 6656.0 / 12825.0 * b3
                       + 28561.0 / 56430.0 * b4 - 9.0 / 50.0 * b5 + 2.0 / 55.0 * b6)
        ev = h * (a1 / 360.0 - 128.0 / 4275.0 * a3 - 2197.0 / 75240.0 * a4
                  + a5 / 50.0 + 2.0 / 55.0 * a6)
        ep = h * (b1 / 360.0 - 128.0 / 4275.0 * b3 - 2197.0 / 75240.0 * b4
                  + b5 / 50.0 + 2.0 / 55.0 * b6)

        sc_v = atol + rtol * max(abs(v), abs(v5))
        sc_p = atol + rtol * max(abs(vp), abs(p5))
        err = math.sqrt(0.5 * ((ev / sc_v) ** 2 + (ep / sc_p) ** 2))

        if err <= 1.0:
            y_prev = y
            y = y + h
            v, vp = v5, p5
            if min(y, y_prev) <= y_zero_max and v != 0.0:
                s = 1.0 if v > 0.0 else -1.0
                if s != sign_prev:
                    zeros += 1
                sign_prev = s
            m = max(abs(v), abs(vp))
            if m > 1e200:
                v /= m
                vp /= m
        fac = 0.9 * (1.0 / err) ** 0.2 if err > 0.0 else 5.0
        if fac < 0.2:
            fac = 0.2
        elif fac > 5.0:
            fac = 5.0
        h *= fac
        if abs(h) < 1e-15 * span:
            return v, vp, zeros, 2
    return v, vp, zeros, 0


# ---------------------------------------------------------------------------
# shooting context


class _ShootingContext:
    """Everything the Wronskian needs for one profile, built once."""

    def __init__(self, profile: SelfSimilarProfile):
        self.profile = profile
        self.d = profile.d
        self.shift = 0.0 if profile.kind == "shrinker" else profile.d / 2.0
        self.tail_y = TAIL_SHRINK if profile.kind == "shrinker" else TAIL_EXPAND
        self.zero_max = _ZERO_TRUST[self.tail_y]
        a = profile.slope
        self.launch_y = 1e-3 * min(1.0, 1.0 / a) if a > 0.0 else 1e-3
        self.c3 = (
            origin_series_coeffs(profile.d, a, profile.sigma)[0] if a > 0.0 else 0.0
        )
        self.table = _potential_table(profile, self.launch_y * 0.9, self.tail_y * 1.05)

    def left_start(self, lam: float) -> tuple[float, float]:
        """Admissible origin behavior v = y + e3 y^3 + e5 y^5."""
        d, a, c3 = self.d, self.profile.slope, self.c3
        y0 = self.launch_y
        e3 = (0.25 - 0.5 * lam - a * a * (d - 1.0)) / (d + 2.0)
        e5 = (
            16.0 * a**4 * (4.0 * d - 1.0) * (d - 1.0)
            + 48.0 * a * a * (d - 1.0) * (lam - 1.0)
            + 12.0 * lam * lam - 24.0 * lam + 9.0
            - 96.0 * a * c3 * (d + 2.0) * (d - 1.0)
        ) / (96.0 * (d + 2.0) * (d + 4.0))
        v = y0 * (1.0 + y0 * y0 * (e3 + y0 * y0 * e5))
        vp = 1.0 + y0 * y0 * (3.0 * e3 + y0 * y0 * 5.0 * e5)
        return v, vp

    def legs(self, lam: float, rtol: float):
        t0, inv_h, k0, k1, k2, k3 = self.table
        dm1 = float(self.d - 1)
        v0, vp0 = self.left_start(lam)
        # scale-free error control (tiny atol): the legs renormalize
        # mid-flight, so only relative accuracy is meaningful
        left = _leg(lam, dm1, self.launch_y, MATCH_Y, v0, vp0, rtol, 1e-290,
                    t0, inv_h, k0, k1, k2, k3, self.zero_max)
        right = _leg(lam, dm1, self.tail_y, MATCH_Y, 1.0, 2.0 * lam / self.tail_y,
                     rtol, 1e-290, t0, inv_h, k0, k1, k2, k3, self.zero_max)
        return left, right

    def wronskian(self, lam: float, rtol: float = 1e-8):
        (vl, pl, zl, sl), (vr, pr, zr, sr) = self.legs(lam, rtol)
        nl = math.hypot(vl, pl)
        nr = math.hypot(vr, pr)
        if sl or sr or nl == 0.0 or nr == 0.0:
            raise ArithmeticError(f"shooting leg failed at lam = {lam}")
        return (vl * pr - pl * vr) / (nl * nr), zl + zr


def _scan_brackets(ctx: _ShootingContext, lo: float, hi: float):
    n = int(round((hi - lo) / SCAN_STEP))
    out = []
    prev_lam = lo
    prev_w, _ = ctx.wronskian(lo)
    for i in range(1, n + 1):
        lam = lo + (hi - lo) * i / n
        w, _ = ctx.wronskian(lam)
        if prev_w == 0.0:
            out.append((prev_lam, prev_lam))
        elif (w < 0.0) != (prev_w < 0.0):
            out.append((prev_lam, lam))
        prev_lam, prev_w = lam, w
    if prev_w == 0.0:
        out.append((prev_lam, prev_lam))
    return out


def _bisect_eigenvalue(ctx: _ShootingContext, lo: float, hi: float) -> float:
    if lo == hi:
        return lo
    flo, _ = ctx.wronskian(lo, rtol=1e-11)
    while hi - lo > 1e-10 * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        fm, _ = ctx.wronskian(mid, rtol=1e-11)
        if fm == 0.0:
            return mid
        if (fm < 0.0) == (flo < 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# eigenfunction assembly (python legs: dense nodes, chunked rescaling)


def _python_leg(ctx: _ShootingContext, lam: float, y_from: float, y_to: float,
                v0: float, vp0: float, rtol: float):
    """Dense mirror of the compiled leg; returns node lists (y, v, vp)."""
    t0, inv_h, k0, k1, k2, k3 = ctx.table
    dm1 = float(ctx.d - 1)

    def rhs(y, s):
        v, vp = s
        p = _pot(math.log(y), t0, inv_h, k0, k1, k2, k3)
        return [vp, -(dm1 / y - 0.5 * y) * vp - (lam - dm1 * p / (y * y)) * v]

    # cap the step so no interpolation interval spans more than ~0.35
    # e-foldings of the fastest local behavior (algebraic y^(2 lam),
    # Gaussian direction, oscillation); wider steps make the stored
    # quintic overshoot in steep-decay zones, which poisons weighted
    # inner products even though the nodes themselves are accurate
    k_osc = math.sqrt(abs(lam)) if lam < 0.0 else 1.0

    def cap(y):
        return 0.35 / max(2.0 * abs(lam) / y, 0.5 * y, k_osc, 1.0)

    ys: list[float] = []
    vs: list[float] = []
    ps: list[float] = []
    # geometric chunking keeps the renormalized state inside float range
    # even when y^(2 lam) swings hundreds of orders across the leg
    n_chunks = 8
    edges = [y_from * (y_to / y_from) ** (i / n_chunks) for i in range(n_chunks + 1)]
    edges[-1] = y_to
    v, vp = v0, vp0
    for a, b in zip(edges[:-1], edges[1:]):
        sol = integrate(OdeProblem(2, rhs, [v, vp], (a, b)), rtol=rtol,
                        atol=1e-290, max_step=cap, divergence_bound=1e250)
        if sol.status != "end":
            raise ArithmeticError(
                f"mode assembly leg stalled with status {sol.status!r}"
            )
        for x, s in zip(sol.x, sol.y):
            if ys and x == ys[-1]:
                continue
            ys.append(x)
            vs.append(s[0])
            ps.append(s[1])
        v, vp = sol.y[-1]
        m = max(abs(v), abs(vp))
        if m > 1e120:
            # rescale the chunk boundary and everything already stored
            v /= m
            vp /= m
            vs = [u / m for u in vs]
            ps = [u / m for u in ps]
    return ys, vs, ps


def _mode_second_derivative(ctx, lam, y, v, vp):
    t0, inv_h, k0, k1, k2, k3 = ctx.table
    dm1 = float(ctx.d - 1)
    p = _pot(math.log(y), t0, inv_h, k0, k1, k2, k3)
    return -(dm1 / y - 0.5 * y) * vp - (lam - dm1 * p / (y * y)) * v


def _assemble_eigenfunction(ctx: _ShootingContext, lam: float):
    """Matched global mode, stored for the report.

    For expander spectra the stripped variable is integrated and the
    Gaussian factor is restored on the nodes, so the stored interpolant
    is the physical mode shape.
    """
    v0, vp0 = ctx.left_start(lam)
    ly, lv, lp = _python_leg(ctx, lam, ctx.launch_y, MATCH_Y, v0, vp0, 1e-11)
    ry, rv, rp = _python_leg(ctx, lam, ctx.tail_y, MATCH_Y, 1.0,
                             2.0 * lam / ctx.tail_y, 1e-11)
    # least-squares match of the right leg's free scale at the seam
    vl, pl = lv[-1], lp[-1]
    vr, pr = rv[-1], rp[-1]
    s = (vl * vr + pl * pr) / (vr * vr + pr * pr)

    ys = ly + ry[::-1][1:]
    vs = lv + [s * u for u in rv[::-1][1:]]
    ps = lp + [s * u for u in rp[::-1][1:]]
    # interior zeros sit inside the classically allowed region
    # y < sqrt((d-1)/|lam|) when lam < -1; outside it the mode is
    # sign-definite but numerically buried under the grown remnant of
    # the outward leg's inadmissible direction, so don't count there
    cap = ctx.zero_max
    if lam < -1.0:
        cap = min(cap, 1.2 * math.sqrt((ctx.d - 1.0) / abs(lam)))
    zeros = 0
    sign = 1.0
    for y, u in zip(ys, vs):
        if u == 0.0 or y > cap:
            continue
        su = 1.0 if u > 0.0 else -1.0
        if ys[0] < y and su != sign:
            zeros += 1
        sign = su
    pps = [_mode_second_derivative(ctx, lam, y, u, q) for y, u, q in zip(ys, vs, ps)]

    if ctx.shift:  # expander: restore V = e^{-y^2/4} W on the nodes
        for i, y in enumerate(ys):
            g = math.exp(-y * y / 4.0)
            w, wp, wpp = vs[i], ps[i], pps[i]
            vs[i] = g * w
            ps[i] = g * (wp - 0.5 * y * w)
            pps[i] = g * (wpp - y * wp + (0.25 * y * y - 0.5) * w)

    ya = np.array(ys)
    va = np.array(vs)
    pa = np.array(ps)
    interp = QuinticHermite(ya, va, pa, np.array(pps))

    # normalize in the weighted inner product; weight for the physical
    # expander mode carries e^{+y^2/4}, which cancels the stripped factor
    d = ctx.d
    sgn = -1.0 if ctx.shift else 1.0

    def density(y):
        return interp(y) ** 2 * y ** (d - 1) * np.exp(-sgn * y * y / 4.0)

    norm = math.sqrt(integrate_on_mesh(density, ya))
    lead = va[min(3, len(va) - 1)]
    scale = (1.0 if lead >= 0.0 else -1.0) / norm
    interp.f *= scale
    interp.fp *= scale
    interp.fpp *= scale
    return interp, zeros


# ---------------------------------------------------------------------------
# reports


@dataclass
class SpectrumReport:
    """Computed point spectrum of one linearized operator.

    kind is "shrinker" or "expander"; label carries the family index or
    the origin slope. Eigenfunctions are weighted-normalized dense
    interpolants aligned with eigenvalues; zero_counts are their
    interior node counts, which equal each eigenvalue's global Sturm
    index. instability_count comes from the profile derivative's zeros
    (Sturm), so it also counts eigenvalues hidden below the window.
    """

    kind: str
    d: int
    label: float
    eigenvalues: list
    eigenfunctions: list
    zero_counts: list
    instability_count: int
    gauge_residual: float
    window: tuple


def _derivative_zero_count(profile: SelfSimilarProfile) -> int:
    y_lo = max(profile.series_cut * 1.5, 1e-7)
    ys = np.geomspace(y_lo, profile.y_max * 0.98, 6000)
    fp = profile.derivative(ys)
    # an extremum is only countable while the deviation from the far
    # plateau exceeds the far-field read tolerance; below it, extraction
    # noise at huge slopes manufactures sign changes. Dropping the
    # sub-floor nodes keeps every certified extremum (its peak node
    # survives) and removes the noise band wholesale.
    dev = np.abs(profile(ys) - (0.5 * math.pi + profile.far_field))
    fp = fp[dev > 1e-11]
    if fp.size < 2:
        return 0
    return int(np.sum(np.abs(np.diff(np.signbit(fp)))))


def _gauge_residual(profile: SelfSimilarProfile, lam_gauge: float) -> float:
    """Sup of the normalized mode-equation residual of y f'(y) at the
    gauge eigenvalue (time translation direction)."""
    d = profile.d
    sigma = profile.sigma
    y_lo = max(profile.series_cut * 2.0, 1e-6)
    # sample at the solution nodes: between nodes the interpolated
    # curvature carries its own error, which is not the mode's fault
    nodes = profile.interpolant.x
    ys = nodes[(nodes >= y_lo) & (nodes <= 20.0)]
    if len(ys) < 10:
        ys = np.geomspace(y_lo, 20.0, 1500)
    f = profile(ys)
    fp = profile.derivative(ys)
    fpp = profile.second_derivative(ys)
    # f''' by differentiating the profile equation
    damp = (d - 1.0) / ys + sigma * 0.5 * ys
    ddamp = -(d - 1.0) / ys**2 + sigma * 0.5
    q = (d - 1.0) * np.sin(2.0 * f) / (2.0 * ys**2)
    dq = (d - 1.0) * (np.cos(2.0 * f) * fp / ys**2 - np.sin(2.0 * f) / ys**3)
    fppp = -ddamp * fp - damp * fpp + dq
    v = ys * fp
    vp = fp + ys * fpp
    vpp = 2.0 * fpp + ys * fppp
    t1 = vpp
    t2 = damp * vp
    t3 = (lam_gauge - (d - 1.0) * np.cos(2.0 * f) / ys**2) * v
    resid = t1 + t2 + t3
    scale = np.maximum(np.abs(t1) + np.abs(t2) + np.abs(t3), 1e-30)
    return float(np.max(np.abs(resid) / scale))


def _spectrum(profile: SelfSimilarProfile, k_max: int) -> SpectrumReport:
    ctx = _ShootingContext(profile)
    lo = WINDOW[0] - ctx.shift  # expander window is stated in the physical
    hi = WINDOW[1] - ctx.shift  # eigenvalue, shooting runs in the shifted one
    eigenvalues = []
    eigenfunctions = []
    zero_counts = []
    for blo, bhi in _scan_brackets(ctx, lo, hi):
        lam = _bisect_eigenvalue(ctx, blo, bhi)
        interp, zeros = _assemble_eigenfunction(ctx, lam)
        if zeros > k_max:
            continue
        eigenvalues.append(lam + ctx.shift)
        eigenfunctions.append(interp)
        zero_counts.append(zeros)
    gauge_lam = -1.0 if profile.kind == "shrinker" else 1.0
    return SpectrumReport(
        kind=profile.kind,
        d=profile.d,
        label=profile.index if profile.kind == "shrinker" else profile.slope,
        eigenvalues=eigenvalues,
        eigenfunctions=eigenfunctions,
        zero_counts=zero_counts,
        instability_count=_derivative_zero_count(profile),
        gauge_residual=_gauge_residual(profile, gauge_lam),
        window=WINDOW,
    )


def shrinker_spectrum(profile: SelfSimilarProfile, k_max: int) -> SpectrumReport:
    """Eigenvalues of the mode equation around a shrinker, lowest first,
    truncated to global Sturm index k_max, within the search window."""
    if profile.kind != "shrinker":
        raise PreconditionError("profile must be a shrinker")
    if k_max < 1:
        raise PreconditionError(f"k_max must be at least 1, got {k_max}")
    return _spectrum(profile, k_max)


def expander_spectrum(profile: SelfSimilarProfile, k_max: int) -> SpectrumReport:
    """Eigenvalues of the decaying-mode problem around an expander."""
    if profile.kind != "expander":
        raise PreconditionError("profile must be an expander")
    if k_max < 1:
        raise PreconditionError(f"k_max must be at least 1, got {k_max}")
    return _spectrum(profile, k_max)


# ---------------------------------------------------------------------------
# limiting operator: quantization through the continuous Gamma phase


def limit_spectrum(d: int, m_range: tuple[int, int]) -> list[float]:
    """Eigenvalues lam_m of the limiting operator, m over the given
    inclusive range; lam_0 = -1 anchors the phase.

    The phase is strictly increasing in lam (its lam-derivative is the
    imaginary part of digamma in the upper half plane), so each m has
    exactly one root, bracketed by geometric marching and bisected to
    1e-8. Roots escaping the search caps are omitted.
    """
    if d not in (3, 4, 5, 6):
        raise DomainError(f"limit operator defined for d in 3..6, got d = {d}")
    m_lo, m_hi = m_range
    if m_lo > m_hi:
        raise PreconditionError(f"empty index range {m_range}")
    base = gamma_phase(-1.0, d)
    out = []
    for m in range(int(m_lo), int(m_hi) + 1):
        if m == 0:
            out.append(-1.0)
            continue
        target = base + m * math.pi

        def g(lam):
            return gamma_phase(lam, d) - target

        if m > 0:
            lo, hi = -1.0, -1.0 + 2.0
            while g(hi) < 0.0:
                lo, hi = hi, hi + 2.0 * (hi + 1.0 + 1.0)
                if hi > 1e3:
                    hi = None
                    break
        else:
            lo, hi = -4.0, -1.0
            while g(lo) > 0.0:
                lo, hi = 4.0 * lo, lo
                if lo < -1e7:
                    lo = None
                    break
        if lo is None or hi is None:
            continue
        while hi - lo > 1e-8 * max(1.0, abs(lo)):
            mid = 0.5 * (lo + hi)
            if g(mid) < 0.0:
                lo = mid
            else:
                hi = mid
        out.append(0.5 * (lo + hi))
    return out
