"""Adaptive Runge-Kutta-Fehlberg 4(5) integration with dense output.

Small-system integrator used by the profile, spectral and asymptotics
modules (dimensions 2 to 4). States are plain lists of floats: for these
sizes the interpreter loop beats array dispatch, and pure float
arithmetic makes runs bit-for-bit reproducible.

The dense interpolant on each accepted step is a quartic through the
endpoint values, endpoint derivatives, and a midpoint value obtained
lazily from one classic RK4 half-step (a cubic Hermite cannot reach the
10x-step-tolerance interpolation contract at tight tolerances).
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

__all__ = ["OdeProblem", "Solution", "integrate"]

# Fehlberg 4(5) tableau
_C = (0.0, 0.25, 3.0 / 8.0, 12.0 / 13.0, 1.0, 0.5)
_A = (
    (),
    (0.25,),
    (3.0 / 32.0, 9.0 / 32.0),
    (1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0),
    (439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0),
    (-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0),
)
_B5 = (16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0)
_B4 = (25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0, 0.0)
_E = tuple(b5 - b4 for b5, b4 in zip(_B5, _B4))

# flattened tableau bindings for the unrolled stage loop
_C1, _C2, _C3, _C4, _C5 = _C[1:]
(_A10,) = _A[1]
_A20, _A21 = _A[2]
_A30, _A31, _A32 = _A[3]
_A40, _A41, _A42, _A43 = _A[4]
_A50, _A51, _A52, _A53, _A54 = _A[5]
_B50, _, _B52, _B53, _B54, _B55 = _B5
_E0, _, _E2, _E3, _E4, _E5 = _E

_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 5.0
_ORDER = 5.0
_BETA = 0.4 / _ORDER  # PI stabilisation
_ALPHA = 0.7 / _ORDER

DEFAULT_DIVERGENCE_BOUND = 1e8
_UNDERFLOW_FRACTION = 1e-14
_EVENT_XTOL = 1e-12


@dataclass
class OdeProblem:
    """First-order system y' = rhs(x, y) on a directed interval.

    rhs takes (x, y) with y a sequence of floats and must return a
    sequence of the same length. interval may be decreasing for
    backward integration.
    """

    dimension: int
    rhs: Callable[[float, Sequence[float]], Sequence[float]]
    y0: Sequence[float]
    interval: tuple[float, float]

    def __post_init__(self):
        self.y0 = [float(v) for v in self.y0]
        if len(self.y0) != self.dimension:
            raise ValueError(
                f"y0 has length {len(self.y0)}, expected dimension {self.dimension}"
            )
        a, b = self.interval
        if not (math.isfinite(a) and math.isfinite(b)) or a == b:
            raise ValueError(f"degenerate interval {self.interval}")


class Solution:
    """Accepted mesh plus a lazy piecewise-quartic dense interpolant.

    status is one of "end", "event", "step_underflow", "divergence".
    For "event" terminations, event_index and event_x identify which
    event function fired and where.
    """

    def __init__(self, rhs, dimension):
        self._rhs = rhs
        self.dimension = dimension
        self.x: list[float] = []
        self.y: list[list[float]] = []
        self.f: list[list[float]] = []
        self.status: str = "end"
        self.event_index: Optional[int] = None
        self.event_x: Optional[float] = None
        self._mid: dict[int, list[float]] = {}  # interval index -> midpoint value

    def _append(self, x, y, f):
        self.x.append(x)
        self.y.append(list(y))
        self.f.append(list(f))

    def _midpoint(self, i):
        # one classic RK4 half-step from the left node, reusing the stored
        # derivative there; costs three rhs calls, done once per interval
        ym = self._mid.get(i)
        if ym is not None:
            return ym
        x0, y0, f0 = self.x[i], self.y[i], self.f[i]
        h = 0.5 * (self.x[i + 1] - x0)
        rhs = self._rhs
        n = self.dimension
        k1 = f0
        k2 = rhs(x0 + 0.5 * h, [y0[j] + 0.5 * h * k1[j] for j in range(n)])
        k3 = rhs(x0 + 0.5 * h, [y0[j] + 0.5 * h * k2[j] for j in range(n)])
        k4 = rhs(x0 + h, [y0[j] + h * k3[j] for j in range(n)])
        ym = [y0[j] + (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) for j in range(n)]
        self._mid[i] = ym
        return ym

    def _interval_for(self, x):
        xs = self.x
        if len(xs) < 2:
            raise ValueError("solution has no accepted steps to interpolate")
        forward = xs[-1] >= xs[0]
        lo, hi = (xs[0], xs[-1]) if forward else (xs[-1], xs[0])
        if not (lo - 1e-12 <= x <= hi + 1e-12):
            raise ValueError(f"x = {x} outside solution range [{lo}, {hi}]")
        if forward:
            i = bisect_right(xs, x) - 1
        else:
            # xs strictly decreasing: binary search for xs[i] >= x >= xs[i+1]
            a, b = 0, len(xs) - 1
            while b - a > 1:
                m = (a + b) // 2
                if xs[m] >= x:
                    a = m
                else:
                    b = m
            i = a
        return min(max(i, 0), len(xs) - 2)

    def __call__(self, x: float) -> list[float]:
        x = float(x)
        i = self._interval_for(x)
        if x == self.x[i]:
            return list(self.y[i])
        if x == self.x[i + 1]:
            return list(self.y[i + 1])
        x0, x1 = self.x[i], self.x[i + 1]
        h = x1 - x0
        th = (x - x0) / h
        y0, y1 = self.y[i], self.y[i + 1]
        f0, f1 = self.f[i], self.f[i + 1]
        ym = self._midpoint(i)
        out = []
        for j in range(self.dimension):
            dlt = y1[j] - y0[j] - h * f0[j]
            p = ym[j] - y0[j] - 0.5 * h * f0[j]
            q = h * (f1[j] - f0[j])
            a2 = 16.0 * p + q - 5.0 * dlt
            a3 = 14.0 * dlt - 32.0 * p - 3.0 * q
            a4 = 16.0 * p + 2.0 * q - 8.0 * dlt
            out.append(y0[j] + th * (h * f0[j] + th * (a2 + th * (a3 + th * a4))))
        return out

    def derivative(self, x: float) -> list[float]:
        """Interpolated first derivative (same quartic, differentiated)."""
        x = float(x)
        i = self._interval_for(x)
        x0, x1 = self.x[i], self.x[i + 1]
        h = x1 - x0
        th = (x - x0) / h
        y0, y1 = self.y[i], self.y[i + 1]
        f0, f1 = self.f[i], self.f[i + 1]
        ym = self._midpoint(i)
        out = []
        for j in range(self.dimension):
            dlt = y1[j] - y0[j] - h * f0[j]
            p = ym[j] - y0[j] - 0.5 * h * f0[j]
            q = h * (f1[j] - f0[j])
            a2 = 16.0 * p + q - 5.0 * dlt
            a3 = 14.0 * dlt - 32.0 * p - 3.0 * q
            a4 = 16.0 * p + 2.0 * q - 8.0 * dlt
            out.append((h * f0[j] + th * (2.0 * a2 + th * (3.0 * a3 + th * 4.0 * a4))) / h)
        return out


def _initial_step(rhs, x0, y0, f0, direction, rtol, atol, span):
    # standard two-trial-step heuristic
    n = len(y0)
    sc = [atol + rtol * abs(y0[j]) for j in range(n)]
    d0 = math.sqrt(sum((y0[j] / sc[j]) ** 2 for j in range(n)) / n)
    d1 = math.sqrt(sum((f0[j] / sc[j]) ** 2 for j in range(n)) / n)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = [y0[j] + direction * h0 * f0[j] for j in range(n)]
    f1 = rhs(x0 + direction * h0, y1)
    d2 = math.sqrt(sum(((f1[j] - f0[j]) / sc[j]) ** 2 for j in range(n)) / n) / h0
    dm = max(d1, d2)
    h1 = max(1e-6, h0 * 1e-3) if dm <= 1e-15 else (0.01 / dm) ** (1.0 / _ORDER)
    return direction * min(100.0 * h0, h1, span)


def integrate(
    problem: OdeProblem,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    events: Sequence[Callable[[float, Sequence[float]], float]] = (),
    max_step: Optional[float | Callable[[float], float]] = None,
    first_step: Optional[float] = None,
    divergence_bound: float = DEFAULT_DIVERGENCE_BOUND,
    max_steps: int = 10_000_000,
) -> Solution:
    """Integrate problem over its interval.

    events are scalar functions g(x, y); integration stops at the first
    sign change of any of them, with the crossing located on the dense
    interpolant to 1e-12 in x. max_step may be a number or a callable
    x -> bound (useful when stability limits vary across the interval).
    """

    rhs = problem.rhs
    n = problem.dimension
    x0, x1 = problem.interval
    direction = 1.0 if x1 > x0 else -1.0
    span = abs(x1 - x0)
    h_floor = _UNDERFLOW_FRACTION * span

    if callable(max_step):
        step_cap = max_step
    elif max_step is not None:
        cap_value = float(max_step)
        step_cap = lambda x: cap_value
    else:
        step_cap = lambda x: math.inf

    sol = Solution(rhs, n)
    x = x0
    y = list(problem.y0)
    f = list(rhs(x, y))
    if len(f) != n:
        raise ValueError(f"rhs returned length {len(f)}, expected {n}")
    sol._append(x, y, f)

    ev_prev = [float(g(x, y)) for g in events]

    if first_step is not None:
        h = direction * min(abs(first_step), span)
    else:
        h = _initial_step(rhs, x, y, f, direction, rtol, atol, span)
    err_prev = 1.0

    steps = 0
    while direction * (x1 - x) > 0.0:
        steps += 1
        if steps > max_steps:
            sol.status = "step_underflow"
            return sol
        cap = step_cap(x)
        if abs(h) > cap:
            h = direction * cap
        if abs(h) > direction * (x1 - x):
            h = x1 - x
        if abs(h) < h_floor:
            sol.status = "step_underflow"
            return sol

        # stages, unrolled (profiling: generator-based accumulation was
        # the single largest cost in every shooting workload)
        k0 = f
        k1 = rhs(x + _C1 * h, [yj + h * _A10 * a for yj, a in zip(y, k0)])
        k2 = rhs(
            x + _C2 * h,
            [yj + h * (_A20 * a + _A21 * b) for yj, a, b in zip(y, k0, k1)],
        )
        k3 = rhs(
            x + _C3 * h,
            [
                yj + h * (_A30 * a + _A31 * b + _A32 * c)
                for yj, a, b, c in zip(y, k0, k1, k2)
            ],
        )
        k4 = rhs(
            x + _C4 * h,
            [
                yj + h * (_A40 * a + _A41 * b + _A42 * c + _A43 * e)
                for yj, a, b, c, e in zip(y, k0, k1, k2, k3)
            ],
        )
        k5 = rhs(
            x + _C5 * h,
            [
                yj + h * (_A50 * a + _A51 * b + _A52 * c + _A53 * e + _A54 * g)
                for yj, a, b, c, e, g in zip(y, k0, k1, k2, k3, k4)
            ],
        )

        y_new = [
            yj + h * (_B50 * a + _B52 * c + _B53 * e + _B54 * g + _B55 * q)
            for yj, a, c, e, g, q in zip(y, k0, k2, k3, k4, k5)
        ]
        # mixed error norm against the larger of old/new magnitudes
        acc = 0.0
        for yj, ynj, a, c, e, g, q in zip(y, y_new, k0, k2, k3, k4, k5):
            ee = h * (_E0 * a + _E2 * c + _E3 * e + _E4 * g + _E5 * q)
            ay, ayn = abs(yj), abs(ynj)
            sc = atol + rtol * (ay if ay > ayn else ayn)
            acc += (ee / sc) ** 2
        err = math.sqrt(acc / n)

        if err > 1.0:
            h *= max(_FAC_MIN, _SAFETY * err ** (-1.0 / _ORDER))
            continue

        x_new = x + h
        f_new = list(rhs(x_new, y_new))
        sol._append(x_new, y_new, f_new)

        if any(abs(v) > divergence_bound for v in y_new):
            sol.status = "divergence"
            return sol

        if events:
            fired = None
            ev_new = [float(g(x_new, y_new)) for g in events]
            for idx in range(len(events)):
                a, b = ev_prev[idx], ev_new[idx]
                if b == 0.0 or (a < 0.0 < b) or (b < 0.0 < a):
                    fired = idx
                    break
            if fired is not None:
                _locate_event(sol, events[fired], x, x_new, ev_prev[fired], fired)
                return sol
            ev_prev = ev_new

        # PI controller
        e_clip = max(err, 1e-10)
        fac = _SAFETY * e_clip ** (-_ALPHA) * err_prev ** _BETA
        h *= min(_FAC_MAX, max(_FAC_MIN, fac))
        err_prev = e_clip
        x, y, f = x_new, y_new, f_new

    sol.status = "end"
    return sol


def _locate_event(sol, g, xa, xb, ga, index):
    """Bisect g(x, dense(x)) on [xa, xb]; truncate sol at the crossing."""
    gb = g(xb, sol(xb))
    if gb == 0.0:
        xe = xb
    else:
        lo, hi = xa, xb
        glo = ga
        while abs(hi - lo) > _EVENT_XTOL:
            mid = 0.5 * (lo + hi)
            gm = g(mid, sol(mid))
            if gm == 0.0:
                lo = hi = mid
                break
            if (glo < 0.0) == (gm < 0.0):
                lo, glo = mid, gm
            else:
                hi = mid
        xe = 0.5 * (lo + hi)
    ye = sol(xe)
    fe = sol._rhs(xe, ye)
    # replace the last accepted node with the event point
    sol.x[-1] = xe
    sol.y[-1] = list(ye)
    sol.f[-1] = list(fe)
    sol._mid.pop(len(sol.x) - 2, None)
    sol.status = "event"
    sol.event_index = index
    sol.event_x = xe
