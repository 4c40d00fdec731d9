"""Shared machinery for radially equivariant self-similar profiles.

Both profile families solve

    f'' + ((d-1)/y + sigma*y/2) f' - (d-1) sin(2f) / (2 y^2) = 0

with sigma = -1 for the backward (shrinking) similarity variable and
sigma = +1 for the forward (expanding) one. This module owns the local
expansions at the origin and at infinity, the change of variables used
for shooting, the far-field amplitude extractor, and the dense quintic
interpolant the solver modules assemble their results on.

All expansion coefficients below were derived symbolically and are
cross-checked by series/tail residual tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import PreconditionError

SHRINK = -1.0
EXPAND = 1.0

HALF_PI = math.pi / 2.0


# ---------------------------------------------------------------------------
# right-hand sides


def profile_rhs(d: int, sigma: float):
    """System (f, f') in the physical similarity variable y."""
    dm1 = d - 1.0

    def rhs(y, s):
        f, fp = s
        return [fp, -(dm1 / y + sigma * y / 2.0) * fp + dm1 * math.sin(2.0 * f) / (2.0 * y * y)]

    return rhs


def profile_second_derivative(d: int, sigma: float, y: float, f: float, fp: float) -> float:
    dm1 = d - 1.0
    return -(dm1 / y + sigma * y / 2.0) * fp + dm1 * math.sin(2.0 * f) / (2.0 * y * y)


def log_rescaled_rhs(d: int, a: float, sigma: float):
    """System (phi, phi_x) in x = ln(a y).

    Rescaling by the origin slope and taking logs turns the n-fold
    spiral near the origin into n evenly spaced oscillations, so one
    step size resolves every member of the family equally well.
    """
    dm2 = d - 2.0
    dm1 = d - 1.0
    inv2a2 = 1.0 / (2.0 * a * a)

    def rhs(x, s):
        phi, phix = s
        damp = sigma * math.exp(2.0 * x) * inv2a2
        return [phix, -(dm2 + damp) * phix + dm1 * math.sin(2.0 * phi) / 2.0]

    return rhs


def deviation_rhs(d: int, sigma: float):
    """System (g, g') for g = f - pi/2; keeps tiny far-field amplitudes
    representable without cancellation against pi/2."""
    dm1 = d - 1.0

    def rhs(y, s):
        g, gp = s
        return [gp, -(dm1 / y + sigma * y / 2.0) * gp - dm1 * math.sin(2.0 * g) / (2.0 * y * y)]

    return rhs


# ---------------------------------------------------------------------------
# origin series


def origin_series_coeffs(d: int, a: float, sigma: float) -> tuple[float, float, float]:
    """Coefficients (c3, c5, c7) of f = a y + c3 y^3 + c5 y^5 + c7 y^7."""
    s = sigma
    a2 = a * a
    a4 = a2 * a2
    a6 = a4 * a2
    c3 = -a * (4.0 * a2 * (d - 1.0) + 3.0 * s) / (12.0 * (d + 2.0))
    c5 = a * (
        16.0 * a4 * (2.0 * d * d - 3.0 * d + 1.0)
        + 40.0 * a2 * s * (d - 1.0)
        + 15.0
    ) / (160.0 * (d + 2.0) * (d + 4.0))
    c7 = -a * (
        a6 * (384.0 * d**4 + 448.0 * d**3 - 1664.0 * d**2 + 704.0 * d + 128.0)
        + a4 * s * (672.0 * d**3 + 784.0 * d**2 - 2128.0 * d + 672.0)
        + a2 * (420.0 * d**2 + 532.0 * d - 952.0)
        + s * (105.0 * d + 210.0)
    ) / (2688.0 * (d + 2.0) ** 2 * (d + 4.0) * (d + 6.0))
    return c3, c5, c7


def origin_series_eval(d: int, a: float, sigma: float, y: float) -> tuple[float, float]:
    """(f, f') from the origin expansion; caller keeps y inside its radius."""
    c3, c5, c7 = origin_series_coeffs(d, a, sigma)
    y2 = y * y
    f = y * (a + y2 * (c3 + y2 * (c5 + y2 * c7)))
    fp = a + y2 * (3.0 * c3 + y2 * (5.0 * c5 + y2 * 7.0 * c7))
    return f, fp


def series_start(d: int, a: float, sigma: float, y0: float) -> tuple[float, float]:
    """Validated series launch point for shooting.

    y0 must satisfy 0 < y0 <= 1e-3 * min(1, 1/a) so the neglected y^9
    term sits below 1e-14 relative.
    """
    if a <= 0.0:
        raise PreconditionError(f"origin slope must be positive, got {a}")
    if not 0.0 < y0 <= 1e-3 * min(1.0, 1.0 / a):
        raise PreconditionError(
            f"series start y0 = {y0} outside (0, {1e-3 * min(1.0, 1.0 / a):.3e}] for slope {a}"
        )
    return origin_series_eval(d, a, sigma, y0)


# ---------------------------------------------------------------------------
# far-field tail


def far_field_coeffs(d: int, b: float, sigma: float) -> tuple[float, float, float]:
    """Coefficients of f = pi/2 + b + c2/y^2 + c4/y^4 + c6/y^6."""
    dm1 = d - 1.0
    s2b = math.sin(2.0 * b)
    c2b = math.cos(2.0 * b)
    c2 = sigma * dm1 * s2b / 2.0
    c4 = sigma * c2 * (6.0 - 2.0 * dm1 + dm1 * c2b) / 2.0
    c6 = sigma * ((20.0 - 4.0 * dm1 + dm1 * c2b) * c4 - dm1 * s2b * c2 * c2) / 3.0
    return c2, c4, c6


def far_field_eval(d: int, b: float, sigma: float, y: float) -> tuple[float, float]:
    """(g, g') of the deviation g = f - pi/2 from the far-field expansion."""
    c2, c4, c6 = far_field_coeffs(d, b, sigma)
    iy2 = 1.0 / (y * y)
    g = b + iy2 * (c2 + iy2 * (c4 + iy2 * c6))
    gp = -iy2 / y * (2.0 * c2 + iy2 * (4.0 * c4 + iy2 * 6.0 * c6))
    return g, gp


def extract_far_field(
    d: int,
    sigma: float,
    samples: list[tuple[float, float]],
    tol: float = 1e-14,
    max_iter: int = 80,
) -> float:
    """Far-field amplitude from samples (y, g) of the deviation g = f - pi/2.

    Fixed-point iteration: subtract the b-dependent algebraic tail from
    each sample, average what is left. A final least-squares touch with a
    1/y^8 basis term absorbs the first neglected order, which matters
    when the amplitude is many orders below the tail at the window edge.
    """
    if len(samples) < 2:
        raise PreconditionError("need at least two far-field samples")
    ys = np.array([y for y, _ in samples])
    gs = np.array([g for _, g in samples])
    b = float(np.mean(gs))
    for _ in range(max_iter):
        c2, c4, c6 = far_field_coeffs(d, b, sigma)
        iy2 = 1.0 / (ys * ys)
        resid = gs - iy2 * (c2 + iy2 * (c4 + iy2 * c6))
        b_new = float(np.mean(resid))
        if abs(b_new - b) <= tol * max(1.0, abs(b)):
            b = b_new
            break
        b = b_new
    # refit the constant with a y^-8 basis term so the first neglected
    # tail order cannot bias it; resid is b plus that remainder
    c2, c4, c6 = far_field_coeffs(d, b, sigma)
    iy2 = 1.0 / (ys * ys)
    resid = gs - iy2 * (c2 + iy2 * (c4 + iy2 * c6))
    basis = np.column_stack([np.ones_like(ys), iy2**4])
    coef, *_ = np.linalg.lstsq(basis, resid, rcond=None)
    return float(coef[0])


# ---------------------------------------------------------------------------
# dense interpolant


class QuinticHermite:
    """Piecewise-quintic interpolant from (value, slope, curvature) nodes.

    Vectorized over numpy arrays; exact at the nodes by construction.
    """

    def __init__(self, x: np.ndarray, f: np.ndarray, fp: np.ndarray, fpp: np.ndarray):
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or len(x) < 2:
            raise ValueError("need at least two nodes")
        if not np.all(np.diff(x) > 0.0):
            raise ValueError("nodes must be strictly increasing")
        self.x = x
        self.f = np.asarray(f, dtype=float)
        self.fp = np.asarray(fp, dtype=float)
        self.fpp = np.asarray(fpp, dtype=float)

    def _locate(self, xq):
        i = np.searchsorted(self.x, xq, side="right") - 1
        return np.clip(i, 0, len(self.x) - 2)

    def _theta(self, xq, i):
        h = self.x[i + 1] - self.x[i]
        return (xq - self.x[i]) / h, h

    def __call__(self, xq):
        xq = np.asarray(xq, dtype=float)
        scalar = xq.ndim == 0
        xq = np.atleast_1d(xq)
        i = self._locate(xq)
        th, h = self._theta(xq, i)
        p0, p1 = self.f[i], self.f[i + 1]
        m0, m1 = self.fp[i] * h, self.fp[i + 1] * h
        s0, s1 = self.fpp[i] * h * h, self.fpp[i + 1] * h * h
        t2 = th * th
        t3 = t2 * th
        t4 = t3 * th
        t5 = t4 * th
        out = (
            p0 * (1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5)
            + m0 * (th - 6.0 * t3 + 8.0 * t4 - 3.0 * t5)
            + s0 * (0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5)
            + p1 * (10.0 * t3 - 15.0 * t4 + 6.0 * t5)
            + m1 * (-4.0 * t3 + 7.0 * t4 - 3.0 * t5)
            + s1 * (0.5 * t3 - t4 + 0.5 * t5)
        )
        return float(out[0]) if scalar else out

    def derivative(self, xq):
        xq = np.asarray(xq, dtype=float)
        scalar = xq.ndim == 0
        xq = np.atleast_1d(xq)
        i = self._locate(xq)
        th, h = self._theta(xq, i)
        p0, p1 = self.f[i], self.f[i + 1]
        m0, m1 = self.fp[i] * h, self.fp[i + 1] * h
        s0, s1 = self.fpp[i] * h * h, self.fpp[i + 1] * h * h
        t2 = th * th
        t3 = t2 * th
        t4 = t3 * th
        dout = (
            p0 * (-30.0 * t2 + 60.0 * t3 - 30.0 * t4)
            + m0 * (1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4)
            + s0 * (th - 4.5 * t2 + 6.0 * t3 - 2.5 * t4)
            + p1 * (30.0 * t2 - 60.0 * t3 + 30.0 * t4)
            + m1 * (-12.0 * t2 + 28.0 * t3 - 15.0 * t4)
            + s1 * (1.5 * t2 - 4.0 * t3 + 2.5 * t4)
        ) / h
        return float(dout[0]) if scalar else dout

    def second_derivative(self, xq):
        xq = np.asarray(xq, dtype=float)
        scalar = xq.ndim == 0
        xq = np.atleast_1d(xq)
        i = self._locate(xq)
        th, h = self._theta(xq, i)
        p0, p1 = self.f[i], self.f[i + 1]
        m0, m1 = self.fp[i] * h, self.fp[i + 1] * h
        s0, s1 = self.fpp[i] * h * h, self.fpp[i + 1] * h * h
        t2 = th * th
        t3 = t2 * th
        ddout = (
            p0 * (-60.0 * th + 180.0 * t2 - 120.0 * t3)
            + m0 * (-36.0 * th + 96.0 * t2 - 60.0 * t3)
            + s0 * (1.0 - 9.0 * th + 18.0 * t2 - 10.0 * t3)
            + p1 * (60.0 * th - 180.0 * t2 + 120.0 * t3)
            + m1 * (-24.0 * th + 84.0 * t2 - 60.0 * t3)
            + s1 * (3.0 * th - 12.0 * t2 + 10.0 * t3)
        ) / (h * h)
        return float(ddout[0]) if scalar else ddout


# ---------------------------------------------------------------------------
# assembled profile


@dataclass
class SelfSimilarProfile:
    """A solved equivariant self-similar profile on [0, y_max].

    kind is "shrinker" or "expander". slope is the origin derivative
    (the shooting parameter), far_field the constant the deviation from
    the equator approaches at infinity, crossings the number of interior
    equator crossings. index is the family label for shrinkers, None
    for expanders. Evaluation below series_cut uses the origin series
    (keeping the equation residual finite against the 1/y^2 weight),
    the quintic interpolant elsewhere.
    """

    kind: str
    d: int
    slope: float
    far_field: float
    y_max: float
    crossings: int
    interpolant: QuinticHermite
    series_cut: float
    index: Optional[int] = None
    energy: Optional[float] = None

    @property
    def sigma(self) -> float:
        return SHRINK if self.kind == "shrinker" else EXPAND

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        scalar = y.ndim == 0
        y = np.atleast_1d(y)
        out = np.empty_like(y)
        low = y < self.series_cut
        if np.any(low):
            c3, c5, c7 = origin_series_coeffs(self.d, self.slope, self.sigma)
            y2 = y[low] * y[low]
            out[low] = y[low] * (self.slope + y2 * (c3 + y2 * (c5 + y2 * c7)))
        if np.any(~low):
            out[~low] = self.interpolant(y[~low])
        return float(out[0]) if scalar else out

    def derivative(self, y):
        y = np.asarray(y, dtype=float)
        scalar = y.ndim == 0
        y = np.atleast_1d(y)
        out = np.empty_like(y)
        low = y < self.series_cut
        if np.any(low):
            c3, c5, c7 = origin_series_coeffs(self.d, self.slope, self.sigma)
            y2 = y[low] * y[low]
            out[low] = self.slope + y2 * (3.0 * c3 + y2 * (5.0 * c5 + y2 * 7.0 * c7))
        if np.any(~low):
            out[~low] = self.interpolant.derivative(y[~low])
        return float(out[0]) if scalar else out

    def second_derivative(self, y):
        y = np.asarray(y, dtype=float)
        scalar = y.ndim == 0
        y = np.atleast_1d(y)
        out = np.empty_like(y)
        low = y < self.series_cut
        if np.any(low):
            c3, c5, c7 = origin_series_coeffs(self.d, self.slope, self.sigma)
            y2 = y[low] * y[low]
            out[low] = y[low] * (6.0 * c3 + y2 * (20.0 * c5 + y2 * 42.0 * c7))
        if np.any(~low):
            out[~low] = self.interpolant.second_derivative(y[~low])
        return float(out[0]) if scalar else out

    def equation_residual(self, y):
        """Residual of the profile equation, normalized by the local
        magnitude of its terms (the raw residual is meaningless near the
        origin where individual terms grow like the inverse square)."""
        y = np.asarray(y, dtype=float)
        scalar = y.ndim == 0
        y = np.atleast_1d(y)
        f = self(y)
        fp = self.derivative(y)
        fpp = self.second_derivative(y)
        dm1 = self.d - 1.0
        t1 = (dm1 / y + self.sigma * y / 2.0) * fp
        t2 = dm1 * np.sin(2.0 * f) / (2.0 * y * y)
        resid = fpp + t1 - t2
        scale = 1.0 + np.abs(fpp) + np.abs(t1) + np.abs(t2)
        out = resid / scale
        return float(out[0]) if scalar else out
