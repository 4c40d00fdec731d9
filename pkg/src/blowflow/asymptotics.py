"""Matched-asymptotics constants and the large-index scaling laws.

For large family index the shrinker parameters obey

    a_n ~ C exp(n pi / omega),    b_n ~ (-1)^n D exp(-n (d-2) pi / (2 omega)),

with omega = sqrt(8d - d^2 - 8)/2. C and D are built from two envelope
pairs: (alpha, delta) of the flat limiting profile (the unit-slope
solution of the sigma = 0 equation, oscillating about the equator) and
(alpha_1, delta_1) of the linearized far-field equation normalized to 1
at infinity. Matching the two expansions gives

    C = exp[(delta_1 - delta) / omega],    D = (alpha/alpha_1) C^{-(d-2)/2}.

Each phase is only defined modulo pi (with a correlated sign flip of
its amplitude), so C carries a lattice ambiguity of factors
exp(pi/omega); `verify_scaling_laws` resolves it against the regression
intercept, which is legitimate because the lattice gap is a factor
10.7 (d = 3) while the agreement contract is 10%.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import FitError, PreconditionError
from .odeint import OdeProblem, integrate
from .profiles import SelfSimilarProfile, series_start
from .specfun import omega_freq

__all__ = [
    "AsymptoticConstants",
    "ScalingLawReport",
    "omega",
    "flat_profile_constants",
    "linearized_constants",
    "asymptotic_constants",
    "verify_scaling_laws",
]

FLAT_WINDOW = (300.0, 1.0e4)    # fit window in xi for (alpha, delta)
H_ANCHOR = 30.0                 # far-field anchor for the linearized pair
H_WINDOW = (1.0e-4, 1.0e-2)     # fit window in y for (alpha_1, delta_1)
RESIDUAL_CAP = 0.01


def omega(d: int) -> float:
    """Oscillation frequency sqrt(8d - d^2 - 8)/2 of the equator spiral.

    Real and positive exactly for d in {3, 4, 5, 6}: the discriminant
    is positive iff d < 4 + 2 sqrt 2, which is why self-similar blowup
    of this kind stops at d = 6. Other d raise DomainError.
    """
    return omega_freq(d)


def _fit_envelope(ln_x: np.ndarray, g: np.ndarray, w: float, label: str):
    """Least squares g = P sin(w ln x) + Q cos(w ln x).

    Returns (amplitude > 0, phase in [0, 2 pi), sup residual / amplitude);
    raises FitError when the residual exceeds RESIDUAL_CAP, which means
    the window was not inside the asymptotic regime.
    """
    design = np.column_stack([np.sin(w * ln_x), np.cos(w * ln_x)])
    coef, *_ = np.linalg.lstsq(design, g, rcond=None)
    amp = float(math.hypot(coef[0], coef[1]))
    if amp == 0.0:
        raise FitError(f"{label}: zero envelope", residual=1.0,
                       threshold=RESIDUAL_CAP)
    resid = float(np.max(np.abs(g - design @ coef))) / amp
    if resid > RESIDUAL_CAP:
        raise FitError(
            f"{label}: envelope residual {resid:.2e} exceeds {RESIDUAL_CAP}",
            residual=resid, threshold=RESIDUAL_CAP,
        )
    phase = math.atan2(coef[1], coef[0]) % (2.0 * math.pi)
    return amp, phase, resid


def _dense_first_component(sol, ts):
    return np.array([sol(t)[0] for t in ts])


def flat_profile_constants(d: int, fit_window=FLAT_WINDOW) -> tuple[float, float]:
    """(alpha, delta) of the flat limiting profile.

    Integrates the sigma = 0 profile equation with unit origin slope in
    the log variable out to the window's far edge and fits
    xi^{(d-2)/2} (phi - pi/2) against sin/cos(omega ln xi).
    """
    w = omega(d)
    lo, hi = fit_window
    if not 1.0 <= lo < hi:
        raise PreconditionError(f"bad fit window {fit_window}")
    xi0 = 1e-3
    f0, fp0 = series_start(d, 1.0, 0.0, xi0)
    dm2, dm1 = d - 2.0, d - 1.0

    def rhs(x, s):
        return [s[1], -dm2 * s[1] + dm1 * math.sin(2.0 * s[0]) / 2.0]

    sol = integrate(
        OdeProblem(2, rhs, [f0, xi0 * fp0], (math.log(xi0), math.log(hi))),
        rtol=1e-12, atol=1e-14,
    )
    if sol.status != "end":
        raise ArithmeticError(f"flat profile integration: {sol.status}")
    ts = np.linspace(math.log(lo), math.log(hi), 2000)
    phi = _dense_first_component(sol, ts)
    g = np.exp(0.5 * dm2 * ts) * (phi - 0.5 * math.pi)
    amp, phase, _ = _fit_envelope(ts, g, w, "flat profile")
    return amp, phase


def linearized_constants(d: int, anchor: float = H_ANCHOR,
                         fit_window=H_WINDOW) -> tuple[float, float]:
    """(alpha_1, delta_1) of the linearized far-field equation.

    The equation h'' + ((d-1)/y - y/2) h' + (d-1)/y^2 h = 0 has one
    solution tending to 1 at infinity; it is launched at the anchor
    from the series h = 1 - (d-1)/y^2 (1 + (d-7)/(2 y^2)) and carried
    inward (the contaminating direction grows like exp(y^2/4), so it
    dies off on the way in). The small-y envelope fit mirrors the flat
    one.
    """
    w = omega(d)
    lo, hi = fit_window
    if not 0.0 < lo < hi <= 1.0:
        raise PreconditionError(f"bad fit window {fit_window}")
    if anchor < 10.0:
        raise PreconditionError(f"anchor {anchor} too small for the tail series")
    dm1 = d - 1.0
    b2 = -dm1
    b4 = -dm1 * (d - 7.0) / 2.0
    h0 = 1.0 + b2 / anchor**2 + b4 / anchor**4
    # h_t at the anchor, t = ln y
    ht0 = -2.0 * b2 / anchor**2 - 4.0 * b4 / anchor**4

    def rhs(t, s):
        y2 = math.exp(2.0 * t)
        return [s[1], -(d - 2.0 - 0.5 * y2) * s[1] - dm1 * s[0]]

    sol = integrate(
        OdeProblem(2, rhs, [h0, ht0], (math.log(anchor), math.log(lo))),
        # h ~ y^{-(d-2)/2} reaches ~3e8 by y = 1e-4 in d = 6: that is
        # growth of the solution, not divergence of the integration
        rtol=1e-12, atol=1e-14, divergence_bound=1e12,
    )
    if sol.status != "end":
        raise ArithmeticError(f"linearized tail integration: {sol.status}")
    ts = np.linspace(math.log(lo), math.log(hi), 2000)
    h = _dense_first_component(sol, ts)
    g = np.exp(0.5 * (d - 2.0) * ts) * h
    amp, phase, _ = _fit_envelope(ts, g, w, "linearized tail")
    return amp, phase


@dataclass(frozen=True)
class AsymptoticConstants:
    """The constants feeding the scaling laws for one dimension.

    c_tilde, delta_tilde are the expander map's large-slope envelope
    pair when a fitted BAMap is supplied; they ride along here because
    the continuation planner consumes both sets together.
    """

    d: int
    omega: float
    alpha: float
    delta: float
    alpha1: float
    delta1: float
    c_tilde: Optional[float] = None
    delta_tilde: Optional[float] = None


def asymptotic_constants(d: int, ba_map=None) -> AsymptoticConstants:
    """Compute the full constant set for dimension d.

    ba_map, when given, must be a scanned expander map; its large-slope
    fit is attached (computed on demand if the map has none yet).
    """
    w = omega(d)
    alpha, delta = flat_profile_constants(d)
    alpha1, delta1 = linearized_constants(d)
    c_tilde = delta_tilde = None
    if ba_map is not None:
        if ba_map.fit is None:
            from .expander import fit_large_a

            fit_large_a(ba_map)
        c_tilde, delta_tilde = ba_map.fit
    return AsymptoticConstants(d=d, omega=w, alpha=alpha, delta=delta,
                               alpha1=alpha1, delta1=delta1,
                               c_tilde=c_tilde, delta_tilde=delta_tilde)


@dataclass(frozen=True)
class ScalingLawReport:
    """Regression of a shrinker family against the asymptotic laws."""

    d: int
    n_used: list
    slope_a: float
    intercept_a: float
    slope_b: float
    intercept_b: float
    expected_slope_a: float
    expected_slope_b: float
    fitted_c: float
    fitted_d: float
    predicted_c: float
    predicted_d: float
    branch: int
    residual_a: float
    residual_b: float

    def as_dict(self) -> dict:
        out = dict(self.__dict__)
        out["n_used"] = list(self.n_used)
        return out


def verify_scaling_laws(shrinkers: list[SelfSimilarProfile],
                        constants: AsymptoticConstants) -> ScalingLawReport:
    """Regress ln a_n and ln |b_n| on n and compare against predictions.

    Only members with index >= 3 enter the regression (the laws are
    asymptotic; the first two members are visibly off them). The pi
    lattice of the predicted C is resolved to the branch nearest the
    fitted intercept, and the predicted D inherits that branch's sign.
    """
    if len(shrinkers) < 4:
        raise PreconditionError(
            f"need at least 4 family members, got {len(shrinkers)}"
        )
    for p in shrinkers:
        if p.kind != "shrinker" or p.index is None:
            raise PreconditionError("scaling laws apply to indexed shrinkers")
        if p.d != constants.d:
            raise PreconditionError(
                f"profile dimension {p.d} != constants dimension {constants.d}"
            )
        if p.far_field == 0.0:
            raise PreconditionError(f"member {p.index} has zero far field")

    used = sorted((p for p in shrinkers if p.index >= 3),
                  key=lambda p: p.index)
    if len(used) < 2:
        raise PreconditionError("need at least two members with index >= 3")
    ns = np.array([p.index for p in used], dtype=float)
    ln_a = np.log([p.slope for p in used])
    ln_b = np.log([abs(p.far_field) for p in used])
    slope_a, intercept_a = np.polyfit(ns, ln_a, 1)
    slope_b, intercept_b = np.polyfit(ns, ln_b, 1)
    residual_a = float(np.max(np.abs(ln_a - (slope_a * ns + intercept_a))))
    residual_b = float(np.max(np.abs(ln_b - (slope_b * ns + intercept_b))))

    # data sign convention: sign(b_n) alternates; D carries the parity
    signs = [math.copysign(1.0, p.far_field) * (-1.0) ** p.index for p in used]
    sign_d = 1.0 if sum(signs) >= 0.0 else -1.0

    w = constants.omega
    base = (constants.delta1 - constants.delta) / w
    k = min(range(-3, 4),
            key=lambda j: abs(base + j * math.pi / w - intercept_a))
    predicted_c = math.exp(base + k * math.pi / w)
    predicted_d = ((-1.0) ** k * (constants.alpha / constants.alpha1)
                   * predicted_c ** (-(constants.d - 2.0) / 2.0))

    return ScalingLawReport(
        d=constants.d,
        n_used=[int(n) for n in ns],
        slope_a=float(slope_a),
        intercept_a=float(intercept_a),
        slope_b=float(slope_b),
        intercept_b=float(intercept_b),
        expected_slope_a=math.pi / w,
        expected_slope_b=-(constants.d - 2.0) * math.pi / (2.0 * w),
        fitted_c=math.exp(float(intercept_a)),
        fitted_d=sign_d * math.exp(float(intercept_b)),
        predicted_c=predicted_c,
        predicted_d=predicted_d,
        branch=k,
        residual_a=residual_a,
        residual_b=residual_b,
    )
