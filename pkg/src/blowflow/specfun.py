"""Special-function kernel: complex log-Gamma, Gamma-ratio phases, Kummer M.

Self-contained double-precision implementations of the three special
functions the rest of the package needs. No external dependencies; the
test suite cross-checks everything against an arbitrary-precision oracle.
"""

from __future__ import annotations

import cmath
import math

from .errors import DomainError

__all__ = ["log_gamma", "gamma_phase", "kummer_m", "gamma_real", "omega_freq"]

# Lanczos approximation, g = 7, 9 coefficients. Gives ~15 significant
# digits for Re z >= 0.5; reflection handles the left half-plane.
_LANCZOS_G = 7.0
_LANCZOS_C = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)

_LN_2PI_HALF = 0.5 * math.log(2.0 * math.pi)
_LN_PI = math.log(math.pi)


def _is_nonpositive_integer(z: complex, tol: float = 0.0) -> bool:
    return z.imag == 0.0 and z.real <= 0.0 and z.real == math.floor(z.real)


def _log_gamma_lanczos(z: complex) -> complex:
    # valid for Re z >= 0.5
    zm1 = z - 1.0
    x = _LANCZOS_C[0]
    for k in range(1, 9):
        x += _LANCZOS_C[k] / (zm1 + k)
    t = zm1 + _LANCZOS_G + 0.5
    return _LN_2PI_HALF + (zm1 + 0.5) * cmath.log(t) - t + cmath.log(x)


def _log_sin_pi(z: complex) -> complex:
    """log(sin(pi z)) continued so the reflection formula stays on the
    principal branch of log-Gamma.

    For Im z > 0: sin(pi z) = exp(-i pi z) * (i/2) * (1 - exp(2 pi i z)),
    and |exp(2 pi i z)| < 1 keeps the principal log of the last factor
    analytic. The linear term carries the winding. Conjugate symmetry
    handles Im z < 0; the real axis reduces to the usual real formula.
    """
    if z.imag > 0.0:
        return (
            -1j * math.pi * z
            + 1j * (math.pi / 2.0)
            - math.log(2.0)
            + cmath.log(1.0 - cmath.exp(2j * math.pi * z))
        )
    if z.imag < 0.0:
        return _log_sin_pi(z.conjugate()).conjugate()
    # real argument: sin(pi x) real; log real if positive, else pick the
    # Im = -pi branch to match the limit from below... not needed by the
    # reflection path (callers keep Re z < 0.5 strictly off integers).
    s = math.sin(math.pi * z.real)
    return cmath.log(complex(s, 0.0))


def log_gamma(z) -> complex:
    """Principal branch of log Gamma(z).

    Analytic on the plane cut along the negative real axis. Relative
    accuracy ~1e-13 for |z| <= 100 (tested against a 50-digit oracle).

    Raises DomainError on the poles z = 0, -1, -2, ...
    """
    z = complex(z)
    if _is_nonpositive_integer(z):
        raise DomainError(f"log_gamma pole at z = {z}")
    if z.real >= 0.5:
        return _log_gamma_lanczos(z)
    # reflection: log Gamma(z) = log pi - log sin(pi z) - log Gamma(1 - z)
    return _LN_PI - _log_sin_pi(z) - _log_gamma_lanczos(1.0 - z)


def gamma_real(x: float) -> float:
    """Gamma(x) for real x off the poles. Exact-ish wrapper over log_gamma."""
    lg = log_gamma(complex(x))
    val = cmath.exp(lg)
    return val.real


def omega_freq(d: int) -> float:
    """Oscillation frequency omega = sqrt(8d - d^2 - 8)/2.

    Real and positive exactly for integer d in {3, 4, 5, 6}; other d raise
    DomainError. Kept here because gamma_phase needs it; re-exported by the
    asymptotics module, which owns the public contract.
    """
    if not isinstance(d, int) or isinstance(d, bool):
        raise DomainError(f"dimension must be an integer, got {d!r}")
    disc = 8 * d - d * d - 8
    if d < 3 or d > 6 or disc <= 0:
        raise DomainError(f"no oscillatory regime in dimension d = {d}")
    return math.sqrt(disc) / 2.0


def gamma_phase(lam: float, d: int) -> float:
    """Continuous phase Phi(lam) = arg(Gamma(i w) / Gamma(1/2 - d/4 + i w/2 - lam)).

    The argument of the denominator Gamma moves along the horizontal line
    Im = w/2 > 0 as lam varies, never touching log-Gamma's branch cut, so
    Im log Gamma is real-analytic in lam and the phase below is globally
    continuous with no unwrapping step. At lam = -1 the value is principal.
    """
    w = omega_freq(d)
    num = log_gamma(complex(0.0, w))
    den = log_gamma(complex(0.5 - d / 4.0 - lam, w / 2.0))
    return num.imag - den.imag


def _kummer_series(a: float, b: float, x: float) -> float:
    # terminating automatically when a is a nonpositive integer
    term = 1.0
    total = 1.0
    k = 0
    while True:
        term *= (a + k) * x / ((b + k) * (k + 1.0))
        total += term
        k += 1
        if abs(term) <= 1e-17 * abs(total) or term == 0.0:
            return total
        if k > 10_000:  # series converges for all x; this is a safety net
            return total


def _asym_sum(p: float, q: float, x: float) -> tuple[float, float]:
    # optimally truncated sum_k (p)_k (q)_k / (k! x^k); stop when terms grow.
    # Returns (sum, floor) where floor is the smallest retained term size,
    # an honest estimate of the divergent expansion's attainable accuracy.
    term = 1.0
    total = 1.0
    prev = abs(term)
    for k in range(0, 60):
        term *= (p + k) * (q + k) / ((k + 1.0) * x)
        if abs(term) >= prev:
            break
        total += term
        prev = abs(term)
        if abs(term) <= 1e-16 * abs(total):
            break
    return total, prev


def _kummer_asymptotic(a: float, b: float, x: float) -> tuple[float, float]:
    """Large-x expansion. Returns (value, relative accuracy floor)."""
    # dominant component: Gamma(b)/Gamma(a) e^x x^(a-b) sum (b-a)_k (1-a)_k / (k! x^k)
    lgb = log_gamma(complex(b))
    lga = log_gamma(complex(a))
    # imaginary parts are integer multiples of pi for real arguments and
    # carry the sign of the Gamma ratio; dropping them flips negative-a cases
    sign = 1.0 if math.cos(lgb.imag - lga.imag) > 0.0 else -1.0
    pref = sign * math.exp(lgb.real - lga.real + x + (a - b) * math.log(x))
    s1, floor = _asym_sum(b - a, 1.0 - a, x)
    total = pref * s1
    # recessive component cos(pi a) Gamma(b)/Gamma(b-a) x^(-a) sum (a)_k (a-b+1)_k / (k! (-x)^k):
    # only ~e^-x relative, but near the branch switch that can exceed 1e-10
    if not _is_nonpositive_integer(complex(b - a)):
        cpa = math.cos(math.pi * a)
        if cpa != 0.0:
            pref2 = cpa * gamma_real(b) / gamma_real(b - a) * math.pow(x, -a)
            s2, floor2 = _asym_sum(a, a - b + 1.0, -x)
            total += pref2 * s2
            if total != 0.0:
                floor = max(floor, floor2 * abs(pref2 * s2 / total))
    return total, floor


_KUMMER_SWITCH = 30.0  # series below, asymptotic above; overlap is tested


def kummer_m(a: float, b: float, x: float) -> float:
    """Kummer confluent hypergeometric function M(a, b, x) for real inputs.

    Power series for x < 30, asymptotic expansion for x >= 30. Relative
    error <= 1e-10 on 0 <= x <= 50 for moderate parameters. b must not be
    a nonpositive integer; x must be nonnegative.
    """
    if _is_nonpositive_integer(complex(b)):
        raise DomainError(f"kummer_m undefined for nonpositive integer b = {b}")
    if x < 0.0:
        raise DomainError(f"kummer_m requires x >= 0, got x = {x}")
    if x == 0.0:
        return 1.0
    a_terminates = _is_nonpositive_integer(complex(a))
    if x < _KUMMER_SWITCH or a_terminates:
        # a nonpositive integer makes M a polynomial; the asymptotic form
        # has a Gamma(a) pole there, so the (finite) series is exact
        return _kummer_series(a, b, x)
    val, floor = _kummer_asymptotic(a, b, x)
    if floor > 1e-12 and x < 400.0:
        # wide parameters: the divergent expansion bottoms out above target
        # accuracy this close to the switch, but the series (all terms of
        # one sign eventually, no cancellation for x > 0) still converges
        return _kummer_series(a, b, x)
    return val
