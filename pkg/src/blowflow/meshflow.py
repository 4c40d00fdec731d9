"""Moving-mesh simulator that integrates the flow through blowup.

The solver advances the radially reduced heat flow in a computational
time tau related to physical time by dt/dtau = g + delta, where
g = |u_r / u_rt| at the relevant pole is the instantaneous blowup
timescale and delta is a small cutoff. Away from blowup the cutoff is
invisible (g >> delta); at blowup g vanishes like 2(T - t), tau-steps
translate into ever smaller physical steps, and the cutoff lets the
integrator step across T instead of stalling forever.

Space is handled by a moving mesh r(xi, tau) on a uniform computational
grid xi in [0, 1], relaxed toward equidistribution of the density
M = |u_r| + sqrt(|u_rr|) by the MMPDE6 law

    eps(t) r_tau_xi_xi = -(dt/dtau) (M r_xi)_xi,    eps = 100 sqrt(g) + 0.05,

with the endpoints pinned. Spatial derivatives use 5-point stencils in
xi pushed through the mesh map.

The evolved field is z = r u (flat domain) or Z = sin(theta) U (sphere)
rather than u itself: z vanishes at the poles both before and after a
blowup even though u(t, 0) jumps by pi when a reversed expanding
profile emerges, so one variable carries the run through the jump. The
pole slope u_r(0) = z_rr(0) / 2 and its time derivative are read off
one-sided stencils of z and of the spatial operator applied to z, which
is what feeds g.

A single run is strictly sequential. Concurrent runs share no mutable
state (module-level data is immutable or compiled code). Snapshot
emission appends to an in-memory list and performs no I/O, so it never
blocks stepping; serializing snapshots to disk is the caller's job.
"""

from __future__ import annotations

import ast
import json
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numba
import numpy as np

from .errors import DomainError, MeshError, PreconditionError
from .shrinker import find_shrinker

__all__ = [
    "SimConfig",
    "SimState",
    "Snapshot",
    "BlowupEvent",
    "RateFit",
    "parse_config",
    "parse_config_text",
    "compile_initial_expression",
    "initial_state",
    "step",
    "run",
    "fit_blowup_rate",
    "write_snapshot_csv",
    "read_snapshot_csv",
    "write_events_json",
]

HALF_PI = 0.5 * math.pi

# timescale cap used when u_rt at the pole vanishes (static or nearly
# static data has no finite blowup timescale)
GCAP = 1.0e6

# tau interval between entries in the internal diagnostic record; the
# record is what blowup-rate fits and the Sundman-scaling check read
RECORD_DTAU = 1.0e-3

# tau window after a passage during which post-blowup samples are
# collected before the event is finalized
POST_FIT_TAU = 0.5

_MIN_DTAU = 1.0e-15


# ---------------------------------------------------------------------------
# initial data expressions

_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "atan": np.arctan,
    "arctan": np.arctan,
    "abs": np.abs,
}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


def _eval_node(node, coord):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body, coord)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, (int, float)):
            return float(node.value)
        raise PreconditionError("only numeric constants are allowed")
    if isinstance(node, ast.Name):
        if node.id in ("r", "theta"):
            return coord
        if node.id == "pi":
            return math.pi
        raise PreconditionError(f"unknown name {node.id!r} in initial data")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](
            _eval_node(node.left, coord), _eval_node(node.right, coord)
        )
    if isinstance(node, ast.UnaryOp):
        if isinstance(node.op, ast.USub):
            return -_eval_node(node.operand, coord)
        if isinstance(node.op, ast.UAdd):
            return _eval_node(node.operand, coord)
        raise PreconditionError("unsupported unary operator in initial data")
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
            raise PreconditionError("unknown function in initial data")
        if len(node.args) != 1 or node.keywords:
            raise PreconditionError("initial data functions take one argument")
        return _FUNCS[node.func.id](_eval_node(node.args[0], coord))
    raise PreconditionError(
        f"unsupported element {type(node).__name__!r} in initial data expression"
    )


def compile_initial_expression(spec: str) -> Callable[[np.ndarray], np.ndarray]:
    """Compile an ``expr:...`` initial data string to a vectorized callable.

    The grammar covers arithmetic (+, -, *, /, **), the names ``r``,
    ``theta`` (both bound to the radial coordinate) and ``pi``, and the
    one-argument functions sin, cos, tan, exp, sqrt, atan, abs.
    """
    if not isinstance(spec, str) or not spec.startswith("expr:"):
        raise PreconditionError("initial data must be given as 'expr:<expression>'")
    body = spec[5:].strip()
    if not body:
        raise PreconditionError("empty initial data expression")
    try:
        tree = ast.parse(body, mode="eval")
    except SyntaxError as exc:
        raise PreconditionError(f"cannot parse initial data expression: {exc}") from exc

    def fn(coord):
        coord = np.asarray(coord, dtype=float)
        out = _eval_node(tree, coord)
        return np.broadcast_to(np.asarray(out, dtype=float), coord.shape).copy()

    fn(np.array([0.0, 0.5]))  # fail fast on bad expressions
    return fn


# ---------------------------------------------------------------------------
# configuration

_CONFIG_KEYS = {
    "domain": str,
    "d": int,
    "grid_n": int,
    "r_max": float,
    "delta_cutoff": float,
    "tau_max": float,
    "t_max": float,
    "rtol": float,
    "atol": float,
    "snapshot_every": float,
    "initial": str,
}


@dataclass
class SimConfig:
    """Run parameters.

    grid_n counts intervals: the mesh carries grid_n + 1 nodes
    r_0 .. r_N with r_0 = 0 and r_N = r_max (flat) or pi (sphere).
    snapshot_every is an interval in computational time tau, so on a
    blowup approach snapshots land log-uniformly in T - t.
    """

    domain: str
    d: int
    initial: str
    grid_n: int = 256
    r_max: float = 20.0
    delta_cutoff: float = 1.0e-10
    tau_max: float = 60.0
    t_max: float = math.inf
    rtol: float = 1.0e-8
    atol: float = 1.0e-12
    snapshot_every: float = 0.25
    relax_scale: float = 100.0
    relax_floor: float = 0.05

    def __post_init__(self):
        if self.domain not in ("flat", "sphere"):
            raise PreconditionError(f"domain must be 'flat' or 'sphere', got {self.domain!r}")
        if not isinstance(self.d, int) or not 3 <= self.d <= 6:
            raise DomainError(f"d must be an integer in [3, 6], got {self.d!r}")
        if self.grid_n < 64:
            raise PreconditionError(f"grid_n must be at least 64, got {self.grid_n}")
        if not self.delta_cutoff > 0.0:
            raise PreconditionError("delta_cutoff must be positive")
        if self.domain == "flat" and not self.r_max > 0.0:
            raise PreconditionError("r_max must be positive for a flat run")
        if not (self.rtol > 0.0 and self.atol > 0.0):
            raise PreconditionError("rtol and atol must be positive")
        if not self.snapshot_every > 0.0:
            raise PreconditionError("snapshot_every must be positive")
        if not self.tau_max > 0.0:
            raise PreconditionError("tau_max must be positive")
        if not self.t_max > 0.0:
            raise PreconditionError("t_max must be positive")
        if not (self.relax_scale > 0.0 and self.relax_floor >= 0.0):
            raise PreconditionError("relaxation coefficients out of range")
        compile_initial_expression(self.initial)

    @property
    def coord_max(self) -> float:
        return self.r_max if self.domain == "flat" else math.pi

    @property
    def kind(self) -> int:
        return 0 if self.domain == "flat" else 1


def parse_config_text(text: str) -> SimConfig:
    """Parse ``key = value`` configuration text into a SimConfig."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise PreconditionError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _CONFIG_KEYS:
            raise PreconditionError(f"config line {lineno}: unknown key {key!r}")
        if key in values:
            raise PreconditionError(f"config line {lineno}: duplicate key {key!r}")
        caster = _CONFIG_KEYS[key]
        try:
            values[key] = caster(val) if caster is not str else val
        except ValueError as exc:
            raise PreconditionError(f"config line {lineno}: bad value for {key!r}: {val!r}") from exc
    missing = [k for k in ("domain", "d", "initial") if k not in values]
    if missing:
        raise PreconditionError(f"config is missing required keys: {', '.join(missing)}")
    return SimConfig(**values)


def parse_config(path: str) -> SimConfig:
    """Read a flat key = value config file. See parse_config_text."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


# ---------------------------------------------------------------------------
# state containers

@dataclass
class SimState:
    """Instantaneous solver state.

    r and z have grid_n + 1 entries; r is strictly increasing with
    r[0] = 0 and r[-1] fixed, z[0] = 0 always and z[-1] fixed by the
    data (0 on the sphere). g is the Sundman factor at the last
    evaluation; energy is filled by step(), initial_state() and at
    snapshot times (run() does not spend the stencil work every step).
    """

    tau: float
    t: float
    r: np.ndarray
    z: np.ndarray
    g: float
    energy: float
    quiescent: bool = False

    def field_u(self, kind: Optional[int] = None) -> np.ndarray:
        k = _infer_kind(self.r) if kind is None else kind
        return _reconstruct_u(self.r, self.z, k)

    def copy(self) -> "SimState":
        return SimState(
            self.tau, self.t, self.r.copy(), self.z.copy(), self.g, self.energy, self.quiescent
        )


@dataclass
class Snapshot:
    index: int
    tau: float
    t: float
    g: float
    r: np.ndarray
    u: np.ndarray
    z: np.ndarray
    origin_slope: float
    south_slope: float
    energy: float
    unresolved: bool = False


@dataclass
class BlowupEvent:
    """One resolved passage through a blowup.

    degree_change counts the jump of the boundary value at the blowup
    pole in units of pi. The pre-blowup fit carries the profile index
    read off the rescaled data, the decay rate lambda1 of the leading
    stable mode and its amplitude c1 (nan when the approach was too
    short to regress). expander_A is the origin slope of the rescaled
    post-blowup profile. reliable is False when the solver never
    regained resolution after the passage.
    """

    T: float
    pole: str
    shrinker_index: int
    lambda1: float
    c1: float
    expander_A: float
    degree_change: int
    reliable: bool
    t_enter: float
    t_exit: float


@dataclass
class RateFit:
    """Result of a blowup-rate regression; see fit_blowup_rate."""

    lambda1: float
    c1: float
    residual: float
    n_used: int
    decades: float
    mode_residual: Optional[float] = None


# ---------------------------------------------------------------------------
# stencils (numpy side)

def _d1_np(a: np.ndarray, inv12h: float) -> np.ndarray:
    out = np.empty_like(a)
    out[2:-2] = (a[:-4] - 8.0 * a[1:-3] + 8.0 * a[3:-1] - a[4:]) * inv12h
    out[0] = (-25.0 * a[0] + 48.0 * a[1] - 36.0 * a[2] + 16.0 * a[3] - 3.0 * a[4]) * inv12h
    out[1] = (-3.0 * a[0] - 10.0 * a[1] + 18.0 * a[2] - 6.0 * a[3] + a[4]) * inv12h
    out[-2] = (-a[-5] + 6.0 * a[-4] - 18.0 * a[-3] + 10.0 * a[-2] + 3.0 * a[-1]) * inv12h
    out[-1] = (3.0 * a[-5] - 16.0 * a[-4] + 36.0 * a[-3] - 48.0 * a[-2] + 25.0 * a[-1]) * inv12h
    return out


def _d2_np(a: np.ndarray, inv12h2: float) -> np.ndarray:
    out = np.empty_like(a)
    out[2:-2] = (-a[:-4] + 16.0 * a[1:-3] - 30.0 * a[2:-2] + 16.0 * a[3:-1] - a[4:]) * inv12h2
    out[0] = (35.0 * a[0] - 104.0 * a[1] + 114.0 * a[2] - 56.0 * a[3] + 11.0 * a[4]) * inv12h2
    out[1] = (11.0 * a[0] - 20.0 * a[1] + 6.0 * a[2] + 4.0 * a[3] - a[4]) * inv12h2
    out[-2] = (-a[-5] + 4.0 * a[-4] + 6.0 * a[-3] - 20.0 * a[-2] + 11.0 * a[-1]) * inv12h2
    out[-1] = (11.0 * a[-5] - 56.0 * a[-4] + 114.0 * a[-3] - 104.0 * a[-2] + 35.0 * a[-1]) * inv12h2
    return out


def _infer_kind(r: np.ndarray) -> int:
    return 1 if abs(r[-1] - math.pi) < 1.0e-12 else 0


def _reconstruct_u(r: np.ndarray, z: np.ndarray, kind: int) -> np.ndarray:
    """u at the nodes from the pole-regular variable.

    At the poles u is the limit z_r (north) resp. -z_theta (south,
    sphere), read from one-sided stencils; the uniform-grid spacing
    cancels in the ratio so no h is needed.
    """
    u = np.empty_like(z)
    u[1:-1] = z[1:-1] / r[1:-1]
    c0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0])
    u[0] = (c0 @ z[:5]) / (c0 @ r[:5])
    if kind == 0:
        u[-1] = z[-1] / r[-1]
    else:
        cn = np.array([3.0, -16.0, 36.0, -48.0, 25.0])
        u[-1] = -(cn @ z[-5:]) / (cn @ r[-5:])
    return u


def _pole_data(r: np.ndarray, z: np.ndarray, kind: int):
    """(u0_north, slope_north, u0_south, slope_south) via one-sided stencils."""
    n = r.size - 1
    h = 1.0 / n
    inv12h = 1.0 / (12.0 * h)
    inv12h2 = inv12h / h
    c1 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) * inv12h
    c2 = np.array([35.0, -104.0, 114.0, -56.0, 11.0]) * inv12h2
    zx, zxx = c1 @ z[:5], c2 @ z[:5]
    rx, rxx = c1 @ r[:5], c2 @ r[:5]
    u0_n = zx / rx
    slope_n = 0.5 * (zxx * rx - zx * rxx) / rx**3
    if kind == 0:
        return u0_n, slope_n, math.nan, math.nan
    d1 = np.array([3.0, -16.0, 36.0, -48.0, 25.0]) * inv12h
    d2 = np.array([11.0, -56.0, 114.0, -104.0, 35.0]) * inv12h2
    zx_s, zxx_s = d1 @ z[-5:], d2 @ z[-5:]
    rx_s, rxx_s = d1 @ r[-5:], d2 @ r[-5:]
    u0_s = -zx_s / rx_s
    slope_s = -0.5 * (zxx_s * rx_s - zx_s * rxx_s) / rx_s**3
    return u0_n, slope_n, u0_s, slope_s


def _energy(r: np.ndarray, z: np.ndarray, kind: int, d: int) -> float:
    """Dirichlet energy of the equivariant map on the moving mesh."""
    u = _reconstruct_u(r, z, kind)
    u_r = np.gradient(u, r)
    if kind == 0:
        dens = np.empty_like(u)
        dens[1:] = u_r[1:] ** 2 + (d - 1) * np.sin(u[1:]) ** 2 / r[1:] ** 2
        dens[0] = d * u_r[0] ** 2
        weight = r ** (d - 1)
    else:
        s = np.sin(r)
        dens = np.empty_like(u)
        dens[1:-1] = u_r[1:-1] ** 2 + (d - 1) * np.sin(u[1:-1]) ** 2 / s[1:-1] ** 2
        dens[0] = d * u_r[0] ** 2
        dens[-1] = d * u_r[-1] ** 2
        weight = np.abs(s) ** (d - 1)
    return 0.5 * float(np.trapezoid(dens * weight, r))


# ---------------------------------------------------------------------------
# right-hand side: numpy reference implementation

def _rhs_numpy(y, out, d, n, dxi, kind, z_end, r_end, delta, relax_scale, relax_floor, m_floor):
    """Coupled (t, z, r) tau-derivative. Twin of the jitted kernel.

    Layout: y[0] = t, y[1:n] = z at nodes 1..n-1, y[n:2n-1] = r there.
    Returns (g, slope_north, slope_south).
    """
    npts = n + 1
    z = np.empty(npts)
    r = np.empty(npts)
    z[0] = 0.0
    r[0] = 0.0
    z[1:n] = y[1:n]
    r[1:n] = y[n : 2 * n - 1]
    z[n] = z_end
    r[n] = r_end

    inv12h = 1.0 / (12.0 * dxi)
    inv12h2 = inv12h / dxi
    z_x = _d1_np(z, inv12h)
    z_xx = _d2_np(z, inv12h2)
    r_x = _d1_np(r, inv12h)
    r_xx = _d2_np(r, inv12h2)

    u = np.empty(npts)
    u[0] = z_x[0] / r_x[0]
    u[1:n] = z[1:n] / r[1:n]
    u[n] = z_end / r_end if kind == 0 else -z_x[n] / r_x[n]
    u_x = _d1_np(u, inv12h)
    u_xx = _d2_np(u, inv12h2)

    inv_rx = 1.0 / r_x
    u_r = u_x * inv_rx
    u_rr = (u_xx * r_x - u_x * r_xx) * inv_rx**3
    z_rr = (z_xx * r_x - z_x * r_xx) * inv_rx**3

    zt = np.zeros(npts)
    if kind == 0:
        zt[1:n] = (
            z_rr[1:n]
            + (d - 3.0) * u_r[1:n]
            - (d - 1.0) * np.sin(2.0 * u[1:n]) / (2.0 * r[1:n])
        )
    else:
        zt[1:n] = (
            z_rr[1:n]
            + z[1:n]
            + (d - 3.0) * np.cos(r[1:n]) * u_r[1:n]
            - (d - 1.0) * np.sin(2.0 * u[1:n]) / (2.0 * np.sin(r[1:n]))
        )

    # pole timescales: g = |u_r / u_rt| with u_r(0) = z_rr(0)/2 and
    # u_rt(0) = (z_t)_rr(0)/2, both via the same one-sided stencils
    num_n = z_xx[0] * r_x[0] - z_x[0] * r_xx[0]
    ztx0 = (-25.0 * zt[0] + 48.0 * zt[1] - 36.0 * zt[2] + 16.0 * zt[3] - 3.0 * zt[4]) * inv12h
    ztxx0 = (35.0 * zt[0] - 104.0 * zt[1] + 114.0 * zt[2] - 56.0 * zt[3] + 11.0 * zt[4]) * inv12h2
    den_n = ztxx0 * r_x[0] - ztx0 * r_xx[0]
    slope_n = 0.5 * num_n * inv_rx[0] ** 3
    g = GCAP if abs(den_n) * GCAP <= abs(num_n) or den_n == 0.0 else abs(num_n / den_n)
    slope_s = math.nan
    if kind == 1:
        num_s = z_xx[n] * r_x[n] - z_x[n] * r_xx[n]
        ztxn = (3.0 * zt[n - 4] - 16.0 * zt[n - 3] + 36.0 * zt[n - 2] - 48.0 * zt[n - 1] + 25.0 * zt[n]) * inv12h
        ztxxn = (11.0 * zt[n - 4] - 56.0 * zt[n - 3] + 114.0 * zt[n - 2] - 104.0 * zt[n - 1] + 35.0 * zt[n]) * inv12h2
        den_s = ztxxn * r_x[n] - ztxn * r_xx[n]
        slope_s = -0.5 * num_s * inv_rx[n] ** 3
        g_s = GCAP if abs(den_s) * GCAP <= abs(num_s) or den_s == 0.0 else abs(num_s / den_s)
        g = min(g, g_s)
    bigG = g + delta

    # mesh density, smoothed twice, floored at a fraction of its peak
    M = np.abs(u_r) + np.sqrt(np.abs(u_rr))
    for _ in range(2):
        sm = np.empty_like(M)
        sm[1:-1] = 0.25 * (M[:-2] + 2.0 * M[1:-1] + M[2:])
        sm[0] = 0.25 * (3.0 * M[0] + M[1])
        sm[-1] = 0.25 * (M[-2] + 3.0 * M[-1])
        M = sm
    M = np.maximum(M, m_floor * M.max() + 1.0e-12)

    # MMPDE6: eps (r_tau)_xixi = -G (M r_xi)_xi, r_tau pinned at ends;
    # conservative half-point form, dxi^2 cancels on both sides
    eps = relax_scale * math.sqrt(bigG) + relax_floor
    mh = 0.5 * (M[:-1] + M[1:])
    flux = mh * np.diff(r)
    rhs = -bigG * np.diff(flux)  # length n-1, rows i = 1..n-1
    v = np.zeros(npts)
    cp = np.empty(n - 1)
    dp = np.empty(n - 1)
    b = -2.0 * eps
    cp[0] = eps / b
    dp[0] = rhs[0] / b
    for i in range(1, n - 1):
        denom = b - eps * cp[i - 1]
        cp[i] = eps / denom
        dp[i] = (rhs[i] - eps * dp[i - 1]) / denom
    v[n - 1] = dp[n - 2]
    for i in range(n - 2, 0, -1):
        v[i] = dp[i - 1] - cp[i - 1] * v[i + 1]

    out[0] = bigG
    z_r = z_x[1:n] * inv_rx[1:n]
    out[1:n] = bigG * zt[1:n] + v[1:n] * z_r
    out[n : 2 * n - 1] = v[1:n]
    return g, slope_n, slope_s


# ---------------------------------------------------------------------------
# right-hand side: jitted kernel (same arithmetic, loop form)

@numba.njit(cache=True)
def _d1_jit(a, inv12h, out):
    n = a.size - 1
    out[0] = (-25.0 * a[0] + 48.0 * a[1] - 36.0 * a[2] + 16.0 * a[3] - 3.0 * a[4]) * inv12h
    out[1] = (-3.0 * a[0] - 10.0 * a[1] + 18.0 * a[2] - 6.0 * a[3] + a[4]) * inv12h
    for i in range(2, n - 1):
        out[i] = (a[i - 2] - 8.0 * a[i - 1] + 8.0 * a[i + 1] - a[i + 2]) * inv12h
    out[n - 1] = (-a[n - 4] + 6.0 * a[n - 3] - 18.0 * a[n - 2] + 10.0 * a[n - 1] + 3.0 * a[n]) * inv12h
    out[n] = (3.0 * a[n - 4] - 16.0 * a[n - 3] + 36.0 * a[n - 2] - 48.0 * a[n - 1] + 25.0 * a[n]) * inv12h


@numba.njit(cache=True)
def _d2_jit(a, inv12h2, out):
    n = a.size - 1
    out[0] = (35.0 * a[0] - 104.0 * a[1] + 114.0 * a[2] - 56.0 * a[3] + 11.0 * a[4]) * inv12h2
    out[1] = (11.0 * a[0] - 20.0 * a[1] + 6.0 * a[2] + 4.0 * a[3] - a[4]) * inv12h2
    for i in range(2, n - 1):
        out[i] = (-a[i - 2] + 16.0 * a[i - 1] - 30.0 * a[i] + 16.0 * a[i + 1] - a[i + 2]) * inv12h2
    out[n - 1] = (-a[n - 4] + 4.0 * a[n - 3] + 6.0 * a[n - 2] - 20.0 * a[n - 1] + 11.0 * a[n]) * inv12h2
    out[n] = (11.0 * a[n - 4] - 56.0 * a[n - 3] + 114.0 * a[n - 2] - 104.0 * a[n - 1] + 35.0 * a[n]) * inv12h2


@numba.njit(cache=True)
def _rhs_jit(y, out, d, n, dxi, kind, z_end, r_end, delta, relax_scale, relax_floor, m_floor):
    npts = n + 1
    z = np.empty(npts)
    r = np.empty(npts)
    z[0] = 0.0
    r[0] = 0.0
    for i in range(1, n):
        z[i] = y[i]
        r[i] = y[n + i - 1]
    z[n] = z_end
    r[n] = r_end

    inv12h = 1.0 / (12.0 * dxi)
    inv12h2 = inv12h / dxi
    z_x = np.empty(npts)
    z_xx = np.empty(npts)
    r_x = np.empty(npts)
    r_xx = np.empty(npts)
    _d1_jit(z, inv12h, z_x)
    _d2_jit(z, inv12h2, z_xx)
    _d1_jit(r, inv12h, r_x)
    _d2_jit(r, inv12h2, r_xx)

    u = np.empty(npts)
    u[0] = z_x[0] / r_x[0]
    for i in range(1, n):
        u[i] = z[i] / r[i]
    if kind == 0:
        u[n] = z_end / r_end
    else:
        u[n] = -z_x[n] / r_x[n]
    u_x = np.empty(npts)
    u_xx = np.empty(npts)
    _d1_jit(u, inv12h, u_x)
    _d2_jit(u, inv12h2, u_xx)

    zt = np.zeros(npts)
    dm1 = d - 1.0
    dm3 = d - 3.0
    if kind == 0:
        for i in range(1, n):
            rx = r_x[i]
            z_rr = (z_xx[i] * rx - z_x[i] * r_xx[i]) / (rx * rx * rx)
            ur = u_x[i] / rx
            zt[i] = z_rr + dm3 * ur - dm1 * math.sin(2.0 * u[i]) / (2.0 * r[i])
    else:
        for i in range(1, n):
            rx = r_x[i]
            z_rr = (z_xx[i] * rx - z_x[i] * r_xx[i]) / (rx * rx * rx)
            ur = u_x[i] / rx
            zt[i] = (
                z_rr
                + z[i]
                + dm3 * math.cos(r[i]) * ur
                - dm1 * math.sin(2.0 * u[i]) / (2.0 * math.sin(r[i]))
            )

    num_n = z_xx[0] * r_x[0] - z_x[0] * r_xx[0]
    ztx0 = (-25.0 * zt[0] + 48.0 * zt[1] - 36.0 * zt[2] + 16.0 * zt[3] - 3.0 * zt[4]) * inv12h
    ztxx0 = (35.0 * zt[0] - 104.0 * zt[1] + 114.0 * zt[2] - 56.0 * zt[3] + 11.0 * zt[4]) * inv12h2
    den_n = ztxx0 * r_x[0] - ztx0 * r_xx[0]
    slope_n = 0.5 * num_n / (r_x[0] * r_x[0] * r_x[0])
    if abs(den_n) * GCAP <= abs(num_n) or den_n == 0.0:
        g = GCAP
    else:
        g = abs(num_n / den_n)
    slope_s = np.nan
    if kind == 1:
        num_s = z_xx[n] * r_x[n] - z_x[n] * r_xx[n]
        ztxn = (3.0 * zt[n - 4] - 16.0 * zt[n - 3] + 36.0 * zt[n - 2] - 48.0 * zt[n - 1] + 25.0 * zt[n]) * inv12h
        ztxxn = (11.0 * zt[n - 4] - 56.0 * zt[n - 3] + 114.0 * zt[n - 2] - 104.0 * zt[n - 1] + 35.0 * zt[n]) * inv12h2
        den_s = ztxxn * r_x[n] - ztxn * r_xx[n]
        slope_s = -0.5 * num_s / (r_x[n] * r_x[n] * r_x[n])
        if abs(den_s) * GCAP <= abs(num_s) or den_s == 0.0:
            g_s = GCAP
        else:
            g_s = abs(num_s / den_s)
        if g_s < g:
            g = g_s
    bigG = g + delta

    M = np.empty(npts)
    for i in range(npts):
        rx = r_x[i]
        ur = u_x[i] / rx
        urr = (u_xx[i] * rx - u_x[i] * r_xx[i]) / (rx * rx * rx)
        M[i] = abs(ur) + math.sqrt(abs(urr))
    sm = np.empty(npts)
    for _ in range(2):
        sm[0] = 0.25 * (3.0 * M[0] + M[1])
        for i in range(1, n):
            sm[i] = 0.25 * (M[i - 1] + 2.0 * M[i] + M[i + 1])
        sm[n] = 0.25 * (M[n - 1] + 3.0 * M[n])
        for i in range(npts):
            M[i] = sm[i]
    mmax = 0.0
    for i in range(npts):
        if M[i] > mmax:
            mmax = M[i]
    mfloor = m_floor * mmax + 1.0e-12
    for i in range(npts):
        if M[i] < mfloor:
            M[i] = mfloor

    eps = relax_scale * math.sqrt(bigG) + relax_floor
    cp = np.empty(n - 1)
    dp = np.empty(n - 1)
    b = -2.0 * eps
    fl_prev = 0.5 * (M[0] + M[1]) * (r[1] - r[0])
    fl_next = 0.5 * (M[1] + M[2]) * (r[2] - r[1])
    rhs0 = -bigG * (fl_next - fl_prev)
    cp[0] = eps / b
    dp[0] = rhs0 / b
    fl_prev = fl_next
    for i in range(2, n):
        fl_next = 0.5 * (M[i] + M[i + 1]) * (r[i + 1] - r[i])
        rhs_i = -bigG * (fl_next - fl_prev)
        fl_prev = fl_next
        denom = b - eps * cp[i - 2]
        cp[i - 1] = eps / denom
        dp[i - 1] = (rhs_i - eps * dp[i - 2]) / denom
    v = np.zeros(npts)
    v[n - 1] = dp[n - 2]
    for i in range(n - 2, 0, -1):
        v[i] = dp[i - 1] - cp[i - 1] * v[i + 1]

    out[0] = bigG
    for i in range(1, n):
        out[i] = bigG * zt[i] + v[i] * (z_x[i] / r_x[i])
        out[n + i - 1] = v[i]
    return g, slope_n, slope_s


@numba.njit(cache=True)
def _rk45_attempt_jit(y, k1, dt, d, n, dxi, kind, z_end, r_end, delta,
                      relax_scale, relax_floor, m_floor, rtol, atol):
    """One trial RKF45 step from y with precomputed k1. Returns (y5, errnorm).

    errnorm > 1 rejects; 1e30 flags a non-finite or mesh-order failure.
    """
    m = y.size
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    k5 = np.empty(m)
    k6 = np.empty(m)
    yt = np.empty(m)

    for i in range(m):
        yt[i] = y[i] + dt * 0.25 * k1[i]
    _rhs_jit(yt, k2, d, n, dxi, kind, z_end, r_end, delta, relax_scale, relax_floor, m_floor)
    for i in range(m):
        yt[i] = y[i] + dt * (0.09375 * k1[i] + 0.28125 * k2[i])
    _rhs_jit(yt, k3, d, n, dxi, kind, z_end, r_end, delta, relax_scale, relax_floor, m_floor)
    for i in range(m):
        yt[i] = y[i] + dt * (
            (1932.0 / 2197.0) * k1[i] - (7200.0 / 2197.0) * k2[i] + (7296.0 / 2197.0) * k3[i]
        )
    _rhs_jit(yt, k4, d, n, dxi, kind, z_end, r_end, delta, relax_scale, relax_floor, m_floor)
    for i in range(m):
        yt[i] = y[i] + dt * (
            (439.0 / 216.0) * k1[i] - 8.0 * k2[i] + (3680.0 / 513.0) * k3[i] - (845.0 / 4104.0) * k4[i]
        )
    _rhs_jit(yt, k5, d, n, dxi, kind, z_end, r_end, delta, relax_scale, relax_floor, m_floor)
    for i in range(m):
        yt[i] = y[i] + dt * (
            (-8.0 / 27.0) * k1[i] + 2.0 * k2[i] - (3544.0 / 2565.0) * k3[i]
            + (1859.0 / 4104.0) * k4[i] - (11.0 / 40.0) * k5[i]
        )
    _rhs_jit(yt, k6, d, n, dxi, kind, z_end, r_end, delta, relax_scale, relax_floor, m_floor)

    y5 = np.empty(m)
    errnorm = 0.0
    for i in range(m):
        y5[i] = y[i] + dt * (
            (16.0 / 135.0) * k1[i] + (6656.0 / 12825.0) * k3[i]
            + (28561.0 / 56430.0) * k4[i] - (9.0 / 50.0) * k5[i] + (2.0 / 55.0) * k6[i]
        )
        ei = dt * (
            (1.0 / 360.0) * k1[i] - (128.0 / 4275.0) * k3[i]
            - (2197.0 / 75240.0) * k4[i] - (1.0 / 50.0) * k5[i] + (2.0 / 55.0) * k6[i]
        )
        if i == 0:
            w = atol + rtol * abs(y[0])
        elif i < n:
            # z scales like r * u: give it an absolute floor proportional
            # to the local radius so origin nodes are not over-controlled
            w = atol + rtol * (abs(y[i]) + 3.2 * y[n + i - 1])
        else:
            w = atol + rtol * abs(y[i])
        e = abs(ei) / w
        if e > errnorm:
            errnorm = e

    if not np.isfinite(errnorm):
        return y5, 1.0e30
    prev = 0.0
    for i in range(n, 2 * n - 1):
        cur = y5[i]
        if not np.isfinite(cur) or cur <= prev:
            return y5, 1.0e30
        prev = cur
    if prev >= r_end:
        return y5, 1.0e30
    for i in range(1, n):
        if not np.isfinite(y5[i]):
            return y5, 1.0e30
    return y5, errnorm


def _rk45_attempt_np(y, k1, dt, d, n, dxi, kind, z_end, r_end, delta,
                     relax_scale, relax_floor, m_floor, rtol, atol):
    """Numpy twin of the trial step, for cross-checking the kernel."""
    args = (d, n, dxi, kind, z_end, r_end, delta, relax_scale, relax_floor, m_floor)
    ks = [k1]
    a_rows = [
        (0.25,),
        (0.09375, 0.28125),
        (1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0),
        (439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0),
        (-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0),
    ]
    for row in a_rows:
        yt = y.copy()
        for a, k in zip(row, ks):
            yt += dt * a * k
        knew = np.empty_like(y)
        _rhs_numpy(yt, knew, *args)
        ks.append(knew)
    k1, k2, k3, k4, k5, k6 = ks
    y5 = y + dt * (
        (16.0 / 135.0) * k1 + (6656.0 / 12825.0) * k3 + (28561.0 / 56430.0) * k4
        - (9.0 / 50.0) * k5 + (2.0 / 55.0) * k6
    )
    err = dt * (
        (1.0 / 360.0) * k1 - (128.0 / 4275.0) * k3 - (2197.0 / 75240.0) * k4
        - (1.0 / 50.0) * k5 + (2.0 / 55.0) * k6
    )
    w = np.empty_like(y)
    w[0] = atol + rtol * abs(y[0])
    w[1:n] = atol + rtol * (np.abs(y[1:n]) + 3.2 * y[n : 2 * n - 1])
    w[n:] = atol + rtol * np.abs(y[n:])
    errnorm = float(np.max(np.abs(err) / w))
    r_new = y5[n : 2 * n - 1]
    if (
        not np.all(np.isfinite(y5))
        or np.any(np.diff(r_new) <= 0.0)
        or r_new[0] <= 0.0
        or r_new[-1] >= r_end
    ):
        return y5, 1.0e30
    return y5, errnorm


# ---------------------------------------------------------------------------
# stepping

def _pack(state: SimState) -> np.ndarray:
    n = state.r.size - 1
    y = np.empty(2 * n - 1)
    y[0] = state.t
    y[1:n] = state.z[1:n]
    y[n:] = state.r[1:n]
    return y


def _unpack(y: np.ndarray, n: int, z_end: float, r_end: float):
    z = np.empty(n + 1)
    r = np.empty(n + 1)
    z[0] = 0.0
    r[0] = 0.0
    z[1:n] = y[1:n]
    r[1:n] = y[n:]
    z[n] = z_end
    r[n] = r_end
    return float(y[0]), z, r


class _Stepper:
    """Adaptive RKF45 driver for one run. Owns the packed state vector."""

    def __init__(self, config: SimConfig, state: SimState, use_numba: bool = True):
        n = config.grid_n
        if state.r.size != n + 1 or state.z.size != n + 1:
            raise PreconditionError(
                f"state arrays have {state.r.size - 1} intervals, config says {n}"
            )
        if np.any(np.diff(state.r) <= 0.0):
            raise MeshError("initial mesh is not strictly increasing", state=state.copy())
        self.config = config
        self.n = n
        self.z_end = float(state.z[-1])
        self.r_end = float(state.r[-1])
        self.args = (
            float(config.d),
            n,
            1.0 / n,
            config.kind,
            self.z_end,
            self.r_end,
            config.delta_cutoff,
            config.relax_scale,
            config.relax_floor,
            0.03,
        )
        self.tol = (config.rtol, config.atol)
        self._attempt = _rk45_attempt_jit if use_numba else _rk45_attempt_np
        self._rhs = _rhs_jit if use_numba else _rhs_numpy
        self.y = _pack(state)
        self.tau = state.tau
        self.dt = 1.0e-8
        self.k1 = np.empty_like(self.y)
        self.g, self.slope_n, self.slope_s = self._rhs(self.y, self.k1, *self.args)
        self.n_accepted = 0
        self.n_rejected = 0

    @property
    def t(self) -> float:
        return float(self.y[0])

    def state(self, with_energy: bool = True) -> SimState:
        t, z, r = _unpack(self.y, self.n, self.z_end, self.r_end)
        energy = _energy(r, z, self.config.kind, self.config.d) if with_energy else math.nan
        return SimState(self.tau, t, r, z, self.g, energy)

    def advance(self) -> None:
        """Take one accepted step; raises MeshError on breakdown."""
        rtol, atol = self.tol
        while True:
            y5, errnorm = self._attempt(self.y, self.k1, self.dt, *self.args, rtol, atol)
            if errnorm <= 1.0:
                break
            self.n_rejected += 1
            if errnorm >= 1.0e30:
                self.dt *= 0.25
                reason = "mesh order violation or non-finite values in trial step"
            else:
                self.dt *= max(0.2, 0.9 * errnorm ** -0.2)
                reason = "error control"
            if self.dt < _MIN_DTAU:
                raise MeshError(
                    f"time step underflow (dtau < {_MIN_DTAU:g}) while rejecting on "
                    f"{reason}; this is a breakdown, not a Sundman stall (stalls keep "
                    "a finite dtau)",
                    state=self.state(with_energy=False),
                )
        self.tau += self.dt
        self.y = y5
        if errnorm > 0.0:
            self.dt *= min(5.0, max(0.2, 0.9 * errnorm ** -0.2))
        else:
            self.dt *= 5.0
        self.n_accepted += 1
        self.g, self.slope_n, self.slope_s = self._rhs(self.y, self.k1, *self.args)
        if not math.isfinite(self.g):
            raise MeshError(
                "non-finite Sundman factor after accepted step",
                state=self.state(with_energy=False),
            )


def step(state: SimState, config: SimConfig, use_numba: bool = True) -> SimState:
    """Advance one accepted RKF45 step and return the new state.

    The returned state carries fresh arrays, the Sundman factor at the
    new time and the energy. Mesh tangling or step underflow raises
    MeshError with the offending state attached.
    """
    st = _Stepper(config, state, use_numba=use_numba)
    st.advance()
    return st.state()


# ---------------------------------------------------------------------------
# initial data

def initial_state(config: SimConfig) -> SimState:
    """Build the t = 0 state with a mesh equidistributing the initial density."""
    fn = compile_initial_expression(config.initial)
    hi = config.coord_max
    nf = max(8 * config.grid_n, 4096)
    xf = np.linspace(0.0, hi, nf + 1)
    uf = fn(xf)
    if not np.all(np.isfinite(uf)):
        raise PreconditionError("initial data is not finite on the domain")
    du = np.gradient(uf, xf)
    d2u = np.gradient(du, xf)
    M = np.abs(du) + np.sqrt(np.abs(d2u))
    for _ in range(2):
        sm = M.copy()
        sm[1:-1] = 0.25 * (M[:-2] + 2.0 * M[1:-1] + M[2:])
        M = sm
    M = np.maximum(M, 0.03 * M.max() + 1.0e-12)
    C = np.concatenate(([0.0], np.cumsum(0.5 * (M[1:] + M[:-1]) * np.diff(xf))))
    r = np.interp(np.linspace(0.0, C[-1], config.grid_n + 1), C, xf)
    r[0] = 0.0
    r[-1] = hi
    u_nodes = fn(r)
    s = r if config.kind == 0 else np.sin(r)
    z = s * u_nodes
    z[0] = 0.0
    if config.kind == 1:
        z[-1] = 0.0
    state = SimState(0.0, 0.0, r, z, math.nan, math.nan)
    y = _pack(state)
    out = np.empty_like(y)
    n = config.grid_n
    g, _, _ = _rhs_numpy(
        y, out, float(config.d), n, 1.0 / n, config.kind, float(z[-1]), float(r[-1]),
        config.delta_cutoff, config.relax_scale, config.relax_floor, 0.03,
    )
    state.g = g
    state.energy = _energy(r, z, config.kind, config.d)
    return state


# ---------------------------------------------------------------------------
# events and the run loop

def _make_snapshot(index, stepper: _Stepper, unresolved: bool) -> Snapshot:
    st = stepper.state(with_energy=True)
    kind = stepper.config.kind
    return Snapshot(
        index=index,
        tau=st.tau,
        t=st.t,
        g=st.g,
        r=st.r,
        u=_reconstruct_u(st.r, st.z, kind),
        z=st.z,
        origin_slope=stepper.slope_n,
        south_slope=stepper.slope_s,
        energy=st.energy,
        unresolved=unresolved,
    )


def _profile_index(snap: Snapshot, T: float) -> int:
    """Count equator crossings of the rescaled pre-blowup core profile."""
    tmt = max(T - snap.t, 1.0e-300)
    scale = math.sqrt(tmt)
    base = round(snap.u[0] / math.pi) * math.pi
    orient = 1.0 if snap.origin_slope >= 0 else -1.0
    y = snap.r / scale
    mask = (y > 0.0) & (y <= 8.0)
    if mask.sum() < 4:
        return 1
    u_loc = np.abs(orient * (snap.u[mask] - base))
    sgn = np.sign(u_loc - HALF_PI)
    count = int(np.sum(np.abs(np.diff(sgn)) > 1.0))
    return max(count, 1)


def _regress_rate(ts, slopes, T, a0, lo, hi):
    """Slope/amplitude of ln|dev| vs ln(T - t); dev = |a| sqrt(T-t) - a0."""
    ts = np.asarray(ts, dtype=float)
    slopes = np.asarray(slopes, dtype=float)
    tmt = T - ts
    keep = (tmt >= lo) & (tmt <= hi) & np.isfinite(slopes)
    if keep.sum() < 8:
        return math.nan, math.nan, math.nan, 0, 0.0
    tmt = tmt[keep]
    dev = np.abs(slopes[keep]) * np.sqrt(tmt) - a0
    good = np.abs(dev) > 0.0
    tmt, dev = tmt[good], dev[good]
    if tmt.size < 8:
        return math.nan, math.nan, math.nan, 0, 0.0
    decades = math.log10(tmt.max() / tmt.min())
    if decades < 1.5:
        return math.nan, math.nan, math.nan, int(tmt.size), decades
    lx = np.log(tmt)
    ly = np.log(np.abs(dev))
    slope, icept = np.polyfit(lx, ly, 1)
    resid = float(np.sqrt(np.mean((ly - (slope * lx + icept)) ** 2)))
    sign = 1.0 if np.median(dev) >= 0.0 else -1.0
    return float(slope), sign * math.exp(icept), resid, int(tmt.size), decades


class _PoleSeries:
    """Per-step diagnostic record used by event fits and scaling checks."""

    def __init__(self):
        self.tau = []
        self.t = []
        self.g = []
        self.a_n = []
        self.a_s = []

    def append(self, stepper: _Stepper):
        self.tau.append(stepper.tau)
        self.t.append(stepper.t)
        self.g.append(stepper.g)
        self.a_n.append(stepper.slope_n)
        self.a_s.append(stepper.slope_s)

    def slope_series(self, pole: str):
        return self.a_s if pole == "south" else self.a_n


def run(config: SimConfig, use_numba: bool = True):
    """Integrate until tau_max, t_max or quiescence.

    Returns (snapshots, events, final_state). Each dip of the Sundman
    factor below delta_cutoff opens a passage; the matching event is
    closed when g recovers above twice the cutoff (hysteresis against
    chatter) and finalized after a short post-passage window used to
    fit the emerging expanding profile. Snapshots within 10 cutoffs of
    an estimated blowup time are flagged unresolved.
    """
    state = initial_state(config)
    stepper = _Stepper(config, state, use_numba=use_numba)
    delta = config.delta_cutoff
    rec = _PoleSeries()
    rec.append(stepper)

    snapshots = [_make_snapshot(0, stepper, False)]
    events: list[BlowupEvent] = []
    shrinker_cache: dict[int, float] = {}

    def stable_slope(idx: int) -> float:
        if idx not in shrinker_cache:
            shrinker_cache[idx] = abs(find_shrinker(config.d, idx).slope)
        return shrinker_cache[idx]

    def finalize(p: dict, forced: bool) -> None:
        T = p["t_gmin"] + 0.5 * p["g_min"]
        pole = p["pole"]
        idx = _profile_index(p["entry_snapshot"], T)
        i0, i1 = p["rec_start"], p["rec_enter"]
        lam, c1, _resid, _, _ = _regress_rate(
            rec.t[i0:i1],
            rec.slope_series(pole)[i0:i1],
            T,
            stable_slope(idx),
            3.0e3 * delta,
            1.0e-2,
        )
        a_fit = math.nan
        if not forced:
            j0 = p["rec_exit"]
            ts = np.asarray(rec.t[j0:], dtype=float)
            sl = np.asarray(rec.slope_series(pole)[j0:], dtype=float)
            dt_post = ts - T
            keep = (dt_post >= 10.0 * delta) & (dt_post <= 1.0e-4) & np.isfinite(sl)
            if keep.sum() < 4:
                keep = (dt_post > 0.0) & np.isfinite(sl)
            if keep.sum() >= 2:
                a_fit = float(np.median(np.abs(sl[keep]) * np.sqrt(dt_post[keep])))
        u0_pole_before = p["u0_before"]
        u0_pole_after = p["u0_after"]
        degree = int(round((u0_pole_after - u0_pole_before) / math.pi))
        events.append(
            BlowupEvent(
                T=T,
                pole=pole,
                shrinker_index=idx,
                lambda1=lam,
                c1=c1,
                expander_A=a_fit,
                degree_change=degree,
                reliable=not forced,
                t_enter=p["t_enter"],
                t_exit=p["t_exit"],
            )
        )
        for s in snapshots:
            if abs(s.t - T) < 10.0 * delta:
                s.unresolved = True

    phase = "track"
    pending: Optional[dict] = None
    rec_start = 0
    next_rec = RECORD_DTAU
    next_snap = config.snapshot_every
    quiescent = False

    while stepper.tau < config.tau_max and stepper.t < config.t_max:
        stepper.advance()
        g = stepper.g
        if stepper.tau >= next_rec:
            rec.append(stepper)
            next_rec = stepper.tau + RECORD_DTAU

        if phase == "track":
            if g < delta:
                _, z_full, r_full = _unpack(stepper.y, stepper.n, stepper.z_end, stepper.r_end)
                u0n, _, u0s, _ = _pole_data(r_full, z_full, config.kind)
                if config.kind == 1:
                    # whichever pole owns the collapsing timescale
                    out = np.empty_like(stepper.y)
                    g_probe, a_n, a_s = _rhs_numpy(stepper.y, out, *stepper.args)
                    pole = "north" if _pole_is_north(stepper) else "south"
                else:
                    pole = "origin"
                entry_snap = _make_snapshot(len(snapshots), stepper, True)
                snapshots.append(entry_snap)
                pending = {
                    "pole": pole,
                    "t_enter": stepper.t,
                    "g_min": g,
                    "t_gmin": stepper.t,
                    "rec_start": rec_start,
                    "rec_enter": len(rec.t),
                    "entry_snapshot": entry_snap,
                    "u0_before": u0s if pole == "south" else u0n,
                }
                phase = "passage"
        elif phase == "passage":
            if g < pending["g_min"]:
                pending["g_min"] = g
                pending["t_gmin"] = stepper.t
            T_rough = pending["t_gmin"] + 0.5 * pending["g_min"]
            if g > 2.0 * delta:
                _, z_full, r_full = _unpack(stepper.y, stepper.n, stepper.z_end, stepper.r_end)
                u0n, _, u0s, _ = _pole_data(r_full, z_full, config.kind)
                pending["u0_after"] = u0s if pending["pole"] == "south" else u0n
                pending["t_exit"] = stepper.t
                pending["rec_exit"] = len(rec.t)
                pending["tau_exit"] = stepper.tau
                snapshots.append(_make_snapshot(len(snapshots), stepper, True))
                phase = "post"
            elif stepper.t - T_rough > 1.0e4 * delta:
                pending["u0_after"] = math.nan
                pending["t_exit"] = math.nan
                finalize(pending, forced=True)
                rec_start = len(rec.t)
                pending = None
                phase = "track"
        elif phase == "post":
            if g < delta or stepper.tau >= pending["tau_exit"] + POST_FIT_TAU:
                finalize(pending, forced=False)
                rec_start = pending["rec_exit"]
                pending = None
                phase = "track"
                continue  # re-examine this step in track mode next iteration

        if stepper.tau >= next_snap:
            snapshots.append(_make_snapshot(len(snapshots), stepper, phase == "passage"))
            next_snap += config.snapshot_every

        if phase == "track" and g > 10.0 and stepper.tau >= next_rec - RECORD_DTAU:
            _, z_full, r_full = _unpack(stepper.y, stepper.n, stepper.z_end, stepper.r_end)
            u_full = _reconstruct_u(r_full, z_full, config.kind)
            level = round(float(np.mean(u_full)) / math.pi) * math.pi
            if float(np.max(np.abs(u_full - level))) < 5.0e-4:
                quiescent = True
                break

    if pending is not None:
        finalize(pending, forced=phase == "passage")

    final = stepper.state(with_energy=True)
    snapshots.append(_make_snapshot(len(snapshots), stepper, phase == "passage"))
    for s in snapshots:
        for ev in events:
            if abs(s.t - ev.T) < 10.0 * delta:
                s.unresolved = True
    final.quiescent = quiescent  # type: ignore[attr-defined]
    return snapshots, events, final


def _pole_is_north(stepper: _Stepper) -> bool:
    """Recompute both pole timescales and compare (sphere only)."""
    out = np.empty_like(stepper.y)
    args = list(stepper.args)
    y = stepper.y
    n = stepper.n
    _, z, r = _unpack(y, n, stepper.z_end, stepper.r_end)
    h = 1.0 / n
    inv12h = 1.0 / (12.0 * h)
    inv12h2 = inv12h / h
    # evaluate zt on the nodes via the numpy rhs path, then compare the
    # two one-sided timescales directly
    g_min, slope_n, slope_s = _rhs_numpy(y, out, *stepper.args)
    # rebuild the two candidates: numerator/denominator at each pole
    z_x = _d1_np(z, inv12h)
    z_xx = _d2_np(z, inv12h2)
    r_x = _d1_np(r, inv12h)
    r_xx = _d2_np(r, inv12h2)
    d = args[0]
    kind = args[3]
    u = np.empty_like(z)
    u[0] = z_x[0] / r_x[0]
    u[1:n] = z[1:n] / r[1:n]
    u[n] = -z_x[n] / r_x[n]
    u_x = _d1_np(u, inv12h)
    z_rr = (z_xx * r_x - z_x * r_xx) / r_x**3
    u_r = u_x / r_x
    zt = np.zeros_like(z)
    zt[1:n] = (
        z_rr[1:n]
        + z[1:n]
        + (d - 3.0) * np.cos(r[1:n]) * u_r[1:n]
        - (d - 1.0) * np.sin(2.0 * u[1:n]) / (2.0 * np.sin(r[1:n]))
    )
    def pole_g(at_end):
        if not at_end:
            cn1 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0])
            cn2 = np.array([35.0, -104.0, 114.0, -56.0, 11.0])
            num = (cn2 @ z[:5]) * inv12h2 * r_x[0] - (cn1 @ z[:5]) * inv12h * r_xx[0]
            den = (cn2 @ zt[:5]) * inv12h2 * r_x[0] - (cn1 @ zt[:5]) * inv12h * r_xx[0]
        else:
            cn1 = np.array([3.0, -16.0, 36.0, -48.0, 25.0])
            cn2 = np.array([11.0, -56.0, 114.0, -104.0, 35.0])
            num = (cn2 @ z[-5:]) * inv12h2 * r_x[n] - (cn1 @ z[-5:]) * inv12h * r_xx[n]
            den = (cn2 @ zt[-5:]) * inv12h2 * r_x[n] - (cn1 @ zt[-5:]) * inv12h * r_xx[n]
        if den == 0.0 or abs(den) * GCAP <= abs(num):
            return GCAP
        return abs(num / den)
    return pole_g(False) <= pole_g(True)


# ---------------------------------------------------------------------------
# blowup-rate fitting

def fit_blowup_rate(
    snapshots: Sequence[Snapshot],
    T: float,
    shrinker,
    spectrum=None,
    pole: str = "origin",
    window=(0.0, 1.0e-2),
    mode_check_at: float = 3.0e-6,
) -> RateFit:
    """Fit the approach rate u_r(0, t) sqrt(T - t) = a1 + c1 (T - t)^lambda1.

    Requires at least 10 pre-blowup snapshots spanning at least three
    decades of T - t. The regression runs on ln|deviation| against
    ln(T - t), whose slope is the decay rate of the leading stable
    mode; the time derivative form of the same relation differs only
    by the known factor. When a spectrum report is supplied, the
    snapshot nearest mode_check_at is additionally compared pointwise
    with c1 (T-t)^lambda1 v1(y) on y in [0, 5], v1 normalized to unit
    origin slope, and the sup-misfit relative to the mode amplitude is
    returned in mode_residual.
    """
    pre = [
        s
        for s in snapshots
        if s.t < T and not s.unresolved and math.isfinite(_pole_slope(s, pole))
    ]
    if len(pre) < 10:
        raise PreconditionError(
            f"need at least 10 resolved pre-blowup snapshots, got {len(pre)}"
        )
    tmt = np.array([T - s.t for s in pre])
    span = math.log10(tmt.max() / tmt.min())
    if span < 3.0:
        raise PreconditionError(
            f"snapshots span {span:.2f} decades of T - t, need at least 3"
        )
    a0 = abs(shrinker.slope)
    lo, hi = window
    lam, c1, resid, n_used, decades = _regress_rate(
        [s.t for s in pre], [_pole_slope(s, pole) for s in pre], T, a0, lo, hi
    )
    if not math.isfinite(lam):
        lam2, c12, resid2, n2, dec2 = _regress_rate(
            [s.t for s in pre], [_pole_slope(s, pole) for s in pre], T, a0, 0.0, math.inf
        )
        lam, c1, resid, n_used, decades = lam2, c12, resid2, n2, dec2

    mode_resid = None
    if spectrum is not None and math.isfinite(lam):
        mode_resid = _mode_misfit(pre, T, shrinker, spectrum, lam, c1, pole, mode_check_at)
    return RateFit(lam, c1, resid, n_used, decades, mode_resid)


def _pole_slope(s: Snapshot, pole: str) -> float:
    return s.south_slope if pole == "south" else s.origin_slope


def _mode_misfit(pre, T, shrinker, spectrum, lam, c1, pole, at):
    eigs = np.asarray(spectrum.eigenvalues, dtype=float)
    pos = np.where(eigs > 1.0e-6)[0]
    if pos.size == 0:
        return None
    k = int(pos[0])
    mode = spectrum.eigenfunctions[k]
    tmt = np.array([T - s.t for s in pre])
    j = int(np.argmin(np.abs(np.log(tmt) - math.log(at))))
    snap = pre[j]
    scale = math.sqrt(T - snap.t)
    yy = np.linspace(0.0, 5.0, 201)
    u_data = np.interp(yy * scale, snap.r, snap.u)
    base = round(snap.u[0] / math.pi) * math.pi
    orient = 1.0 if _pole_slope(snap, pole) >= 0 else -1.0
    dev = orient * (u_data - base) - shrinker(yy)
    y_lo = getattr(mode, "x_min", None)
    if y_lo is None:
        y_lo = 0.05
    y_lo = max(float(y_lo), 1.0e-3)
    vnorm = float(mode(np.array([y_lo]))[0]) / y_lo
    vy = np.empty_like(yy)
    small = yy < y_lo
    vy[~small] = mode(yy[~small]) / vnorm
    vy[small] = yy[small]  # linear through the origin with unit slope
    model = abs(c1) * (T - snap.t) ** lam * vy
    dev_s = dev if np.median(dev[yy < 2.0]) >= 0 else -dev
    amp = float(np.max(np.abs(model)))
    if amp == 0.0:
        return None
    return float(np.max(np.abs(dev_s - model)) / amp)


# ---------------------------------------------------------------------------
# file formats

def write_snapshot_csv(snap: Snapshot, path: str) -> None:
    """One CSV file per snapshot: header, then one row t, r_0.., u_0.."""
    n = snap.r.size - 1
    header = (
        "t,"
        + ",".join(f"r_{i}" for i in range(n + 1))
        + ","
        + ",".join(f"u_{i}" for i in range(n + 1))
    )
    row = [snap.t] + list(snap.r) + list(snap.u)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_snapshot_csv(path: str):
    """Inverse of write_snapshot_csv: returns (t, r, u)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = np.array([float(v) for v in fh.readline().strip().split(",")])
    if len(header) != data.size or (data.size - 1) % 2 != 0:
        raise PreconditionError(f"malformed snapshot file {path!r}")
    npts = (data.size - 1) // 2
    return float(data[0]), data[1 : 1 + npts], data[1 + npts :]


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def write_events_json(events: Sequence[BlowupEvent], path: str) -> None:
    """Serialize events as a JSON array (non-finite floats become null)."""
    payload = [
        {
            "T": _json_safe(ev.T),
            "pole": ev.pole,
            "shrinker_index": ev.shrinker_index,
            "lambda1": _json_safe(ev.lambda1),
            "c1": _json_safe(ev.c1),
            "expander_A": _json_safe(ev.expander_A),
            "degree_change": ev.degree_change,
            "reliable": ev.reliable,
            "t_enter": _json_safe(ev.t_enter),
            "t_exit": _json_safe(ev.t_exit),
        }
        for ev in events
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
