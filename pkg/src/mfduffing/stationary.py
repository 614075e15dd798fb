"""Stationary state of the mean-field model.

The stationary density factorizes into ``exp(-v**2/2D)`` times a position
weight; only the position factor needs quadrature.  The equilibrium order
parameter is a fixed point of ``g(X0) = <x>`` taken under that weight.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import bisect

from .errors import BracketFailure, ConvergenceFailure, MFDuffingError, QuadratureFailure
from .model import SystemParams, stationary_x_exponent

__all__ = [
    "MomentTable",
    "Branch",
    "EquilibriumSet",
    "SweepCurve",
    "moment_table",
    "quadrature_rule",
    "stationary_moment",
    "self_consistency_map",
    "self_consistency_slope",
    "solve_equilibria",
    "relax_to_equilibrium",
    "bifurcation_sweep",
    "critical_condition",
    "critical_parameter",
    "static_susceptibility",
    "static_susceptibility_formula",
]

QUAD_RTOL = 1e-10
START_NODES = 200
MAX_NODES = 200 * 2**6
# tail cut: integrand at +-L below this fraction of its peak
TAIL_FRACTION = 1e-16


@lru_cache(maxsize=16)
def _legendre(n):
    return np.polynomial.legendre.leggauss(n)


@dataclass(frozen=True)
class MomentTable:
    """Normalized stationary moments ``<x^n>`` for ``n = 0..n_max``."""

    X0: float
    moments: np.ndarray
    n_max: int
    half_width: float
    nodes: int
    tilt: float = 0.0

    def __getitem__(self, n):
        return self.moments[n]

    @property
    def variance(self) -> float:
        return float(self.moments[2] - self.moments[1] ** 2)


def _half_width(params, X0, tilt, n_max):
    log_tail = math.log(TAIL_FRACTION)
    L = max(2.0 * params.well, 4.0 * (params.D / params.b) ** 0.25, 1.0)
    for _ in range(60):
        xs = np.linspace(-L, L, 4001)
        with np.errstate(divide="ignore"):
            logf = n_max * np.log(np.abs(xs)) + stationary_x_exponent(xs, params, X0, tilt)
        peak = logf.max()
        if logf[0] - peak < log_tail and logf[-1] - peak < log_tail:
            return L
        L *= 1.5
    raise QuadratureFailure(f"could not bound the integration domain for {params}")


def _raw_moments(params, X0, tilt, n_max, L, n_nodes, shift=0.0, scale=1.0):
    t, w = _legendre(n_nodes)
    xs = L * t
    expo = stationary_x_exponent(xs, params, X0, tilt)
    dens = w * np.exp(expo - expo.max())
    powers = ((xs - shift) / scale)[:, None] ** np.arange(n_max + 1)
    raw = dens @ powers
    absolute = dens @ np.abs(powers)
    return raw / raw[0], absolute / raw[0]


def moment_table(params: SystemParams, X0: float, n_max: int, tilt: float = 0.0,
                 rtol: float = QUAD_RTOL) -> MomentTable:
    """Gauss-Legendre moments on ``[-L, L]`` with node doubling until the
    relative change (against ``<|x|^n>``) drops below ``rtol``."""
    n_max = max(int(n_max), 2)
    L = _half_width(params, X0, tilt, n_max)
    cur, n = _converged(params, X0, tilt, n_max, L, rtol, 0.0, 1.0)
    return MomentTable(float(X0), cur, n_max, L, n, tilt)


def _converged(params, X0, tilt, n_max, L, rtol, shift, scale):
    n = START_NODES
    prev, _ = _raw_moments(params, X0, tilt, n_max, L, n, shift, scale)
    while n < MAX_NODES:
        n *= 2
        cur, size = _raw_moments(params, X0, tilt, n_max, L, n, shift, scale)
        if np.all(np.abs(cur - prev) <= rtol * size):
            cur[0] = 1.0
            return cur, n
        prev = cur
    raise QuadratureFailure(
        f"moments up to order {n_max} did not settle to rtol={rtol} with {n} nodes"
    )


def quadrature_rule(params: SystemParams, X0: float, degree: int, tilt: float = 0.0):
    """Nodes and probability weights that integrate polynomials up to
    ``degree`` against the stationary position density at moment accuracy."""
    table = moment_table(params, X0, degree, tilt)
    t, w = _legendre(table.nodes)
    xs = table.half_width * t
    expo = stationary_x_exponent(xs, params, X0, tilt)
    dens = w * np.exp(expo - expo.max())
    return xs, dens / dens.sum()


def stationary_moment(n: int, params: SystemParams, X0: float = 0.0) -> float:
    if n < 0:
        raise ValueError("moment order must be nonnegative")
    return float(moment_table(params, X0, n)[n])


def _map_and_slope(params, X0, tilt=0.0):
    m = moment_table(params, X0, 2, tilt)
    return float(m[1]), params.mu / params.D * m.variance


def self_consistency_map(params: SystemParams, X0: float, tilt: float = 0.0) -> float:
    """``g(X0)``: the mean position under the weight built with trial ``X0``."""
    return _map_and_slope(params, X0, tilt)[0]


def self_consistency_slope(params: SystemParams, X0: float, tilt: float = 0.0) -> float:
    """``dg/dX0 = (mu/D) Var(x)``, from differentiating under the integral."""
    return _map_and_slope(params, X0, tilt)[1]


@dataclass(frozen=True)
class Branch:
    X0: float
    stable: bool
    slope: float


@dataclass(frozen=True)
class EquilibriumSet:
    branches: tuple
    params: SystemParams

    @property
    def stable(self):
        return [b for b in self.branches if b.stable]

    def values(self, stable_only=False):
        return [b.X0 for b in (self.stable if stable_only else self.branches)]

    def select(self, policy="nonnegative") -> Branch:
        """Pick one stable branch: ``nonnegative`` (default), ``positive``
        or ``negative``."""
        stable = sorted(self.stable, key=lambda b: b.X0)
        if not stable:
            raise ConvergenceFailure("no stable equilibrium found")
        if policy == "negative":
            return stable[0]
        if policy in ("nonnegative", "positive"):
            return stable[-1]
        raise ValueError(f"unknown branch policy {policy!r}")


def relax_to_equilibrium(params: SystemParams, seed: float, tilt: float = 0.0,
                         damping: float = 0.5, tol: float = 1e-10,
                         max_iter: int = 500) -> float:
    """Damped fixed-point iteration ``X <- (1-lam) X + lam g(X)``.

    A Newton step on ``g(X) - X`` (with the analytic slope) replaces the
    damped step whenever it reduces the residual more; near the pitchfork the
    damped map alone contracts too slowly to reach ``tol``.
    """
    x = float(seed)
    g, slope = _map_and_slope(params, x, tilt)
    for _ in range(max_iter):
        r = g - x
        if abs(r) < tol:
            return x
        candidates = [x + damping * r]
        if abs(1.0 - slope) > 1e-12:
            candidates.insert(0, x + r / (1.0 - slope))
        best = None
        for cand in candidates:
            g_c, s_c = _map_and_slope(params, cand, tilt)
            if best is None or abs(g_c - cand) < abs(best[1] - best[0]):
                best = (cand, g_c, s_c)
            if abs(g_c - cand) < abs(r):
                break
        x, g, slope = best
    raise ConvergenceFailure(f"fixed-point iteration did not converge from seed {seed}")


def solve_equilibria(params: SystemParams, tilt: float = 0.0, damping: float = 0.5,
                     tol: float = 1e-10, max_iter: int = 500) -> EquilibriumSet:
    """All equilibria reachable from the seeds ``0, +well, -well``.

    A branch is stable iff ``dg/dX0 < 1`` there.
    """
    s = params.well
    found = []
    for seed in (0.0, s, -s):
        x = relax_to_equilibrium(params, seed, tilt, damping, tol, max_iter)
        if all(abs(x - y) > 1e-7 for y in found):
            found.append(x)
    branches = []
    for x in sorted(found, reverse=True):
        slope = self_consistency_slope(params, x, tilt)
        branches.append(Branch(x, slope < 1.0, slope))
    return EquilibriumSet(tuple(branches), params)


@dataclass
class SweepCurve:
    """Ordered sweep results.

    ``rows[i]`` holds the observables at ``values[i]``; ``None`` marks an
    absent entry.  Points that raised are listed in ``errors`` by index.
    """

    axis: str
    values: list
    rows: list
    observable: str
    columns: tuple
    errors: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.values) < 2:
            raise ValueError("a sweep needs at least two points")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("sweep axis values must be strictly increasing")

    def column(self, name):
        j = self.columns.index(name)
        return np.array([np.nan if r is None or r[j] is None else r[j] for r in self.rows])

    def to_csv(self, fh=None, comment=None) -> str:
        buf = io.StringIO()
        if comment:
            buf.write(f"# {comment}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("axis",) + tuple(self.columns))
        for value, row in zip(self.values, self.rows):
            cells = [_fmt(value)]
            for j in range(len(self.columns)):
                cells.append("" if row is None or row[j] is None else _fmt(row[j]))
            writer.writerow(cells)
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def _fmt(x):
    return f"{x:.12g}"


def read_sweep_csv(text: str) -> tuple:
    """Parse a sweep CSV back into ``(header, rows)`` with floats/None."""
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    rows = [[float(c) if c else None for c in row] for row in reader]
    return header, rows


def _param_at(params, axis, value):
    if axis not in ("D", "mu", "gamma", "a", "b"):
        raise ValueError(f"cannot sweep axis {axis!r}")
    return params.with_(**{axis: float(value)})


def _ordered_map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _guarded(fn):
    def wrapped(item):
        try:
            return fn(item), None
        except MFDuffingError as exc:
            return None, f"{type(exc).__name__}: {exc}"
    return wrapped


def bifurcation_sweep(params: SystemParams, axis: str, values, *,
                      include_unstable: bool = False, workers: int = 1) -> SweepCurve:
    """Equilibrium order parameter(s) along ``axis`` (``D`` or ``mu``)."""
    if axis not in ("D", "mu"):
        raise ValueError("bifurcation sweeps run along D or mu")
    values = [float(v) for v in values]

    def point(value):
        eq = solve_equilibria(_param_at(params, axis, value))
        xs = eq.values(stable_only=not include_unstable)
        return tuple(xs) + (None,) * (3 - len(xs))

    results = _ordered_map(_guarded(point), values, workers)
    rows = [r for r, _ in results]
    errors = {i: e for i, (_, e) in enumerate(results) if e}
    return SweepCurve(axis, values, rows, "X0", ("branch_1", "branch_2", "branch_3"), errors)


def critical_condition(params: SystemParams) -> float:
    """``dg/dX0`` at ``X0 = 0`` minus one; zero at the pitchfork."""
    return params.mu / params.D * stationary_moment(2, params, 0.0) - 1.0


DEFAULT_BRACKETS = {"D": (1e-3, 10.0), "mu": (0.0, 10.0)}


def critical_parameter(params: SystemParams, axis: str, bracket=None,
                       xtol: float = 1e-5) -> float:
    """Pitchfork location along ``D`` or ``mu`` by bisection on
    ``(mu/D) <x^2>_0 = 1``."""
    if axis not in DEFAULT_BRACKETS:
        raise ValueError("critical parameter is searched along D or mu")
    lo, hi = bracket if bracket is not None else DEFAULT_BRACKETS[axis]
    if axis == "D":
        lo = max(lo, 1e-6)

    def f(value):
        return critical_condition(_param_at(params, axis, value))

    f_lo, f_hi = f(lo), f(hi)
    if f_lo * f_hi > 0:
        raise BracketFailure(
            f"no pitchfork along {axis} in [{lo}, {hi}] (condition {f_lo:.3g}, {f_hi:.3g})"
        )
    # bisect's xtol is an interval width; halve it for an absolute bound on the root
    return float(bisect(f, lo, hi, xtol=xtol / 2))


def static_susceptibility(params: SystemParams, X0: float, h: float = 1e-4) -> float:
    """``chi(0)`` by a central difference of the equilibrium under a constant
    tilt force ``+-h`` added to the drift."""
    plus = relax_to_equilibrium(params, X0, tilt=h)
    minus = relax_to_equilibrium(params, X0, tilt=-h)
    return (plus - minus) / (2 * h)


def static_susceptibility_formula(params: SystemParams, X0: float) -> float:
    """Fluctuation form ``(Var/D) / (1 - mu Var/D)``, for cross-checks."""
    r = moment_table(params, X0, 2).variance / params.D
    return r / (1 - params.mu * r)
