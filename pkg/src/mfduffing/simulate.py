"""Euler-Maruyama simulation of the coupled ensemble and estimators built on it.

All runs draw their Gaussian increments from a single counter-based Philox
stream keyed by the master seed, one ``(M,)`` block per step, so a run is a
pure function of ``(seed, M, dt, ...)``.  Initial conditions come from a
second stream of the same key.  The ensemble mean is a numpy pairwise sum,
which is deterministic for a fixed array length.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from .errors import Divergence, EmptyBinsWarning, ShortWindow
from .model import DriveSignal, SystemParams
from .stationary import quadrature_rule, solve_equilibria

__all__ = [
    "SimConfig",
    "Trajectory",
    "Ensemble",
    "SAFEstimate",
    "HSeries",
    "KKEstimate",
    "make_rng",
    "initial_state",
    "network_coupling",
    "simulate_mean_field",
    "simulate_network",
    "empirical_saf",
    "log_q",
    "h_estimate",
    "h_functional_monitor",
    "connected_autocorrelation",
    "klein_kramers_response",
    "autocorrelation_susceptibility",
    "write_trajectory_csv",
    "write_h_csv",
    "write_sidecar",
]

DIVERGENCE_BOUND = 1e6
_CHECK_EVERY = 25


@dataclass(frozen=True)
class SimConfig:
    """Integration and ensemble settings.

    ``init`` is one of ``"well"`` (all members at ``sign * sqrt(a/b)``),
    ``"stationary"`` (positions drawn from the stationary density at
    ``X_init``, velocities from N(0, D)) or ``"point"`` (a Gaussian cloud of
    width ``spread`` around ``(x_init, v_init)``).  With ``closure="frozen"``
    the field is held at ``X_frozen`` instead of the running ensemble mean.
    """

    dt: float = 0.01
    t_transient: float = 100.0
    t_measure: float = 200.0
    size: int = 10_000
    seed: int = 0
    init: str = "well"
    sign: float = 1.0
    x_init: float = 0.0
    v_init: float = 0.0
    spread: float = 0.0
    X_init: Optional[float] = None
    record_every: int = 1
    closure: str = "mean"
    X_frozen: float = 0.0

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if self.t_transient < 0 or self.t_measure <= 0:
            raise ValueError("t_transient must be >= 0 and t_measure > 0")
        if self.size < 1:
            raise ValueError("size must be >= 1")
        if self.init not in ("well", "stationary", "point"):
            raise ValueError(f"unknown init policy {self.init!r}")
        if self.closure not in ("mean", "frozen"):
            raise ValueError(f"unknown closure {self.closure!r}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.spread < 0:
            raise ValueError("spread must be nonnegative")

    def transient_steps(self) -> int:
        return int(round(self.t_transient / self.dt))

    def measure_steps(self, period: Optional[float] = None) -> int:
        """Steps in the measurement window, rounded up to whole periods."""
        if period is None:
            return int(math.ceil(self.t_measure / self.dt - 1e-9))
        n_periods = max(1, math.ceil(self.t_measure / period - 1e-9))
        return int(round(n_periods * period / self.dt))

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class Trajectory:
    """Order parameter sampled every ``dt`` starting at ``t0``."""

    dt: float
    t0: float
    X: np.ndarray
    x_final: Optional[np.ndarray] = None
    v_final: Optional[np.ndarray] = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if not np.all(np.isfinite(self.X)):
            raise Divergence("trajectory contains non-finite values")

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.X.size)

    def __len__(self):
        return self.X.size


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator; ``stream`` separates independent uses of one seed."""
    return np.random.Generator(np.random.Philox(key=[int(seed) % 2**64, int(stream)]))


def _stationary_positions(params, X0, n, rng):
    nodes, w = quadrature_rule(params, X0, 2)
    order = np.argsort(nodes)
    cdf = np.cumsum(w[order])
    return np.interp(rng.random(n) * cdf[-1], cdf, nodes[order])


def initial_state(params: SystemParams, cfg: SimConfig):
    """Initial ``(x, v)`` arrays drawn from the init stream of the seed."""
    n = cfg.size
    rng = make_rng(cfg.seed, stream=1)
    if cfg.init == "well":
        return np.full(n, cfg.sign * params.well), np.zeros(n)
    if cfg.init == "point":
        x = cfg.x_init + cfg.spread * rng.standard_normal(n)
        v = cfg.v_init + cfg.spread * rng.standard_normal(n)
        return x, v
    X0 = cfg.X_init
    if X0 is None:
        X0 = solve_equilibria(params).select("positive" if cfg.sign > 0 else "negative").X0
    x = _stationary_positions(params, X0, n, rng)
    v = math.sqrt(params.D) * rng.standard_normal(n)
    return x, v


def network_coupling(x: np.ndarray, mu: float) -> np.ndarray:
    """Explicit all-to-all term ``(mu/N) * sum_j (x_j - x_i)``."""
    n = x.size
    return (mu / n) * (np.sum(x) - n * x)


class Ensemble:
    """Mutable ensemble state plus the noise stream that advances it.

    ``coupling`` is ``None`` for the mean-field closure (running mean or a
    frozen field per ``cfg.closure``), or a callable ``x -> force`` for an
    explicit network.
    """

    def __init__(self, params: SystemParams, cfg: SimConfig,
                 signal: Optional[DriveSignal] = None,
                 coupling: Optional[Callable[[np.ndarray], np.ndarray]] = None):
        self.params = params
        self.cfg = cfg
        self.signal = signal
        self.coupling = coupling
        self.x, self.v = initial_state(params, cfg)
        self.rng = make_rng(cfg.seed, stream=0)
        self.step_index = 0
        self._sigma = math.sqrt(2.0 * params.gamma * params.D * cfg.dt)
        self._force = np.empty(cfg.size)

    @property
    def t(self) -> float:
        return self.step_index * self.cfg.dt

    def mean(self) -> float:
        return float(np.sum(self.x) / self.x.size)

    def field(self) -> float:
        return self.mean() if self.cfg.closure == "mean" else self.cfg.X_frozen

    def step(self):
        p, dt = self.params, self.cfg.dt
        x, v, f = self.x, self.v, self._force
        t = self.t
        # position first, then the velocity kick at the updated position
        x += v * dt
        if self.coupling is None:
            # (a - mu) x - b x^3 + mu X
            np.multiply(x, x, out=f)
            f *= -p.b
            f += p.a - p.mu
            f *= x
            f += p.mu * self.field()
        else:
            f[:] = (p.a - p.b * x * x) * x + self.coupling(x)
        f -= p.gamma * v
        if self.signal is not None:
            f += float(self.signal(t))
        v += f * dt
        v += self._sigma * self.noise()
        self.step_index += 1
        if self.step_index % _CHECK_EVERY == 0:
            self.check()

    def noise(self) -> np.ndarray:
        """Standard normal increments for one step."""
        return self.rng.standard_normal(self.x.size)

    def check(self):
        if not np.all(np.abs(self.x) <= DIVERGENCE_BOUND):
            raise Divergence(f"|x| exceeded {DIVERGENCE_BOUND:g} by t={self.t:.6g}")

    def advance(self, n_steps: int):
        for _ in range(n_steps):
            self.step()
        self.check()

    def record(self, n_steps: int, every: int = 1, members: bool = False):
        """Advance while sampling the mean (and optionally every member)."""
        n_rec = n_steps // every
        out = np.empty(n_rec)
        traces = np.empty((n_rec, self.x.size)) if members else None
        for k in range(n_rec):
            out[k] = self.mean()
            if members:
                traces[k] = self.x
            self.advance(every)
        self.advance(n_steps - n_rec * every)
        return out, traces


def _run(params, signal, cfg, coupling):
    ens = Ensemble(params, cfg, signal, coupling)
    period = getattr(signal, "period", None) if signal is not None else None
    ens.advance(cfg.transient_steps())
    t0 = ens.t
    X, _ = ens.record(cfg.measure_steps(period), cfg.record_every)
    return Trajectory(cfg.dt * cfg.record_every, t0, X, ens.x.copy(), ens.v.copy())


def simulate_mean_field(params: SystemParams, signal: Optional[DriveSignal],
                        cfg: SimConfig) -> Trajectory:
    """Ensemble of ``cfg.size`` copies driven by their own running mean.

    The returned trajectory covers only the measurement window, which is
    rounded up to whole drive periods.
    """
    return _run(params, signal, cfg, None)


def simulate_network(params: SystemParams, signal: Optional[DriveSignal],
                     cfg: SimConfig) -> Trajectory:
    """Explicit network of ``cfg.size`` oscillators with all-to-all coupling."""
    if cfg.size < 2:
        raise ValueError("a network needs at least 2 oscillators")
    mu = params.mu
    return _run(params, signal, cfg, lambda x: network_coupling(x, mu))


# spectral amplification from a driven run


@dataclass(frozen=True)
class SAFEstimate:
    saf: float
    stderr: float
    chi: complex
    n_blocks: int


def empirical_saf(traj: Trajectory, Omega: float, eps0: float,
                  min_blocks: int = 8) -> SAFEstimate:
    """Estimate ``|A/eps0|^2`` with ``A = (2/T) int X exp(-i Omega t) dt``.

    The window is cut to whole periods, one block per period; the standard
    error propagates the block scatter of A along its own direction.
    ``chi = A / eps0`` is the gain in the ``Re[chi exp(i Omega t)]`` sense.
    """
    if eps0 <= 0:
        raise ValueError("eps0 must be positive")
    per = 2 * math.pi / Omega / traj.dt
    n_blocks = int(math.floor(traj.X.size / per + 1e-6))
    if n_blocks < min_blocks:
        raise ShortWindow(f"{n_blocks} whole periods in window, need {min_blocks}")
    z = traj.X * np.exp(-1j * Omega * traj.t)
    edges = np.minimum(np.round(np.arange(n_blocks + 1) * per).astype(int), traj.X.size)
    blocks = np.array([2.0 * z[i:j].mean() for i, j in zip(edges[:-1], edges[1:])])
    A = blocks.mean()
    u = A / abs(A) if abs(A) > 0 else 1.0
    se_abs = (blocks * np.conj(u)).real.std(ddof=1) / math.sqrt(n_blocks)
    return SAFEstimate(abs(A) ** 2 / eps0**2, 2 * abs(A) * se_abs / eps0**2,
                       complex(A / eps0), n_blocks)


# H functional


def log_q(x, v, X, params: SystemParams):
    """Log of the unnormalized reference density Q at mean field ``X``."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    p = params
    return (
        -p.b * x**4 / 4 + (p.a - p.mu) * x**2 / 2 + p.mu * X * x - v**2 / 2 - p.mu * X**2 / 2
    ) / p.D


def h_estimate(x: np.ndarray, v: np.ndarray, X: float, params: SystemParams,
               bins: int = 128, span: float = 4.0):
    """Histogram estimate of ``int P ln(P/Q)``.

    Returns ``(H, stderr, sparse_mass)``.  The grid spans ``+-span`` sample
    standard deviations around the sample mean; samples outside it are
    dropped and the kept mass renormalized.  The plug-in entropy carries the
    Miller-Madow correction, and ``sparse_mass`` is the fraction of samples
    in cells holding fewer than 10.
    """
    sx = max(float(x.std()), 1e-12)
    sv = max(float(v.std()), 1e-12)
    xe = np.linspace(x.mean() - span * sx, x.mean() + span * sx, bins + 1)
    ve = np.linspace(v.mean() - span * sv, v.mean() + span * sv, bins + 1)
    counts, _, _ = np.histogram2d(x, v, bins=(xe, ve))
    kept = counts.sum()
    occ = counts > 0
    pk = counts[occ] / kept
    cell = (xe[1] - xe[0]) * (ve[1] - ve[0])
    xc = 0.5 * (xe[1:] + xe[:-1])
    vc = 0.5 * (ve[1:] + ve[:-1])
    r = np.log(pk / cell) - log_q(xc[:, None], vc[None, :], X, params)[occ]
    mean_r = float(np.sum(pk * r))
    H = mean_r - (occ.sum() - 1) / (2 * kept)
    var = max(float(np.sum(pk * r * r)) - mean_r**2, 0.0)
    sparse = float(counts[occ & (counts < 10)].sum() / kept)
    return H, math.sqrt(var / kept), sparse


@dataclass
class HSeries:
    t: np.ndarray
    H: np.ndarray
    noise_band: np.ndarray
    violation_fraction: float
    n_violations: int


def h_functional_monitor(params: SystemParams, cfg: SimConfig, t_end: float,
                         sample_every: float = 0.5, bins: int = 128,
                         span: float = 4.0, band_sigmas: float = 2.0) -> HSeries:
    """Track the H functional of an undriven ensemble from ``t=0`` to ``t_end``.

    Q is evaluated from the current ensemble mean.  A step counts as a
    violation when H rises by more than the combined noise band of its two
    endpoints, each band being ``band_sigmas`` standard errors.
    """
    ens = Ensemble(params, cfg)
    stride = max(1, int(round(sample_every / cfg.dt)))
    n_samples = int(round(t_end / (stride * cfg.dt))) + 1
    ts, Hs, bands = np.empty(n_samples), np.empty(n_samples), np.empty(n_samples)
    warned = False
    for k in range(n_samples):
        H, se, sparse = h_estimate(ens.x, ens.v, ens.mean(), params, bins, span)
        if sparse > 0.5 and not warned:
            warnings.warn(
                f"{sparse:.0%} of the samples sit in bins holding fewer than 10",
                EmptyBinsWarning,
                stacklevel=2,
            )
            warned = True
        ts[k], Hs[k], bands[k] = ens.t, H, band_sigmas * se
        if k < n_samples - 1:
            ens.advance(stride)
    rises = np.diff(Hs) > np.hypot(bands[1:], bands[:-1])
    nv = int(rises.sum())
    return HSeries(ts, Hs, bands, nv / max(1, rises.size), nv)


# Klein-Kramers route to the susceptibility


def connected_autocorrelation(traces: np.ndarray, max_lag: int) -> np.ndarray:
    """``<dx(t) dx(0)>`` averaged over members (columns) and time origins."""
    traces = np.asarray(traces, dtype=float)
    if traces.ndim == 1:
        traces = traces[:, None]
    n = traces.shape[0]
    if max_lag >= n:
        raise ShortWindow("lag window longer than the record")
    d = traces - traces.mean()
    nfft = 1 << int(math.ceil(math.log2(2 * n)))
    f = np.fft.rfft(d, n=nfft, axis=0)
    acf = np.fft.irfft(f * np.conj(f), n=nfft, axis=0)[: max_lag + 1]
    acf /= (n - np.arange(max_lag + 1))[:, None]
    return acf.mean(axis=1)


def klein_kramers_response(K: np.ndarray, dt: float, D: float, Omega: float) -> complex:
    """``(1/D) [K(0) - i Omega int_0^T K(t) exp(-i Omega t) dt]`` by trapezoid."""
    t = dt * np.arange(K.size)
    g = K * np.exp(-1j * Omega * t)
    integral = dt * (g.sum() - 0.5 * (g[0] + g[-1]))
    return complex((K[0] - 1j * Omega * integral) / D)


@dataclass(frozen=True)
class KKEstimate:
    chi: complex
    response: complex
    cutoff: float
    X0: float


def autocorrelation_susceptibility(params: SystemParams, Omega: float, cfg: SimConfig,
                                   X0: Optional[float] = None, batches: int = 8,
                                   max_lag_time: float = 100.0,
                                   noise_sigmas: float = 3.0) -> KKEstimate:
    """Susceptibility from stationary fluctuations via ``chi = R/(1 - mu R)``.

    Members run with the field frozen at the equilibrium ``X0`` so the
    correlation is that of one oscillator in a fixed field.  The members are
    split into ``batches`` independent groups; the correlation is cut after
    the last lag where its magnitude exceeds ``noise_sigmas`` batch standard
    errors.
    """
    if X0 is None:
        X0 = solve_equilibria(params).select("nonnegative").X0
    rec_dt = cfg.dt * cfg.record_every
    max_lag = int(round(max_lag_time / rec_dt))
    per_batch = max(1, cfg.size // batches)
    Ks = []
    for j in range(batches):
        sub = SimConfig(**{**cfg.as_dict(), "size": per_batch, "seed": cfg.seed + j,
                           "init": "stationary", "X_init": X0, "closure": "frozen",
                           "X_frozen": X0})
        ens = Ensemble(params, sub)
        ens.advance(sub.transient_steps())
        _, traces = ens.record(sub.measure_steps(), sub.record_every, members=True)
        Ks.append(connected_autocorrelation(traces, max_lag))
    Ks = np.array(Ks)
    K = Ks.mean(axis=0)
    se = Ks.std(axis=0, ddof=1) / math.sqrt(batches) if batches > 1 else np.zeros_like(K)
    above = np.nonzero(np.abs(K) > noise_sigmas * se)[0]
    last = int(above[-1]) if above.size else 0
    if last >= max_lag - 1:
        raise ShortWindow("correlation has not decayed into noise within the lag window")
    R = klein_kramers_response(K[: last + 2], rec_dt, params.D, Omega)
    return KKEstimate(R / (1 - params.mu * R), R, (last + 1) * rec_dt, float(X0))


# output


def write_trajectory_csv(traj: Trajectory, fh, comment: Optional[str] = None):
    if comment:
        fh.write(f"# {comment}\n")
    fh.write("t,X\n")
    for t, X in zip(traj.t, traj.X):
        fh.write(f"{t:.12g},{X:.12g}\n")


def write_h_csv(series: HSeries, fh, comment: Optional[str] = None):
    if comment:
        fh.write(f"# {comment}\n")
    fh.write("t,H,noise_band\n")
    for t, H, b in zip(series.t, series.H, series.noise_band):
        fh.write(f"{t:.12g},{H:.12g},{b:.12g}\n")


def write_sidecar(path, params: SystemParams, cfg: SimConfig, **extra):
    """JSON with the full configuration, seed included."""
    payload = {"params": params.as_dict(), "config": cfg.as_dict(), **extra}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
