"""Long-time response to weak periodic drives by harmonic superposition.

A periodic drive ``a0/2 + sum a_k cos(k W t) + b_k sin(k W t)`` produces the
order parameter

    X(t) = X0 + (a0/2) chi(0) + sum a_k Re[chi(kW) e^{ikWt}] + b_k Im[chi(kW) e^{ikWt}]

with ``chi`` from the moment system and ``chi(0)`` from a static tilt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ShortWindow
from .model import Cosine, DriveSignal, ExpEnvelope, SampledPeriodic, SquareWave, SystemParams
from .moments import TruncationOrders, susceptibility
from .stationary import _ordered_map, static_susceptibility

__all__ = [
    "HarmonicSeries",
    "Response",
    "Gain",
    "DEFAULT_HARMONICS",
    "harmonic_decompose",
    "order_parameter_response",
    "amplification_gain",
    "relative_rms",
    "jump_mask",
    "write_response_csv",
]

DEFAULT_HARMONICS = 50
DROP_RELATIVE = 1e-8


@dataclass(frozen=True)
class HarmonicSeries:
    """Fourier coefficients; ``a[k-1]``/``b[k-1]`` multiply ``cos``/``sin(k W t)``.

    ``tail_rms`` is the RMS over one period of everything beyond ``k_max``.
    """

    Omega: float
    a0: float
    a: np.ndarray
    b: np.ndarray
    tail_rms: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError("cos and sin coefficient arrays must be 1-d and equal length")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def k_max(self) -> int:
        return self.a.size

    @property
    def period(self) -> float:
        return 2 * math.pi / self.Omega

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.arange(1, self.k_max + 1)
        ph = np.multiply.outer(t, k * self.Omega)
        return self.a0 / 2 + np.cos(ph) @ self.a + np.sin(ph) @ self.b

    def __add__(self, other: "HarmonicSeries") -> "HarmonicSeries":
        if not math.isclose(self.Omega, other.Omega, rel_tol=1e-12):
            raise ValueError("series must share the fundamental frequency")
        n = max(self.k_max, other.k_max)
        pad = lambda c: np.pad(c, (0, n - c.size))
        return HarmonicSeries(
            self.Omega, self.a0 + other.a0,
            pad(self.a) + pad(other.a), pad(self.b) + pad(other.b),
            math.hypot(self.tail_rms, other.tail_rms),
        )

    def energy(self) -> float:
        """Mean square over one period (Parseval)."""
        return self.a0**2 / 4 + 0.5 * float(np.sum(self.a**2 + self.b**2))


def _mean_square(signal: DriveSignal) -> float:
    if isinstance(signal, Cosine):
        return signal.eps0**2 / 2
    if isinstance(signal, SquareWave):
        return signal.eps0**2
    if isinstance(signal, ExpEnvelope):
        dT = signal.d * signal.T0
        return signal.eps0**2 * -math.expm1(-2 * dT) / (2 * dT)
    y = np.asarray(signal.samples)
    y1 = np.roll(y, -1)
    return float(np.mean(y * y + y * y1 + y1 * y1) / 3)


def harmonic_decompose(signal: DriveSignal, k_max: int = DEFAULT_HARMONICS) -> HarmonicSeries:
    """Fourier coefficients of a drive up to harmonic ``k_max``.

    Closed forms for the square wave and the exponential envelope; the
    sampled waveform is treated as its linear interpolant, whose exact
    coefficients are the DFT times a ``sinc^2`` factor.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    k = np.arange(1, k_max + 1)
    a0 = 0.0
    a = np.zeros(k_max)
    b = np.zeros(k_max)
    if isinstance(signal, Cosine):
        a[0] = signal.eps0
        Omega = signal.Omega
    elif isinstance(signal, SquareWave):
        odd = k % 2 == 1
        b[odd] = 4 * signal.eps0 / (math.pi * k[odd])
        Omega = signal.Omega
    elif isinstance(signal, ExpEnvelope):
        Omega = signal.Omega
        d, T0 = signal.d, signal.T0
        scale = 2 * signal.eps0 * -math.expm1(-d * T0) / T0
        den = d**2 + (k * Omega) ** 2
        a0 = scale / d
        a = scale * d / den
        b = scale * k * Omega / den
    elif isinstance(signal, SampledPeriodic):
        Omega = signal.Omega
        y = np.asarray(signal.samples)
        n = y.size
        kk = np.arange(0, k_max + 1)
        # DFT at arbitrary k (k may exceed n, where it aliases)
        Y = np.exp(-2j * math.pi * np.outer(kk, np.arange(n)) / n) @ y
        c = Y / n * np.sinc(kk / n) ** 2
        a0 = 2 * c[0].real
        a = 2 * c[1:].real
        b = -2 * c[1:].imag
    else:
        raise TypeError(f"unsupported signal type {type(signal).__name__}")
    series = HarmonicSeries(Omega, a0, a, b)
    tail = max(_mean_square(signal) - series.energy(), 0.0)
    return HarmonicSeries(Omega, a0, a, b, math.sqrt(tail))


@dataclass
class Response:
    """Order parameter on ``t`` with the harmonics actually used.

    ``dropped_bound`` bounds the pointwise contribution of harmonics skipped
    for being negligible.
    """

    t: np.ndarray
    X: np.ndarray
    X0: float
    chi: dict
    chi0: Optional[float]
    dropped_bound: float

    @property
    def X1(self) -> np.ndarray:
        return self.X - self.X0


def order_parameter_response(params: SystemParams, X0: float, series: HarmonicSeries,
                             t_grid, orders: TruncationOrders = TruncationOrders(),
                             workers: int = 1) -> Response:
    """Superpose ``chi(kW)`` over the series on ``t_grid``.

    Harmonics whose ``|coefficient| * |chi|`` falls below ``1e-8`` of the
    largest such term are dropped; their summed magnitude is reported.
    """
    t = np.asarray(t_grid, dtype=float)
    X = np.full(t.shape, float(X0))
    chi0 = None
    if series.a0 != 0.0:
        chi0 = static_susceptibility(params, X0)
        X += series.a0 / 2 * chi0
    ks = [k for k in range(1, series.k_max + 1)
          if series.a[k - 1] != 0.0 or series.b[k - 1] != 0.0]
    chis = _ordered_map(
        lambda k: susceptibility(params, X0, k * series.Omega, orders).value, ks, workers
    )
    chi = dict(zip(ks, chis))
    mags = {k: math.hypot(series.a[k - 1], series.b[k - 1]) * abs(chi[k]) for k in ks}
    peak = max(mags.values(), default=0.0)
    if chi0 is not None:
        peak = max(peak, abs(series.a0 / 2 * chi0))
    dropped = 0.0
    # ascending k keeps the summation order fixed
    for k in ks:
        if mags[k] < DROP_RELATIVE * peak:
            dropped += mags[k]
            continue
        z = chi[k] * np.exp(1j * k * series.Omega * t)
        X += series.a[k - 1] * z.real + series.b[k - 1] * z.imag
    return Response(t, X, float(X0), chi, chi0, dropped)


@dataclass(frozen=True)
class Gain:
    fundamental: float
    peak_to_peak: float


def _fundamental(t, y, Omega):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < 2:
        raise ShortWindow("need at least two samples")
    dt = t[1] - t[0]
    n_per = 2 * math.pi / Omega / dt
    # literal decimal frequencies leave the grid a hair short of whole periods
    n_periods = int(math.floor(t.size / n_per + 1e-6))
    if n_periods < 1:
        raise ShortWindow("response shorter than one drive period")
    n = min(int(round(n_periods * n_per)), t.size)
    return abs(2.0 * np.mean(y[:n] * np.exp(-1j * Omega * t[:n])))


def amplification_gain(series: HarmonicSeries, t, response, Omega: Optional[float] = None) -> Gain:
    """Fundamental-amplitude ratio of response to input.

    ``t`` must be uniform and cover at least one whole period.  The input's
    fundamental comes from the series; the peak-to-peak ratio compares the
    response with the series evaluated on the same grid.
    """
    Omega = series.Omega if Omega is None else Omega
    out = _fundamental(t, response, Omega)
    inp = math.hypot(series.a[0], series.b[0])
    if inp == 0.0:
        raise ValueError("input has no fundamental component")
    u = series(np.asarray(t, dtype=float))
    r = np.asarray(response, dtype=float)
    ptp_in = float(np.ptp(u))
    ptp = float(np.ptp(r)) / ptp_in if ptp_in > 0 else float("nan")
    return Gain(out / inp, ptp)


def jump_mask(t, signal: DriveSignal, width: float) -> np.ndarray:
    """True away from the discontinuities of a square wave or envelope."""
    t = np.asarray(t, dtype=float)
    if isinstance(signal, SquareWave):
        half = math.pi / signal.Omega
        r = np.mod(t, half)
    elif isinstance(signal, ExpEnvelope):
        half = signal.T0
        r = np.mod(t, half)
    else:
        return np.ones(t.shape, dtype=bool)
    return np.minimum(r, half - r) > width / 2


def relative_rms(reference, other, baseline: float = 0.0, mask=None) -> float:
    """RMS of ``other - reference`` over the RMS of ``reference - baseline``."""
    ref = np.asarray(reference, dtype=float)
    oth = np.asarray(other, dtype=float)
    if mask is not None:
        ref, oth = ref[mask], oth[mask]
    return float(np.sqrt(np.mean((oth - ref) ** 2)) / np.sqrt(np.mean((ref - baseline) ** 2)))


def write_response_csv(t, inp, response, fh, comment: Optional[str] = None,
                       gain: Optional[float] = None):
    """CSV of input and response; a constant ``gain`` column is added when given."""
    if comment:
        fh.write(f"# {comment}\n")
    if gain is None:
        fh.write("t,input,response\n")
        for row in zip(t, inp, response):
            fh.write("{:.12g},{:.12g},{:.12g}\n".format(*row))
        return
    fh.write("t,input,response,gain\n")
    for row in zip(t, inp, response):
        fh.write("{:.12g},{:.12g},{:.12g},{:.8g}\n".format(*row, gain))
