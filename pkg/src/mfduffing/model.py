"""Physical parameters, weak drive signals and pointwise model functions.

Noise convention: every part of the package uses Langevin noise with
variance ``2*gamma*D`` per unit time on the velocity equation.  This is the
convention under which the Fokker-Planck operator carries ``gamma*D`` as its
velocity diffusion and the stationary velocity marginal is ``exp(-v**2/2D)``
(so ``Var(v) = D``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

__all__ = [
    "SystemParams",
    "Cosine",
    "SquareWave",
    "ExpEnvelope",
    "SampledPeriodic",
    "DriveSignal",
    "WEAK_AMPLITUDE",
    "drift_force",
    "effective_potential",
    "stationary_x_exponent",
    "stationary_x_weight",
    "evaluate_drive",
    "check_weak",
]

# heuristic linear-response ceiling, not a model constant
WEAK_AMPLITUDE = 0.1


@dataclass(frozen=True)
class SystemParams:
    """Constants of the mean-field Duffing model.

    ``a``/``b`` are the linear and cubic stiffness, ``gamma`` the damping,
    ``mu`` the mean-field coupling and ``D`` the noise intensity.
    """

    a: float = 1.0
    b: float = 1.0
    gamma: float = 0.4
    mu: float = 0.2
    D: float = 0.15

    def __post_init__(self):
        for name in ("a", "b", "gamma", "D"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value!r}")
        if not (math.isfinite(self.mu) and self.mu >= 0):
            raise ValueError(f"mu must be nonnegative, got {self.mu!r}")

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    @property
    def well(self) -> float:
        """Position of the deterministic single-oscillator well, sqrt(a/b)."""
        return math.sqrt(self.a / self.b)

    def as_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "gamma": self.gamma, "mu": self.mu, "D": self.D}


def _positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be positive, got {value!r}")


@dataclass(frozen=True)
class Cosine:
    eps0: float
    Omega: float

    def __post_init__(self):
        if self.eps0 < 0:
            raise ValueError("eps0 must be nonnegative")
        _positive("Omega", self.Omega)

    @property
    def period(self) -> float:
        return 2 * math.pi / self.Omega

    @property
    def amplitude(self) -> float:
        return self.eps0

    def __call__(self, t):
        return self.eps0 * np.cos(self.Omega * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class SquareWave:
    """Telegraph signal: +eps0 on the first half period, -eps0 on the second."""

    eps0: float
    Omega: float

    def __post_init__(self):
        if self.eps0 < 0:
            raise ValueError("eps0 must be nonnegative")
        _positive("Omega", self.Omega)

    @property
    def period(self) -> float:
        return 2 * math.pi / self.Omega

    @property
    def amplitude(self) -> float:
        return self.eps0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        half = np.floor(t * self.Omega / math.pi)
        return np.where(np.mod(half, 2) == 0, self.eps0, -self.eps0)


@dataclass(frozen=True)
class ExpEnvelope:
    """Periodic one-sided decaying impulse ``eps0 * exp(-d * mod(t, T0))``."""

    eps0: float
    d: float
    T0: float

    def __post_init__(self):
        if self.eps0 < 0:
            raise ValueError("eps0 must be nonnegative")
        _positive("d", self.d)
        _positive("T0", self.T0)

    @property
    def period(self) -> float:
        return self.T0

    @property
    def Omega(self) -> float:
        return 2 * math.pi / self.T0

    @property
    def amplitude(self) -> float:
        return self.eps0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.eps0 * np.exp(-self.d * np.mod(t, self.T0))


@dataclass(frozen=True)
class SampledPeriodic:
    """One period of a signal given on a uniform grid, linearly interpolated.

    Sample ``j`` sits at time ``j * T0 / len(samples)``; the waveform wraps
    from the last sample back to the first.
    """

    samples: tuple = field(default=())
    T0: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(float(s) for s in self.samples))
        if len(self.samples) < 4:
            raise ValueError("SampledPeriodic needs at least 4 samples")
        _positive("T0", self.T0)

    @property
    def period(self) -> float:
        return self.T0

    @property
    def Omega(self) -> float:
        return 2 * math.pi / self.T0

    @property
    def amplitude(self) -> float:
        return max(abs(s) for s in self.samples)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        n = len(self.samples)
        y = np.asarray(self.samples)
        phase = np.mod(t, self.T0) / self.T0 * n
        j = np.floor(phase).astype(int) % n
        frac = phase - np.floor(phase)
        return (1 - frac) * y[j] + frac * y[(j + 1) % n]


DriveSignal = Union[Cosine, SquareWave, ExpEnvelope, SampledPeriodic]


def check_weak(signal: DriveSignal, threshold: float = WEAK_AMPLITUDE) -> bool:
    """Warn when the drive amplitude leaves the linear-response range."""
    if signal.amplitude > threshold:
        warnings.warn(
            f"drive amplitude {signal.amplitude:g} exceeds the linear-response "
            f"threshold {threshold:g}",
            RuntimeWarning,
            stacklevel=2,
        )
        return False
    return True


def evaluate_drive(signal: DriveSignal, t):
    return signal(t)


def drift_force(x, params: SystemParams, X=0.0):
    """Deterministic force ``(a - mu) x - b x^3 + mu X`` on one oscillator."""
    x = np.asarray(x, dtype=float)
    return (params.a - params.mu) * x - params.b * x**3 + params.mu * X


def effective_potential(x, params: SystemParams, X0=0.0):
    x = np.asarray(x, dtype=float)
    return (params.mu - params.a) * x**2 / 2 + params.b * x**4 / 4 - params.mu * X0 * x


def stationary_x_exponent(x, params: SystemParams, X0=0.0, tilt=0.0):
    """Log of the unnormalized stationary position weight.

    ``tilt`` is a constant force added to the drift; it enters exactly like
    an extra ``mu * X0`` term.
    """
    x = np.asarray(x, dtype=float)
    return (-effective_potential(x, params, X0) + tilt * x) / params.D


def stationary_x_weight(x, params: SystemParams, X0=0.0):
    return np.exp(stationary_x_exponent(x, params, X0))
