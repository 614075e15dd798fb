"""Stochastic resonance in mean-field coupled underdamped Duffing oscillators."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0+unknown"

from .errors import *  # noqa: F401,F403
from .model import Cosine, ExpEnvelope, SampledPeriodic, SquareWave, SystemParams
from .moments import TruncationOrders, saf_sweep, spectral_amplification_factor, susceptibility
from .response import amplification_gain, harmonic_decompose, order_parameter_response
from .simulate import (
    SimConfig,
    autocorrelation_susceptibility,
    empirical_saf,
    h_functional_monitor,
    simulate_mean_field,
    simulate_network,
)
from .stationary import (
    bifurcation_sweep,
    critical_parameter,
    solve_equilibria,
    static_susceptibility,
)
