"""Independent oracles and convergence-order harnesses."""

from .radial import radial_hit_time, radial_oracle
from .spectral import SpectralConfig, spectral_simulate_1d
from .taylor import SweepReport, fit_slope, taylor_sweep

__all__ = [
    "SpectralConfig",
    "SweepReport",
    "fit_slope",
    "radial_hit_time",
    "radial_oracle",
    "spectral_simulate_1d",
    "taylor_sweep",
]
