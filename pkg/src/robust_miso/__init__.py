"""Robust beamforming for the MISO interference channel under ellipsoidal channel uncertainty."""

from .asymptotics import (
    ErrorScalingLaw,
    LowSnrMetrics,
    ebno_region_sweep,
    high_snr_slope_estimate,
    low_snr_metrics,
    multiplexing_gain,
    slope_region_sweep,
    spectral_efficiency_curve,
    sum_rate_sweep,
)
from .cone import ConeProgram, ConeSolution, solve_cone_program
from .model import (
    BeamformerSet,
    Ellipsoid,
    Link,
    Scenario,
    ScenarioFormatError,
    generate_scenario,
    load_scenario,
    save_scenario,
)
from .pareto import RatePoint, RegionSample, export_region, pareto_filter, sweep_region
from .robust_design import (
    interference_caps,
    pareto_candidate,
    robust_mrt,
    two_user_spherical_candidate,
    zero_forcing,
)
from .worst_case import gain_report, worst_case_rates

__all__ = [
    "BeamformerSet", "ConeProgram", "ConeSolution", "Ellipsoid", "ErrorScalingLaw", "Link",
    "LowSnrMetrics", "RatePoint", "RegionSample", "Scenario", "ScenarioFormatError",
    "ebno_region_sweep", "export_region", "gain_report", "generate_scenario",
    "high_snr_slope_estimate", "interference_caps", "load_scenario", "low_snr_metrics",
    "multiplexing_gain", "pareto_candidate", "pareto_filter", "robust_mrt", "save_scenario",
    "slope_region_sweep", "solve_cone_program", "spectral_efficiency_curve", "sum_rate_sweep",
    "sweep_region", "two_user_spherical_candidate", "worst_case_rates", "zero_forcing",
]
