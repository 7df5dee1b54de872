"""Sum-rate optimization and detection theory for a full-duplex base station
that pairs classical communication with quantum-illumination sensing."""
from .numerics import BACKEND
from .scenario import ChannelSet, Interferer, Scenario, build_channels
from .beamforming import TransmitDesign, sinr_radar_opt, sinr_ul_opt, beampattern_gain
from .detection import DetectionSpec, RadarProtocolParams, required_sinr, roc_pd, thermal_photons
from .sca import InfeasibleError, ProblemSpec, SolverFailure, extract_rank1, run_sca
from .config import ConfigError, RunConfig, load_config, parse_config

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ChannelSet", "Interferer", "Scenario", "build_channels", "TransmitDesign",
    "sinr_radar_opt", "sinr_ul_opt", "beampattern_gain", "DetectionSpec",
    "RadarProtocolParams", "required_sinr", "roc_pd", "thermal_photons", "InfeasibleError",
    "ProblemSpec", "SolverFailure", "extract_rank1", "run_sca", "ConfigError", "RunConfig",
    "load_config", "parse_config",
]
