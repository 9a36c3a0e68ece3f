"""Multi-timescale O-RAN simulator hosting several federated-learning services."""

from .config import SimConfig, default_config, parse_config
from .engine import Policy, Simulation, run

__all__ = ["Policy", "SimConfig", "Simulation", "default_config", "parse_config", "run"]
__version__ = "0.1.0"
