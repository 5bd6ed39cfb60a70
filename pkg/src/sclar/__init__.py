"""Anti-jamming channel access with deep Q-learning in a multi-cell uplink."""
from .topology import ConfigError, NetworkConfig, build_network
from .env import JammingEnv
from .dqn import AgentConfig, QAgent
from .harness import ExperimentConfig, run_training, run_sweep

__all__ = [
    "ConfigError", "NetworkConfig", "build_network", "JammingEnv", "AgentConfig", "QAgent",
    "ExperimentConfig", "run_training", "run_sweep",
]
__version__ = "0.1.0"
