"""Deep-RL design of fast single-qubit gates on a simulated transmon."""

__version__ = "0.1.0"
