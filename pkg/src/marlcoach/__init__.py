"""Multi-agent RL with phased feedback-driven reward shaping."""

__version__ = "0.1.0"
