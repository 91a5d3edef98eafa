"""Actor-critic learning from imperfect demonstrations, at desk scale."""

__version__ = "0.1.0"
