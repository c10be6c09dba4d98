"""Self-adjoint momentum for a particle confined to a bounded region."""

__version__ = "0.1.0"
