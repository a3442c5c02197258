"""verigrade: automated assessment for solver-aided verification exercises."""

__version__ = "0.1.0"
