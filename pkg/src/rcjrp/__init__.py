"""Resource-constrained joint replenishment: relaxation, grid rounding and guarantees."""

__version__ = "0.1.0"
