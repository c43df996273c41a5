"""Region-wise point-set prediction for tubular structures."""

__version__ = "0.1.0"
