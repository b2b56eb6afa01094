"""Direct multi-step forecasting with frequency-domain label alignment."""

__version__ = "0.1.0"
