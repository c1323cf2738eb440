"""Bearing-only target localisation and circumnavigation with an LSTM estimator."""

__version__ = "0.1.0"
