"""AlphaX: point-in-time value-investing backtests on daily bars."""

__version__ = "0.1.0"
