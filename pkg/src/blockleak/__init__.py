"""User-blocking timing side-channel identification lab."""

__version__ = "0.1.0"
