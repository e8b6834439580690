"""Surface-code memory experiments: circuits, noise, sampling, and MWPM / neural-network decoding."""

__version__ = "0.1.0"
