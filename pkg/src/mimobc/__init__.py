"""High-SNR throughput analysis of the Gaussian MIMO broadcast channel."""

__version__ = "0.1.0"
