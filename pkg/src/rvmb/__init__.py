"""RISC-V tensor microbenchmark toolkit."""

__version__ = "0.1.0"
