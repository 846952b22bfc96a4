"""Rank-one partitioning: cluster-generating vectors plus exact Potts denoising."""

__version__ = "0.1.0"
