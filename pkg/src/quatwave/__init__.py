"""Discretized similitude and quaternionic wavelet transforms."""
