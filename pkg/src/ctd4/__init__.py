"""Distributional TD3 with an ensemble of Gaussian critics fused by a Kalman rule."""

from __future__ import annotations

from .gauss import FusionStrategy, Gaussian1D, affine, fuse_ensemble, fuse_pair, kl

__version__ = "0.1.0"

__all__ = [
    "FusionStrategy",
    "Gaussian1D",
    "affine",
    "fuse_ensemble",
    "fuse_pair",
    "kl",
    "__version__",
]
