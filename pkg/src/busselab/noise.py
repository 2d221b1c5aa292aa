"""Sampling of the spatially colored, temporally white noise increments.

The driving process is white in time with spatial covariance

    q(x) = 1/(2*xi) * exp(-pi*x^2 / (4*xi^2))

evaluated at the minimal periodic image distance.  On the periodic grid the
covariance matrix is circulant, so its eigenbasis is the discrete Fourier
basis and the eigenvalues are the DFT of the grid-sampled kernel.  A unit
increment is sampled by shaping white noise in Fourier space:

    dW = irfft(sqrt(eig) * rfft(g)),   g ~ N(0, I_N)

which has exactly the circulant covariance (the real part of a Hermitian
spectrum).  Discretization can produce slightly negative eigenvalues; those
are clamped to zero and the clamped trace fraction is recorded.

Randomness: numpy's PCG64 generator (stable stream across numpy >= 1.17).
Each realization owns a private stream; see :func:`derive_seed`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from busselab.model import Grid1D

__all__ = [
    "NoiseConfig",
    "NoiseSpectrum",
    "kernel",
    "build_spectrum",
    "sample_increment",
    "make_rng",
    "derive_seed",
]


@dataclass(frozen=True)
class NoiseConfig:
    """Spatial correlation length and base RNG seed."""

    xi: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not (self.xi > 0 and np.isfinite(self.xi)):
            raise ValueError(f"xi must be positive, got {self.xi}")


def kernel(x, xi: float):
    """Spatial covariance q at separation ``x``."""
    x = np.asarray(x, dtype=float)
    return np.exp(-np.pi * x * x / (4.0 * xi * xi)) / (2.0 * xi)


@dataclass(frozen=True)
class NoiseSpectrum:
    """Square roots of the covariance eigenvalues in the DFT basis."""

    sqrt_eigs: np.ndarray  # length N, Hermitian-paired: [j] == [N-j]
    grid: Grid1D
    clamped_mass: float  # clamped negative eigenvalue mass / trace
    _sqrt_half: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        se = np.array(self.sqrt_eigs, dtype=float)
        se.setflags(write=False)
        object.__setattr__(self, "sqrt_eigs", se)
        half = se[: self.grid.N // 2 + 1].copy()
        half.setflags(write=False)
        object.__setattr__(self, "_sqrt_half", half)


def build_spectrum(cfg: NoiseConfig, grid: Grid1D) -> NoiseSpectrum:
    """Eigendecomposition of the periodic covariance on the grid."""
    dist = grid.periodic_distance(grid.h * np.arange(grid.N))
    q_row = kernel(dist, cfg.xi)
    eigs = sfft.fft(q_row).real
    # q_row is exactly symmetric, so enforce the Hermitian pairing exactly.
    eigs = 0.5 * (eigs + np.concatenate(([eigs[0]], eigs[:0:-1])))
    negative = np.minimum(eigs, 0.0)
    trace = float(np.sum(eigs) - np.sum(negative))
    clamped = float(max(0.0, -np.sum(negative)) / trace) if trace > 0 else 0.0
    eigs = np.maximum(eigs, 0.0)
    return NoiseSpectrum(sqrt_eigs=np.sqrt(eigs), grid=grid, clamped_mass=clamped)


def sample_increment(spec: NoiseSpectrum, rng: np.random.Generator) -> np.ndarray:
    """One unit-time increment with spatial covariance q.

    The caller scales by sqrt(dt)*sigma*v for the actual noise term.
    """
    g = rng.standard_normal(spec.grid.N)
    return sfft.irfft(spec._sqrt_half * sfft.rfft(g), n=spec.grid.N)


def make_rng(seed: int) -> np.random.Generator:
    """A private PCG64 stream for one realization."""
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(base_seed: int, *indices: int) -> int:
    """Deterministic 64-bit seed for a (cell, iteration, ...) coordinate.

    Hashing through SeedSequence keeps parallel and serial runs identical
    and decorrelates neighboring indices.
    """
    ss = np.random.SeedSequence([int(base_seed), *[int(i) for i in indices]])
    return int(ss.generate_state(1, np.uint64)[0])
