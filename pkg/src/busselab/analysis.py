"""Snapshot classifiers: predominant and local wave numbers, pulse counts,
and first-exit extraction from pulse-count time series.

Wave numbers are integers throughout: mode ``k`` means ``k`` pulses on the
periodic domain (the DFT mode with ``k`` full periods on ``[-L, L]``).
Mode 0 is excluded from every argmax search; the fields have positive mean
so the DC mode would always win.

The local transform applies a decaying Gaussian window of width ``ell``
(periodic minimal-image distance) around each grid point and takes, per
point, the mode maximizing the windowed spectral power.  It is computed for
all points at once, per searched mode, via one FFT of the field and one
batched inverse FFT: the windowed coefficient at mode k and center x0 is a
circular correlation of the modulated field with the window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
from scipy.ndimage import convolve1d
from scipy.signal import find_peaks

from busselab.model import DEFAULT_N, Grid1D

__all__ = [
    "AnalysisConfig",
    "WaveNumberHistogram",
    "ExitRecord",
    "ExitScanner",
    "predominant_wavenumber",
    "local_wavenumber_field",
    "local_wavenumber_histogram",
    "count_pulses",
    "median_filter_series",
    "detect_exit_time",
]


@dataclass(frozen=True)
class AnalysisConfig:
    """Classifier settings.

    ``k_max=None`` means N//8 for the grid in use.  ``smooth_window`` is in
    grid points at the reference resolution N=4096 and is rescaled
    proportionally on other grids.
    """

    ell: float = 50.0
    k_min: int = 1
    k_max: int | None = None
    smooth_window: int = 64
    prominence: float = 0.3
    median_window: int = 5

    def __post_init__(self):
        if self.ell <= 0:
            raise ValueError(f"ell must be positive, got {self.ell}")
        if self.k_min < 1:
            raise ValueError(f"k_min must be >= 1 (mode 0 is excluded), got {self.k_min}")
        if self.k_max is not None and self.k_max < self.k_min:
            raise ValueError(f"k_max={self.k_max} < k_min={self.k_min}")
        if self.smooth_window < 1:
            raise ValueError(f"smooth_window must be >= 1, got {self.smooth_window}")
        if self.prominence <= 0:
            raise ValueError(f"prominence must be positive, got {self.prominence}")
        if self.median_window < 1 or self.median_window % 2 == 0:
            raise ValueError(f"median_window must be odd, got {self.median_window}")

    def k_range(self, N: int) -> np.ndarray:
        k_hi = self.k_max if self.k_max is not None else N // 8
        k_hi = min(k_hi, N // 2 - 1)
        if k_hi < self.k_min:
            raise ValueError(f"empty wave-number search range for N={N}")
        return np.arange(self.k_min, k_hi + 1)


@dataclass(frozen=True)
class WaveNumberHistogram:
    """Normalized counts of integer wave numbers with mean and spread."""

    ks: np.ndarray
    freqs: np.ndarray
    mean: float
    std: float

    def __post_init__(self):
        ks = np.asarray(self.ks, dtype=int)
        freqs = np.asarray(self.freqs, dtype=float)
        total = freqs.sum()
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"histogram must sum to 1, got {total}")
        object.__setattr__(self, "ks", ks)
        object.__setattr__(self, "freqs", freqs)

    @property
    def rounded_mean(self) -> int:
        return int(round(self.mean))


@dataclass(frozen=True)
class ExitRecord:
    """Per-realization first exit time with censoring flag and metadata."""

    t_exit: float
    censored: bool
    seed: int = 0
    a: float = float("nan")
    k_init: int = 0
    sigma: float = float("nan")


DEFAULT_CONFIG = AnalysisConfig()


def predominant_wavenumber(v: np.ndarray, grid: Grid1D, cfg: AnalysisConfig = DEFAULT_CONFIG) -> int:
    """Integer mode maximizing the global spectrum magnitude; ties toward
    smaller k."""
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("field contains non-finite values")
    ks = cfg.k_range(grid.N)
    amp = np.abs(sfft.rfft(v))[ks]
    if amp.max() <= 0.0:
        raise ValueError("no spectral content in the searched wave-number range")
    return int(ks[np.argmax(amp)])


def _gaussian_window(grid: Grid1D, ell: float) -> np.ndarray:
    dist = grid.periodic_distance(grid.h * np.arange(grid.N))
    return np.exp(-(dist * dist) / (ell * ell))


def _local_power(
    v: np.ndarray, grid: Grid1D, cfg: AnalysisConfig, stride: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Windowed spectral power |F_x0(k)|^2 at every stride-th center,
    shape (K, N//stride)."""
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("field contains non-finite values")
    N = grid.N
    if stride < 1 or N % stride != 0:
        raise ValueError(f"stride must divide N={N}, got {stride}")
    ks = cfg.k_range(N)
    # Center the field first: the spatial mean would otherwise leak through
    # the window into every low mode.  This is the windowed analogue of
    # excluding mode 0 (a constant field then classifies as k_min by the
    # smaller-k tie-break).
    V = sfft.fft(v - v.mean())
    w_hat = sfft.fft(_gaussian_window(grid, cfg.ell)).real
    # Modulating v by mode k shifts its spectrum: fft(v * carrier_k) = roll(V, -k).
    idx = (np.arange(N)[None, :] + ks[:, None]) % N
    prod = V[idx] * w_hat[None, :]
    if stride == 1:
        corr = sfft.ifft(prod, axis=1)
    else:
        # Spatial decimation equals spectral folding: summing the s aliased
        # bands and inverting at length N/s gives the values at the kept
        # centers exactly.
        folded = prod.reshape(len(ks), stride, N // stride).sum(axis=1)
        corr = sfft.ifft(folded, axis=1) / stride
    # 1/N is the quadrature factor h/(2L) of the defining transform.
    power = (np.abs(corr) / N) ** 2
    return ks, power


def local_wavenumber_field(
    v: np.ndarray, grid: Grid1D, cfg: AnalysisConfig = DEFAULT_CONFIG, stride: int = 1
) -> np.ndarray:
    """Per-gridpoint argmax mode of the Gaussian-windowed transform.

    With ``stride > 1`` only every stride-th center is classified (the
    histogram then samples window centers instead of all points).
    """
    ks, power = _local_power(v, grid, cfg, stride=stride)
    return ks[np.argmax(power, axis=0)]


def local_wavenumber_histogram(
    v: np.ndarray, grid: Grid1D, cfg: AnalysisConfig = DEFAULT_CONFIG, stride: int = 1
) -> WaveNumberHistogram:
    """Histogram of the local wave numbers, normalized by the number of
    classified points."""
    values = local_wavenumber_field(v, grid, cfg, stride=stride)
    ks = cfg.k_range(grid.N)
    counts = np.bincount(values, minlength=ks[-1] + 1)[ks]
    freqs = counts / values.size
    return WaveNumberHistogram(
        ks=ks, freqs=freqs, mean=float(values.mean()), std=float(values.std())
    )


def _smooth(v: np.ndarray, grid: Grid1D, cfg: AnalysisConfig) -> np.ndarray:
    # Window is resolution-linked: specified in points at N=4096.
    w = max(1, int(round(cfg.smooth_window * grid.N / DEFAULT_N)))
    half = w // 2
    offsets = np.arange(-half, half + 1)
    sigma = w / 5.0
    weights = np.exp(-(offsets * offsets) / (2.0 * sigma * sigma))
    weights /= weights.sum()
    return convolve1d(np.asarray(v, dtype=float), weights, mode="wrap")


def _count_extrema(signal: np.ndarray, prominence: float) -> int:
    """Peaks of a periodic signal, rotated so the global minimum sits at the
    boundary and is duplicated at the end; interior peaks then carry the
    usual prominence semantics."""
    rotated = np.roll(signal, -int(np.argmin(signal)))
    extended = np.concatenate([rotated, rotated[:1]])
    peaks, _ = find_peaks(extended, prominence=prominence)
    return len(peaks)


def count_pulses(v: np.ndarray, grid: Grid1D, cfg: AnalysisConfig = DEFAULT_CONFIG) -> int:
    """Number of pulses: smooth, count prominent maxima and minima under
    periodic wrap, return the larger count."""
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("field contains non-finite values")
    smoothed = _smooth(v, grid, cfg)
    n_max = _count_extrema(smoothed, cfg.prominence)
    n_min = _count_extrema(-smoothed, cfg.prominence)
    return max(n_max, n_min)


def median_filter_series(series, window: int) -> np.ndarray:
    """Centered moving median; the window shrinks symmetrically near the
    edges (radius min(r, i, n-1-i)), so it stays odd-length."""
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and positive, got {window}")
    values = np.asarray(series, dtype=float)
    n = values.size
    r = window // 2
    out = np.empty(n)
    for i in range(n):
        rad = min(r, i, n - 1 - i)
        out[i] = np.median(values[i - rad : i + rad + 1])
    return out


def detect_exit_time(times, counts, initial_count: int, t_max: float) -> ExitRecord:
    """First timestamp whose (already filtered) count differs from the
    initial count; censored at t_max when none does."""
    times = np.asarray(times, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if times.size == 0 or times.size != counts.size:
        raise ValueError("need equally long, non-empty times and counts")
    changed = np.flatnonzero(counts != initial_count)
    if changed.size:
        return ExitRecord(t_exit=float(times[changed[0]]), censored=False)
    return ExitRecord(t_exit=float(t_max), censored=True)


class ExitScanner:
    """Incremental exit detection over a growing pulse-count series.

    Feeding observations one by one reproduces exactly the result of
    median-filtering the complete series and scanning for the first change,
    but allows the simulation to stop as soon as an exit is confirmed: a
    filtered value is only trusted once its window cannot change anymore.
    """

    def __init__(self, initial_count: int, median_window: int, t_max: float):
        if median_window < 1 or median_window % 2 == 0:
            raise ValueError(f"median_window must be odd, got {median_window}")
        self.initial_count = int(initial_count)
        self.r = median_window // 2
        self.t_max = float(t_max)
        self.times: list[float] = []
        self.counts: list[int] = []
        self._next_check = 0
        self._exit_time: float | None = None

    def feed(self, t: float, count: int) -> float | None:
        """Record one observation; returns the exit time once confirmed."""
        if self._exit_time is not None:
            return self._exit_time
        self.times.append(float(t))
        self.counts.append(int(count))
        last = len(self.counts) - 1
        i = self._next_check
        while i + min(self.r, i) <= last:
            rad = min(self.r, i)
            med = np.median(self.counts[i - rad : i + rad + 1])
            if med != self.initial_count:
                self._exit_time = self.times[i]
                return self._exit_time
            i += 1
        self._next_check = i
        return None

    def finalize(self) -> ExitRecord:
        """Exit record after the horizon was reached (trailing windows
        shrink symmetrically, as in the post-hoc filter)."""
        if self._exit_time is not None:
            return ExitRecord(t_exit=self._exit_time, censored=False)
        filtered = median_filter_series(self.counts, 2 * self.r + 1)
        tail = detect_exit_time(self.times, filtered, self.initial_count, self.t_max)
        return tail
