"""Experiment families: exit-time maps and fits, stationary local-wave-number
distributions, deterministic wave-number selection from a uniform start, and
the single-pulse gap-fill run.

Every ensemble emits per-realization records; all summary statistics are
pure functions of those records so CSV re-aggregation reproduces them
exactly.  Realization seeds derive deterministically from
``(base_seed, cell index, iteration index)``, making serial and parallel
runs identical.

Censored exit times (no pulse change before ``t_max``) enter the ensemble
mean at ``t_max``; the censored fraction is always reported alongside.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import find_peaks

from busselab.analysis import (
    AnalysisConfig,
    ExitRecord,
    ExitScanner,
    count_pulses,
    local_wavenumber_histogram,
    median_filter_series,
    predominant_wavenumber,
)
from busselab.integrator import STOP, StepSchedule, simulate, write_snapshot
from busselab.linear import integer_wavenumber, linearize, most_unstable_mode, unstable_band
from busselab.model import FieldState, Grid1D, ModelParams, homogeneous_states
from busselab.noise import NoiseConfig, derive_seed, make_rng
from busselab.patterns import PatternError, PatternRequest, delete_pulse, periodic_pattern, perturb_state

__all__ = [
    "EnsembleSummary",
    "FitResult",
    "ExitMapResult",
    "StationaryResult",
    "FromUniformResult",
    "GapFillResult",
    "run_exit_time_map",
    "summarize_cells",
    "fit_exit_vs_a",
    "fit_exit_vs_sigma",
    "run_stationary_distribution",
    "run_from_uniform",
    "run_gap_fill",
    "write_exit_records",
    "read_exit_records",
    "write_summaries",
    "write_histograms",
    "write_fits",
    "write_reference_band",
]

PERTURB_STD = 0.01  # amplitude of the Gaussian kick on homogeneous starts


@dataclass(frozen=True)
class EnsembleSummary:
    """Aggregate exit statistics for one (a, k) cell."""

    a: float
    k_init: int
    sigma: float
    mean: float
    std: float
    censored_fraction: float
    iterations: int
    note: str = ""


@dataclass(frozen=True)
class FitResult:
    name: str
    slope: float
    intercept: float
    r2: float
    stderr: float


def _map_tasks(func, tasks, workers: int):
    if workers <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks, chunksize=1))


# ---------------------------------------------------------------------------
# exit times


def _exit_realization(task) -> ExitRecord:
    params, grid, u0, v0, xi, seed, sched, acfg, k_init = task
    scanner = ExitScanner(k_init, acfg.median_window, sched.t_end)

    def observer(t, state):
        if scanner.feed(t, count_pulses(state.v, grid, acfg)) is not None:
            return STOP
        return None

    simulate(
        FieldState(u=u0, v=v0, t=0.0),
        params,
        NoiseConfig(xi=xi, seed=seed),
        sched,
        observers=[observer],
        grid=grid,
    )
    rec = scanner.finalize()
    return replace(rec, seed=seed, a=params.a, k_init=k_init, sigma=params.sigma)


@dataclass
class ExitMapResult:
    records: list[ExitRecord]
    summaries: list[EnsembleSummary]


def summarize_cells(records: list[ExitRecord]) -> list[EnsembleSummary]:
    """Per-(a, k, sigma) aggregation of exit records."""
    cells: dict[tuple, list[ExitRecord]] = {}
    for rec in records:
        cells.setdefault((rec.a, rec.k_init, rec.sigma), []).append(rec)
    out = []
    for (a, k, sigma), recs in sorted(cells.items()):
        times = np.array([r.t_exit for r in recs])
        out.append(
            EnsembleSummary(
                a=a,
                k_init=k,
                sigma=sigma,
                mean=float(times.mean()),
                std=float(times.std(ddof=1)) if len(recs) > 1 else 0.0,
                censored_fraction=float(np.mean([r.censored for r in recs])),
                iterations=len(recs),
            )
        )
    return out


def run_exit_time_map(
    a_values,
    k_values,
    sigma: float,
    iterations: int,
    t_max: float,
    *,
    m: float,
    d: float,
    grid: Grid1D,
    xi: float = 0.1,
    dt: float = 0.05,
    observe_stride: float = 4.0,
    analysis: AnalysisConfig = AnalysisConfig(),
    base_seed: int = 0,
    workers: int = 1,
) -> ExitMapResult:
    """First-exit ensembles over an (a, k) grid of pattern initial
    conditions.  Cells whose pattern cannot be generated are recorded as
    missing summaries, not errors."""
    sched = StepSchedule(dt=dt, t_end=t_max, observe_stride=observe_stride)
    tasks = []
    missing = []
    cell_index = 0
    for a in a_values:
        params = ModelParams(a=float(a), m=m, d=d, sigma=sigma)
        for k in k_values:
            cell_index += 1
            try:
                pattern = periodic_pattern(PatternRequest(params=params, n=int(k), grid=grid))
            except (PatternError, ValueError) as err:
                missing.append(
                    EnsembleSummary(
                        a=float(a), k_init=int(k), sigma=sigma, mean=float("nan"),
                        std=float("nan"), censored_fraction=float("nan"), iterations=0,
                        note=f"pattern unavailable: {err}",
                    )
                )
                continue
            for it in range(iterations):
                seed = derive_seed(base_seed, cell_index, it)
                tasks.append(
                    (params, grid, pattern.state.u, pattern.state.v, xi, seed, sched, analysis, int(k))
                )
    records = _map_tasks(_exit_realization, tasks, workers)
    summaries = summarize_cells(records) + missing
    return ExitMapResult(records=records, summaries=summaries)


def _linear_fit(x: np.ndarray, y: np.ndarray, name: str) -> FitResult:
    n = len(x)
    sxx = float(np.sum((x - x.mean()) ** 2))
    slope = float(np.sum((x - x.mean()) * (y - y.mean())) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (slope * x + intercept)
    syy = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / syy if syy > 0 else 1.0
    stderr = float(np.sqrt(np.sum(resid**2) / max(n - 2, 1) / sxx)) if n > 2 else 0.0
    return FitResult(name=name, slope=slope, intercept=intercept, r2=r2, stderr=stderr)


def fit_exit_vs_a(summaries: list[EnsembleSummary]) -> FitResult:
    """Least-squares line through (a, log10 max_k mean exit time)."""
    best: dict[float, float] = {}
    for s in summaries:
        if np.isfinite(s.mean):
            best[s.a] = max(best.get(s.a, -np.inf), s.mean)
    if len(best) < 3:
        raise ValueError(f"need >= 3 rainfall values with data, got {len(best)}")
    a = np.array(sorted(best))
    y = np.log10([best[v] for v in a])
    return _linear_fit(a, y, "log10_max_exit_vs_a")


def fit_exit_vs_sigma(
    records: list[ExitRecord], censor_threshold: float = 0.5
) -> tuple[FitResult, list[float]]:
    """Power-law exponent of mean exit time vs sigma at one (a, k).

    Sigma levels with censored fraction above the threshold are excluded;
    the excluded levels are returned alongside the fit.
    """
    by_sigma: dict[float, list[ExitRecord]] = {}
    for rec in records:
        by_sigma.setdefault(rec.sigma, []).append(rec)
    excluded = []
    xs, ys = [], []
    for sigma in sorted(by_sigma):
        recs = by_sigma[sigma]
        frac = np.mean([r.censored for r in recs])
        if frac > censor_threshold:
            excluded.append(sigma)
            continue
        xs.append(np.log10(sigma))
        ys.append(np.log10(np.mean([r.t_exit for r in recs])))
    if len(xs) < 3:
        raise ValueError(
            f"need >= 3 sigma levels below {censor_threshold:.0%} censoring, got {len(xs)}"
        )
    return _linear_fit(np.array(xs), np.array(ys), "log10_exit_vs_log10_sigma"), excluded


# ---------------------------------------------------------------------------
# stationary distributions


@dataclass
class StationaryResult:
    """Iteration-averaged local-wave-number densities over time."""

    times: np.ndarray  # (T,)
    ks: np.ndarray  # (K,)
    density: np.ndarray  # (T, K), each row sums to 1
    mean: np.ndarray  # (T,) mean of the averaged density
    std: np.ndarray  # (T,)
    init_spec: str
    a: float
    sigma: float

    @property
    def final_mean(self) -> float:
        return float(self.mean[-1])


def _initial_state(init_spec: str, params: ModelParams, grid: Grid1D, seed: int) -> FieldState:
    if init_spec == "homogeneous":
        states = homogeneous_states(params)
        if states.lower is None:
            raise ValueError(f"no vegetated state at a={params.a}")
        ub, vb = states.lower
        flat = FieldState(u=np.full(grid.N, ub), v=np.full(grid.N, vb), t=0.0)
        return perturb_state(flat, PERTURB_STD, make_rng(derive_seed(seed, 0xFEED)))
    if init_spec.startswith("pattern:"):
        n = int(init_spec.split(":", 1)[1])
        return periodic_pattern(PatternRequest(params=params, n=n, grid=grid)).state
    raise ValueError(f"unknown init_spec {init_spec!r} (use 'homogeneous' or 'pattern:N')")


def _stationary_realization(task) -> np.ndarray:
    params, grid, init_spec, xi, seed, sched, acfg, stride = task
    init = _initial_state(init_spec, params, grid, seed)
    rows = []

    def observer(t, state):
        hist = local_wavenumber_histogram(state.v, grid, acfg, stride=stride)
        rows.append(hist.freqs)
        return None

    simulate(init, params, NoiseConfig(xi=xi, seed=seed), sched, observers=[observer], grid=grid)
    return np.array(rows)


def run_stationary_distribution(
    a: float,
    sigma: float,
    t_max: float,
    iterations: int,
    init_spec: str,
    *,
    m: float,
    d: float,
    grid: Grid1D,
    xi: float = 0.1,
    dt: float = 0.05,
    observe_stride: float = 25.0,
    analysis: AnalysisConfig = AnalysisConfig(),
    center_stride: int = 4,
    base_seed: int = 0,
    workers: int = 1,
) -> StationaryResult:
    """Average density of local wave numbers over time: run ``iterations``
    realizations from ``init_spec`` and average the per-time normalized
    histograms.  Comparing two different ``init_spec`` starts validates
    that the long-time distribution is actually stationary."""
    params = ModelParams(a=a, m=m, d=d, sigma=sigma)
    sched = StepSchedule(dt=dt, t_end=t_max, observe_stride=observe_stride)
    tasks = [
        (params, grid, init_spec, xi, derive_seed(base_seed, 1, it), sched, analysis, center_stride)
        for it in range(iterations)
    ]
    stacks = _map_tasks(_stationary_realization, tasks, workers)
    density = np.mean(stacks, axis=0)
    ks = analysis.k_range(grid.N)
    times = np.arange(density.shape[0]) * observe_stride
    mean = density @ ks
    std = np.sqrt(np.maximum(density @ (ks.astype(float) ** 2) - mean**2, 0.0))
    return StationaryResult(
        times=times, ks=ks, density=density, mean=mean, std=std,
        init_spec=init_spec, a=a, sigma=sigma,
    )


# ---------------------------------------------------------------------------
# deterministic selection from the uniform state


@dataclass
class FromUniformResult:
    a: float
    ks: np.ndarray
    freqs: np.ndarray
    outcomes: np.ndarray  # final predominant wave number per run
    k_mu_integer: float
    band: tuple[float, float]  # linearly unstable integer band


def _from_uniform_realization(task) -> int:
    params, grid, seed, sched, acfg = task
    init = _initial_state("homogeneous", params, grid, seed)
    out = simulate(init, params, NoiseConfig(seed=seed), sched, grid=grid)
    return predominant_wavenumber(out.final.v, grid, acfg)


def run_from_uniform(
    a_values,
    runs: int,
    t_end: float,
    *,
    m: float,
    d: float,
    grid: Grid1D,
    dt: float = 0.05,
    analysis: AnalysisConfig = AnalysisConfig(),
    base_seed: int = 0,
    workers: int = 1,
) -> list[FromUniformResult]:
    """Deterministic (sigma=0) wave-number selection from the perturbed
    uniform vegetated state, histogrammed per rainfall value."""
    results = []
    sched = StepSchedule(dt=dt, t_end=t_end, observe_stride=t_end)
    for a_index, a in enumerate(a_values):
        params = ModelParams(a=float(a), m=m, d=d, sigma=0.0)
        lin = linearize(params)
        mode = most_unstable_mode(lin)
        band = unstable_band(lin)
        tasks = [
            (params, grid, derive_seed(base_seed, 2, a_index, it), sched, analysis)
            for it in range(runs)
        ]
        outcomes = np.array(_map_tasks(_from_uniform_realization, tasks, workers))
        ks = analysis.k_range(grid.N)
        freqs = np.bincount(outcomes, minlength=ks[-1] + 1)[ks] / runs
        results.append(
            FromUniformResult(
                a=float(a),
                ks=ks,
                freqs=freqs,
                outcomes=outcomes,
                k_mu_integer=integer_wavenumber(mode[0], grid.L) if mode else float("nan"),
                band=(
                    (integer_wavenumber(band[0], grid.L), integer_wavenumber(band[1], grid.L))
                    if band
                    else (float("nan"), float("nan"))
                ),
            )
        )
    return results


# ---------------------------------------------------------------------------
# gap fill


@dataclass
class GapFillResult:
    times: np.ndarray
    pulse_counts: np.ndarray
    predominant: np.ndarray
    local_mean: np.ndarray
    events: dict[str, float | None]  # first change time per classifier


def _roll_pulse_to_center(state: FieldState, grid: Grid1D, wavelength: float) -> FieldState:
    """Rotate the pattern so one pulse maximum sits at x = wavelength/2,
    centered in the deletion interval [0, wavelength)."""
    x = grid.x()
    target = int(np.argmin(np.abs(x - wavelength / 2.0)))
    peaks, _ = find_peaks(np.concatenate([state.v, state.v[:1]]))
    if len(peaks) == 0:
        return state
    peak = peaks[int(np.argmin(np.abs((peaks - target + grid.N // 2) % grid.N - grid.N // 2)))]
    shift = (target - peak) % grid.N
    return FieldState(u=np.roll(state.u, shift), v=np.roll(state.v, shift), t=state.t)


def _first_change(times: np.ndarray, series: np.ndarray, window: int) -> float | None:
    filtered = median_filter_series(series, window)
    changed = np.flatnonzero(filtered != filtered[0])
    return float(times[changed[0]]) if changed.size else None


def run_gap_fill(
    a: float,
    sigma: float,
    n: int,
    *,
    m: float,
    d: float,
    grid: Grid1D,
    t_end: float = 2000.0,
    xi: float = 0.1,
    dt: float = 0.05,
    observe_stride: float = 4.0,
    analysis: AnalysisConfig = AnalysisConfig(),
    center_stride: int = 4,
    seed: int = 0,
    snapshot_path: str | None = None,
) -> GapFillResult:
    """Delete one pulse from an n-pulse pattern and track all three
    classifiers (pulse count, predominant and average local wave number)
    until ``t_end``, reporting each one's first change time."""
    params = ModelParams(a=a, m=m, d=d, sigma=sigma)
    pattern = periodic_pattern(PatternRequest(params=params, n=n, grid=grid)).state
    lam = 2.0 * grid.L / n
    cut = delete_pulse(_roll_pulse_to_center(pattern, grid, lam), lam, grid)

    rows = []
    snap_fh = open(snapshot_path, "wb") if snapshot_path else None

    def observer(t, state):
        hist = local_wavenumber_histogram(state.v, grid, analysis, stride=center_stride)
        rows.append(
            (
                t,
                count_pulses(state.v, grid, analysis),
                predominant_wavenumber(state.v, grid, analysis),
                hist.mean,
            )
        )
        if snap_fh is not None:
            write_snapshot(snap_fh, t, state.u, state.v)
        return None

    try:
        simulate(
            cut,
            params,
            NoiseConfig(xi=xi, seed=seed),
            StepSchedule(dt=dt, t_end=t_end, observe_stride=observe_stride),
            observers=[observer],
            grid=grid,
        )
    finally:
        if snap_fh is not None:
            snap_fh.close()

    arr = np.array(rows)
    times, counts, predominant, local_mean = arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]
    w = analysis.median_window
    events = {
        "pulse_change": _first_change(times, counts, w),
        "predominant_shift": _first_change(times, predominant, w),
        "local_mean_shift": _first_change(times, np.round(local_mean), w),
    }
    return GapFillResult(
        times=times,
        pulse_counts=counts.astype(int),
        predominant=predominant.astype(int),
        local_mean=local_mean,
        events=events,
    )


# ---------------------------------------------------------------------------
# CSV schemas


def write_exit_records(path, records: list[ExitRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "a", "k_init", "sigma", "t_exit", "censored"])
        for r in records:
            writer.writerow([r.seed, repr(r.a), r.k_init, repr(r.sigma), repr(r.t_exit), int(r.censored)])


def read_exit_records(path) -> list[ExitRecord]:
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            records.append(
                ExitRecord(
                    seed=int(row["seed"]),
                    a=float(row["a"]),
                    k_init=int(row["k_init"]),
                    sigma=float(row["sigma"]),
                    t_exit=float(row["t_exit"]),
                    censored=bool(int(row["censored"])),
                )
            )
    return records


def write_summaries(path, summaries: list[EnsembleSummary]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["a", "k_init", "sigma", "mean", "std", "censored_fraction", "iterations", "note"])
        for s in summaries:
            writer.writerow(
                [repr(s.a), s.k_init, repr(s.sigma), repr(s.mean), repr(s.std),
                 repr(s.censored_fraction), s.iterations, s.note]
            )


def write_histograms(path, rows) -> None:
    """Rows of (t, a, sigma, k, frequency); zero-frequency bins are skipped."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "a", "sigma", "k", "frequency"])
        for t, a, sigma, k, freq in rows:
            if freq != 0.0:
                writer.writerow([repr(float(t)), repr(float(a)), repr(float(sigma)), int(k), repr(float(freq))])


def write_fits(path, fits: list[FitResult]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "slope", "intercept", "r2", "stderr"])
        for f in fits:
            writer.writerow([f.name, repr(f.slope), repr(f.intercept), repr(f.r2), repr(f.stderr)])


def write_reference_band(path, a_values, *, m: float, d: float, L: float) -> None:
    """Schematic overlay: the linearly unstable integer wave-number band of
    the vegetated state per rainfall value.  This is NOT the stable-pattern
    balloon (which requires numerical continuation); it only serves as
    reference data for plots and in/out labels."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["a", "k_low", "k_high"])
        for a in a_values:
            try:
                band = unstable_band(linearize(ModelParams(a=float(a), m=m, d=d)))
            except ValueError:
                continue
            if band is None:
                continue
            writer.writerow(
                [repr(float(a)), repr(integer_wavenumber(band[0], L)), repr(integer_wavenumber(band[1], L))]
            )
