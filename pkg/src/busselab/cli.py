"""Command-line entry point.

Subcommands mirror the experiment families::

    busselab dispersion --a 2.0
    busselab pattern --a 1.5 --n 30 --out p30.bin
    busselab exit-map --preset desk-exit-map --out runs/exit
    busselab gap-fill --preset desk-gap-fill --dt-check

Configuration comes from ``--preset`` or ``--config`` (INI grammar, see
config.py) with flag overrides applied on top; the effective configuration
is echoed into the output directory so every run is reproducible from its
own artifacts.  Exit status: 0 ok, 2 invalid configuration, 3 numerical
blow-up, 1 other failures.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from busselab import experiments as xp
from busselab.analysis import count_pulses, predominant_wavenumber
from busselab.config import (
    ConfigError,
    PRESET_NAMES,
    RunConfig,
    default_threads,
    load_config,
    loads_config,
    preset,
    save_config,
)
from busselab.integrator import (
    SimulationBlowupError,
    StepSchedule,
    simulate,
    snapshot_observer,
    write_snapshot,
)
from busselab.linear import dispersion_eigenvalues, linearize, most_unstable_mode, turing_point, integer_wavenumber
from busselab.noise import NoiseConfig, build_spectrum, kernel, make_rng, sample_increment
from busselab.patterns import PatternError, PatternRequest, periodic_pattern

OVERRIDE_FLAGS = ("a", "sigma", "n", "tmax", "iters", "dt")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="busselab", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "pattern", "dispersion", "exit-map", "exit-sigma",
                 "stationary", "from-uniform", "gap-fill", "validate-noise"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI configuration file")
        p.add_argument("--preset", choices=PRESET_NAMES, help="named parameter set")
        p.add_argument("--out", help="output directory (pattern: output file)")
        p.add_argument("--seed", type=int, help="base seed override")
        p.add_argument("--threads", type=int, help="worker processes (env BUSSE_LAB_THREADS)")
        p.add_argument("--a", type=float, help="rainfall override")
        p.add_argument("--sigma", type=float, help="noise intensity override")
        p.add_argument("--n", type=int, help="pattern wave number override")
        p.add_argument("--tmax", type=float, help="horizon override (t_max / t_end)")
        p.add_argument("--iters", type=int, help="iterations/runs override")
        p.add_argument("--dt", type=float, help="timestep override")
        p.add_argument("--boundary", help="balloon boundary CSV for in/out labels")
        p.add_argument("--dt-check", action="store_true",
                       help="rerun at dt/2 and report both conclusions")
    return parser


def _resolve_config(args) -> RunConfig:
    if args.config and args.preset:
        raise ConfigError(["--config and --preset are mutually exclusive"])
    if args.preset:
        cfg = preset(args.preset)
    elif args.config:
        cfg = load_config(args.config)
    else:
        cfg = loads_config("")
    cfg = replace(cfg, experiment=args.command)

    params = cfg.params
    if args.a is not None:
        params = replace(params, a=args.a)
    if args.sigma is not None:
        params = replace(params, sigma=args.sigma)
    cfg = replace(cfg, params=params)
    if args.dt is not None:
        cfg = replace(cfg, dt=args.dt)
    if args.seed is not None:
        cfg = replace(cfg, base_seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, out=args.out)
    if args.threads is not None:
        cfg = replace(cfg, threads=args.threads)

    opts = {k: dict(v) for k, v in cfg.opts.items()}
    section = opts.get(args.command, {})
    if args.n is not None:
        for key in ("n", "k"):
            if key in section:
                section[key] = args.n
        if args.command == "simulate":
            section["init"] = f"pattern:{args.n}"
        if args.command == "stationary":
            section["init_specs"] = f"pattern:{args.n},homogeneous"
    if args.tmax is not None:
        for key in ("t_max", "t_end"):
            if key in section:
                section[key] = args.tmax
        if args.command == "simulate":
            cfg = replace(cfg, t_end=args.tmax)
    if args.iters is not None:
        for key in ("iterations", "runs", "samples"):
            if key in section:
                section[key] = args.iters
    opts[args.command] = section
    return replace(cfg, opts=opts)


def _outdir(cfg: RunConfig) -> Path:
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    save_config(cfg, path / "effective_config.ini")
    return path


def _threads(cfg: RunConfig) -> int:
    return cfg.threads if cfg.threads >= 1 else default_threads()


def _common_kwargs(cfg: RunConfig) -> dict:
    return dict(
        m=cfg.params.m,
        d=cfg.params.d,
        grid=cfg.grid,
        xi=cfg.xi,
        dt=cfg.dt,
        analysis=cfg.analysis,
        base_seed=cfg.base_seed,
        workers=_threads(cfg),
    )


def _cmd_dispersion(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    lin = linearize(cfg.params)
    mode = most_unstable_mode(lin)
    section = cfg.section("dispersion")
    line = f"a={cfg.params.a}"
    if mode is None:
        line += " no most-unstable mode"
        k_hi = 1.0
    else:
        k_mu, lam_mu = mode
        line += (f" k_mu={k_mu:.6f} (integer {integer_wavenumber(k_mu, cfg.grid.L):.2f})"
                 f" lambda_mu={lam_mu:.6e}")
        k_hi = 2.5 * k_mu
    try:
        tp = turing_point(cfg.params.m, cfg.params.d, (section["bracket_lo"], section["bracket_hi"]))
        line += f" a_T={tp.a_T:.6f} k_T={tp.k_T:.6f}"
    except (ValueError, RuntimeError):
        line += " (no Turing point in bracket)"
    with open(out / "dispersion.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "re_lambda1", "im_lambda1", "re_lambda2", "im_lambda2"])
        for k in np.linspace(0.0, k_hi, 400):
            l1, l2 = dispersion_eigenvalues(k, lin)
            writer.writerow([repr(float(k)), repr(l1.real), repr(l1.imag), repr(l2.real), repr(l2.imag)])
    print(line)
    return 0


def _cmd_pattern(cfg: RunConfig, out_path: str | None) -> int:
    n = cfg.section("pattern")["n"]
    result = periodic_pattern(PatternRequest(params=cfg.params, n=n, grid=cfg.grid))
    target = Path(out_path) if out_path else Path(cfg.out) / f"pattern_n{n}.bin"
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "wb") as fh:
        write_snapshot(fh, 0.0, result.state.u, result.state.v)
    print(f"pattern a={cfg.params.a} n={n}: residual={result.residual:.3e} "
          f"method={result.method} -> {target}")
    return 0


def _cmd_simulate(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    section = cfg.section("simulate")
    init = xp._initial_state(section["init"], cfg.params, cfg.grid, cfg.base_seed)
    sched = StepSchedule(dt=cfg.dt, t_end=cfg.t_end, observe_stride=cfg.observe_stride)
    series = []

    def classify(t, state):
        series.append((t, count_pulses(state.v, cfg.grid, cfg.analysis),
                       predominant_wavenumber(state.v, cfg.grid, cfg.analysis)))
        return None

    observers = [classify]
    snap_fh = open(out / "snapshots.bin", "wb") if section["snapshots"] else None
    if snap_fh is not None:
        observers.append(snapshot_observer(snap_fh))
    spacetime = open(out / "spacetime.csv", "w", newline="") if section["spacetime_csv"] else None
    if spacetime is not None:
        st_writer = csv.writer(spacetime)
        st_writer.writerow(["t", "x", "v"])
        x = cfg.grid.x()

        def dump(t, state):
            for xi_, vi in zip(x, state.v):
                st_writer.writerow([repr(float(t)), repr(float(xi_)), repr(float(vi))])
            return None

        observers.append(dump)
    try:
        result = simulate(init, cfg.params, NoiseConfig(xi=cfg.xi, seed=cfg.base_seed),
                          sched, observers=observers, grid=cfg.grid)
    finally:
        if snap_fh is not None:
            snap_fh.close()
        if spacetime is not None:
            spacetime.close()
    with open(out / "series.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "pulse_count", "predominant"])
        for t, pc, pw in series:
            writer.writerow([repr(float(t)), pc, pw])
    final = result.final
    print(f"simulate {section['init']} a={cfg.params.a} sigma={cfg.params.sigma}: "
          f"t={final.t:g} pulses={count_pulses(final.v, cfg.grid, cfg.analysis)} "
          f"predominant={predominant_wavenumber(final.v, cfg.grid, cfg.analysis)} -> {out}")
    return 0


def _cmd_exit_map(cfg: RunConfig, dt_check: bool) -> int:
    out = _outdir(cfg)
    section = cfg.section("exit-map")

    def run(dt):
        kwargs = _common_kwargs(cfg)
        kwargs["dt"] = dt
        kwargs["observe_stride"] = cfg.observe_stride
        return xp.run_exit_time_map(
            section["a_values"], section["k_values"], cfg.params.sigma,
            section["iterations"], section["t_max"], **kwargs,
        )

    result = run(cfg.dt)
    xp.write_exit_records(out / "exit_records.csv", result.records)
    xp.write_summaries(out / "exit_summary.csv", result.summaries)
    fits = []
    try:
        fits.append(xp.fit_exit_vs_a(result.summaries))
    except ValueError:
        pass
    if fits:
        xp.write_fits(out / "fits.csv", fits)
    for s in result.summaries:
        print(f"  a={s.a:g} k={s.k_init} mean={s.mean:.1f} std={s.std:.1f} "
              f"censored={s.censored_fraction:.0%} {s.note}")
    if dt_check:
        half = run(cfg.dt / 2.0)
        order = [s.k_init for s in sorted(half.summaries, key=lambda s: -np.nan_to_num(s.mean))]
        order_full = [s.k_init for s in sorted(result.summaries, key=lambda s: -np.nan_to_num(s.mean))]
        print(f"dt-check: ordering at dt={cfg.dt}: {order_full}; at dt/2: {order}")
    print(f"exit-map: {len(result.records)} records -> {out}")
    return 0


def _cmd_exit_sigma(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    section = cfg.section("exit-sigma")
    records = []
    for sigma in section["sigma_values"]:
        kwargs = _common_kwargs(cfg)
        res = xp.run_exit_time_map(
            [cfg.params.a], [section["k"]], sigma, section["iterations"], section["t_max"],
            observe_stride=cfg.observe_stride, **kwargs,
        )
        records.extend(res.records)
    xp.write_exit_records(out / "exit_records.csv", records)
    xp.write_summaries(out / "exit_summary.csv", xp.summarize_cells(records))
    try:
        fit, excluded = xp.fit_exit_vs_sigma(records)
        xp.write_fits(out / "fits.csv", [fit])
        note = f" (excluded over-censored sigma: {excluded})" if excluded else ""
        print(f"exit-sigma: alpha={fit.slope:.2f} +- {fit.stderr:.2f}, R2={fit.r2:.3f}{note} -> {out}")
    except ValueError as err:
        print(f"exit-sigma: fit unavailable: {err} -> {out}")
    return 0


def _cmd_stationary(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    section = cfg.section("stationary")
    finals = {}
    for spec in section["init_specs"].split(","):
        spec = spec.strip()
        result = xp.run_stationary_distribution(
            cfg.params.a, cfg.params.sigma, section["t_max"], section["iterations"], spec,
            observe_stride=section["hist_stride"], center_stride=section["center_stride"],
            **_common_kwargs(cfg),
        )
        tag = spec.replace(":", "")
        rows = [
            (t, cfg.params.a, cfg.params.sigma, k, result.density[i, j])
            for i, t in enumerate(result.times)
            for j, k in enumerate(result.ks)
        ]
        xp.write_histograms(out / f"histograms_{tag}.csv", rows)
        with open(out / f"stationary_stats_{tag}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "a", "sigma", "init", "mean", "std"])
            for i, t in enumerate(result.times):
                writer.writerow([repr(float(t)), repr(cfg.params.a), repr(cfg.params.sigma),
                                 spec, repr(float(result.mean[i])), repr(float(result.std[i]))])
        finals[spec] = result.final_mean
    summary = ", ".join(f"{k}: final mean {v:.2f}" for k, v in finals.items())
    print(f"stationary a={cfg.params.a} sigma={cfg.params.sigma}: {summary} -> {out}")
    return 0


def _cmd_from_uniform(cfg: RunConfig, boundary: str | None) -> int:
    out = _outdir(cfg)
    section = cfg.section("from-uniform")
    kwargs = _common_kwargs(cfg)
    kwargs.pop("xi")  # deterministic experiment, no noise spectrum
    results = xp.run_from_uniform(section["a_values"], section["runs"], section["t_end"], **kwargs)
    rows = []
    for res in results:
        rows.extend(
            (section["t_end"], res.a, 0.0, k, f) for k, f in zip(res.ks, res.freqs) if f > 0
        )
    xp.write_histograms(out / "histograms.csv", rows)
    if section["band_csv"]:
        xp.write_reference_band(out / "reference_band.csv", section["a_values"],
                                m=cfg.params.m, d=cfg.params.d, L=cfg.grid.L)
    in_balloon = None
    if boundary:
        from busselab.patterns import load_balloon_boundary

        bal = load_balloon_boundary(boundary)
        inside = [bal.contains(res.a, k) for res in results for k in res.outcomes]
        in_balloon = np.mean(inside) if inside else float("nan")
    with open(out / "selection_summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["a", "modal_k", "modal_frequency", "k_mu_integer", "band_low", "band_high"])
        for res in results:
            modal = int(res.ks[np.argmax(res.freqs)])
            writer.writerow([repr(res.a), modal, repr(float(res.freqs.max())),
                             repr(res.k_mu_integer), repr(res.band[0]), repr(res.band[1])])
            print(f"  a={res.a:g}: modal k={modal} (freq {res.freqs.max():.2f}), "
                  f"k_mu={res.k_mu_integer:.1f}, unstable band [{res.band[0]:.1f}, {res.band[1]:.1f}]")
    if in_balloon is not None:
        print(f"  fraction inside supplied boundary: {in_balloon:.0%}")
    print(f"from-uniform -> {out}")
    return 0


def _cmd_gap_fill(cfg: RunConfig, dt_check: bool) -> int:
    out = _outdir(cfg)
    section = cfg.section("gap-fill")

    def run(dt):
        return xp.run_gap_fill(
            cfg.params.a, cfg.params.sigma, section["n"],
            m=cfg.params.m, d=cfg.params.d, grid=cfg.grid,
            t_end=section["t_end"], xi=cfg.xi, dt=dt, observe_stride=cfg.observe_stride,
            analysis=cfg.analysis, center_stride=section["center_stride"],
            seed=cfg.base_seed,
            snapshot_path=str(out / "snapshots.bin") if section["snapshots"] else None,
        )

    result = run(cfg.dt)
    with open(out / "gapfill_series.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "pulse_count", "predominant", "local_mean", "local_mean_rounded"])
        for i, t in enumerate(result.times):
            writer.writerow([repr(float(t)), result.pulse_counts[i], result.predominant[i],
                             repr(float(result.local_mean[i])), int(round(result.local_mean[i]))])
    with open(out / "gapfill_events.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "time"])
        for name, time in result.events.items():
            writer.writerow([name, "" if time is None else repr(time)])
    events = ", ".join(f"{k}={v:g}" if v is not None else f"{k}=none"
                       for k, v in result.events.items())
    print(f"gap-fill a={cfg.params.a} n={section['n']} sigma={cfg.params.sigma}: {events}")
    if dt_check:
        half = run(cfg.dt / 2.0)
        ev = ", ".join(f"{k}={v:g}" if v is not None else f"{k}=none"
                       for k, v in half.events.items())
        print(f"dt-check at dt={cfg.dt / 2}: {ev}")
    print(f"gap-fill -> {out}")
    return 0


def _cmd_validate_noise(cfg: RunConfig) -> int:
    section = cfg.section("validate-noise")
    samples = section["samples"]
    spec = build_spectrum(NoiseConfig(xi=cfg.xi, seed=cfg.base_seed), cfg.grid)
    rng = make_rng(cfg.base_seed)
    q0 = kernel(0.0, cfg.xi)
    probes = [0, 1, 4, 16]
    sums = np.zeros(len(probes))
    sq = 0.0
    prev0 = np.empty(samples)
    for i in range(samples):
        inc = sample_increment(spec, rng)
        sq += inc[0] ** 2
        for j, lag in enumerate(probes):
            sums[j] += inc[0] * inc[lag]
        prev0[i] = inc[0]
    var = sq / samples
    cov = sums / samples
    lag1_t = np.corrcoef(prev0[:-1], prev0[1:])[0, 1]
    q_at = kernel(np.array(probes) * cfg.grid.h, cfg.xi)
    ok = True
    lines = [
        f"trace/N = {float(np.sum(spec.sqrt_eigs**2)) / cfg.grid.N:.6f} (q(0) = {q0})",
        f"clamped eigenvalue mass = {spec.clamped_mass:.2e}",
        f"pointwise variance = {var:.4f} (target {q0}, tol 3%)",
        f"lag-1 temporal correlation = {lag1_t:+.4f} (tol 0.01 + sampling)",
    ]
    if abs(var - q0) > 0.03 * q0:
        ok = False
    for j, lag in enumerate(probes[1:], start=1):
        lines.append(f"cov at lag {lag}h = {cov[j]:+.4f} (kernel {q_at[j]:+.4f}, tol 5% of q(0))")
        if abs(cov[j] - q_at[j]) > 0.05 * q0:
            ok = False
    if spec.clamped_mass >= 0.01:
        ok = False
    for line in lines:
        print(line)
    print("noise validation:", "OK" if ok else "FAILED")
    return 0 if ok else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
    except ConfigError as err:
        print(err, file=sys.stderr)
        return 2
    try:
        if args.command == "dispersion":
            return _cmd_dispersion(cfg)
        if args.command == "pattern":
            return _cmd_pattern(cfg, args.out)
        if args.command == "simulate":
            return _cmd_simulate(cfg)
        if args.command == "exit-map":
            return _cmd_exit_map(cfg, args.dt_check)
        if args.command == "exit-sigma":
            return _cmd_exit_sigma(cfg)
        if args.command == "stationary":
            return _cmd_stationary(cfg)
        if args.command == "from-uniform":
            return _cmd_from_uniform(cfg, args.boundary)
        if args.command == "gap-fill":
            return _cmd_gap_fill(cfg, args.dt_check)
        if args.command == "validate-noise":
            return _cmd_validate_noise(cfg)
        raise AssertionError(args.command)
    except SimulationBlowupError as err:
        print(f"numerical blow-up: {err}", file=sys.stderr)
        return 3
    except (PatternError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
