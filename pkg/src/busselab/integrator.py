"""Semi-implicit Euler-Maruyama time stepping.

One step solves

    (I - dt*L_h) X(t+dt) = X(t) + dt*f(X(t)) + sqrt(dt)*sigma*(0, v(t))*dW

where L_h is the full linear part of the equations, discretized with the
periodic second-order central-difference Laplacian: ``d*u_xx - u`` for
water and ``v_xx - m*v`` for biomass.  Only the genuinely nonlinear terms
``f = (a - u*v^2, u*v^2)`` are explicit, and the noise is evaluated at the
left endpoint (Ito).  The implicit solve is a circulant system, done
exactly per Fourier mode: mode j of component c is divided by
``1 + dt*r_c - dt*c*mu_j`` with ``mu_j = (2*cos(2*pi*j/N) - 2)/h^2 <= 0``
and linear decay rate ``r_u = 1``, ``r_v = m``, so every multiplier lies in
(0, 1] and the scheme is unconditionally linearly stable.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Callable, Sequence

import numpy as np
import scipy.fft as sfft

from busselab.model import FieldState, Grid1D, ModelParams
from busselab.noise import NoiseConfig, NoiseSpectrum, build_spectrum, make_rng

__all__ = [
    "ImplicitOperator",
    "StepSchedule",
    "SimulationBlowupError",
    "SimulationResult",
    "STOP",
    "step",
    "simulate",
    "write_snapshot",
    "read_snapshots",
    "snapshot_observer",
]

SNAPSHOT_MAGIC = b"BBL1"

# Sentinel an observer may return to stop the simulation after the current
# observation (used for first-exit early termination).
STOP = object()


class SimulationBlowupError(RuntimeError):
    """State became non-finite during time stepping."""

    def __init__(self, t: float, index: int, component: str):
        self.t = t
        self.index = index
        self.component = component
        super().__init__(f"non-finite {component} at t={t:.6g}, grid index {index}")


@dataclass(frozen=True)
class ImplicitOperator:
    """Per-mode multipliers of (I - dt*L_h)^-1 for both components.

    L_h couples diffusion with the linear decay of each component, so the
    multipliers are ``1/(1 + dt*r_c - dt*c*mu_j)`` with (c, r) = (d, 1) for
    water and (1, m) for biomass.
    """

    grid: Grid1D
    d: float
    m: float
    dt: float
    mult_u: np.ndarray = field(init=False)
    mult_v: np.ndarray = field(init=False)
    _half_u: np.ndarray = field(init=False, repr=False)
    _half_v: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        N, h = self.grid.N, self.grid.h
        mu = (2.0 * np.cos(2.0 * np.pi * np.arange(N) / N) - 2.0) / (h * h)
        for name, c, r in (("mult_u", self.d, 1.0), ("mult_v", 1.0, self.m)):
            mult = 1.0 / (1.0 + self.dt * r - self.dt * c * mu)
            mult.setflags(write=False)
            object.__setattr__(self, name, mult)
        for name, full in (("_half_u", self.mult_u), ("_half_v", self.mult_v)):
            half = full[: N // 2 + 1].copy()
            half.setflags(write=False)
            object.__setattr__(self, name, half)

    def solve_u(self, rhs: np.ndarray) -> np.ndarray:
        return sfft.irfft(self._half_u * sfft.rfft(rhs), n=self.grid.N)

    def solve_v(self, rhs: np.ndarray) -> np.ndarray:
        return sfft.irfft(self._half_v * sfft.rfft(rhs), n=self.grid.N)


@dataclass(frozen=True)
class StepSchedule:
    """Timestep, horizon and observation interval (all in time units)."""

    dt: float = 0.05
    t_end: float = 500.0
    observe_stride: float = 4.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_end < 0:
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")
        ratio = self.observe_stride / self.dt
        if self.observe_stride <= 0 or abs(ratio - round(ratio)) > 1e-9 * max(ratio, 1.0):
            raise ValueError(
                f"observe_stride={self.observe_stride} must be a positive multiple of dt={self.dt}"
            )

    @property
    def stride_steps(self) -> int:
        return int(round(self.observe_stride / self.dt))


def _advance(
    u: np.ndarray,
    v: np.ndarray,
    params: ModelParams,
    spec: NoiseSpectrum | None,
    op: ImplicitOperator,
    dt: float,
    rng: np.random.Generator | None,
) -> tuple[np.ndarray, np.ndarray]:
    """One raw update on plain arrays; no validity checks (the caller turns
    non-finite output into a SimulationBlowupError)."""
    with np.errstate(over="ignore", invalid="ignore"):
        uv2 = u * v * v
        rhs_u = u + dt * (params.a - uv2)
        rhs_v = v + dt * uv2
        if params.sigma > 0.0:
            g = rng.standard_normal(spec.grid.N)
            dw = sfft.irfft(spec._sqrt_half * sfft.rfft(g), n=spec.grid.N)
            rhs_v += np.sqrt(dt) * params.sigma * v * dw
        return op.solve_u(rhs_u), op.solve_v(rhs_v)


def _check_finite(u: np.ndarray, v: np.ndarray, t: float) -> None:
    for name, arr in (("u", u), ("v", v)):
        if not np.all(np.isfinite(arr)):
            index = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise SimulationBlowupError(t=t, index=index, component=name)


def step(
    state: FieldState,
    params: ModelParams,
    spec: NoiseSpectrum | None,
    op: ImplicitOperator,
    dt: float,
    rng: np.random.Generator | None = None,
) -> FieldState:
    """Advance one timestep.  ``rng`` may be omitted only when sigma == 0."""
    if dt != op.dt:
        raise ValueError(f"dt={dt} does not match the operator's dt={op.dt}")
    if params.sigma > 0.0 and (rng is None or spec is None):
        raise ValueError("sigma > 0 requires a noise spectrum and rng")
    u2, v2 = _advance(state.u, state.v, params, spec, op, dt, rng)
    t2 = state.t + dt
    _check_finite(u2, v2, t2)
    return FieldState(u=u2, v=v2, t=t2)


@dataclass
class SimulationResult:
    """Final state plus per-observer series of (t, value) pairs."""

    final: FieldState
    observations: list[list[tuple[float, object]]]
    stopped_early: bool = False


def simulate(
    init: FieldState,
    params: ModelParams,
    cfg: NoiseConfig,
    sched: StepSchedule,
    observers: Sequence[Callable[[float, FieldState], object]] = (),
    grid: Grid1D | None = None,
) -> SimulationResult:
    """Integrate from ``init.t`` to ``sched.t_end`` with observer hooks.

    Observers are called at ``init.t`` and every ``observe_stride`` after;
    an observer returning :data:`STOP` ends the run after that observation.
    Identical seeds and configuration give identical outputs.
    """
    grid = grid or Grid1D(N=init.N)
    if init.N != grid.N:
        raise ValueError(f"state length {init.N} does not match grid N={grid.N}")
    op = ImplicitOperator(grid=grid, d=params.d, m=params.m, dt=sched.dt)
    spec = build_spectrum(cfg, grid) if params.sigma > 0.0 else None
    rng = make_rng(cfg.seed) if params.sigma > 0.0 else None

    u, v = init.u.copy(), init.v.copy()
    t0 = init.t
    n_steps = int(np.floor((sched.t_end - t0) / sched.dt + 1e-9))
    n_steps = max(n_steps, 0)
    stride = sched.stride_steps

    observations: list[list[tuple[float, object]]] = [[] for _ in observers]
    stopped = False

    def observe(t: float, u_arr: np.ndarray, v_arr: np.ndarray) -> bool:
        snapshot = FieldState(u=u_arr, v=v_arr, t=t)
        request_stop = False
        for out, obs in zip(observations, observers):
            value = obs(t, snapshot)
            if value is STOP:
                request_stop = True
            else:
                out.append((t, value))
        return request_stop

    t = t0
    if n_steps == 0:
        return SimulationResult(final=init, observations=observations)
    if observers and observe(t0, u, v):
        stopped = True
    else:
        for i in range(1, n_steps + 1):
            t = t0 + i * sched.dt
            u, v = _advance(u, v, params, spec, op, sched.dt, rng)
            _check_finite(u, v, t)
            if observers and i % stride == 0:
                if observe(t, u, v):
                    stopped = True
                    break
    return SimulationResult(
        final=FieldState(u=u, v=v, t=t),
        observations=observations,
        stopped_early=stopped,
    )


def write_snapshot(fh: BinaryIO, t: float, u: np.ndarray, v: np.ndarray) -> None:
    """Append one binary record: magic, N (u64 LE), t (f64 LE), u then v."""
    u = np.ascontiguousarray(u, dtype="<f8")
    v = np.ascontiguousarray(v, dtype="<f8")
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError("u and v must be 1-d of equal length")
    fh.write(SNAPSHOT_MAGIC)
    fh.write(struct.pack("<Q", u.shape[0]))
    fh.write(struct.pack("<d", float(t)))
    fh.write(u.tobytes())
    fh.write(v.tobytes())


def read_snapshots(path: str) -> list[tuple[float, np.ndarray, np.ndarray]]:
    """All records of a snapshot file as (t, u, v) tuples."""
    records = []
    with open(path, "rb") as fh:
        while True:
            magic = fh.read(4)
            if not magic:
                break
            if magic != SNAPSHOT_MAGIC:
                raise ValueError(f"bad snapshot magic {magic!r} in {path}")
            (n,) = struct.unpack("<Q", fh.read(8))
            (t,) = struct.unpack("<d", fh.read(8))
            payload = fh.read(16 * n)
            if len(payload) != 16 * n:
                raise ValueError(f"truncated snapshot record in {path}")
            u = np.frombuffer(payload[: 8 * n], dtype="<f8").copy()
            v = np.frombuffer(payload[8 * n :], dtype="<f8").copy()
            records.append((t, u, v))
    return records


def snapshot_observer(fh: BinaryIO) -> Callable[[float, FieldState], None]:
    """Observer that appends every observation to an open binary file."""

    def observer(t: float, state: FieldState):
        write_snapshot(fh, t, state.u, state.v)

    return observer
