"""Core model definitions for the stochastic dryland vegetation system.

The system couples water ``u`` and biomass ``v`` on a periodic interval
``[-L, L]``:

    du = [d*u_xx + a - u - u*v^2] dt
    dv = [v_xx - m*v + u*v^2] dt + sigma*v dW

Everything here is nondimensional.  This module holds the parameter and
state containers, the pointwise reaction terms, the spatially homogeneous
steady states and the integer wave-number convention (a pattern with
wavelength ``lam`` on ``[-L, L]`` has ``2L/lam`` pulses).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModelParams",
    "Grid1D",
    "FieldState",
    "HomogeneousStates",
    "DEFAULT_M",
    "DEFAULT_D",
    "DEFAULT_L",
    "DEFAULT_N",
    "default_params",
    "default_grid",
    "reaction_terms",
    "homogeneous_states",
    "pulses_for_wavelength",
]

# Fixed system parameters used throughout (water diffusion, mortality,
# domain half-length, grid resolution).
DEFAULT_M = 0.45
DEFAULT_D = 500.0
DEFAULT_L = 250.0
DEFAULT_N = 4096


@dataclass(frozen=True)
class ModelParams:
    """Rainfall ``a``, mortality ``m``, water diffusion ``d``, noise ``sigma``."""

    a: float
    m: float = DEFAULT_M
    d: float = DEFAULT_D
    sigma: float = 0.0

    def __post_init__(self):
        for name in ("a", "m", "d", "sigma"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
        if self.a < 0:
            raise ValueError(f"a must be >= 0, got {self.a}")
        if self.m <= 0:
            raise ValueError(f"m must be > 0, got {self.m}")
        if self.d <= 0:
            raise ValueError(f"d must be > 0, got {self.d}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class Grid1D:
    """Periodic grid on ``[-L, L]`` with ``N`` points, ``x_i = -L + i*h``."""

    L: float = DEFAULT_L
    N: int = DEFAULT_N
    h: float = field(init=False)

    def __post_init__(self):
        if not (self.L > 0 and np.isfinite(self.L)):
            raise ValueError(f"L must be positive and finite, got {self.L}")
        if self.N < 8 or (self.N & (self.N - 1)) != 0:
            raise ValueError(f"N must be a power of two >= 8, got {self.N}")
        object.__setattr__(self, "h", 2.0 * self.L / self.N)

    def x(self) -> np.ndarray:
        """Grid point coordinates."""
        return -self.L + self.h * np.arange(self.N)

    def periodic_distance(self, y: np.ndarray) -> np.ndarray:
        """Minimal-image distance of coordinate offsets on the circle."""
        span = 2.0 * self.L
        return np.abs((np.asarray(y) + self.L) % span - self.L)


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FieldState:
    """Water and biomass samples on the grid at one instant.

    Biomass may dip slightly negative: the time discretization of the
    multiplicative noise does not preserve v >= 0 exactly, and clipping
    would bias the noise.  Downstream classifiers tolerate this.
    """

    u: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        u = _frozen_array(self.u)
        v = _frozen_array(self.v)
        if u.ndim != 1 or v.ndim != 1 or u.shape != v.shape:
            raise ValueError(f"u and v must be 1-d of equal length, got {u.shape} and {v.shape}")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ValueError("state contains non-finite values")
        if not np.isfinite(self.t):
            raise ValueError(f"t must be finite, got {self.t}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def N(self) -> int:
        return self.u.shape[0]


@dataclass(frozen=True)
class HomogeneousStates:
    """Spatially homogeneous steady states.

    ``bare`` always exists.  For a >= 2m a saddle-node creates two vegetated
    states; ``lower`` is the one with smaller water value (the branch that
    undergoes the Turing instability) and ``upper`` is the unstable middle
    state.  Both are None below the saddle-node.
    """

    bare: tuple[float, float]
    lower: tuple[float, float] | None
    upper: tuple[float, float] | None


def default_params(a: float, sigma: float = 0.0) -> ModelParams:
    """Parameters with the fixed defaults m=0.45, d=500."""
    return ModelParams(a=a, m=DEFAULT_M, d=DEFAULT_D, sigma=sigma)


def default_grid() -> Grid1D:
    """The default grid: L=250, N=4096."""
    return Grid1D(L=DEFAULT_L, N=DEFAULT_N)


def reaction_terms(state: FieldState, params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Non-diffusive parts of the dynamics, evaluated pointwise.

    Returns ``(a - u - u*v^2, -m*v + u*v^2)``.
    """
    u, v = state.u, state.v
    uv2 = u * v * v
    return params.a - u - uv2, -params.m * v + uv2


def homogeneous_states(params: ModelParams) -> HomogeneousStates:
    """All spatially homogeneous steady states for the given parameters."""
    a, m = params.a, params.m
    bare = (a, 0.0)
    disc = a * a - 4.0 * m * m
    if disc < 0:
        return HomogeneousStates(bare=bare, lower=None, upper=None)
    root = np.sqrt(disc)
    u_lo = (a - root) / 2.0
    u_hi = (a + root) / 2.0
    return HomogeneousStates(
        bare=bare,
        lower=(u_lo, (a - u_lo) / m),
        upper=(u_hi, (a - u_hi) / m),
    )


def pulses_for_wavelength(lam: float, L: float) -> float:
    """Integer wave-number convention: a pattern with wavelength ``lam`` has
    ``2L/lam`` pulses on ``[-L, L]``."""
    if not (lam > 0 and np.isfinite(lam)):
        raise ValueError(f"wavelength must be positive, got {lam}")
    return 2.0 * L / lam
