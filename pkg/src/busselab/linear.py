"""Linear stability of the vegetated homogeneous state.

Linearizing about ``(ubar, vbar)`` gives a two-component operator whose
Fourier symbol at continuous wave number ``k`` (perturbations ~exp(i*k*x))
is ``diag(-d1*k^2, -d2*k^2) + A``.  Its eigenvalues solve

    lambda^2 + ((d1+d2)k^2 - tr A) lambda + (d1*d2*k^4 - Gamma*k^2 + det A) = 0

with ``Gamma = d1*A22 + d2*A11``.  At an interior extremum of the real
branch the eigenvalue satisfies ``lambda = (Gamma - 2*d1*d2*k^2)/(d1+d2)``;
substituting back yields an even quartic in ``k`` whose positive branch is
the most unstable mode.

``k`` here is the continuous (angular) wave number.  Conversion to the
integer pulse-count convention ``2L/lam`` happens via
:func:`integer_wavenumber` in the experiment layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from busselab.model import ModelParams, homogeneous_states

__all__ = [
    "Linearization",
    "TuringPoint",
    "linearize",
    "dispersion_eigenvalues",
    "most_unstable_mode",
    "turing_point",
    "unstable_band",
    "integer_wavenumber",
]


@dataclass(frozen=True)
class Linearization:
    """Reaction Jacobian at the vegetated state plus diffusion coefficients."""

    A: np.ndarray  # 2x2
    d1: float
    d2: float

    @property
    def Gamma(self) -> float:
        return self.d1 * self.A[1, 1] + self.d2 * self.A[0, 0]

    @property
    def trace(self) -> float:
        return self.A[0, 0] + self.A[1, 1]

    @property
    def det(self) -> float:
        return self.A[0, 0] * self.A[1, 1] - self.A[0, 1] * self.A[1, 0]


@dataclass(frozen=True)
class TuringPoint:
    """Rainfall and critical wave number where the vegetated state first
    destabilizes against periodic perturbations."""

    a_T: float
    k_T: float


def linearize(params: ModelParams) -> Linearization:
    """Jacobian of the reaction terms at the lower vegetated state."""
    states = homogeneous_states(params)
    if states.lower is None:
        raise ValueError(f"no vegetated state exists for a={params.a} < 2m={2 * params.m}")
    ubar, vbar = states.lower
    A = np.array(
        [
            [-1.0 - vbar**2, -2.0 * ubar * vbar],
            [vbar**2, -params.m + 2.0 * ubar * vbar],
        ]
    )
    return Linearization(A=A, d1=params.d, d2=1.0)


def dispersion_eigenvalues(k: float, lin: Linearization) -> tuple[complex, complex]:
    """Both eigenvalues of the Fourier symbol at wave number ``k``, ordered
    by descending real part (then descending imaginary part)."""
    k2 = k * k
    b = (lin.d1 + lin.d2) * k2 - lin.trace
    c = lin.d1 * lin.d2 * k2 * k2 - lin.Gamma * k2 + lin.det
    disc = complex(b * b - 4.0 * c) ** 0.5
    roots = ((-b + disc) / 2.0, (-b - disc) / 2.0)
    return tuple(sorted(roots, key=lambda z: (-z.real, -z.imag)))


def _mu_quartic_coeffs(lin: Linearization) -> tuple[float, float, float]:
    """Coefficients (c2, c1, c0) of the quadratic in s = k^2 obtained by
    substituting the extremal eigenvalue back into the dispersion relation."""
    e = lin.d1 * lin.d2
    S = lin.d1 + lin.d2
    T = lin.trace
    G = lin.Gamma
    D = lin.det
    c2 = -e * (lin.d1 - lin.d2) ** 2
    c1 = 2.0 * e * (T * S - 2.0 * G)
    c0 = G * G - T * G * S + S * S * D
    return c2, c1, c0


def most_unstable_mode(lin: Linearization) -> tuple[float, float] | None:
    """Wave number maximizing the leading real eigenvalue, with that
    eigenvalue.  Returns None when the quartic has no positive real root.

    The returned eigenvalue may be negative; its sign flips exactly at the
    Turing bifurcation.
    """
    c2, c1, c0 = _mu_quartic_coeffs(lin)
    if c2 == 0.0:
        roots = np.array([-c0 / c1]) if c1 != 0.0 else np.array([])
    else:
        roots = np.roots([c2, c1, c0])
    e = lin.d1 * lin.d2
    S = lin.d1 + lin.d2
    best = None
    for s in roots:
        if abs(s.imag) > 1e-12 * (1.0 + abs(s.real)) or s.real <= 0.0:
            continue
        s = s.real
        lam = (lin.Gamma - 2.0 * e * s) / S
        # The substitution assumed a real eigenvalue branch; discard roots
        # where the quadratic actually has a complex pair there.
        top, _ = dispersion_eigenvalues(np.sqrt(s), lin)
        if abs(top.imag) > 1e-8 * (1.0 + abs(top.real)):
            continue
        if best is None or lam > best[1]:
            best = (float(np.sqrt(s)), float(lam))
    return best


def _lambda_mu_of_a(a: float, m: float, d: float) -> float:
    mode = most_unstable_mode(linearize(ModelParams(a=a, m=m, d=d)))
    if mode is None:
        raise ValueError(f"no most-unstable mode at a={a}")
    return mode[1]


def turing_point(m: float, d: float, bracket: tuple[float, float]) -> TuringPoint:
    """Locate the rainfall where the most-unstable eigenvalue changes sign.

    ``bracket`` must straddle the sign change; otherwise a ValueError
    reporting the endpoint eigenvalues is raised.
    """
    a_lo, a_hi = bracket
    f_lo = _lambda_mu_of_a(a_lo, m, d)
    f_hi = _lambda_mu_of_a(a_hi, m, d)
    if np.sign(f_lo) == np.sign(f_hi):
        raise ValueError(
            "no sign change of lambda_mu in bracket: "
            f"lambda_mu({a_lo})={f_lo:.6e}, lambda_mu({a_hi})={f_hi:.6e}"
        )
    a_T = brentq(_lambda_mu_of_a, a_lo, a_hi, args=(m, d), xtol=1e-13, rtol=1e-15)
    k_T, lam_T = most_unstable_mode(linearize(ModelParams(a=a_T, m=m, d=d)))
    if abs(lam_T) > 1e-10:
        raise RuntimeError(f"root polish failed: lambda_mu(a_T)={lam_T:.3e}")
    return TuringPoint(a_T=float(a_T), k_T=float(k_T))


def unstable_band(lin: Linearization) -> tuple[float, float] | None:
    """Continuous-k interval where the homogeneous state is linearly
    unstable (the constant term of the dispersion quadratic is negative)."""
    e = lin.d1 * lin.d2
    disc = lin.Gamma**2 - 4.0 * e * lin.det
    if disc <= 0 or lin.Gamma <= 0:
        return None
    s_lo = (lin.Gamma - np.sqrt(disc)) / (2.0 * e)
    s_hi = (lin.Gamma + np.sqrt(disc)) / (2.0 * e)
    if s_hi <= 0:
        return None
    return float(np.sqrt(max(s_lo, 0.0))), float(np.sqrt(s_hi))


def integer_wavenumber(k: float, L: float) -> float:
    """Convert a continuous (angular) wave number to the pulse-count
    convention: wavelength 2*pi/k corresponds to 2L/(2*pi/k) pulses."""
    return L * k / np.pi
