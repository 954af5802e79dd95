"""Right-hand sides and closed-form helpers for the similarity ODEs.

The laboratory studies radially symmetric profiles of u_t = -u_xxxx + |u|^{p-1}u
in similarity variables.  Four ODE variants share the structure

    f'''' = -mu*y*f' + c*f + |f|^{p-1}f  (+ radial corrections for N > 1)

and differ only in the drift/linear coefficients (mu, c).  Everything here is
a pure function; the heavier numerics live in the other modules.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum


class Variant(Enum):
    """Which similarity ODE is being solved."""

    BLOW_UP = "blowup"          # backward similarity: f'''' = -(1/4)y f' - f/(p-1) + |f|^{p-1}f
    GLOBAL = "global"           # forward similarity:  F'''' = +(1/4)y F' + F/(p-1) + |F|^{p-1}F
    MU_FAMILY = "mu-family"     # drift-parameterized: f'''' = -mu y f' - f/(p-1) + |f|^{p-1}f
    PURE_QUARTIC = "pure-quartic"  # driftless model:  f'''' = |f|^{p-1}f


@dataclass(frozen=True)
class ModelParams:
    """Exponent, dimension and variant selecting one similarity ODE.

    p must exceed 1.  N is the spatial dimension (N > 1 switches on the
    radial correction terms).  mu is read only by the MU_FAMILY variant,
    where it must be positive.
    """

    p: float
    N: int = 1
    mu: float = 0.0
    variant: Variant = Variant.BLOW_UP

    def __post_init__(self):
        if not self.p > 1.0:
            raise ValueError(f"p must be > 1, got {self.p}")
        if self.N < 1 or int(self.N) != self.N:
            raise ValueError(f"N must be an integer >= 1, got {self.N}")
        if self.variant is Variant.MU_FAMILY and not self.mu > 0.0:
            raise ValueError("MU_FAMILY requires mu > 0")

    def drift_linear(self) -> tuple[float, float]:
        """Coefficients (mu, c) of the common form f'''' = -mu*y*f' + c*f + |f|^{p-1}f."""
        if self.variant is Variant.BLOW_UP:
            return 0.25, -1.0 / (self.p - 1.0)
        if self.variant is Variant.GLOBAL:
            return -0.25, 1.0 / (self.p - 1.0)
        if self.variant is Variant.MU_FAMILY:
            return self.mu, -1.0 / (self.p - 1.0)
        return 0.0, 0.0


@dataclass(frozen=True)
class PhaseState:
    """Point (y, f, f', f'', f''') of the 4-dimensional phase space."""

    y: float
    f0: float
    f1: float
    f2: float
    f3: float

    @property
    def escaped(self) -> bool:
        """True when any component is non-finite (blow-up detection flag)."""
        return not (math.isfinite(self.f0) and math.isfinite(self.f1)
                    and math.isfinite(self.f2) and math.isfinite(self.f3))


def odd_power(f: float, p: float) -> float:
    """|f|^{p-1} f evaluated as sign(f)|f|^p, stable for f < 0 and non-integer p."""
    return math.copysign(abs(f) ** p, f) if f != 0.0 else 0.0


def eval_rhs(state: PhaseState, params: ModelParams) -> float:
    """Value of f'''' prescribed by the ODE at the given phase point.

    For N > 1 the radial terms
        -(2(N-1)/y) f''' - ((N-1)(N-3)/y^2) f'' + ((N-1)(N-3)/y^3) f'
    are added; they require y > 0.

    Non-finite input states propagate as NaN (the caller sees the escaped
    flag), finite states always produce a finite value.
    """
    if state.escaped:
        return math.nan
    mu, c = params.drift_linear()
    y, f0, f1, f2, f3 = state.y, state.f0, state.f1, state.f2, state.f3
    val = -mu * y * f1 + c * f0 + odd_power(f0, params.p)
    if params.N > 1:
        if y <= 0.0:
            raise ValueError(f"radial terms are singular at y <= 0 (y={y})")
        n1 = params.N - 1.0
        n3 = params.N - 3.0
        val += -(2.0 * n1 / y) * f3 - (n1 * n3 / y ** 2) * f2 + (n1 * n3 / y ** 3) * f1
    return val


def flat_equilibrium(p: float) -> float:
    """Constant equilibrium f* = (p-1)^{-1/(p-1)} of the drift variants."""
    return (p - 1.0) ** (-1.0 / (p - 1.0))


def phi(m: float) -> float:
    """Quartic Phi(m) = m(m-1)(m-2)(m-3); symmetric about m = 3/2."""
    return m * (m - 1.0) * (m - 2.0) * (m - 3.0)


def blowup_amplitude(p: float) -> float:
    """Amplitude A0 = Phi(-4/(p-1))^{1/(p-1)} of the exact finite-point
    blow-up solution A0 (y - y0)^{-4/(p-1)} of f'''' = |f|^{p-1}f."""
    return phi(-4.0 / (p - 1.0)) ** (1.0 / (p - 1.0))


def characteristic_roots(p: float) -> list[complex]:
    """All four roots of Phi(m) = p*Phi(-4/(p-1)), sorted by real part.

    The substitution m = 3/2 + s turns the quartic into a biquadratic,
    s^4 - (5/2)s^2 + 9/16 - K = 0 with K = p*Phi(-4/(p-1)) > 0, so the
    roots come out in closed form: one real pair 3/2 +/- sqrt(5/4 + r)
    and one complex pair 3/2 +/- i*sqrt(r - 5/4) with r = sqrt(1 + K)
    (K > 9/16 for every p > 1, so the second pair is always complex).
    """
    K = p * phi(-4.0 / (p - 1.0))
    if not K > 0.0:
        raise ValueError(f"characteristic constant must be positive, got {K}")
    r = math.sqrt(1.0 + K)
    s_real = math.sqrt(5.0 / 4.0 + r)
    s_imag = cmath.sqrt(complex(5.0 / 4.0 - r, 0.0))  # imaginary for K > 9/16
    roots = [1.5 - s_real + 0j, 1.5 + s_imag, 1.5 - s_imag, 1.5 + s_real + 0j]
    return sorted(roots, key=lambda z: (z.real, z.imag))


def hj_profile(xi: float, p: float, c: float, k: int = 4) -> float:
    """Hamilton-Jacobi outer profile f*(1 + c xi^k)^{-1/(p-1)}.

    Exact stationary solution of -(1/k) xi f' - f/(p-1) + |f|^{p-1}f = 0
    for any constant c.  Raises on the pole set 1 + c xi^k <= 0 (for c < 0
    the profile blows up at xi = |c|^{-1/k}).
    """
    if k < 4 or k % 2:
        raise ValueError(f"k must be an even integer >= 4, got {k}")
    base = 1.0 + c * xi ** k
    if base <= 0.0:
        raise ValueError(
            f"profile pole: 1 + c*xi^k = {base:.6g} <= 0 at xi={xi:.6g}"
            + (f" (pole at |xi| = {abs(c) ** (-1.0 / k):.6g})" if c < 0.0 else ""))
    return flat_equilibrium(p) * base ** (-1.0 / (p - 1.0))
