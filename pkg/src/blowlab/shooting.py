"""Inward shooting for similarity profiles and orbit-fate classification.

Shots start on the far-field bundle at y_max and integrate toward the
origin; the two bundle coefficients (C1, C2) are the shooting parameters
and the two symmetry conditions f'(0) = f'''(0) = 0 are the targets.  The
pure-quartic variant is shot outward instead, between orbits escaping to
+inf and -inf, to extract its periodic separatrix.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .asymptotics import BundleCoeffs, default_y_match, eval_bundle
from .odecore import ModelParams, PhaseState, Variant, flat_equilibrium, odd_power
from .profiles import ProfileGrid


class BracketError(RuntimeError):
    """A root bracket failed to straddle a sign change."""


class FateKind(enum.Enum):
    DECAYED_SYMMETRIC = "DecayedSymmetric"
    BLOW_UP_PLUS = "BlowUpPlus"
    BLOW_UP_MINUS = "BlowUpMinus"
    OSCILLATORY_UNBOUNDED = "OscillatoryUnbounded"
    REACHED_ORIGIN = "ReachedOrigin"


@dataclass(frozen=True)
class OrbitFate:
    """Terminal classification of one shot.

    y0 is the finite blow-up location and is set only for BlowUp fates.
    """

    kind: FateKind
    terminal: PhaseState
    y0: Optional[float] = None


@dataclass(frozen=True)
class ShotResult:
    """Trajectory plus fate; origin derivatives only when the origin was hit."""

    trajectory: ProfileGrid
    fate: OrbitFate
    f1_at_0: Optional[float] = None
    f3_at_0: Optional[float] = None


def _rhs(params: ModelParams):
    mu, c = params.drift_linear()
    p = params.p

    def fun(y, u):
        return (u[1], u[2], u[3],
                -mu * y * u[1] + c * u[0] + odd_power(u[0], p))

    return fun


def _classify_escape(sol, escape_sign):
    """BlowUp(sign) unless the recent extrema show alternating growth."""
    f_ext = sol.y_events[2][:, 0] if sol.y_events[2].size else np.array([])
    if f_ext.size >= 3:
        a, b, c = f_ext[-3:]
        growing = abs(a) < abs(b) < abs(c)
        alternating = (a * b < 0.0) and (b * c < 0.0)
        if growing and alternating:
            return FateKind.OSCILLATORY_UNBOUNDED
    return (FateKind.BLOW_UP_PLUS if escape_sign > 0
            else FateKind.BLOW_UP_MINUS)


def shoot(params: ModelParams, coeffs: BundleCoeffs, y_max: Optional[float] = None,
          escape_threshold: Optional[float] = None, rtol: float = 1e-11,
          n_nodes: int = 2001) -> ShotResult:
    """Integrate inward from the far-field bundle and classify the orbit.

    Terminates at y = 0 (ReachedOrigin), at |f| > escape_threshold
    (BlowUp+-, with OscillatoryUnbounded when the last three extrema grow
    with alternating sign), and reports integrator step-size underflow as a
    blow-up at the last node.
    """
    if params.N != 1:
        raise ValueError("inward shooting runs on the line (N = 1); radial "
                         "profiles go through the boundary-value solver")
    if y_max is None:
        y_max = max(1.2 * default_y_match(params.p), coeffs.y_match)
    if y_max < coeffs.y_match:
        raise ValueError(f"y_max = {y_max} is inside the bundle anchor "
                         f"y_match = {coeffs.y_match}")
    thr = escape_threshold
    if thr is None:
        thr = 1e3 * flat_equilibrium(params.p)

    u0 = [float(eval_bundle(y_max, coeffs, params, derivative_order=k))
          for k in range(4)]

    def hit_plus(y, u):
        return u[0] - thr

    def hit_minus(y, u):
        return u[0] + thr

    def extremum(y, u):
        return u[1]

    hit_plus.terminal = True
    hit_plus.direction = 1.0
    hit_minus.terminal = True
    hit_minus.direction = -1.0
    extremum.terminal = False

    sol = solve_ivp(_rhs(params), (y_max, 0.0), u0, method="DOP853",
                    rtol=rtol, atol=1e-14, dense_output=True,
                    events=[hit_plus, hit_minus, extremum])

    f1_at_0 = f3_at_0 = None
    y0 = None
    if sol.status == 0:
        kind = FateKind.REACHED_ORIGIN
        y_end = 0.0
        u_end = sol.y[:, -1]
        f1_at_0 = float(u_end[1])
        f3_at_0 = float(u_end[3])
    elif sol.status == 1:
        if sol.t_events[0].size:
            y_end = float(sol.t_events[0][0])
            u_end = sol.y_events[0][0]
            kind = _classify_escape(sol, +1)
        else:
            y_end = float(sol.t_events[1][0])
            u_end = sol.y_events[1][0]
            kind = _classify_escape(sol, -1)
        if kind is not FateKind.OSCILLATORY_UNBOUNDED:
            y0 = y_end
    else:
        # step-size underflow approaching a finite-point singularity; the
        # reported location is biased by at most the last step
        y_end = float(sol.t[-1])
        u_end = sol.y[:, -1]
        kind = (FateKind.BLOW_UP_PLUS if u_end[0] > 0
                else FateKind.BLOW_UP_MINUS)
        y0 = y_end
    terminal = PhaseState(y=y_end, f0=float(u_end[0]), f1=float(u_end[1]),
                          f2=float(u_end[2]), f3=float(u_end[3]))
    fate = OrbitFate(kind=kind, terminal=terminal, y0=y0)

    nodes = np.linspace(y_max, y_end, n_nodes)
    values = sol.sol(nodes)
    trajectory = ProfileGrid(nodes=nodes, values=values, params=params,
                             fitted=coeffs,
                             meta={"fate": kind.value,
                                   "escape_threshold": thr})
    return ShotResult(trajectory=trajectory, fate=fate,
                      f1_at_0=f1_at_0, f3_at_0=f3_at_0)


_BIG = 1e100


def _f3_proxy(result: ShotResult) -> float:
    """f'''(0) when the origin was reached, signed sentinel otherwise.

    Blowing up to +inf means the orbit bent up too early, which on the
    reached-origin side of the boundary shows up as f'''(0) < 0; the
    sentinel keeps that orientation so bisection sees one sign change.
    """
    if result.fate.kind is FateKind.REACHED_ORIGIN:
        return result.f3_at_0
    if result.fate.kind is FateKind.BLOW_UP_PLUS:
        return -_BIG
    if result.fate.kind is FateKind.BLOW_UP_MINUS:
        return _BIG
    # oscillatory winding: orient by the side the last swing escaped toward
    return -_BIG if result.fate.terminal.f0 > 0 else _BIG


def find_c2_star(C1: float, params: ModelParams, bracket=None, tol: float = 1e-9,
                 y_max: Optional[float] = None, rtol: float = 1e-11) -> float:
    """C2 such that the shot at (C1, C2) reaches the origin with f'''(0) = 0.

    Bisection narrows the operational (C2-, C2+) fate-flip interval until
    both endpoints reach the origin, then a bracketed secant polishes the
    root of f'''(0).  bracket = None starts from [-1, 1] and expands.
    """
    if y_max is None:
        y_max = max(1.2 * default_y_match(params.p), 10.0)
    fates = {}

    def probe(c2):
        res = shoot(params, BundleCoeffs(C1=C1, C2=c2, y_match=y_max),
                    y_max=y_max, rtol=rtol)
        fates[c2] = res.fate.kind.value
        return _f3_proxy(res)

    if bracket is None:
        width = 1.0
        a, b = -width, width
        fa, fb = probe(a), probe(b)
        for _ in range(16):
            if fa * fb < 0.0:
                break
            width *= 4.0
            a, b = -width, width
            fa, fb = probe(a), probe(b)
        else:
            raise BracketError(
                f"no fate flip in C2 within [-{width}, {width}] at C1 = {C1} "
                f"(endpoint fates {fates[a]}, {fates[b]})")
    else:
        a, b = float(bracket[0]), float(bracket[1])
        fa, fb = probe(a), probe(b)
        if fa * fb >= 0.0:
            raise BracketError(
                f"no sign change across C2 bracket [{a}, {b}] at C1 = {C1}: "
                f"endpoint fates {fates[a]}, {fates[b]}")

    for _ in range(200):
        if abs(fa) < _BIG and abs(fb) < _BIG:
            break
        m = 0.5 * (a + b)
        fm = probe(m)
        if fa * fm < 0.0:
            b, fb = m, fm
        else:
            a, fa = m, fm
    else:
        raise BracketError(
            f"C2 bisection exhausted without reaching the origin at C1 = {C1}")

    if abs(fa) <= tol:
        return a
    if abs(fb) <= tol:
        return b
    c2 = brentq(probe, a, b, xtol=1e-15, rtol=8.9e-16, maxiter=200)
    if abs(probe(c2)) > tol:
        raise BracketError(f"f'''(0) stalled above tol at C2 = {c2}")
    return c2


def find_blowup_profile(params: ModelParams, C1_bracket, tol: float = 1e-9,
                        y_max: Optional[float] = None,
                        n_nodes: int = 2001) -> ProfileGrid:
    """Two-parameter shot: drive f'(0) to zero over C1 with C2 = C2*(C1).

    Returns the even extension of the converged half-line trajectory with
    the bundle coefficients attached.  Raises BracketError when f'(0) does
    not change sign across C1_bracket (possible nonexistence).
    """
    if y_max is None:
        y_max = max(1.2 * default_y_match(params.p), 10.0)
    c2_memory = {}

    def f1_at_origin(c1):
        guess = c2_memory.get("c2")
        bracket = None
        if guess is not None:
            # seed a local bracket around the previous root; fall back to
            # the expanding search when the branch moved too far
            for width in (0.1 * (1.0 + abs(guess)), 1.0 + abs(guess)):
                lo, hi = guess - width, guess + width
                try:
                    c2 = find_c2_star(c1, params, bracket=(lo, hi), tol=tol,
                                      y_max=y_max)
                    break
                except BracketError:
                    c2 = None
            bracket = None if c2 is None else "done"
        if bracket is None:
            c2 = find_c2_star(c1, params, bracket=None, tol=tol, y_max=y_max)
        res = shoot(params, BundleCoeffs(C1=c1, C2=c2, y_match=y_max),
                    y_max=y_max)
        c2_memory["c2"] = c2
        c2_memory["last"] = (c1, c2, res)
        return res.f1_at_0

    a, b = float(C1_bracket[0]), float(C1_bracket[1])
    ga, gb = f1_at_origin(a), f1_at_origin(b)
    if ga * gb >= 0.0:
        raise BracketError(
            f"f'(0) does not change sign over C1 bracket [{a}, {b}] "
            f"(values {ga:.3g}, {gb:.3g}); no symmetric profile found")
    c1 = brentq(f1_at_origin, a, b, xtol=1e-13, rtol=8.9e-16, maxiter=200)
    c1_last, c2, res = c2_memory["last"]
    if c1_last != c1:
        c2 = find_c2_star(c1, params, bracket=None, tol=tol, y_max=y_max)
        res = shoot(params, BundleCoeffs(C1=c1, C2=c2, y_match=y_max),
                    y_max=y_max)
    half = res.trajectory
    profile = ProfileGrid(
        nodes=half.nodes, values=half.values, params=params,
        fitted=BundleCoeffs(C1=c1, C2=c2, y_match=y_max),
        residual_norm=abs(res.f1_at_0) + abs(res.f3_at_0),
        converged=True,
        meta={"f1_at_0": res.f1_at_0, "f3_at_0": res.f3_at_0}).even_extension()
    return profile


def periodic_separatrix(p: float, amplitude_bracket, rtol: float = 1e-11,
                        n_nodes: int = 2001) -> ProfileGrid:
    """One period of the bounded separatrix of the pure-quartic equation.

    Shots start at a trough (f(0) = a < 0, f'(0) = f'''(0) = 0, f''(0) = 1,
    a normalization allowed by the scaling family) and the trough depth a is
    bisected between orbits escaping to +inf and -inf: the dividing orbit
    turns over with f'''(crest) = 0 and is closed by reversibility.
    """
    params = ModelParams(p=p, variant=Variant.PURE_QUARTIC)
    fun = _rhs(params)
    y_big = 100.0

    def crest(y, u):
        return u[1]

    crest.terminal = True
    crest.direction = -1.0

    def runaway(y, u):
        return abs(u[0]) - 1e6

    runaway.terminal = True

    def f3_at_crest(a):
        sol = solve_ivp(fun, (0.0, y_big), [a, 0.0, 1.0, 0.0],
                        method="DOP853", rtol=rtol, atol=1e-14,
                        events=[crest, runaway])
        if sol.t_events[0].size:
            return float(sol.y_events[0][0][3])
        if sol.t_events[1].size:
            # f' never turned over: the orbit ran away upward
            return _BIG
        raise BracketError(f"no crest and no escape by y = {y_big} at a = {a}")

    a_lo, a_hi = float(amplitude_bracket[0]), float(amplitude_bracket[1])
    g_lo, g_hi = f3_at_crest(a_lo), f3_at_crest(a_hi)
    if g_lo * g_hi >= 0.0:
        raise BracketError(
            f"f'''(crest) keeps sign over amplitude bracket [{a_lo}, {a_hi}] "
            f"(values {g_lo:.3g}, {g_hi:.3g})")
    a = brentq(f3_at_crest, a_lo, a_hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)

    sol = solve_ivp(fun, (0.0, y_big), [a, 0.0, 1.0, 0.0], method="DOP853",
                    rtol=rtol, atol=1e-14, events=[crest])
    period = 2.0 * float(sol.t_events[0][0])
    sol = solve_ivp(fun, (0.0, period), [a, 0.0, 1.0, 0.0], method="DOP853",
                    rtol=rtol, atol=1e-14, dense_output=True)
    nodes = np.linspace(0.0, period, n_nodes)
    values = sol.sol(nodes)
    defect = float(np.sum(np.abs(values[:, -1] - values[:, 0])))
    return ProfileGrid(nodes=nodes, values=values, params=params,
                       residual_norm=defect, converged=defect < 1e-6,
                       meta={"period": period, "amplitude": a})


def separatrix_energy(profile: ProfileGrid) -> np.ndarray:
    """First integral H = f''' f' - (f'')^2/2 - |f|^{p+1}/(p+1) per node."""
    f0, f1, f2, f3 = profile.values
    p = profile.params.p
    return f3 * f1 - 0.5 * f2 ** 2 - np.abs(f0) ** (p + 1.0) / (p + 1.0)
