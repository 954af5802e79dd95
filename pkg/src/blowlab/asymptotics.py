"""Far-field asymptotic bundles of the similarity ODEs.

As y -> infinity every admissible profile enters a low-dimensional bundle
spanned by an algebraic mode C1*y^{-4/(p-1)} and super-exponential WKBJ
modes y^sigma * exp(a*y^{4/3}) whose rates a solve a cubic fixed by the
drift term.  This module computes the exponents, evaluates the bundles and
their derivatives analytically, and least-squares fits bundle coefficients
to computed profile tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .odecore import ModelParams, Variant
from .profiles import ProfileGrid

#: leading WKBJ rate magnitude for |drift| = 1/4, a0 = 3 * 2**(-8/3)
A0 = 3.0 * 2.0 ** (-8.0 / 3.0)


class FitError(RuntimeError):
    """Tail fit failed; carries condition/size diagnostics."""

    def __init__(self, msg, condition=np.nan, npoints=0, residual=np.nan):
        super().__init__(msg)
        self.condition = condition
        self.npoints = npoints
        self.residual = residual


@dataclass(frozen=True)
class BundleCoeffs:
    """Far-field expansion coefficients anchored at radius y_match.

    C3 is the second oscillatory coefficient of the global bundle; it stays
    None for the monotone-exponential (blow-up side) bundle.  residual
    records the relative rms defect of the fit that produced the
    coefficients (0 for hand-built coefficients).
    """

    C1: float
    C2: float = 0.0
    C3: Optional[float] = None
    y_match: float = 10.0
    residual: float = 0.0


@dataclass(frozen=True)
class WkbjExponents:
    """Cubic roots of the two-scale far-field ansatz exp(a*y^{4/3})."""

    a0: float
    roots: tuple
    decaying: tuple

    @property
    def growing(self) -> tuple:
        return tuple(r for r in self.roots if r.real > 0)


def default_y_match(p: float) -> float:
    """Default matching radius: 10 for p >= 2, 15 for p < 2."""
    return 10.0 if p >= 2.0 else 15.0


def _cubic_roots(mu: float) -> tuple:
    """Roots of a^3 = -(27/64)*mu in closed form, |a| = (3/4)|mu|^{1/3}."""
    r = 0.75 * abs(mu) ** (1.0 / 3.0)
    if mu > 0:
        return (complex(-r, 0.0),
                r * complex(0.5, 0.5 * math.sqrt(3.0)),
                r * complex(0.5, -0.5 * math.sqrt(3.0)))
    return (complex(r, 0.0),
            r * complex(-0.5, 0.5 * math.sqrt(3.0)),
            r * complex(-0.5, -0.5 * math.sqrt(3.0)))


def wkbj_roots(variant: Variant) -> WkbjExponents:
    """WKBJ rates for the blow-up or global bundle.

    The blow-up cubic a^3 = -(1/4)(3/4)^3 has one decaying (negative real)
    root -a0; the global cubic a^3 = +(1/4)(3/4)^3 has the decaying complex
    pair a0*(-1/2 +/- i sqrt(3)/2).
    """
    if variant is Variant.BLOW_UP or variant is Variant.MU_FAMILY:
        mu = 0.25
    elif variant is Variant.GLOBAL:
        mu = -0.25
    else:
        raise ValueError(f"no far-field bundle for variant {variant}")
    roots = _cubic_roots(mu)
    decaying = tuple(r for r in roots if r.real < 0)
    return WkbjExponents(a0=A0, roots=roots, decaying=decaying)


def algebraic_exponent(params: ModelParams) -> float:
    """Power m of the algebraic mode y^m from the dominant drift balance
    -mu*y*f' + c*f = 0; equals -4/(p-1) for both quarter-drift variants."""
    mu, c = params.drift_linear()
    if mu == 0.0:
        raise ValueError("the driftless variant has no algebraic far-field mode")
    return c / mu


def wkbj_prefactor_exponent(params: ModelParams) -> float:
    """Algebraic prefactor power sigma of the WKBJ modes y^sigma e^{a y^{4/3}}.

    From the order-one term of the two-scale balance,
    sigma = -2N/3 - c/(3 mu), which is -(2/3)(p-3)/(p-1) for both
    quarter-drift variants in one dimension.
    """
    mu, c = params.drift_linear()
    if mu == 0.0:
        raise ValueError("the driftless variant has no WKBJ bundle")
    return -2.0 * params.N / 3.0 - c / (3.0 * mu)


def _power_term(y, m: float, order: int):
    """order-th derivative of y^m."""
    coef = 1.0
    for i in range(order):
        coef *= m - i
    return coef * y ** (m - order)


def _wkbj_term(y, sigma: float, a: complex, order: int):
    """order-th derivative (0..4) of h(y) = y^sigma * exp(a*y^{4/3}).

    Uses h' = h*u with u = sigma/y + (4a/3) y^{1/3} and the chain of
    elementary derivatives of u; exact, vectorized, complex-safe.
    """
    h = y ** sigma * np.exp(a * y ** (4.0 / 3.0))
    if order == 0:
        return h
    u = sigma / y + (4.0 * a / 3.0) * y ** (1.0 / 3.0)
    if order == 1:
        return h * u
    u1 = -sigma / y ** 2 + (4.0 * a / 9.0) * y ** (-2.0 / 3.0)
    if order == 2:
        return h * (u * u + u1)
    u2 = 2.0 * sigma / y ** 3 - (8.0 * a / 27.0) * y ** (-5.0 / 3.0)
    if order == 3:
        return h * (u ** 3 + 3.0 * u * u1 + u2)
    u3 = -6.0 * sigma / y ** 4 + (40.0 * a / 81.0) * y ** (-8.0 / 3.0)
    if order == 4:
        return h * (u ** 4 + 6.0 * u ** 2 * u1 + 3.0 * u1 ** 2 + 4.0 * u * u2 + u3)
    raise ValueError(f"derivative order must be 0..4, got {order}")


def eval_bundle(y, coeffs: BundleCoeffs, params: ModelParams,
                derivative_order: int = 0):
    """Far-field bundle value (or y-derivative up to order 3) at y > 0.

    Blow-up side:  C1*y^m + C2*y^sigma*exp(-a0*y^{4/3}).
    Global side:   C1*y^m + y^sigma*exp(-(a0/2)*y^{4/3}) *
                   [C2*cos(w*y^{4/3}) + C3*sin(w*y^{4/3})], w = a0*sqrt(3)/2.
    Both brackets are truncated at leading order.
    """
    if not 0 <= derivative_order <= 3:
        raise ValueError(f"derivative_order must be 0..3, got {derivative_order}")
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0.0):
        raise ValueError("bundle is defined for y > 0 only")
    mu, _ = params.drift_linear()
    m = algebraic_exponent(params)
    sigma = wkbj_prefactor_exponent(params)
    decaying = [r for r in _cubic_roots(mu) if r.real < 0]
    out = coeffs.C1 * _power_term(y, m, derivative_order)
    if mu > 0:
        a = decaying[0].real  # single real decaying rate
        out = out + coeffs.C2 * np.real(_wkbj_term(y, sigma, a, derivative_order))
    else:
        a = next(r for r in decaying if r.imag > 0)
        c3 = 0.0 if coeffs.C3 is None else coeffs.C3
        amp = complex(coeffs.C2, -c3)
        out = out + np.real(amp * _wkbj_term(y, sigma, a, derivative_order))
    return out if out.shape else float(out)


def _design_columns(y, params: ModelParams, order: int = 0):
    """Mode shape columns [algebraic, exp (, exp-quadrature)] at the nodes,
    differentiated `order` times."""
    mu, _ = params.drift_linear()
    m = algebraic_exponent(params)
    sigma = wkbj_prefactor_exponent(params)
    decaying = [r for r in _cubic_roots(mu) if r.real < 0]
    A = _power_term(y, m, order)
    if mu > 0:
        E = np.real(_wkbj_term(y, sigma, decaying[0].real, order))
        return A, np.column_stack([E])
    a = next(r for r in decaying if r.imag > 0)
    h = _wkbj_term(y, sigma, a, order)
    return A, np.column_stack([np.real(h), np.imag(h)])


def fit_tail(profile: ProfileGrid, window: Sequence[float], params: ModelParams,
             c1_zero_factor: float = 3.0, max_iter: int = 40) -> BundleCoeffs:
    """Least-squares bundle coefficients from a profile tail.

    Two-stage fit.  Stage one alternates masked fits on the profile values:
    the exponential coefficients where the WKBJ envelope dominates (inner
    part of the window) and the algebraic coefficient where the power mode
    dominates (outer part), until the split is self-consistent.  This
    sidesteps the many-orders-of-magnitude scale gap that breaks a naive
    joint linear fit.  Stage two refines jointly on a relative-weighted,
    column-normalized system over all four derivative rows; the higher
    derivatives sharpen the exponential coefficients, which decay much
    faster than the algebraic mode in the value row alone.

    C1 is snapped to zero when it falls below c1_zero_factor times its
    noise level inferred from the fit residual (the exponential-decay case).
    """
    y_lo, y_hi = float(window[0]), float(window[1])
    if not 0.0 < y_lo < y_hi:
        raise FitError(f"bad window [{y_lo}, {y_hi}]")
    x, v = profile._oriented()
    mask = (x >= y_lo) & (x <= y_hi)
    y = x[mask]
    f = v[0, mask]
    if y.size < 8:
        raise FitError(f"only {y.size} nodes inside the window", npoints=y.size)

    A, E = _design_columns(y, params)
    n_exp = E.shape[1]
    scale = float(np.max(np.abs(f))) or 1.0
    w = 1.0 / (np.abs(f) + 1e-3 * scale)  # relative weighting across the scale gap

    c1 = 0.0
    ce = np.zeros(n_exp)
    half = y <= 0.5 * (y_lo + y_hi)
    for it in range(max_iter):
        if it == 0:
            mask_e, mask_a = half, ~half
        else:
            env_a = np.abs(c1 * A)
            env_e = np.abs(E @ ce)
            mask_e = env_e > env_a
            mask_a = ~mask_e
            if mask_e.sum() < n_exp + 1:
                mask_e = half
            if mask_a.sum() < 2:
                mask_a = ~half
        prev = (c1, ce.copy())
        ra = f - E @ ce
        wa = w[mask_a]
        denom = np.sum((wa * A[mask_a]) ** 2)
        c1 = float(np.sum(wa ** 2 * A[mask_a] * ra[mask_a]) / denom) if denom > 0 else 0.0
        re = f - c1 * A
        We = (w[mask_e])[:, None]
        ce, *_ = np.linalg.lstsq(We * E[mask_e], (w * re)[mask_e], rcond=None)
        if abs(c1 - prev[0]) <= 1e-14 * (abs(c1) + 1e-300) and \
                np.allclose(ce, prev[1], rtol=1e-13, atol=1e-300):
            break

    # stage two: joint refinement over all derivative rows; the staged
    # estimates supply a local envelope so the weights stay relative even
    # where the tail spans many orders of magnitude
    amp = float(np.linalg.norm(ce))
    blocks, rhs = [], []
    for k in range(4):
        Ak, Ek = _design_columns(y, params, order=k)
        fk = v[k, mask]
        sk = float(np.max(np.abs(fk))) or 1.0
        env = abs(c1) * np.abs(Ak) + amp * np.linalg.norm(Ek, axis=1)
        wk = 1.0 / (np.abs(fk) + 1e-3 * env + 1e-9 * sk)
        blocks.append(np.column_stack([Ak, Ek]) * wk[:, None])
        rhs.append(wk * fk)
    G = np.vstack(blocks)
    b = np.concatenate(rhs)
    norms = np.linalg.norm(G, axis=0)
    if np.any(norms == 0.0):
        raise FitError("degenerate design column", npoints=y.size)
    Gn = G / norms
    cond = float(np.linalg.cond(Gn))
    z, *_ = np.linalg.lstsq(Gn, b, rcond=None)
    coef = z / norms
    r_joint = b - Gn @ z
    res_joint = float(np.sqrt(np.mean(r_joint ** 2)))
    staged = np.concatenate([[c1], ce])
    res_staged = float(np.sqrt(np.mean((b - Gn @ (staged * norms)) ** 2)))
    if np.all(np.isfinite(coef)) and res_joint <= res_staged:
        c1, ce, residual = float(coef[0]), coef[1:], res_joint
    else:
        residual = res_staged
    if cond > 1e12 or residual > 5e-2:
        raise FitError(
            f"ill-conditioned tail fit (cond={cond:.3g}, rel residual={residual:.3g}); "
            "window too short or tail not converged",
            condition=cond, npoints=y.size, residual=residual)

    # coefficient noise estimate for the algebraic mode, from the fit covariance
    dof = max(b.size - G.shape[1], 1)
    s2 = float(r_joint @ r_joint) / dof
    cov_n = s2 * np.linalg.inv(Gn.T @ Gn)
    sigma_c1 = math.sqrt(max(cov_n[0, 0], 0.0)) / norms[0]
    if abs(c1) < c1_zero_factor * sigma_c1:
        c1 = 0.0

    mu, _ = params.drift_linear()
    if mu > 0:
        return BundleCoeffs(C1=c1, C2=float(ce[0]), C3=None,
                            y_match=y_lo, residual=residual)
    return BundleCoeffs(C1=c1, C2=float(ce[0]), C3=float(ce[1]),
                        y_match=y_lo, residual=residual)
