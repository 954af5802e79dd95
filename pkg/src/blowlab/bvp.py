"""Collocation boundary-value solves, branch continuation, and bifurcations.

Profiles are solved on [0, L] (or [delta, L] for radial problems) with the
symmetry pair f'(0) = f'''(0) = 0 at the origin and projection conditions
at L that annihilate the non-decaying far-field modes: the state at L is
expanded in the linearized far-field basis (algebraic mode plus the WKBJ
exponentials) and the growing coefficients are driven to zero.  The same
coefficient expansion supplies the prescribed-C1 condition of the global
problem and the algebraic-kill condition of the exponential-decay case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_bvp, solve_ivp
from scipy.optimize import brentq

from .asymptotics import (
    BundleCoeffs,
    _cubic_roots,
    _power_term,
    _wkbj_term,
    algebraic_exponent,
    default_y_match,
    eval_bundle,
)
from .odecore import ModelParams, Variant, flat_equilibrium, phi
from .profiles import ProfileGrid


class ContinuationError(RuntimeError):
    """A branch or root search over a continuation parameter failed."""


@dataclass(frozen=True)
class BranchPoint:
    """One converged solution along a continuation branch."""

    parameter: float
    profile: ProfileGrid
    amplitude: float


@dataclass
class Branch:
    """Ordered continuation points sharing one varying parameter."""

    parameter_name: str
    origin: str
    points: list = field(default_factory=list)

    def parameters(self) -> np.ndarray:
        return np.array([pt.parameter for pt in self.points])

    def amplitudes(self) -> np.ndarray:
        return np.array([pt.amplitude for pt in self.points])


def default_L(p: float) -> float:
    """Default truncation radius, 1.5x the matching-radius heuristic."""
    return 1.5 * default_y_match(p)


def _np_odd_power(f, p):
    return np.sign(f) * np.abs(f) ** p


def _rhs_vectorized(p: float, N: int, mu: float, c: float) -> Callable:
    """First-order system right-hand side for solve_bvp (columns of y)."""

    def fun(x, u):
        f4 = -mu * x * u[1] + c * u[0] + _np_odd_power(u[0], p)
        if N > 1:
            n1, n3 = N - 1.0, N - 3.0
            f4 = f4 - (2.0 * n1 / x) * u[3] - (n1 * n3 / x ** 2) * u[2] \
                + (n1 * n3 / x ** 3) * u[1]
        return np.vstack([u[1], u[2], u[3], f4])

    return fun


def farfield_matrix(mu: float, c: float, N: int, L: float):
    """Normalized far-field mode matrix at L and its inverse.

    Columns hold (value, f', f'', f''') of the algebraic mode y^{c/mu} and
    of the WKBJ modes y^sigma exp(a y^{4/3}) for the three cubic roots a,
    complex pairs split into real/imaginary parts.  Columns are scaled to
    unit sup so the inverse stays well conditioned across the enormous
    dynamic range; coefficients of the scaled basis are W @ state.

    Returns (W, scales, index map) with index groups "algebraic",
    "decaying", "growing" referring to coefficient positions.
    """
    if mu == 0.0:
        raise ValueError("driftless variant has no far-field bundle")
    m = c / mu
    sigma = -2.0 * N / 3.0 - c / (3.0 * mu)
    cols = [np.array([_power_term(L, m, k) for k in range(4)])]
    index = {"algebraic": [0], "decaying": [], "growing": []}
    for a in _cubic_roots(mu):
        group = "decaying" if a.real < 0 else "growing"
        if a.imag == 0.0:
            cols.append(np.array(
                [_wkbj_term(L, sigma, a.real, k) for k in range(4)]))
            index[group].append(len(cols) - 1)
        elif a.imag > 0.0:
            h = np.array([_wkbj_term(L, sigma, a, k) for k in range(4)])
            cols.append(np.real(h))
            index[group].append(len(cols) - 1)
            cols.append(np.imag(h))
            index[group].append(len(cols) - 1)
    M = np.column_stack(cols)
    scales = np.max(np.abs(M), axis=0)
    W = np.linalg.inv(M / scales)
    return W, scales, index


def _origin_rows(params: ModelParams, inner: float, ya):
    """Two regularity conditions at the left end.

    N = 1: exact even symmetry f'(0) = f'''(0) = 0.  N > 1: Taylor
    consistency of the regular (even) local solution family at the inner
    radius; the r^4 coefficient is tied to the equation through the radial
    biharmonic identity lap^2 r^4 = 8N(N+2) r^0.
    """
    if params.N == 1:
        return [ya[1], ya[3]]
    _, c = params.drift_linear()
    g0 = c * ya[0] + _np_odd_power(ya[0], params.p)
    return [ya[1] - inner * ya[2] + inner ** 2 / 3.0 * ya[3],
            ya[3] - 3.0 * inner * g0 / (params.N * (params.N + 2.0))]


def _seed_arrays(guess: ProfileGrid, x: np.ndarray, params: ModelParams):
    """Seed values on the solve mesh, bundle-extended beyond the guess span."""
    lo, hi = guess.y_span
    inside = x <= hi
    y0 = np.empty((4, x.size))
    for k in range(4):
        y0[k, inside] = guess(x[inside], k)
    if np.all(inside):
        return y0
    coeffs = guess.fitted
    if coeffs is None:
        # single-point power-law match at the outer edge of the guess
        m = params.drift_linear()[1] / params.drift_linear()[0]
        coeffs = BundleCoeffs(C1=float(guess(hi)) / hi ** m, y_match=hi)
    for k in range(4):
        y0[k, ~inside] = eval_bundle(x[~inside], coeffs, params, k)
    return y0


def _as_profile(sol, params: ModelParams, fitted, meta) -> ProfileGrid:
    """Wrap a solve_bvp result, measuring the interior collocation defect."""
    xs = 0.5 * (sol.x[:-1] + sol.x[1:])
    mu, c = params.drift_linear()
    fun = _rhs_vectorized(params.p, params.N, mu, c)
    u = sol.sol(xs)
    defect = sol.sol.derivative()(xs) - fun(xs, u)
    scale = 1.0 + np.max(np.abs(u), axis=1, keepdims=True)
    residual = float(np.max(np.abs(defect) / scale))
    meta = dict(meta)
    meta["message"] = sol.message
    meta["max_rms_residual"] = float(np.max(sol.rms_residuals))
    meta["n_nodes"] = int(sol.x.size)
    return ProfileGrid(nodes=sol.x, values=sol.y, params=params,
                       fitted=fitted, residual_norm=residual,
                       converged=bool(sol.status == 0), meta=meta)


def _boundary_coeffs(params: ModelParams, L: float, yb) -> dict:
    """Far-field coefficients of the boundary state in the scaled basis."""
    mu, c = params.drift_linear()
    W, scales, index = farfield_matrix(mu, c, params.N, L)
    ctil = W @ np.asarray(yb, dtype=float)
    alg = index["algebraic"][0]
    out = {"scaled": ctil, "scales": scales, "index": index,
           "C1": float(ctil[alg] / scales[alg])}
    dec = index["decaying"]
    out["C2"] = float(ctil[dec[0]] / scales[dec[0]])
    out["C3"] = float(ctil[dec[1]] / scales[dec[1]]) if len(dec) > 1 else None
    return out


def solve(params: ModelParams, guess: ProfileGrid,
          prescribed_C1: Optional[float] = None, L: Optional[float] = None,
          tol: float = 1e-10, max_nodes: int = 100000, n_init: int = 601,
          inner_radius: float = 0.01) -> ProfileGrid:
    """Solve the profile BVP on [0, L] (or [delta, L] radially).

    Boundary conditions: two origin regularity rows plus far-field rows.
    BlowUp/MuFamily: the two growing-mode coefficients vanish.  Global: the
    single growing coefficient vanishes and the algebraic coefficient
    equals prescribed_C1 (required; 0 selects exponential decay).

    Never raises on Newton failure: the last iterate comes back with
    converged = False and diagnostics in meta.
    """
    if params.variant is Variant.PURE_QUARTIC:
        raise ValueError("the driftless variant has no far-field bundle; "
                         "use shooting.periodic_separatrix")
    is_global = params.variant is Variant.GLOBAL
    if is_global and prescribed_C1 is None:
        raise ValueError("the global problem needs prescribed_C1 (it may be 0)")
    if not is_global and prescribed_C1 is not None:
        raise ValueError("prescribed_C1 applies to the Global variant only")
    if L is None:
        L = default_L(params.p)
    mu, c = params.drift_linear()
    inner = 0.0 if params.N == 1 else inner_radius
    W, scales, index = farfield_matrix(mu, c, params.N, L)
    far_rows = [W[i] for i in index["growing"]]
    alg = index["algebraic"][0]
    alg_row = W[alg] / scales[alg]  # unscaled: row @ state = true C1
    c1_scale = 1.0 if prescribed_C1 is None else max(1.0, abs(prescribed_C1))
    c1_datum = prescribed_C1
    if is_global and prescribed_C1:
        # first algebraic correction C1 y^m -> + kappa y^{m-4}; the row reads
        # the leading coefficient plus kappa times its projection, a known
        # offset that otherwise caps domain stability near kappa * L^-4
        m = algebraic_exponent(params)
        kappa = prescribed_C1 * (phi(m) - abs(prescribed_C1) ** (params.p - 1)) / (4.0 * mu)
        c1_datum = prescribed_C1 + kappa * float(
            alg_row @ np.array([_power_term(L, m - 4.0, k) for k in range(4)]))

    def bc(ya, yb):
        rows = _origin_rows(params, inner, ya)
        rows += [row @ yb for row in far_rows]
        if is_global:
            rows.append((alg_row @ yb - c1_datum) / c1_scale)
        return np.array(rows)

    x = np.linspace(inner, L, n_init)
    y0 = _seed_arrays(guess, x, params)
    fun = _rhs_vectorized(params.p, params.N, mu, c)
    sol = solve_bvp(fun, bc, x, y0, tol=tol, max_nodes=max_nodes, verbose=0)
    bcoef = _boundary_coeffs(params, L, sol.y[:, -1])
    fitted = BundleCoeffs(C1=bcoef["C1"], C2=bcoef["C2"], C3=bcoef["C3"],
                          y_match=L,
                          residual=float(np.max(np.abs(bc(sol.y[:, 0], sol.y[:, -1])))))
    return _as_profile(sol, params, fitted,
                       {"L": L, "prescribed_C1": prescribed_C1})


def domain_stability(profile: ProfileGrid, params: ModelParams,
                     factor: float = 1.25, tol: float = 1e-10) -> float:
    """Sup-norm change on [0, L/2] when the solve is repeated on [0, f*L]."""
    L = float(profile.nodes[-1])
    pc1 = profile.meta.get("prescribed_C1")
    bigger = solve(params, profile, prescribed_C1=pc1, L=factor * L, tol=tol)
    ys = np.linspace(profile.nodes[0], 0.5 * L, 501)
    return float(np.max(np.abs(bigger(ys) - profile(ys))))


# ---------------------------------------------------------------------------
# seeds

def gaussian_seed(params: ModelParams, L: float, amplitude: float,
                  width: float = 2.0, floor: Optional[float] = None,
                  n: int = 801) -> ProfileGrid:
    """Closed-form even bump amplitude*exp(-(y/width)^2) (+ floor) with
    analytic derivatives; generic Newton starting point."""
    y = np.linspace(0.0, L, n)
    q = 1.0 / width ** 2
    e = np.exp(-q * y ** 2)
    base = floor if floor is not None else 0.0
    vals = np.vstack([
        base + amplitude * e,
        amplitude * (-2.0 * q * y) * e,
        amplitude * (4.0 * q ** 2 * y ** 2 - 2.0 * q) * e,
        amplitude * (12.0 * q ** 2 * y - 8.0 * q ** 3 * y ** 3) * e,
    ])
    return ProfileGrid(nodes=y, values=vals, params=params)


def algebraic_tail_seed(params: ModelParams, L: float, C1: float,
                        core: float = 1.0, n: int = 801) -> ProfileGrid:
    """Even profile C1*(core + y^2)^{m/2} whose tail is exactly C1*y^m."""
    m = params.drift_linear()[1] / params.drift_linear()[0]
    y = np.linspace(0.0, L, n)
    g = core + y ** 2
    h = g ** (0.5 * m)
    d1 = m * y * g ** (0.5 * m - 1.0)
    d2 = m * g ** (0.5 * m - 1.0) + m * (m - 2.0) * y ** 2 * g ** (0.5 * m - 2.0)
    d3 = 3.0 * m * (m - 2.0) * y * g ** (0.5 * m - 2.0) \
        + m * (m - 2.0) * (m - 4.0) * y ** 3 * g ** (0.5 * m - 3.0)
    vals = C1 * np.vstack([h, d1, d2, d3])
    return ProfileGrid(nodes=y, values=vals, params=params)


def eigenmode_seed(params: ModelParams, L: float, l: int, amplitude: float,
                   n: int = 801) -> ProfileGrid:
    """Kernel eigenfunction shape psi_l scaled to the given amplitude.

    Matches the near-onset form of the exponential-decay Global branches;
    derivatives of the shape are taken spectrally (kernel derivative
    orders), so the seed is smooth.
    """
    from .spectral import KernelF
    kern = KernelF()
    y = np.linspace(0.0, L, n)
    fac = amplitude * (-1.0) ** l / math.sqrt(math.factorial(l))
    vals = np.vstack([fac * kern(y, k=l + j) for j in range(4)])
    return ProfileGrid(nodes=y, values=vals, params=params)


def global_profile(p: float, C1: float, N: int = 1, L: Optional[float] = None,
                   tol: float = 1e-10, first_step: float = 0.25,
                   seed: Optional[ProfileGrid] = None,
                   max_steps: int = 200) -> ProfileGrid:
    """Global extension profile at prescribed C1 by continuation from 0.

    For small C1 the problem is a regular perturbation of the linear one
    and Newton converges from a bare algebraic-tail seed; the prescribed
    coefficient is then stepped toward the target, halving on failure.
    Returns the converged profile, or the last iterate (converged = False,
    meta["C1_reached"] holds the continuation high-water mark) when the
    branch cannot be continued to the target, the operational nonexistence
    verdict.
    """
    params = ModelParams(p=p, N=N, variant=Variant.GLOBAL)
    if L is None:
        L = default_L(p)
    c1_here = math.copysign(min(first_step, abs(C1)), C1) if C1 else 0.0
    prof = seed if seed is not None else algebraic_tail_seed(
        params, L, C1=c1_here, core=4.0)
    step = first_step
    last_good = None
    for _ in range(max_steps):
        attempt = solve(params, prof, prescribed_C1=c1_here, L=L, tol=tol)
        if attempt.converged:
            prof = attempt
            last_good = (c1_here, attempt)
            if c1_here == C1:
                return attempt
            c1_here = math.copysign(min(abs(c1_here) + step, abs(C1)), C1)
            step = min(2.0 * step, 4.0 * first_step)
        else:
            if last_good is None or step < 1e-4:
                out = attempt
                meta = dict(out.meta)
                meta["C1_reached"] = None if last_good is None else last_good[0]
                return ProfileGrid(nodes=out.nodes, values=out.values,
                                   params=params, fitted=out.fitted,
                                   residual_norm=out.residual_norm,
                                   converged=False, meta=meta)
            step *= 0.25
            c1_here = math.copysign(
                min(abs(last_good[0]) + step, abs(C1)), C1)
            prof = last_good[1]
    raise ContinuationError(f"C1-continuation exceeded step budget "
                            f"toward C1 = {C1}")


# ---------------------------------------------------------------------------
# linearized bifurcation structure

def _eigen_determinant(mu: float, Y: float, rtol: float) -> float:
    """Evans-style determinant of the even linearization v'''' = -mu y v' + v.

    The linearization of every drift variant about the constant equilibrium
    carries coefficient +1 (p drops out).  Two even basis solutions are
    integrated from the origin and their coefficients along the growing
    WKBJ pair extracted at Y; the determinant vanishes exactly when some
    even combination is free of exponentially growing content, which is
    the bifurcation condition (polynomial growth is admissible).
    """

    def fun(y, v):
        return [v[1], v[2], v[3], -mu * y * v[1] + v[0]]

    W, _, index = farfield_matrix(mu, 1.0, 1, Y)
    rows = np.array([W[i] for i in index["growing"]])
    coef = []
    for v0 in ([1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]):
        sol = solve_ivp(fun, (0.0, Y), v0, method="DOP853",
                        rtol=rtol, atol=1e-12)
        g = rows @ sol.y[:, -1]
        coef.append(g / np.linalg.norm(sol.y[:, -1]))
    return float(coef[0][0] * coef[1][1] - coef[0][1] * coef[1][0])


def mu_eigenvalue_crossings(mu_range: Sequence[float] = (0.15, 0.62),
                            n_scan: int = 95, Y: float = 18.0,
                            rtol: float = 1e-10) -> list:
    """Parameter values where the even linearization loses a growing mode.

    Scans the determinant over mu and polishes each sign change; the exact
    crossings are mu = 1/k at even k, where the eigenfunction is the
    terminating polynomial of degree k.
    """
    grid = np.linspace(mu_range[0], mu_range[1], n_scan)
    vals = [_eigen_determinant(m, Y, rtol) for m in grid]
    out = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            out.append(float(a))
        elif fa * fb < 0.0:
            out.append(brentq(_eigen_determinant, a, b, args=(Y, rtol),
                              xtol=1e-12))
    return sorted(out, reverse=True)


# ---------------------------------------------------------------------------
# continuation

def _parse_origin(origin: str):
    if origin.startswith("mu"):
        k = int(origin[2:].lstrip("_"))
        if k < 2 or k % 2:
            raise ValueError(f"mu-branches bifurcate at even k >= 2, got {origin}")
        return "mu", k
    if origin.startswith("p"):
        l = int(origin[1:].lstrip("_"))
        if l < 0:
            raise ValueError(f"bad p-branch label {origin}")
        return "p", l
    raise ValueError(f"unknown bifurcation label {origin!r}")


def _mu_branch_solve(p: float, L: float, tol: float, max_nodes: int,
                     guess_x, guess_y, mu_guess: float,
                     f_ref, tau, mu_ref: float, beta: float, ds: float):
    """One Keller arclength corrector step of the mu-family problem.

    The 4th-order system is augmented with a running inner product
    q(x) = int_0^x (f - f_ref) tau, so the arclength condition
    <f - f_ref, tau> + beta (mu - mu_ref) = ds becomes the pointwise
    boundary row q(L) + beta (mu - mu_ref) = ds.  A functional tangent
    keeps the corrector from sliding onto a neighbouring branch, which
    the scalar origin gauge cannot distinguish near onset.
    """
    c = -1.0 / (p - 1.0)

    def fun(x, u, prm):
        mu = prm[0]
        f4 = -mu * x * u[1] + c * u[0] + _np_odd_power(u[0], p)
        return np.vstack([u[1], u[2], u[3], f4,
                          (u[0] - f_ref(x)) * tau(x)])

    def bc(ya, yb, prm):
        mu = prm[0]
        # clamp keeps the mode classification (and so the row count) stable
        # when a Newton trial step wanders to mu <= 0
        W, _, index = farfield_matrix(max(mu, 1e-3), c, 1, L)
        rows = [ya[1], ya[3], ya[4]]
        rows += [W[i] @ yb[:4] for i in index["growing"]]
        rows.append(yb[4] + beta * (mu - mu_ref) - ds)
        return np.array(rows)

    return solve_bvp(fun, bc, guess_x, guess_y, p=[mu_guess], tol=tol,
                     max_nodes=max_nodes, verbose=0)


def _mu_pinned_solve(p: float, L: float, tol: float, max_nodes: int,
                     guess_x, guess_y, mu_guess: float, A: float):
    """MuFamily corrector with the centre value pinned, f(0) = f* + A.

    Near mu = 1/4 the branch folds in mu but stays single-valued in the
    centre deviation A (the k = 4 eigenpolynomial has a nonzero centre
    value), so marching A traverses the fold where arclength correctors
    slide onto neighbouring branches.
    """
    c = -1.0 / (p - 1.0)
    fstar = flat_equilibrium(p)

    def fun(x, u, prm):
        mu = max(prm[0], 1e-3)
        f4 = -mu * x * u[1] + c * u[0] + _np_odd_power(u[0], p)
        return np.vstack([u[1], u[2], u[3], f4])

    def bc(ya, yb, prm):
        mu = max(prm[0], 1e-3)
        W, _, index = farfield_matrix(mu, c, 1, L)
        rows = [ya[1], ya[3], ya[0] - fstar - A]
        rows += [W[i] @ yb for i in index["growing"]]
        return np.array(rows)

    return solve_bvp(fun, bc, guess_x, guess_y, p=[mu_guess], tol=tol,
                     max_nodes=max_nodes, verbose=0)


def _p_branch_solve(L: float, tol: float, max_nodes: int, guess_x, guess_y,
                    p_guess: float, tang, anchor, ds: float):
    """Corrector for the exponential-decay Global branch with p free."""

    def fun(x, u, prm):
        p = max(prm[0], 1.001)
        f4 = 0.25 * x * u[1] + u[0] / (p - 1.0) + _np_odd_power(u[0], p)
        return np.vstack([u[1], u[2], u[3], f4])

    def bc(ya, yb, prm):
        p = max(prm[0], 1.001)
        W, _, index = farfield_matrix(-0.25, 1.0 / (p - 1.0), 1, L)
        rows = [ya[1], ya[3]]
        rows += [W[i] @ yb for i in index["growing"]]
        rows.append(W[index["algebraic"][0]] @ yb)
        rows.append(tang[0] * (ya[0] - anchor[0])
                    + tang[1] * (p - anchor[1]) - ds)
        return np.array(rows)

    return solve_bvp(fun, bc, guess_x, guess_y, p=[p_guess], tol=tol,
                     max_nodes=max_nodes, verbose=0)


def _center_pinned_mu_branch(branch: Branch, p: float, L: float, tol: float,
                             max_nodes: int, target: float, direction: float,
                             max_points: int) -> Branch:
    """March the k = 4 mu-branch through its fold by the centre deviation.

    The loop mu(A) lives inside |A| < 0.01: it leaves the onset, peaks a
    few percent above 1/4 and recrosses the target at finite amplitude.
    The crossing is secant-polished in A, then a fixed-mu solve is
    appended as the final point.
    """
    fstar = flat_equilibrium(p)
    xd = np.linspace(0.0, L, 2001)
    bump = (xd ** 4 + 24.0) / 24.0 * np.exp(-(xd / (0.45 * L)) ** 4)

    def cold_seed(a):
        fg = fstar + a * bump
        g = np.vstack([fg, np.gradient(fg, xd),
                       np.zeros_like(xd), np.zeros_like(xd)])
        g[2] = np.gradient(g[1], xd)
        g[3] = np.gradient(g[2], xd)
        return xd, g

    step0 = 2e-4
    stepA = step0
    A = direction * stepA
    gx, gy = cold_seed(A)
    mu_guess = target
    A_prev = None
    mu_prev = None
    hit = None
    for _ in range(max_points):
        sol = _mu_pinned_solve(p, L, tol, max_nodes, gx, gy, mu_guess, A)
        ok = sol.status == 0 and float(sol.p[0]) > 0.0
        # the k = 4 branch recrosses the target from above; a first point
        # at or below it is a neighbouring (truncation) sheet, not ours
        if ok and not branch.points and float(sol.p[0]) <= target:
            ok = False
        if not ok:
            if not branch.points:
                # near-onset degeneracy: move outward with a fresh seed
                A += direction * stepA
                if abs(A) > 2e-3:
                    break
                gx, gy = cold_seed(A)
                continue
            stepA *= 0.5
            if stepA < 1e-6:
                break
            A = A_prev + direction * stepA
            continue
        mu_here = float(sol.p[0])
        prm = ModelParams(p=p, variant=Variant.MU_FAMILY, mu=mu_here)
        bcoef = _boundary_coeffs(prm, L, sol.y[:, -1])
        fitted = BundleCoeffs(C1=bcoef["C1"], C2=bcoef["C2"],
                              C3=bcoef["C3"], y_match=L)
        prof = ProfileGrid(nodes=sol.x, values=sol.y, params=prm,
                           fitted=fitted,
                           residual_norm=float(np.max(sol.rms_residuals)),
                           converged=True,
                           meta={"L": L, "origin": branch.origin})
        branch.points.append(BranchPoint(
            mu_here, prof, float(np.max(np.abs(sol.y[0] - fstar)))))
        if mu_prev is not None and (mu_prev - target) * (mu_here - target) < 0.0:
            # secant in A onto mu = target
            Aa, mua = A_prev, mu_prev
            Ab, mub, gxb, gyb = A, mu_here, sol.x, sol.y
            for _ in range(20):
                As = Ab + (target - mub) * (Ab - Aa) / (mub - mua)
                s2 = _mu_pinned_solve(p, L, tol, max_nodes, gxb, gyb, mub, As)
                if s2.status != 0:
                    break
                Aa, mua = Ab, mub
                Ab, mub, gxb, gyb = As, float(s2.p[0]), s2.x, s2.y
                if abs(mub - target) < 1e-10:
                    break
            hit = (gxb, gyb)
            break
        A_prev, mu_prev, mu_guess = A, mu_here, mu_here
        gx, gy = sol.x, sol.y
        A += direction * stepA
        if abs(A) > 1e-2:
            break
        stepA = min(2.0 * stepA, step0)
    if hit is None:
        raise ContinuationError(
            f"branch {branch.origin} did not return to mu = {target} "
            f"(last mu = {branch.points[-1].parameter if branch.points else 1.0 / 4.0})")
    final_params = ModelParams(p=p, variant=Variant.MU_FAMILY, mu=target)
    seed = ProfileGrid(nodes=hit[0], values=hit[1], params=final_params,
                       fitted=None, residual_norm=0.0, converged=True,
                       meta={"L": L, "origin": branch.origin})
    polished = solve(final_params, seed, L=L, tol=1e-10)
    branch.points.append(BranchPoint(
        target, polished,
        float(np.max(np.abs(polished.values[0] - flat_equilibrium(p))))))
    return branch


def continue_branch(origin: str, p: float = 5.0, target: Optional[float] = None,
                    step: float = 1e-2, max_points: int = 240,
                    L: Optional[float] = None, tol: float = 1e-9,
                    max_nodes: int = 40000,
                    direction: Optional[float] = None) -> Branch:
    """Trace a solution branch from a bifurcation point of the equilibrium.

    mu-branches (origin "mu2", "mu4", ...): the MuFamily profile detaches
    from the constant equilibrium at mu = 1/k and is followed until mu
    crosses `target` (default 1/4), then a fixed-parameter polish lands
    exactly on target and is appended as the final point.  k = 2 mod 4
    uses Keller arclength with a functional tangent (the branch is
    monotone in mu).  k = 4 instead marches the centre deviation
    A = f(0) - f*: mu(A) rises above 1/4, folds at the branch maximum and
    returns, but stays single-valued in A, so the pin cannot slide at the
    fold; the return crossing is the second profile.  `direction` picks
    the branch side at onset (sign of the tangent gauge); None selects
    the side that reaches the default target.

    p-branches (origin "p0", "p2", ...): exponential-decay Global profiles
    bifurcating from zero at p_l = 1 + 4/(1+l), continued in p with the
    algebraic coefficient pinned to zero; `target` bounds the excursion
    (default p_l + 0.4).  Steps halve on corrector failure; the branch ends
    early with whatever converged when the step underflows.
    """
    kind, knum = _parse_origin(origin)
    if L is None:
        L = default_L(p if kind == "mu" else 1.0 + 4.0 / (1.0 + knum))
    branch = Branch(parameter_name=kind, origin=origin)

    if kind == "mu":
        mu0 = 1.0 / knum
        if target is None:
            target = 0.25
        if direction is None:
            direction = -1.0
        if knum == 4:
            return _center_pinned_mu_branch(branch, p, L, tol, max_nodes,
                                            target, direction, max_points)
        fstar = flat_equilibrium(p)
        xd = np.linspace(0.0, L, 1601)
        # onset tangent: damped eigenpolynomial, unit L2 norm
        poly = xd ** 2 if knum % 4 else xd ** 4 + 24.0
        shape = poly * np.exp(-(xd / (0.45 * L)) ** 4)
        shape = direction * shape / math.sqrt(np.trapz(shape ** 2, xd))
        f_ref_arr = np.full_like(xd, fstar)
        tau_arr = shape
        beta = 0.0
        mu_ref = mu0
        mu_guess = mu0
        mu_prev = mu0

        def make_guess(ds):
            fg = f_ref_arr + ds * tau_arr
            q = np.concatenate([[0.0], np.cumsum(
                0.5 * ds * (tau_arr[1:] ** 2 + tau_arr[:-1] ** 2) * np.diff(xd))])
            g = np.vstack([fg, np.gradient(fg, xd), np.zeros_like(xd),
                           np.zeros_like(xd), q])
            g[2] = np.gradient(g[1], xd)
            g[3] = np.gradient(g[2], xd)
            return xd, g

        s = step
        guess_x, guess_y = make_guess(s)
        crossed = False
        for _ in range(max_points):
            f_ref = lambda t: np.interp(t, xd, f_ref_arr)
            tau = lambda t: np.interp(t, xd, tau_arr)
            sol = _mu_branch_solve(p, L, tol, max_nodes, guess_x, guess_y,
                                   mu_guess, f_ref, tau, mu_ref, beta, s)
            mu_here = float(sol.p[0]) if sol.status == 0 else -1.0
            if mu_here <= 0.0:
                s *= 0.5
                if s < 1e-6:
                    break
                if len(branch.points) == 0:
                    guess_x, guess_y = make_guess(s)
                continue
            prm = ModelParams(p=p, variant=Variant.MU_FAMILY, mu=mu_here)
            bcoef = _boundary_coeffs(prm, L, sol.y[:4, -1])
            fitted = BundleCoeffs(C1=bcoef["C1"], C2=bcoef["C2"],
                                  C3=bcoef["C3"], y_match=L)
            prof = ProfileGrid(nodes=sol.x, values=sol.y[:4], params=prm,
                               fitted=fitted,
                               residual_norm=float(np.max(sol.rms_residuals)),
                               converged=True, meta={"L": L, "origin": origin})
            amp = float(np.max(np.abs(sol.y[0] - fstar)))
            branch.points.append(BranchPoint(mu_here, prof, amp))
            # crossing between consecutive points; branches rooted at the
            # target itself (mu0 == target) count only the return crossing
            if (mu_prev - target) * (mu_here - target) < 0.0:
                crossed = True
                break
            # functional tangent update from the last two profiles
            f_here = prof(xd)
            dfe, dmu = f_here - f_ref_arr, mu_here - mu_ref
            nrm = math.sqrt(np.trapz(dfe ** 2, xd) + dmu ** 2)
            if nrm > 0.0:
                tau_arr, beta = dfe / nrm, dmu / nrm
            f_ref_arr, mu_ref, mu_prev, mu_guess = f_here, mu_here, mu_here, mu_here
            q = np.concatenate([[0.0], np.cumsum(
                0.5 * s * (tau_arr[1:] ** 2 + tau_arr[:-1] ** 2) * np.diff(xd))])
            guess_y = np.vstack([prof(xd) + s * tau_arr, prof(xd, 1),
                                 prof(xd, 2), prof(xd, 3), q])
            guess_x = xd
            s = min(1.5 * s, 5.0 * step)
        if not crossed:
            raise ContinuationError(
                f"branch {origin} did not reach mu = {target} "
                f"(last mu = {branch.points[-1].parameter if branch.points else mu0})")
        final_params = ModelParams(p=p, variant=Variant.MU_FAMILY, mu=target)
        polished = solve(final_params, branch.points[-1].profile, L=L, tol=1e-10)
        branch.points.append(BranchPoint(
            target, polished,
            float(np.max(np.abs(polished.values[0] - fstar)))))
        return branch

    # p-branch of exponential-decay Global profiles
    if direction is None:
        direction = 1.0
    l = knum
    p_l = 1.0 + 4.0 / (1.0 + l)
    if target is None:
        target = p_l + 0.4
    prm0 = ModelParams(p=p_l + 1e-3, variant=Variant.GLOBAL)
    seed = eigenmode_seed(prm0, L, l, direction * step)
    guess_x, guess_y = seed.nodes, seed.values.copy()
    prev = (float(guess_y[0, 0]), p_l)
    tang = (direction, 0.0)
    s = step
    p_guess = p_l
    for _ in range(max_points):
        sol = _p_branch_solve(L, tol, max_nodes, guess_x, guess_y,
                              p_guess, tang, prev, s)
        if sol.status != 0:
            s *= 0.5
            if s < 1e-7:
                break
            continue
        p_here = float(sol.p[0])
        prm = ModelParams(p=p_here, variant=Variant.GLOBAL)
        prof = _as_profile(sol, prm, None, {"L": L, "origin": origin})
        amp = float(np.max(np.abs(sol.y[0])))
        branch.points.append(BranchPoint(p_here, prof, amp))
        if (p_here - target) * (p_l - target) <= 0.0:
            break
        g_here = float(sol.y[0, 0])
        dg, dp = g_here - prev[0], p_here - prev[1]
        nrm = math.hypot(dg, dp)
        if nrm > 0.0:
            tang = (dg / nrm, dp / nrm)
        prev = (g_here, p_here)
        guess_x, guess_y, p_guess = sol.x, sol.y, p_here
        if s < step:
            s = min(2.0 * s, step)
    if not branch.points:
        raise ContinuationError(f"branch {origin} produced no converged points")
    return branch


# ---------------------------------------------------------------------------
# exponential-decay exponent detection

def detect_p_delta(f0_start: ProfileGrid, p_bracket: Sequence[float] = (1.3, 1.55),
                   N: int = 1, L: Optional[float] = None, tol: float = 1e-10,
                   max_nodes: int = 100000, step: float = 0.1):
    """Exponent where the blow-up profile's algebraic coefficient vanishes.

    Continues the f0 branch in p from the starting profile down through the
    bracket, tracking the far-field algebraic coefficient; once it changes
    sign the zero is secant-polished with fixed-p solves (a free-p solve
    with the coefficient row pinned admits the trivial profile and Newton
    collapses onto it).  Returns (p_delta, profile).
    """
    p_lo, p_hi = float(p_bracket[0]), float(p_bracket[1])
    if L is None:
        L = default_L(p_lo)
    prof = f0_start
    p_here = prof.params.p
    trace = []

    def rescaled_step(from_prof, from_p, target_p):
        # the equilibrium amplitude stiffens sharply toward p = 1; an
        # equilibrium-ratio rescale keeps the seed on the f0 family and a
        # collapsed-amplitude result is rejected as a lost step (the zero
        # solution also reports "converged")
        ratio = flat_equilibrium(target_p) / flat_equilibrium(from_p)
        seed = ProfileGrid(nodes=from_prof.nodes,
                           values=from_prof.values * ratio,
                           params=from_prof.params, fitted=None,
                           residual_norm=0.0, converged=True, meta={})
        nxt = solve(ModelParams(p=target_p, N=N), seed, L=L, tol=tol,
                    max_nodes=max_nodes)
        if not nxt.converged or \
                np.max(np.abs(nxt.values[0])) < 0.1 * flat_equilibrium(target_p):
            return None
        return nxt

    s = step
    while True:
        p_next = max(p_lo, min(p_here, p_hi) - s)
        if p_next >= p_here:
            p_next = p_here - s
        nxt = rescaled_step(prof, p_here, p_next)
        if nxt is None:
            s *= 0.5
            if s < 1e-3:
                raise ContinuationError(
                    f"p-continuation lost convergence at p = {p_next}")
            continue
        prof = nxt
        p_here = p_next
        s = min(2.0 * s, step)
        if p_here <= p_hi:
            trace.append((p_here, prof.fitted.C1, prof))
        if len(trace) >= 2 and trace[-1][1] * trace[-2][1] < 0.0:
            break
        if p_here <= p_lo:
            break
    flips = [(a, b) for a, b in zip(trace[:-1], trace[1:]) if a[1] * b[1] < 0.0]
    if not flips:
        signs = [(round(t[0], 4), float(np.sign(t[1]))) for t in trace]
        raise ContinuationError(
            f"algebraic coefficient kept its sign over {signs}; "
            "no exponential-decay exponent inside the bracket")
    a, b = flips[0]
    (pa, ca, _), (pb, cb, profile) = a, b
    for _ in range(40):
        if abs(pb - pa) < 1e-8:
            break
        p_mid = pb + (0.0 - cb) * (pb - pa) / (cb - ca)
        p_mid = min(max(p_mid, p_lo), p_hi)
        nxt = rescaled_step(profile, pb, p_mid)
        if nxt is None:
            raise ContinuationError(
                f"secant solve lost convergence at p = {p_mid}")
        pa, ca = pb, cb
        pb, cb, profile = p_mid, nxt.fitted.C1, nxt
        if abs(cb) < 1e-9:
            break
    p_delta = pb
    if not p_lo <= p_delta <= p_hi:
        raise ContinuationError(
            f"p-eigenvalue {p_delta} escaped the bracket {p_bracket}")
    profile.meta["p_delta"] = p_delta
    return p_delta, profile
