"""Tests for the ODE right-hand sides and algebraic helpers."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from blowlab.odecore import (
    ModelParams,
    PhaseState,
    Variant,
    blowup_amplitude,
    characteristic_roots,
    eval_rhs,
    flat_equilibrium,
    hj_profile,
    odd_power,
    phi,
)


def state(y=0.0, f0=0.0, f1=0.0, f2=0.0, f3=0.0):
    return PhaseState(y=y, f0=f0, f1=f1, f2=f2, f3=f3)


class TestModelParams:
    def test_rejects_p_at_or_below_one(self):
        with pytest.raises(ValueError):
            ModelParams(p=1.0)
        with pytest.raises(ValueError):
            ModelParams(p=0.5)

    def test_rejects_bad_dimension(self):
        with pytest.raises(ValueError):
            ModelParams(p=2.0, N=0)
        with pytest.raises(ValueError):
            ModelParams(p=2.0, N=2.5)

    def test_mu_family_requires_positive_mu(self):
        with pytest.raises(ValueError):
            ModelParams(p=2.0, variant=Variant.MU_FAMILY, mu=0.0)
        ModelParams(p=2.0, variant=Variant.MU_FAMILY, mu=0.3)

    def test_drift_linear(self):
        assert ModelParams(p=2.0).drift_linear() == (0.25, -1.0)
        assert ModelParams(p=2.0, variant=Variant.GLOBAL).drift_linear() == (-0.25, 1.0)
        assert ModelParams(p=3.0, variant=Variant.MU_FAMILY, mu=0.1).drift_linear() == (0.1, -0.5)
        assert ModelParams(p=2.0, variant=Variant.PURE_QUARTIC).drift_linear() == (0.0, 0.0)


class TestEvalRhs:
    @pytest.mark.parametrize("p", [1.2, 1.5, 2.0, 3.0, 5.0, 7.0])
    def test_equilibrium_residual_vanishes(self, p):
        # holds for the variants whose linear coefficient is negative; the
        # forward-similarity equation has only the zero constant solution
        fs = flat_equilibrium(p)
        for prm in (ModelParams(p=p),
                    ModelParams(p=p, variant=Variant.MU_FAMILY, mu=0.4)):
            res = eval_rhs(state(y=3.0, f0=fs), prm)
            # the two power evaluations of f*^p and f*/(p-1) may differ by an ulp
            assert abs(res) <= 4.0 * np.spacing(fs / (p - 1.0))

    @pytest.mark.parametrize("p", [1.5, 2.0, 5.0])
    def test_global_equilibrium_is_zero_only(self, p):
        prm = ModelParams(p=p, variant=Variant.GLOBAL)
        assert eval_rhs(state(y=3.0), prm) == 0.0
        fs = flat_equilibrium(p)
        assert eval_rhs(state(y=3.0, f0=fs), prm) == pytest.approx(
            2.0 * fs / (p - 1.0), rel=1e-14)

    def test_equilibrium_exact_for_integer_cases(self):
        assert eval_rhs(state(y=1.0, f0=1.0), ModelParams(p=2.0)) == 0.0
        assert eval_rhs(state(y=1.0, f0=4.0), ModelParams(p=1.5)) == 0.0

    def test_blowup_formula_p2(self):
        # -(1/4)*y*f1 - f0 + |f0|*f0 at (y=2, f0=3, f1=5) = -2.5 - 3 + 9
        prm = ModelParams(p=2.0)
        assert eval_rhs(state(y=2.0, f0=3.0, f1=5.0), prm) == pytest.approx(3.5, abs=1e-14)

    def test_global_formula_p2(self):
        # +(1/4)*y*f1 + f0 + |f0|*f0 at the same state = 2.5 + 3 + 9
        prm = ModelParams(p=2.0, variant=Variant.GLOBAL)
        assert eval_rhs(state(y=2.0, f0=3.0, f1=5.0), prm) == pytest.approx(14.5, abs=1e-14)

    def test_pure_quartic_is_bare_power(self):
        prm = ModelParams(p=3.0, variant=Variant.PURE_QUARTIC)
        assert eval_rhs(state(y=7.0, f0=-2.0, f1=9.0), prm) == pytest.approx(-8.0, abs=1e-14)

    @given(
        p=st.floats(1.01, 9.0),
        y=st.floats(-20.0, 20.0),
        f=st.lists(st.floats(-50.0, 50.0), min_size=4, max_size=4),
    )
    def test_mu_quarter_reduces_to_blowup(self, p, y, f):
        s = state(y, *f)
        base = eval_rhs(s, ModelParams(p=p, variant=Variant.BLOW_UP))
        fam = eval_rhs(s, ModelParams(p=p, variant=Variant.MU_FAMILY, mu=0.25))
        assert fam == base

    @given(
        p=st.floats(1.01, 9.0),
        y=st.floats(0.01, 20.0),
        f=st.lists(st.floats(-50.0, 50.0), min_size=4, max_size=4),
    )
    def test_radial_n1_equals_line_formula(self, p, y, f):
        s = state(y, *f)
        assert eval_rhs(s, ModelParams(p=p, N=1)) == eval_rhs(s, ModelParams(p=p))

    def test_radial_n3_p5_matches_symbolic_oracle(self):
        # frozen from an independent term-by-term symbolic evaluation of the
        # radial right-hand side: exact value -7/2
        prm = ModelParams(p=5.0, N=3)
        val = eval_rhs(state(y=1.0, f0=1.0, f1=1.0, f2=1.0, f3=1.0), prm)
        assert val == pytest.approx(-3.5, abs=1e-14)

    def test_radial_n2_p2_matches_symbolic_oracle(self):
        # frozen symbolic value at (y=2, f=1, f1=2, f2=3, f3=4): N=2 terms
        # -(2/y)*f3 - (-1/y^2)*f2 + (-1/y^3)*f1 give -4 + 3/4 - 1/4 = -7/2,
        # plus the line part -(1/4)*2*2 - 1 + 1 = -1, total -9/2
        prm = ModelParams(p=2.0, N=2)
        val = eval_rhs(state(y=2.0, f0=1.0, f1=2.0, f2=3.0, f3=4.0), prm)
        assert val == pytest.approx(-4.5, abs=1e-14)

    def test_radial_requires_positive_y(self):
        prm = ModelParams(p=2.0, N=3)
        with pytest.raises(ValueError):
            eval_rhs(state(y=0.0, f0=1.0), prm)
        with pytest.raises(ValueError):
            eval_rhs(state(y=-1.0, f0=1.0), prm)

    def test_escaped_state_propagates_nan(self):
        s = state(y=1.0, f0=math.nan)
        assert s.escaped
        assert math.isnan(eval_rhs(s, ModelParams(p=2.0)))


class TestOddPower:
    @given(f=st.floats(-100.0, 100.0), p=st.floats(1.01, 9.0))
    def test_odd_symmetry(self, f, p):
        assert odd_power(-f, p) == -odd_power(f, p)

    def test_negative_base_noninteger_exponent(self):
        assert odd_power(-2.0, 1.5) == pytest.approx(-(2.0 ** 1.5), abs=1e-14)
        assert odd_power(0.0, 2.7) == 0.0


class TestAlgebraicHelpers:
    def test_flat_equilibrium_values(self):
        assert flat_equilibrium(2.0) == 1.0
        assert flat_equilibrium(5.0) == pytest.approx(4.0 ** -0.25, abs=1e-15)
        assert flat_equilibrium(5.0) == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-15)
        assert flat_equilibrium(1.5) == pytest.approx(4.0, abs=1e-14)

    def test_phi_values(self):
        assert phi(0.0) == 0.0
        assert phi(1.5) == pytest.approx(9.0 / 16.0, abs=1e-15)
        assert phi(-2.0) == 120.0

    @given(s=st.floats(-10.0, 10.0))
    def test_phi_symmetric_about_three_halves(self, s):
        a, b = phi(1.5 + s), phi(1.5 - s)
        assert a == pytest.approx(b, rel=1e-13, abs=1e-13)

    def test_blowup_amplitude_values(self):
        assert blowup_amplitude(3.0) == pytest.approx(math.sqrt(120.0), rel=1e-14)
        assert blowup_amplitude(2.0) == pytest.approx(840.0, rel=1e-14)

    def test_blowup_amplitude_defining_identity(self):
        # A0*(y-y0)^{-4/(p-1)} solves f'''' = f^p for p=3: check the quartic
        # derivative coefficient against the power of the right side
        p = 3.0
        a0 = blowup_amplitude(p)
        m = -4.0 / (p - 1.0)
        lhs = a0 * m * (m - 1) * (m - 2) * (m - 3)  # coefficient of (y-y0)^{m-4}
        rhs = a0 ** p  # (A0)^p multiplies (y-y0)^{m*p} and m*p = m-4
        assert m * p == m - 4.0
        assert lhs == pytest.approx(rhs, rel=1e-13)


class TestCharacteristicRoots:
    def test_p3_matches_companion_matrix_oracle(self):
        # frozen from numpy.roots on m^4 - 6m^3 + 11m^2 - 6m - 360:
        # real roots -3 and 6 exactly, complex pair 3/2 +/- i*sqrt(17.75)
        roots = characteristic_roots(3.0)
        expect = sorted(
            [-3.0, 6.0, complex(1.5, math.sqrt(17.75)), complex(1.5, -math.sqrt(17.75))],
            key=lambda z: (z.real, z.imag) if isinstance(z, complex) else (z, 0.0),
        )
        for got, want in zip(roots, expect):
            assert got == pytest.approx(want, rel=1e-12)

    @pytest.mark.parametrize("p", [1.5, 2.0, 5.0, 7.0])
    def test_complex_pair_real_part_is_three_halves(self, p):
        roots = characteristic_roots(p)
        pair = [r for r in roots if abs(r.imag) > 0]
        assert len(pair) == 2
        for r in pair:
            assert r.real == pytest.approx(1.5, abs=1e-12)

    @pytest.mark.parametrize("p", [1.2, 1.5, 2.0, 3.0, 5.0, 7.0])
    def test_root_structure(self, p):
        roots = characteristic_roots(p)
        assert len(roots) == 4
        reals = sorted(r.real for r in roots if r.imag == 0)
        assert len(reals) == 2
        assert reals[1] > 3.0
        assert reals[0] < -4.0 / (p - 1.0)

    @given(p=st.floats(1.05, 9.0))
    def test_sum_of_roots_is_six(self, p):
        roots = characteristic_roots(p)
        total = sum(roots)
        assert total.real == pytest.approx(6.0, rel=1e-10)
        assert total.imag == pytest.approx(0.0, abs=1e-10)

    @given(p=st.floats(1.05, 9.0))
    def test_roots_satisfy_quartic(self, p):
        rhs = p * phi(-4.0 / (p - 1.0))
        roots = characteristic_roots(p)
        conj = {complex(round(r.real, 9), round(-r.imag, 9)) for r in roots}
        got = {complex(round(r.real, 9), round(r.imag, 9)) for r in roots}
        assert conj == got  # closed under conjugation
        for r in roots:
            res = r * (r - 1) * (r - 2) * (r - 3) - rhs
            assert abs(res) <= 1e-9 * max(abs(rhs), 1.0)


class TestHjProfile:
    def test_origin_normalization(self):
        for p, c, k in [(2.0, -1.0, 4), (5.0, 3.0, 6), (1.5, 0.5, 8)]:
            assert hj_profile(0.0, p, c, k) == flat_equilibrium(p)

    @pytest.mark.parametrize("p,c,k", [(2.0, 0.7, 4), (5.0, -0.3, 4), (3.0, 1.2, 6)])
    def test_transport_residual(self, p, c, k):
        # f satisfies -(1/k)*xi*f' - f/(p-1) + |f|^{p-1}f = 0; f' computed
        # analytically here, independent of the implementation under test
        fs = flat_equilibrium(p)
        for xi in np.linspace(0.0, 0.9 * (abs(c) ** (-1.0 / k)) if c < 0 else 3.0, 100):
            f = hj_profile(xi, p, c, k)
            fp = fs * (-1.0 / (p - 1.0)) * (1.0 + c * xi ** k) ** (-1.0 / (p - 1.0) - 1.0) \
                * c * k * xi ** (k - 1)
            res = -(1.0 / k) * xi * fp - f / (p - 1.0) + odd_power(f, p)
            assert abs(res) < 1e-12

    def test_pole_detection(self):
        with pytest.raises(ValueError, match="pole"):
            hj_profile(2.0, 2.0, -1.0, 4)  # 1 + c*xi^4 = -15 <= 0
        # pole location |c|^{-1/k} is reported
        with pytest.raises(ValueError, match="pole at"):
            hj_profile(1.5, 2.0, -1.0, 4)

    def test_rejects_bad_k(self):
        with pytest.raises(ValueError):
            hj_profile(1.0, 2.0, 1.0, 3)
