"""Tests for the profile container and its interpolation."""

import numpy as np
import pytest

from blowlab.odecore import ModelParams
from blowlab.profiles import ProfileGrid


PRM = ModelParams(p=2.0)


def sine_profile(n=200, lo=0.0, hi=3.0, decreasing=False):
    y = np.linspace(lo, hi, n)
    if decreasing:
        y = y[::-1]
    vals = np.array([np.sin(y), np.cos(y), -np.sin(y), -np.cos(y)])
    return ProfileGrid(nodes=y, values=vals, params=PRM)


class TestConstruction:
    def test_rejects_wrong_shape(self):
        y = np.linspace(0, 1, 10)
        with pytest.raises(ValueError):
            ProfileGrid(nodes=y, values=np.zeros((3, 10)), params=PRM)
        with pytest.raises(ValueError):
            ProfileGrid(nodes=y, values=np.zeros((4, 9)), params=PRM)

    def test_rejects_non_monotone_nodes(self):
        y = np.array([0.0, 1.0, 0.5, 2.0])
        with pytest.raises(ValueError):
            ProfileGrid(nodes=y, values=np.zeros((4, 4)), params=PRM)

    def test_accepts_decreasing_nodes(self):
        prof = sine_profile(decreasing=True)
        assert prof.y_span == (0.0, 3.0)


class TestInterpolation:
    def test_exact_at_nodes(self):
        prof = sine_profile()
        y = prof.nodes[::7]
        for k in range(4):
            np.testing.assert_allclose(prof(y, order=k), prof.values[k, ::7],
                                       rtol=0, atol=1e-14)

    @pytest.mark.parametrize("order,tol", [(0, 1e-9), (1, 1e-9), (2, 1e-9), (3, 1e-6)])
    def test_between_nodes(self, order, tol):
        prof = sine_profile(n=400)
        y = np.linspace(0.1, 2.9, 777)
        exact = [np.sin, np.cos, lambda t: -np.sin(t), lambda t: -np.cos(t)][order](y)
        np.testing.assert_allclose(prof(y, order=order), exact, rtol=0, atol=tol)

    def test_decreasing_nodes_interpolate_identically(self):
        a, b = sine_profile(), sine_profile(decreasing=True)
        y = np.linspace(0.2, 2.8, 50)
        np.testing.assert_allclose(a(y), b(y), rtol=0, atol=1e-14)

    def test_order_out_of_range(self):
        prof = sine_profile()
        with pytest.raises(ValueError):
            prof(1.0, order=4)


class TestEvenExtension:
    def test_symmetry_of_rows(self):
        prof = sine_profile(lo=0.0, hi=2.0)
        ext = prof.even_extension()
        y = np.linspace(0.1, 1.9, 33)
        for k, sign in enumerate([1.0, -1.0, 1.0, -1.0]):
            np.testing.assert_allclose(ext(-y, order=k), sign * ext(y, order=k),
                                       rtol=0, atol=1e-14)

    def test_node_at_zero_not_duplicated(self):
        prof = sine_profile(lo=0.0, hi=1.0, n=11)
        ext = prof.even_extension()
        assert np.count_nonzero(ext.nodes == 0.0) == 1
        assert ext.nodes.size == 21

    def test_without_node_at_zero(self):
        prof = sine_profile(lo=0.5, hi=1.5, n=11)
        ext = prof.even_extension()
        assert ext.nodes.size == 22
        assert ext.y_span == (-1.5, 1.5)


class TestRestrict:
    def test_restrict_window(self):
        prof = sine_profile()
        sub = prof.restrict(1.0, 2.0)
        assert sub.nodes.min() >= 1.0 and sub.nodes.max() <= 2.0
        y = np.linspace(1.05, 1.95, 20)
        np.testing.assert_allclose(sub(y), prof(y), rtol=0, atol=1e-14)

    def test_restrict_empty_raises(self):
        prof = sine_profile()
        with pytest.raises(ValueError):
            prof.restrict(5.0, 6.0)
