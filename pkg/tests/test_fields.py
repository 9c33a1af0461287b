import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cilab.fields import (
    Grid, GridError, MollifierWarning, commutator_exponent, discrete_norms, field_csv,
    inverse_laplacian, mollifier_weights, mollify, pullback_metric, read_field_csv,
    solenoidal_project, spectral_divergence,
)


def _xy(n):
    x = np.arange(n) / n
    return np.meshgrid(x, x, indexing="ij")


class TestGrid:
    def test_rejects_bad_resolution(self):
        for n in (4, 100):
            with pytest.raises(GridError):
                Grid(n)

    def test_rejects_bad_period(self):
        with pytest.raises(GridError):
            Grid(16, period=0)

    def test_times(self):
        g = Grid(16, time_samples=3, time_step=0.5)
        assert np.allclose(g.times(), [0, 0.5, 1.0])


class TestPullbackMetric:
    def test_identity_chart(self):
        X, Y = _xy(32)
        g = pullback_metric(np.array([X, Y, 0 * X]), 1 / 32)
        assert np.allclose(g[0, 0], 1) and np.allclose(g[1, 1], 1) and np.allclose(g[0, 1], 0)

    def test_linear_map(self):
        X, Y = _xy(32)
        g = pullback_metric(np.array([2 * X, Y, 0 * X]), 1 / 32)
        assert np.allclose(g[0, 0], 4) and np.allclose(g[1, 1], 1)

    def test_flat_cylinder(self):
        # (cos 2πx, sin 2πx)/2π has unit speed; second-order differences give
        # |∂u|² = (sin(2πh)/(2πh))², the oracle derived by hand
        n = 256
        X, Y = _xy(n)
        u = np.array([np.cos(2 * np.pi * X), np.sin(2 * np.pi * X), 2 * np.pi * Y]) / (2 * np.pi)
        g = pullback_metric(u, 1 / n, periodic=True)
        h = 1 / n
        assert np.allclose(g[0, 0], (np.sin(2 * np.pi * h) / (2 * np.pi * h)) ** 2, atol=1e-14)
        # the height is a ramp, so the periodic wrap only holds away from y = 0
        assert np.allclose(g[1, 1][:, 1:-1], 1) and np.allclose(g[0, 1][:, 1:-1], 0, atol=1e-14)

    def test_small_grid_rejected(self):
        with pytest.raises(GridError):
            pullback_metric(np.zeros((3, 4, 4)), 0.25)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_positive_semidefinite(self, seed):
        u = np.random.default_rng(seed).normal(size=(3, 16, 16))
        g = pullback_metric(u, 1 / 16, periodic=True)
        ev = np.linalg.eigvalsh(np.moveaxis(g, (0, 1), (-2, -1)))
        assert ev.min() >= -1e-10


class TestMollify:
    def test_constant_preserved(self):
        f = np.full((64, 64), 3.25)
        assert np.allclose(mollify(f, 0.05, 1 / 64), 3.25, atol=1e-14)

    def test_sine_error_second_order(self):
        # analytic convolution: mollified sine = m(ℓ) sin with 1 - m(ℓ) = O(ℓ²)
        errs = []
        for n, ell in ((256, 0.08), (512, 0.04), (1024, 0.02)):
            x = np.arange(n) / n
            f = np.sin(2 * np.pi * x)
            errs.append(np.abs(mollify(f, ell, 1 / n) - f).max())
        rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(rates > 1.8)

    def test_asymmetric_kernel_rejected(self):
        with pytest.raises(ValueError):
            mollifier_weights(0.1, 0.01, 1, kernel=lambda m: 1.0 + 0.5 * m[0])

    def test_scale_range(self):
        with pytest.raises(ValueError):
            mollify(np.zeros(64), 0.3, 1 / 64)

    def test_subgrid_scale_warns(self):
        f = np.random.default_rng(0).normal(size=64)
        with warnings.catch_warnings(record=True) as rec:
            warnings.simplefilter("always")
            out = mollify(f, 0.5 / 64, 1 / 64)
        assert any(issubclass(w.category, MollifierWarning) for w in rec)
        assert np.array_equal(out, f)

    def test_affine_preserved_non_periodic(self):
        x = np.linspace(0, 1, 129)
        X, Y = np.meshgrid(x, x, indexing="ij")
        f = 2 * X - 3 * Y + 0.5
        assert np.abs(mollify(f, 0.05, 1 / 128, period=1.0, periodic=False) - f).max() < 1e-12

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10 ** 6), st.integers(-20, 20), st.integers(-20, 20))
    def test_translation_commutes(self, seed, s1, s2):
        f = np.random.default_rng(seed).normal(size=(64, 64))
        a = np.roll(mollify(f, 0.06, 1 / 64), (s1, s2), axis=(0, 1))
        b = mollify(np.roll(f, (s1, s2), axis=(0, 1)), 0.06, 1 / 64)
        assert np.abs(a - b).max() < 1e-12


class TestSolenoidal:
    def setup_method(self):
        self.g = Grid(64)
        X, Y = self.g.coords()
        psi = np.sin(2 * np.pi * X) * np.cos(4 * np.pi * Y)
        phi = np.cos(2 * np.pi * (X + Y)) + np.sin(6 * np.pi * Y)
        # ∇⊥ψ = (-∂2ψ, ∂1ψ) and ∇φ by hand
        self.perp = np.array([4 * np.pi * np.sin(2 * np.pi * X) * np.sin(4 * np.pi * Y),
                              2 * np.pi * np.cos(2 * np.pi * X) * np.cos(4 * np.pi * Y)])
        self.grad = np.array([-2 * np.pi * np.sin(2 * np.pi * (X + Y)),
                              -2 * np.pi * np.sin(2 * np.pi * (X + Y)) + 6 * np.pi * np.cos(6 * np.pi * Y)])
        del psi, phi

    def test_fixes_divergence_free(self):
        assert np.abs(solenoidal_project(self.perp, self.g) - self.perp).max() < 1e-10

    def test_kills_gradients(self):
        assert np.abs(solenoidal_project(self.grad, self.g)).max() < 1e-10

    def test_splits_sum(self):
        out = solenoidal_project(self.perp + self.grad, self.g)
        assert np.abs(out - self.perp).max() < 1e-10

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_idempotent_and_divergence_free(self, seed):
        w = np.random.default_rng(seed).normal(size=(2, 32, 32))
        g = Grid(32)
        p = solenoidal_project(w, g)
        assert np.abs(solenoidal_project(p, g) - p).max() < 1e-10
        assert np.abs(spectral_divergence(p, g)).max() < 1e-10 * max(1.0, np.abs(w).max())

    def test_inverse_laplacian(self):
        g = Grid(32)
        X, Y = g.coords()
        f = np.sin(2 * np.pi * X)
        assert np.allclose(inverse_laplacian(f, g), -f / (2 * np.pi) ** 2, atol=1e-14)


class TestNorms:
    def test_constant(self):
        r = discrete_norms(np.full((16, 16), -2.0), 1 / 16)
        assert r.c0 == 2.0 and r.c1 == 2.0

    def test_sine(self):
        n = 256
        x = np.arange(n) / n
        r = discrete_norms(np.sin(2 * np.pi * x), 1 / n)
        assert abs(r.c0 - 1) < 1e-3
        assert abs((r.c1 - r.c0) - 2 * np.pi) < 0.01 * 2 * np.pi
        assert abs(r.l2 - 1 / np.sqrt(2)) < 1e-6

    def test_step_tv(self):
        f = np.where(np.arange(64) < 32, -1.0, 1.0)
        assert discrete_norms(f, 1 / 64, periodic=False).tv == 2
        assert discrete_norms(f, 1 / 64, periodic=True).tv == 4

    def test_json_keys(self):
        r = discrete_norms(np.zeros(16), 1 / 16)
        assert set(json.loads(r.to_json())) == {"c0", "c1", "c2", "l1", "l2", "tv"}


class TestCommutator:
    @pytest.mark.parametrize("alpha", [0.6, 0.75, 0.9])
    def test_exponent(self, alpha):
        s = commutator_exponent(alpha, np.geomspace(2.0 ** -10, 2.0 ** -5, 6))
        assert abs(s - (2 * alpha - 1)) <= 0.15

    def test_too_few_scales(self):
        with pytest.raises(ValueError):
            commutator_exponent(0.75, [0.01, 0.02, 0.04])


def test_field_csv_roundtrip():
    a = np.arange(12.0).reshape(3, 4)
    text = field_csv(["f", "g"], [a, -a])
    assert text.splitlines()[0] == "f,g"
    # x-fastest: the second row is sample (1, 0)
    assert text.splitlines()[2].split(",")[0] == "4"
    names, (f, g) = read_field_csv(text, a.shape)
    assert names == ["f", "g"] and np.array_equal(f, a) and np.array_equal(g, -a)
