import numpy as np
import pytest
import sympy as sp

from cilab import euler_subsol as S
from cilab.fields import Grid


def _grid(n=64, nt=9, T=0.25):
    return Grid(n, time_samples=nt, time_step=T / (nt - 1))


def test_generalized_energy_by_hand():
    v = np.array([1.0, 0.0])
    assert S.generalized_energy(v, np.zeros((2, 2))) == pytest.approx(1.0)
    # v⊗v - u = diag(1, 0) - diag(1/2, -1/2) = diag(1/2, 1/2)
    assert S.generalized_energy(v, np.diag([0.5, -0.5])) == pytest.approx(0.5)


def test_traceless_enforced():
    with pytest.raises(TypeError):
        S.generalized_energy(np.zeros(2), np.eye(2))


def test_shear_rate_symbolic_oracle():
    c, eta, z = sp.symbols("c eta z", positive=True)
    eb = z ** 2 / 2 + c * (1 - z ** 2) / 2 + eta * (1 - z ** 2)
    # zone of width 2ct parametrized by ζ ∈ [-1, 1]; dx2 = c t dζ
    rate = sp.integrate((eb - sp.Rational(1, 2)) * c, (z, -1, 1))
    for cv, ev in ((0.5, 0.0), (0.9, 0.01), (1.3, 0.2)):
        assert float(S.shear_rate(cv, ev)) == pytest.approx(float(rate.subs({c: cv, eta: ev})), abs=1e-14)


class TestShear:
    def setup_method(self):
        self.grid = _grid(128)
        self.t = S.build_shear_subsolution(0.5, self.grid)

    def test_weak_residual(self):
        assert S.weak_residual(self.t) <= 1e-8

    def test_margin(self):
        assert S.constraint_margin(self.t).min() >= -1e-12

    def test_strict_margin_with_eta(self):
        te = S.build_shear_subsolution(0.5, self.grid, eta=0.01)
        m = S.constraint_margin(te)
        x1, x2 = self.grid.coords()
        t = self.grid.times()[-1]
        inner = np.abs(x2 - 0.5) < 0.9 * 0.5 * t
        assert m[-1][inner].min() > 0

    def test_energy_affine_with_closed_rate(self):
        E = S.energy_profile(self.t.v, self.grid, density=self.t.ebar)
        slope = np.polyfit(self.grid.times(), E, 1)[0]
        # the sampled ē sees the zone through grid cells; rate -1/6 to O(h)
        assert slope == pytest.approx(-1 / 6, abs=2e-2)

    def test_wrap_and_config_errors(self):
        with pytest.raises(S.WrapError):
            S.build_shear_subsolution(2.5, self.grid)
        with pytest.raises(S.ConfigError):
            S.build_shear_subsolution(-1.0, self.grid)


def test_dissipation_scan_optimum_eta_zero():
    # min of c(2c - 2)/3 is at c = 1/2 with rate -1/6
    rows, opt = S.dissipation_scan(np.linspace(0.1, 1.5, 29), resolution=128)
    assert opt["c_star"] == pytest.approx(0.5)
    assert opt["rate"] == pytest.approx(-1 / 6, abs=1e-6)
    for c, closed, measured, _ in rows:
        assert measured == pytest.approx(closed, abs=1e-6)


def test_dissipation_scan_rejects_range():
    with pytest.raises(S.ConfigError):
        S.dissipation_scan([0.0, 0.5])


class TestMuskat:
    def test_residual_bounds_width(self):
        grid = _grid(128)
        m = S.build_muskat_subsolution(0.5, grid)
        assert S.muskat_residual(m) <= 1e-10
        assert np.abs(m.theta).max() <= 1
        ts = grid.times()
        w = [S.zone_width(m.theta[j], grid) for j in range(1, len(ts))]
        assert np.allclose(w, 2 * 0.5 * ts[1:], atol=1e-9)

    def test_bad_flux_detected(self):
        grid = _grid(64)
        m = S.build_muskat_subsolution(0.5, grid)
        ex = m.exact
        m.exact = lambda x1, x2, t: (lambda th, q1, q2: (th, q1, 2 * q2))(*ex(x1, x2, t))
        assert S.muskat_residual(m) > 1e-6


class TestAdmissibility:
    def test_steady_flow_admissible(self):
        grid = _grid(32)
        x1, x2 = grid.coords()
        v = np.broadcast_to(np.array([np.sin(2 * np.pi * x2), 0 * x2])[:, None], (2, 9, 32, 32))
        rep = S.admissibility(v, np.zeros((9, 32, 32)), grid)
        assert rep.a and rep.b and rep.a_strong and rep.b_strong and rep.c

    def test_energy_growth_rejected(self):
        grid = _grid(32)
        x1, x2 = grid.coords()
        ramp = (1 + grid.times())[:, None, None]
        v = np.array([ramp * np.sin(2 * np.pi * x2), 0 * ramp * x2])
        rep = S.admissibility(v, np.zeros((9, 32, 32)), grid)
        assert not rep.a and not rep.b
        assert rep.local_violation > 0

    def test_pressure_required(self):
        with pytest.raises(S.ConfigError):
            S.admissibility(np.zeros((2, 3, 16, 16)), None, _grid(16, 3))
