"""
Euler subsolutions on the 2-D unit torus: the relaxed constraint, linear
residuals, energy admissibility, and the shear and Muskat mixing-zone
subsolutions.

Triples are sampled on a space-time grid.  Vector fields have shape
(2, Nt, N, N), tensors (2, 2, Nt, N, N) and scalars (Nt, N, N).  Triples
built from closed forms also carry an evaluator so that weak residuals can
be integrated with interface-aware Gauss-Legendre quadrature.
"""

from dataclasses import dataclass, field

import numpy as np

from .fields import Grid
from .tartar import IPM, multiplier_apply, time_bump


class ConfigError(ValueError):
    pass


class WrapError(ValueError):
    pass


@dataclass
class SubsolutionTriple:
    v: np.ndarray
    u: np.ndarray
    q: np.ndarray
    ebar: np.ndarray
    grid: Grid
    exact: object = None        # callable (x1, x2, t) -> (v1, v2, u11, u12, q, ebar)
    interfaces: object = None   # callable t -> x2 breakpoints inside (0, 1)

    def __post_init__(self):
        check_traceless(self.u)

    @property
    def times(self):
        return self.grid.times()


@dataclass
class AdmissibilityReport:
    times: np.ndarray
    energy: np.ndarray
    a: bool
    b: bool
    a_strong: bool
    b_strong: bool
    local_violation: float = float("nan")
    margins: dict = field(default_factory=dict)

    @property
    def c(self):
        return bool(self.local_violation <= self.margins.get("local_tol", 1e-8))


def check_traceless(u, rtol=1e-12):
    tr = u[0, 0] + u[1, 1]
    scale = max(float(np.abs(u).max()), 1.0)
    if np.abs(tr).max() > rtol * scale:
        raise TypeError("u must be traceless")


def _lmax(M11, M12, M22):
    return 0.5 * (M11 + M22) + np.sqrt(0.25 * (M11 - M22) ** 2 + M12 ** 2)


def generalized_energy(v, u):
    """e(v, u) = (n/2) λ_max(v⊗v - u), n = 2."""
    check_traceless(u)
    return _lmax(v[0] * v[0] - u[0, 0], v[0] * v[1] - u[0, 1], v[1] * v[1] - u[1, 1])


def constraint_margin(t):
    """(2/n) ē - λ_max(v⊗v - u); nonnegative iff the relaxed constraint holds."""
    return t.ebar - generalized_energy(t.v, t.u)


# --- linear residuals ---------------------------------------------------

def _cdiff(f, h, axis):
    return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / (2 * h)


def strong_residual(t):
    """max |∂_t v + div u + ∇q| + max |div v| with centered differences."""
    h = t.grid.spacing
    v, u, q = t.v, t.u, t.q
    if v.shape[1] > 1:
        dt = t.grid.time_step
        vt = np.gradient(v, dt, axis=1, edge_order=2)
    else:
        vt = np.zeros_like(v)
    r1 = vt[0] + _cdiff(u[0, 0], h, 1) + _cdiff(u[0, 1], h, 2) + _cdiff(q, h, 1)
    r2 = vt[1] + _cdiff(u[1, 0], h, 1) + _cdiff(u[1, 1], h, 2) + _cdiff(q, h, 2)
    dv = _cdiff(v[0], h, 1) + _cdiff(v[1], h, 2)
    return float(max(np.abs(r1).max(), np.abs(r2).max()) + np.abs(dv).max())


TEST_MODES = ((0, 1), (0, 2), (1, 0), (1, 1), (2, -1), (0, 3))


def _gauss_nodes(breaks, order):
    xg, wg = np.polynomial.legendre.leggauss(order)
    xs, ws = [], []
    for a, b in zip(breaks, breaks[1:]):
        xs.append(0.5 * (b - a) * xg + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * wg)
    return np.concatenate(xs), np.concatenate(ws)


def _pairings(v1, v2, u11, u12, q, x1, x2, wx, b, bt, modes):
    """Momentum pairing against ∇⊥ψ b(t) and divergence pairing against ∇ψ b(t).

    Arrays are indexed (t, x1, x2); wx holds the spatial weights and b, bt
    already include the time weights.
    """
    out = []
    for k in modes:
        arg = 2 * np.pi * (k[0] * x1 + k[1] * x2)
        for s, c in ((np.sin(arg), np.cos(arg)), (np.cos(arg), -np.sin(arg))):
            # ψ = s with ∂ψ = 2π k c and ∂²ψ = -(2π)² k k s
            p1, p2 = 2 * np.pi * k[0] * c, 2 * np.pi * k[1] * c
            h11 = -(2 * np.pi) ** 2 * k[0] * k[0] * s
            h12 = -(2 * np.pi) ** 2 * k[0] * k[1] * s
            h22 = -(2 * np.pi) ** 2 * k[1] * k[1] * s
            # φ = (-∂_2 ψ, ∂_1 ψ); ∇φ = [[-h12, -h22], [h11, h12]]
            phi1, phi2 = -p2, p1
            mom = (bt[:, None, None] * (v1 * phi1 + v2 * phi2)
                   + b[:, None, None] * (u11 * (-h12) + u12 * (-h22 + h11) - u11 * h12))
            div = b[:, None, None] * (v1 * p1 + v2 * p2)
            out.append(abs(float(np.sum(mom * wx))))
            out.append(abs(float(np.sum(div * wx))))
    return max(out)


def weak_residual(t, modes=TEST_MODES, order=6, t_window=None):
    """Max distributional pairing of the linear system over a test library.

    With an exact evaluator the x2 integral is split at the interfaces and
    done by Gauss-Legendre, x1 by the rectangle rule; otherwise the sampled
    fields are integrated on the grid (rectangle in x, trapezoid in t).
    """
    times = t.times
    t0, t1 = t_window if t_window is not None else (times[0], times[-1])
    if t1 <= t0:
        raise ConfigError("need a time window of positive length")
    n = t.grid.resolution
    if t.exact is None:
        sel = (times >= t0) & (times <= t1)
        ts = times[sel]
        b, bt = time_bump(ts - t0, t1 - t0)
        wt = np.full(ts.size, t.grid.time_step)
        wt[[0, -1]] *= 0.5
        x1, x2 = t.grid.coords()
        wx = t.grid.spacing ** 2
        return _pairings(t.v[0][sel], t.v[1][sel], t.u[0, 0][sel], t.u[0, 1][sel], t.q[sel],
                         x1[None], x2[None], wx, b * wt, bt * wt, modes)
    tq, wt = _gauss_nodes(np.linspace(t0, t1, 25), order)
    b, bt = time_bump(tq - t0, t1 - t0)
    b, bt = b * wt, bt * wt
    x1 = np.arange(16) / 16
    return _weak_exact_total(t, tq, b, bt, x1, n, order, modes)


def _weak_exact_total(t, tq, b, bt, x1, n, order, modes):
    acc = {}
    for j, tj in enumerate(tq):
        br = sorted(set([0.0, 1.0] + [x for x in t.interfaces(tj) if 0 < x < 1]))
        pts = []
        for a, c in zip(br, br[1:]):
            m = max(1, int(np.ceil((c - a) * n)))
            pts.extend(np.linspace(a, c, m + 1)[:-1])
        pts.append(1.0)
        x2, w2 = _gauss_nodes(np.array(pts), order)
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        v1, v2, u11, u12, q, _ = t.exact(X1, X2, tj)
        wx = w2[None, :] / x1.size
        for k in modes:
            arg = 2 * np.pi * (k[0] * X1 + k[1] * X2)
            for tag, s, c in (("s", np.sin(arg), np.cos(arg)), ("c", np.cos(arg), -np.sin(arg))):
                p1, p2 = 2 * np.pi * k[0] * c, 2 * np.pi * k[1] * c
                f = -(2 * np.pi) ** 2 * s
                h11, h12, h22 = f * k[0] * k[0], f * k[0] * k[1], f * k[1] * k[1]
                mom = bt[j] * (-v1 * p2 + v2 * p1) + b[j] * (-2 * u11 * h12 + u12 * (h11 - h22))
                div = b[j] * (v1 * p1 + v2 * p2)
                key = (k, tag)
                m0, d0 = acc.get(key, (0.0, 0.0))
                acc[key] = (m0 + float(np.sum(mom * wx)), d0 + float(np.sum(div * wx)))
    return max(max(abs(m), abs(d)) for m, d in acc.values())


def linear_residual(t, t_window=None):
    return {"strong": strong_residual(t), "weak": weak_residual(t, t_window=t_window)}


# --- admissibility ------------------------------------------------------

def energy_profile(v, grid, density=None):
    """E(t) = ∫ |v|²/2 dx, or ∫ density dx when an energy density is given."""
    dens = 0.5 * (v[0] ** 2 + v[1] ** 2) if density is None else density
    return dens.mean(axis=(-2, -1)) * grid.period ** 2


def admissibility(v, p, grid, density=None, tol=1e-10, local_tol=1e-8):
    """Energy criteria (a), (b), (a'), (b') and the local inequality (c).

    The primed criteria are checked at every sampled time; the unprimed ones
    on cell averages between consecutive samples (the "almost every t"
    versions), so that (a') implies (a) and (b') implies (b).
    """
    if p is None:
        raise ConfigError("admissibility needs a pressure field")
    times = grid.times()
    E = energy_profile(v, grid, density)
    a_strong = bool(np.all(E <= E[0] + tol))
    b_strong = bool(np.all(np.diff(E) <= tol))
    Ec = 0.5 * (E[1:] + E[:-1]) if E.size > 1 else E
    a = bool(np.all(Ec <= E[0] + tol))
    b = bool(np.all(np.diff(Ec) <= tol)) if Ec.size > 1 else True
    viol = local_energy_violation(v, p, grid) if v.shape[1] > 2 else 0.0
    return AdmissibilityReport(times, E, a, b, a_strong, b_strong, viol,
                               {"tol": tol, "local_tol": local_tol,
                                "energy_drop": float(E[0] - E.min())})


def local_energy_violation(v, p, grid, modes=((0, 0), (1, 0), (0, 1), (1, 1))):
    """Max positive pairing of ∂_t(|v|²/2) + div((|v|²/2 + p) v) with φ ≥ 0."""
    times = grid.times()
    T = times[-1] - times[0]
    b, bt = time_bump(times - times[0], T)
    wt = np.full(times.size, grid.time_step)
    wt[[0, -1]] *= 0.5
    x1, x2 = grid.coords()
    e = 0.5 * (v[0] ** 2 + v[1] ** 2)
    flux = (e + p)
    worst = 0.0
    for k in modes:
        arg = 2 * np.pi * (k[0] * x1 + k[1] * x2)
        for ph in (0.0, 0.5 * np.pi):
            phi = 1.0 + np.cos(arg + ph)
            g = -2 * np.pi * np.sin(arg + ph)
            g1, g2 = g * k[0], g * k[1]
            dens = (bt[:, None, None] * e * phi
                    + b[:, None, None] * flux * (v[0] * g1 + v[1] * g2))
            pairing = -float(np.sum(dens.mean(axis=(1, 2)) * wt))
            worst = max(worst, pairing)
    return worst


# --- shear flow mixing zone --------------------------------------------

def shear_profiles(c, sigma=1.0, eta=0.0):
    """Closed-form shear subsolution; the zone is |x2 - 1/2| < c t.

    Inside, with ζ = (x2 - 1/2)/(c t): v = -σζ e1, u = diag(ζ²/2, -ζ²/2)
    + σc(1 - ζ²)/2 (e1⊗e2 + e2⊗e1), q = ζ²/2, and
    ē = ζ²/2 + c(1 - ζ²)/2 + η(1 - ζ²).  Outside, v = ∓σ e1 is an exact
    solution with u = diag(1/2, -1/2), q = 1/2 and ē = 1/2.  The torus wrap
    x2 = 0 carries a steady vortex sheet.
    """
    def exact(x1, x2, t):
        y = x2 - 0.5
        x1 = np.asarray(x1, dtype=float)
        if t > 0:
            z = np.clip(y / (c * t), -1.0, 1.0)
        else:
            z = np.where(y < 0, -1.0, 1.0)
        inside = np.abs(z) < 1
        v1 = -sigma * z + 0 * x1
        v2 = 0 * v1
        u11 = 0.5 * z * z + 0 * x1
        u12 = np.where(inside, 0.5 * sigma * c * (1 - z * z), 0.0) + 0 * x1
        q = u11.copy()
        eb = np.where(inside, 0.5 * z * z + 0.5 * c * (1 - z * z) + eta * (1 - z * z), 0.5) + 0 * x1
        return v1, v2, u11, u12, q, eb

    def interfaces(t):
        return [0.5 - c * t, 0.5 + c * t]

    return exact, interfaces


def shear_rate(c, eta=0.0):
    """dE/dt of ∫ē for the shear ansatz, per unit area."""
    c = np.asarray(c, dtype=float)
    return c * (2 * c - 2 + 4 * eta) / 3


def reference_rate(c):
    """Closed form c(√(1+c²) - 2)/3, kept for comparison with `shear_rate`."""
    c = np.asarray(c, dtype=float)
    return c * (np.sqrt(1 + c * c) - 2) / 3


def _sample(exact, grid):
    x1, x2 = grid.coords()
    out = [np.array(f) for f in zip(*(exact(x1, x2, t) for t in grid.times()))]
    return out


def build_shear_subsolution(c, grid, sigma=1.0, eta=0.0, T=None):
    """Sample the shear subsolution for t in [0, T] (T = (Nt-1) dt)."""
    if c <= 0:
        raise ConfigError("mixing speed must be positive")
    T = grid.times()[-1] if T is None else T
    if c * T >= 0.5:
        raise WrapError("mixing zone would wrap around the torus (need c T < 1/2)")
    exact, interfaces = shear_profiles(c, sigma, eta)
    v1, v2, u11, u12, q, eb = _sample(exact, grid)
    v = np.array([v1, v2])
    u = np.array([[u11, u12], [u12, -u11]])
    return SubsolutionTriple(v, u, q, eb, grid, exact, interfaces)


def dissipation_scan(c_grid, eta=0.0, resolution=256, T=0.25, samples=9):
    """Closed-form and measured dE/dt over mixing speeds; returns rows and the optimum.

    The measured rate is the slope of a least-squares line through E(t) of
    the sampled subsolution (exact ē quadrature in x2 per time).
    """
    c_grid = np.asarray(c_grid, dtype=float)
    if np.any(c_grid <= 0) or np.any(c_grid >= 2):
        raise ConfigError("mixing speeds must lie in (0, 2)")
    rows = []
    for c in c_grid:
        Tc = min(T, 0.45 / c)
        ts = np.linspace(0, Tc, samples)
        exact, interfaces = shear_profiles(c, eta=eta)
        E = []
        for tj in ts:
            br = sorted(set([0.0, 1.0] + [x for x in interfaces(tj) if 0 < x < 1]))
            x2, w2 = _gauss_nodes(np.linspace(0, 1, resolution + 1) if len(br) == 2 else
                                  np.unique(np.concatenate([np.linspace(a, b, max(2, int((b - a) * resolution) + 1))
                                                            for a, b in zip(br, br[1:])])), 4)
            eb = exact(np.zeros_like(x2), x2, tj)[5]
            E.append(float(np.sum(eb * w2)))
        slope = np.polyfit(ts, E, 1)[0]
        rows.append((float(c), float(shear_rate(c, eta)), float(slope), float(reference_rate(c))))
    arr = np.array(rows)
    i = int(np.argmin(arr[:, 2]))
    return rows, {"c_star": rows[i][0], "rate": rows[i][2],
                  "c_star_closed": float(1 - 2 * eta) / 2 if eta < 0.5 else float("nan"),
                  "rate_closed": float(shear_rate((1 - 2 * eta) / 2, eta)) if eta < 0.5 else float("nan"),
                  "reference_c_star": (3 / 4) ** 0.25,
                  "reference_rate": float(reference_rate((3 / 4) ** 0.25)),
                  "benchmark": -1 / 6}


def zone_width(field, grid, threshold=1 - 1e-12):
    """Width in x2 of {|f| < 1} for an x2-profile that is linear inside the zone."""
    prof = field.mean(axis=0) if field.ndim == 2 else field
    x2 = grid.axis()
    inside = np.abs(prof) < threshold
    if inside.sum() < 2:
        return 0.0
    slope = np.polyfit(x2[inside], prof[inside], 1)[0]
    return float(2 / abs(slope))


# --- Muskat mixing zone -------------------------------------------------

@dataclass
class MuskatSubsolution:
    theta: np.ndarray      # (Nt, N, N)
    flux: np.ndarray       # (2, Nt, N, N)
    velocity: np.ndarray   # (2, Nt, N, N), T[θ] for IPM
    grid: Grid
    c: float
    exact: object = None
    interfaces: object = None


def muskat_profiles(c, sigma=1.0):
    """θ = σζ inside |x2 - 1/2| < c t, ±σ outside; flux (0, σc(ζ² - 1)/2) inside, 0 outside."""
    def exact(x1, x2, t):
        y = x2 - 0.5
        if t > 0:
            z = np.clip(y / (c * t), -1.0, 1.0)
        else:
            z = np.where(y < 0, -1.0, 1.0)
        th = sigma * z + 0 * np.asarray(x1, dtype=float)
        q2 = 0.5 * sigma * c * (z * z - 1) + 0 * th
        return th, 0 * th, q2

    return exact, lambda t: [0.5 - c * t, 0.5 + c * t]


def build_muskat_subsolution(c, grid, sigma=1.0, T=None):
    if c <= 0:
        raise ConfigError("mixing speed must be positive")
    T = grid.times()[-1] if T is None else T
    if c * T >= 0.5:
        raise WrapError("mixing zone would wrap around the torus (need c T < 1/2)")
    exact, interfaces = muskat_profiles(c, sigma)
    x1, x2 = grid.coords()
    th, q1, q2 = (np.array(f) for f in zip(*(exact(x1, x2, t) for t in grid.times())))
    vel = np.array([multiplier_apply(IPM, s) for s in th]).transpose(1, 0, 2, 3)
    return MuskatSubsolution(th, np.array([q1, q2]), vel, grid, c, exact, interfaces)


def muskat_residual(m, modes=TEST_MODES, order=6):
    """Max weak pairing of ∂_t θ + div q = 0 over the test library."""
    times = m.grid.times()
    t0, t1 = times[0], times[-1]
    tq, wt = _gauss_nodes(np.linspace(t0, t1, 17), order)
    b, bt = time_bump(tq - t0, t1 - t0)
    n = m.grid.resolution
    x1 = np.arange(min(n, 64)) / min(n, 64)
    acc = {}
    for j, tj in enumerate(tq):
        br = sorted(set([0.0, 1.0] + [x for x in m.interfaces(tj) if 0 < x < 1]))
        pts = []
        for a, c in zip(br, br[1:]):
            k = max(1, int(np.ceil((c - a) * n)))
            pts.extend(np.linspace(a, c, k + 1)[:-1])
        pts.append(1.0)
        x2, w2 = _gauss_nodes(np.array(pts), order)
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        th, q1, q2 = m.exact(X1, X2, tj)
        wx = w2[None, :] / x1.size
        for k in modes:
            arg = 2 * np.pi * (k[0] * X1 + k[1] * X2)
            for tag, s, cc in (("s", np.sin(arg), np.cos(arg)), ("c", np.cos(arg), -np.sin(arg))):
                g1, g2 = 2 * np.pi * k[0] * cc, 2 * np.pi * k[1] * cc
                dens = bt[j] * wt[j] * th * s + b[j] * wt[j] * (q1 * g1 + q2 * g2)
                acc[(k, tag)] = acc.get((k, tag), 0.0) + float(np.sum(dens * wx))
    return max(abs(x) for x in acc.values())
