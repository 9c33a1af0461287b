"""
Nash-Kuiper iteration in codimension one for flat 2-D metrics.

A stage mollifies the map, splits the metric deficit into three primitive
metrics a_k² ν_k⊗ν_k and adds them one at a time with Kuiper corrugations

    ũ = u + (Γ₁(x, λ x·ν) τ + Γ₂(x, λ x·ν) n) / λ.

Maps are arrays of shape (3, N, N) sampled on [0, 1]² (clamped, spacing
1/(N-1)) or on the unit torus (periodic, spacing 1/N).  Derivatives are
fourth-order centered, spectral for periodic grids.
"""

from dataclasses import dataclass, field
from math import factorial

import numpy as np
from scipy.special import j0, j1

from .fields import mollify

J0_FIRST_ZERO = 2.404825557695773
N_STAR = 3


class DecompositionError(ValueError):
    pass


class FrequencyError(ValueError):
    pass


class AmplitudeError(ValueError):
    pass


class ImmersionError(ValueError):
    pass


@dataclass
class ImmersionGrid:
    u: np.ndarray
    periodic: bool = False

    @property
    def resolution(self):
        return self.u.shape[-1]

    @property
    def spacing(self):
        n = self.resolution
        return 1.0 / n if self.periodic else 1.0 / (n - 1)

    def coords(self):
        x = np.arange(self.resolution) * self.spacing
        return np.meshgrid(x, x, indexing="ij")


@dataclass
class PrimitiveDecomposition:
    amplitudes2: list
    directions: list

    def reassemble(self):
        out = 0
        for a2, nu in zip(self.amplitudes2, self.directions):
            out = out + a2 * np.multiply.outer(np.outer(nu, nu), np.ones_like(a2))
        return out


@dataclass
class StageReport:
    deficit_before: float
    deficit_after: float
    deficit_mollified: float
    c1_before: float
    c1_after: float
    c2_before: float
    c2_after: float
    ell: float
    lambdas: list = field(default_factory=list)
    clamped: list = field(default_factory=list)
    k_const: float = 4.0
    min_margin: float = float("nan")

    @property
    def delta_c1(self):
        return self.c1_after - self.c1_before


# --- calculus -----------------------------------------------------------

def derivative(f, h, axis, periodic):
    """Fourth-order first derivative (spectral when periodic)."""
    if periodic:
        n = f.shape[axis]
        k = 2 * np.pi * np.fft.fftfreq(n, d=h)
        if n % 2 == 0:
            k[n // 2] = 0.0
        shape = [1] * f.ndim
        shape[axis] = n
        return np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(f, axis=axis), axis=axis).real
    f = np.moveaxis(f, axis, 0)
    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    d[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    d[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h)
    d[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * h)
    d[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * h)
    return np.moveaxis(d, 0, axis)


def jacobian(grid_or_u, h=None, periodic=None):
    if isinstance(grid_or_u, ImmersionGrid):
        u, h, periodic = grid_or_u.u, grid_or_u.spacing, grid_or_u.periodic
    else:
        u = grid_or_u
    return np.array([derivative(u, h, 1, periodic), derivative(u, h, 2, periodic)])


def metric(grid):
    J = jacobian(grid)
    g = np.einsum("imxy,jmxy->ijxy", J, J)
    return 0.5 * (g + g.transpose(1, 0, 2, 3))


def unit_normal(J):
    n = np.cross(J[0], J[1], axis=0)
    norm = np.linalg.norm(n, axis=0)
    if norm.min() <= 1e-12:
        raise ImmersionError("degenerate tangent plane")
    return n / norm


def min_singular_value(J):
    g = np.einsum("imxy,jmxy->ijxy", J, J)
    tr = g[0, 0] + g[1, 1]
    det = g[0, 0] * g[1, 1] - g[0, 1] ** 2
    lmin = 0.5 * tr - np.sqrt(np.maximum(0.25 * tr * tr - det, 0))
    return np.sqrt(np.maximum(lmin, 0))


def _sym_eigmin(M):
    tr = M[0, 0] + M[1, 1]
    return 0.5 * tr - np.sqrt(0.25 * (M[0, 0] - M[1, 1]) ** 2 + M[0, 1] ** 2)


def map_norms(grid):
    """(C⁰, C¹, C²) cumulative sup norms of a map, max over components."""
    u, h, p = grid.u, grid.spacing, grid.periodic
    J = jacobian(grid)
    c0 = float(np.abs(u).max())
    c1 = c0 + float(np.abs(J).max())
    hess = max(float(np.abs(derivative(J[i], h, 1 + j, p)).max()) for i in range(2) for j in range(2))
    return c0, c1, c1 + hess


# --- shortness and decomposition ----------------------------------------

def shortness_check(grid, g):
    """Smallest eigenvalue of g - u♯e per sample."""
    return _sym_eigmin(g - metric(grid))


def primitive_decompose(D, tol=1e-12):
    """D = Σ a_k² ν_k⊗ν_k with ν ∈ {e₁, e₂, (e₁ ± e₂)/√2}, sign from D₁₂."""
    D = np.asarray(D, dtype=float)
    d11, d12, d22 = D[0, 0], D[0, 1], D[1, 1]
    scale = max(float(np.abs(D).max()), 1.0)
    if np.any(np.abs(d12) > np.minimum(d11, d22) + tol * scale):
        raise DecompositionError("deficit is not diagonally dominant; shrink the step target")
    pos = d12 >= 0
    ad = np.abs(d12)
    a1 = np.maximum(d11 - ad, 0.0)
    a2 = np.maximum(d22 - ad, 0.0)
    s = 1 / np.sqrt(2)
    if np.all(pos) or np.all(~pos):
        nu3 = np.array([s, s]) if np.all(pos) else np.array([s, -s])
        return PrimitiveDecomposition([a1, a2, 2 * ad], [np.array([1.0, 0.0]), np.array([0.0, 1.0]), nu3])
    # mixed signs: both diagonal directions, each carrying its own part
    return PrimitiveDecomposition(
        [a1, a2, np.where(pos, 2 * ad, 0.0), np.where(pos, 0.0, 2 * ad)],
        [np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([s, s]), np.array([s, -s])])


# --- corrugations -------------------------------------------------------

_J0_TABLE = np.linspace(0, J0_FIRST_ZERO, 4097)


def invert_j0(y, newton=4):
    """β in [0, j₀,₁] with J₀(β) = y (y in (0, 1]).

    Bracketing on a monotone table of J₀, then Newton steps; a series
    inversion near β = 0 where J₀' vanishes.
    """
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0) or np.any(y > 1 + 1e-15):
        raise AmplitudeError("J0 inversion needs 0 < y <= 1")
    vals = j0(_J0_TABLE)
    beta = np.interp(-y, -vals, _J0_TABLE)
    for _ in range(newton):
        d = j1(beta)
        ok = d > 1e-14
        beta = np.clip(beta + np.where(ok, (j0(beta) - y) / np.where(ok, d, 1.0), 0.0),
                       0.0, J0_FIRST_ZERO)
    e = np.maximum(1 - y, 0.0)
    # J₀(β) = 1 - β²/4 + β⁴/64 - ..., inverted to second order
    return np.where(beta < 1e-3, np.sqrt(4 * e + 2 * e * e), beta)


def bessel_orders(beta, mmax):
    """J_0 .. J_mmax at β ∈ [0, j₀,₁].

    Miller's backward recurrence, started 16 orders above mmax, with the
    normalization J₀ + 2ΣJ_2k = 1; a five-term power series for β < 0.05.
    """
    beta = np.asarray(beta, dtype=float)
    b = np.maximum(beta, 0.05)
    out = [None] * (mmax + 1)
    jp1 = np.zeros_like(b)
    jc = np.full_like(b, 1e-30)
    norm = np.zeros_like(b)
    for m in range(mmax + 16, 0, -1):
        if m <= mmax:
            out[m] = jc
        if m % 2 == 0:
            norm = norm + 2 * jc
        jp1, jc = jc, (2 * m / b) * jc - jp1
    out[0] = jc
    norm = norm + jc
    out = [o / norm for o in out]
    small = beta < 0.05
    if np.any(small):
        h = 0.5 * beta[small]
        for m in range(mmax + 1):
            ser = np.zeros_like(h)
            for j in range(5):
                ser = ser + (-1) ** j * h ** (2 * j + m) / (factorial(j) * factorial(m + j))
            out[m] = out[m].copy()
            out[m][small] = ser
    return out


def corrugation_profiles(s, r, a, beta, terms=10):
    """Γ₁, Γ₂ and their s-derivatives from the Jacobi-Anger series.

    ∂_sΓ₁ = √(r²+a²) cos(β cos s) - r and ∂_sΓ₂ = √(r²+a²) sin(β cos s);
    both have zero mean because √(r²+a²) J₀(β) = r.
    """
    amp = np.sqrt(r * r + a * a)
    J = bessel_orders(beta, 2 * terms)
    g1 = np.zeros(np.broadcast(s, r, beta).shape)
    g2 = np.zeros_like(g1)
    for k in range(1, terms + 1):
        g1 = g1 + 2 * (-1) ** k * J[2 * k] * np.sin(2 * k * s) / (2 * k)
    for k in range(terms):
        m = 2 * k + 1
        g2 = g2 + 2 * (-1) ** k * J[m] * np.sin(m * s) / m
    d1 = amp * np.cos(beta * np.cos(s)) - r
    d2 = amp * np.sin(beta * np.cos(s))
    return amp * g1, amp * g2, d1, d2


def resolvable_frequency(grid):
    """Largest λ with at least 16 samples per oscillation (Nyquist/8)."""
    return np.pi / (8 * grid.spacing)


def _periodic_frequency(lam, nu):
    # λ ν_i / 2π must be an integer on the torus
    step = 2 * np.pi * max(abs(c) for c in nu if abs(c) > 1e-12) if sum(abs(c) > 1e-12 for c in nu) == 1 \
        else 2 * np.pi * np.sqrt(2)
    return max(step, np.round(lam / step) * step)


def corrugation_step(grid, a, nu, lam, check=True):
    """Add the primitive metric a² ν⊗ν up to O(1/λ).

    τ is the unit tangent with ∂_j u·τ ∝ ν_j, so that the corrugation leaves
    the directions orthogonal to ν in the metric untouched, and
    r = (νᵀ G⁻¹ ν)^(-1/2); for an orthogonal chart these are ∂_ν u/|∂_ν u|
    and |∂_ν u|.
    """
    nu = np.asarray(nu, dtype=float)
    a = np.broadcast_to(np.asarray(a, dtype=float), grid.u.shape[1:])
    if np.any(a < 0):
        raise AmplitudeError("amplitude must be nonnegative")
    if check and lam > resolvable_frequency(grid) * (1 + 1e-12):
        raise FrequencyError(f"λ = {lam:.4g} exceeds the resolvable {resolvable_frequency(grid):.4g}")
    if np.all(a == 0):
        return ImmersionGrid(grid.u.copy(), grid.periodic)
    J = jacobian(grid)
    G = np.einsum("imxy,jmxy->ijxy", J, J)
    det = G[0, 0] * G[1, 1] - G[0, 1] ** 2
    Gi = np.array([[G[1, 1], -G[0, 1]], [-G[0, 1], G[0, 0]]]) / det
    c = np.einsum("ijxy,j->ixy", Gi, nu)
    t = np.einsum("imxy,ixy->mxy", J, c)
    tn = np.linalg.norm(t, axis=0)
    tau = t / tn
    r = 1 / tn
    n = unit_normal(J)
    beta = invert_j0(r / np.sqrt(r * r + a * a))
    x1, x2 = grid.coords()
    s = lam * (nu[0] * x1 + nu[1] * x2)
    g1, g2, _, _ = corrugation_profiles(s, r, a, beta)
    return ImmersionGrid(grid.u + (g1 * tau + g2 * n) / lam, grid.periodic)


def corrugation_metric_error(grid, a, nu, lam):
    """sup |ũ♯e - (u♯e + a² ν⊗ν)| for one corrugation step."""
    new = corrugation_step(grid, a, nu, lam)
    target = metric(grid) + np.multiply.outer(np.outer(nu, nu), np.asarray(a) ** 2 * np.ones(grid.u.shape[1:]))
    return float(np.abs(metric(new) - target).max())


def choose_frequency(u_norm2, deficit_sup, k_const, grid=None):
    """λ = K ‖u‖₂ / √‖deficit‖₀, clamped to the grid; returns (λ, clamped)."""
    if deficit_sup <= 0:
        raise ZeroDivisionError("zero deficit: nothing to correct")
    lam = k_const * u_norm2 / np.sqrt(deficit_sup)
    if grid is not None:
        cap = resolvable_frequency(grid)
        if lam > cap:
            return cap, True
    return lam, False


# --- stages -------------------------------------------------------------

def _sup_deficit(grid, g):
    D = g - metric(grid)
    return float(np.abs(D).max()), D


def stage(grid, g, k_const=4.0, margin=0.1, zero_tol=1e-12):
    """Mollify, decompose the deficit minus margin·(sup|D|/sup|g|)·g, run the corrugation steps."""
    c0, c1, c2 = map_norms(grid)
    dsup, D = _sup_deficit(grid, g)
    if dsup <= zero_tol:
        return ImmersionGrid(grid.u.copy(), grid.periodic), StageReport(
            dsup, dsup, dsup, c1, c1, c2, c2, 0.0, [], [], k_const,
            float(shortness_check(grid, g).min()))
    h = grid.spacing
    ell = np.sqrt(dsup) / c2
    period = 1.0
    ell = min(ell, 0.24 * period)
    if ell >= h:
        sm = np.array([mollify(comp, ell, h, period=period, periodic=grid.periodic) for comp in grid.u])
        grid_m = ImmersionGrid(sm, grid.periodic)
    else:
        grid_m = ImmersionGrid(grid.u.copy(), grid.periodic)
    dmoll, D = _sup_deficit(grid_m, g)
    # keep a share of g, scaled to the deficit, so the next iterate stays strictly short
    dec = primitive_decompose(D - margin * dmoll / float(np.abs(g).max()) * g)
    cur = grid_m
    lams, flags = [], []
    norm2 = map_norms(cur)[2]
    for a2, nu in zip(dec.amplitudes2, dec.directions):
        if float(np.max(a2)) <= max(zero_tol, 1e-8 * dmoll):
            continue
        lam, clamped = choose_frequency(norm2, dmoll, k_const, cur)
        if cur.periodic:
            lam = _periodic_frequency(lam, nu)
            if lam > resolvable_frequency(cur):
                lam -= 2 * np.pi * (np.sqrt(2) if abs(nu[0] * nu[1]) > 0 else 1)
        cur = corrugation_step(cur, np.sqrt(a2), nu, lam, check=False)
        norm2 = map_norms(cur)[2]
        lams.append(float(lam))
        flags.append(bool(clamped))
    after, _ = _sup_deficit(cur, g)
    _, c1a, c2a = map_norms(cur)
    return cur, StageReport(dsup, after, dmoll, c1, c1a, c2, c2a, float(ell), lams, flags,
                            k_const, float(shortness_check(cur, g).min()))


@dataclass
class RunReport:
    stages: list
    deficits: list
    c1: list
    c2: list
    alpha_hat: float
    alpha_theory: float = 1 / (1 + 2 * N_STAR)
    clamped: bool = False
    stopped_early: bool = False


def nash_kuiper_run(grid, g, stages=3, k_const=4.0, margin=0.1):
    """Run S stages; fit the deficit and C² growth and report a Hölder exponent.

    The exponent is the interpolation ratio log(1/ΔC¹-increments) over
    log(C²-growth): with ΔC¹ ~ K^{-j/2} and C² ~ K^{n_* j} this gives
    1/(1 + 2 n_*) in the idealized scaling; we report the fitted value.
    """
    if stages < 2:
        raise ValueError("need at least two stages")
    reports = []
    cur = grid
    c0, c1, c2 = map_norms(cur)
    defs, c1s, c2s = [_sup_deficit(cur, g)[0]], [c1], [c2]
    stopped = False
    for _ in range(stages):
        try:
            cur, rep = stage(cur, g, k_const, margin)
        except DecompositionError:
            stopped = True
            break
        reports.append(rep)
        defs.append(rep.deficit_after)
        c1s.append(rep.c1_after)
        c2s.append(rep.c2_after)
        if rep.deficit_after >= rep.deficit_before or rep.min_margin < 0:
            # a non-short iterate cannot be decomposed at the next stage
            stopped = True
            break
    incs = np.abs(np.diff(c1s))
    j = np.arange(1, len(c2s))
    alpha = float("nan")
    if len(j) >= 2 and np.all(incs > 0):
        s_inc = np.polyfit(j, np.log(incs), 1)[0]
        s_c2 = np.polyfit(np.arange(len(c2s)), np.log(c2s), 1)[0]
        if s_c2 > 0 and s_inc < 0:
            alpha = float(-s_inc / (s_c2 - s_inc))
    return cur, RunReport(reports, defs, c1s, c2s, alpha,
                          clamped=any(any(r.clamped) for r in reports), stopped_early=stopped)


# --- targets ------------------------------------------------------------

def flat_square(resolution, scale=0.9):
    x = np.linspace(0, 1, resolution)
    x1, x2 = np.meshgrid(x, x, indexing="ij")
    grid = ImmersionGrid(np.array([scale * x1, scale * x2, 0 * x1]), periodic=False)
    g = np.multiply.outer(np.eye(2), np.ones((resolution, resolution)))
    return grid, g


def flat_torus(resolution, big=0.6, small=0.1, lengths=(0.72, 0.11)):
    """Short revolution torus for the flat metric (2π)² diag(L₁², L₂²)."""
    x = np.arange(resolution) / resolution
    x1, x2 = np.meshgrid(x, x, indexing="ij")
    th1, th2 = 2 * np.pi * x1, 2 * np.pi * x2
    rad = big + small * np.cos(th2)
    u = np.array([rad * np.cos(th1), rad * np.sin(th1), small * np.sin(th2)])
    g = (2 * np.pi) ** 2 * np.multiply.outer(np.diag(np.asarray(lengths) ** 2), np.ones((resolution, resolution)))
    if big + small >= lengths[0] or small >= lengths[1]:
        raise ValueError("start torus is not short for the target")
    return ImmersionGrid(u, periodic=True), g


def export_obj(grid, path):
    """Write vertices (x-fastest) and quad faces of the sampled surface."""
    u = grid.u
    n1, n2 = u.shape[1:]
    idx = lambda i, j: j * n1 + i + 1
    lines = []
    for j in range(n2):
        for i in range(n1):
            lines.append("v %.17g %.17g %.17g" % tuple(u[:, i, j]))
    m1 = n1 if grid.periodic else n1 - 1
    m2 = n2 if grid.periodic else n2 - 1
    for j in range(m2):
        for i in range(m1):
            i2, j2 = (i + 1) % n1, (j + 1) % n2
            lines.append(f"f {idx(i, j)} {idx(i2, j)} {idx(i2, j2)} {idx(i, j2)}")
    text = "\n".join(lines) + "\n"
    from .io import atomic_write
    atomic_write(path, text)


# --- change of variables for the Gauss map ------------------------------

def _second_fundamental(grid):
    h, p = grid.spacing, grid.periodic
    J = jacobian(grid)
    n = unit_normal(J)
    H = np.array([[derivative(J[i], h, 1 + j, p) for j in range(2)] for i in range(2)])
    L = np.einsum("ijmxy,mxy->ijxy", H, n)
    G = np.einsum("imxy,jmxy->ijxy", J, J)
    return J, n, G, L


def gauss_curvature(grid):
    _, n, G, L = _second_fundamental(grid)
    detG = G[0, 0] * G[1, 1] - G[0, 1] ** 2
    return (L[0, 0] * L[1, 1] - L[0, 1] ** 2) / detG, np.sqrt(detG), n


def _tri_solid_angle(a, b, c):
    # signed solid angle of the spherical triangle (Van Oosterom-Strackee)
    num = np.einsum("i...,i...->...", a, np.cross(b, c, axis=0))
    den = (1 + np.einsum("i...,i...->...", a, b) + np.einsum("i...,i...->...", b, c)
           + np.einsum("i...,i...->...", c, a))
    return 2 * np.arctan2(num, den)


def gauss_degree_check(grid, mask, f, sphere_res=400):
    """Both sides of ∫_V f(N) κ dA = ∫_{S²} f(y) deg(y, V, N) dσ.

    The left side uses the discrete second fundamental form on the cells
    selected by `mask`.  The right side triangulates the Gauss image of V:
    each triangle of the parameter grid is mapped by N to a spherical
    triangle whose signed area is its contribution to the degree measure,
    and f is integrated over it by the centroid rule.
    """
    kappa, dA, n = gauss_curvature(grid)
    h2 = grid.spacing ** 2
    fn = f(n)
    # a cell belongs to V when at least half of its corners do
    m = mask.astype(float)
    cm = (m[:-1, :-1] + m[1:, :-1] + m[:-1, 1:] + m[1:, 1:]) >= 2
    lhs_cells = 0.25 * ((fn * kappa * dA)[:-1, :-1] + (fn * kappa * dA)[1:, :-1]
                        + (fn * kappa * dA)[:-1, 1:] + (fn * kappa * dA)[1:, 1:])
    lhs = float(np.sum(lhs_cells[cm]) * h2)
    a = n[:, :-1, :-1][:, cm]
    b = n[:, 1:, :-1][:, cm]
    c = n[:, 1:, 1:][:, cm]
    d = n[:, :-1, 1:][:, cm]
    rhs = 0.0
    for p, q, r in ((a, b, c), (a, c, d)):
        om = _tri_solid_angle(p, q, r)
        cen = p + q + r
        cen = cen / np.linalg.norm(cen, axis=0)
        rhs += float(np.sum(f(cen) * om))
    return lhs, rhs, lhs - rhs


def sphere_chart(resolution, radius=0.5, half=0.6):
    """Upper unit hemisphere as a graph over [-half, half]² with a polar-cap mask."""
    x = np.linspace(-half, half, resolution)
    X, Y = np.meshgrid(x, x, indexing="ij")
    u = np.array([X + half, Y + half, np.sqrt(1 - X * X - Y * Y)])
    return ImmersionGrid(u, periodic=False), X * X + Y * Y <= radius * radius


def paraboloid_chart(resolution, radius=0.5, half=0.6):
    """Graph of x₁² + x₂² over [-half, half]² with a disc mask."""
    x = np.linspace(-half, half, resolution)
    X, Y = np.meshgrid(x, x, indexing="ij")
    u = np.array([X + half, Y + half, X * X + Y * Y])
    return ImmersionGrid(u, periodic=False), X * X + Y * Y <= radius * radius


def flat_sheet(resolution):
    x = np.linspace(0, 1, resolution)
    x1, x2 = np.meshgrid(x, x, indexing="ij")
    return ImmersionGrid(np.array([x1, x2, np.zeros_like(x1)]), periodic=False)


def sheet_amplitude(grid, mean=0.5, wobble=0.3):
    """a = mean (1 + wobble sin 2πx₂ cos πx₁); wobble=0 gives the constant case."""
    x1, x2 = grid.coords()
    return mean * (1 + wobble * np.sin(2 * np.pi * x2) * np.cos(np.pi * x1))


def corrugation_slope(resolution=2049, lambdas=(25, 50, 100, 200), wobble=0.3):
    """Log-log slope of the metric-gain error against λ on a flat sheet, ν = e₁.

    With constant a the corrugation of a flat sheet is exact and only
    discretization error remains, so the amplitude carries a smooth
    variation that produces the genuine O(1/λ) error term.
    """
    grid = flat_sheet(resolution)
    a = sheet_amplitude(grid, wobble=wobble)
    errs = [corrugation_metric_error(grid, a, (1.0, 0.0), lam) for lam in lambdas]
    slope = float(np.polyfit(np.log(lambdas), np.log(errs), 1)[0])
    return slope, errs
