"""
Constant-coefficient linear systems Σ A_i ∂_i z = 0, plane waves, the wave
cone, and 0-homogeneous Fourier multipliers for active scalars.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np


class ConfigError(ValueError):
    pass


class InvalidWaveError(ValueError):
    pass


class SymbolError(ValueError):
    pass


@dataclass
class LinearSystem:
    A: list

    def __post_init__(self):
        self.A = [np.asarray(a, dtype=float) for a in self.A]
        if len(self.A) < 2:
            raise ConfigError("need at least two independent variables")
        shape = self.A[0].shape
        if any(a.shape != shape or a.ndim != 2 for a in self.A):
            raise ConfigError("all A_i must share one m x N shape")

    @property
    def d(self):
        return len(self.A)

    @property
    def m(self):
        return self.A[0].shape[0]

    @property
    def N(self):
        return self.A[0].shape[1]

    def symbol(self, xi):
        return sum(x * a for x, a in zip(xi, self.A))

    def apply(self, xi, a):
        return self.symbol(xi) @ np.asarray(a, dtype=float)


@dataclass
class WaveWitness:
    xi: np.ndarray
    residual: float


# --- the Euler system ---------------------------------------------------

def traceless_basis(n):
    """Basis of traceless symmetric n x n matrices: n-1 diagonal, then off-diagonal."""
    basis = []
    for i in range(n - 1):
        b = np.zeros((n, n))
        b[i, i] = 1.0
        b[n - 1, n - 1] = -1.0
        basis.append(b)
    for i, j in combinations(range(n), 2):
        b = np.zeros((n, n))
        b[i, j] = b[j, i] = 1.0
        basis.append(b)
    return basis


def euler_pack(v, u, q):
    """State vector (v, independent entries of traceless u, q)."""
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    n = v.size
    coords = [u[i, i] for i in range(n - 1)] + [u[i, j] for i, j in combinations(range(n), 2)]
    return np.concatenate([v, coords, [q]])


def euler_unpack(z, n=2):
    z = np.asarray(z, dtype=float)
    v = z[:n]
    basis = traceless_basis(n)
    u = sum(c * b for c, b in zip(z[n:n + len(basis)], basis))
    return v, u, z[-1]


def euler_linear_system(n=2):
    """∂_t v + div u + ∇q = 0, div v = 0 over the variables (x_1..x_n, t)."""
    if n < 2:
        raise ConfigError("n must be at least 2")
    basis = traceless_basis(n)
    N = n + len(basis) + 1
    m = n + 1
    A = []
    for k in range(n):
        a = np.zeros((m, N))
        for c, b in enumerate(basis):
            a[:n, n + c] = b[:, k]
        a[k, N - 1] = 1.0
        a[n, k] = 1.0
        A.append(a)
    at = np.zeros((m, N))
    at[:n, :n] = np.eye(n)
    A.append(at)
    return LinearSystem(A)


def curl_free_system(rows=2):
    """Compatibility system of gradients of maps R^2 -> R^rows (states: rows x 2 matrices)."""
    N = 2 * rows
    a1 = np.zeros((rows, N))
    a2 = np.zeros((rows, N))
    for i in range(rows):
        a1[i, 2 * i + 1] = 1.0
        a2[i, 2 * i] = -1.0
    return LinearSystem([a1, a2])


def euler_cone_direction(V, U):
    """Space-time direction (ξ_x, ξ_t) for an Euler wave with V ≠ 0 in 2-D.

    ξ_x ⊥ V, and ξ_t, Q are fixed by the momentum equation
    ξ_t V + (U + Q I) ξ_x = 0.  Returns (unit ξ_x, ξ_t, Q).
    """
    V = np.asarray(V, dtype=float)
    nv = np.linalg.norm(V)
    if nv == 0:
        raise InvalidWaveError("V must be nonzero")
    xi = np.array([-V[1], V[0]]) / nv
    Q = -xi @ U @ xi
    xt = -(V @ U @ xi) / (nv * nv)
    return xi, xt, Q


# --- wave cone ----------------------------------------------------------

def _normalize_sign(xi):
    nz = np.flatnonzero(np.abs(xi) > 1e-14)
    if nz.size and xi[nz[0]] < 0:
        xi = -xi
    return xi


def wave_cone_contains(sys, a, tol=1e-10):
    """Witness ξ with |Σ ξ_i A_i a| ≤ tol |a| max‖A_i‖, or None.

    Coordinate axes and coordinate 2-planes are tried first (exact kernels,
    which give clean witnesses); the global minimizer of |M(a) ξ| over the
    unit sphere, M(a) = [A_1 a | ... | A_d a], is the smallest right singular
    vector of M(a) and settles the remaining cases.
    """
    if tol <= 0:
        raise ConfigError("tol must be positive")
    a = np.asarray(a, dtype=float)
    na = np.linalg.norm(a)
    if na == 0:
        raise ConfigError("a must be nonzero")
    scale = max(np.linalg.norm(A, 2) for A in sys.A)
    M = np.column_stack([A @ a for A in sys.A])
    if scale == 0:
        xi = np.zeros(sys.d)
        xi[0] = 1.0
        return WaveWitness(xi, 0.0)
    bound = tol * na * scale

    def check(xi):
        r = np.linalg.norm(M @ xi)
        return r <= bound, r

    for i in range(sys.d):
        xi = np.zeros(sys.d)
        xi[i] = 1.0
        ok, r = check(xi)
        if ok:
            return WaveWitness(xi, r / (na * scale))
    for i, j in combinations(range(sys.d), 2):
        sub = M[:, [i, j]]
        _, s, vt = np.linalg.svd(sub)
        xi = np.zeros(sys.d)
        xi[[i, j]] = vt[-1]
        ok, r = check(xi)
        if ok:
            return WaveWitness(_normalize_sign(xi), r / (na * scale))
    _, s, vt = np.linalg.svd(M)
    xi = _normalize_sign(vt[-1])
    ok, r = check(xi)
    if ok:
        return WaveWitness(xi, r / (na * scale))
    return None


# --- plane waves --------------------------------------------------------

def plane_wave(sys, a, xi, h, shape, tol=1e-10, check=True):
    """Sample z(y) = a h(y·ξ) on the unit box [0,1)^d with `shape` samples per axis.

    Returns an array of shape (N,) + shape.  ξ need not be unit; pass an
    integer vector to get a periodic field.  check=False skips the cone test.
    """
    a = np.asarray(a, dtype=float)
    xi = np.asarray(xi, dtype=float)
    r = np.linalg.norm(sys.apply(xi, a))
    scale = max(np.linalg.norm(A, 2) for A in sys.A)
    if check and r > tol * np.linalg.norm(a) * np.linalg.norm(xi) * max(scale, 1e-300):
        raise InvalidWaveError("direction is not a wave-cone witness for this state")
    axes = [np.arange(n) / n for n in shape]
    ys = np.meshgrid(*axes, indexing="ij")
    s = sum(x * y for x, y in zip(xi, ys))
    prof = h(s)
    return a.reshape((-1,) + (1,) * len(shape)) * prof


def discrete_residual(sys, z, periodic=True):
    """max |Σ A_i D_i z| with centered differences on the unit box."""
    z = np.asarray(z, dtype=float)
    res = 0.0
    for i, A in enumerate(sys.A):
        n = z.shape[1 + i]
        hx = 1.0 / n
        if periodic:
            dz = (np.roll(z, -1, axis=1 + i) - np.roll(z, 1, axis=1 + i)) / (2 * hx)
        else:
            dz = np.gradient(z, hx, axis=1 + i, edge_order=2)
        res = res + np.tensordot(A, dz, axes=(1, 0))
    return float(np.abs(res).max())


# --- multipliers --------------------------------------------------------

@dataclass
class Multiplier:
    name: str
    symbol: object      # callable (k1, k2) -> (m1, m2), complex arrays
    parity: str = "unknown"

    def __call__(self, k1, k2):
        m1, m2 = self.symbol(np.asarray(k1, dtype=float), np.asarray(k2, dtype=float))
        return (np.broadcast_to(np.asarray(m1, dtype=complex), np.shape(k1)),
                np.broadcast_to(np.asarray(m2, dtype=complex), np.shape(k1)))


def _sqg(k1, k2):
    r = np.hypot(k1, k2)
    return 1j * (-k2) / r, 1j * k1 / r


def _ipm(k1, k2):
    r2 = k1 * k1 + k2 * k2
    return k1 * k2 / r2 + 0j, -k1 * k1 / r2 + 0j


SQG = Multiplier("sqg", _sqg, "odd")
IPM = Multiplier("ipm", _ipm, "even")
MULTIPLIERS = {"sqg": SQG, "ipm": IPM}


def load_multiplier(path_or_text):
    """Read a symbol file with lines `name: ..`, `m1: ..`, `m2: ..`.

    Expressions are rational functions of xi1, xi2 and absxi (|ξ|) with I
    the imaginary unit.
    """
    import sympy

    text = path_or_text
    if "\n" not in text and ":" not in text:
        with open(text) as fh:
            text = fh.read()
    entries = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, val = line.partition(":")
        entries[key.strip()] = val.strip()
    if "m1" not in entries or "m2" not in entries:
        raise SymbolError("symbol file needs m1 and m2 lines")
    xi1, xi2, absxi = sympy.symbols("xi1 xi2 absxi", real=True)
    ns = {"xi1": xi1, "xi2": xi2, "absxi": absxi, "I": sympy.I}
    exprs = [sympy.sympify(entries[k], locals=ns) for k in ("m1", "m2")]
    exprs = [e.subs(absxi, sympy.sqrt(xi1 ** 2 + xi2 ** 2)) for e in exprs]
    fns = [sympy.lambdify((xi1, xi2), e, "numpy") for e in exprs]

    def symbol(k1, k2):
        return tuple(np.asarray(f(k1, k2), dtype=complex) + 0 * k1 for f in fns)

    mult = Multiplier(entries.get("name", "custom"), symbol)
    mult.parity = multiplier_check(mult)["parity"]
    return mult


def probe_modes(radius=16, dyadic=3):
    r = np.arange(-radius, radius + 1)
    k1, k2 = np.meshgrid(r, r, indexing="ij")
    keep = (k1 != 0) | (k2 != 0)
    base = np.stack([k1[keep], k2[keep]]).astype(float)
    return np.concatenate([base * 2 ** j for j in range(dyadic + 1)], axis=1)


def multiplier_check(mult, radius=16, tol=1e-12):
    """Homogeneity, incompressibility and parity of a symbol on test modes."""
    ks = probe_modes(radius, dyadic=0)
    m1, m2 = mult(ks[0], ks[1])
    scale = max(1.0, float(np.max(np.abs(np.concatenate([m1, m2])))))
    homog = True
    for j in (1, 2, 3):
        n1, n2 = mult(ks[0] * 2 ** j, ks[1] * 2 ** j)
        homog &= bool(np.max(np.abs(n1 - m1)) <= tol * scale and np.max(np.abs(n2 - m2)) <= tol * scale)
    incomp = bool(np.max(np.abs(ks[0] * m1 + ks[1] * m2) / np.hypot(ks[0], ks[1])) <= tol * scale)
    r1, r2 = mult(-ks[0], -ks[1])
    if np.max(np.abs(r1 - m1)) <= tol * scale and np.max(np.abs(r2 - m2)) <= tol * scale:
        parity = "even"
    elif np.max(np.abs(r1 + m1)) <= tol * scale and np.max(np.abs(r2 + m2)) <= tol * scale:
        parity = "odd"
    else:
        parity = "none"
    return {"homogeneous": homog, "incompressible": incomp, "parity": parity}


def multiplier_apply(mult, theta, period=1.0, tol=1e-12):
    """v = T[θ] with v̂(ξ) = m(ξ) θ̂(ξ); zero and Nyquist modes are dropped."""
    theta = np.asarray(theta, dtype=float)
    n = theta.shape[-1]
    k = np.fft.fftfreq(n, d=1.0 / n)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    keep = (k1 != 0) | (k2 != 0)
    keep &= (np.abs(k1) != n // 2) & (np.abs(k2) != n // 2)
    safe1 = np.where(keep, k1, 1.0)
    safe2 = np.where(keep, k2, 0.0)
    m1, m2 = mult(safe1, safe2)
    c1, c2 = mult(-safe1, -safe2)
    if (np.max(np.abs(np.where(keep, c1 - np.conj(m1), 0))) > tol
            or np.max(np.abs(np.where(keep, c2 - np.conj(m2), 0))) > tol):
        raise SymbolError("symbol violates m(-ξ) = conj(m(ξ)); output would not be real")
    th = np.fft.fft2(theta, axes=(-2, -1))
    v1 = np.fft.ifft2(np.where(keep, m1, 0) * th, axes=(-2, -1)).real
    v2 = np.fft.ifft2(np.where(keep, m2, 0) * th, axes=(-2, -1)).real
    return np.array([v1, v2])


def _bump(s):
    out = np.zeros_like(s)
    inside = (s > 0) & (s < 1)
    x = s[inside]
    out[inside] = np.exp(-1.0 / (x * (1 - x)))
    return out


def _bump_dt(s):
    out = np.zeros_like(s)
    inside = (s > 0) & (s < 1)
    x = s[inside]
    out[inside] = np.exp(-1.0 / (x * (1 - x))) * (1 - 2 * x) / (x * (1 - x)) ** 2
    return out


def time_bump(t, T):
    """Smooth bump supported in (0, T) and its time derivative."""
    s = np.asarray(t, dtype=float) / T
    return _bump(s), _bump_dt(s) / T


def transport_residual(theta, mult, T, modes=((1, 0), (0, 1), (1, 1), (2, -1))):
    """Max weak residual ∫∫ θ ∂_t ψ + θ v·∇ψ over test functions ψ = sin/cos(2πk·x) b(t).

    θ has shape (Nt, N, N) sampled at t_j = j T/(Nt-1) on the unit torus.
    """
    theta = np.asarray(theta, dtype=float)
    nt, n = theta.shape[0], theta.shape[-1]
    t = np.linspace(0, T, nt)
    b, bt = time_bump(t, T)
    x = np.arange(n) / n
    x1, x2 = np.meshgrid(x, x, indexing="ij")
    v = multiplier_apply(mult, theta)
    wt = np.full(nt, T / (nt - 1))
    wt[[0, -1]] *= 0.5
    worst = 0.0
    for k in modes:
        arg = 2 * np.pi * (k[0] * x1 + k[1] * x2)
        for s, ds in ((np.sin(arg), np.cos(arg)), (np.cos(arg), -np.sin(arg))):
            g1 = 2 * np.pi * k[0] * ds
            g2 = 2 * np.pi * k[1] * ds
            per_t = (bt * (theta * s).mean(axis=(1, 2))
                     + b * (theta * (v[0] * g1 + v[1] * g2)).mean(axis=(1, 2)))
            worst = max(worst, abs(float(np.sum(wt * per_t))))
    return worst
