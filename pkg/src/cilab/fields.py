"""
Periodic grid fields and the shared numerical substrate.

Fields are plain numpy arrays.  Vector fields carry their components on the
leading axis, symmetric 2x2 tensors are stored as full (2, 2, ...) arrays.
Spectral operators zero the Nyquist wavenumber so that divergence,
gradient and the inverse Laplacian are exactly consistent on the grid.
"""

import json
import warnings
from dataclasses import dataclass, asdict

import numpy as np
from scipy.signal import fftconvolve


class GridError(ValueError):
    pass


class MollifierWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [0, period)^dims, optionally with time samples."""
    resolution: int
    dims: int = 2
    period: float = 1.0
    time_samples: int = 1
    time_step: float = 0.0

    def __post_init__(self):
        n = self.resolution
        if n < 8 or n & (n - 1):
            raise GridError(f"resolution must be a power of two >= 8, got {n}")
        if self.period <= 0:
            raise GridError("period must be positive")
        if self.dims < 1:
            raise GridError("dims must be positive")
        if self.time_samples < 1:
            raise GridError("time_samples must be >= 1")

    @property
    def spacing(self):
        return self.period / self.resolution

    def axis(self):
        return np.arange(self.resolution) * self.spacing

    def coords(self):
        """Meshgrid of coordinates with 'ij' indexing (x1 varies along axis 0)."""
        ax = self.axis()
        return np.meshgrid(*([ax] * self.dims), indexing="ij")

    def times(self):
        return np.arange(self.time_samples) * self.time_step

    def wavenumbers(self):
        """Angular wavenumbers per axis, Nyquist entry zeroed, 'ij' meshgrid."""
        k = 2 * np.pi * np.fft.fftfreq(self.resolution, d=self.spacing)
        k[self.resolution // 2] = 0.0
        return np.meshgrid(*([k] * self.dims), indexing="ij")


@dataclass
class NormReport:
    c0: float
    c1: float
    c2: float
    l1: float
    l2: float
    tv: float

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)


# --- spectral helpers ---------------------------------------------------

def _nyquist_mask(grid):
    m = np.ones((grid.resolution,) * grid.dims)
    for ax in range(grid.dims):
        idx = [slice(None)] * grid.dims
        idx[ax] = grid.resolution // 2
        m[tuple(idx)] = 0.0
    return m


def spectral_filter(f, grid):
    """Remove Nyquist modes (applied over the trailing `dims` axes)."""
    axes = tuple(range(-grid.dims, 0))
    return np.fft.ifftn(np.fft.fftn(f, axes=axes) * _nyquist_mask(grid), axes=axes).real


def spectral_derivative(f, grid, axis):
    """Spectral partial derivative along spatial `axis` of the trailing dims."""
    axes = tuple(range(-grid.dims, 0))
    k = grid.wavenumbers()[axis]
    return np.fft.ifftn(1j * k * np.fft.fftn(f, axes=axes), axes=axes).real


def spectral_divergence(w, grid):
    return sum(spectral_derivative(w[i], grid, i) for i in range(grid.dims))


def inverse_laplacian(f, grid):
    """Mean-zero solution of Δg = f (the mean of f is ignored)."""
    axes = tuple(range(-grid.dims, 0))
    ks = grid.wavenumbers()
    kk = sum(k * k for k in ks)
    safe = np.where(kk == 0, 1.0, kk)
    fh = np.fft.fftn(f, axes=axes) * _nyquist_mask(grid)
    gh = np.where(kk == 0, 0.0, -fh / safe)
    return np.fft.ifftn(gh, axes=axes).real


def solenoidal_project(w, grid):
    """Leray projection of a vector field w with shape (dims, N, ..., N).

    Extra leading axes between the component axis and the spatial axes are
    allowed (e.g. time samples).  The zero mode is left untouched; Nyquist
    modes are removed.
    """
    w = np.asarray(w, dtype=float)
    if w.shape[0] != grid.dims:
        raise GridError("first axis must hold the vector components")
    axes = tuple(range(-grid.dims, 0))
    ks = grid.wavenumbers()
    kk = sum(k * k for k in ks)
    safe = np.where(kk == 0, 1.0, kk)
    mask = _nyquist_mask(grid)
    wh = [np.fft.fftn(w[i], axes=axes) for i in range(grid.dims)]
    s = sum(ks[i] * wh[i] for i in range(grid.dims)) / safe
    zero = tuple([0] * grid.dims)
    out = []
    for i in range(grid.dims):
        ph = wh[i] - ks[i] * s
        keep = ph[(Ellipsis,) + zero].copy()
        ph = ph * mask
        ph[(Ellipsis,) + zero] = keep
        out.append(np.fft.ifftn(ph, axes=axes).real)
    return np.array(out)


# --- finite differences -------------------------------------------------

def _diff(f, h, axis, periodic):
    if periodic:
        return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / (2 * h)
    return np.gradient(f, h, axis=axis, edge_order=2)


def _diff2(f, h, axis, periodic):
    if periodic:
        return (np.roll(f, -1, axis=axis) - 2 * f + np.roll(f, 1, axis=axis)) / (h * h)
    return _diff(_diff(f, h, axis, False), h, axis, False)


def pullback_metric(u, spacing, periodic=False):
    """Pullback metric g_ij = ∂_i u · ∂_j u of a map u with shape (m, N1, N2).

    Returns an array of shape (2, 2, N1, N2).  Centered differences, one-sided
    second-order differences at the edges of a non-periodic grid.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 3 or u.shape[0] < 2:
        raise GridError("expected a map with shape (m, N1, N2), m >= 2")
    if min(u.shape[1:]) < 8:
        raise GridError("resolution must be at least 8")
    h = np.broadcast_to(np.asarray(spacing, dtype=float), (2,))
    d1 = _diff(u, h[0], 1, periodic)
    d2 = _diff(u, h[1], 2, periodic)
    g11 = np.sum(d1 * d1, axis=0)
    g12 = np.sum(d1 * d2, axis=0)
    g22 = np.sum(d2 * d2, axis=0)
    return np.array([[g11, g12], [g12, g22]])


# --- mollification ------------------------------------------------------

def quartic_bump(r):
    """Radial profile (1 - r^2)^2 on r < 1 (r measured in units of the scale)."""
    return np.where(r < 1, (1 - r * r) ** 2, 0.0)


def mollifier_weights(ell, spacing, dims, kernel=None):
    """Discrete unit-mass weights of the kernel at scale ell.

    `kernel` maps an array of offsets with shape (dims, ...) in units of ell
    to weights; the default is the radial quartic bump.
    """
    half = int(np.floor(ell / spacing))
    offs = np.arange(-half, half + 1) * spacing / ell
    mesh = np.array(np.meshgrid(*([offs] * dims), indexing="ij"))
    if kernel is None:
        w = quartic_bump(np.sqrt(np.sum(mesh ** 2, axis=0)))
    else:
        w = np.asarray(kernel(mesh), dtype=float)
    if np.any(w < 0):
        raise ValueError("kernel must be nonnegative")
    flipped = w[tuple([slice(None, None, -1)] * dims)]
    if not np.allclose(w, flipped, rtol=1e-12, atol=1e-14 * np.abs(w).max()):
        raise ValueError("kernel must be even")
    total = w.sum()
    if total <= 0:
        raise ValueError("kernel has zero mass at this scale")
    return w / total


def mollify(f, ell, spacing, period=None, kernel=None, periodic=True):
    """Convolve f with a unit-mass symmetric kernel supported in |x| < ell.

    Periodic fields wrap; otherwise the field is extended by odd reflection
    about the edge samples, which reproduces affine data exactly.  A
    scale below one grid cell returns f unchanged with a MollifierWarning.
    """
    f = np.asarray(f, dtype=float)
    if period is None:
        period = spacing * min(f.shape)
    if ell <= 0 or ell >= period / 4:
        raise ValueError(f"mollification scale {ell} outside (0, period/4)")
    if ell < spacing:
        warnings.warn("mollification scale below one grid cell; identity returned",
                      MollifierWarning)
        return f.copy()
    w = mollifier_weights(ell, spacing, f.ndim, kernel)
    half = w.shape[0] // 2
    if periodic:
        padded = np.pad(f, half, mode="wrap")
    else:
        padded = np.pad(f, half, mode="reflect", reflect_type="odd")
    return fftconvolve(padded, w, mode="valid")


# --- norms --------------------------------------------------------------

def discrete_norms(f, spacing, periodic=True):
    """C^0, C^1, C^2 (cumulative sup norms), L^1, L^2 and total variation.

    For 1-D data the TV is the sum of absolute jumps, including the wrap jump
    when periodic.  For n-D data it is the anisotropic sum over axes of
    |forward differences| weighted by the transverse cell measure.
    """
    f = np.asarray(f, dtype=float)
    h = spacing
    c0 = float(np.abs(f).max())
    g1 = max(float(np.abs(_diff(f, h, ax, periodic)).max()) for ax in range(f.ndim))
    g2 = max(float(np.abs(_diff2(f, h, ax, periodic)).max()) for ax in range(f.ndim))
    cell = h ** f.ndim
    if periodic:
        l1 = float(np.abs(f).sum() * cell)
        l2 = float(np.sqrt((f * f).sum() * cell))
    else:
        a = np.abs(f)
        for ax in range(f.ndim):
            a = np.trapezoid(a, dx=h, axis=0)
        b = f * f
        for ax in range(f.ndim):
            b = np.trapezoid(b, dx=h, axis=0)
        l1, l2 = float(a), float(np.sqrt(b))
    tv = 0.0
    for ax in range(f.ndim):
        if periodic:
            jumps = np.roll(f, -1, axis=ax) - f
        else:
            jumps = np.diff(f, axis=ax)
        tv += float(np.abs(jumps).sum()) * h ** (f.ndim - 1)
    return NormReport(c0=c0, c1=c0 + g1, c2=c0 + g1 + g2, l1=l1, l2=l2, tv=tv)


# --- commutator estimate ------------------------------------------------

def _cusp_phase(alpha, x, rng):
    # Hoelder-alpha at one random point, smooth elsewhere, even about the cusp
    x0 = rng.uniform(0, 1)
    amp = rng.uniform(0.5, 1.0)
    return amp * np.abs(np.sin(np.pi * (x - x0))) ** alpha


def commutator_errors(alpha, ells, seed=0, resolution=2 ** 16):
    """C^1 size of (v * ρ_ℓ)♯e - (v♯e) * ρ_ℓ for a C^{1,α} test surface.

    The test map is v(x) = (∫cos φ, ∫sin φ, x_2) whose phase φ(x_1) is
    exactly Hölder-α at a single cusp, so v♯e ≡ I while ∂_1 v is only C^α.
    Everything reduces to the 1-D quantity |(e^{iφ}) * ρ_ℓ|^2 - 1 and its
    derivative.
    """
    rng = np.random.default_rng(seed)
    h = 1.0 / resolution
    x = np.arange(resolution) * h
    z = np.exp(1j * _cusp_phase(alpha, x, rng))
    zh = np.fft.fft(z)
    k = 2 * np.pi * np.fft.fftfreq(resolution, d=h)
    errs = []
    for ell in ells:
        w = mollifier_weights(ell, h, 1)
        pad = np.zeros(resolution)
        half = w.size // 2
        pad[:half + 1] = w[half:]
        pad[-half:] = w[:half]
        zl = np.fft.ifft(zh * np.fft.fft(pad))
        dzl = np.fft.ifft(1j * k * zh * np.fft.fft(pad))
        g = np.abs(zl) ** 2 - 1.0
        dg = 2 * np.real(np.conj(zl) * dzl)
        errs.append(float(np.abs(g).max() + np.abs(dg).max()))
    return np.array(errs)


def commutator_exponent(alpha, ells, seed=0, resolution=2 ** 16):
    """Least-squares slope of log C^1 commutator error against log ℓ."""
    ells = np.asarray(ells, dtype=float)
    if ells.size < 4:
        raise ValueError("need at least 4 scales")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    errs = commutator_errors(alpha, ells, seed, resolution)
    return float(np.polyfit(np.log(ells), np.log(errs), 1)[0])


# --- serialization ------------------------------------------------------

def field_csv(names, arrays):
    """CSV text with one column per component, x-fastest sample order."""
    from .io import csv_text

    arrays = [np.asarray(a, dtype=float) for a in arrays]
    if len(names) != len(arrays) or len({a.shape for a in arrays}) != 1:
        raise GridError("one name per component and matching shapes required")
    cols = [a.ravel(order="F") for a in arrays]
    return csv_text(list(names), zip(*cols))


def read_field_csv(text, shape):
    """Inverse of field_csv: returns (names, list of arrays with `shape`)."""
    lines = text.strip().splitlines()
    names = lines[0].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    return names, [data[:, i].reshape(shape, order="F") for i in range(len(names))]
