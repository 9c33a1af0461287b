"""
Constructive convex integration for the 2-D Euler relaxation on the torus.

Starting from a strict subsolution (v, u, q) with energy density ē, each
step adds modulated plane waves (V, U, Q) h(λ ξ·x + ω t) and a spectral
corrector that restores the linear system exactly.  The state is tracked
as a family of classes: piecewise-constant "nominal" values (v_c, u_c)
carried by smooth partition-of-unity weights w_c.  A wave chosen for a
class splits it into two children with weights w_c (1 ± h)/2, so that
v = Σ w_c v_c holds at every step.

The time derivative ∂_t v is carried analytically alongside v, so the
linear residual can be evaluated to round-off on a coarse time sampling.
"""

from dataclasses import dataclass, field

import numpy as np

from .euler_subsol import SubsolutionTriple, constraint_margin, generalized_energy
from .fields import Grid
from .tartar import euler_cone_direction, euler_linear_system, euler_pack, wave_cone_contains


class NothingToCorrect(ValueError):
    pass


class DegenerateDeficitError(ValueError):
    pass


class FrequencyExhaustionError(RuntimeError):
    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or []


@dataclass
class WaveClass:
    v: np.ndarray          # nominal velocity (2,)
    u: np.ndarray          # nominal traceless stress (2, 2)
    w: np.ndarray          # weight (Nt, N, N)
    wt: np.ndarray         # ∂_t w


@dataclass
class CIState:
    triple: SubsolutionTriple
    step: int = 0
    lambda_schedule: list = field(default_factory=list)
    deficit_trace_history: list = field(default_factory=list)
    vt: np.ndarray = None
    classes: list = field(default_factory=list)
    linres: float = 0.0
    divres: float = 0.0


@dataclass
class StepWave:
    """Raw (uncorrected) wave of one step together with the children classes."""
    V: np.ndarray
    Vt: np.ndarray
    U: np.ndarray          # (2, 2, Nt, N, N)
    Q: np.ndarray
    children: list
    lam: float             # largest realized angular frequency 2π|m|


# --- deficit and wave selection -----------------------------------------

def deficit(triple):
    """D = ē I - (v⊗v - u) and δ = mean tr D."""
    v, u, e = triple.v, triple.u, triple.ebar
    D = np.empty_like(u)
    D[0, 0] = e - (v[0] * v[0] - u[0, 0])
    D[1, 1] = e - (v[1] * v[1] - u[1, 1])
    D[0, 1] = D[1, 0] = -(v[0] * v[1] - u[0, 1])
    return D, float(np.mean(D[0, 0] + D[1, 1]))


def _unit_sign(w):
    # first nonzero component positive
    k = np.flatnonzero(np.abs(w) > 1e-12)[0]
    return w if w[k] > 0 else -w


def _top_direction(D):
    vals, vecs = np.linalg.eigh(D)
    if vals[-1] - vals[0] <= 1e-12 * max(1.0, abs(vals[-1])):
        return np.array([1.0, 0.0])  # tie: lexicographically first axis
    return _unit_sign(vecs[:, -1])


def _rank_one_room(D, w, tol=1e-12):
    """Largest s with D - s w⊗w ≥ 0, i.e. 1/(wᵀD⁺w) when w lies in the range of D."""
    vals, vecs = np.linalg.eigh(D)
    c = vecs.T @ w
    small = vals <= tol * max(1.0, abs(vals[-1]))
    if np.any(np.abs(c[small]) > 1e-9):
        return 0.0
    return 1.0 / float(np.sum(c[~small] ** 2 / vals[~small]))


def _wave_for(v, u, D, w, theta):
    """Amplitudes (V, U, Q, ξ_t) along w keeping v±V, u±U in the constraint set."""
    p = abs(v @ w)
    tr = np.trace(D)
    b = -p + np.sqrt(p * p + tr)
    b2 = theta * min(_rank_one_room(D, w), b * b)
    V = np.sqrt(b2) * w
    B = D - np.outer(V, V)
    # the part of U that cancels the cross term v⊗V + V⊗v, minus a multiple
    # of the residual deficit that keeps both children on the same side
    trB = np.trace(B)
    L = (2 * (v @ V) / trB) * B if trB > 1e-14 else np.zeros((2, 2))
    U = np.outer(v, V) + np.outer(V, v) - L
    U = U - 0.5 * np.trace(U) * np.eye(2)
    xi, xt, Q = euler_cone_direction(V, U)
    return V, U, Q, xi, xt, b2


def select_wave(D, v=None, u=None, theta=1.0, angles=360):
    """Wave state a = (V, U, Q) and space-time witness ξ for a deficit sample.

    With v = 0 the direction is the top eigenvector of D (ties broken by the
    lexicographically first axis) and the wave is a steady shear wave.  For
    v ≠ 0 the direction maximizing the admissible |V|² is found by scanning.
    """
    D = np.asarray(D, dtype=float)
    if np.max(np.abs(D)) <= 1e-14:
        raise NothingToCorrect("nothing to correct: deficit vanishes")
    if np.linalg.eigvalsh(D)[0] < -1e-12:
        raise DegenerateDeficitError("deficit must be positive semidefinite")
    v = np.zeros(2) if v is None else np.asarray(v, dtype=float)
    u = np.zeros((2, 2)) if u is None else np.asarray(u, dtype=float)
    if np.allclose(v, 0):
        w = _top_direction(D)
    else:
        best = (-1.0, None)
        for ang in np.linspace(0, np.pi, angles, endpoint=False):
            cand = np.array([np.cos(ang), np.sin(ang)])
            b2 = _wave_for(v, u, D, cand, 1.0)[-1]
            if b2 > best[0] + 1e-12:
                best = (b2, cand)
        w = best[1]
    V, U, Q, xi, xt, _ = _wave_for(v, u, D, w, theta)
    a = euler_pack(V, U, Q)
    wit = wave_cone_contains(euler_linear_system(2), a)
    if wit is None:
        raise DegenerateDeficitError("no wave-cone witness for the selected state")
    return a, wit.xi


# --- profiles and fields ------------------------------------------------

def profile(phase, beta):
    """h = tanh(β sin φ)/tanh β and dh/dφ; odd, zero mean, |h| ≤ 1."""
    s = np.sin(phase)
    tb = np.tanh(beta)
    return np.tanh(beta * s) / tb, beta * np.cos(phase) / np.cosh(beta * s) ** 2 / tb


def trivial_state(resolution=256, time_samples=3, T=0.25, energy=0.5):
    grid = Grid(resolution, time_samples=time_samples,
                time_step=T / max(time_samples - 1, 1))
    Nt, N = time_samples, resolution
    z = np.zeros((Nt, N, N))
    triple = SubsolutionTriple(np.zeros((2, Nt, N, N)), np.zeros((2, 2, Nt, N, N)),
                               z.copy(), np.full((Nt, N, N), energy), grid)
    one = np.ones((Nt, N, N))
    st = CIState(triple, vt=np.zeros((2, Nt, N, N)),
                 classes=[WaveClass(np.zeros(2), np.zeros((2, 2)), one, 0 * one)])
    st.deficit_trace_history.append(deficit(triple)[1])
    return st


def _class_deficit(c, energy):
    return energy * np.eye(2) - (np.outer(c.v, c.v) - c.u)


def build_wave(state, lam, theta=0.9, beta=2.0, harmonic=1):
    """Raw step wave at angular frequency λ (lattice-rounded per class).

    `harmonic` multiplies the rounded lattice vectors, so harmonic=2 is the
    same wave at exactly twice the frequency.
    """
    grid = state.triple.grid
    X1, X2 = grid.coords()
    ts = grid.times()
    Nt, N = len(ts), grid.resolution
    energy = float(state.triple.ebar.flat[0])
    nk = lam / (2 * np.pi)
    V = np.zeros((2, Nt, N, N))
    Vt = np.zeros_like(V)
    U = np.zeros((2, 2, Nt, N, N))
    Q = np.zeros((Nt, N, N))
    children, lam_real = [], 0.0
    for c in state.classes:
        D = _class_deficit(c, energy)
        a, _ = select_wave(D, c.v, c.u, theta=1.0)
        Vc = a[:2]
        xi = np.array([-Vc[1], Vc[0]]) / np.linalg.norm(Vc)
        m = np.round(nk * xi).astype(int)
        if m[0] < 0 or (m[0] == 0 and m[1] < 0):
            m = -m
        xi = m / np.linalg.norm(m)
        m = harmonic * m
        w = np.array([-xi[1], xi[0]])
        Vc, Uc, Qc, _, _, _ = _wave_for(c.v, c.u, D, w, theta)
        # time frequency from the lattice direction itself (ξ_t is odd in ξ)
        xt = -(Vc @ Uc @ xi) / (Vc @ Vc)
        om = 2 * np.pi * np.linalg.norm(m) * xt
        lam_real = max(lam_real, 2 * np.pi * float(np.linalg.norm(m)))
        W = {1: np.empty_like(c.w), -1: np.empty_like(c.w)}
        Wt = {1: np.empty_like(c.w), -1: np.empty_like(c.w)}
        for j, t in enumerate(ts):
            h, hp = profile(2 * np.pi * (m[0] * X1 + m[1] * X2) + om * t, beta)
            s = c.w[j] * h
            st = c.wt[j] * h + c.w[j] * hp * om
            V[:, j] += Vc[:, None, None] * s
            Vt[:, j] += Vc[:, None, None] * st
            U[:, :, j] += Uc[:, :, None, None] * s
            Q[j] += Qc * s
            for sg in (1, -1):
                W[sg][j] = c.w[j] * (1 + sg * h) / 2
                Wt[sg][j] = c.wt[j] * (1 + sg * h) / 2 + sg * c.w[j] * hp * om / 2
        for sg in (1, -1):
            children.append(WaveClass(c.v + sg * Vc, c.u + sg * Uc, W[sg], Wt[sg]))
    return StepWave(V, Vt, U, Q, children, lam_real)


def _spectral(grid):
    ks = grid.wavenumbers()
    K1, K2 = ks
    KK = K1 ** 2 + K2 ** 2
    safe = np.where(KK == 0, 1.0, KK)
    N = grid.resolution
    ny = np.ones((N, N))
    ny[N // 2, :] = 0
    ny[:, N // 2] = 0
    return K1, K2, safe, ny


def _fft(f):
    return np.fft.fft2(f, axes=(-2, -1))


def _ifft(f):
    return np.fft.ifft2(f, axes=(-2, -1)).real


def correct(state, wave):
    """Leray-project V and V_t, then absorb the leftover linear residual.

    With filtered U, Q the residual R = P V_t + div U + ∇Q splits into a
    gradient part (absorbed into Q) and a solenoidal part R_s, cancelled by
    U' = ∇W + ∇Wᵀ - (div W) I with -ΔW = R_s (div U' = ΔW for div-free W).
    """
    grid = state.triple.grid
    K1, K2, KK, ny = _spectral(grid)

    def proj(A):
        h1, h2 = _fft(A[0]), _fft(A[1])
        s = (K1 * h1 + K2 * h2) / KK
        h1 = (h1 - K1 * s) * ny
        h2 = (h2 - K2 * s) * ny
        h1[..., 0, 0] = 0
        h2[..., 0, 0] = 0
        return np.array([_ifft(h1), _ifft(h2)])

    Vp = proj(wave.V)
    Vtp = proj(wave.Vt)
    u11 = _ifft(_fft(wave.U[0, 0]) * ny)
    u12 = _ifft(_fft(wave.U[0, 1]) * ny)
    q = _ifft(_fft(wave.Q) * ny)
    h11, h12, hq = _fft(u11), _fft(u12), _fft(q)
    r1 = _fft(Vtp[0]) + 1j * (K1 * h11 + K2 * h12 + K1 * hq)
    r2 = _fft(Vtp[1]) + 1j * (K1 * h12 - K2 * h11 + K2 * hq)
    s = (K1 * r1 + K2 * r2) / KK
    W1 = (r1 - K1 * s) / KK
    W2 = (r2 - K2 * s) / KK
    W1[..., 0, 0] = 0
    W2[..., 0, 0] = 0
    c11 = _ifft(1j * K1 * W1) - _ifft(1j * K2 * W2)
    c12 = _ifft(1j * K2 * W1) + _ifft(1j * K1 * W2)
    qc = _ifft(1j * s)
    U = np.zeros_like(wave.U)
    U[0, 0] = u11 + c11
    U[1, 1] = -U[0, 0]
    U[0, 1] = U[1, 0] = u12 + c12
    return Vp, Vtp, U, q + qc


def _spectral_d(f, grid, axis):
    K = grid.wavenumbers()[axis]
    return _ifft(1j * K * _fft(f))


def residuals(triple, vt):
    """max |∂_t v + div u + ∇q| (analytic ∂_t v) and max |div v|, spectrally."""
    g = triple.grid
    v, u, q = triple.v, triple.u, triple.q
    r1 = vt[0] + _spectral_d(u[0, 0], g, 0) + _spectral_d(u[0, 1], g, 1) + _spectral_d(q, g, 0)
    r2 = vt[1] + _spectral_d(u[1, 0], g, 0) + _spectral_d(u[1, 1], g, 1) + _spectral_d(q, g, 1)
    dv = _spectral_d(v[0], g, 0) + _spectral_d(v[1], g, 1)
    return float(max(np.abs(r1).max(), np.abs(r2).max())), float(np.abs(dv).max())


def resolvable_lambda(grid):
    """Largest angular frequency with at least four samples per period."""
    return 2 * np.pi * grid.resolution / 4


def ci_step(state, lam, growth=2.0, retries=3, rho=0.75, theta=0.9, beta=2.0,
            lin_tol=1e-9, margin_tol=1e-12):
    """One step at frequency λ; doubles λ on a failed margin or contraction gate."""
    D, delta = deficit(state.triple)
    if delta <= 1e-14:
        raise NothingToCorrect("nothing to correct: deficit vanishes")
    grid = state.triple.grid
    diag = []
    cur = float(lam)
    for attempt in range(retries + 1):
        if cur > resolvable_lambda(grid):
            diag.append({"lambda": cur, "reason": "unresolvable"})
            break
        wave = build_wave(state, cur, theta, beta)
        Vp, Vtp, U, Q = correct(state, wave)
        t = state.triple
        new = SubsolutionTriple(t.v + Vp, t.u + U, t.q + Q, t.ebar, grid)
        vt = state.vt + Vtp
        lin, div = residuals(new, vt)
        marg = float(constraint_margin(new).min())
        nd = deficit(new)[1]
        ok = lin <= lin_tol and div <= lin_tol and marg >= -margin_tol and nd <= rho * delta
        diag.append({"lambda": wave.lam, "delta": nd, "ratio": nd / delta,
                     "min_margin": marg, "linres": lin, "div": div})
        if ok:
            return CIState(new, state.step + 1, state.lambda_schedule + [wave.lam],
                           state.deficit_trace_history + [nd], vt, wave.children, lin, div)
        cur *= growth
    raise FrequencyExhaustionError(
        f"step {state.step + 1}: no accepted frequency from λ={lam:g}", diag)


# --- diagnostics --------------------------------------------------------

def shell_fraction(increment, grid, lam):
    """Share of the L² mass of a vector increment with |k| in [λ/2, 2λ)."""
    K1, K2, _, _ = _spectral(grid)
    kabs = np.sqrt(K1 ** 2 + K2 ** 2)
    P = sum(np.abs(_fft(c)) ** 2 for c in increment)
    P = P.sum(axis=tuple(range(P.ndim - 2))) if P.ndim > 2 else P
    shell = (kabs >= lam / 2) & (kabs < 2 * lam)
    tot = P.sum()
    return float(P[shell].sum() / tot) if tot > 0 else 0.0


def cross_term_pairing(state, lam, theta=0.9, beta=2.0, test=None, harmonic=1):
    """Weak size of the bracket B = v⊗V + V⊗v - U of the raw step wave.

    Returns the pairing with a fixed smooth test tensor (space-time mean of
    B:Φ) and the negative Sobolev norm ‖B‖_{H⁻¹} averaged over time samples.
    """
    grid = state.triple.grid
    wave = build_wave(state, lam, theta, beta, harmonic)
    v = state.triple.v
    B = np.einsum("i...,j...->ij...", v, wave.V)
    B = B + np.swapaxes(B, 0, 1) - wave.U
    X1, X2 = grid.coords()
    if test is None:
        p = 2 * np.pi
        test = np.array([[np.cos(p * X1), np.sin(p * X2)],
                         [np.sin(p * X2), np.cos(p * (X1 + X2))]])
    fixed = float(np.mean(np.einsum("ij...,ij...->...", B, test[:, :, None])))
    _, _, KK, ny = _spectral(grid)
    N = grid.resolution
    H = 0.0
    for i in range(2):
        for j in range(2):
            Bh = _fft(B[i, j]) * ny / N ** 2
            Bh[..., 0, 0] = 0
            H = H + np.sum(np.abs(Bh) ** 2 / KK, axis=(-2, -1))
    return {"lambda": wave.lam, "fixed": fixed, "hminus1": float(np.mean(np.sqrt(H))),
            "l2": float(np.sqrt(np.mean(B ** 2)))}


def cross_term_decay(state, lam, theta=0.9, beta=2.0):
    """Pairings of the same wave at λ and 2λ and their ratios.

    `ratio` compares ‖B‖_{H⁻¹}/‖B‖_{L²}: doubling the lattice vectors also
    doubles the time frequencies, so the interference of overlapping
    classes at the sampled times changes the L² size of B, and the weak
    decay is read off relative to it.
    """
    a = cross_term_pairing(state, lam, theta, beta)
    b = cross_term_pairing(state, lam, theta, beta, harmonic=2)
    return {"lambda": a["lambda"], "at_lambda": a, "at_2lambda": b,
            "ratio_hminus1": b["hminus1"] / a["hminus1"],
            "ratio": (b["hminus1"] / b["l2"]) / (a["hminus1"] / a["l2"]),
            "fixed_abs": (abs(a["fixed"]), abs(b["fixed"]))}


@dataclass
class RunRecord:
    k: int
    lambda_k: float
    delta_k: float
    l2_v: float
    linres: float
    min_margin: float
    shell: float = float("nan")


def _record(state, shell=float("nan")):
    t = state.triple
    lam = state.lambda_schedule[-1] if state.lambda_schedule else 0.0
    return RunRecord(state.step, lam, state.deficit_trace_history[-1],
                     float(np.sqrt(np.mean(t.v[0] ** 2 + t.v[1] ** 2))),
                     state.linres, float(constraint_margin(t).min()), shell)


def default_parameters(steps):
    thetas = [0.8] + [0.9] * (steps - 1)
    betas = [8.0] + [2.0] * (steps - 1)
    return thetas, betas


def ci_run(state, steps=4, rho=0.75, lambda0=8.0, schedule_growth=16.0, retry_growth=2.0,
           retries=3, thetas=None, betas=None):
    """Run K steps; returns (final state, records, error or None).

    λ_{k+1} = min(schedule_growth λ_k, resolvable λ); a failing step stops
    the run and its FrequencyExhaustionError is returned with the partial
    trajectory.
    """
    if steps < 1:
        raise ValueError("steps must be positive")
    th0, be0 = default_parameters(steps)
    thetas = th0 if thetas is None else list(thetas)
    betas = be0 if betas is None else list(betas)
    grid = state.triple.grid
    records = [_record(state)]
    lam = float(lambda0)
    for k in range(steps):
        prev_v = state.triple.v
        try:
            state = ci_step(state, lam, retry_growth, retries, rho, thetas[k], betas[k])
        except FrequencyExhaustionError as err:
            return state, records, err
        inc = state.triple.v - prev_v
        records.append(_record(state, shell_fraction(inc, grid, state.lambda_schedule[-1])))
        lam = min(schedule_growth * state.lambda_schedule[-1], resolvable_lambda(grid))
    return state, records, None


def cell_averaged_trace(triple, cells):
    """tr D averaged over cells of side 1/cells (space) and over time samples."""
    D, _ = deficit(triple)
    tr = (D[0, 0] + D[1, 1]).mean(axis=0)
    N = tr.shape[-1]
    s = N // cells
    return tr.reshape(cells, s, cells, s).mean(axis=(1, 3))


TRAJECTORY_COLUMNS = ("k", "lambda_k", "delta_k", "l2_v", "linres", "min_margin")


def trajectory_rows(records):
    return [[r.k, r.lambda_k, r.delta_k, r.l2_v, r.linres, r.min_margin] for r in records]


__all__ = [
    "CIState", "WaveClass", "StepWave", "RunRecord", "NothingToCorrect",
    "DegenerateDeficitError", "FrequencyExhaustionError", "deficit", "select_wave",
    "profile", "trivial_state", "build_wave", "correct", "residuals", "ci_step",
    "ci_run", "shell_fraction", "cross_term_pairing", "cross_term_decay", "cell_averaged_trace",
    "trajectory_rows", "TRAJECTORY_COLUMNS", "generalized_energy",
]
