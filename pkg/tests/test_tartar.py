import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cilab import tartar as T

floats = st.floats(-3, 3, allow_nan=False)


def test_euler_system_shape():
    s = T.euler_linear_system(2)
    assert (s.d, s.m, s.N) == (3, 3, 5)
    s3 = T.euler_linear_system(3)
    assert (s3.d, s3.m, s3.N) == (4, 4, 9)
    with pytest.raises(T.ConfigError):
        T.euler_linear_system(1)


def test_pack_roundtrip():
    u = np.array([[0.3, -0.7], [-0.7, -0.3]])
    v, u2, q = T.euler_unpack(T.euler_pack([1.0, 2.0], u, 0.25))
    assert np.allclose(v, [1, 2]) and np.allclose(u2, u) and q == 0.25


def test_pure_velocity_witness():
    # hand oracle: ξ_x ⊥ V and ξ_t = 0 for V = (2, -1), U = 0, Q = 0
    s = T.euler_linear_system(2)
    w = T.wave_cone_contains(s, T.euler_pack([2.0, -1.0], np.zeros((2, 2)), 0.0))
    assert np.allclose(w.xi, np.array([1, 2, 0]) / np.sqrt(5))


def test_pure_pressure_witness():
    s = T.euler_linear_system(2)
    w = T.wave_cone_contains(s, T.euler_pack([0.0, 0.0], np.zeros((2, 2)), 1.0))
    assert np.allclose(w.xi, [0, 0, 1]) and w.residual == 0


def test_not_in_cone():
    # V = e1, U = 0, Q = 1 forces ξ = 0 by hand
    s = T.euler_linear_system(2)
    assert T.wave_cone_contains(s, T.euler_pack([1.0, 0.0], np.zeros((2, 2)), 1.0)) is None


def test_curl_free_rank_one():
    s = T.curl_free_system(2)
    p, n = np.array([1.0, -2.0]), np.array([3.0, 4.0]) / 5
    w = T.wave_cone_contains(s, np.outer(p, n).ravel())
    assert np.allclose(w.xi, n)
    assert T.wave_cone_contains(s, np.eye(2).ravel()) is None


def test_zero_state_rejected():
    with pytest.raises(T.ConfigError):
        T.wave_cone_contains(T.euler_linear_system(2), np.zeros(5))


@settings(max_examples=40, deadline=None)
@given(floats, floats, floats, floats)
def test_cone_direction_solves_system(v1, v2, u11, u12):
    V = np.array([v1, v2])
    if np.linalg.norm(V) < 1e-3:
        return
    U = np.array([[u11, u12], [u12, -u11]])
    xi, xt, Q = T.euler_cone_direction(V, U)
    s = T.euler_linear_system(2)
    r = s.apply(np.append(xi, xt), T.euler_pack(V, U, Q))
    assert np.abs(r).max() < 1e-12 * (1 + np.abs(U).max() + np.linalg.norm(V)) ** 2
    assert T.wave_cone_contains(s, T.euler_pack(V, U, Q)) is not None


def test_plane_wave_rejects_bad_direction():
    s = T.euler_linear_system(2)
    a = T.euler_pack([1.0, 0.0], np.zeros((2, 2)), 0.0)
    with pytest.raises(T.InvalidWaveError):
        T.plane_wave(s, a, [1, 0, 0], np.sin, (8, 8, 4))


def test_plane_wave_residual_second_order():
    s = T.euler_linear_system(2)
    a = T.euler_pack([2.0, -1.0], np.zeros((2, 2)), 0.0)
    res = [T.discrete_residual(s, T.plane_wave(s, a, [1, 2, 0], lambda y: np.sin(2 * np.pi * y), (n, n, 4)))
           for n in (64, 128)]
    # centered differences see frequencies 1 and 2 on the two axes: error ∝ h²
    assert abs(np.log2(res[0] / res[1]) - 2) < 0.05


def test_multiplier_identities():
    for m in (T.SQG, T.IPM):
        chk = T.multiplier_check(m, 16)
        assert chk["homogeneous"] and chk["incompressible"] and chk["parity"] == m.parity


def test_sqg_on_sine():
    n = 64
    x = np.arange(n) / n
    X1, _ = np.meshgrid(x, x, indexing="ij")
    v = T.multiplier_apply(T.SQG, np.sin(2 * np.pi * X1))
    assert np.abs(v[0]).max() < 1e-12 and np.abs(v[1] - np.cos(2 * np.pi * X1)).max() < 1e-12


def test_ipm_on_mixed_mode():
    # hand oracle: θ = cos 2π(x1 + x2), m(1,1) = (1/2, -1/2)
    n = 32
    x = np.arange(n) / n
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    th = np.cos(2 * np.pi * (X1 + X2))
    v = T.multiplier_apply(T.IPM, th)
    assert np.allclose(v[0], th / 2, atol=1e-12) and np.allclose(v[1], -th / 2, atol=1e-12)


def test_loaded_symbol_matches_builtin():
    m = T.load_multiplier("name: riesz\nm1: -I*xi2/absxi\nm2: I*xi1/absxi\n")
    assert m.parity == "odd"
    k1, k2 = np.array([1.0, 3.0, -2.0]), np.array([2.0, 0.0, 5.0])
    for a, b in zip(m(k1, k2), T.SQG(k1, k2)):
        assert np.allclose(a, b)


def test_symbol_file_errors():
    with pytest.raises(T.SymbolError):
        T.load_multiplier("name: x\nm1: xi1\n")
    # not real-valued: m(-ξ) != conj m(ξ)
    bad = T.load_multiplier("m1: I*xi1*xi2/absxi**2\nm2: -I*xi1**2/absxi**2\n")
    with pytest.raises(T.SymbolError):
        T.multiplier_apply(bad, np.zeros((16, 16)))


def test_stationary_shear_transport_residual():
    # θ = sin 2πx1 is SQG-steady: v = (0, cos 2πx1) is orthogonal to ∇θ
    n = 32
    x = np.arange(n) / n
    X1, _ = np.meshgrid(x, x, indexing="ij")
    th = np.broadcast_to(np.sin(2 * np.pi * X1), (9, n, n))
    assert T.transport_residual(th, T.SQG, 1.0) < 1e-12
