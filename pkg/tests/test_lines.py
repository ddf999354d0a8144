import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from splitmax.errors import BoundaryConsistencyError, StencilError
from splitmax.lines import (
    d_dirichlet_line,
    d_free_line,
    exact_line_wave,
    implicit_line_solve,
    midpoint_line_step,
    modified_wavenumbers,
    rotate_modes,
    solve_stride2,
)


def pair_matrix(n, h, s):
    """Dense (u, v) pair operator written out entry by entry."""
    N = n + 1
    Dd = np.zeros((N, N))  # derivative of u with u[0], u[n] treated as zero
    Df = np.zeros((N, N))
    for i in range(1, n):
        if i + 1 < n:
            Dd[i, i + 1] = 1 / (2 * h)
        if i - 1 > 0:
            Dd[i, i - 1] = -1 / (2 * h)
        Df[i, i + 1] = 1 / (2 * h)
        Df[i, i - 1] = -1 / (2 * h)
    Dd[0, 1] = 1 / h
    Dd[n, n - 1] = -1 / h
    Df[0, :3] = np.array([-3, 4, -1]) / (2 * h)
    Df[n, n - 2 :] = np.array([1, -4, 3]) / (2 * h)
    P = np.eye(N)
    P[0, 0] = P[n, n] = 0
    Z = np.zeros((N, N))
    return np.block([[Z, s * P @ Df], [s * Dd, Z]])


def random_pair(rng, n, batch=3):
    u = rng.standard_normal((n + 1, batch))
    u[0] = u[-1] = 0.0
    return u, rng.standard_normal((n + 1, batch))


def sine_coeffs(u, n):
    i = np.arange(n + 1)
    return np.array([2.0 / n * np.sum(u * np.sin(k * np.pi * i / n)) for k in range(1, n)])


def cosine_coeffs(v, n):
    i = np.arange(n + 1)
    w = np.ones(n + 1)
    w[0] = w[-1] = 0.5
    return np.array([2.0 / n * np.sum(w * v * np.cos(k * np.pi * i / n)) for k in range(1, n)])


def test_rotate_modes_closed_form():
    L = 1.7
    for sign in (1.0, -1.0):
        a, b = rotate_modes(1.0, 0.0, np.pi / L, L / 2, sign)
        assert a == pytest.approx(0.0, abs=1e-15)
        assert b == pytest.approx(-sign, abs=1e-15)


def test_tau_zero_is_identity(rng):
    u, v = random_pair(rng, 8)
    uo, vo = exact_line_wave(u, v, 1.0, 0.0, 0.1)
    assert np.array_equal(uo, u) and np.array_equal(vo, v)


def test_modified_wavenumber_eigenrelations():
    n, h = 12, 0.3
    i = np.arange(n + 1)
    kap = modified_wavenumbers(n, h)
    for k in range(1, n):
        s = np.sin(k * np.pi * i / n)
        c = np.cos(k * np.pi * i / n)
        assert np.allclose(d_dirichlet_line(s, h), kap[k - 1] * c, atol=1e-12)
        assert np.allclose(d_free_line(c, h)[1:-1], -kap[k - 1] * s[1:-1], atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(4, 20), h=st.floats(0.01, 1.0), tau=st.floats(-2.0, 2.0), s=st.sampled_from([1.0, -1.0]), seed=st.integers(0, 10**6))
def test_exact_line_equals_matrix_exponential(n, h, tau, s, seed):
    rng = np.random.default_rng(seed)
    u, v = random_pair(rng, n)
    uo, vo = exact_line_wave(u, v, -s, tau, h)
    ref = scipy.linalg.expm(tau * pair_matrix(n, h, s)) @ np.vstack([u, v])
    assert np.abs(np.vstack([uo, vo]) - ref).max() <= 1e-10 * max(1.0, np.abs(ref).max())


def test_exact_line_preserves_mode_energy(rng):
    n, h = 10, 0.1
    u, v = random_pair(rng, n, batch=1)
    u, v = u[:, 0], v[:, 0]
    uo, vo = exact_line_wave(u, v, 1.0, 0.37, h)
    before = sine_coeffs(u, n) ** 2 + cosine_coeffs(v, n) ** 2
    after = sine_coeffs(uo, n) ** 2 + cosine_coeffs(vo, n) ** 2
    assert np.abs(before - after).max() <= 1e-12 * before.max()


def test_exact_line_rejects_nonzero_ends(rng):
    u, v = random_pair(rng, 6)
    u[0, 0] = 1e-6
    with pytest.raises(BoundaryConsistencyError):
        exact_line_wave(u, v, 1.0, 0.1, 0.1)


def test_short_line_is_stencil_error():
    with pytest.raises(StencilError):
        exact_line_wave(np.zeros(4), np.zeros(4), 1.0, 0.1, 0.1)


@pytest.mark.parametrize("s", [1.0, -1.0])
def test_implicit_euler_matches_resolvent(rng, s):
    n, h, tau = 9, 0.13, 0.4
    u, v = random_pair(rng, n)
    A = pair_matrix(n, h, s)
    ref = np.linalg.solve(np.eye(2 * n + 2) - tau * A, np.vstack([u, v]))
    uo, vo = implicit_line_solve(u, v, s, tau, h)
    assert np.abs(np.vstack([uo, vo]) - ref).max() < 1e-12


def test_implicit_euler_resubstitution(rng):
    n, h, tau, s = 16, 1 / 16, 0.3, -1.0
    u, v = random_pair(rng, n)
    us, vs = implicit_line_solve(u, v, s, tau, h)
    # u* = u + tau s D_free v* on interior nodes, v* = v + tau s D_dir u*
    r1 = us[1:-1] - u[1:-1] - tau * s * d_free_line(vs, h)[1:-1]
    r2 = vs - v - tau * s * d_dirichlet_line(us, h)
    assert max(np.abs(r1).max(), np.abs(r2).max()) <= 1e-10


def test_implicit_euler_single_mode_amplitude_and_phase():
    n, L = 16, 1.0
    h = L / n
    i = np.arange(n + 1)
    k, tau, s = 3, 0.05, 1.0
    kap = np.sin(k * np.pi / n) / h
    u = np.sin(k * np.pi * i / n)
    v = np.zeros(n + 1)
    uo, vo = implicit_line_solve(u, v, s, tau, h)
    a, b = sine_coeffs(uo, n)[k - 1], cosine_coeffs(vo, n)[k - 1]
    assert np.hypot(a, b) == pytest.approx(1 / np.sqrt(1 + (kap * tau) ** 2), rel=1e-12)
    assert abs(np.arctan2(b, a)) == pytest.approx(np.arctan(kap * tau), rel=1e-12)


@pytest.mark.parametrize("s", [1.0, -1.0])
def test_midpoint_matches_cayley(rng, s):
    n, h, tau = 11, 0.07, 0.25
    u, v = random_pair(rng, n)
    A = pair_matrix(n, h, s)
    I = np.eye(2 * n + 2)
    ref = np.linalg.solve(I - 0.5 * tau * A, (I + 0.5 * tau * A) @ np.vstack([u, v]))
    uo, vo = midpoint_line_step(u, v, s, tau, h)
    assert np.abs(np.vstack([uo, vo]) - ref).max() < 1e-12


def test_midpoint_preserves_mode_energy(rng):
    n, h = 10, 0.1
    u, v = random_pair(rng, n, batch=1)
    u, v = u[:, 0], v[:, 0]
    uo, vo = midpoint_line_step(u, v, 1.0, 0.8, h)
    before = sine_coeffs(u, n) ** 2 + cosine_coeffs(v, n) ** 2
    after = sine_coeffs(uo, n) ** 2 + cosine_coeffs(vo, n) ** 2
    assert np.abs(before - after).max() <= 1e-12 * before.max()


def test_stride2_solver_against_dense(rng):
    n, r = 13, 0.8
    m = n - 1
    A = np.zeros((m, m))
    for j in range(m):
        A[j, j] = 1 + 2 * r
        if j >= 2:
            A[j, j - 2] = -r
        if j + 2 < m:
            A[j, j + 2] = -r
    A[0, 0] += r
    A[-1, -1] += r
    f = rng.standard_normal((m, 4))
    assert np.allclose(solve_stride2(f, n, r), np.linalg.solve(A, f), atol=1e-13)


def test_line_order_does_not_matter(rng):
    n = 10
    u, v = random_pair(rng, n, batch=6)
    perm = rng.permutation(6)
    a = implicit_line_solve(u, v, 1.0, 0.3, 0.1)
    b = implicit_line_solve(u[:, perm], v[:, perm], 1.0, 0.3, 0.1)
    assert np.array_equal(a[0][:, perm], b[0]) and np.array_equal(a[1][:, perm], b[1])
