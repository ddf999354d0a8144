"""One-dimensional pair solvers along grid lines.

Every sub-flow reduces to independent systems ``u' = s*Dv, v' = s*Du`` on
lines parallel to one axis, where ``u`` is a component that vanishes at both
line ends and ``v`` is free there.  Arrays passed here carry the line
direction on axis 0; all remaining axes are batched lines.

On the discrete stencils of :mod:`splitmax.grid` the sine vectors
``sin(k*pi*i/n)`` and cosine vectors ``cos(k*pi*i/n)`` satisfy
``D_dir sin_k = kappa_k cos_k`` and ``D_free cos_k = -kappa_k sin_k`` with
the modified wavenumber ``kappa_k = sin(k*pi/n)/h``.  The exact line flow is
therefore a rotation per shared frequency ``k = 1..n-1``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.fft import dct, dst

from .errors import BoundaryConsistencyError, StencilError


def modified_wavenumbers(n: int, h: float) -> np.ndarray:
    """``kappa_k`` for ``k = 1..n-1`` on a line of ``n`` intervals."""
    k = np.arange(1, n)
    return np.sin(k * np.pi / n) / h


def rotate_modes(a, b, kappa, tau: float, kappa_sign: float = 1.0):
    """Exact flow of ``(a, b)' = kappa_sign * [[0, kappa], [-kappa, 0]] (a, b)``."""
    c = np.cos(np.multiply(kappa, tau))
    sn = kappa_sign * np.sin(np.multiply(kappa, tau))
    return a * c + sn * b, b * c - sn * a


def _check_pair(u: np.ndarray, v: np.ndarray):
    if u.shape != v.shape:
        raise StencilError(f"pair shapes differ: {u.shape} vs {v.shape}")
    if u.shape[0] < 5:
        raise StencilError(f"line of {u.shape[0]} nodes is shorter than the 5-node stencil")


def _check_dirichlet(u: np.ndarray, atol: float = 1e-12):
    edge = max(np.abs(u[0]).max(initial=0.0), np.abs(u[-1]).max(initial=0.0))
    if edge > atol:
        raise BoundaryConsistencyError(
            f"Dirichlet component has end value {edge:.3g} (must vanish)"
        )


def exact_line_wave(u, v, kappa_sign: float, tau: float, h: float, check: bool = True):
    """Exact flow over ``tau`` of the band-limited line pair.

    ``u`` is expanded in sine modes on its interior nodes (DST-I) and ``v``
    in cosine modes on all nodes (DCT-I).  Shared frequencies rotate;
    cosine modes ``k = 0`` and ``k = n`` stay fixed.  The pair obeys
    ``(a, b)' = kappa_sign*[[0, kappa], [-kappa, 0]](a, b)``, which is the
    system ``u' = s*D_free v, v' = s*D_dir u`` for ``kappa_sign = -s``.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_pair(u, v)
    if check:
        _check_dirichlet(u)
    n = u.shape[0] - 1
    if tau == 0.0:
        return u.copy(), v.copy()
    # Unnormalized DST-I / DCT-I share the factor 2n in their inverses, so
    # rotating the raw transforms is equivalent to rotating mode amplitudes.
    A = dst(u[1:-1], type=1, axis=0)
    Y = dct(v, type=1, axis=0)
    kappa = modified_wavenumbers(n, h).reshape((-1,) + (1,) * (u.ndim - 1))
    A, Y[1:-1] = rotate_modes(A, Y[1:-1], kappa, tau, kappa_sign)
    u_out = np.zeros_like(u)
    u_out[1:-1] = dst(A, type=1, axis=0) / (2 * n)
    v_out = dct(Y, type=1, axis=0) / (2 * n)
    return u_out, v_out


def d_dirichlet_line(u: np.ndarray, h: float) -> np.ndarray:
    """Derivative of a line component whose end values are taken as zero."""
    w = u.copy()
    w[0] = 0.0
    w[-1] = 0.0
    out = np.empty_like(w)
    out[1:-1] = (w[2:] - w[:-2]) / (2 * h)
    out[0] = w[1] / h
    out[-1] = -w[-2] / h
    return out


def d_free_line(v: np.ndarray, h: float) -> np.ndarray:
    """Central derivative with second-order one-sided end stencils."""
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2 * h)
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2 * h)
    out[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2 * h)
    return out


@lru_cache(maxsize=64)
def _stride2_factors(n: int, r: float):
    """Thomas factors for ``(1+2r)x_i - r(x_{i-2} + x_{i+2})`` on ``i = 1..n-1``.

    The operator is ``Id - tau^2 D_free D_dir`` restricted to interior nodes
    with ``r = tau^2/(4h^2)``.  Odd and even nodes decouple; a stride-2
    sweep handles both chains at once.  Reflection through the walls adds
    ``r`` to the diagonal at ``i = 1`` and ``i = n-1``.
    """
    m = n - 1
    diag = np.full(m, 1.0 + 2.0 * r)
    diag[0] += r
    diag[-1] += r
    cp = np.zeros(m)
    denom = np.zeros(m)
    for j in range(m):
        d = diag[j] + (r * cp[j - 2] if j >= 2 else 0.0)
        if not d > 0.0:
            raise ArithmeticError("singular line system")
        denom[j] = d
        cp[j] = -r / d
    cp.setflags(write=False)
    denom.setflags(write=False)
    return cp, denom


def solve_stride2(f: np.ndarray, n: int, r: float) -> np.ndarray:
    """Solve the interior system of :func:`_stride2_factors` for rhs ``f``.

    ``f`` has the ``n-1`` interior nodes on axis 0; other axes are batched.
    """
    cp, denom = _stride2_factors(n, float(r))
    m = n - 1
    dp = np.empty_like(f)
    for j in range(m):
        if j >= 2:
            dp[j] = (f[j] + r * dp[j - 2]) / denom[j]
        else:
            dp[j] = f[j] / denom[j]
    x = np.empty_like(f)
    for j in range(m - 1, -1, -1):
        if j + 2 < m:
            x[j] = dp[j] - cp[j] * x[j + 2]
        else:
            x[j] = dp[j]
    return x


def implicit_line_solve(u, v, s: float, tau: float, h: float):
    """Solve ``(Id - tau*A)(u*, v*) = (u, v)`` for the pair operator ``A``.

    ``A(u, v) = (s*D_free v, s*D_dir u)`` with the ``u`` slot zero at the
    ends.  Eliminating ``v*`` gives ``(Id - tau^2 D_free D_dir) u* =
    u + tau*s*D_free v`` on interior nodes, then ``v* = v + tau*s*D_dir u*``.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_pair(u, v)
    n = u.shape[0] - 1
    if tau == 0.0:
        out = u.copy()
        out[0] = out[-1] = 0.0
        return out, v.copy()
    r = tau * tau / (4.0 * h * h)
    rhs = u[1:-1] + (tau * s / (2 * h)) * (v[2:] - v[:-2])
    u_new = np.zeros_like(u)
    u_new[1:-1] = solve_stride2(rhs, n, r)
    v_new = v + (tau * s) * d_dirichlet_line(u_new, h)
    return u_new, v_new


def midpoint_line_step(u, v, s: float, tau: float, h: float):
    """Cayley step ``(Id - tau/2 A)^{-1}(Id + tau/2 A)`` of the pair operator."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_pair(u, v)
    half = 0.5 * tau
    u_half = np.zeros_like(u)
    u_half[1:-1] = u[1:-1] + half * s * (v[2:] - v[:-2]) / (2 * h)
    v_half = v + half * s * d_dirichlet_line(u, h)
    return implicit_line_solve(u_half, v_half, s, half, h)
