"""Dense small-grid oracles and structure checks.

Operators are assembled column by column from the matrix-free stencils on
grids with at most 1000 state coordinates, so every check here is an
independent cross-examination of the production code paths.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, DimensionError
from .grid import (
    AXIS_PAIRS,
    GridSpec,
    StateZ,
    axis_index,
    discrete_curl,
    discrete_curl_alpha,
    flat_weights,
    flatten,
    unflatten,
)
from .noise import NoiseSpec
from .subflows import SchemeKind, apply_sub_semigroup

DENSE_CAP = 1000


@dataclass(frozen=True)
class DenseOperator:
    matrix: np.ndarray
    tag: str

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"{self.tag}: operator must be square, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ArithmeticError(f"{self.tag}: non-finite entries")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other):
        if isinstance(other, DenseOperator):
            return DenseOperator(self.matrix @ other.matrix, f"{self.tag}*{other.tag}")
        return self.matrix @ other


@dataclass(frozen=True)
class CanonicalForm:
    """``J = [[0, W], [-W, 0]]`` pairing flattened E with H coordinates."""

    J: np.ndarray
    weights: np.ndarray

    @classmethod
    def for_grid(cls, grid: GridSpec) -> CanonicalForm:
        w = flat_weights(grid)[: grid.state_dim // 2]
        W = np.diag(w)
        Z = np.zeros_like(W)
        return cls(np.block([[Z, W], [-W, Z]]), w)


def _check_cap(grid: GridSpec):
    if grid.state_dim > DENSE_CAP:
        raise ConfigurationError(f"dense audit limited to {DENSE_CAP} coordinates, grid has {grid.state_dim}")


def _dense_from(apply: Callable[[StateZ], StateZ], grid: GridSpec, tag: str) -> DenseOperator:
    _check_cap(grid)
    d = grid.state_dim
    cols = np.empty((d, d))
    e = np.zeros(d)
    for i in range(d):
        e[i] = 1.0
        cols[:, i] = flatten(apply(unflatten(e, grid)))
        e[i] = 0.0
    return DenseOperator(cols, tag)


def assemble_dense(axis, grid: GridSpec, curl_alpha: Callable | None = None) -> DenseOperator:
    """Matrix of ``M_axis`` (or of ``M`` for ``axis=None``).

    ``curl_alpha(state, axis)`` may be injected to audit a modified stencil.
    """
    op = curl_alpha or discrete_curl_alpha
    if axis is None:
        if curl_alpha is None:
            return _dense_from(discrete_curl, grid, "M")
        mats = [assemble_dense(a, grid, curl_alpha).matrix for a in range(3)]
        return DenseOperator(mats[0] + mats[1] + mats[2], "M")
    a = axis_index(axis)
    return _dense_from(lambda s: op(s, a), grid, f"M_{'xyz'[a]}")


def skew_defect(A: DenseOperator, grid: GridSpec) -> float:
    """``max |W A + A^T W|`` with ``W`` the quadrature weights."""
    w = flat_weights(grid)
    WA = w[:, None] * A.matrix
    return float(np.abs(WA + WA.T).max())


def dense_propagator(A: DenseOperator, scheme, tau: float, shift_filter: bool = False) -> DenseOperator:
    """``exp(tau A)``, ``(Id - tau A)^-1``, the Cayley map, or ``T^M = (Id - tau/2 A)^-1``."""
    scheme = SchemeKind.parse(scheme)
    I = np.eye(A.dim)
    if shift_filter:
        if scheme is not SchemeKind.MIDPOINT:
            raise ValueError("the shift filter exists only for the midpoint scheme")
        return DenseOperator(np.linalg.solve(I - 0.5 * tau * A.matrix, I), f"T^M({A.tag})")
    if scheme is SchemeKind.EXACT:
        return DenseOperator(scipy.linalg.expm(tau * A.matrix), f"exp({A.tag})")
    if scheme is SchemeKind.IMPLICIT_EULER:
        return DenseOperator(np.linalg.solve(I - tau * A.matrix, I), f"IE({A.tag})")
    return DenseOperator(
        np.linalg.solve(I - 0.5 * tau * A.matrix, I + 0.5 * tau * A.matrix), f"MP({A.tag})"
    )


def symplectic_defect(P: DenseOperator, J) -> float:
    """``max |P^T J P - J|``."""
    Jm = J.J if isinstance(J, CanonicalForm) else np.asarray(J)
    if Jm.shape != P.matrix.shape:
        raise DimensionError(f"form {Jm.shape} does not match operator {P.matrix.shape}")
    return float(np.abs(P.matrix.T @ Jm @ P.matrix - Jm).max())


def curl_form(A_alpha: DenseOperator, grid: GridSpec) -> np.ndarray:
    """Matrix of ``int dE ^ curl_a dH`` built from the H-to-E block of ``M_a``."""
    half = grid.state_dim // 2
    w = flat_weights(grid)[:half]
    WC = w[:, None] * A_alpha.matrix[:half, half:]
    Z = np.zeros((half, half))
    return np.block([[Z, WC], [-WC.T, Z]])


def multisymplectic_matrices() -> dict[str, np.ndarray]:
    """``F`` and ``K_1..K_3`` acting on ``u = (H, E)``."""
    I3 = np.eye(3)
    Z3 = np.zeros((3, 3))
    D = {
        1: np.array([[0, 0, 0], [0, 0, -1], [0, 1, 0]], dtype=float),
        2: np.array([[0, 0, 1], [0, 0, 0], [-1, 0, 0]], dtype=float),
        3: np.array([[0, -1, 0], [1, 0, 0], [0, 0, 0]], dtype=float),
    }
    out = {"F": np.block([[Z3, I3], [-I3, Z3]])}
    for j, Dj in D.items():
        out[f"K_{j}"] = np.block([[Dj, Z3], [Z3, Dj]])
    return out


def noise_vector(grid: GridSpec, spec: NoiseSpec, field: np.ndarray, stage: int | None = None) -> np.ndarray:
    """Flattened ``lambda * field`` (or ``lambda^[stage] * field``)."""
    data = np.zeros((6,) + grid.shape)
    stages = (1, 2, 3) if stage is None else (stage,)
    for j in stages:
        l1, l2 = spec.lambda_stage(j)
        data[j - 1] = l1 * field
        data[j + 2] = l2 * field
    return flatten(StateZ(grid, data))


def oracle_mild_step(z0: StateZ, tau: float, increments, spec: NoiseSpec, M: DenseOperator | None = None) -> np.ndarray:
    """Dense mild-solution step: ``exp(tau M) z0`` plus a left-endpoint sum.

    ``increments`` is a sequence of ``R`` nodal noise fields over equal
    substeps ``delta = tau/R``; the stochastic convolution is approximated by
    ``sum_r exp((tau - r*delta) M) lambda dW_r``.
    """
    grid = z0.grid
    if M is None:
        M = assemble_dense(None, grid)
    increments = list(increments)
    y = scipy.linalg.expm(tau * M.matrix) @ flatten(z0)
    R = len(increments)
    if R:
        step = scipy.linalg.expm((tau / R) * M.matrix)
        acc = np.zeros(grid.state_dim)
        for dW in increments:
            acc = step @ (acc + noise_vector(grid, spec, np.asarray(dW)))
        y = y + acc
    return y


@dataclass(frozen=True)
class AuditLine:
    tag: str
    tau: float
    defect: float
    threshold: float
    kind: str  # "max": defect must not exceed threshold; "min": must reach it; "info"

    @property
    def passed(self) -> bool:
        if self.kind == "max":
            return self.defect <= self.threshold
        if self.kind == "min":
            return self.defect >= self.threshold
        return True

    def format(self) -> str:
        status = {"max": "<=", "min": ">=", "info": "info"}[self.kind]
        verdict = "ok" if self.passed else "FAIL"
        if self.kind == "info":
            verdict = "info"
        return f"{self.tag} tau={self.tau:.6g} defect={self.defect:.6e} {status} {self.threshold:.1e} {verdict}"


def _dirichlet_basis_columns(grid: GridSpec, axis: int) -> np.ndarray:
    """Indices of flattened coordinates that are not pinned by the axis faces."""
    data = np.ones((6,) + grid.shape)
    comps = [u for u, _, _ in AXIS_PAIRS[axis]]
    idx = [slice(None)] * 3
    for end in (0, -1):
        idx[axis] = end
        for c in comps:
            data[(c,) + tuple(idx)] = 0.0
    return np.flatnonzero(flatten(StateZ(grid, data)))


def spectral_vs_dense(grid: GridSpec, axis: int, tau: float, A: DenseOperator | None = None) -> float:
    """Max discrepancy of the spectral Exact sub-propagator against ``expm``."""
    if A is None:
        A = assemble_dense(axis, grid)
    E = scipy.linalg.expm(tau * A.matrix)
    worst = 0.0
    e = np.zeros(grid.state_dim)
    for i in _dirichlet_basis_columns(grid, axis):
        e[i] = 1.0
        got = flatten(apply_sub_semigroup(unflatten(e, grid), axis, SchemeKind.EXACT, tau))
        worst = max(worst, float(np.abs(got - E[:, i]).max()))
        e[i] = 0.0
    return worst


def run_audit(
    grid: GridSpec | None = None,
    tau: float = 0.1,
    curl_alpha: Callable | None = None,
    tol: float = 1e-10,
) -> list[AuditLine]:
    """All structure checks on a tiny grid, one :class:`AuditLine` each."""
    grid = grid or GridSpec.cube(4)
    _check_cap(grid)
    lines: list[AuditLine] = []

    for name, X in multisymplectic_matrices().items():
        lines.append(AuditLine(f"skew {name}", 0.0, float(np.abs(X + X.T).max()), 0.0, "max"))

    mats = {a: assemble_dense(a, grid, curl_alpha) for a in range(3)}
    full = DenseOperator(mats[0].matrix + mats[1].matrix + mats[2].matrix, "M")
    for A in (full, *mats.values()):
        lines.append(AuditLine(f"skew-adjoint {A.tag}", 0.0, skew_defect(A, grid), tol, "max"))

    J = CanonicalForm.for_grid(grid)
    for a, A in mats.items():
        P_exp = dense_propagator(A, "exact", tau)
        P_mp = dense_propagator(A, "midpoint", tau)
        P_ie = dense_propagator(A, "implicit-euler", tau)
        P_mp_back = dense_propagator(A, "midpoint", -tau)
        Omega = curl_form(A, grid)
        lines += [
            AuditLine(f"symplectic-J {P_exp.tag}", tau, symplectic_defect(P_exp, J), tol, "max"),
            AuditLine(f"symplectic-J {P_mp.tag}", tau, symplectic_defect(P_mp, J), tol, "max"),
            AuditLine(f"symplectic-J {P_ie.tag}", tau, symplectic_defect(P_ie, J), 1e-3, "info"),
            AuditLine(f"curl-form {P_exp.tag}", tau, symplectic_defect(P_exp, Omega), tol, "info"),
            AuditLine(f"curl-form {P_mp.tag}", tau, symplectic_defect(P_mp, Omega), tol, "info"),
            AuditLine(
                f"cayley-inverse {P_mp.tag}",
                tau,
                float(np.abs(P_mp.matrix @ P_mp_back.matrix - np.eye(A.dim)).max()),
                tol,
                "max",
            ),
            AuditLine(
                f"unit-circle {P_exp.tag}",
                tau,
                float(np.abs(np.abs(np.linalg.eigvals(P_exp.matrix)) - 1.0).max()),
                1e-8,
                "max",
            ),
            AuditLine(
                f"unit-circle {P_mp.tag}",
                tau,
                float(np.abs(np.abs(np.linalg.eigvals(P_mp.matrix)) - 1.0).max()),
                1e-8,
                "max",
            ),
            AuditLine(
                f"contractive {P_ie.tag}",
                tau,
                float(np.abs(np.linalg.eigvals(P_ie.matrix)).max() - 1.0),
                1e-12,
                "max",
            ),
        ]
        if curl_alpha is None:
            lines.append(
                AuditLine(f"spectral-vs-expm {A.tag}", tau, spectral_vs_dense(grid, a, tau, A), 1e-8, "max")
            )
    return lines


def format_report(lines: list[AuditLine]) -> str:
    return "\n".join(line.format() for line in lines) + "\n"
