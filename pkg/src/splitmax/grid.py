"""Cuboid geometry, collocated grids and discrete field operators.

All fields live on the same collocated node set ``x_i = a1- + i*h1`` (and
likewise in y and z), ``i = 0..n1``.  A six-component state is stored as one
array of shape ``(6, n1+1, n2+1, n3+1)`` with component order
``E1, E2, E3, H1, H2, H3`` and array axes ordered ``(x, y, z)``.

Differentiation follows one rule per component type.  Along axis ``a`` the
electric components tangential to the faces normal to ``a`` vanish there
(PEC); their derivative ignores the face values and closes with ``u[1]/h``
at the face.  That closure is what makes the discrete ``M_a`` exactly
skew-adjoint under trapezoidal weights.  Components that are free on those
faces use central differences inside and second-order one-sided stencils on
the faces.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionError, StencilError

E1, E2, E3, H1, H2, H3 = range(6)
COMPONENT_NAMES = ("E1", "E2", "E3", "H1", "H2", "H3")
AXES = {"x": 0, "y": 1, "z": 2}

# (dirichlet E component, free H component, coupling sign s) per axis, for
# the pair system u' = s * d_a v, v' = s * d_a u.
AXIS_PAIRS = {
    0: ((E2, H3, -1.0), (E3, H2, 1.0)),
    1: ((E1, H3, 1.0), (E3, H1, -1.0)),
    2: ((E1, H2, -1.0), (E2, H1, 1.0)),
}

# Components forced to zero on the faces normal to each axis: tangential E
# and normal H.
_PEC_ZERO = {
    0: (E2, E3, H1),
    1: (E1, E3, H2),
    2: (E1, E2, H3),
}


def axis_index(axis) -> int:
    """Accept ``'x'|'y'|'z'`` or ``0|1|2``."""
    if isinstance(axis, str):
        try:
            return AXES[axis]
        except KeyError:
            raise ValueError(f"unknown axis {axis!r}") from None
    if axis not in (0, 1, 2):
        raise ValueError(f"unknown axis {axis!r}")
    return int(axis)


@dataclass(frozen=True)
class Cuboid:
    a1_minus: float = 0.0
    a1_plus: float = 1.0
    a2_minus: float = 0.0
    a2_plus: float = 1.0
    a3_minus: float = 0.0
    a3_plus: float = 1.0

    def __post_init__(self):
        for lo, hi in self.bounds:
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"degenerate cuboid extent ({lo}, {hi})")

    @property
    def bounds(self) -> tuple[tuple[float, float], ...]:
        return (
            (self.a1_minus, self.a1_plus),
            (self.a2_minus, self.a2_plus),
            (self.a3_minus, self.a3_plus),
        )

    @property
    def lengths(self) -> tuple[float, float, float]:
        return tuple(float(hi - lo) for lo, hi in self.bounds)

    @property
    def volume(self) -> float:
        L1, L2, L3 = self.lengths
        return L1 * L2 * L3


@dataclass(frozen=True)
class GridSpec:
    """Collocated grid with ``n_j`` intervals (``n_j + 1`` nodes) per axis."""

    cuboid: Cuboid
    n1: int
    n2: int
    n3: int

    def __post_init__(self):
        for n in self.counts:
            if int(n) != n or n < 4:
                raise StencilError(f"need at least 4 intervals per axis, got {n}")

    @classmethod
    def cube(cls, n: int, length: float = 1.0) -> GridSpec:
        return cls(Cuboid(0.0, length, 0.0, length, 0.0, length), n, n, n)

    @property
    def counts(self) -> tuple[int, int, int]:
        return (self.n1, self.n2, self.n3)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n1 + 1, self.n2 + 1, self.n3 + 1)

    @property
    def spacing(self) -> tuple[float, float, float]:
        return tuple(L / n for L, n in zip(self.cuboid.lengths, self.counts))

    @property
    def lengths(self) -> tuple[float, float, float]:
        return self.cuboid.lengths

    @property
    def state_dim(self) -> int:
        return 6 * int(np.prod(self.shape))

    def local_coords(self, axis: int) -> np.ndarray:
        """Node offsets ``x - a_minus`` along one axis."""
        n = self.counts[axis]
        return np.arange(n + 1) * self.spacing[axis]

    def coords(self, axis: int) -> np.ndarray:
        return self.cuboid.bounds[axis][0] + self.local_coords(axis)

    def local_mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return np.meshgrid(*(self.local_coords(a) for a in range(3)), indexing="ij")

    @cached_property
    def line_weights(self) -> tuple[np.ndarray, ...]:
        out = []
        for n, h in zip(self.counts, self.spacing):
            w = np.full(n + 1, h)
            w[0] = w[-1] = 0.5 * h
            out.append(w)
        return tuple(out)

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights on the node grid."""
        w1, w2, w3 = self.line_weights
        return w1[:, None, None] * w2[None, :, None] * w3[None, None, :]

    @cached_property
    def pec_mask(self) -> np.ndarray:
        """Boolean ``(6, *shape)`` array, True where PEC forces a zero."""
        mask = np.zeros((6,) + self.shape, dtype=bool)
        for axis, comps in _PEC_ZERO.items():
            idx = [slice(None)] * 3
            for end in (0, -1):
                idx[axis] = end
                for c in comps:
                    mask[(c,) + tuple(idx)] = True
        return mask

    @cached_property
    def pec_keep(self) -> np.ndarray:
        return (~self.pec_mask).astype(float)


class StateZ:
    """Six-component field ``Z = (E, H)`` on a grid."""

    __slots__ = ("grid", "data")

    def __init__(self, grid: GridSpec, data: np.ndarray | None = None):
        self.grid = grid
        if data is None:
            data = np.zeros((6,) + grid.shape)
        else:
            data = np.asarray(data, dtype=float)
            if data.shape != (6,) + grid.shape:
                raise DimensionError(
                    f"state data shape {data.shape} does not match grid {grid.shape}"
                )
        self.data = data

    @classmethod
    def zeros(cls, grid: GridSpec) -> StateZ:
        return cls(grid)

    @classmethod
    def from_components(cls, grid: GridSpec, components) -> StateZ:
        return cls(grid, np.stack([np.broadcast_to(c, grid.shape) for c in components]))

    def copy(self) -> StateZ:
        return StateZ(self.grid, self.data.copy())

    E1 = property(lambda self: self.data[E1])
    E2 = property(lambda self: self.data[E2])
    E3 = property(lambda self: self.data[E3])
    H1 = property(lambda self: self.data[H1])
    H2 = property(lambda self: self.data[H2])
    H3 = property(lambda self: self.data[H3])

    @property
    def E(self) -> np.ndarray:
        return self.data[:3]

    @property
    def H(self) -> np.ndarray:
        return self.data[3:]

    def _check(self, other: StateZ):
        if other.grid != self.grid:
            raise DimensionError("states live on different grids")

    def __add__(self, other: StateZ) -> StateZ:
        self._check(other)
        return StateZ(self.grid, self.data + other.data)

    def __sub__(self, other: StateZ) -> StateZ:
        self._check(other)
        return StateZ(self.grid, self.data - other.data)

    def __mul__(self, scalar: float) -> StateZ:
        return StateZ(self.grid, self.data * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> StateZ:
        return StateZ(self.grid, -self.data)

    def apply_pec(self) -> StateZ:
        return StateZ(self.grid, self.data * self.grid.pec_keep)

    def pec_violation(self) -> float:
        """Largest magnitude on a PEC-constrained node (0 if consistent)."""
        vals = self.data[self.grid.pec_mask]
        return float(np.abs(vals).max()) if vals.size else 0.0

    def is_boundary_consistent(self, atol: float = 1e-12) -> bool:
        return self.pec_violation() <= atol

    def __repr__(self) -> str:
        return f"StateZ(grid={self.grid.counts}, norm={norm_l2(self):.6g})"


def _check_line(f: np.ndarray, axis: int):
    if f.shape[axis] < 5:
        raise StencilError(f"line of {f.shape[axis]} nodes is shorter than the 5-node stencil")


def _take(f, axis, sl):
    idx = [slice(None)] * f.ndim
    idx[axis] = sl
    return f[tuple(idx)]


def diff_dirichlet(u: np.ndarray, axis: int, h: float) -> np.ndarray:
    """First derivative of a component that vanishes at both ends of the axis.

    The end values of ``u`` are treated as zero.  Faces use ``u[1]/h`` and
    ``-u[n-1]/h``; interior nodes use central differences.
    """
    _check_line(u, axis)
    u = np.moveaxis(u, axis, 0)
    out = np.empty_like(u, dtype=float)
    inner = u[1:-1]
    padded = np.zeros((inner.shape[0] + 2,) + inner.shape[1:])
    padded[1:-1] = inner
    out[1:-1] = (padded[2:] - padded[:-2]) / (2.0 * h)
    out[0] = u[1] / h
    out[-1] = -u[-2] / h
    return np.moveaxis(out, 0, axis)


def diff_free(v: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Central first derivative with second-order one-sided faces."""
    _check_line(v, axis)
    v = np.moveaxis(v, axis, 0)
    out = np.empty_like(v, dtype=float)
    out[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    out[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
    return np.moveaxis(out, 0, axis)


def _zero_faces(f: np.ndarray, axis: int) -> np.ndarray:
    idx = [slice(None)] * f.ndim
    for end in (0, -1):
        idx[axis] = end
        f[tuple(idx)] = 0.0
    return f


def discrete_curl_alpha(state: StateZ, axis) -> StateZ:
    """Apply the single-axis Maxwell operator ``M_a`` to ``state``.

    For ``axis='x'`` this returns ``(curl_x H, -curl_x E)``, i.e. the fields
    ``(0, -dH3/dx, dH2/dx, 0, dE3/dx, -dE2/dx)``.  Output slots of the
    electric components that vanish on the x-faces are zeroed there.
    """
    a = axis_index(axis)
    h = state.grid.spacing[a]
    out = np.zeros_like(state.data)
    for u, v, s in AXIS_PAIRS[a]:
        out[u] = _zero_faces(s * diff_free(state.data[v], a, h), a)
        out[v] = s * diff_dirichlet(state.data[u], a, h)
    return StateZ(state.grid, out)


def discrete_curl(state: StateZ) -> StateZ:
    """Full Maxwell operator ``M = M_x + M_y + M_z``."""
    out = discrete_curl_alpha(state, 0).data
    out = out + discrete_curl_alpha(state, 1).data
    out = out + discrete_curl_alpha(state, 2).data
    return StateZ(state.grid, out)


def discrete_div(field3, grid: GridSpec) -> np.ndarray:
    """Divergence of a 3-vector field given as three nodal arrays."""
    f1, f2, f3 = (np.asarray(f, dtype=float) for f in field3)
    for f in (f1, f2, f3):
        if f.shape != grid.shape:
            raise DimensionError(f"field shape {f.shape} does not match grid {grid.shape}")
    h1, h2, h3 = grid.spacing
    return diff_free(f1, 0, h1) + diff_free(f2, 1, h2) + diff_free(f3, 2, h3)


def inner_l2(a: StateZ, b: StateZ) -> float:
    """Trapezoidal approximation of ``\\int_D a . b dx`` over all six components."""
    if a.grid != b.grid:
        raise DimensionError("inner product of states on different grids")
    w = a.grid.weights
    return float(np.einsum("cijk,cijk,ijk->", a.data, b.data, w))


def norm_l2(a: StateZ) -> float:
    return float(np.sqrt(max(inner_l2(a, a), 0.0)))


def scalar_norm_l2(f: np.ndarray, grid: GridSpec) -> float:
    return float(np.sqrt(np.sum(grid.weights * f * f)))


def flatten(state: StateZ) -> np.ndarray:
    """Component-major vector with nodes in (z, y, x) order, x fastest."""
    return np.ascontiguousarray(state.data.transpose(0, 3, 2, 1)).ravel()


def unflatten(vec: np.ndarray, grid: GridSpec) -> StateZ:
    n1, n2, n3 = grid.shape
    arr = np.asarray(vec, dtype=float).reshape(6, n3, n2, n1).transpose(0, 3, 2, 1)
    return StateZ(grid, np.ascontiguousarray(arr))


def flat_weights(grid: GridSpec) -> np.ndarray:
    """Quadrature weight of every flattened state coordinate."""
    w = np.ascontiguousarray(grid.weights.transpose(2, 1, 0)).ravel()
    return np.tile(w, 6)
