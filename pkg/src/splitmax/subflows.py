"""Sub-flows of the dimension-split stochastic Maxwell system.

Stage ``j`` evolves ``dZ = M_a Z dt + lambda^[j] dW`` with ``a`` the j-th
axis and ``lambda^[j] = (lambda1^j e_j, lambda2^j e_j)``.  Because
``M_a lambda^[j] = 0`` the stochastic part is an exact additive shift that
commutes with every deterministic sub-propagator used here.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .errors import BoundaryConsistencyError
from .grid import AXIS_PAIRS, StateZ, axis_index
from .lines import exact_line_wave, implicit_line_solve, midpoint_line_step
from .noise import NoiseIncrement, NoiseSpec


class SchemeKind(str, Enum):
    EXACT = "exact"
    IMPLICIT_EULER = "implicit-euler"
    MIDPOINT = "midpoint"

    @classmethod
    def parse(cls, value) -> SchemeKind:
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"ee": "exact", "exp": "exact", "ie": "implicit-euler", "mp": "midpoint"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown scheme {value!r}") from None


def _line_map(scheme: SchemeKind, u, v, s, tau, h):
    if scheme is SchemeKind.EXACT:
        return exact_line_wave(u, v, -s, tau, h, check=False)
    if scheme is SchemeKind.IMPLICIT_EULER:
        return implicit_line_solve(u, v, s, tau, h)
    if scheme is SchemeKind.MIDPOINT:
        return midpoint_line_step(u, v, s, tau, h)
    raise ValueError(f"unknown scheme {scheme!r}")


def check_dirichlet_faces(state: StateZ, axis: int, atol: float = 1e-12) -> None:
    """Raise if an E component tangential to the ``axis`` faces is nonzero there."""
    for u, _, _ in AXIS_PAIRS[axis]:
        f = np.moveaxis(state.data[u], axis, 0)
        edge = max(np.abs(f[0]).max(), np.abs(f[-1]).max())
        if edge > atol:
            raise BoundaryConsistencyError(
                f"component {u} is {edge:.3g} on faces normal to axis {axis}"
            )


def apply_sub_semigroup(state: StateZ, axis, scheme, tau: float, check: bool = True) -> StateZ:
    """Deterministic sub-propagator of ``M_axis`` over ``tau``.

    Exact is ``exp(tau M_a)``, implicit Euler ``(Id - tau M_a)^-1`` and
    midpoint the Cayley map.  Components outside the two coupled pairs pass
    through unchanged.
    """
    a = axis_index(axis)
    scheme = SchemeKind.parse(scheme)
    if check:
        check_dirichlet_faces(state, a)
    h = state.grid.spacing[a]
    out = state.data.copy()
    for u, v, s in AXIS_PAIRS[a]:
        uu, vv = _line_map(
            scheme, np.moveaxis(state.data[u], a, 0), np.moveaxis(state.data[v], a, 0), s, tau, h
        )
        out[u] = np.moveaxis(uu, 0, a)
        out[v] = np.moveaxis(vv, 0, a)
    return StateZ(state.grid, out)


def apply_stochastic_shift(
    state: StateZ,
    j: int,
    increment: NoiseIncrement,
    spec: NoiseSpec,
    scheme=SchemeKind.EXACT,
    tau: float | None = None,
) -> StateZ:
    """Add ``lambda1^j dW`` to ``E_j`` and ``lambda2^j dW`` to ``H_j``.

    The midpoint filter ``(Id - tau/2 M_a)^-1`` fixes ``lambda^[j]`` for the
    matching axis, so every scheme uses the same shift.
    """
    if j not in (1, 2, 3):
        raise ValueError(f"stage index must be 1, 2 or 3, got {j!r}")
    SchemeKind.parse(scheme)
    l1, l2 = spec.lambda_stage(j)
    out = state.data.copy()
    if l1:
        out[j - 1] += l1 * increment.field
    if l2:
        out[j + 2] += l2 * increment.field
    return StateZ(state.grid, out)


def sub_flow(
    state: StateZ,
    j: int,
    scheme,
    tau: float,
    increment: NoiseIncrement,
    spec: NoiseSpec,
    check: bool = True,
) -> StateZ:
    """One stage ``Psi^[j]``: shift, sub-propagator along axis ``j-1``, PEC mask."""
    shifted = apply_stochastic_shift(state, j, increment, spec, scheme, tau)
    moved = apply_sub_semigroup(shifted, j - 1, scheme, tau, check=check)
    return moved.apply_pec()
