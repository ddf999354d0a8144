"""Named PEC-consistent initial fields."""

from __future__ import annotations

import re

import numpy as np

from .errors import ConfigurationError
from .grid import GridSpec, StateZ


def _unit_coords(grid: GridSpec):
    """Node coordinates scaled to ``[0, 1]`` per axis, as a meshgrid."""
    X, Y, Z = grid.local_mesh()
    L1, L2, L3 = grid.lengths
    return X / L1, Y / L2, Z / L3


def smooth_bump(grid: GridSpec) -> StateZ:
    """Six components built on ``b = prod_j sin^2(pi xhat_j/L_j)``.

    ``b`` and its first derivatives vanish on every face, so all traces are
    zero and the field is smooth up to the boundary.
    """
    x, y, z = _unit_coords(grid)
    b = (np.sin(np.pi * x) * np.sin(np.pi * y) * np.sin(np.pi * z)) ** 2
    comps = [
        b,
        0.6 * b * np.cos(np.pi * y),
        -0.8 * b * np.cos(np.pi * z),
        0.3 * b * np.cos(np.pi * x),
        -0.4 * b,
        0.5 * b * np.cos(np.pi * (x + y)),
    ]
    return StateZ.from_components(grid, comps).apply_pec()


def cavity_mode_fields(grid: GridSpec, k) -> tuple[StateZ, StateZ, float]:
    """Analytic PEC cavity eigenfield for wave numbers ``k = (k1, k2, k3)``.

    Returns ``(Z_E, Z_H, omega)`` where ``Z_E`` holds the electric mode with
    ``H = 0`` and ``Z_H`` holds ``curl E / omega`` with ``E = 0``.  The exact
    dynamics rotate ``Z_E`` into ``-Z_H`` at angular frequency ``omega``.
    """
    k = tuple(int(v) for v in k)
    if len(k) != 3 or min(k) < 0 or sum(v == 0 for v in k) > 1:
        raise ConfigurationError(f"cavity mode needs nonnegative k with at most one zero, got {k}")
    L = np.array(grid.lengths)
    kw = np.pi * np.array(k) / L
    axis = np.array([0.0, 0.0, 1.0]) if abs(kw[0]) + abs(kw[1]) > 0 else np.array([1.0, 0.0, 0.0])
    A = np.cross(kw, axis)
    if k.count(0) == 1:
        # Only the component along the zero wave number survives the sines.
        A = np.zeros(3)
        A[k.index(0)] = 1.0
    A /= np.linalg.norm(A)
    omega = float(np.linalg.norm(kw))
    x, y, z = _unit_coords(grid)
    s = [np.sin(k[0] * np.pi * x), np.sin(k[1] * np.pi * y), np.sin(k[2] * np.pi * z)]
    c = [np.cos(k[0] * np.pi * x), np.cos(k[1] * np.pi * y), np.cos(k[2] * np.pi * z)]
    E = [A[0] * c[0] * s[1] * s[2], A[1] * s[0] * c[1] * s[2], A[2] * s[0] * s[1] * c[2]]
    # curl E for the separable trigonometric mode, differentiated by hand.
    H = [
        (A[2] * kw[1] - A[1] * kw[2]) * s[0] * c[1] * c[2],
        (A[0] * kw[2] - A[2] * kw[0]) * c[0] * s[1] * c[2],
        (A[1] * kw[0] - A[0] * kw[1]) * c[0] * c[1] * s[2],
    ]
    zero = np.zeros(grid.shape)
    ZE = StateZ.from_components(grid, E + [zero] * 3).apply_pec()
    ZH = StateZ.from_components(grid, [zero] * 3 + [h / omega for h in H]).apply_pec()
    return ZE, ZH, omega


_CAVITY = re.compile(r"^cavity-mode\s*[\s:]\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)$")


def available() -> list[str]:
    return ["zero", "smooth-bump", "cavity-mode k1,k2,k3"]


def make_initial(name: str, grid: GridSpec) -> StateZ:
    """Build a preset by name: ``zero``, ``smooth-bump`` or ``cavity-mode 1,1,0``."""
    key = str(name).strip().lower()
    if key == "zero":
        return StateZ.zeros(grid)
    if key == "smooth-bump":
        return smooth_bump(grid)
    m = _CAVITY.match(key)
    if m:
        return cavity_mode_fields(grid, tuple(int(g) for g in m.groups()))[0]
    raise ConfigurationError(f"unknown initial preset {name!r}; choose from {available()}")
