"""Split one-step maps and trajectory integration."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .grid import StateZ, inner_l2
from .noise import BrownianLattice, ModeBasis, NoiseIncrement, NoiseSpec, increment_field
from .subflows import SchemeKind, sub_flow


@dataclass(frozen=True)
class SplitOrder:
    """Stage application order; ``(1, 2, 3)`` applies stage 1 first."""

    stages: tuple[int, int, int] = (1, 2, 3)

    def __post_init__(self):
        st = tuple(int(s) for s in self.stages)
        if sorted(st) != [1, 2, 3]:
            raise ConfigurationError(f"split order must permute (1, 2, 3), got {self.stages!r}")
        object.__setattr__(self, "stages", st)

    @classmethod
    def parse(cls, value) -> SplitOrder:
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            value = [c for c in value if c.isdigit()]
        return cls(tuple(value))

    def __iter__(self):
        return iter(self.stages)


@dataclass(frozen=True)
class StepperConfig:
    scheme: SchemeKind
    order: SplitOrder
    tau: float
    steps: int

    def __post_init__(self):
        object.__setattr__(self, "scheme", SchemeKind.parse(self.scheme))
        object.__setattr__(self, "order", SplitOrder.parse(self.order))
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise ConfigurationError(f"tau must be positive, got {self.tau!r}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ConfigurationError(f"steps must be a positive integer, got {self.steps!r}")

    @classmethod
    def for_horizon(cls, scheme, T: float, steps: int, order=(1, 2, 3)) -> StepperConfig:
        return cls(scheme, order, T / steps, steps)

    @property
    def T(self) -> float:
        return self.tau * self.steps


@dataclass
class Trajectory:
    times: np.ndarray
    snapshot_steps: list[int] = field(default_factory=list)
    snapshots: list[StateZ] = field(default_factory=list)
    energy: np.ndarray | None = None

    @property
    def final(self) -> StateZ:
        return self.snapshots[-1]

    def snapshot_at(self, n: int) -> StateZ:
        return self.snapshots[self.snapshot_steps.index(n)]


def one_step(
    state: StateZ,
    cfg: StepperConfig,
    increment: NoiseIncrement,
    spec: NoiseSpec,
    check: bool = True,
) -> StateZ:
    """``Psi^[c] o Psi^[b] o Psi^[a]`` over one step for ``order = (a, b, c)``."""
    for j in cfg.order:
        state = sub_flow(state, j, cfg.scheme, cfg.tau, increment, spec, check=check)
    return state


def run_trajectory(
    z0: StateZ,
    cfg: StepperConfig,
    lattice: BrownianLattice | None,
    spec: NoiseSpec,
    basis: ModeBasis | None = None,
    record_every: int | None = None,
    record_energy: bool = False,
) -> Trajectory:
    """Iterate :func:`one_step` ``cfg.steps`` times with increments from ``lattice``.

    ``record_every`` keeps a snapshot at ``t_0`` and every that many steps
    (the final state is always kept).  ``lattice=None`` runs noise-free.
    """
    grid = z0.grid
    N = cfg.steps
    if lattice is not None:
        if abs(lattice.T - cfg.T) > 1e-12 * lattice.T:
            raise ConfigurationError(f"lattice horizon {lattice.T} != N*tau = {cfg.T}")
        try:
            lattice.level(N)
        except IndexError as exc:
            raise ConfigurationError(str(exc)) from None
        if basis is None:
            basis = ModeBasis(grid, lattice.K)
    zero = NoiseIncrement.zero(grid, spec.K, cfg.tau)
    every = record_every or N
    traj = Trajectory(times=np.arange(N + 1) * cfg.tau)
    energies = np.empty(N + 1) if record_energy else None

    def keep(n, z):
        if n % every == 0 or n == N:
            traj.snapshot_steps.append(n)
            traj.snapshots.append(z)
        if energies is not None:
            energies[n] = inner_l2(z, z)

    z = z0
    keep(0, z)
    for n in range(N):
        inc = zero if lattice is None else increment_field(lattice, basis, spec, N, n)
        z = one_step(z, cfg, inc, spec, check=(n == 0))
        keep(n + 1, z)
    traj.energy = energies
    return traj
