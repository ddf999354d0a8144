"""Truncated Q-Wiener noise with Dirichlet sine eigenfunctions.

``W(t, x) = sum_k sqrt(q_k) e_k(x) beta_k(t)`` over modes ``k = (k1, k2, k3)``
with ``1 <= k_j <= K``, ``q_k = |k|^(-2r)`` and
``e_k = sqrt(8/V) prod_j sin(k_j pi xhat_j / L_j)``.

Brownian increments are stored per mode on the finest time level.  Coarser
increments are built by a pairwise tree so that any increment is bitwise
equal to the sum of its two children.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .grid import GridSpec

_U64 = 2**64
_MAX_FINE = 2**40
_DUMP_MAGIC = b"SMXLAT01"


def _vec3(x, name) -> tuple[float, float, float]:
    arr = np.asarray(x, dtype=float).reshape(-1)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"{name} must be three finite reals, got {x!r}")
    return tuple(float(a) for a in arr)


@dataclass(frozen=True)
class NoiseSpec:
    lambda1: tuple[float, float, float] = (1.0, 1.0, 1.0)
    lambda2: tuple[float, float, float] = (1.0, 1.0, 1.0)
    decay_r: float = 3.0
    K: int = 4
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "lambda1", _vec3(self.lambda1, "lambda1"))
        object.__setattr__(self, "lambda2", _vec3(self.lambda2, "lambda2"))
        if int(self.K) != self.K or self.K < 1:
            raise ConfigurationError(f"K must be a positive integer, got {self.K!r}")
        if not (np.isfinite(self.decay_r) and self.decay_r >= 0):
            raise ConfigurationError(f"decay_r must be >= 0, got {self.decay_r!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed < _U64:
            raise ConfigurationError(f"seed must fit in 64 unsigned bits, got {self.seed!r}")

    @property
    def n_modes(self) -> int:
        return self.K**3

    @property
    def lambda_sq(self) -> float:
        """``|lambda|^2 = |lambda1|^2 + |lambda2|^2``."""
        return float(np.dot(self.lambda1, self.lambda1) + np.dot(self.lambda2, self.lambda2))

    def lambda_stage(self, j: int) -> tuple[float, float]:
        """Amplitudes ``(lambda1^j, lambda2^j)`` of the stage-``j`` noise."""
        if j not in (1, 2, 3):
            raise ValueError(f"stage index must be 1, 2 or 3, got {j!r}")
        return self.lambda1[j - 1], self.lambda2[j - 1]

    def lambda_stage_sq(self, j: int) -> float:
        a, b = self.lambda_stage(j)
        return a * a + b * b

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """``q_k`` as a ``(K, K, K)`` array indexed by ``k_j - 1``."""
        k = np.arange(1, self.K + 1, dtype=float)
        ksq = k[:, None, None] ** 2 + k[None, :, None] ** 2 + k[None, None, :] ** 2
        return ksq ** (-float(self.decay_r))

    def mode_index(self, k1: int, k2: int, k3: int) -> int:
        """Lexicographic mode number ``((k1-1)K + (k2-1))K + (k3-1)``."""
        K = self.K
        for k in (k1, k2, k3):
            if not 1 <= k <= K:
                raise IndexError(f"mode ({k1},{k2},{k3}) outside 1..{K}")
        return ((k1 - 1) * K + (k2 - 1)) * K + (k3 - 1)


def trace_q(spec: NoiseSpec) -> float:
    """Truncated trace ``sum_k q_k`` over the retained modes."""
    return float(spec.eigenvalues.sum())


class ModeBasis:
    """Separable nodal samples of the retained sine eigenfunctions."""

    def __init__(self, grid: GridSpec, K: int):
        if K >= min(grid.counts):
            raise ConfigurationError(
                f"K={K} needs at least K+1 intervals per axis, grid has {grid.counts}"
            )
        self.grid = grid
        self.K = int(K)
        self.norm = float(np.sqrt(8.0 / grid.cuboid.volume))
        k = np.arange(1, K + 1)
        sines, cosines, waves = [], [], []
        for axis, (n, L) in enumerate(zip(grid.counts, grid.lengths)):
            i = np.arange(n + 1)
            phase = np.pi * np.outer(k, i) / n
            s = np.sin(phase)
            s[:, 0] = 0.0
            s[:, -1] = 0.0
            sines.append(s)
            cosines.append(np.cos(phase))
            waves.append(k * np.pi / L)
        self.sines = tuple(sines)
        self.cosines = tuple(cosines)
        self.wavenumbers = tuple(waves)

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """Nodal field ``sum_k coeffs[k] e_k``; ``coeffs`` has shape ``(K, K, K)``."""
        s1, s2, s3 = self.sines
        return self.norm * np.einsum("abc,ai,bj,ck->ijk", coeffs, s1, s2, s3, optimize=True)

    def synthesize_gradient(self, coeffs: np.ndarray):
        """Analytic gradient of :meth:`synthesize`, differentiated per mode."""
        s1, s2, s3 = self.sines
        c1, c2, c3 = self.cosines
        k1, k2, k3 = self.wavenumbers
        g1 = np.einsum("abc,ai,bj,ck->ijk", coeffs, k1[:, None] * c1, s2, s3, optimize=True)
        g2 = np.einsum("abc,ai,bj,ck->ijk", coeffs, s1, k2[:, None] * c2, s3, optimize=True)
        g3 = np.einsum("abc,ai,bj,ck->ijk", coeffs, s1, s2, k3[:, None] * c3, optimize=True)
        return self.norm * g1, self.norm * g2, self.norm * g3

    def mode(self, k1: int, k2: int, k3: int) -> np.ndarray:
        c = np.zeros((self.K,) * 3)
        c[k1 - 1, k2 - 1, k3 - 1] = 1.0
        return self.synthesize(c)


@dataclass(frozen=True)
class NoiseIncrement:
    """``dW`` over one time interval, with its per-mode coefficients.

    ``coeffs[k] = sqrt(q_k) dB_k`` so that ``field = sum_k coeffs[k] e_k``.
    """

    field: np.ndarray
    coeffs: np.ndarray
    dt: float

    @classmethod
    def zero(cls, grid: GridSpec, K: int, dt: float = 0.0) -> NoiseIncrement:
        return cls(np.zeros(grid.shape), np.zeros((K, K, K)), dt)

    def __add__(self, other: NoiseIncrement) -> NoiseIncrement:
        return NoiseIncrement(self.field + other.field, self.coeffs + other.coeffs, self.dt + other.dt)


@dataclass
class BrownianLattice:
    """Per-mode Brownian increments on the finest dyadic time level.

    ``fine`` has shape ``(K**3, N_fine)`` with modes in lexicographic order.
    """

    seed: int
    sample_id: int
    K: int
    T: float
    fine: np.ndarray
    _levels: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def N_fine(self) -> int:
        return self.fine.shape[1]

    @property
    def tau_fine(self) -> float:
        return self.T / self.N_fine

    def level(self, steps: int) -> np.ndarray:
        """Increments for ``steps`` equal intervals, shape ``(K**3, steps)``."""
        N = self.N_fine
        if steps < 1 or N % steps or (N // steps) & (N // steps - 1):
            raise IndexError(f"{steps} steps is not a dyadic coarsening of {N}")
        if steps == N:
            return self.fine
        out = self._levels.get(steps)
        if out is None:
            child = self.level(2 * steps)
            out = child[:, 0::2] + child[:, 1::2]
            out.setflags(write=False)
            self._levels[steps] = out
        return out

    def coefficients(self, steps: int, n: int, spec: NoiseSpec) -> np.ndarray:
        """``sqrt(q_k) dB_k`` for interval ``n`` (0-based) of a ``steps`` ladder."""
        lvl = self.level(steps)
        if not 0 <= n < steps:
            raise IndexError(f"interval {n} outside 0..{steps - 1}")
        K = self.K
        return np.sqrt(spec.eigenvalues) * lvl[:, n].reshape(K, K, K)

    def dump(self, path) -> None:
        """Write a little-endian binary copy of the lattice."""
        with open(path, "wb") as fh:
            fh.write(_DUMP_MAGIC)
            fh.write(struct.pack("<QQQQd", self.seed, self.sample_id, self.K, self.N_fine, self.T))
            fh.write(np.ascontiguousarray(self.fine, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> BrownianLattice:
        raw = Path(path).read_bytes()
        buf = io.BytesIO(raw)
        if buf.read(len(_DUMP_MAGIC)) != _DUMP_MAGIC:
            raise ValueError(f"{path} is not a lattice dump")
        seed, sample_id, K, N, T = struct.unpack("<QQQQd", buf.read(40))
        data = np.frombuffer(buf.read(), dtype="<f8")
        if data.size != K**3 * N:
            raise ValueError(f"{path} is truncated")
        return cls(seed, sample_id, K, T, data.reshape(K**3, N).astype(float))


def sample_lattice(spec: NoiseSpec, sample_id: int, T: float, N_fine: int) -> BrownianLattice:
    """Draw the fine Brownian increments of one Monte Carlo sample.

    Each mode owns a Philox stream keyed by ``(seed, sample_id, mode)``; the
    stream position is the time index.  The lattice is a pure function of
    its arguments.
    """
    if int(sample_id) != sample_id or not 0 <= sample_id < _U64:
        raise ConfigurationError(f"sample_id must fit in 64 unsigned bits, got {sample_id!r}")
    if int(N_fine) != N_fine or not 1 <= N_fine < _MAX_FINE:
        raise ConfigurationError(f"N_fine must be in [1, 2**40), got {N_fine!r}")
    if not (np.isfinite(T) and T > 0):
        raise ConfigurationError(f"T must be positive, got {T!r}")
    scale = np.sqrt(T / N_fine)
    fine = np.empty((spec.n_modes, int(N_fine)))
    for m in range(spec.n_modes):
        ss = np.random.SeedSequence([int(spec.seed), int(sample_id), m])
        fine[m] = np.random.Generator(np.random.Philox(ss)).standard_normal(int(N_fine))
    fine *= scale
    fine.setflags(write=False)
    return BrownianLattice(int(spec.seed), int(sample_id), spec.K, float(T), fine)


def increment_field(
    lattice: BrownianLattice, basis: ModeBasis, spec: NoiseSpec, steps: int, n: int
) -> NoiseIncrement:
    """Noise increment over interval ``n`` of a ``steps``-interval ladder."""
    if basis.K != lattice.K:
        raise ConfigurationError("basis and lattice disagree on K")
    coeffs = lattice.coefficients(steps, n, spec)
    return NoiseIncrement(basis.synthesize(coeffs), coeffs, lattice.T / steps)


def grad_increment_field(increment: NoiseIncrement, basis: ModeBasis):
    """Analytic spatial gradient of an increment as three nodal arrays."""
    return basis.synthesize_gradient(increment.coeffs)
