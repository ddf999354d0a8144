"""Monte Carlo error, energy and divergence studies on coupled Brownian paths."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateFitError, StatisticsError
from .grid import GridSpec, StateZ, discrete_div, inner_l2, scalar_norm_l2
from .noise import BrownianLattice, ModeBasis, NoiseSpec, increment_field, sample_lattice, trace_q
from .stepper import SplitOrder, StepperConfig, Trajectory, run_trajectory
from .subflows import SchemeKind, sub_flow

CONFIDENCE = 4.0
MIN_SAMPLES = 8


def _pairwise_sum(x: np.ndarray) -> float:
    """Sum by a balanced binary tree over the given order."""
    vals = [float(v) for v in x]
    if not vals:
        return 0.0
    while len(vals) > 1:
        nxt = [vals[i] + vals[i + 1] for i in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return vals[0]


def mc_aggregate(values) -> tuple[float, float]:
    """Sample mean and standard error ``sqrt(var/M)`` (unbiased variance).

    Values are sorted before a pairwise summation so the result does not
    depend on the order in which samples arrive.
    """
    x = np.sort(np.asarray(values, dtype=float).ravel())
    M = x.size
    if M < 2:
        raise StatisticsError(f"need at least 2 samples, got {M}")
    # shifted sums: exact zero spread for equal inputs, less cancellation
    shift = x[M // 2]
    d = x - shift
    dmean = _pairwise_sum(d) / M
    dev = np.sort((d - dmean) ** 2)
    var = _pairwise_sum(dev) / (M - 1)
    return float(shift + dmean), float(np.sqrt(var / M))


def fit_order(taus, ms_errors) -> tuple[float, float]:
    """Least-squares slope of ``log sqrt(ms_error)`` against ``log tau``.

    Returns ``(p, residual)`` with the residual the largest absolute
    deviation of a point from the fitted line.
    """
    t = np.asarray(taus, dtype=float)
    e = np.asarray(ms_errors, dtype=float)
    if t.size != e.size or t.size < 3:
        raise DegenerateFitError(f"need at least 3 points for an order fit, got {t.size}")
    if np.any(~np.isfinite(e)) or np.any(e <= 0) or np.any(t <= 0):
        raise DegenerateFitError("order fit needs positive finite errors and step sizes")
    x = np.log(t)
    y = 0.5 * np.log(e)
    A = np.vstack([x, np.ones_like(x)]).T
    (p, c), *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(p), float(np.abs(y - (p * x + c)).max())


def parallel_map(fn, items, workers: int = 1) -> list:
    """Ordered map, in-process for one worker and over processes otherwise."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def default_workers() -> int:
    env = os.environ.get("SPLITMAX_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigurationError(f"SPLITMAX_WORKERS must be an integer, got {env!r}") from None
    return 1


@dataclass(frozen=True)
class CoupledSetup:
    """Everything shared by the samples of one study."""

    grid: GridSpec
    spec: NoiseSpec
    z0: np.ndarray
    T: float
    order: SplitOrder = field(default_factory=SplitOrder)

    @classmethod
    def build(cls, grid: GridSpec, spec: NoiseSpec, z0: StateZ, T: float, order=(1, 2, 3)) -> CoupledSetup:
        if z0.grid != grid:
            raise ConfigurationError("initial state lives on a different grid")
        if not z0.is_boundary_consistent():
            raise ConfigurationError("initial state violates the PEC traces")
        if not (np.isfinite(T) and T > 0):
            raise ConfigurationError(f"T must be positive, got {T!r}")
        return cls(grid, spec, z0.data.copy(), float(T), SplitOrder.parse(order))

    @property
    def initial(self) -> StateZ:
        return StateZ(self.grid, self.z0)

    @property
    def noise_free(self) -> bool:
        return self.spec.lambda_sq == 0.0

    def basis(self) -> ModeBasis:
        return ModeBasis(self.grid, self.spec.K)

    def lattice(self, sample_id: int, N_fine: int) -> BrownianLattice:
        return sample_lattice(self.spec, sample_id, self.T, N_fine)

    def run(self, scheme, steps: int, lattice, basis=None, **kw) -> Trajectory:
        cfg = StepperConfig(scheme, self.order, self.T / steps, steps)
        lat = None if self.noise_free else lattice
        return run_trajectory(self.initial, cfg, lat, self.spec, basis, **kw)


def _check_ladder(T: float, taus, tau_ref: float) -> tuple[list[int], int]:
    steps = []
    for tau in taus:
        n = T / tau
        if abs(n - round(n)) > 1e-9 * n:
            raise ConfigurationError(f"tau={tau} does not divide T={T}")
        steps.append(int(round(n)))
    n_ref = T / tau_ref
    if abs(n_ref - round(n_ref)) > 1e-9 * n_ref:
        raise ConfigurationError(f"tau_ref={tau_ref} does not divide T={T}")
    n_ref = int(round(n_ref))
    for n in steps:
        q = n_ref // n
        if n_ref % n or q & (q - 1):
            raise ConfigurationError(f"tau_ref must divide every tau dyadically (got {n} vs {n_ref} steps)")
    return steps, n_ref


def _error_task(args):
    setup, sample_id, schemes, steps, n_ref = args
    basis = setup.basis()
    lattice = setup.lattice(sample_id, n_ref)
    stride = n_ref // max(steps)
    ref = setup.run(SchemeKind.EXACT, n_ref, lattice, basis, record_every=stride)
    out = {}
    for scheme in schemes:
        per_tau = []
        for n in steps:
            traj = setup.run(scheme, n, lattice, basis, record_every=1)
            k = n_ref // n
            errs = np.empty(n + 1)
            for i, z in enumerate(traj.snapshots):
                d = ref.snapshot_at(i * k).data - z.data
                errs[i] = np.einsum("cijk,cijk,ijk->", d, d, setup.grid.weights)
            per_tau.append(errs)
        out[scheme.value] = per_tau
    return out


@dataclass
class ConvergenceReport:
    scheme: SchemeKind
    taus: np.ndarray
    ms_error: np.ndarray
    stderr: np.ndarray
    order: float
    residual: float
    samples: int

    @property
    def passed(self) -> bool:
        return 0.85 <= self.order <= 1.15

    def rows(self):
        for t, e, s in zip(self.taus, self.ms_error, self.stderr):
            yield float(t), float(e), float(s), self.order


def _reduce_errors(per_sample: list[np.ndarray]) -> tuple[float, float]:
    """Max over time of the sample mean, with the stderr at the maximiser."""
    stacked = np.vstack(per_sample)
    best = (-1.0, 0.0)
    for col in stacked.T:
        mean, se = mc_aggregate(col)
        if mean > best[0]:
            best = (mean, se)
    return best


def convergence_study(
    setup: CoupledSetup,
    schemes,
    taus,
    tau_ref: float,
    samples: int,
    workers: int = 1,
) -> dict[SchemeKind, ConvergenceReport]:
    """Coupled-path mean-square errors against an Exact fine reference."""
    if samples < MIN_SAMPLES:
        raise StatisticsError(f"need at least {MIN_SAMPLES} samples, got {samples}")
    schemes = [SchemeKind.parse(s) for s in ([schemes] if isinstance(schemes, (str, SchemeKind)) else schemes)]
    taus = [float(t) for t in taus]
    if any(b >= a for a, b in zip(taus, taus[1:])):
        raise ConfigurationError("tau ladder must be strictly decreasing")
    steps, n_ref = _check_ladder(setup.T, taus, tau_ref)
    tasks = [(setup, m, schemes, steps, n_ref) for m in range(samples)]
    results = parallel_map(_error_task, tasks, workers)
    reports = {}
    for scheme in schemes:
        ms, se = [], []
        for i in range(len(steps)):
            mean, err = _reduce_errors([r[scheme.value][i] for r in results])
            ms.append(mean)
            se.append(err)
        p, res = fit_order(taus, ms)
        reports[scheme] = ConvergenceReport(scheme, np.array(taus), np.array(ms), np.array(se), p, res, samples)
    return reports


def ms_error(scheme, tau: float, tau_ref: float, M: int, setup: CoupledSetup, workers: int = 1):
    """``(max_n E||Z_ref(t_n) - Z(t_n)||^2, stderr)`` for one step size."""
    if M < MIN_SAMPLES:
        raise StatisticsError(f"need at least {MIN_SAMPLES} samples, got {M}")
    scheme = SchemeKind.parse(scheme)
    steps, n_ref = _check_ladder(setup.T, [tau], tau_ref)
    tasks = [(setup, m, [scheme], steps, n_ref) for m in range(M)]
    results = parallel_map(_error_task, tasks, workers)
    return _reduce_errors([r[scheme.value][0] for r in results])


@dataclass
class EnergySeries:
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    predicted: np.ndarray

    def offending(self, factor: float = CONFIDENCE, rtol: float = 1e-12) -> list[int]:
        """Indices whose mean falls outside ``factor`` standard errors.

        ``rtol`` absorbs round-off when the spread is exactly zero.
        """
        band = factor * self.stderr + rtol * np.abs(self.predicted)
        return [int(i) for i in np.flatnonzero(np.abs(self.mean - self.predicted) > band)]

    @property
    def passed(self) -> bool:
        return not self.offending()


def _energy_task(args):
    setup, sample_id, scheme, steps = args
    lattice = None if setup.noise_free else setup.lattice(sample_id, steps)
    traj = setup.run(scheme, steps, lattice, record_energy=True)
    return traj.energy


def predicted_energy(setup: CoupledSetup, times) -> np.ndarray:
    z0 = setup.initial
    return inner_l2(z0, z0) + np.asarray(times) * setup.spec.lambda_sq * trace_q(setup.spec)


def energy_series(
    setup: CoupledSetup, steps: int, samples: int, scheme=SchemeKind.EXACT, workers: int = 1
) -> EnergySeries:
    """Monte Carlo mean of ``||Z(t_n)||^2`` with the linear-growth prediction."""
    if samples < 2:
        raise StatisticsError(f"need at least 2 samples, got {samples}")
    tasks = [(setup, m, SchemeKind.parse(scheme), steps) for m in range(samples)]
    energies = np.vstack(parallel_map(_energy_task, tasks, workers))
    times = np.arange(steps + 1) * (setup.T / steps)
    agg = [mc_aggregate(col) for col in energies.T]
    return EnergySeries(
        times,
        np.array([a[0] for a in agg]),
        np.array([a[1] for a in agg]),
        predicted_energy(setup, times),
    )


def _subflow_task(args):
    setup, j, tau, sample_id = args
    lattice = sample_lattice(setup.spec, sample_id, tau, 1)
    basis = setup.basis()
    inc = increment_field(lattice, basis, setup.spec, 1, 0)
    z0 = setup.initial
    z = sub_flow(z0, j, SchemeKind.EXACT, tau, inc, setup.spec)
    return inner_l2(z, z) - inner_l2(z0, z0)


def subflow_energy(setup: CoupledSetup, j: int, tau: float, samples: int, workers: int = 1):
    """``(mean, stderr, predicted)`` energy gain of one Exact sub-flow step."""
    vals = parallel_map(_subflow_task, [(setup, j, tau, m) for m in range(samples)], workers)
    mean, se = mc_aggregate(vals)
    return mean, se, tau * setup.spec.lambda_stage_sq(j) * trace_q(setup.spec)


def divergence_residual(
    traj: Trajectory,
    z0: StateZ,
    spec: NoiseSpec,
    lattice: BrownianLattice | None,
    basis: ModeBasis | None = None,
    steps: int | None = None,
) -> np.ndarray:
    """``||div E(t_n) - div E_0 - lambda1 . grad W(t_n)||`` at each snapshot.

    ``W(t_n)`` is rebuilt from the lattice increments of a ``steps``-interval
    ladder; ``lattice=None`` means no noise.
    """
    grid = z0.grid
    d0 = discrete_div(z0.E, grid)
    if lattice is not None:
        steps = steps or (len(traj.times) - 1)
        basis = basis or ModeBasis(grid, lattice.K)
        lvl = lattice.level(steps)
        if lvl.shape[1] != len(traj.times) - 1:
            raise ConfigurationError("lattice ladder does not match the trajectory")
        cum = np.concatenate([np.zeros((lvl.shape[0], 1)), np.cumsum(lvl, axis=1)], axis=1)
        sq = np.sqrt(spec.eigenvalues)
    out = np.empty(len(traj.snapshots))
    for i, (n, z) in enumerate(zip(traj.snapshot_steps, traj.snapshots)):
        r = discrete_div(z.E, grid) - d0
        if lattice is not None and n:
            g = basis.synthesize_gradient(sq * cum[:, n].reshape(sq.shape))
            r = r - sum(l * gi for l, gi in zip(spec.lambda1, g))
        out[i] = 0.0 if n == 0 else scalar_norm_l2(r, grid)
    return out


@dataclass
class DivergenceSeries:
    times: np.ndarray
    coarse: np.ndarray
    fine: np.ndarray

    @property
    def final_ratio(self) -> float:
        return float(self.coarse[-1] / self.fine[-1]) if self.fine[-1] > 0 else float("inf")

    @property
    def passed(self) -> bool:
        return self.final_ratio >= 1.7


def _divergence_task(args):
    setup, sample_id, scheme, steps = args
    basis = setup.basis()
    lattice = None if setup.noise_free else setup.lattice(sample_id, 2 * steps)
    out = []
    for n in (steps, 2 * steps):
        traj = setup.run(scheme, n, lattice, basis, record_every=n // steps)
        out.append(divergence_residual(traj, setup.initial, setup.spec, lattice, basis, n))
    return out


def divergence_study(
    setup: CoupledSetup, tau: float, samples: int = 1, scheme=SchemeKind.EXACT, workers: int = 1
) -> DivergenceSeries:
    """Divergence-law residual at ``tau`` and ``tau/2`` on coarse times.

    With noise the residuals are averaged over samples.
    """
    (steps,), _ = _check_ladder(setup.T, [tau], tau / 2)
    count = 1 if setup.noise_free else samples
    results = parallel_map(
        _divergence_task, [(setup, m, SchemeKind.parse(scheme), steps) for m in range(count)], workers
    )
    coarse = np.vstack([r[0] for r in results])
    fine = np.vstack([r[1] for r in results])
    if count > 1:
        coarse = np.array([mc_aggregate(c)[0] for c in coarse.T])
        fine = np.array([mc_aggregate(c)[0] for c in fine.T])
    else:
        coarse, fine = coarse[0], fine[0]
    return DivergenceSeries(np.arange(steps + 1) * tau, coarse, fine)
