import numpy as np
import pytest

from splitmax.errors import ConfigurationError
from splitmax.grid import Cuboid, GridSpec, StateZ, discrete_div, inner_l2
from splitmax.noise import (
    BrownianLattice,
    ModeBasis,
    NoiseSpec,
    grad_increment_field,
    increment_field,
    sample_lattice,
    trace_q,
)


def scalar_state(grid, f, comp=0):
    data = np.zeros((6,) + grid.shape)
    data[comp] = f
    return StateZ(grid, data)


@pytest.mark.parametrize("r", [0.0, 0.5, 3.0])
def test_trace_single_mode(r):
    assert trace_q(NoiseSpec(K=1, decay_r=r)) == pytest.approx(3.0**-r, rel=1e-15)


def test_trace_eight_unit_modes():
    assert trace_q(NoiseSpec(K=2, decay_r=0.0)) == 8.0


def test_trace_against_double_loop():
    total = 0.0
    for k1 in range(1, 5):
        for k2 in range(1, 5):
            for k3 in range(1, 5):
                total += (k1 * k1 + k2 * k2 + k3 * k3) ** -2.0
    assert trace_q(NoiseSpec(K=4, decay_r=2.0)) == pytest.approx(total, rel=1e-14)


def test_trace_monotonicity():
    ts = [trace_q(NoiseSpec(K=K, decay_r=1.5)) for K in range(1, 6)]
    assert all(b >= a for a, b in zip(ts, ts[1:]))
    rs = [trace_q(NoiseSpec(K=3, decay_r=r)) for r in (0.0, 0.5, 1.0, 2.0, 4.0)]
    assert all(b <= a for a, b in zip(rs, rs[1:]))


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        NoiseSpec(K=0)
    with pytest.raises(ConfigurationError):
        NoiseSpec(decay_r=-1.0)
    with pytest.raises(ConfigurationError):
        NoiseSpec(lambda1=(1.0, 2.0))
    with pytest.raises(ConfigurationError):
        NoiseSpec(seed=2**64)


def test_lambda_sq_and_stages():
    spec = NoiseSpec(lambda1=(1, 2, 3), lambda2=(0, 1, 0))
    assert spec.lambda_sq == 15.0
    assert spec.lambda_stage(2) == (2.0, 1.0)
    assert spec.lambda_stage_sq(3) == 9.0


def test_mode_index_lexicographic():
    spec = NoiseSpec(K=4)
    assert spec.mode_index(1, 1, 1) == 0
    assert spec.mode_index(1, 1, 2) == 1
    assert spec.mode_index(2, 1, 1) == 16
    assert spec.mode_index(4, 4, 4) == 63


def test_lattice_is_deterministic():
    spec = NoiseSpec(K=2, seed=7)
    a = sample_lattice(spec, 3, 1.0, 32)
    b = sample_lattice(spec, 3, 1.0, 32)
    assert np.array_equal(a.fine, b.fine)
    c = sample_lattice(spec, 4, 1.0, 32)
    assert not np.array_equal(a.fine, c.fine)


def test_lattice_counter_space_limits():
    spec = NoiseSpec(K=1)
    with pytest.raises(ConfigurationError):
        sample_lattice(spec, 2**64, 1.0, 8)
    with pytest.raises(ConfigurationError):
        sample_lattice(spec, -1, 1.0, 8)
    with pytest.raises(ConfigurationError):
        sample_lattice(spec, 0, 1.0, 2**40)


def test_lattice_statistics():
    spec = NoiseSpec(K=2, seed=99)
    M, N, T = 10_000, 4, 0.5
    tau = T / N
    firsts = np.array([sample_lattice(spec, m, T, N).fine[:, 0] for m in range(M)])
    mean = firsts.mean(axis=0)
    var = firsts.var(axis=0, ddof=1)
    assert np.all(np.abs(mean) <= 4 * np.sqrt(tau / M))
    assert np.all(np.abs(var / tau - 1) <= 0.05)
    # consecutive sample ids are uncorrelated
    corr = np.corrcoef(firsts[:-1, 0], firsts[1:, 0])[0, 1]
    assert abs(corr) <= 0.05


def test_dyadic_children_sum_to_parent_bitwise():
    lat = sample_lattice(NoiseSpec(K=3, seed=1), 0, 1.0, 64)
    for steps in (32, 16, 8, 4, 2, 1):
        parent = lat.level(steps)
        child = lat.level(2 * steps)
        assert np.array_equal(parent, child[:, 0::2] + child[:, 1::2])
    assert lat.level(1)[:, 0] == pytest.approx(lat.fine.sum(axis=1), rel=1e-12, abs=1e-14)


def test_misaligned_interval():
    lat = sample_lattice(NoiseSpec(K=1), 0, 1.0, 16)
    with pytest.raises(IndexError):
        lat.level(3)
    with pytest.raises(IndexError):
        lat.coefficients(4, 4, NoiseSpec(K=1))


def test_zero_lattice_gives_zero_field():
    g = GridSpec.cube(6)
    spec = NoiseSpec(K=2)
    lat = BrownianLattice(0, 0, 2, 1.0, np.zeros((8, 4)))
    inc = increment_field(lat, ModeBasis(g, 2), spec, 4, 1)
    assert not inc.field.any()
    assert not any(gi.any() for gi in grad_increment_field(inc, ModeBasis(g, 2)))


def test_single_mode_field():
    g = GridSpec(Cuboid(0, 2, 0, 1, 0, 1.5), 8, 6, 7)
    spec = NoiseSpec(K=2, decay_r=1.0)
    fine = np.zeros((8, 1))
    fine[spec.mode_index(1, 1, 1), 0] = 1.0
    lat = BrownianLattice(0, 0, 2, 1.0, fine)
    inc = increment_field(lat, ModeBasis(g, 2), spec, 1, 0)
    X, Y, Z = g.local_mesh()
    e = np.sqrt(8 / g.cuboid.volume) * np.sin(np.pi * X / 2) * np.sin(np.pi * Y) * np.sin(np.pi * Z / 1.5)
    assert np.allclose(inc.field, np.sqrt(3.0**-1) * e, atol=1e-14)


def test_single_mode_gradient():
    g = GridSpec(Cuboid(0, 2, 0, 1, 0, 1.5), 8, 6, 7)
    spec = NoiseSpec(K=3, decay_r=0.5)
    k = (2, 1, 3)
    fine = np.zeros((27, 1))
    fine[spec.mode_index(*k), 0] = 0.7
    lat = BrownianLattice(0, 0, 3, 1.0, fine)
    basis = ModeBasis(g, 3)
    inc = increment_field(lat, basis, spec, 1, 0)
    gx, _, _ = grad_increment_field(inc, basis)
    X, Y, Z = g.local_mesh()
    q = 14.0**-0.5
    L = g.lengths
    ref = (np.sqrt(q) * np.sqrt(8 / g.cuboid.volume) * (2 * np.pi / L[0]) * np.cos(2 * np.pi * X / L[0])
           * np.sin(np.pi * Y / L[1]) * np.sin(3 * np.pi * Z / L[2]) * 0.7)
    assert np.allclose(gx, ref, atol=1e-12)


def test_increment_vanishes_on_faces():
    g = GridSpec.cube(8)
    spec = NoiseSpec(K=4, decay_r=0.0)
    lat = sample_lattice(spec, 0, 1.0, 2)
    f = increment_field(lat, ModeBasis(g, 4), spec, 2, 1).field
    for axis in range(3):
        for end in (0, -1):
            assert not np.take(f, end, axis=axis).any()


def test_discrete_orthonormality():
    g = GridSpec(Cuboid(0, 1, 0, 2, 0, 1.3), 12, 12, 16)
    basis = ModeBasis(g, 3)
    modes = [(a, b, c) for a in range(1, 4) for b in range(1, 4) for c in range(1, 4)]
    fields = {k: scalar_state(g, basis.mode(*k)) for k in modes}
    for k in modes:
        for m in modes:
            assert abs(inner_l2(fields[k], fields[m]) - (k == m)) <= 1e-8


def test_basis_needs_resolution():
    with pytest.raises(ConfigurationError):
        ModeBasis(GridSpec.cube(4), 4)


def test_increment_projection_variance():
    g = GridSpec.cube(6)
    spec = NoiseSpec(K=2, decay_r=1.0, seed=5)
    basis = ModeBasis(g, 2)
    M, T = 4000, 0.25
    m_idx = (1, 2, 1)
    e = scalar_state(g, basis.mode(*m_idx))
    proj = np.array([
        inner_l2(scalar_state(g, increment_field(sample_lattice(spec, s, T, 1), basis, spec, 1, 0).field), e)
        for s in range(M)
    ])
    q = 6.0**-1.0
    assert abs(proj.mean()) <= 4 * np.sqrt(q * T / M)
    # variance of a sample variance is about 2 sigma^4 / M
    assert abs(proj.var(ddof=1) - q * T) <= 4 * q * T * np.sqrt(2 / M)


def _div_mismatch(n):
    g = GridSpec.cube(n)
    spec = NoiseSpec(lambda1=(1.0, -0.5, 2.0), K=3, decay_r=1.0)
    basis = ModeBasis(g, 3)
    inc = increment_field(sample_lattice(spec, 0, 1.0, 1), basis, spec, 1, 0)
    vec = [l * inc.field for l in spec.lambda1]
    grads = grad_increment_field(inc, basis)
    analytic = sum(l * gi for l, gi in zip(spec.lambda1, grads))
    return np.abs(discrete_div(vec, g) - analytic).max()


def test_stencil_divergence_matches_analytic_gradient():
    e1, e2 = _div_mismatch(16), _div_mismatch(32)
    assert e2 < e1 / 3.5


def test_dump_roundtrip(tmp_path):
    lat = sample_lattice(NoiseSpec(K=2, seed=11), 5, 0.75, 16)
    path = tmp_path / "lat.bin"
    lat.dump(path)
    back = BrownianLattice.load(path)
    assert (back.seed, back.sample_id, back.K, back.T) == (11, 5, 2, 0.75)
    assert np.array_equal(back.fine, lat.fine)
    raw = path.read_bytes()
    assert raw[:8] == b"SMXLAT01"
    assert np.frombuffer(raw[48:56], "<f8")[0] == lat.fine[0, 0]
