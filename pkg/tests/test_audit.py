import numpy as np
import pytest
import scipy.linalg

from conftest import random_state
from splitmax.audit import (
    CanonicalForm,
    DenseOperator,
    assemble_dense,
    curl_form,
    dense_propagator,
    multisymplectic_matrices,
    noise_vector,
    oracle_mild_step,
    run_audit,
    skew_defect,
    spectral_vs_dense,
    symplectic_defect,
)
from splitmax.errors import ConfigurationError, DimensionError
from splitmax.grid import Cuboid, GridSpec, StateZ, discrete_curl_alpha, flatten, unflatten
from splitmax.noise import ModeBasis, NoiseIncrement, NoiseSpec
from splitmax.presets import smooth_bump
from splitmax.stepper import StepperConfig, one_step


@pytest.fixture(scope="module")
def tiny():
    g = GridSpec(Cuboid(0, 1.0, 0, 1.2, 0, 0.9), 4, 4, 4)
    mats = {a: assemble_dense(a, g) for a in range(3)}
    return g, mats, assemble_dense(None, g)


def test_dense_matches_matrix_free(tiny, rng):
    g, mats, _ = tiny
    for _ in range(50):
        z = random_state(g, rng, consistent=False)
        a = int(rng.integers(3))
        assert np.abs(mats[a] @ flatten(z) - flatten(discrete_curl_alpha(z, a))).max() <= 1e-12


def test_full_operator_is_sum(tiny):
    _, mats, M = tiny
    assert np.array_equal(M.matrix, mats[0].matrix + mats[1].matrix + mats[2].matrix)


def test_weighted_skew_adjointness(tiny):
    g, mats, M = tiny
    for A in (M, *mats.values()):
        assert skew_defect(A, g) <= 1e-10


def test_sign_bug_is_detected(tiny):
    g = tiny[0]

    def buggy(state, axis):
        out = discrete_curl_alpha(state, axis)
        if axis == 1:
            out.data[2] *= -1.0  # wrong sign on the E3 slot of curl_y
        return out

    A = assemble_dense(1, g, curl_alpha=buggy)
    assert skew_defect(A, g) > 1e-3
    lines = run_audit(g, curl_alpha=buggy)
    failed = {ln.tag for ln in lines if not ln.passed}
    assert "skew-adjoint M_y" in failed and "skew-adjoint M" in failed


def test_propagator_at_zero_is_identity(tiny):
    _, mats, _ = tiny
    for scheme in ("exact", "ie", "mp"):
        assert np.array_equal(dense_propagator(mats[0], scheme, 0.0).matrix, np.eye(mats[0].dim))


def test_cayley_inverse(tiny):
    _, mats, _ = tiny
    P = dense_propagator(mats[2], "mp", 0.3).matrix
    Q = dense_propagator(mats[2], "mp", -0.3).matrix
    assert np.abs(P @ Q - np.eye(P.shape[0])).max() <= 1e-10


def test_shift_filter_only_for_midpoint(tiny):
    with pytest.raises(ValueError):
        dense_propagator(tiny[1][0], "ie", 0.1, shift_filter=True)


@pytest.mark.parametrize("axis", [0, 1, 2])
def test_spectral_flow_equals_expm(tiny, axis):
    g, mats, _ = tiny
    assert spectral_vs_dense(g, axis, 0.37, mats[axis]) <= 1e-8


def test_spectral_flow_equals_expm_refined_line():
    g = GridSpec(Cuboid(0, 1.3, 0, 1, 0, 1), 6, 4, 4)  # 1050 coordinates, over the cap
    g_small = GridSpec(Cuboid(0, 1.3, 0, 1, 0, 1), 5, 4, 4)
    with pytest.raises(ConfigurationError):
        assemble_dense(0, g)
    assert spectral_vs_dense(g_small, 0, 0.21) <= 1e-8


def test_symplectic_defect_identity(tiny):
    g = tiny[0]
    J = CanonicalForm.for_grid(g)
    assert symplectic_defect(DenseOperator(np.eye(g.state_dim), "Id"), J) == 0.0


def test_canonical_form_properties(tiny):
    g = tiny[0]
    J = CanonicalForm.for_grid(g)
    assert np.array_equal(J.J, -J.J.T)
    W2 = np.diag(np.concatenate([J.weights, J.weights]) ** 2)
    assert np.allclose(J.J @ J.J, -W2, rtol=0, atol=1e-18)


def test_symplectic_defect_shape_mismatch(tiny):
    with pytest.raises(DimensionError):
        symplectic_defect(DenseOperator(np.eye(3), "I3"), np.zeros((4, 4)))


def test_implicit_euler_is_not_symplectic(tiny):
    g, mats, _ = tiny
    J = CanonicalForm.for_grid(g)
    for A in mats.values():
        assert symplectic_defect(dense_propagator(A, "ie", 0.1), J) >= 1e-3


@pytest.mark.parametrize("scheme", ["exact", "mp"])
def test_curl_weighted_form_is_preserved(tiny, scheme):
    g, mats, _ = tiny
    for A in mats.values():
        Omega = curl_form(A, g)
        assert symplectic_defect(dense_propagator(A, scheme, 0.1), Omega) <= 1e-10


def test_curl_weighted_form_broken_by_implicit_euler(tiny):
    g, mats, _ = tiny
    Omega = curl_form(mats[0], g)
    assert symplectic_defect(dense_propagator(mats[0], "ie", 0.1), Omega) > 1e-4


def test_spectra(tiny):
    _, mats, _ = tiny
    for A in mats.values():
        for scheme in ("exact", "mp"):
            ev = np.linalg.eigvals(dense_propagator(A, scheme, 0.2).matrix)
            assert np.abs(np.abs(ev) - 1).max() <= 1e-8
        ev = np.abs(np.linalg.eigvals(dense_propagator(A, "ie", 0.2).matrix))
        assert ev.max() <= 1 + 1e-12


def test_multisymplectic_matrices_are_skew():
    mats = multisymplectic_matrices()
    assert set(mats) == {"F", "K_1", "K_2", "K_3"}
    for X in mats.values():
        assert np.array_equal(X + X.T, np.zeros((6, 6)))


def test_oracle_noise_free_is_expm(tiny, rng):
    g, _, M = tiny
    z = random_state(g, rng)
    ref = scipy.linalg.expm(0.2 * M.matrix) @ flatten(z)
    assert np.allclose(oracle_mild_step(z, 0.2, [], NoiseSpec(K=1), M), ref, atol=1e-13)


def test_oracle_small_tau_limit(tiny, rng):
    g, _, M = tiny
    spec = NoiseSpec(lambda1=(1, 2, 3), lambda2=(-1, 0.5, 0), K=2)
    field = ModeBasis(g, 2).mode(1, 2, 1)
    incs = [field * 0.01] * 64
    z = random_state(g, rng)
    tau = 1e-7
    out = oracle_mild_step(z, tau, incs, spec, M)
    ref = flatten(z) + noise_vector(g, spec, field * 0.64)
    assert np.abs(out - ref).max() <= 1e-5


def test_oracle_quadrature_converges_and_matches_split_placement(tiny):
    g, _, M = tiny
    spec = NoiseSpec(lambda1=(1.0, 0.0, 0.0), lambda2=(0.0, 0.0, 0.0), K=2)
    field = ModeBasis(g, 2).mode(1, 1, 1)
    tau = 0.05
    z0 = StateZ.zeros(g)
    # constant-rate increments: dW_r = field * tau / R
    outs = {R: oracle_mild_step(z0, tau, [field * (tau / R)] * R, spec, M) for R in (64, 128, 256)}
    d1 = np.abs(outs[64] - outs[128]).max()
    d2 = np.abs(outs[128] - outs[256]).max()
    assert d2 < 0.6 * d1
    inc = NoiseIncrement(field * tau, np.zeros((2, 2, 2)), tau)
    split = one_step(z0, StepperConfig("exact", (1, 2, 3), tau, 1), inc, spec)
    # splitting puts the noise at the left end of the step: O(tau) agreement
    assert np.abs(flatten(split) - outs[256]).max() <= 2 * tau * np.abs(noise_vector(g, spec, field * tau)).max() * 10


def test_one_step_defect_ratio(tiny):
    g, _, M = tiny
    z = smooth_bump(g)
    spec = NoiseSpec(lambda1=(0, 0, 0), lambda2=(0, 0, 0), K=1)
    zero = NoiseIncrement.zero(g, 1)
    defects = []
    for tau in 0.04 * 2.0 ** -np.arange(4):
        split = flatten(one_step(z, StepperConfig("exact", (1, 2, 3), tau, 1), zero, spec))
        defects.append(np.abs(split - oracle_mild_step(z, tau, [], spec, M)).max())
    ratios = [a / b for a, b in zip(defects, defects[1:])]
    assert all(3.0 <= r <= 5.0 for r in ratios)


def test_dimension_cap():
    with pytest.raises(ConfigurationError):
        run_audit(GridSpec.cube(5))


def test_audit_report_lines(tiny):
    lines = run_audit(tiny[0])
    tags = [ln.tag for ln in lines]
    assert "skew-adjoint M" in tags
    assert any(t.startswith("symplectic-J IE") for t in tags)
    assert all(ln.format().count("defect=") == 1 for ln in lines)
