import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import _oracles as orc
from qate import exact_diag as ed
from qate import spectral, tfim_blocks as tb
from qate.errors import ConfigurationError, DomainError, ResourceError
from qate.protocol import HamiltonianSpec, QateConfig


def mixed(N, J, h, g):
    return HamiltonianSpec("mixed_field_ising", N, J, g, h)


def random_state(dim, seed, rank=None):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(dim, rank or dim)) + 1j * rng.normal(size=(dim, rank or dim))
    rho = m @ m.conj().T
    return rho / np.trace(rho).real


def test_bond_hamiltonian_example():
    H = ed.build_hamiltonian(mixed(2, 1.0, 0.0, 0.0)).mat
    np.testing.assert_array_equal(H, np.diag([1.0, -1.0, -1.0, 1.0]))


@pytest.mark.parametrize("N,J,h,g", [(3, 1.0, 0.0, 1.05), (4, 1.0, 0.5, 1.05), (5, 0.7, -0.3, 0.2)])
def test_mixed_field_matches_kron_oracle(N, J, h, g):
    np.testing.assert_allclose(ed.build_hamiltonian(mixed(N, J, h, g)).mat, orc.mixed_field(N, J, h, g), atol=0)


@pytest.mark.parametrize("N,g", [(2, 0.4), (4, 1.5), (6, 1.1)])
def test_tfim_parity_matches_pauli_product(N, g):
    np.testing.assert_allclose(ed.build_hamiltonian(HamiltonianSpec("tfim_ti", N, g=g)).mat, orc.tfim_parity(N, g),
                               atol=1e-14)


def test_z_field_matches_kron_oracle():
    eps = tb.isospectral_energies(1.5, 4)
    H = ed.build_hamiltonian(HamiltonianSpec("z_field_isospectral", 4, g=1.5)).mat
    np.testing.assert_allclose(H, orc.z_field(eps), atol=1e-14)
    assert H[0, 0] == pytest.approx(-0.5 * eps.sum())  # all-up state is the ground state, as for the TFIM field


def test_tfim_spectrum_matches_mode_reconstruction():
    H = ed.build_hamiltonian(HamiltonianSpec("tfim_ti", 4, g=1.5)).mat
    np.testing.assert_allclose(np.linalg.eigvalsh(H), tb.many_body_spectrum(1.5, 4), atol=1e-10)


def test_pauli_string_convention():
    Z1 = ed.pauli_string({1: "Z"}, 3)
    assert Z1[0, 0] == 1 and Z1[4, 4] == -1  # site 1 is the most significant bit
    np.testing.assert_array_equal(ed.pauli_string({2: "X"}, 2), orc.site_op(orc.X, 1, 2))


def test_cap_and_custom_matrix():
    with pytest.raises(ResourceError):
        ed.build_hamiltonian(mixed(15, 1, 0, 1))
    with pytest.raises(ResourceError):
        ed.build_hamiltonian(mixed(9, 1, 0, 1), cap=8)
    with pytest.raises(ConfigurationError):
        ed.build_hamiltonian(HamiltonianSpec("dense_custom", 1, matrix=np.array([[0, 1], [2, 0]])))
    custom = ed.build_hamiltonian(HamiltonianSpec("dense_custom", 1, matrix=np.array([[0.0, 1j], [-1j, 0.0]])))
    assert custom.mat[0, 1] == 1j


def test_eigh_reconstruction():
    H = ed.build_hamiltonian(mixed(6, 1, 0.5, 1.05)).mat
    eig = ed.eigh(H)
    assert np.all(np.diff(eig.energies) >= 0)
    V = eig.vectors
    np.testing.assert_allclose(V.conj().T @ V, np.eye(64), atol=1e-10)
    assert np.linalg.norm(H - (V * eig.energies) @ V.conj().T) < 1e-9 * np.linalg.norm(H)


def test_gibbs_examples():
    H = ed.build_hamiltonian(mixed(2, 1, 0, 0))
    np.testing.assert_allclose(ed.gibbs(H, 0.0).rho, np.eye(4) / 4, atol=1e-15)
    w = np.array([math.e**-1, math.e, math.e, math.e**-1])
    np.testing.assert_allclose(np.diag(ed.gibbs(H, 1.0).rho).real, w / w.sum(), atol=1e-14)
    H3 = ed.build_hamiltonian(mixed(3, 1, 0.5, 0.7)).mat
    eig = ed.eigh(H3)
    ground = np.outer(eig.vectors[:, 0], eig.vectors[:, 0].conj())
    np.testing.assert_allclose(ed.gibbs(H3, 50.0).rho, ground, atol=1e-8)
    with pytest.raises(DomainError):
        ed.gibbs(H, -1.0)


def test_qate_evolve_matches_expm_oracle():
    N, T = 4, 1.5
    hi, hf = mixed(N, 1, 0.0, 1.05), mixed(N, 1, 0.5, 1.05)
    cfg = QateConfig(1.0, T, hi, hf)
    H0, H1 = orc.mixed_field(N, 1, 0.0, 1.05), orc.mixed_field(N, 1, 0.5, 1.05)
    rho0 = orc.gibbs(H0, 1.0)
    out = ed.qate_evolve(ed.DenseState(N, rho0), cfg).rho
    np.testing.assert_allclose(out, orc.trotter_rho(rho0, H0, H1, T, 0.1), atol=1e-12)


def test_qate_evolve_constant_hamiltonian():
    spec = mixed(4, 1, 0.3, 0.9)
    rho = ed.gibbs(ed.build_hamiltonian(spec), 0.7)
    out = ed.qate_evolve(rho, QateConfig(0.7, 3.0, spec, spec))
    assert ed.trace_norm_distance(out.rho, rho.rho) < 1e-10


@pytest.mark.parametrize("use_symmetry", [True, False])
def test_run_qate_dense_matches_qate_evolve(use_symmetry):
    N, T = 6, 2.0
    cfg = QateConfig(1.0, T, mixed(N, 1, 0.0, 1.05), mixed(N, 1, 0.5, 1.05))
    run = ed.run_qate_dense(cfg, use_symmetry=use_symmetry)
    rho0 = ed.gibbs(ed.build_hamiltonian(cfg.h_init), 1.0)
    np.testing.assert_allclose(run.rho, ed.qate_evolve(rho0, cfg).rho, atol=1e-12)


def test_symmetry_sectors_are_an_orthogonal_split():
    for N in (3, 4, 5):
        blocks = ed._reflection_sectors(N)
        U = np.concatenate(blocks, axis=1)
        np.testing.assert_allclose(U.T @ U, np.eye(2**N), atol=1e-14)


def test_conservation_under_evolution():
    N = 6
    cfg = QateConfig(1.0, 5.0, mixed(N, 1, 0.5, 0.0), mixed(N, 1, 0.5, 1.05))
    rho0 = ed.gibbs(ed.build_hamiltonian(cfg.h_init), 1.0)
    out = ed.qate_evolve(rho0, cfg)
    np.testing.assert_allclose(np.linalg.eigvalsh(out.rho), np.linalg.eigvalsh(rho0.rho), atol=1e-10)
    assert spectral.von_neumann_entropy(out.rho) == pytest.approx(spectral.von_neumann_entropy(rho0.rho), abs=1e-10)


def test_coefficients_examples():
    H = ed.build_hamiltonian(mixed(4, 1, 0.3, 0.8))
    eig = ed.eigh(H.mat)
    c = ed.coefficients_in_eigenbasis(ed.gibbs(H, 1.0).rho, eig)
    assert np.max(np.abs(c - np.diag(np.diag(c)))) < 1e-12
    rho = random_state(16, 5)
    c = ed.coefficients_in_eigenbasis(rho, eig)
    assert np.trace(c).real == pytest.approx(1.0, abs=1e-12)
    assert np.sum(np.abs(c) ** 2) == pytest.approx(np.trace(rho @ rho).real, abs=1e-12)
    np.testing.assert_allclose(eig.vectors @ c @ eig.vectors.conj().T, rho, atol=1e-10)
    with pytest.raises(ConfigurationError):
        ed.coefficients_in_eigenbasis(np.eye(8) / 8, eig)


def test_reduced_density_examples():
    a = random_state(2, 1)
    b = random_state(4, 2)
    prod = ed.DenseState(3, np.kron(a, b))
    np.testing.assert_allclose(ed.reduced_density(prod, [1]).rho, a, atol=1e-14)
    np.testing.assert_allclose(ed.reduced_density(prod, [2, 3]).rho, b, atol=1e-14)
    mixed_state = ed.DenseState(4, np.eye(16) / 16)
    np.testing.assert_allclose(ed.reduced_density(mixed_state, [2, 3]).rho, np.eye(4) / 4, atol=1e-15)
    assert ed.reduced_density(prod, []).rho.shape == (1, 1)
    np.testing.assert_allclose(ed.reduced_density(prod, [1, 2, 3]).rho, prod.rho)
    with pytest.raises(DomainError):
        ed.reduced_density(prod, [0, 1])


def test_reduced_density_matches_index_sum_oracle():
    rho = ed.gibbs(ed.build_hamiltonian(mixed(4, 1, 0.5, 1.05)), 1.0)
    for keep in ([1, 2, 3], [2], [1, 3], [2, 3, 4]):
        expect = orc.partial_trace_loops(rho.rho, [s - 1 for s in keep], 4)
        np.testing.assert_allclose(ed.reduced_density(rho, keep).rho, expect, atol=1e-12)


def test_trace_norm_examples():
    assert ed.trace_norm_distance(np.diag([0.6, 0.4]), np.diag([0.5, 0.5])) == pytest.approx(0.2, abs=1e-15)
    up = np.diag([1.0, 0.0])
    assert ed.trace_norm_distance(up, np.diag([0.0, 1.0])) == pytest.approx(2.0)
    assert ed.trace_norm_distance(up, up) == 0.0


def test_correlation_series_matches_direct_propagation():
    from scipy import linalg

    H = orc.mixed_field(3, 1, 0.5, 1.05)
    rho = random_state(8, 9)
    times = [0.0, 0.3, 1.7]
    got = ed.correlation_series(rho, H, times)
    for t, g in zip(times, got):
        U = linalg.expm(-1j * t * H)
        assert g == pytest.approx(np.trace(U @ rho @ U.conj().T @ rho), abs=1e-13)


def test_cross_engine_tfim_benchmarks_at_six_sites():
    cfg = QateConfig(1.0, 10.0, HamiltonianSpec("tfim_ti", 6, g=1.1), HamiltonianSpec("tfim_ti", 6, g=1.5))
    a = ed.dense_benchmarks(ed.run_qate_dense(cfg))
    b = tb.block_benchmarks(tb.run_qate_blocks(cfg))
    for name in ("energy", "e_min", "delta_e_qate", "variance", "var_min", "cod", "purity", "entropy"):
        assert getattr(a, name) == pytest.approx(getattr(b, name), abs=1e-8), name


def test_isospectral_relative_entropy_identity_small():
    N = 4
    cfg = QateConfig(1.0, 3.0, HamiltonianSpec("z_field_isospectral", N, g=1.5), HamiltonianSpec("tfim_ti", N, g=1.5))
    run = ed.run_qate_dense(cfg)
    rec = ed.dense_benchmarks(run)
    rho_g = ed.gibbs(run.H_final, 1.0).rho
    assert abs(rec.delta_e_min) < 1e-10
    assert spectral.relative_entropy(run.rho, rho_g) == pytest.approx(rec.delta_e_qate, abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_unitarity_of_step_propagators(seed):
    rng = np.random.default_rng(seed)
    H = orc.mixed_field(3, *rng.uniform(-1.5, 1.5, size=3))
    eig = ed.eigh(H)
    U = (eig.vectors * np.exp(-1j * eig.energies * rng.uniform(0, 2))) @ eig.vectors.conj().T
    assert np.linalg.norm(U.conj().T @ U - np.eye(8)) < 1e-10
