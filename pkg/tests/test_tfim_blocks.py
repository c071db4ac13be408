import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import linalg

import _oracles as orc
from qate import tfim_blocks as tb
from qate.errors import ConfigurationError, DomainError, SingularityError
from qate.protocol import HamiltonianSpec, QateConfig


def tfim_config(N, g0, g1, T, beta=1.0, tau=0.1):
    return QateConfig(beta, T, HamiltonianSpec("tfim_ti", N, g=g0), HamiltonianSpec("tfim_ti", N, g=g1), tau=tau)


def test_eigenmode_examples():
    assert tb.eigenmode(1.5, 0, 4) == pytest.approx(5.0, abs=1e-14)
    assert tb.eigenmode(1.5, -2, 4) == pytest.approx(1.0, abs=1e-14)


def test_critical_gap_closes_as_inverse_N():
    # at g = 1 the lowest paired gap is 2 eps = 8 sin(pi/N), i.e. O(1/N)
    for N in (100, 200, 400):
        gap = 2 * tb.eigenmode(1.0, N // 2 - 1, N)
        assert gap == pytest.approx(8 * math.sin(math.pi / N), rel=1e-10)
    assert 2 * tb.eigenmode(1.0, 49, 100) * 100 == pytest.approx(8 * math.pi, rel=1e-3)


def test_eigenmode_errors():
    with pytest.raises(ConfigurationError):
        tb.eigenmode(1.5, 0, 5)
    with pytest.raises(DomainError):
        tb.eigenmode(1.5, 2, 4)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 3.0), st.integers(1, 30), st.data())
def test_bogoliubov_normalised(g, half, data):
    N = 2 * half + 2
    k = data.draw(st.integers(1, N // 2 - 1))
    s, t = tb.bogoliubov_coeffs(g, k, N)
    assert s * s + t * t == pytest.approx(1.0, abs=1e-12)
    T = tb.block_transform(g, k, N)
    np.testing.assert_allclose(T.conj().T @ T, np.eye(4), atol=1e-12)


def test_bogoliubov_static_cases():
    assert tb.bogoliubov_coeffs(1.5, 0, 4) == (0.0, 1.0)
    np.testing.assert_allclose(tb.block_transform(0.5, -2, 4), np.eye(4))
    with pytest.raises(SingularityError):
        tb.bogoliubov_coeffs(1.0, -2, 4)


def test_outer_block_diagonalised():
    g, k, N = 1.5, 1, 4
    eps = tb.eigenmode(g, k, N)
    s, t = tb.bogoliubov_coeffs(g, k, N)
    U = np.array([[s, -1j * t], [-1j * t, s]])
    A, sn = g + math.cos(2 * math.pi * k / N), math.sin(2 * math.pi * k / N)
    h = np.array([[2 * A, -2j * sn], [2j * sn, -2 * A]])
    np.testing.assert_allclose(U.conj().T @ h @ U, np.diag([-eps, eps]), atol=1e-12)


@pytest.mark.parametrize("g,k,N", [(1.5, 1, 4), (0.3, 3, 10), (1.1, 7, 16), (2.0, 1, 100)])
def test_block_transform_reproduces_fourier_block(g, k, N):
    eps = tb.eigenmode(g, k, N)
    T = tb.block_transform(g, k, N)
    D = np.diag([-eps, 0, 0, eps])
    np.testing.assert_allclose(T @ D @ T.conj().T, tb.fourier_block_hamiltonian(g, k, N), atol=1e-12)


def test_partition_block_example():
    assert tb.partition_block(1.0, 5.0) == pytest.approx((math.exp(-2.5) + math.exp(2.5)) ** 2, rel=1e-14)
    assert tb.partition_block(1.0, 5.0) == pytest.approx(math.exp(5) + 2 + math.exp(-5), rel=1e-14)


def test_thermal_block_limits():
    hot = tb.thermal_block(0.0, 1.3, 2, 8).rho4
    np.testing.assert_allclose(hot, np.eye(4) / 4, atol=1e-15)
    cold = tb.thermal_block(50.0, 1.3, 2, 8).rho4
    assert np.trace(cold).real == pytest.approx(1.0, abs=1e-14)
    assert np.trace(cold @ cold).real == pytest.approx(1.0, abs=1e-12)
    H = tb.fourier_block_hamiltonian(1.3, 2, 8)
    assert np.trace(cold @ H).real == pytest.approx(-tb.eigenmode(1.3, 2, 8), rel=1e-12)


def test_thermal_block_matches_matrix_exponential():
    beta, g, k, N = 0.7, 1.1, 3, 8
    H = tb.fourier_block_hamiltonian(g, k, N)
    w = linalg.expm(-beta * H)
    np.testing.assert_allclose(tb.thermal_block(beta, g, k, N).rho4, w / np.trace(w), atol=1e-13)


def test_quench_step_matches_expm():
    blk = tb.thermal_block(1.0, 1.1, 1, 8)
    out = tb.quench_step(blk, 1.5, 0.1)
    U = linalg.expm(-1j * 0.1 * tb.fourier_block_hamiltonian(1.5, 1, 8))
    np.testing.assert_allclose(out.rho4, U @ blk.rho4 @ U.conj().T, atol=1e-13)


def test_quench_step_trivial_cases():
    blk = tb.thermal_block(1.0, 1.1, 1, 8)
    np.testing.assert_allclose(tb.quench_step(blk, 1.1, 3.7).rho4, blk.rho4, atol=1e-13)
    np.testing.assert_allclose(tb.quench_step(blk, 1.5, 0.0).rho4, blk.rho4, atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 2.5), st.floats(0.1, 2.5), st.floats(0.0, 3.0), st.floats(0.01, 2.0))
def test_quench_step_conserves_block_spectrum(g0, g1, beta, tau):
    blk = tb.thermal_block(beta, g0, 1, 6)
    out = tb.quench_step(blk, g1, tau)
    np.testing.assert_allclose(np.linalg.eigvalsh(out.rho4), np.linalg.eigvalsh(blk.rho4), atol=1e-10)
    assert np.trace(out.rho4).real == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("N,g", [(4, 1.5), (6, 0.7), (8, 1.1)])
def test_many_body_spectrum_matches_spin_model(N, g):
    dense = np.linalg.eigvalsh(orc.tfim_parity(N, g))
    np.testing.assert_allclose(tb.many_body_spectrum(g, N), dense, atol=1e-10)


def test_run_static_modes_untouched():
    cfg = tfim_config(8, 1.1, 1.5, 5.0)
    before = tb.thermal_ensemble(8, 1.0, 1.1, 1.5).static_modes
    after = tb.run_qate_blocks(cfg).static_modes
    assert before == after


def test_run_matches_spin_model_oracle():
    N, T = 6, 3.0
    cfg = tfim_config(N, 1.1, 1.5, T)
    rec = tb.block_benchmarks(tb.run_qate_blocks(cfg))
    H0, H1 = orc.tfim_parity(N, 1.1), orc.tfim_parity(N, 1.5)
    rho = orc.trotter_rho(orc.gibbs(H0, 1.0), H0, H1, T, 0.1)
    assert rec.energy == pytest.approx(np.trace(rho @ H1).real, abs=1e-9)
    assert rec.cod == pytest.approx(orc.cod_commutator(rho, H1), abs=1e-9)
    assert rec.purity == pytest.approx(np.trace(rho @ rho).real, abs=1e-12)


def test_equal_couplings_give_zero_off_diagonality():
    ens = tb.run_qate_blocks(tfim_config(20, 1.3, 1.3, 7.0))
    rec = tb.block_benchmarks(ens)
    assert abs(rec.cod) < 1e-12
    assert abs(rec.delta_e_qate) < 1e-12
    assert abs(rec.delta_var) < 1e-10


def test_tiny_run_close_to_initial_ensemble():
    start = tb.thermal_ensemble(20, 1.0, 1.1, 1.5)
    ens = tb.run_qate_blocks(tfim_config(20, 1.1, 1.5, 1e-4, tau=1e-4))
    assert np.max(np.abs(ens.rho - start.rho)) < 1e-3
    assert tb.block_benchmarks(ens).cod > 0


def test_block_engine_rejects_other_models():
    spec = HamiltonianSpec("mixed_field_ising", 4, 1.0, 1.0, 0.5)
    with pytest.raises(ConfigurationError):
        tb.run_qate_blocks(QateConfig(1.0, 1.0, spec, spec))
    with pytest.raises(ConfigurationError):
        tb.block_benchmarks(tb.thermal_ensemble(4, 1.0, 1.5), e_min_rule="greedy")


def test_block_cod_matches_dense_commutator():
    rng = np.random.default_rng(3)
    a = rng.uniform(0.2, 0.6)
    d_minus = rng.uniform(0.05, 0.3)
    m = rng.uniform(0.0, 0.05)
    rho = np.diag([a, m, m, d_minus]).astype(complex)
    rho[0, 3] = 0.08 + 0.03j
    rho[3, 0] = np.conj(rho[0, 3])
    rho /= np.trace(rho).real
    eps = 1.7
    H = np.diag([-eps, 0, 0, eps])
    c = rho[0, 3]
    closed = 8 * eps**2 * abs(c) ** 2 / np.trace(rho @ rho).real
    assert closed == pytest.approx(orc.cod_commutator(rho, H), rel=1e-12)


def test_diagonal_ensemble_benchmarks_vanish():
    ens = tb.thermal_ensemble(12, 0.8, 1.4)
    rec = tb.block_benchmarks(ens, e_min_rule="modes")
    assert abs(rec.cod) < 1e-25 and rec.delta_e_qate == 0
    assert abs(rec.delta_var) < 1e-12


def test_e_min_rules_agree_at_four_sites():
    ens = tb.run_qate_blocks(tfim_config(4, 1.1, 1.5, 10.0))
    a = tb.block_benchmarks(ens, e_min_rule="modes")
    b = tb.block_benchmarks(ens, e_min_rule="global")
    assert a.e_min == pytest.approx(b.e_min, abs=1e-12)


def test_a6_trivial_and_purity_identity():
    assert tb.a6_identities(np.diag([0.5, 0.2, 0.2, 0.1]), 2.0) == (0.0, 0.0)
    ens = tb.run_qate_blocks(tfim_config(16, 1.1, 1.5, 20.0))
    for blk in ens.final_basis:
        assert abs(tb.block_purity_identity(blk)) < 1e-12


def test_adiabatic_bound_shape():
    assert tb.adiabatic_bound((1.3, 1.3), 1, 100, 10.0) == 0.0
    b1 = tb.adiabatic_bound((1.1, 1.5), 1, 100, 50.0)
    b2 = tb.adiabatic_bound((1.1, 1.5), 1, 100, 100.0)
    assert b2 == pytest.approx(b1 / 4, rel=1e-12)
    with pytest.raises(SingularityError):
        tb.adiabatic_bound((0.8, 1.2), -50, 100, 10.0)


def test_adiabatic_bound_exceeds_measured_coherence():
    ens = tb.run_qate_blocks(tfim_config(100, 1.1, 1.5, 100.0))
    c_k1 = abs(ens.final_basis[0, 0, 3]) ** 2  # k = 1 is the first paired momentum
    assert tb.adiabatic_bound((1.1, 1.5), 1, 100, 100.0) > c_k1


def test_filtered_bod_of_diagonal_ensemble():
    from qate import spectral

    ens = tb.thermal_ensemble(10, 1.0, 1.5)
    filt = spectral.filter_design(0.2, tb.default_filter_dt_ti(ens))
    hist = tb.bod_filtered_ti(ens, filt, np.concatenate([[0.0], np.arange(2.0, 4.01, 0.4)]))
    assert hist.values[0] == pytest.approx(1.0, abs=1e-8)
    assert np.max(np.abs(hist.values[1:])) < 2 * filt.error_bound  # omega >= 10 sigma


def test_filtered_bod_rejects_out_of_domain():
    from qate import spectral

    ens = tb.thermal_ensemble(10, 1.0, 1.5)
    filt = spectral.filter_design(0.2, tb.default_filter_dt_ti(ens))
    with pytest.raises(DomainError):
        tb.bod_filtered_ti(ens, filt, [0.0, 10 * filt.omega_limit])


def test_perturbative_bod_support():
    diag = tb.thermal_ensemble(10, 1.0, 1.5)
    diag.final_basis = tb.to_final_basis(diag)
    assert len(tb.bod_perturbative(diag, 1, 0.08).values) == 0
    ens = tb.run_qate_blocks(tfim_config(200, 1.1, 1.5, 20.0))
    hist = tb.bod_perturbative(ens, 1, 0.08)
    nz = hist.bin_centers[hist.values > 0]
    assert nz.min() >= 2.0 - 0.04 - 1e-12  # first-order lines start at min 2 eps_k = 4 (g - 1)
    with pytest.raises(DomainError):
        tb.bod_perturbative(ens, 3, 0.08)
