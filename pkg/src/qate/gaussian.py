"""Quadratic-fermion (Bogoliubov-de Gennes) engine.

With Psi = (a_1..a_N, a_1^dag..a_N^dag) a quadratic operator is written

    H = 1/2 Psi^dag h Psi + offset,    h = [[A, B], [-B*, -A*]],

A Hermitian (hopping), B antisymmetric (pairing). Gaussian states are
rho = exp(-K) / Z with K = 1/2 Psi^dag kappa Psi. Unitary evolution under H
maps kappa -> R kappa R^dag with R = exp(-i h t).

States are stored in the spectral form of kappa: its eigenvalues (``modes``,
conserved by unitary evolution) and eigenvectors (``frame``). All traces are
closed forms in that eigenbasis.

Spin-chain conventions match the dense engine: sigma^z = 2n - 1 (spin up is
occupied) and the Jordan-Wigner string is prod_{m<j} (-sigma^z_m).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import expit

from . import spectral
from .errors import ConfigurationError, DomainError
from .protocol import HamiltonianSpec, QateConfig
from .tfim_blocks import isospectral_energies

BETA_MAX = 50.0
MANY_BODY_MAX_N = 16


@dataclass
class QuadraticHamiltonian:
    N: int
    bdg: np.ndarray
    offset: float = 0.0

    @classmethod
    def from_blocks(cls, A, B, constant: float = 0.0) -> "QuadraticHamiltonian":
        """H = a^dag A a + 1/2 (a^dag B a^dag + h.c.) + constant."""
        A = np.asarray(A)
        B = np.asarray(B)
        N = A.shape[0]
        if A.shape != (N, N) or B.shape != (N, N):
            raise ConfigurationError("hopping and pairing blocks must be square and of equal size")
        if not np.allclose(A, A.conj().T, atol=1e-12):
            raise ConfigurationError("hopping block must be Hermitian")
        if not np.allclose(B, -B.T, atol=1e-12):
            raise ConfigurationError("pairing block must be antisymmetric")
        h = np.block([[A, B], [-B.conj(), -A.conj()]])
        return cls(N, h, float(np.real(np.trace(A))) / 2.0 + constant)

    @property
    def A(self) -> np.ndarray:
        return self.bdg[: self.N, : self.N]

    @property
    def B(self) -> np.ndarray:
        return self.bdg[: self.N, self.N :]


def bdg_from_spec(spec: HamiltonianSpec) -> QuadraticHamiltonian:
    N = spec.N
    if spec.family == "tfim_ti":
        # -J sum X_j X_{j+1} - g sum Z_j with the parity-dependent boundary sign:
        # periodic hopping and pairing on every bond, including N -> 1
        A = -2.0 * spec.g * np.eye(N)
        B = np.zeros((N, N))
        for j in range(N):
            nxt = (j + 1) % N
            A[j, nxt] += -spec.J
            A[nxt, j] += -spec.J
            B[j, nxt] += -spec.J
            B[nxt, j] += spec.J
        if spec.h != 0.0:
            raise ConfigurationError("a longitudinal field is not quadratic in fermions")
        return QuadraticHamiltonian.from_blocks(A, B, constant=spec.g * N)
    if spec.family == "z_field_isospectral":
        eps = isospectral_energies(spec.g, N)
        # -sum eps_k/2 Z_k, aligned with the TFIM field
        return QuadraticHamiltonian.from_blocks(-np.diag(eps), np.zeros((N, N)), constant=0.5 * eps.sum())
    raise ConfigurationError(f"the Gaussian engine supports tfim_ti and z_field_isospectral, not {spec.family!r}")


def single_particle_energies(h: QuadraticHamiltonian) -> np.ndarray:
    """The N nonnegative quasiparticle energies, ascending."""
    vals = linalg.eigvalsh(h.bdg)
    return np.sort(np.abs(vals))[::2]  # eigenvalues come in +- pairs


def _logcosh(x):
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - math.log(2.0)


@dataclass
class GaussianThermalState:
    N: int
    modes: np.ndarray  # eigenvalues of kappa, conserved
    frame: np.ndarray  # eigenvectors of kappa (columns)

    @property
    def kappa(self) -> np.ndarray:
        return (self.frame * self.modes) @ self.frame.conj().T

    @property
    def log_z(self) -> float:
        return float(0.5 * np.sum(_logcosh(0.5 * self.modes) + math.log(2.0)))

    def measured_modes(self) -> np.ndarray:
        """Eigenvalues of the reassembled kappa (tests conservation under evolution)."""
        return linalg.eigvalsh(self.kappa)

    def covariance(self) -> np.ndarray:
        """G = <Psi Psi^dag>."""
        return (self.frame * expit(self.modes)) @ self.frame.conj().T


def _check_h(state: GaussianThermalState, h: QuadraticHamiltonian) -> None:
    if h.N != state.N:
        raise ConfigurationError(f"Hamiltonian has N={h.N} but the state has N={state.N}")


def thermal_gaussian(h: QuadraticHamiltonian, beta: float) -> GaussianThermalState:
    if not 0.0 <= beta <= BETA_MAX:
        raise DomainError(f"beta must lie in [0, {BETA_MAX}], got {beta!r}")
    vals, vecs = linalg.eigh(h.bdg)
    return GaussianThermalState(h.N, beta * vals, vecs.astype(complex))


def _propagator_apply(h: QuadraticHamiltonian, tau: float, frame: np.ndarray, eig=None) -> np.ndarray:
    vals, vecs = eig if eig is not None else linalg.eigh(h.bdg)
    phase = np.exp(-1j * vals * tau)[:, None]
    if np.isrealobj(vecs):
        vt = np.ascontiguousarray(vecs.T)
        coef = (vt @ np.ascontiguousarray(frame.real)) + 1j * (vt @ np.ascontiguousarray(frame.imag))
        coef *= phase
        return (vecs @ np.ascontiguousarray(coef.real)) + 1j * (vecs @ np.ascontiguousarray(coef.imag))
    return vecs @ (phase * (vecs.conj().T @ frame))


def evolve_step(state: GaussianThermalState, h_inst: QuadraticHamiltonian, tau: float) -> GaussianThermalState:
    """kappa -> R kappa R^dag with R = exp(-i h tau); the mode spectrum is untouched."""
    _check_h(state, h_inst)
    return GaussianThermalState(state.N, state.modes, _propagator_apply(h_inst, tau, state.frame))


def energy(state: GaussianThermalState, h: QuadraticHamiltonian) -> float:
    _check_h(state, h)
    G = state.covariance()
    return float(-0.5 * np.real(np.vdot(h.bdg.conj().T, G)) + h.offset)


def _transformed(state: GaussianThermalState, h: QuadraticHamiltonian) -> np.ndarray:
    return state.frame.conj().T @ h.bdg @ state.frame


def variance(state: GaussianThermalState, h: QuadraticHamiltonian) -> float:
    _check_h(state, h)
    ht = _transformed(state, h)
    occ = expit(state.modes)
    return float(0.5 * np.sum(np.abs(ht) ** 2 * (1.0 - occ)[:, None] * occ[None, :]))


def log_purity(state: GaussianThermalState) -> float:
    lam = state.modes
    return float(0.5 * np.sum(_logcosh(lam) - 2.0 * _logcosh(0.5 * lam) - math.log(2.0)))


def purity(state: GaussianThermalState) -> float:
    return math.exp(log_purity(state))


def entropy(state: GaussianThermalState) -> float:
    p = expit(state.modes)
    q = expit(-state.modes)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p), 0.0) + np.where(q > 0, q * np.log(q), 0.0)
    return float(-0.5 * terms.sum())


def log_overlap(a: GaussianThermalState, b: GaussianThermalState) -> float:
    """log Tr(rho_a rho_b).

    With G = <Psi Psi^dag> = (1 + e^{-kappa})^{-1},

        Tr(rho_a rho_b)^2 = det(1 + e^{-kappa_a} e^{-kappa_b}) / (Z_a^2 Z_b^2)
                          = det(G_a G_b + (1 - G_a)(1 - G_b)),

    and the right-hand form only involves matrices with spectrum in [0, 1], so
    it stays well conditioned at large beta * eps. The overlap of two positive
    operators is nonnegative, so the magnitude of the determinant suffices.
    """
    if a.N != b.N:
        raise ConfigurationError("states have different N")
    Ga = a.covariance()
    Gb = b.covariance()
    eye = np.eye(2 * a.N)
    _, logdet = np.linalg.slogdet(Ga @ Gb + (eye - Ga) @ (eye - Gb))
    return 0.5 * float(logdet)


def overlap(a: GaussianThermalState, b: GaussianThermalState) -> float:
    return math.exp(log_overlap(a, b))


def cod_gaussian(state: GaussianThermalState, h: QuadraticHamiltonian) -> float:
    """-Tr([H, rho]^2) / Tr(rho^2) from Wick contractions under rho^2 / Tr(rho^2).

    With hw = W^dag h W in the eigenbasis of kappa (eigenvalues lam),
    COD = sum_ij |hw_ij|^2 (cosh(lam_i - lam_j) - 1) / (4 cosh lam_i cosh lam_j),
    evaluated in log space so large beta*eps does not overflow.
    """
    _check_h(state, h)
    ht = _transformed(state, h)
    lam = state.modes
    if np.max(np.abs(lam)) > 600:
        warnings.warn("kappa has very large eigenvalues; the Gaussian COD may lose precision", RuntimeWarning)
    lc = _logcosh(lam)
    cross = _logcosh(lam[:, None] - lam[None, :]) - lc[:, None] - lc[None, :]
    weight = 0.25 * (np.exp(cross) - np.exp(-lc[:, None] - lc[None, :]))
    return float(np.sum(np.abs(ht) ** 2 * np.maximum(weight, 0.0)))


def relative_entropy_gaussian(rho: GaussianThermalState, sigma: GaussianThermalState) -> float:
    """D(rho || sigma) = -S(rho) + <K_sigma>_rho + log Z_sigma."""
    if rho.N != sigma.N:
        raise ConfigurationError("states have different N")
    kappa_s = sigma.kappa
    mean_k = -0.5 * float(np.real(np.vdot(kappa_s.conj().T, rho.covariance())))
    return -entropy(rho) + mean_k + sigma.log_z


# ---------------------------------------------------------------------------
# reference energies


def many_body_spectrum(h: QuadraticHamiltonian) -> np.ndarray:
    """Sorted many-body spectrum from quasiparticle occupations (N <= 16)."""
    if h.N > MANY_BODY_MAX_N:
        raise ConfigurationError(f"many-body reconstruction is limited to N <= {MANY_BODY_MAX_N}")
    eps = single_particle_energies(h)
    levels = np.full(1, h.offset)
    for e in eps:
        levels = (levels[:, None] + np.array([-0.5 * e, 0.5 * e])[None, :]).ravel()
    return np.sort(levels)


def _mode_entropy(eps: np.ndarray, beta: float) -> float:
    n = expit(-beta * eps)
    m = expit(beta * eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(n > 0, n * np.log(n), 0.0) + np.where(m > 0, m * np.log(m), 0.0)
    return float(-t.sum())


def _mode_energy(eps: np.ndarray, beta: float, offset: float) -> float:
    return float(offset - 0.5 * np.sum(eps * np.tanh(0.5 * beta * eps)))


def _mode_variance(eps: np.ndarray, beta: float) -> float:
    n = expit(-beta * eps)
    return float(np.sum(eps**2 * n * (1.0 - n)))


def gibbs_reference(h: QuadraticHamiltonian, entropy_target: float) -> tuple[float, float]:
    """(beta', E_G): Gibbs state of h with the requested entropy."""
    eps = single_particle_energies(h)
    beta = spectral.solve_beta(lambda b: _mode_entropy(eps, b), entropy_target, "entropy")
    return beta, _mode_energy(eps, beta, h.offset)


def is_isospectral(h1: QuadraticHamiltonian, h2: QuadraticHamiltonian, tol: float = 1e-10) -> bool:
    e1 = single_particle_energies(h1)
    e2 = single_particle_energies(h2)
    scale = max(1.0, float(np.max(np.abs(e1))))
    return bool(np.max(np.abs(e1 - e2)) <= tol * scale and abs(h1.offset - h2.offset) <= tol * scale)


def minimal_energy(h_init: QuadraticHamiltonian, h_final: QuadraticHamiltonian, beta: float):
    """(E_min, var_min) of the minimal-energy state with the initial Gibbs spectrum.

    Exact by sorting many-body levels for N <= 16; for isospectral endpoints at
    any N it is the Gibbs state of h_final at the same beta. Otherwise NaN.
    """
    if h_init.N <= MANY_BODY_MAX_N:
        e_init = many_body_spectrum(h_init)
        e_final = many_body_spectrum(h_final)
        w = spectral.gibbs_weights(e_init, beta)
        pops, e_min = spectral.rho_min_spectrum(np.sort(w)[::-1], e_final)
        return e_min, float(np.dot(pops, e_final**2) - e_min**2)
    if is_isospectral(h_init, h_final):
        eps = single_particle_energies(h_final)
        return _mode_energy(eps, beta, h_final.offset), _mode_variance(eps, beta)
    return math.nan, math.nan


# ---------------------------------------------------------------------------
# full runs


@dataclass
class GaussianRun:
    state: GaussianThermalState
    record: spectral.BenchmarkRecord
    bod: spectral.BodHistogram | None
    initial_modes: np.ndarray
    h_final: QuadraticHamiltonian


def correlation_samples(state: GaussianThermalState, h: QuadraticHamiltonian, times) -> np.ndarray:
    """G(t) = Tr(rho(t) rho) with rho(t) evolved under h; real and nonnegative for Gaussian states."""
    eig = linalg.eigh(h.bdg)
    out = np.empty(len(times))
    for n, t in enumerate(times):
        moved = GaussianThermalState(state.N, state.modes, _propagator_apply(h, t, state.frame, eig))
        out[n] = math.exp(log_overlap(moved, state))
    return out


def run_qate_gaussian(config: QateConfig, bod_filter: spectral.FilterSpec | None = None,
                      omega_grid=None) -> GaussianRun:
    h_i = bdg_from_spec(config.h_init)
    h_f = bdg_from_spec(config.h_final)
    state = thermal_gaussian(h_i, config.beta)
    initial_modes = state.modes.copy()
    grid = config.grid()
    frame = state.frame
    for gam in config.gammas():
        h_s = QuadraticHamiltonian(h_i.N, (1.0 - gam) * h_i.bdg + gam * h_f.bdg, (1.0 - gam) * h_i.offset + gam * h_f.offset)
        frame = _propagator_apply(h_s, grid.step, frame)
    state = GaussianThermalState(state.N, state.modes, frame)

    measured = GaussianThermalState(state.N, state.measured_modes(), state.frame)
    s_val = entropy(measured)
    e_min, var_min = minimal_energy(h_i, h_f, config.beta)
    _, e_gibbs = gibbs_reference(h_f, entropy(GaussianThermalState(state.N, initial_modes, state.frame)))
    record = spectral.BenchmarkRecord.from_parts(
        energy=energy(state, h_f), e_min=e_min, e_gibbs=e_gibbs, variance=variance(state, h_f), var_min=var_min,
        cod=cod_gaussian(state, h_f), purity=math.exp(log_purity(measured)), entropy=s_val,
    )
    hist = None
    if bod_filter is not None:
        if omega_grid is None:
            raise ConfigurationError("a BOD filter needs an omega grid")
        corr = correlation_samples(state, h_f, bod_filter.times)
        p = purity(state)
        hist = spectral.bod_filtered(corr, bod_filter, omega_grid, purity=p)
    return GaussianRun(state, record, hist, initial_modes, h_f)
