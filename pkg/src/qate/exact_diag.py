"""Dense exact-diagonalisation engine for spin chains.

Basis convention: site 1 is the most significant bit of the computational
index and bit value 0 is spin up (sigma^z = +1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import spectral
from .errors import ConfigurationError, DomainError, ResourceError
from .protocol import HamiltonianSpec, QateConfig
from .tfim_blocks import isospectral_energies

HARD_CAP = 14

PAULI = {
    "I": np.eye(2),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]]),
    "Y": np.array([[0.0, -1j], [1j, 0.0]]),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]]),
}


@dataclass
class DenseOperator:
    N: int
    mat: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return self.mat if dtype is None else self.mat.astype(dtype)


@dataclass
class DenseState:
    N: int
    rho: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return self.rho if dtype is None else self.rho.astype(dtype)


@dataclass
class EigenDecomposition:
    energies: np.ndarray
    vectors: np.ndarray


def pauli_string(ops: dict[int, str], N: int) -> np.ndarray:
    """Kronecker product with ``ops[site]`` (1-based) on the listed sites and identity elsewhere."""
    out = np.ones((1, 1))
    for site in range(1, N + 1):
        out = np.kron(out, PAULI[ops.get(site, "I")])
    return out


def _z_table(N: int) -> np.ndarray:
    """sigma^z eigenvalue of every site (columns) for every basis index (rows)."""
    idx = np.arange(2**N)
    bits = (idx[:, None] >> (N - 1 - np.arange(N))[None, :]) & 1
    return 1 - 2 * bits


def _site_mask(site: int, N: int) -> int:
    return 1 << (N - site)


def _add_flip(H: np.ndarray, mask: int, amplitude) -> None:
    """H += amplitude * (product of sigma^x over the bits in mask); amplitude may be per-row."""
    idx = np.arange(H.shape[0])
    H[idx, idx ^ mask] += amplitude


def build_hamiltonian(spec: HamiltonianSpec, cap: int = HARD_CAP) -> DenseOperator:
    N = spec.N
    if N > cap:
        raise ResourceError(f"dense engine is capped at N={cap}, got N={N}")
    dim = 2**N
    if spec.family == "dense_custom":
        mat = np.array(spec.matrix)
        if not np.allclose(mat, mat.conj().T, atol=1e-12):
            raise ConfigurationError("dense_custom matrix is not Hermitian")
        return DenseOperator(N, mat)
    z = _z_table(N)
    H = np.zeros((dim, dim))
    diag = np.zeros(dim)
    if spec.family == "mixed_field_ising":
        for i in range(N - 1):
            diag += spec.J * z[:, i] * z[:, i + 1]
        diag += spec.h * z.sum(axis=1)
        for site in range(1, N + 1):
            _add_flip(H, _site_mask(site, N), spec.g)
    elif spec.family == "tfim_ti":
        diag -= spec.g * z.sum(axis=1)
        for site in range(1, N):
            _add_flip(H, _site_mask(site, N) | _site_mask(site + 1, N), -spec.J)
        # boundary -J_bc X_N X_1 with J_bc = -P: the row-wise product P (X_N X_1)
        parity = np.prod(z, axis=1)
        _add_flip(H, _site_mask(N, N) | _site_mask(1, N), spec.J * parity)
    elif spec.family == "z_field_isospectral":
        # field points along the TFIM's -g Z so the ramp never passes through zero field
        for site, eps in enumerate(isospectral_energies(spec.g, N), start=1):
            diag -= 0.5 * eps * z[:, site - 1]
    else:  # pragma: no cover - guarded by HamiltonianSpec
        raise ConfigurationError(f"unsupported family {spec.family!r}")
    H[np.arange(dim), np.arange(dim)] += diag
    return DenseOperator(N, H)


def eigh(H) -> EigenDecomposition:
    mat = np.asarray(H)
    driver = "evd" if mat.shape[0] > 1 else None
    vals, vecs = linalg.eigh(mat, driver=driver)
    return EigenDecomposition(vals, vecs)


def gibbs(H, beta: float) -> DenseState:
    if not beta >= 0:
        raise DomainError(f"beta must be nonnegative, got {beta!r}")
    op = H if isinstance(H, DenseOperator) else DenseOperator(int(np.log2(np.asarray(H).shape[0])), np.asarray(H))
    eig = eigh(op.mat)
    w = spectral.gibbs_weights(eig.energies, beta)
    rho = (eig.vectors * w) @ eig.vectors.conj().T
    return DenseState(op.N, rho)


def _propagate(vectors: np.ndarray, energies: np.ndarray, psi: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i H dt) psi for H = V diag(E) V^T with real V (contiguous real matmuls stay on BLAS)."""
    phase = np.exp(-1j * energies * dt)[:, None]
    if np.isrealobj(vectors):
        vt = np.ascontiguousarray(vectors.T)
        if np.iscomplexobj(psi):
            coef = (vt @ np.ascontiguousarray(psi.real)) + 1j * (vt @ np.ascontiguousarray(psi.imag))
        else:
            coef = (vt @ psi).astype(complex)
        coef *= phase
        return (vectors @ np.ascontiguousarray(coef.real)) + 1j * (vectors @ np.ascontiguousarray(coef.imag))
    return vectors @ (phase * (vectors.conj().T @ psi))


def evolve_vectors(psi: np.ndarray, H_init: np.ndarray, H_final: np.ndarray, config: QateConfig) -> np.ndarray:
    """Apply the Trotterised QATE propagator to the columns of psi."""
    grid = config.grid()
    gammas = config.gammas()
    out = np.array(psi, copy=True)
    for gam in gammas:
        H_s = (1.0 - gam) * H_init + gam * H_final
        eig = eigh(H_s)
        out = _propagate(eig.vectors, eig.energies, out, grid.step)
    return out


def qate_evolve(rho: DenseState, config: QateConfig, cap: int = HARD_CAP) -> DenseState:
    """Conjugate rho by the product of exact step propagators exp(-i H(s_j) T/M).

    Internally the eigenvectors of rho are evolved, which is the same unitary
    conjugation applied to a factorised rho.
    """
    H_i = build_hamiltonian(config.h_init, cap).mat
    H_f = build_hamiltonian(config.h_final, cap).mat
    if rho.rho.shape != H_i.shape:
        raise ConfigurationError(f"state dimension {rho.rho.shape} does not match the Hamiltonian {H_i.shape}")
    weights, vecs = linalg.eigh(rho.rho)
    psi = evolve_vectors(vecs, H_i, H_f, config)
    return DenseState(rho.N, (psi * weights) @ psi.conj().T)


def coefficients_in_eigenbasis(rho, eig: EigenDecomposition) -> np.ndarray:
    V = eig.vectors
    r = np.asarray(rho)
    if r.shape[0] != V.shape[0]:
        raise ConfigurationError("state and eigenbasis dimensions differ")
    return V.conj().T @ r @ V


def reduced_density(rho: DenseState, sites) -> DenseState:
    """Partial trace onto the given 1-based sites (kept in ascending order)."""
    N = rho.N
    keep = sorted(set(int(s) for s in sites))
    if any(s < 1 or s > N for s in keep):
        raise DomainError(f"sites must lie in 1..{N}, got {sites!r}")
    if not keep:
        return DenseState(0, np.array([[np.trace(rho.rho)]]))
    if len(keep) == N:
        return DenseState(N, rho.rho.copy())
    drop = [s for s in range(1, N + 1) if s not in keep]
    axes_keep = [s - 1 for s in keep]
    axes_drop = [s - 1 for s in drop]
    t = rho.rho.reshape([2] * (2 * N))
    perm = axes_keep + axes_drop + [N + a for a in axes_keep] + [N + a for a in axes_drop]
    dk, dd = 2 ** len(keep), 2 ** len(drop)
    t = t.transpose(perm).reshape(dk, dd, dk, dd)
    return DenseState(len(keep), np.einsum("ajbj->ab", t))


def trace_norm_distance(a, b) -> float:
    diff = np.asarray(a) - np.asarray(b)
    if np.allclose(diff, diff.conj().T, atol=1e-13):
        return float(np.abs(linalg.eigvalsh(diff)).sum())
    return float(linalg.svdvals(diff).sum())


def correlation_series(rho, H, times) -> np.ndarray:
    """G(t) = Tr(exp(-iHt) rho exp(iHt) rho) by explicit propagation of rho."""
    eig = eigh(np.asarray(H))
    V, E = eig.vectors, eig.energies
    r = V.conj().T @ np.asarray(rho) @ V  # rho in the eigenbasis of H
    out = np.empty(len(times), dtype=complex)
    for n, t in enumerate(times):
        ph = np.exp(-1j * E * t)
        r_t = ph[:, None] * r * ph.conj()[None, :]
        out[n] = np.vdot(r_t.conj().T, r)  # Tr(r_t r)
    return out


# ---------------------------------------------------------------------------
# full runs


@dataclass
class DenseRun:
    """Outcome of a dense QATE run with everything the benchmarks need."""

    config: QateConfig
    weights: np.ndarray  # spectrum of rho_init, conserved
    psi: np.ndarray  # evolved eigenvectors of rho_init (columns)
    final: EigenDecomposition  # eigenbasis of H_final
    H_final: np.ndarray

    @property
    def rho(self) -> np.ndarray:
        return (self.psi * self.weights) @ self.psi.conj().T

    def state(self) -> DenseState:
        return DenseState(self.config.N, self.rho)

    def coefficients(self) -> np.ndarray:
        amp = self.final.vectors.conj().T @ self.psi
        return (amp * self.weights) @ amp.conj().T

    def rho_min(self) -> DenseState:
        pops, _ = spectral.rho_min_spectrum(np.sort(self.weights)[::-1], self.final.energies)
        V = self.final.vectors
        return DenseState(self.config.N, (V * pops) @ V.conj().T)


def _reflection_sectors(N: int) -> list[np.ndarray]:
    """Orthonormal bases (columns) of the even and odd sectors of the site reflection j -> N+1-j."""
    dim = 2**N
    idx = np.arange(dim)
    rev = np.zeros(dim, dtype=np.int64)
    for bit in range(N):
        rev |= ((idx >> bit) & 1) << (N - 1 - bit)
    fixed = idx[rev == idx]
    lo = idx[idx < rev]
    even = np.zeros((dim, len(fixed) + len(lo)))
    even[fixed, np.arange(len(fixed))] = 1.0
    cols = len(fixed) + np.arange(len(lo))
    even[lo, cols] = even[rev[lo], cols] = np.sqrt(0.5)
    odd = np.zeros((dim, len(lo)))
    odd[lo, np.arange(len(lo))] = np.sqrt(0.5)
    odd[rev[lo], np.arange(len(lo))] = -np.sqrt(0.5)
    return [even, odd] if len(lo) else [even]


def _reflection_symmetric(N: int, *mats) -> bool:
    if N < 2:
        return False
    idx = np.arange(2**N)
    rev = np.zeros_like(idx)
    for bit in range(N):
        rev |= ((idx >> bit) & 1) << (N - 1 - bit)
    return all(np.allclose(m, m[np.ix_(rev, rev)], atol=1e-13, rtol=0.0) for m in mats)


def run_qate_dense(config: QateConfig, cap: int = HARD_CAP, use_symmetry: bool = True) -> DenseRun:
    """Evolve every eigenvector of the initial Gibbs state through the Trotterised ramp.

    When both endpoint Hamiltonians are reflection symmetric the evolution is
    carried out sector by sector, which is exact and two to three times faster.
    """
    H_i = build_hamiltonian(config.h_init, cap).mat
    H_f = build_hamiltonian(config.h_final, cap).mat
    N = config.N
    if use_symmetry and np.isrealobj(H_i) and np.isrealobj(H_f) and _reflection_symmetric(N, H_i, H_f):
        sectors = _reflection_sectors(N)
    else:
        sectors = [np.eye(2**N)]
    init_e, psi_cols, fin_e, fin_v = [], [], [], []
    for U in sectors:
        hi = U.T @ H_i @ U
        hf = U.T @ H_f @ U
        init = eigh(hi)
        init_e.append(init.energies)
        psi_cols.append(U @ evolve_vectors(init.vectors, hi, hf, config))
        fin = eigh(hf)
        fin_e.append(fin.energies)
        fin_v.append(U @ fin.vectors)
    init_energies = np.concatenate(init_e)
    weights = spectral.gibbs_weights(init_energies, config.beta)
    psi = np.concatenate(psi_cols, axis=1)
    energies = np.concatenate(fin_e)
    order = np.argsort(energies, kind="stable")
    final = EigenDecomposition(energies[order], np.concatenate(fin_v, axis=1)[:, order])
    return DenseRun(config, weights, psi, final, H_f)


def dense_benchmarks(run: DenseRun) -> spectral.BenchmarkRecord:
    E = run.final.energies
    c = run.coefficients()
    pops = np.real(np.diag(c))
    energy = float(np.dot(pops, E))
    variance = float(np.dot(pops, E**2) - energy**2)
    lam = np.clip(linalg.eigvalsh(c), 0.0, None)
    purity = float(np.sum(lam**2))
    entropy = spectral.entropy_of_weights(lam)
    w_sorted = np.sort(run.weights)[::-1]
    min_pops, e_min = spectral.rho_min_spectrum(w_sorted, E)
    var_min = float(np.dot(min_pops, E**2) - e_min**2)
    s_init = spectral.entropy_of_weights(run.weights)
    beta_g = spectral.beta_for_entropy(E, s_init)
    e_gibbs = spectral.gibbs_energy(E, beta_g)
    return spectral.BenchmarkRecord.from_parts(
        energy=energy, e_min=e_min, e_gibbs=e_gibbs, variance=variance, var_min=var_min,
        cod=spectral.cod_from_coefficients(c, E), purity=purity, entropy=entropy,
    )
