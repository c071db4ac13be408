"""Engine-agnostic adiabaticity benchmarks.

Commutator off-diagonality (COD), binned off-diagonality (BOD, exact and
filtered), the minimal-energy isospectral state, Gibbs references matched in
entropy or energy, relative entropy, and Gaussian density-of-states closed
forms.

Functions take plain numpy arrays; objects exposing ``__array__`` (the dense
engine's state/operator types) are accepted as well.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from scipy import linalg, optimize
from scipy.special import logsumexp

from .errors import ConfigurationError, DomainError

BETA_BRACKET = (1e-6, 1e3)


def _mat(x) -> np.ndarray:
    return np.asarray(x)


# ---------------------------------------------------------------------------
# record types


@dataclass
class BenchmarkRecord:
    """Scalar benchmarks of one QATE run.

    Units: energies in the Hamiltonian's unit, variances and COD in energy
    squared, the rest dimensionless. ``delta_var = variance - var_min``.
    """

    energy: float
    e_min: float
    delta_e_qate: float
    delta_e_min: float
    variance: float
    var_min: float
    delta_var: float
    cod: float
    purity: float
    entropy: float

    @classmethod
    def from_parts(cls, *, energy, e_min, e_gibbs, variance, var_min, cod, purity, entropy):
        return cls(
            energy=float(energy),
            e_min=float(e_min),
            delta_e_qate=float(energy - e_min),
            delta_e_min=float(e_min - e_gibbs),
            variance=float(variance),
            var_min=float(var_min),
            delta_var=float(variance - var_min),
            cod=float(cod),
            purity=float(purity),
            entropy=float(entropy),
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class BodHistogram:
    bin_centers: np.ndarray
    bin_width: float
    values: np.ndarray
    purity_norm: float
    kernel: str = "tophat"
    log_purity_norm: float | None = None

    def __post_init__(self):
        self.bin_centers = np.asarray(self.bin_centers, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.log_purity_norm is None and self.purity_norm > 0:
            self.log_purity_norm = math.log(self.purity_norm)

    @property
    def total(self) -> float:
        return float(self.values.sum())

    def rows(self):
        for w, v in zip(self.bin_centers, self.values):
            yield float(w), float(v), float(self.bin_width), float(self.purity_norm)


# ---------------------------------------------------------------------------
# off-diagonality


def cod(rho, H) -> float:
    """-Tr([H, rho]^2) / Tr(rho^2).

    The commutator of two Hermitian matrices is anti-Hermitian, so
    -Tr(C^2) equals the squared Frobenius norm of C.
    """
    rho = _mat(rho)
    H = _mat(H)
    if rho.shape != H.shape:
        raise ConfigurationError(f"state and Hamiltonian shapes differ: {rho.shape} vs {H.shape}")
    purity = float(np.vdot(rho, rho).real)
    if not purity > 0.0:
        raise DomainError("state has zero purity")
    comm = H @ rho - rho @ H
    return float(np.vdot(comm, comm).real) / purity


def cod_from_coefficients(c, energies) -> float:
    """Sum |c_ij|^2 (E_i - E_j)^2 / sum |c_ij|^2."""
    c = _mat(c)
    e = np.asarray(energies, dtype=float)
    w = np.abs(c) ** 2
    total = w.sum()
    if not total > 0.0:
        raise DomainError("coefficient matrix is zero")
    gaps = e[:, None] - e[None, :]
    return float((w * gaps**2).sum() / total)


def _pair_masses(c, energies):
    c = _mat(c)
    e = np.asarray(energies, dtype=float)
    w = (np.abs(c) ** 2).ravel()
    gaps = np.abs(e[:, None] - e[None, :]).ravel()
    return gaps, w


def _gaussian_window(gaps, weights, omega, sigma, chunk=1 << 22):
    """Folded Gaussian window: exp(-(x-w)^2/2s^2) + exp(-(x+w)^2/2s^2) for w > 0, one term at w = 0."""
    out = np.zeros(len(omega))
    keep = weights > 0
    gaps = gaps[keep]
    weights = weights[keep]
    step = max(1, chunk // max(1, len(omega)))
    for lo in range(0, len(gaps), step):
        x = gaps[lo : lo + step, None]
        w = weights[lo : lo + step, None]
        k = np.exp(-((x - omega[None, :]) ** 2) / (2 * sigma**2))
        pos = omega > 0
        k[:, pos] += np.exp(-((x + omega[None, pos]) ** 2) / (2 * sigma**2))
        out += (w * k).sum(axis=0)
    return out


def bod_exact(c, energies, delta: float, *, kernel: str = "tophat", omega_max: float | None = None,
              omega_grid=None, sigma: float | None = None) -> BodHistogram:
    """Binned off-diagonality from eigenbasis coefficients.

    ``kernel="tophat"`` bins |E_i - E_j| into windows of width 2*delta centred
    at 0, 2*delta, 4*delta, ... (diagonal pairs land in the first bin).
    ``kernel="gaussian"`` evaluates the same folded Gaussian window the time
    filter produces, so the two can be compared bin by bin; ``sigma`` overrides
    the window width (use the filter's effective width).
    """
    if not delta > 0.0:
        raise DomainError(f"bin half-width delta must be positive, got {delta!r}")
    gaps, w = _pair_masses(c, energies)
    total = w.sum()
    if not total > 0.0:
        raise DomainError("coefficient matrix is zero")
    width = 2.0 * delta
    if kernel == "tophat":
        idx = np.floor((gaps + delta) / width).astype(np.int64)
        nbins = int(idx.max()) + 1
        if omega_max is not None:
            nbins = max(nbins, int(math.floor(omega_max / width + 0.5)) + 1)
        masses = np.bincount(idx, weights=w, minlength=nbins) / total
        centers = width * np.arange(len(masses))
        if omega_max is not None:
            # bins beyond omega_max are dropped, mass there is not redistributed
            keep = centers <= omega_max + 1e-12
            centers, masses = centers[keep], masses[keep]
        return BodHistogram(centers, width, masses, float(total), kernel="tophat")
    if kernel == "gaussian":
        if omega_grid is None:
            top = omega_max if omega_max is not None else float(gaps.max()) + 5 * delta
            omega_grid = width * np.arange(int(math.floor(top / width)) + 1)
        omega = np.asarray(omega_grid, dtype=float)
        if np.any(omega < 0):
            raise DomainError("omega grid must be nonnegative")
        vals = _gaussian_window(gaps, w, omega, sigma if sigma is not None else delta) / total
        return BodHistogram(omega, width, vals, float(total), kernel="gaussian")
    raise ConfigurationError(f"unknown BOD kernel {kernel!r}")


# ---------------------------------------------------------------------------
# time-signal filter


@dataclass(frozen=True)
class FilterSpec:
    """Binomial approximation of a Gaussian window from time samples.

    ``sigma`` is the window width actually realised after rounding the
    binomial order to an even integer; it differs from ``delta`` by a relative
    amount of order 1/m_order.
    """

    delta: float
    dt: float
    x: float
    n_scale: float
    m_order: int
    half_range: int
    times: np.ndarray = field(repr=False)
    coeffs: np.ndarray = field(repr=False)

    @property
    def sigma(self) -> float:
        return self.n_scale / math.sqrt(self.m_order)

    @property
    def omega_limit(self) -> float:
        return self.n_scale * math.pi / 2.0

    @property
    def error_bound(self) -> float:
        return 2.0 * math.exp(-self.x**2 / 2.0)

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.half_range, self.half_range + 1)


def _binomial_weights(m_order: int, half_range: int) -> np.ndarray:
    """2^-M binom(M, M/2 - m) for m = -R..R, normalised over the retained range."""
    half = m_order // 2
    m = np.arange(0, half_range + 1)
    # log c_{m+1} - log c_m = log((M/2 - m) / (M/2 + m + 1))
    ratios = np.log((half - m[:-1]) / (half + m[:-1] + 1.0)) if half_range > 0 else np.array([])
    logc = np.concatenate([[0.0], np.cumsum(ratios)])
    full = np.concatenate([logc[:0:-1], logc])
    weights = np.exp(full - full.max())
    return weights / weights.sum()


def filter_design(delta: float, dt: float, x: float = 5.0) -> FilterSpec:
    if not (delta > 0 and dt > 0 and x > 0):
        raise DomainError("filter parameters delta, dt and x must be positive")
    n_scale = 2.0 / dt
    ideal = (n_scale / delta) ** 2
    m_order = max(2, 2 * int(round(ideal / 2.0)))
    half_range = int(round(x * math.sqrt(m_order)))
    # binomial coefficients vanish beyond |m| = M/2
    half_range = max(1, min(half_range, m_order // 2))
    m = np.arange(-half_range, half_range + 1)
    times = 2.0 * m / n_scale
    coeffs = _binomial_weights(m_order, half_range)
    return FilterSpec(delta=float(delta), dt=float(dt), x=float(x), n_scale=n_scale, m_order=m_order,
                      half_range=half_range, times=times, coeffs=coeffs)


def default_filter_dt(spectral_norm: float, margin: float = 1.2) -> float:
    """Sampling step whose validity domain covers margin * 2 * ||H||."""
    if not spectral_norm > 0:
        raise DomainError("spectral norm must be positive")
    return math.pi / (margin * 2.0 * spectral_norm)


def _check_omega(filt: FilterSpec, omega):
    omega = np.asarray(omega, dtype=float)
    if np.any(np.abs(omega) > filt.omega_limit * (1 + 1e-12)):
        raise DomainError(f"omega grid exceeds the filter validity domain |omega| <= {filt.omega_limit:.6g}")
    return omega


def filter_signal(filt: FilterSpec, correlations, omega, chunk: int = 1 << 22) -> np.ndarray:
    """Raw f(omega) = Re sum_m c_m exp(i omega t_m) G(t_m) on an arbitrary signed grid."""
    omega = _check_omega(filt, omega)
    g = np.asarray(correlations)
    if g.shape != filt.times.shape:
        raise ConfigurationError(f"correlation samples must match the filter grid ({len(filt.times)} points), got {g.shape}")
    weighted = filt.coeffs * g
    out = np.zeros(len(omega), dtype=complex)
    step = max(1, chunk // max(1, len(filt.times)))
    for lo in range(0, len(omega), step):
        w = omega[lo : lo + step]
        out[lo : lo + step] = np.exp(1j * np.outer(w, filt.times)) @ weighted
    scale = max(float(np.abs(out).max()), 1e-300)
    if np.abs(out.imag).max() > 1e-6 * scale:
        raise ArithmeticError("filtered signal has a non-negligible imaginary part; correlations are not Hermitian-symmetric")
    return out.real


def bod_filtered(correlations, filt: FilterSpec, omega_grid, purity: float = 1.0) -> BodHistogram:
    """Gaussian-window off-diagonality from correlation samples G(t_m) = Tr(rho(t) rho).

    Values at omega > 0 fold both signs of the energy difference so they are
    comparable with histograms over |E_i - E_j|.
    """
    omega = _check_omega(filt, omega_grid)
    if np.any(omega < 0):
        raise DomainError("omega grid must be nonnegative")
    if not purity > 0:
        raise DomainError("purity must be positive")
    pos = filter_signal(filt, correlations, omega)
    neg = filter_signal(filt, correlations, -omega)
    vals = np.where(omega > 0, pos + neg, pos) / purity
    return BodHistogram(omega, 2.0 * filt.delta, vals, float(purity), kernel="gaussian")


# ---------------------------------------------------------------------------
# minimal-energy state and Gibbs references


def rho_min_spectrum(init_weights, final_energies):
    """Pair the largest weights with the lowest final energies.

    Ties keep their input order (stable sort), which picks one member of the
    optimal set when the final spectrum is degenerate.
    """
    w = np.asarray(init_weights, dtype=float)
    e = np.asarray(final_energies, dtype=float)
    if w.shape != e.shape or w.ndim != 1:
        raise ConfigurationError(f"weights and energies must be 1-D of equal length, got {w.shape} and {e.shape}")
    if not math.isclose(w.sum(), 1.0, rel_tol=0, abs_tol=1e-8):
        raise DomainError(f"weights must sum to 1, got {w.sum()!r}")
    order = np.argsort(e, kind="stable")
    populations = np.empty_like(w)
    populations[order] = np.sort(w, kind="stable")[::-1]
    return populations, float(np.dot(populations, e))


def gibbs_weights(energies, beta: float) -> np.ndarray:
    e = np.asarray(energies, dtype=float)
    logw = -beta * (e - e.min())
    return np.exp(logw - logsumexp(logw))


def gibbs_energy(energies, beta: float) -> float:
    e = np.asarray(energies, dtype=float)
    return float(np.dot(gibbs_weights(e, beta), e))


def gibbs_entropy(energies, beta: float) -> float:
    e = np.asarray(energies, dtype=float)
    shifted = e - e.min()
    log_z = logsumexp(-beta * shifted)
    p = np.exp(-beta * shifted - log_z)
    return float(beta * np.dot(p, shifted) + log_z)


def _spectrum(H) -> np.ndarray:
    arr = _mat(H)
    if arr.ndim == 1:
        return np.sort(arr.astype(float))
    return linalg.eigvalsh(arr)


def solve_beta(func, target: float, quantity: str, bracket=BETA_BRACKET) -> float:
    """Bisection for func(beta) = target with func monotonically decreasing in beta."""
    lo, hi = bracket
    f_lo, f_hi = func(lo), func(hi)
    if not (f_hi <= target <= f_lo):
        raise DomainError(f"target {quantity} {target!r} is outside the attainable range [{f_hi!r}, {f_lo!r}] "
                          f"for beta in [{lo}, {hi}]")
    if target == f_lo:
        return lo
    if target == f_hi:
        return hi
    return optimize.bisect(lambda b: func(b) - target, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                           maxiter=2000)


def beta_for_entropy(H_final, S_target: float) -> float:
    e = _spectrum(H_final)
    return solve_beta(lambda b: gibbs_entropy(e, b), float(S_target), "entropy")


def beta_for_energy(H_final, E_target: float) -> float:
    e = _spectrum(H_final)
    return solve_beta(lambda b: gibbs_energy(e, b), float(E_target), "energy")


# ---------------------------------------------------------------------------
# entropies


def _eigvals_psd(rho) -> np.ndarray:
    arr = _mat(rho)
    if arr.ndim == 1:
        return arr.astype(float)
    return linalg.eigvalsh(arr)


def entropy_of_weights(p) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-np.dot(p, np.log(p)))


def von_neumann_entropy(rho) -> float:
    lam = _eigvals_psd(rho)
    return entropy_of_weights(np.clip(lam, 0.0, None))


def relative_entropy(rho, sigma) -> float:
    """D(rho || sigma) = Tr rho ln rho - Tr rho ln sigma."""
    rho = _mat(rho)
    sigma = _mat(sigma)
    if rho.shape != sigma.shape:
        raise ConfigurationError("states must have equal dimensions")
    s_val, s_vec = linalg.eigh(sigma)
    if s_val.min() <= 0.0:
        raise DomainError("reference state sigma must be full rank")
    r_val = linalg.eigvalsh(rho)
    log_sigma = (s_vec * np.log(s_val)) @ s_vec.conj().T
    cross = float(np.real(np.vdot(log_sigma.conj().T, rho)))  # Tr(rho ln sigma)
    return -entropy_of_weights(np.clip(r_val, 0.0, None)) - cross


def relative_entropy_isospectral_identity(beta: float, delta_e: float) -> float:
    return float(beta * delta_e)


# ---------------------------------------------------------------------------
# Gaussian density of states


@dataclass(frozen=True)
class GaussianDosRecord:
    e_gibbs_init: float
    entropy: float
    beta_final: float
    e_min: float
    e_gibbs_final: float
    delta_e_min: float
    var_min: float


def gaussian_dos_suite(beta: float, sigma_init: float, sigma_final: float, N: int) -> GaussianDosRecord:
    """Closed forms for spectra with Gaussian densities of states.

    With E(beta, sigma) = -beta sigma^2 and S = N ln 2 - beta^2 sigma^2 / 2 the
    isentropic final temperature is beta sigma_i / sigma_f. The energies are
    evaluated in exact rational arithmetic so the identity E_min = E_G survives
    floating-point rounding.
    """
    if not (sigma_init > 0 and sigma_final > 0):
        raise DomainError("Gaussian widths must be positive")
    b, si, sf = Fraction(beta), Fraction(sigma_init), Fraction(sigma_final)
    beta_final = b * si / sf
    e_min = -b * si * sf
    e_gibbs_final = -beta_final * sf * sf
    return GaussianDosRecord(
        e_gibbs_init=float(-b * si * si),
        entropy=N * math.log(2.0) - float(b * b * si * si) / 2.0,
        beta_final=float(beta_final),
        e_min=float(e_min),
        e_gibbs_final=float(e_gibbs_final),
        delta_e_min=float(e_min - e_gibbs_final),
        var_min=float(sf * sf),
    )
