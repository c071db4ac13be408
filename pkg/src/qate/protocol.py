"""Ramp schedules, interpolated Hamiltonian paths and the Trotter time grid.

All engines share the same discretisation: the ramp parameter s runs over
``s_j = j / M`` for ``j = 1..M`` and each step evolves for ``T / M`` under the
Hamiltonian frozen at the step's end point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError, DomainError

SCHEDULE_KINDS = ("linear", "smooth", "tabulated")
FAMILIES = ("tfim_ti", "z_field_isospectral", "mixed_field_ising", "dense_custom")
BOUNDARIES = ("open", "parity_sector")

# dense grid used to certify monotonicity of a schedule
_MONOTONE_GRID = 1001


@dataclass(frozen=True)
class RampSchedule:
    """Interpolation profile gamma(s) with gamma(0) = 0 and gamma(1) = 1."""

    kind: str = "linear"
    samples: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ConfigurationError(f"schedule kind must be one of {SCHEDULE_KINDS}, got {self.kind!r}")
        if self.kind == "tabulated":
            if not self.samples or len(self.samples) < 2:
                raise ConfigurationError("tabulated schedule needs at least two (s, gamma) samples")
            pts = sorted((float(s), float(g)) for s, g in self.samples)
            s_vals = [p[0] for p in pts]
            if s_vals[0] < 0.0 or s_vals[-1] > 1.0:
                raise ConfigurationError("tabulated sample positions must lie in [0, 1]")
            if len(set(s_vals)) != len(s_vals):
                raise ConfigurationError("tabulated sample positions must be distinct")
            # clamp the endpoints so gamma(0) = 0 and gamma(1) = 1 hold exactly
            if s_vals[0] > 0.0:
                pts.insert(0, (0.0, 0.0))
            if s_vals[-1] < 1.0:
                pts.append((1.0, 1.0))
            pts[0] = (0.0, 0.0)
            pts[-1] = (1.0, 1.0)
            object.__setattr__(self, "samples", tuple(pts))
            gam = np.array([p[1] for p in pts])
            if np.any(np.diff(gam) < 0.0):
                raise ConfigurationError("tabulated schedule is not monotone nondecreasing")
        elif self.samples is not None:
            raise ConfigurationError(f"samples are only allowed for tabulated schedules, not {self.kind!r}")

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.samples is not None:
            out["samples"] = [list(p) for p in self.samples]
        return out


def _check_unit_interval(s):
    arr = np.asarray(s, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"ramp parameter s must lie in [0, 1], got {s!r}")
    return arr


def smooth_profile(s):
    """sin(pi/2 sin^2(pi s / 2))^2 without domain checks (it extends evenly past 0 and 1)."""
    return np.sin(0.5 * np.pi * np.sin(0.5 * np.pi * np.asarray(s, dtype=float)) ** 2) ** 2


def gamma_eval(schedule: RampSchedule, s):
    """Evaluate gamma(s). Accepts scalars or arrays; returns the same shape."""
    arr = _check_unit_interval(s)
    if schedule.kind == "linear":
        out = arr.copy()
    elif schedule.kind == "smooth":
        out = smooth_profile(arr)
    else:
        xs = np.array([p[0] for p in schedule.samples])
        ys = np.array([p[1] for p in schedule.samples])
        out = np.interp(arr, xs, ys)
    if np.ndim(s) == 0:
        return float(out)
    return out


def gamma_derivative(schedule: RampSchedule, s):
    """d gamma / ds, analytic for linear and smooth ramps, piecewise for tables."""
    arr = _check_unit_interval(s)
    if schedule.kind == "linear":
        out = np.ones_like(arr)
    elif schedule.kind == "smooth":
        u = 0.5 * np.pi * np.sin(0.5 * np.pi * arr) ** 2
        out = np.sin(2.0 * u) * (np.pi**2 / 4.0) * np.sin(np.pi * arr)
    else:
        xs = np.array([p[0] for p in schedule.samples])
        ys = np.array([p[1] for p in schedule.samples])
        slopes = np.diff(ys) / np.diff(xs)
        idx = np.clip(np.searchsorted(xs, arr, side="right") - 1, 0, len(slopes) - 1)
        out = slopes[idx]
    if np.ndim(s) == 0:
        return float(out)
    return out


def is_monotone(schedule: RampSchedule, points: int = _MONOTONE_GRID) -> bool:
    grid = np.linspace(0.0, 1.0, points)
    vals = gamma_eval(schedule, grid)
    return bool(np.all(np.diff(vals) >= 0.0)) and vals[0] == 0.0 and vals[-1] == 1.0


def interpolated_coupling(g0, g1, schedule: RampSchedule, s):
    """(1 - gamma(s)) g0 + gamma(s) g1, componentwise for array-like couplings."""
    gam = gamma_eval(schedule, s)
    a = np.asarray(g0, dtype=float)
    b = np.asarray(g1, dtype=float)
    out = (1.0 - gam) * a + gam * b
    if np.ndim(out) == 0:
        return float(out)
    return out


class TrotterGrid(NamedTuple):
    points: np.ndarray  # s_j = j / M, j = 1..M
    step: float  # duration of each step, T / M

    @property
    def steps(self) -> int:
        return len(self.points)


def step_count(T: float, tau: float) -> int:
    """ceil(T / tau), snapping to the nearest integer when the ratio is integral up to rounding."""
    if not (T > 0.0 and tau > 0.0) or not (math.isfinite(T) and math.isfinite(tau)):
        raise DomainError(f"T and tau must be positive and finite, got T={T!r}, tau={tau!r}")
    ratio = T / tau
    nearest = round(ratio)
    if nearest >= 1 and abs(ratio - nearest) <= 1e-9 * max(1.0, ratio):
        return int(nearest)
    return max(1, math.ceil(ratio))


def trotter_grid(T: float, tau: float) -> TrotterGrid:
    m = step_count(T, tau)
    points = np.arange(1, m + 1, dtype=float) / m
    return TrotterGrid(points=points, step=T / m)


@dataclass(frozen=True)
class HamiltonianSpec:
    """Model family plus couplings. ``matrix`` is only used by ``dense_custom``."""

    family: str
    N: int
    J: float = 1.0
    g: float = 0.0
    h: float = 0.0
    boundary: str | None = None
    matrix: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown Hamiltonian family {self.family!r}; expected one of {FAMILIES}")
        if int(self.N) != self.N or self.N < 1:
            raise ConfigurationError(f"N must be a positive integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        for name in ("J", "g", "h"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise ConfigurationError(f"coupling {name} must be finite")
            object.__setattr__(self, name, val)
        boundary = self.boundary
        if boundary is None:
            boundary = "parity_sector" if self.family == "tfim_ti" else "open"
            object.__setattr__(self, "boundary", boundary)
        if boundary not in BOUNDARIES:
            raise ConfigurationError(f"boundary must be one of {BOUNDARIES}, got {boundary!r}")
        if self.family == "tfim_ti":
            if self.N % 2:
                raise ConfigurationError(f"tfim_ti needs an even number of sites, got N={self.N}")
            if boundary != "parity_sector":
                raise ConfigurationError("tfim_ti is only defined with the parity_sector boundary")
        if self.family == "mixed_field_ising" and boundary != "open":
            raise ConfigurationError("mixed_field_ising uses an open boundary")
        if self.family == "dense_custom":
            if self.matrix is None:
                raise ConfigurationError("dense_custom requires an explicit matrix")
            mat = np.asarray(self.matrix)
            if mat.shape != (2**self.N, 2**self.N):
                raise ConfigurationError(f"dense_custom matrix must be {2**self.N}x{2**self.N}")

    def with_N(self, N: int) -> "HamiltonianSpec":
        return HamiltonianSpec(self.family, N, self.J, self.g, self.h, self.boundary, self.matrix)

    def couplings(self) -> np.ndarray:
        return np.array([self.J, self.g, self.h])

    def to_dict(self) -> dict:
        return {"family": self.family, "J": self.J, "g": self.g, "h": self.h, "boundary": self.boundary}


@dataclass(frozen=True)
class QateConfig:
    beta: float
    total_time: float
    h_init: HamiltonianSpec
    h_final: HamiltonianSpec
    tau: float = 0.1
    schedule: RampSchedule = field(default_factory=RampSchedule)

    def __post_init__(self):
        if not (self.beta >= 0.0) or not math.isfinite(self.beta):
            raise DomainError(f"beta must be finite and nonnegative, got {self.beta!r}")
        step_count(self.total_time, self.tau)  # validates T and tau
        if self.h_init.N != self.h_final.N:
            raise ConfigurationError(f"endpoint Hamiltonians have different N: {self.h_init.N} vs {self.h_final.N}")

    @property
    def N(self) -> int:
        return self.h_init.N

    @property
    def steps(self) -> int:
        return step_count(self.total_time, self.tau)

    def grid(self) -> TrotterGrid:
        return trotter_grid(self.total_time, self.tau)

    def gammas(self) -> np.ndarray:
        """gamma(s_j) at every Trotter step."""
        return np.asarray(gamma_eval(self.schedule, self.grid().points))
