"""Log-log power-law fits over persisted sweep records."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError

# parameters that identify a curve for each fit axis (everything but the axis itself)
_GROUP_KEYS = {
    "T": ("engine", "N", "beta", "schedule", "tau"),
    "N": ("engine", "T", "beta", "schedule", "tau"),
    "S_over_N": ("engine", "N", "T", "schedule", "tau"),
}


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    prefactor: float
    r2: float
    n_points: int

    def to_dict(self) -> dict:
        return {"exponent": self.exponent, "prefactor": self.prefactor, "r2": self.r2, "n_points": self.n_points}


def fit_power_law(x, y, window=None) -> PowerLawFit:
    """Least-squares line through (ln x, ln y); the slope is the exponent.

    ``window = (lo, hi)`` keeps only points with lo <= x <= hi.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DomainError("x and y must have the same length")
    if window is not None:
        lo, hi = window
        keep = (x >= lo * (1 - 1e-12)) & (x <= hi * (1 + 1e-12))
        x, y = x[keep], y[keep]
    if len(x) < 3:
        raise DomainError(f"a power-law fit needs at least 3 points in the window, got {len(x)}")
    if np.any(~np.isfinite(x)) or np.any(~np.isfinite(y)) or np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("power-law fits need finite, strictly positive x and y")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    spread = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - float(np.sum(resid**2)) / float(spread) if spread > 0 else 1.0
    return PowerLawFit(float(slope), float(math.exp(intercept)), r2, int(len(x)))


def fit_linear(x, y) -> PowerLawFit:
    """Ordinary straight-line fit y = a + b x, reported in the same record (exponent = slope b)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 3:
        raise DomainError(f"a linear fit needs at least 3 points, got {len(x)}")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    spread = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - float(np.sum(resid**2)) / float(spread) if spread > 0 else 1.0
    return PowerLawFit(float(slope), float(intercept), r2, int(len(x)))


def record_value(record, quantity: str) -> float:
    """A benchmark field, an extra, or a derived per-site quantity ("<field>_per_N")."""
    if quantity == "S_over_N":
        return record.entropy / record.N
    if quantity.endswith("_per_N"):
        return record_value(record, quantity[: -len("_per_N")]) / record.N
    if hasattr(record, quantity) and quantity not in ("extras", "error", "name", "engine", "schedule"):
        return float(getattr(record, quantity))
    if quantity in record.extras:
        return float(record.extras[quantity])
    raise DomainError(f"unknown quantity {quantity!r}")


def axis_value(record, axis: str) -> float:
    if axis == "T":
        return float(record.T)
    if axis == "N":
        return float(record.N)
    if axis == "S_over_N":
        return record.entropy / record.N
    raise DomainError(f"unknown fit axis {axis!r}")


@dataclass(frozen=True)
class GroupFit:
    key: tuple  # ((param, value), ...)
    fit: PowerLawFit | None
    error: str = ""

    def to_dict(self) -> dict:
        out = {"group": dict(self.key), "error": self.error}
        out.update(self.fit.to_dict() if self.fit is not None else {"exponent": None, "prefactor": None, "r2": None, "n_points": 0})
        return out


def fit_records(records, quantity: str, axis: str, window=None, where=()) -> list[GroupFit]:
    """Fit ``quantity`` against ``axis`` separately for every curve in the records.

    Records that failed are skipped. ``where`` is a sequence of (param, value)
    exact-match filters applied first.
    """
    if axis not in _GROUP_KEYS:
        raise DomainError(f"unknown fit axis {axis!r}")
    keys = _GROUP_KEYS[axis]
    groups: dict[tuple, list] = {}
    for rec in records:
        if rec.error:
            continue
        if any(not math.isclose(float(getattr(rec, k)), float(v), rel_tol=1e-9) for k, v in where):
            continue
        key = tuple((k, getattr(rec, k)) for k in keys)
        groups.setdefault(key, []).append(rec)
    out = []
    for key in sorted(groups, key=lambda kv: tuple(str(v) if isinstance(v, str) else v for _, v in kv)):
        recs = sorted(groups[key], key=lambda r: axis_value(r, axis))
        try:
            xs = [axis_value(r, axis) for r in recs]
            ys = [record_value(r, quantity) for r in recs]
            out.append(GroupFit(key, fit_power_law(xs, ys, window)))
        except DomainError as exc:
            out.append(GroupFit(key, None, str(exc)))
    return out
