"""JSON experiment descriptions: parsing, validation, defaults and engine resolution."""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError
from ..protocol import FAMILIES, HamiltonianSpec, RampSchedule

SCHEMA_VERSION = 1
ENGINES = ("tfim_blocks", "gaussian_fermion", "exact_diag", "auto")
FIT_AXES = ("T", "N", "S_over_N")
OBSERVABLES = ("rdm_central3", "relative_entropy")
BOD_METHODS = ("auto", "exact", "filtered")
DEFAULT_TAU = 0.1
DEFAULT_FILTER_X = 5.0
DEFAULT_ED_CAP = 12
QUADRATIC_FAMILIES = ("tfim_ti", "z_field_isospectral")

_TOP_KEYS = {
    "schema", "name", "description", "engine", "h_init", "h_final", "beta_list", "T_list", "N_list",
    "schedule", "tau", "filter", "bod", "fits", "output_dir", "observables", "e_min_rule",
}
_REQUIRED = ("schema", "name", "h_init", "h_final", "beta_list", "T_list", "N_list")
_HAM_KEYS = {"family", "J", "g", "h", "boundary", "matrix", "matrix_imag"}
_SCHEDULE_KEYS = {"kind", "samples"}
_FILTER_KEYS = {"x", "dt", "margin"}
_BOD_KEYS = {"delta", "omega_max", "method", "N_list", "T_list", "perturbative_order"}
_FIT_KEYS = {"quantity", "axis", "window", "where"}
_GRID_KEYS = {"start", "stop", "per_decade", "extra"}


def ed_cap() -> int:
    """Largest N the auto rule sends to exact diagonalisation (env ``QATE_ED_CAP``)."""
    raw = os.environ.get("QATE_ED_CAP")
    if raw is None or raw == "":
        return DEFAULT_ED_CAP
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigurationError(f"QATE_ED_CAP must be an integer, got {raw!r}") from None
    if cap < 1:
        raise ConfigurationError(f"QATE_ED_CAP must be positive, got {cap}")
    return cap


@dataclass(frozen=True)
class FilterInputs:
    x: float = DEFAULT_FILTER_X
    dt: float | None = None  # None: cover margin * 2||H||
    margin: float = 1.2


@dataclass(frozen=True)
class BodInputs:
    delta: float
    omega_max: float
    method: str = "auto"
    N_list: tuple[int, ...] | None = None  # restrict BOD to these points; None means all
    T_list: tuple[float, ...] | None = None
    perturbative_order: int | None = None

    def applies(self, N: int, T: float) -> bool:
        if self.N_list is not None and N not in self.N_list:
            return False
        if self.T_list is not None and not any(math.isclose(T, t, rel_tol=1e-9) for t in self.T_list):
            return False
        return True


@dataclass(frozen=True)
class FitSpec:
    quantity: str
    axis: str
    window: tuple[float, float] | None = None
    where: tuple[tuple[str, float], ...] = ()

    def to_dict(self) -> dict:
        out: dict = {"quantity": self.quantity, "axis": self.axis}
        if self.window is not None:
            out["window"] = list(self.window)
        if self.where:
            out["where"] = dict(self.where)
        return out


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    engine: str
    h_init: HamiltonianSpec  # N is a placeholder; each sweep point substitutes its own
    h_final: HamiltonianSpec
    beta_list: tuple[float, ...]
    T_list: tuple[float, ...]
    N_list: tuple[int, ...]
    schedules: tuple[RampSchedule, ...] = (RampSchedule(),)
    tau: float = DEFAULT_TAU
    filter: FilterInputs = field(default_factory=FilterInputs)
    bod: BodInputs | None = None
    fits: tuple[FitSpec, ...] = ()
    output_dir: str | None = None
    observables: tuple[str, ...] = ()
    e_min_rule: str = "auto"
    description: str = ""
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def resolve_engine(self, N: int) -> str:
        return resolve_engine(self.engine, self.h_init.family, self.h_final.family, N, self.h_init, self.h_final)

    def config_hash(self) -> str:
        # sweep axes are sets, so their listed order must not change the hash
        raw = dict(self.raw)
        for key in ("beta_list", "T_list", "N_list"):
            if isinstance(raw.get(key), list):
                raw[key] = sorted(raw[key])
        canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def resolve_engine(engine: str, fam_i: str, fam_f: str, N: int, h_init=None, h_final=None) -> str:
    """Engine for one sweep point; raises ConfigurationError when no engine can run it."""
    quadratic = fam_i in QUADRATIC_FAMILIES and fam_f in QUADRATIC_FAMILIES
    ti_pair = fam_i == "tfim_ti" and fam_f == "tfim_ti"
    if engine == "auto":
        if N <= ed_cap():
            return "exact_diag"
        if ti_pair:
            return "tfim_blocks"
        if quadratic:
            return "gaussian_fermion"
        raise ConfigurationError(
            f"no engine for {fam_i} -> {fam_f} at N={N}: above the dense cap {ed_cap()} and not a quadratic model"
        )
    if engine == "exact_diag":
        from ..exact_diag import HARD_CAP

        if N > HARD_CAP:
            raise ConfigurationError(f"exact_diag is capped at N={HARD_CAP}, got N={N}")
        return engine
    if engine == "tfim_blocks":
        if not ti_pair:
            raise ConfigurationError("tfim_blocks needs a tfim_ti -> tfim_ti pair")
        for spec in (h_init, h_final):
            if spec is not None and (spec.J != 1.0 or spec.h != 0.0):
                raise ConfigurationError("tfim_blocks needs J = 1 and h = 0 on both endpoints")
        return engine
    if engine == "gaussian_fermion":
        if not quadratic:
            raise ConfigurationError(f"gaussian_fermion needs quadratic families {QUADRATIC_FAMILIES}")
        return engine
    raise ConfigurationError(f"engine must be one of {ENGINES}, got {engine!r}")


# ---------------------------------------------------------------------------
# parsing helpers


def _fail(where: str, msg: str):
    raise ConfigurationError(f"{where}: {msg}")


def _check_keys(obj, allowed: set, where: str):
    if not isinstance(obj, dict):
        _fail(where, f"expected an object, got {type(obj).__name__}")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        _fail(f"{where}.{unknown[0]}" if where else unknown[0], f"unknown key (allowed: {', '.join(sorted(allowed))})")


def _number(value, where: str, *, positive=False, nonneg=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(where, f"expected a number, got {value!r}")
    val = float(value)
    if not math.isfinite(val):
        _fail(where, "must be finite")
    if positive and not val > 0:
        _fail(where, f"must be positive, got {val}")
    if nonneg and val < 0:
        _fail(where, f"must be nonnegative, got {val}")
    return val


def _number_list(value, where: str, **kw) -> tuple[float, ...]:
    if not isinstance(value, list) or not value:
        _fail(where, "expected a nonempty list")
    return tuple(_number(v, f"{where}[{i}]", **kw) for i, v in enumerate(value))


def log_grid(start: float, stop: float, per_decade: int) -> tuple[float, ...]:
    """Log-spaced points from start to stop inclusive, rounded to 6 significant digits."""
    n = int(math.floor(per_decade * math.log10(stop / start) + 1e-9))
    exps = math.log10(start) + np.arange(n + 1) / per_decade
    pts = [float(f"{10.0**e:.6g}") for e in exps]
    if not math.isclose(pts[-1], stop, rel_tol=1e-5):
        pts.append(float(stop))
    return tuple(pts)


def _parse_T(value, where: str) -> tuple[float, ...]:
    if isinstance(value, dict):
        _check_keys(value, _GRID_KEYS, where)
        for key in ("start", "stop", "per_decade"):
            if key not in value:
                _fail(f"{where}.{key}", "missing")
        start = _number(value["start"], f"{where}.start", positive=True)
        stop = _number(value["stop"], f"{where}.stop", positive=True)
        per = value["per_decade"]
        if isinstance(per, bool) or not isinstance(per, int) or per < 1:
            _fail(f"{where}.per_decade", f"expected a positive integer, got {per!r}")
        if stop < start:
            _fail(where, "stop must not be below start")
        pts = set(log_grid(start, stop, per))
        if "extra" in value:
            pts.update(_number_list(value["extra"], f"{where}.extra", positive=True))
        return tuple(sorted(pts))
    vals = _number_list(value, where, positive=True)
    return tuple(sorted(set(vals)))


def _parse_N(value, where: str) -> tuple[int, ...]:
    if not isinstance(value, list) or not value:
        _fail(where, "expected a nonempty list")
    out = []
    for i, v in enumerate(value):
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            _fail(f"{where}[{i}]", f"expected a positive integer, got {v!r}")
        out.append(v)
    return tuple(sorted(set(out)))


def _parse_hamiltonian(obj, where: str, N: int) -> HamiltonianSpec:
    _check_keys(obj, _HAM_KEYS, where)
    if "family" not in obj:
        _fail(f"{where}.family", "missing")
    family = obj["family"]
    if family not in FAMILIES:
        _fail(f"{where}.family", f"must be one of {FAMILIES}, got {family!r}")
    kw = {k: _number(obj[k], f"{where}.{k}") for k in ("J", "g", "h") if k in obj}
    matrix = None
    if "matrix" in obj:
        try:
            matrix = np.array(obj["matrix"], dtype=float)
            if "matrix_imag" in obj:
                matrix = matrix + 1j * np.array(obj["matrix_imag"], dtype=float)
        except (TypeError, ValueError):
            _fail(f"{where}.matrix", "must be a square numeric array")
    try:
        return HamiltonianSpec(family, N, boundary=obj.get("boundary"), matrix=matrix, **kw)
    except ConfigurationError as exc:
        _fail(where, str(exc))


def _parse_schedule(obj, where: str) -> RampSchedule:
    if isinstance(obj, str):
        obj = {"kind": obj}
    _check_keys(obj, _SCHEDULE_KEYS, where)
    samples = obj.get("samples")
    if samples is not None:
        try:
            samples = tuple((float(s), float(g)) for s, g in samples)
        except (TypeError, ValueError):
            _fail(f"{where}.samples", "expected a list of [s, gamma] pairs")
    try:
        return RampSchedule(obj.get("kind", "linear"), samples)
    except ConfigurationError as exc:
        _fail(where, str(exc))


def _parse_window(value, where: str) -> tuple[float, float]:
    if isinstance(value, str):
        parts = value.split(":")
        if len(parts) != 2:
            _fail(where, f"expected 'lo:hi', got {value!r}")
        try:
            value = [float(parts[0]), float(parts[1])]
        except ValueError:
            _fail(where, f"expected numbers in 'lo:hi', got {value!r}")
    if not isinstance(value, list) or len(value) != 2:
        _fail(where, "expected [lo, hi]")
    lo = _number(value[0], f"{where}[0]", positive=True)
    hi = _number(value[1], f"{where}[1]", positive=True)
    if not lo < hi:
        _fail(where, f"lower edge {lo} must be below upper edge {hi}")
    return lo, hi


# ---------------------------------------------------------------------------
# public entry points


def parse_config(data: dict, source: str = "<config>") -> ExperimentConfig:
    _check_keys(data, _TOP_KEYS, "")
    for key in _REQUIRED:
        if key not in data:
            _fail(key, "missing required key")
    if data["schema"] != SCHEMA_VERSION:
        _fail("schema", f"unsupported schema version {data['schema']!r}; expected {SCHEMA_VERSION}")
    name = data["name"]
    if not isinstance(name, str) or not name or any(c in name for c in "/\\,\n"):
        _fail("name", "must be a nonempty string without path separators or commas")
    engine = data.get("engine", "auto")
    if engine not in ENGINES:
        _fail("engine", f"must be one of {ENGINES}, got {engine!r}")

    N_list = _parse_N(data["N_list"], "N_list")
    T_list = _parse_T(data["T_list"], "T_list")
    beta_list = tuple(sorted(set(_number_list(data["beta_list"], "beta_list", nonneg=True))))
    probe_N = N_list[0]
    h_init = _parse_hamiltonian(data["h_init"], "h_init", probe_N)
    h_final = _parse_hamiltonian(data["h_final"], "h_final", probe_N)
    for N in N_list[1:]:
        for spec, where in ((h_init, "h_init"), (h_final, "h_final")):
            try:
                spec.with_N(N)
            except ConfigurationError as exc:
                _fail(f"{where} at N={N}", str(exc))

    sched_raw = data.get("schedule", "linear")
    sched_items = sched_raw if isinstance(sched_raw, list) else [sched_raw]
    if not sched_items:
        _fail("schedule", "expected a schedule or a nonempty list of schedules")
    schedules = tuple(
        _parse_schedule(s, f"schedule[{i}]" if isinstance(sched_raw, list) else "schedule") for i, s in enumerate(sched_items)
    )
    if len({s.kind for s in schedules}) != len(schedules):
        _fail("schedule", "schedule kinds in a sweep must be distinct")
    tau = _number(data.get("tau", DEFAULT_TAU), "tau", positive=True)

    filt_raw = data.get("filter", {})
    _check_keys(filt_raw, _FILTER_KEYS, "filter")
    filt = FilterInputs(
        x=_number(filt_raw.get("x", DEFAULT_FILTER_X), "filter.x", positive=True),
        dt=_number(filt_raw["dt"], "filter.dt", positive=True) if filt_raw.get("dt") is not None else None,
        margin=_number(filt_raw.get("margin", 1.2), "filter.margin", positive=True),
    )

    bod = None
    if data.get("bod") is not None:
        b = data["bod"]
        _check_keys(b, _BOD_KEYS, "bod")
        for key in ("delta", "omega_max"):
            if key not in b:
                _fail(f"bod.{key}", "missing")
        method = b.get("method", "auto")
        if method not in BOD_METHODS:
            _fail("bod.method", f"must be one of {BOD_METHODS}, got {method!r}")
        order = b.get("perturbative_order")
        if order is not None and order not in (1, 2):
            _fail("bod.perturbative_order", f"must be 1 or 2, got {order!r}")
        bod = BodInputs(
            delta=_number(b["delta"], "bod.delta", positive=True),
            omega_max=_number(b["omega_max"], "bod.omega_max", positive=True),
            method=method,
            N_list=_parse_N(b["N_list"], "bod.N_list") if "N_list" in b else None,
            T_list=_parse_T(b["T_list"], "bod.T_list") if "T_list" in b else None,
            perturbative_order=order,
        )
        if bod.N_list is not None and not set(bod.N_list) <= set(N_list):
            _fail("bod.N_list", "must be a subset of N_list")
        if bod.T_list is not None and not all(any(math.isclose(t, u, rel_tol=1e-9) for u in T_list) for t in bod.T_list):
            _fail("bod.T_list", "must be a subset of T_list")

    observables = data.get("observables", [])
    if not isinstance(observables, list):
        _fail("observables", "expected a list")
    for i, obs in enumerate(observables):
        if obs not in OBSERVABLES:
            _fail(f"observables[{i}]", f"must be one of {OBSERVABLES}, got {obs!r}")

    ranges = {"T": (min(T_list), max(T_list)), "N": (min(N_list), max(N_list))}
    fits = []
    for i, f in enumerate(data.get("fits", [])):
        where = f"fits[{i}]"
        _check_keys(f, _FIT_KEYS, where)
        for key in ("quantity", "axis"):
            if key not in f:
                _fail(f"{where}.{key}", "missing")
        if f["axis"] not in FIT_AXES:
            _fail(f"{where}.axis", f"must be one of {FIT_AXES}, got {f['axis']!r}")
        if not isinstance(f["quantity"], str):
            _fail(f"{where}.quantity", "expected a string")
        window = _parse_window(f["window"], f"{where}.window") if f.get("window") is not None else None
        if window is not None and f["axis"] in ranges:
            lo, hi = ranges[f["axis"]]
            if window[0] < lo * (1 - 1e-9) or window[1] > hi * (1 + 1e-9):
                _fail(f"{where}.window", f"{list(window)} lies outside the swept {f['axis']} range [{lo:g}, {hi:g}]")
        where_raw = f.get("where", {})
        if not isinstance(where_raw, dict):
            _fail(f"{where}.where", "expected an object of exact-match filters")
        filters = tuple(sorted((str(k), _number(v, f"{where}.where.{k}")) for k, v in where_raw.items()))
        fits.append(FitSpec(f["quantity"], f["axis"], window, filters))

    e_min_rule = data.get("e_min_rule", "auto")
    if e_min_rule not in ("auto", "modes", "global"):
        _fail("e_min_rule", f"must be auto, modes or global, got {e_min_rule!r}")
    output_dir = data.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        _fail("output_dir", "expected a string")
    description = data.get("description", "")
    if not isinstance(description, str):
        _fail("description", "expected a string")

    cfg = ExperimentConfig(
        name=name, engine=engine, h_init=h_init, h_final=h_final, beta_list=beta_list, T_list=T_list,
        N_list=N_list, schedules=schedules, tau=tau, filter=filt, bod=bod, fits=tuple(fits),
        output_dir=output_dir, observables=tuple(observables), e_min_rule=e_min_rule,
        description=description, raw=data,
    )
    for N in N_list:
        try:
            cfg.resolve_engine(N)
        except ConfigurationError as exc:
            _fail(f"engine at N={N}", str(exc))
    return cfg


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON experiment description.

    A bare bundled name such as ``"fig2"`` is accepted when no file of that
    name exists.
    """
    p = Path(path)
    if not p.exists():
        bundled = bundled_config_path(str(path))
        if bundled is None:
            raise FileNotFoundError(f"config file not found: {path}")
        p = bundled
    text = p.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{p}:{exc.lineno}:{exc.colno}: JSON parse error: {exc.msg}") from None
    try:
        return parse_config(data, str(p))
    except ConfigurationError as exc:
        raise ConfigurationError(f"{p}: {exc}") from None


def bundled_names() -> list[str]:
    root = resources.files("qate.experiments") / "configs"
    return sorted(entry.name[:-5] for entry in root.iterdir() if entry.name.endswith(".json"))


def bundled_config_path(name: str) -> Path | None:
    stem = name[:-5] if name.endswith(".json") else name
    if stem not in bundled_names():
        return None
    return Path(str(resources.files("qate.experiments") / "configs" / f"{stem}.json"))
