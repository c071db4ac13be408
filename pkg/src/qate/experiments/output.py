"""Result records and their CSV / JSON serialisations."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..errors import DomainError

CSV_HEADER = (
    "name,engine,N,T,beta,schedule,tau,energy,e_min,delta_e_qate,delta_e_min,"
    "variance,var_min,delta_var,cod,purity,entropy,error"
)
BOD_HEADER = "omega,mass,bin_width,purity_norm"
BENCHMARK_FIELDS = (
    "energy", "e_min", "delta_e_qate", "delta_e_min", "variance", "var_min", "delta_var", "cod", "purity", "entropy",
)


@dataclass
class ResultRecord:
    name: str
    engine: str
    N: int
    T: float
    beta: float
    schedule: str
    tau: float
    energy: float = math.nan
    e_min: float = math.nan
    delta_e_qate: float = math.nan
    delta_e_min: float = math.nan
    variance: float = math.nan
    var_min: float = math.nan
    delta_var: float = math.nan
    cod: float = math.nan
    purity: float = math.nan
    entropy: float = math.nan
    error: str = ""
    config_hash: str = ""
    bod_file: str | None = None
    extras: dict = field(default_factory=dict)
    wall_time: float = math.nan  # kept out of the deterministic outputs

    @property
    def key(self) -> tuple:
        return (self.N, self.T, self.beta, self.schedule)

    def to_dict(self, with_timing: bool = False) -> dict:
        out = asdict(self)
        if not with_timing:
            out.pop("wall_time")
        return out


def sort_records(records) -> list[ResultRecord]:
    return sorted(records, key=lambda r: (r.name, r.N, r.T, r.beta, r.schedule))


def _fmt(value) -> str:
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def records_to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cols = CSV_HEADER.split(",")
    buf.write(CSV_HEADER + "\n")
    for rec in records:
        writer.writerow([_fmt(getattr(rec, c)) for c in cols])
    return buf.getvalue()


def _json_safe(obj):
    if isinstance(obj, float):
        return None if not math.isfinite(obj) else obj
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def records_to_json(records) -> str:
    payload = [_json_safe(r.to_dict()) for r in records]
    return json.dumps(payload, indent=1, sort_keys=True) + "\n"


def _float_or_nan(value) -> float:
    return math.nan if value is None or value == "nan" or value == "" else float(value)


def record_from_dict(d: dict) -> ResultRecord:
    known = {f.name for f in fields(ResultRecord)}
    unknown = set(d) - known
    if unknown:
        raise DomainError(f"unknown record fields {sorted(unknown)}")
    kw = dict(d)
    for name in BENCHMARK_FIELDS + ("wall_time",):
        if name in kw:
            kw[name] = _float_or_nan(kw[name])
    for name in ("T", "beta", "tau"):
        kw[name] = float(kw[name])
    kw["N"] = int(kw["N"])
    kw["extras"] = {k: _float_or_nan(v) if v is None or isinstance(v, (int, float)) else v for k, v in kw.get("extras", {}).items()}
    return ResultRecord(**kw)


def emit_results(records, fmt: str, path) -> Path:
    """Write records as ``csv`` (fixed header) or ``json`` (full records) and return the path."""
    records = list(records)
    if not records:
        raise DomainError("no records to write")
    if fmt == "csv":
        text = records_to_csv(records)
    elif fmt == "json":
        text = records_to_json(records)
    else:
        raise DomainError(f"format must be csv or json, got {fmt!r}")
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)
    return p


def load_results(path) -> list[ResultRecord]:
    p = Path(path)
    if p.is_dir():
        p = p / "results.json" if (p / "results.json").exists() else p / "results.csv"
    text = p.read_text()
    if p.suffix == ".json":
        return [record_from_dict(d) for d in json.loads(text)]
    reader = csv.DictReader(io.StringIO(text))
    if ",".join(reader.fieldnames or []) != CSV_HEADER:
        raise DomainError(f"{p} does not carry the results header")
    out = []
    for row in reader:
        for name in BENCHMARK_FIELDS:
            row[name] = _float_or_nan(row[name])
        out.append(record_from_dict(row))
    return out


def write_bod(hist, path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    lines = [BOD_HEADER]
    lines += [",".join(repr(v) for v in row) for row in hist.rows()]
    p.write_text("\n".join(lines) + "\n")
    return p


def read_bod(path) -> dict:
    """Columns of a BOD CSV as lists of floats."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if ",".join(reader.fieldnames or []) != BOD_HEADER:
            raise DomainError(f"{path} does not carry the BOD header")
        cols: dict[str, list[float]] = {k: [] for k in BOD_HEADER.split(",")}
        for row in reader:
            for k in cols:
                cols[k].append(float(row[k]))
    return cols
