"""Plot-data bundles: one CSV per plotted series plus a manifest, no plotting library involved."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

from ..errors import DomainError
from .fitting import axis_value, record_value
from .output import read_bod

GRID_NOTE = (
    "T grids are log-spaced over the visible axis range of the published plot; the exact published grids are not "
    "listed, so point positions differ while the plotted quantities are the same."
)


@dataclass(frozen=True)
class Curves:
    """quantity versus axis, one curve per value of ``per`` (plus the schedule)."""

    quantity: str
    axis: str = "T"
    per: str = "N"
    label: str = ""


@dataclass(frozen=True)
class Inset:
    """quantity versus N at the T closest to ``at_T`` (``None``: any T, first available)."""

    quantity: str
    at_T: float | None = None
    label: str = ""


@dataclass(frozen=True)
class BodSeries:
    """BOD curves at one N (largest available when None) for the listed T (all when None)."""

    N: int | None = None
    T_list: tuple[float, ...] | None = None
    include_perturbative: bool = False
    label: str = ""


FIGURES: dict[str, tuple] = {
    "fig2a": (Curves("cod", label="COD vs T per N"), Inset("cod", 100.0, "COD vs N at T=100")),
    "fig2b": (Curves("delta_e_qate_per_N", label="dE_QATE/N vs T per N"), Inset("delta_e_min", None, "dE_min vs N")),
    "fig2c": (BodSeries(1000, (25.0, 50.0, 100.0, 200.0), label="BOD at N=1000, delta=0.04"),),
    "fig3a": (Curves("cod", label="COD vs T per N"), Inset("cod", 500.0, "COD vs N at T=500")),
    "fig3b": (Curves("delta_e_qate_per_N", label="dE_QATE/N vs T per N"), Inset("delta_e_qate", 250.0, "dE_QATE vs N at T=250")),
    "fig3c": (BodSeries(label="BOD of the isospectral run"),),
    "fig4a": (Curves("cod", label="COD vs T per N"), Inset("delta_e_min", None, "dE_min vs N")),
    "fig4b": (Curves("delta_e_qate_per_N", label="dE_QATE/N vs T per N"),),
    "fig4c": (BodSeries(label="BOD of the mixed-field run"),),
    "fig5": (Curves("rdm_distance", label="1-norm of 3-site reductions, rho_QATE vs rho_min"),),
    "fig6": (BodSeries(1000, (100.0,), include_perturbative=True, label="perturbative and filtered BOD"),),
    "fig7a": (Curves("cod", label="COD vs T per N"),),
    "fig7b": (Curves("delta_e_qate_per_N", label="dE_QATE/N vs T per N"), Inset("delta_e_min", None, "dE_min vs N")),
    "fig8a": (Curves("cod", label="COD vs T per N and schedule"),),
    "fig8b": (Curves("delta_e_qate_per_N", label="dE_QATE/N vs T per N and schedule"),),
    "fig9a": (Curves("delta_e_qate_per_N", axis="S_over_N", per="T", label="dE_QATE/N vs S/N per T"),),
    "fig9b": (Curves("delta_e_qate", axis="S_over_N", per="N", label="dE_QATE vs S/N per N"),),
    "fig9c": (Curves("cod", axis="S_over_N", per="T", label="COD vs S/N per T"),),
    "fig9d": (Curves("cod", axis="S_over_N", per="N", label="COD vs S/N per N"),),
    "fig10a": (Curves("cod", label="COD vs T per N"),),
    "fig10b": (Curves("delta_e_qate_per_N", label="dE_QATE/N vs T per N"),),
    "fig11a": (Curves("cod", label="COD vs T per N"),),
    "fig11b": (Curves("delta_e_qate_per_N", label="dE_QATE/N vs T per N"),),
}


def _write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _fmt_tag(value) -> str:
    return f"{value:g}" if isinstance(value, float) else str(value)


def _curves(records, spec: Curves, out: Path, stem: str) -> list[dict]:
    groups: dict[tuple, list] = {}
    for rec in records:
        groups.setdefault((getattr(rec, spec.per), rec.beta, rec.schedule), []).append(rec)
    entries = []
    for (value, beta, sched), recs in sorted(groups.items()):
        pts = sorted((axis_value(r, spec.axis), record_value(r, spec.quantity)) for r in recs)
        fname = f"{stem}_{spec.quantity}_vs_{spec.axis}_{spec.per}{_fmt_tag(value)}_beta{beta:g}_{sched}.csv"
        _write_csv(out / fname, [spec.axis, spec.quantity], pts)
        entries.append({"file": fname, "kind": "curve", "x": spec.axis, "y": spec.quantity, "label": spec.label,
                        "fixed": {spec.per: value, "beta": beta, "schedule": sched}})
    return entries


def _inset(records, spec: Inset, out: Path, stem: str) -> list[dict]:
    by_N: dict = {}
    for rec in records:
        by_N.setdefault((rec.beta, rec.schedule), {}).setdefault(rec.N, []).append(rec)
    entries = []
    for (beta, sched), per_N in sorted(by_N.items()):
        rows = []
        for N, recs in sorted(per_N.items()):
            if spec.at_T is None:
                chosen = min(recs, key=lambda r: r.T)
            else:
                chosen = min(recs, key=lambda r: (abs(math.log(r.T / spec.at_T)), r.T))
            rows.append((float(N), chosen.T, record_value(chosen, spec.quantity)))
        fname = f"{stem}_inset_{spec.quantity}_vs_N_beta{beta:g}_{sched}.csv"
        _write_csv(out / fname, ["N", "T", spec.quantity], rows)
        entries.append({"file": fname, "kind": "inset", "x": "N", "y": spec.quantity, "label": spec.label,
                        "fixed": {"T_target": spec.at_T, "beta": beta, "schedule": sched}})
    return entries


def _bod(records, spec: BodSeries, out: Path, stem: str, results_dir: Path) -> list[dict]:
    with_bod = [r for r in records if r.bod_file]
    if not with_bod:
        return []
    N = spec.N if spec.N is not None else max(r.N for r in with_bod)
    chosen = [r for r in with_bod if r.N == N]
    if spec.T_list is not None:
        chosen = [r for r in chosen if any(math.isclose(r.T, t, rel_tol=1e-9) for t in spec.T_list)]
    entries = []
    for rec in sorted(chosen, key=lambda r: (r.T, r.beta, r.schedule)):
        sources = [(rec.bod_file, "filtered" if rec.engine != "exact_diag" else "exact")]
        if spec.include_perturbative:
            sources.append((rec.bod_file[: -len(".csv")] + "_perturbative.csv", "perturbative"))
        for rel, method in sources:
            src = results_dir / rel
            if not src.exists():
                continue
            cols = read_bod(src)
            fname = f"{stem}_bod_{method}_N{rec.N}_T{rec.T:g}_beta{rec.beta:g}_{rec.schedule}.csv"
            _write_csv(out / fname, ["omega", "mass"], list(zip(cols["omega"], cols["mass"])))
            entries.append({"file": fname, "kind": "bod", "method": method, "x": "omega", "y": "mass",
                            "label": spec.label, "bin_width": cols["bin_width"][0] if cols["bin_width"] else None,
                            "fixed": {"N": rec.N, "T": rec.T, "beta": rec.beta, "schedule": rec.schedule}})
    return entries


def emit_figure_data(records, figure_id: str, out_dir, results_dir=None) -> Path:
    """Write the bundle for ``figure_id`` under ``out_dir/figure_id`` and return the manifest path."""
    if figure_id not in FIGURES:
        raise DomainError(f"unknown figure id {figure_id!r}; known: {', '.join(sorted(FIGURES))}")
    good = [r for r in records if not r.error]
    if not good:
        raise DomainError("no successful records to plot")
    out = Path(out_dir) / figure_id
    out.mkdir(parents=True, exist_ok=True)
    series: list[dict] = []
    for spec in FIGURES[figure_id]:
        if isinstance(spec, Curves):
            series += _curves(good, spec, out, figure_id)
        elif isinstance(spec, Inset):
            series += _inset(good, spec, out, figure_id)
        else:
            series += _bod(good, spec, out, figure_id, Path(results_dir) if results_dir is not None else Path(out_dir))
    manifest = {
        "figure": figure_id,
        "records": len(good),
        "sources": sorted({r.name for r in good}),
        "series": series,
        "notes": [GRID_NOTE],
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return path
