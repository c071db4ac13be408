"""Sweep execution: one engine call per (N, T, beta, schedule) point, optionally in worker processes."""

from __future__ import annotations

import json
import math
import multiprocessing
import os
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import exact_diag, gaussian, spectral, tfim_blocks
from ..errors import ConfigurationError
from ..protocol import QateConfig, RampSchedule
from .config import ExperimentConfig
from .fitting import fit_records
from .output import ResultRecord, emit_results, sort_records, write_bod

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


@dataclass(frozen=True)
class SweepPoint:
    N: int
    T: float
    beta: float
    schedule: RampSchedule

    @property
    def sort_key(self):
        return (self.N, self.T, self.beta, self.schedule.kind)


def sweep_points(config: ExperimentConfig, max_N: int | None = None, max_T: float | None = None) -> list[SweepPoint]:
    pts = [
        SweepPoint(N, T, beta, sched)
        for N in config.N_list
        for T in config.T_list
        for beta in config.beta_list
        for sched in config.schedules
        if (max_N is None or N <= max_N) and (max_T is None or T <= max_T)
    ]
    return sorted(pts, key=lambda p: p.sort_key)


def point_config(config: ExperimentConfig, point: SweepPoint) -> QateConfig:
    return QateConfig(
        beta=point.beta, total_time=point.T, h_init=config.h_init.with_N(point.N),
        h_final=config.h_final.with_N(point.N), tau=config.tau, schedule=point.schedule,
    )


def bod_file_name(config: ExperimentConfig, point: SweepPoint, suffix: str = "") -> str:
    return f"bod/{config.name}_N{point.N}_T{point.T:g}_beta{point.beta:g}_{point.schedule.kind}{suffix}.csv"


def _omega_grid(bod) -> np.ndarray:
    n = int(math.floor(bod.omega_max / bod.delta + 1e-9))
    return bod.delta * np.arange(n + 1)


def _filter_meta(filt: spectral.FilterSpec) -> dict:
    return {"filter_dt": filt.dt, "filter_m_order": float(filt.m_order), "filter_half_range": float(filt.half_range),
            "filter_sigma": filt.sigma}


def central_sites(N: int, width: int = 3) -> list[int]:
    start = (N - width) // 2 + 1
    return list(range(start, start + width))


def _run_dense(config: ExperimentConfig, qc: QateConfig, want_bod: bool):
    run = exact_diag.run_qate_dense(qc)
    rec = exact_diag.dense_benchmarks(run)
    extras: dict = {}
    hists: dict = {}
    if "rdm_central3" in config.observables:
        if qc.N < 3:
            raise ConfigurationError("rdm_central3 needs N >= 3")
        sites = central_sites(qc.N)
        extras["rdm_distance"] = exact_diag.trace_norm_distance(
            exact_diag.reduced_density(run.state(), sites), exact_diag.reduced_density(run.rho_min(), sites)
        )
    if "relative_entropy" in config.observables:
        E = run.final.energies
        beta_g = spectral.beta_for_entropy(E, spectral.entropy_of_weights(run.weights))
        w = spectral.gibbs_weights(E, beta_g)
        V = run.final.vectors
        rho_g = (V * w) @ V.conj().T
        extras["relative_entropy"] = spectral.relative_entropy(run.rho, rho_g)
        extras["beta_gibbs"] = beta_g
    if want_bod:
        bod = config.bod
        if bod.method == "filtered":
            H = run.H_final
            dt = config.filter.dt or spectral.default_filter_dt(float(np.max(np.abs(run.final.energies))), config.filter.margin)
            filt = spectral.filter_design(bod.delta, dt, config.filter.x)
            corr = exact_diag.correlation_series(run.rho, H, filt.times)
            hists[""] = spectral.bod_filtered(corr, filt, _omega_grid(bod), purity=rec.purity)
            extras.update(_filter_meta(filt))
        else:
            hists[""] = spectral.bod_exact(run.coefficients(), run.final.energies, bod.delta, omega_max=bod.omega_max)
    return rec, extras, hists


def _run_blocks(config: ExperimentConfig, qc: QateConfig, want_bod: bool):
    ens = tfim_blocks.run_qate_blocks(qc)
    rec = tfim_blocks.block_benchmarks(ens, e_min_rule=config.e_min_rule)
    extras: dict = {}
    hists: dict = {}
    if want_bod:
        bod = config.bod
        if bod.method == "exact":
            raise ConfigurationError("the block engine provides filtered or perturbative BOD only")
        dt = config.filter.dt or tfim_blocks.default_filter_dt_ti(ens, config.filter.margin)
        filt = spectral.filter_design(bod.delta, dt, config.filter.x)
        hists[""] = tfim_blocks.bod_filtered_ti(ens, filt, _omega_grid(bod))
        extras.update(_filter_meta(filt))
        if bod.perturbative_order is not None:
            hists["_perturbative"] = tfim_blocks.bod_perturbative(ens, bod.perturbative_order, 2.0 * bod.delta)
    return rec, extras, hists


def _run_gaussian(config: ExperimentConfig, qc: QateConfig, want_bod: bool):
    filt = None
    grid = None
    extras: dict = {}
    if want_bod:
        bod = config.bod
        if bod.method == "exact":
            raise ConfigurationError("the Gaussian engine provides filtered BOD only")
        h_f = gaussian.bdg_from_spec(qc.h_final)
        norm = 0.5 * float(np.sum(gaussian.single_particle_energies(h_f))) + abs(h_f.offset)
        dt = config.filter.dt or spectral.default_filter_dt(norm, config.filter.margin)
        filt = spectral.filter_design(bod.delta, dt, config.filter.x)
        grid = _omega_grid(bod)
        extras.update(_filter_meta(filt))
    run = gaussian.run_qate_gaussian(qc, bod_filter=filt, omega_grid=grid)
    if "relative_entropy" in config.observables:
        beta_g, _ = gaussian.gibbs_reference(run.h_final, run.record.entropy)
        sigma = gaussian.thermal_gaussian(run.h_final, beta_g)
        extras["relative_entropy"] = gaussian.relative_entropy_gaussian(run.state, sigma)
        extras["beta_gibbs"] = beta_g
    hists = {"": run.bod} if run.bod is not None else {}
    return run.record, extras, hists


_ENGINES = {"exact_diag": _run_dense, "tfim_blocks": _run_blocks, "gaussian_fermion": _run_gaussian}


def run_point(config: ExperimentConfig, point: SweepPoint):
    """(record, {suffix: BodHistogram}) for one point; engine failures end up in ``record.error``."""
    start = time.perf_counter()
    rec = ResultRecord(
        name=config.name, engine=config.engine, N=point.N, T=float(point.T), beta=float(point.beta),
        schedule=point.schedule.kind, tau=float(config.tau), config_hash=config.config_hash(),
    )
    hists: dict = {}
    try:
        rec.engine = config.resolve_engine(point.N)
        want_bod = config.bod is not None and config.bod.applies(point.N, point.T)
        bench, extras, hists = _ENGINES[rec.engine](config, point_config(config, point), want_bod)
        for key, value in bench.to_dict().items():
            setattr(rec, key, float(value))
        rec.extras = {k: float(v) for k, v in sorted(extras.items())}
        if "" in hists:
            rec.bod_file = bod_file_name(config, point)
    except Exception as exc:  # per-point failures are data, not crashes
        rec.error = f"{type(exc).__name__}: {exc}"
        hists = {}
    rec.wall_time = time.perf_counter() - start
    return rec, hists


def _run_point_star(args):
    return run_point(*args)


@contextmanager
def _single_threaded_children():
    saved = {k: os.environ.get(k) for k in _THREAD_VARS}
    os.environ.update({k: "1" for k in _THREAD_VARS})
    try:
        yield
    finally:
        for k, v in saved.items():
            if v is None:
                os.environ.pop(k, None)
            else:
                os.environ[k] = v


def run_sweep(config: ExperimentConfig, workers: int = 1, max_N: int | None = None, max_T: float | None = None,
              with_bod: bool = False):
    """Run every sweep point and return records sorted by (N, T, beta, schedule).

    With ``with_bod=True`` the return value is ``(records, {bod_file: histogram})``.
    """
    points = sweep_points(config, max_N, max_T)
    jobs = [(config, p) for p in points]
    if workers <= 1 or len(jobs) <= 1:
        results = [run_point(*job) for job in jobs]
    else:
        ctx = multiprocessing.get_context("spawn")
        with _single_threaded_children(), ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            results = list(pool.map(_run_point_star, jobs))
    records = sort_records([r for r, _ in results])
    if not with_bod:
        return records
    bods = {}
    for (rec, hists), point in zip(results, points):
        for suffix, hist in hists.items():
            bods[bod_file_name(config, point, suffix)] = hist
    return records, bods


def write_sweep(config: ExperimentConfig, records, bods, out_dir) -> Path:
    """Persist results.csv, results.json, timings.csv, fits.json, BOD CSVs and the resolved config."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    emit_results(records, "csv", out / "results.csv")
    emit_results(records, "json", out / "results.json")
    for rel, hist in sorted(bods.items()):
        write_bod(hist, out / rel)
    lines = ["name,N,T,beta,schedule,wall_time"]
    lines += [f"{r.name},{r.N},{r.T!r},{r.beta!r},{r.schedule},{r.wall_time:.3f}" for r in records]
    (out / "timings.csv").write_text("\n".join(lines) + "\n")
    fits = []
    for spec in config.fits:
        for gf in fit_records(records, spec.quantity, spec.axis, spec.window, spec.where):
            entry = spec.to_dict()
            entry.update(gf.to_dict())
            fits.append(entry)
    (out / "fits.json").write_text(json.dumps(fits, indent=1, sort_keys=True) + "\n")
    (out / "config.json").write_text(json.dumps(config.raw, indent=1, sort_keys=True) + "\n")
    return out
