"""``qate`` command line: run, fit, figure and validate.

Exit codes: 0 success, 1 configuration error, 2 partial sweep failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..errors import ConfigurationError, DomainError
from .config import _parse_window, load_config
from .figures import FIGURES, emit_figure_data
from .fitting import fit_records
from .output import load_results
from .runner import run_sweep, sweep_points, write_sweep

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_IO = 0, 1, 2, 3
log = logging.getLogger("qate")


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out or cfg.output_dir or Path("results") / cfg.name)
    points = sweep_points(cfg, args.max_N, args.max_T)
    log.info("running %d points of %s with %d worker(s)", len(points), cfg.name, args.workers)
    records, bods = run_sweep(cfg, workers=args.workers, max_N=args.max_N, max_T=args.max_T, with_bod=True)
    if not records:
        raise ConfigurationError("the size limits removed every sweep point")
    write_sweep(cfg, records, bods, out)
    failed = [r for r in records if r.error]
    for r in failed:
        log.error("N=%d T=%g beta=%g %s: %s", r.N, r.T, r.beta, r.schedule, r.error)
    print(f"{len(records) - len(failed)}/{len(records)} points succeeded; results in {out}")
    return EXIT_PARTIAL if failed else EXIT_OK


def _cmd_fit(args) -> int:
    records = load_results(args.results)
    window = _parse_window(args.window, "--window") if args.window else None
    where = []
    for item in args.where or []:
        key, _, value = item.partition("=")
        if not value:
            raise ConfigurationError(f"--where expects param=value, got {item!r}")
        where.append((key, float(value)))
    fits = fit_records(records, args.quantity, args.axis, window, tuple(where))
    if args.json:
        print(json.dumps([f.to_dict() for f in fits], indent=1, sort_keys=True))
        return EXIT_OK
    for f in fits:
        group = " ".join(f"{k}={v}" for k, v in f.key)
        if f.fit is None:
            print(f"{group}: {f.error}")
        else:
            print(f"{group}: exponent={f.fit.exponent:.4f} prefactor={f.fit.prefactor:.4g} r2={f.fit.r2:.4f} n={f.fit.n_points}")
    return EXIT_OK


def _cmd_figure(args) -> int:
    results_dir = Path(args.results_dir)
    records = load_results(results_dir)
    ids = sorted(FIGURES) if args.id == "all" else [args.id]
    out = Path(args.out) if args.out else results_dir / "figures"
    for fid in ids:
        try:
            path = emit_figure_data(records, fid, out, results_dir)
        except DomainError as exc:
            if args.id == "all":
                log.info("skipping %s: %s", fid, exc)
                continue
            raise
        print(path)
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    engines = {N: cfg.resolve_engine(N) for N in cfg.N_list}
    print(f"{cfg.name}: valid (schema 1)")
    print(f"  points: {len(sweep_points(cfg))}  tau={cfg.tau}  filter x={cfg.filter.x}")
    for N, eng in engines.items():
        print(f"  N={N}: {eng}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qate", description="Quasi-adiabatic thermal evolution sweeps")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a sweep described by a JSON config (or a bundled name such as fig2)")
    r.add_argument("config")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--out")
    r.add_argument("--max-N", dest="max_N", type=int, help="drop sweep points above this N")
    r.add_argument("--max-T", dest="max_T", type=float, help="drop sweep points above this T")
    r.set_defaults(func=_cmd_run)

    f = sub.add_parser("fit", help="power-law fits over a results CSV/JSON")
    f.add_argument("results")
    f.add_argument("--quantity", required=True)
    f.add_argument("--axis", choices=("T", "N", "S_over_N"), default="T")
    f.add_argument("--window", help="lo:hi on the axis")
    f.add_argument("--where", action="append", help="param=value filter, repeatable")
    f.add_argument("--json", action="store_true")
    f.set_defaults(func=_cmd_fit)

    g = sub.add_parser("figure", help="write a plot-data bundle")
    g.add_argument("results_dir")
    g.add_argument("--id", required=True, help=f"one of {', '.join(sorted(FIGURES))} or 'all'")
    g.add_argument("--out")
    g.set_defaults(func=_cmd_figure)

    v = sub.add_parser("validate", help="check a config and show the engine chosen per N")
    v.add_argument("config")
    v.set_defaults(func=_cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
