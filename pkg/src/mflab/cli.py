"""Command-line entry point (``mflab`` or ``python -m mflab``).

Exit codes: 0 success, 1 check failure, 2 configuration error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import ConfigError, MflabError

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mflab", description="Exact versus mean-field fermion dynamics.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run the configured particle numbers one after another")
    s.add_argument("--config", required=True)
    s.add_argument("--n", type=int, default=None, help="run only this particle number")

    s = sub.add_parser("sweep", help="run all particle numbers (in parallel with --workers K) and fit rates")
    s.add_argument("--config", required=True)
    s.add_argument("--workers", type=int, default=1)

    s = sub.add_parser("check", help="run the built-in identity and inequality suites")
    s.add_argument("--suite", choices=["all", "algebra", "lemmas", "dynamics"], default="all")
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("orbitals", help="write the initial orbitals of a config as JSON")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)

    s = sub.add_parser("plot", help="regenerate plots from an output directory")
    s.add_argument("--from", dest="source", required=True)
    return p


def _simulate(args) -> int:
    from .harness import emit_outputs, load_config, run_single
    from .harness.runner import SweepResult, sweep_trends

    cfg = load_config(args.config, echo=True)
    ns = [args.n] if args.n is not None else sorted(cfg.particles)
    if args.n is not None and args.n not in cfg.particles:
        raise ConfigError(f"--n {args.n} is not among the configured particles {cfg.particles}")
    runs = [run_single(cfg, n) for n in ns]
    emit_outputs(SweepResult(runs, {}, sweep_trends(runs)), cfg.outputs, cfg)
    for r in runs:
        print(f"N={r.N}: alpha_n(T)={r.alpha.get('n', [float('nan')])[-1]!r} "
              f"tr_norm(T)={r.tr_norm[-1] if r.tr_norm else float('nan')!r}")
    print(f"outputs written to {cfg.outputs}")
    return EXIT_OK


def _sweep(args) -> int:
    from .harness import emit_outputs, load_config, run_sweep

    cfg = load_config(args.config, echo=True)
    res = run_sweep(cfg, workers=max(1, args.workers))
    emit_outputs(res, cfg.outputs, cfg)
    for lab, fit in res.fits.items():
        print(f"fit[{lab}]: exponent={fit.exponent!r} residual={fit.residual!r} {fit.flag}".rstrip())
    for t in res.trends:
        print(f"{t.check_id}: {t.verdict}")
    print(f"outputs written to {cfg.outputs}")
    return EXIT_OK


def _check(args) -> int:
    from .diagnostics import write_reports
    from .harness.suites import run_suite

    reports = run_suite(args.suite, args.seed)
    out = Path(os.environ.get("MFLAB_OUT") or "mflab_check")
    out.mkdir(parents=True, exist_ok=True)
    write_reports(reports, out / "reports.jsonl")
    failed = [r for r in reports if r.verdict == "fail"]
    by_id = {}
    for r in reports:
        ok, total = by_id.get(r.check_id, (0, 0))
        by_id[r.check_id] = (ok + (r.verdict != "fail"), total + 1)
    for cid, (ok, total) in sorted(by_id.items()):
        print(f"{cid}: {ok}/{total} passed")
    print(f"{len(reports) - len(failed)}/{len(reports)} checks passed; reports in {out / 'reports.jsonl'}")
    return EXIT_CHECK if failed else EXIT_OK


def _orbitals(args) -> int:
    from .harness import initial_orbitals, load_config

    cfg = load_config(args.config)
    sets = []
    for n in sorted(cfg.particles):
        orb = initial_orbitals(cfg, n)
        g = orb.grid
        sets.append({"N": n, "M": g.points, "L": g.length, "boundary": g.boundary,
                     "re": orb.vectors.real.tolist(), "im": orb.vectors.imag.tolist()})
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps({"orbital_sets": sets}) + "\n", encoding="utf-8")
    print(f"wrote {len(sets)} orbital set(s) to {out}")
    return EXIT_OK


def _plot(args) -> int:
    from .harness import replot

    paths = replot(args.source)
    for p in paths.values():
        print(p)
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handlers = {"simulate": _simulate, "sweep": _sweep, "check": _check,
                "orbitals": _orbitals, "plot": _plot}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MflabError, OSError, ValueError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
