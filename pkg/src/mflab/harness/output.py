"""Persistence: results.csv, manifest.json, reports.jsonl and SVG plots."""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import math
import platform
from pathlib import Path

import numpy as np

from ..propagate import blob_hash
from .runner import RateFit, RunResult, SweepResult

CSV_COLUMNS = ["N", "t", "alpha_n", "alpha_m", "tr_norm", "hs_norm", "op_norm",
               "energy_exact", "energy_mf", "kinetic_sum"]


class OutputError(OSError):
    """Writing results failed; the rendered files are kept on ``buffers``."""

    def __init__(self, message, buffers):
        super().__init__(message)
        self.buffers = buffers


def _m_label(run: RunResult) -> str | None:
    for lab in run.alpha:
        if lab.startswith("m"):
            return lab
    return None


def render_csv(runs) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(CSV_COLUMNS)
    for run in runs:
        mlab = _m_label(run)
        for i, t in enumerate(run.times):
            am = run.alpha[mlab][i] if mlab else math.nan
            an = run.alpha["n"][i] if "n" in run.alpha else math.nan
            row = [t, an, am, run.tr_norm[i], run.hs_norm[i], run.op_norm[i],
                   run.energy_exact[i], run.energy_mf[i], run.kinetic_sum[i]]
            wr.writerow([str(run.N)] + [repr(float(x)) for x in row])
    return buf.getvalue()


def parse_csv(text: str) -> list[dict]:
    """Inverse of :func:`render_csv` (floats parsed exactly)."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != CSV_COLUMNS:
        raise ValueError("unexpected results.csv header")
    out = []
    for r in rows[1:]:
        d = {"N": int(r[0])}
        for k, v in zip(CSV_COLUMNS[1:], r[1:]):
            d[k] = float(v)
        out.append(d)
    return out


def _versions() -> dict:
    import matplotlib
    import scipy

    from .. import __version__

    return {"mflab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "matplotlib": matplotlib.__version__, "python": platform.python_version()}


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def render_manifest(cfg, runs, fits: dict, trends, csv_text: str, reports_text: str) -> str:
    config_text = json.dumps(cfg.raw, sort_keys=True, separators=(",", ":"))
    manifest = {
        "config": cfg.raw,
        "digests": {
            "config": hashlib.sha256(config_text.encode()).hexdigest(),
            "results.csv": blob_hash(csv_text.encode()),
            "reports.jsonl": blob_hash(reports_text.encode()),
        },
        "versions": _versions(),
        "fits": {k: f.to_dict() for k, f in fits.items()},
        "verdicts": {
            "trends": {t.check_id: t.verdict for t in trends},
            "checks_failed": sum(1 for r in runs for rep in r.reports if rep.verdict == "fail"),
            "flags": {str(r.N): r.flags for r in runs if r.flags},
        },
        "particles": [r.N for r in runs],
        "timestamp": {
            "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "wall_time_s": {str(r.N): r.wall_time for r in runs},
        },
    }
    return json.dumps(_clean(manifest), sort_keys=True, indent=2) + "\n"


def render_reports(runs, trends) -> str:
    lines = []
    for r in runs:
        for rep in r.reports:
            d = rep.to_dict()
            d["N"] = r.N
            lines.append(json.dumps(d, sort_keys=True))
    for t in trends:
        lines.append(t.to_json())
    return "".join(line + "\n" for line in lines)


def _svg_bytes(fig) -> bytes:
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def render_plots(rows: list[dict], fits: dict | None = None) -> dict:
    """SVG plots: alpha_n against t for every N, and log alpha_n(T) against log N with the fit line."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "mflab"
    out = {}
    ns = sorted({r["N"] for r in rows})
    fig, ax = plt.subplots(figsize=(6, 4))
    for n in ns:
        sel = [r for r in rows if r["N"] == n]
        ax.plot([r["t"] for r in sel], [r["alpha_n"] for r in sel], marker="o", label=f"N={n}")
    ax.set_xlabel("t")
    ax.set_ylabel("alpha_n")
    if ns:
        ax.legend()
    out["alpha_vs_t.svg"] = _svg_bytes(fig)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 4))
    final = {}
    for r in rows:
        final[r["N"]] = r["alpha_n"]
    pts = [(n, a) for n, a in sorted(final.items()) if a > 0]
    if pts:
        x = np.log([p[0] for p in pts])
        y = np.log([p[1] for p in pts])
        ax.plot(x, y, "o", label="alpha_n(T)")
        fit = (fits or {}).get("n")
        if fit is not None and isinstance(fit, RateFit) and math.isfinite(fit.exponent):
            ax.plot(x, fit.intercept - fit.exponent * x, "-", label=f"fit, exponent {fit.exponent:.3f}")
        elif isinstance(fit, dict) and isinstance(fit.get("exponent"), float):
            ax.plot(x, fit["intercept"] - fit["exponent"] * x, "-", label=f"fit, exponent {fit['exponent']:.3f}")
        ax.legend()
    ax.set_xlabel("log N")
    ax.set_ylabel("log alpha_n(T)")
    out["rate_fit.svg"] = _svg_bytes(fig)
    plt.close(fig)
    return out


def emit_outputs(result, directory, cfg) -> dict:
    """Write all output files for a sweep (or a list of runs) and return their paths.

    Everything is rendered in memory first; if the directory is unwritable an
    :class:`OutputError` carrying the rendered buffers is raised.
    """
    if isinstance(result, SweepResult):
        runs, fits, trends = result.runs, result.fits, result.trends
    else:
        runs = list(result) if isinstance(result, (list, tuple)) else [result]
        fits, trends = {}, []
    csv_text = render_csv(runs)
    reports_text = render_reports(runs, trends)
    manifest_text = render_manifest(cfg, runs, fits, trends, csv_text, reports_text)
    plots = render_plots(parse_csv(csv_text), fits)
    buffers = {"results.csv": csv_text.encode("utf-8"), "reports.jsonl": reports_text.encode("utf-8"),
               "manifest.json": manifest_text.encode("utf-8"),
               **{f"plots/{k}": v for k, v in plots.items()}}
    d = Path(directory)
    try:
        (d / "plots").mkdir(parents=True, exist_ok=True)
        paths = {}
        for name, data in buffers.items():
            p = d / name
            p.write_bytes(data)
            paths[name] = p
    except OSError as exc:
        raise OutputError(f"cannot write outputs to {d}: {exc}", buffers) from exc
    return paths


def replot(directory) -> dict:
    """Regenerate plots from an existing output directory."""
    d = Path(directory)
    rows = parse_csv((d / "results.csv").read_text(encoding="utf-8"))
    fits = {}
    man = d / "manifest.json"
    if man.exists():
        fits = json.loads(man.read_text(encoding="utf-8")).get("fits", {})
    plots = render_plots(rows, fits)
    (d / "plots").mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, data in plots.items():
        (d / "plots" / name).write_bytes(data)
        paths[name] = d / "plots" / name
    return paths


def manifest_without_timestamp(text: str) -> dict:
    data = json.loads(text)
    data.pop("timestamp", None)
    return data
