"""Single runs, N-sweeps, baselines and convergence-rate fits."""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import diagnostics as dg
from ..alpha import pnk_distribution, weight_m, weight_n
from ..errors import IntegratorAccuracyError, InvalidArgumentError, PropagationError
from ..fock import FockVector, build_basis, mix_excitation, slater
from ..lattice import OrbitalSet, density, ground_orbitals, packet_orbitals
from ..propagate import (MeanFieldConfig, build_hamiltonian, energy_many, energy_mf,
                         exact_trajectory, mf_evolve)
from .config import ExperimentConfig

NO_SIGNAL_FLOOR = 1e-12
ORBITAL_MODES = ("hartree", "free", "static")


def weight_label(w: dict) -> str:
    return "n" if w["kind"] == "n" else f"m{w['gamma']:g}"


def weight_values(w: dict, N: int):
    return weight_n(N) if w["kind"] == "n" else weight_m(N, float(w["gamma"]))


@dataclass
class RunResult:
    N: int
    times: list
    alpha: dict
    tr_norm: list
    hs_norm: list
    op_norm: list
    energy_exact: list
    energy_mf: list
    kinetic_sum: list
    reports: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    wall_time: float = 0.0
    mode: str = "hartree"
    trends: dict = field(default_factory=dict)

    @property
    def samples(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class RateFit:
    """``log alpha = intercept - exponent * log N`` by least squares."""

    exponent: float
    intercept: float
    residual: float
    points: int
    flag: str = ""

    def to_dict(self) -> dict:
        return {"exponent": self.exponent, "intercept": self.intercept,
                "residual": self.residual, "points": self.points, "flag": self.flag}


@dataclass
class SweepResult:
    runs: list
    fits: dict
    trends: list


def initial_data(cfg: ExperimentConfig, N: int):
    """Initial orbitals and many-body state for particle number ``N``."""
    grid = cfg.grid(N)
    w = cfg.external_field(N)
    regime = cfg.regime(N)
    init = cfg.raw["initial"]
    basis = build_basis(grid.points, N, cap=int(cfg.raw["basis_cap"]))
    kind = init["kind"]
    if kind == "packets":
        centers = init.get("centers") or "even"
        if centers == "even":
            centers = [grid.coords[0] + grid.length * (j + 0.5) / N for j in range(N)]
        width = float(init.get("width") or grid.length / (4 * N))
        momenta = init.get("momenta")
        if isinstance(momenta, (int, float)):
            momenta = [float(momenta) * (-1) ** j for j in range(N)]
        orbitals = packet_orbitals(grid, centers, width, momenta, N)
        return orbitals, slater(orbitals, basis)
    n_ground = N + 1 if kind == "perturbed" and N < grid.points else N
    ground = ground_orbitals(grid, w, n_ground, kinetic_prefactor=regime.kinetic_prefactor)
    orbitals = OrbitalSet(grid, ground.vectors[:N])
    if kind == "perturbed":
        if N >= grid.points:
            raise InvalidArgumentError("no unoccupied orbital available for the perturbation")
        psi = mix_excitation(orbitals, ground.vectors[N], int(init.get("slot") or 0),
                             float(init["epsilon"]), basis)
        return orbitals, psi
    psi = slater(orbitals, basis)
    if kind == "correlated":
        rng = np.random.default_rng([cfg.seed, N])
        x = rng.standard_normal(basis.dim) + 1j * rng.standard_normal(basis.dim)
        mix = float(init.get("mix") or 0.1)
        psi = FockVector(basis, psi.coeffs + mix * x / np.linalg.norm(x)).normalized()
    return orbitals, psi


def _orbital_trajectory(cfg, N, orbitals, spec, w, regime, times, mode):
    if mode == "static":
        return [orbitals] * len(times)
    if mode == "free":
        spec = None
    mcfg = cfg.mf_cfg
    if mode == "free" and mcfg.exchange:
        mcfg = MeanFieldConfig(mcfg.dt, mcfg.scheme, False, mcfg.gram_tol)
    return mf_evolve(orbitals, spec, w, regime, times[-1] if times else 0.0, mcfg,
                     sample_times=times).orbitals


def run_single(cfg: ExperimentConfig, N: int, mode: str = "hartree") -> RunResult:
    """Co-evolve exact and mean-field dynamics for one particle number and sample all series.

    Args:
        cfg: validated configuration.
        N: particle number.
        mode: orbitals measured against: ``hartree`` (mean-field flow), ``free``
            (interaction switched off) or ``static`` (frozen initial orbitals).

    Returns:
        The sampled series and the diagnostic reports.
    """
    if mode not in ORBITAL_MODES:
        raise InvalidArgumentError(f"mode must be one of {ORBITAL_MODES}")
    start = time.perf_counter()
    grid = cfg.grid(N)
    spec = cfg.interaction(N)
    w = cfg.external_field(N)
    regime = cfg.regime(N)
    exchange = cfg.mf_cfg.exchange
    orbitals0, psi0 = initial_data(cfg, N)
    h = build_hamiltonian(grid, spec, w, regime)
    times = cfg.sample_times
    try:
        states = exact_trajectory(h, psi0, times, cfg.exact_cfg)
    except PropagationError as exc:
        raise PropagationError(f"N={N}: {exc}", time=exc.time, diagnostics=exc.diagnostics) from exc
    try:
        orbs = _orbital_trajectory(cfg, N, orbitals0, spec, w, regime, times, mode)
    except IntegratorAccuracyError as exc:
        raise IntegratorAccuracyError(f"N={N}: {exc}", time=exc.time, drift=exc.drift) from exc

    res = RunResult(N, list(times), {weight_label(wt): [] for wt in cfg.weights}, [], [], [], [], [], [],
                    mode=mode)
    bound = cfg.raw.get("kinetic_bound")
    diag = cfg.raw["diagnostics"]
    for t, psi, orb in zip(times, states, orbs):
        dist = pnk_distribution(psi, orb)
        for wt in cfg.weights:
            res.alpha[weight_label(wt)].append(float(np.clip(dist.expectation(weight_values(wt, N)), 0, 1)))
        tr, hs, op = dg.matrix_norms(dg.density_matrix_difference(psi, orb))
        res.tr_norm.append(tr)
        res.hs_norm.append(hs)
        res.op_norm.append(op)
        res.energy_exact.append(energy_many(h, psi))
        e_mf = energy_mf(orb, spec, w, regime, exchange=exchange)
        res.energy_mf.append(e_mf.total)
        res.kinetic_sum.append(e_mf.kinetic_sum)
        if bound is not None and e_mf.kinetic_sum / N > float(bound):
            res.flags.append(f"kinetic sum per particle {e_mf.kinetic_sum / N:.6g} exceeds bound {bound} at t={t!r}")
        rep = dg.density_lemma_check(psi, orb)
        rep.quantities["t"] = t
        res.reports.append(rep)
        for wt in cfg.weights:
            if wt["kind"] == "m":
                rep = dg.alpha_m_vs_n_check(psi, orb, float(wt["gamma"]))
                rep.quantities["t"] = t
                res.reports.append(rep)

    rho0 = density(orbitals0)
    res.reports.append(dg.meanfield_sup_check(spec, rho0))
    res.reports.append(dg.assumption_check(spec, rho0, float(diag["omega_radius"]), float(diag["gamma"]), N))
    res.reports.append(dg.lt_ratio(orbitals0, float(diag["lt_exponent"])))
    res.reports.append(dg.sc_condition_check(orbitals0))
    res.wall_time = time.perf_counter() - start
    return res


def fit_rate(points) -> RateFit:
    """Least-squares fit of ``log alpha`` against ``log N``.

    Args:
        points: iterable of ``(N, alpha)`` pairs.

    Returns:
        The fit; ``flag`` is ``"insufficient points"`` for fewer than three
        points and ``"no signal"`` when some alpha is at or below the numerical
        floor (no fit is attempted then).
    """
    pts = [(float(n), float(a)) for n, a in points]
    if len(pts) < 3:
        return RateFit(math.nan, math.nan, math.nan, len(pts), "insufficient points")
    if any(not a > NO_SIGNAL_FLOOR for _, a in pts):
        return RateFit(math.nan, math.nan, math.nan, len(pts), "no signal")
    x = np.log([n for n, _ in pts])
    y = np.log([a for _, a in pts])
    a = np.vstack([np.ones_like(x), x]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = float(np.sqrt(np.sum((a @ coef - y) ** 2)))
    return RateFit(float(-coef[1]), float(coef[0]), resid, len(pts))


def _window_report(check_id, values: dict, factor: float = 2.0, monotone: bool = False):
    """Cross-N stability verdict: ``max/min <= factor`` (or each step grows by at most ``factor``)."""
    vals = [values[n] for n in sorted(values)]
    q = {f"N={n}": values[n] for n in sorted(values)}
    if monotone:
        margins = [factor * a - b for a, b in zip(vals, vals[1:])] or [0.0]
    else:
        lo, hi = min(vals), max(vals)
        margins = [factor * lo - hi] if lo > 0 else ([0.0] if hi == 0 else [-abs(hi)])
        q["ratio"] = hi / lo if lo > 0 else math.inf
    return dg._report(check_id, (sorted(values.items()),), q, margins, 1e-12)


def _find(run: RunResult, check_id: str):
    for r in run.reports:
        if r.check_id == check_id:
            return r
    return None


def sweep_trends(runs) -> list:
    """Cross-N verdicts for the single-N informational diagnostics."""
    if len(runs) < 2:
        return []
    out = []
    sup = {r.N: abs(_find(r, "meanfield_sup").quantities["sup_abs"]) for r in runs}
    out.append(_window_report("trend:meanfield_sup", sup))
    for key in ("D1", "D2", "D3", "D4"):
        vals = {r.N: _find(r, "assumption").quantities[key] for r in runs}
        out.append(_window_report(f"trend:assumption_{key}", vals, monotone=True))
    for key in ("exp_ratio_N23", "grad_ratio_N"):
        vals = {r.N: _find(r, "sc_condition").quantities[key] for r in runs}
        out.append(_window_report(f"trend:sc_{key}", vals))
    lt = {r.N: _find(r, "lt_ratio").quantities["ratio"] for r in runs}
    out.append(_window_report("trend:lt_ratio", lt))
    final = {r.N: r.alpha["n"][-1] for r in runs if "n" in r.alpha and r.alpha["n"]}
    if len(final) >= 2:
        ns = sorted(final)
        margins = [final[a] - final[b] for a, b in zip(ns, ns[1:])]
        q = {f"N={n}": final[n] for n in ns}
        rep = dg._report("trend:alpha_n_decreasing", (sorted(final.items()),), q, margins, 0.0)
        if rep.verdict == dg.FAIL or min(margins) == 0:
            rep.verdict = dg.FAIL
        out.append(rep)
    return out


def _run_one(args):
    cfg, n = args
    return run_single(cfg, n)


def run_sweep(cfg: ExperimentConfig, workers: int | None = 1) -> SweepResult:
    """Run every configured N (in parallel when ``workers > 1``) and fit rates per weight."""
    ns = sorted(cfg.particles)
    if workers is None or workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            runs = list(ex.map(_run_one, [(cfg, n) for n in ns]))
    else:
        runs = [run_single(cfg, n) for n in ns]
    runs.sort(key=lambda r: r.N)
    fits = {}
    for wt in cfg.weights:
        lab = weight_label(wt)
        pts = [(r.N, r.alpha[lab][-1]) for r in runs if r.alpha[lab]]
        fits[lab] = fit_rate(pts)
    return SweepResult(runs, fits, sweep_trends(runs))


@dataclass
class BaselineComparison:
    hartree: RunResult
    baseline: RunResult
    kind: str
    tr_gap: list
    alpha_gap: list

    @property
    def hartree_better_at_end(self) -> bool:
        return bool(self.hartree.tr_norm[-1] <= self.baseline.tr_norm[-1]) if self.hartree.tr_norm else True


def compare_baseline(cfg: ExperimentConfig, N: int, baseline: str = "free") -> BaselineComparison:
    """Measure the same exact evolution against mean-field and baseline orbitals.

    Gaps are ``hartree - baseline`` per sample, so negative values mean the
    mean-field orbitals describe the state better.
    """
    if baseline not in ("free", "static"):
        raise InvalidArgumentError("baseline must be 'free' or 'static'")
    hart = run_single(cfg, N, "hartree")
    base = run_single(cfg, N, baseline)
    tr_gap = [a - b for a, b in zip(hart.tr_norm, base.tr_norm)]
    a_gap = [a - b for a, b in zip(hart.alpha.get("n", []), base.alpha.get("n", []))]
    return BaselineComparison(hart, base, baseline, tr_gap, a_gap)


def initial_orbitals(cfg: ExperimentConfig, N: int) -> OrbitalSet:
    return initial_data(cfg, N)[0]
