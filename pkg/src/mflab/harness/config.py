"""Experiment configuration: a single JSON document, validated key by key."""
from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass
from math import comb
from pathlib import Path

import numpy as np

from ..errors import ConfigError, MflabError
from ..fock import DEFAULT_CAP
from ..lattice import InteractionSpec, field_from_csv, make_grid
from ..propagate import ExactPropagatorConfig, MeanFieldConfig, RegimePreset

DEFAULTS = {
    "grid": {"boundary": "periodic"},
    "regime": {"name": "unscaled"},
    "external_field": {"preset": "none"},
    "initial": {"kind": "ground"},
    "horizon": 1.0,
    "samples": 5,
    "exact": {"dt": 0.05, "krylov_dim": 20, "tol": 1e-10, "max_substeps": 100000},
    "meanfield": {"dt": 0.01, "scheme": "rk4", "exchange": False, "gram_tol": 1e-6},
    "weights": [{"kind": "n"}, {"kind": "m", "gamma": 0.5}],
    "seed": 0,
    "basis_cap": DEFAULT_CAP,
    "kinetic_bound": None,
    "diagnostics": {"omega_radius": 1.0, "gamma": 0.5, "lt_exponent": 3.0},
    "outputs": "mflab_out",
}

SCHEMA = {
    "grid": {"M": None, "M_per_particle": None, "M_offset": None, "L": None,
             "spacing": None, "boundary": None},
    "particles": None,
    "regime": {"name": None, "beta": None, "dimension": None},
    "interaction": {"kind": None, "s": None, "sign": None, "delta": None, "D": None, "a": None,
                    "sigma": None, "strength": None, "values": None, "x": None, "csv": None},
    "external_field": {"preset": None, "amplitude": None, "values": None, "csv": None},
    "initial": {"kind": None, "centers": None, "width": None, "momenta": None,
                "epsilon": None, "slot": None, "mix": None},
    "horizon": None,
    "samples": None,
    "sample_times": None,
    "exact": {"dt": None, "krylov_dim": None, "tol": None, "max_substeps": None},
    "meanfield": {"dt": None, "scheme": None, "exchange": None, "gram_tol": None},
    "weights": None,
    "seed": None,
    "basis_cap": None,
    "kinetic_bound": None,
    "diagnostics": {"omega_radius": None, "gamma": None, "lt_exponent": None},
    "outputs": None,
}

REQUIRED = ("grid", "particles", "interaction")


def _check_keys(data: dict, schema: dict, prefix: str = "") -> None:
    for key, value in data.items():
        path = f"{prefix}{key}"
        if key not in schema:
            raise ConfigError(f"unknown configuration key '{path}'")
        sub = schema[key]
        if isinstance(sub, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"configuration key '{path}' must be an object")
            _check_keys(value, sub, prefix=path + ".")


def _merge(defaults: dict, data: dict) -> dict:
    out = copy.deepcopy(defaults)
    for k, v in data.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = {**out[k], **v}
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; ``raw`` is the defaults-filled JSON document."""

    raw: dict

    # -- accessors ---------------------------------------------------------
    @property
    def particles(self) -> list[int]:
        return list(self.raw["particles"])

    @property
    def horizon(self) -> float:
        return float(self.raw["horizon"])

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def weights(self) -> list[dict]:
        return list(self.raw["weights"])

    @property
    def sample_times(self) -> list[float]:
        if self.raw.get("sample_times") is not None:
            return [float(t) for t in self.raw["sample_times"]]
        n = int(self.raw["samples"])
        if n == 0:
            return []
        if n == 1:
            return [self.horizon]
        return [float(x) for x in np.linspace(0.0, self.horizon, n)]

    @property
    def exact_cfg(self) -> ExactPropagatorConfig:
        return ExactPropagatorConfig(**self.raw["exact"])

    @property
    def mf_cfg(self) -> MeanFieldConfig:
        return MeanFieldConfig(**self.raw["meanfield"])

    @property
    def outputs(self) -> str:
        return os.environ.get("MFLAB_OUT") or str(self.raw["outputs"])

    # -- per-N construction --------------------------------------------------
    def points(self, N: int) -> int:
        g = self.raw["grid"]
        if g.get("M") is not None:
            return int(g["M"])
        return int(g["M_per_particle"]) * N + int(g.get("M_offset") or 0)

    def grid(self, N: int):
        g = self.raw["grid"]
        m = self.points(N)
        if g.get("L") is not None:
            length = float(g["L"])
        else:
            cells = m if g["boundary"] == "periodic" else m + 1
            length = float(g.get("spacing") or 1.0) * cells
        return make_grid(m, length, g["boundary"])

    def regime(self, N: int) -> RegimePreset:
        r = self.raw["regime"]
        name = r["name"]
        if name == "unscaled":
            return RegimePreset.unscaled()
        if name == "semiclassical":
            return RegimePreset.semiclassical(N)
        s = self.raw["interaction"].get("s")
        return RegimePreset.dilute(r.get("beta"), s=s, dimension=int(r.get("dimension") or 3))

    def interaction(self, N: int) -> InteractionSpec:
        i = self.raw["interaction"]
        beta = self.regime(N).beta
        kind = i["kind"]
        sign = i.get("sign", 1)
        if kind == "power_law":
            return InteractionSpec.power_law(i["s"], sign=sign, beta=beta, n=N)
        if kind == "cutoff_power_law":
            return InteractionSpec.cutoff_power_law(i["s"], i["delta"], i.get("D", 1.0), sign=sign, beta=beta, n=N)
        if kind == "soft_coulomb":
            return InteractionSpec.soft_coulomb(i["a"], i.get("strength", 1.0), beta=beta, n=N)
        if kind == "gaussian":
            return InteractionSpec.gaussian(i["sigma"], i.get("strength", 1.0), beta=beta, n=N)
        if kind == "zero":
            return InteractionSpec.gaussian(1.0, 0.0, beta=beta, n=N)
        if kind == "tabulated":
            if i.get("csv"):
                return InteractionSpec.from_csv(i["csv"], beta=beta, n=N)
            g = self.grid(N)
            return InteractionSpec.tabulated(i["values"], spacing=g.spacing, x=i.get("x"), beta=beta, n=N)
        raise ConfigError(f"interaction.kind: unknown kind '{kind}'")

    def external_field(self, N: int):
        e = self.raw["external_field"]
        g = self.grid(N)
        if e.get("values") is not None:
            vals = np.asarray(e["values"], dtype=float)
            if vals.size != g.points:
                raise ConfigError(f"external_field.values: expected {g.points} values, got {vals.size}")
            return vals
        if e.get("csv"):
            return field_from_csv(e["csv"], g)
        preset = e.get("preset", "none")
        amp = float(e.get("amplitude", 0.5) if e.get("amplitude") is not None else 0.5)
        if preset == "none":
            return None
        if preset == "cosine_trap":
            return amp * (1 - np.cos(2 * np.pi * (g.coords - g.coords[0]) / g.length))
        if preset == "harmonic":
            center = 0.5 * (g.coords[0] + g.coords[-1])
            return amp * ((g.coords - center) / g.length) ** 2
        raise ConfigError(f"external_field.preset: unknown preset '{preset}'")

    def to_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True, indent=2)


def _validate(raw: dict) -> None:
    for key in REQUIRED:
        if key not in raw:
            raise ConfigError(f"missing required configuration key '{key}'")
    g = raw["grid"]
    if g.get("M") is None and g.get("M_per_particle") is None:
        raise ConfigError("grid.M or grid.M_per_particle must be given")
    if g["boundary"] not in ("periodic", "dirichlet"):
        raise ConfigError(f"grid.boundary: expected 'periodic' or 'dirichlet', got '{g['boundary']}'")
    parts = raw["particles"]
    if not isinstance(parts, list) or not parts or not all(isinstance(n, int) and n >= 1 for n in parts):
        raise ConfigError("particles: expected a non-empty list of positive integers")
    if len(set(parts)) != len(parts):
        raise ConfigError("particles: duplicate particle numbers")
    if raw["regime"]["name"] not in ("unscaled", "dilute", "semiclassical"):
        raise ConfigError(f"regime.name: unknown regime '{raw['regime']['name']}'")
    if not isinstance(raw["horizon"], (int, float)) or raw["horizon"] < 0:
        raise ConfigError("horizon: expected a nonnegative number")
    if raw.get("sample_times") is not None:
        ts = raw["sample_times"]
        if not isinstance(ts, list) or any(not 0 <= t <= raw["horizon"] for t in ts) or ts != sorted(ts):
            raise ConfigError("sample_times: expected sorted times inside [0, horizon]")
    for w in raw["weights"]:
        if not isinstance(w, dict) or w.get("kind") not in ("n", "m"):
            raise ConfigError("weights: each entry must be {'kind': 'n'} or {'kind': 'm', 'gamma': g}")
        extra = set(w) - {"kind", "gamma"}
        if extra:
            raise ConfigError(f"unknown configuration key 'weights.{sorted(extra)[0]}'")
        if w["kind"] == "m" and not (isinstance(w.get("gamma"), (int, float)) and 0 < w["gamma"] <= 1):
            raise ConfigError("weights.gamma: expected a number in (0, 1]")
    init = raw["initial"]
    if init["kind"] not in ("ground", "packets", "perturbed", "correlated"):
        raise ConfigError(f"initial.kind: unknown kind '{init['kind']}'")
    if init["kind"] == "perturbed":
        eps = init.get("epsilon")
        if not isinstance(eps, (int, float)) or not 0 <= eps <= 1:
            raise ConfigError("initial.epsilon: expected a number in [0, 1]")
    if raw["regime"]["name"] == "dilute" and raw["regime"].get("beta") is None \
            and raw["interaction"].get("s") is None:
        raise ConfigError("regime.beta: required for dilute regime unless interaction.s is given")


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    _check_keys(data, SCHEMA)
    raw = _merge(DEFAULTS, data)
    _validate(raw)
    cfg = ExperimentConfig(raw)
    try:
        for n in cfg.particles:
            m = cfg.points(n)
            if not 1 <= n <= m:
                raise ConfigError(f"particles: N={n} does not fit on M={m} sites")
            if comb(m, n) > int(raw["basis_cap"]):
                raise ConfigError(
                    f"particles: N={n} on M={m} sites gives basis dimension {comb(m, n)} "
                    f"above basis_cap {raw['basis_cap']}")
            cfg.grid(n)
            cfg.interaction(n)
            cfg.external_field(n)
        cfg.exact_cfg
        cfg.mf_cfg
    except ConfigError:
        raise
    except (MflabError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    return cfg


def load_config(path, echo: bool = False) -> ExperimentConfig:
    """Parse and validate a JSON config; optionally write the resolved copy to the output dir."""
    p = Path(path)
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"configuration file not found: {p}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from exc
    cfg = config_from_dict(data)
    if echo:
        out = Path(cfg.outputs)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.resolved.json").write_text(cfg.to_json() + "\n", encoding="utf-8")
    return cfg


def dilute_preset(particles=(2, 3, 4), horizon: float = 0.5, samples: int = 6) -> dict:
    """Density of order one: Coulomb-type kernel with ``beta = 1 - s/3``, ``M = 6 N`` sites, weak trap."""
    return {
        "grid": {"M_per_particle": 6, "spacing": 1.0, "boundary": "periodic"},
        "particles": list(particles),
        "regime": {"name": "dilute"},
        "interaction": {"kind": "power_law", "s": 1.0, "sign": 1},
        "external_field": {"preset": "cosine_trap", "amplitude": 0.5},
        "initial": {"kind": "ground"},
        "horizon": horizon,
        "samples": samples,
        "weights": [{"kind": "n"}, {"kind": "m", "gamma": 0.5}],
        "diagnostics": {"omega_radius": 2.0, "gamma": 0.5, "lt_exponent": 3.0},
    }


def semiclassical_preset(particles=(2, 3, 4), points: int = 16, horizon: float = 0.1, samples: int = 3) -> dict:
    """High density: fixed box, filled Fermi sea of the free Laplacian, ``hbar = N**(-1/3)``.

    The fine box makes the orbital equation stiff, hence the small mean-field step.
    """
    return {
        "grid": {"M": points, "L": 1.0, "boundary": "dirichlet"},
        "particles": list(particles),
        "regime": {"name": "semiclassical"},
        "interaction": {"kind": "soft_coulomb", "a": 0.1, "strength": 1.0},
        "initial": {"kind": "ground"},
        "horizon": horizon,
        "samples": samples,
        "meanfield": {"dt": 5e-5},
        "weights": [{"kind": "n"}],
        "diagnostics": {"omega_radius": 0.2, "gamma": 0.5, "lt_exponent": 3.0},
    }


def reference_preset() -> dict:
    """Small interacting reference run: M = 12, N = 2, gaussian kernel."""
    return {
        "grid": {"M": 12, "L": 12.0, "boundary": "periodic"},
        "particles": [2],
        "interaction": {"kind": "gaussian", "sigma": 1.5, "strength": 1.0},
        "external_field": {"preset": "cosine_trap", "amplitude": 0.5},
        "initial": {"kind": "ground"},
        "horizon": 1.0,
        "samples": 5,
    }
