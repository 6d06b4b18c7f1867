"""Time evolution: Lanczos propagation of the many-body state and the
Hartree / Hartree-Fock orbital integrators."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .alpha import exchange_operator
from .errors import (ConfigError, IntegratorAccuracyError, InvalidArgumentError,
                     PropagationError)
from .fock import (FockVector, HamiltonianSpec, apply_hamiltonian, hamiltonian_operator,
                   snapshot_dict)
from .lattice import (Grid, InteractionSpec, KernelTable, OneBodyOperator, OrbitalSet,
                      kernel_table, kinetic_sum, laplacian)

SCHEMES = ("rk4", "strang_split")


@dataclass(frozen=True)
class ExactPropagatorConfig:
    dt: float = 0.05
    krylov_dim: int = 20
    tol: float = 1e-10
    max_substeps: int = 100_000

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidArgumentError("dt must be positive")
        if self.krylov_dim < 2:
            raise InvalidArgumentError("krylov_dim must be >= 2")
        if not self.tol > 0:
            raise InvalidArgumentError("tol must be positive")
        if self.max_substeps < 1:
            raise InvalidArgumentError("max_substeps must be >= 1")


@dataclass(frozen=True)
class MeanFieldConfig:
    dt: float = 0.01
    scheme: str = "rk4"
    exchange: bool = False
    gram_tol: float = 1e-6

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidArgumentError("dt must be positive")
        if self.scheme not in SCHEMES:
            raise InvalidArgumentError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.scheme == "strang_split" and self.exchange:
            raise ConfigError("strang_split supports the direct (Hartree) interaction only")
        if not self.gram_tol > 0:
            raise InvalidArgumentError("gram_tol must be positive")


@dataclass(frozen=True)
class RegimePreset:
    """Scaling regime: interaction exponent ``beta``, time prefactor and kinetic prefactor.

    The kinetic operator is ``kinetic_prefactor * (-Delta)`` and the equations
    read ``i hbar_eff d/dt = H``.
    """

    name: str = "unscaled"
    beta: float = 0.0
    hbar_eff: float = 1.0
    kinetic_prefactor: float = 1.0

    def __post_init__(self):
        if self.name not in ("unscaled", "dilute", "semiclassical"):
            raise InvalidArgumentError(f"unknown regime {self.name!r}")
        if not self.hbar_eff > 0 or not self.kinetic_prefactor > 0:
            raise InvalidArgumentError("hbar_eff and kinetic_prefactor must be positive")

    @classmethod
    def unscaled(cls):
        return cls("unscaled", 0.0, 1.0, 1.0)

    @classmethod
    def dilute(cls, beta: float | None = None, s: float | None = None, dimension: int = 3):
        """Density of order one; ``beta`` defaults to ``1 - s / dimension`` (3D reference)."""
        if beta is None:
            if s is None:
                raise InvalidArgumentError("dilute regime needs beta or the kernel exponent s")
            beta = 1.0 - s / dimension
        return cls("dilute", float(beta), 1.0, 1.0)

    @classmethod
    def semiclassical(cls, N: int):
        """High density: ``hbar = N**(-1/3)``, interaction ``1/N``, kinetic ``hbar**2``."""
        hbar = float(N) ** (-1.0 / 3.0)
        return cls("semiclassical", 1.0, hbar, hbar**2)


def one_body_hamiltonian(grid: Grid, w=None, regime: RegimePreset | None = None) -> OneBodyOperator:
    kp = 1.0 if regime is None else regime.kinetic_prefactor
    mat = kp * laplacian(grid).matrix
    if w is not None:
        mat = mat + np.diag(np.asarray(w, dtype=float))
    return OneBodyOperator(mat)


def build_hamiltonian(grid: Grid, spec: InteractionSpec | KernelTable | None, w=None,
                      regime: RegimePreset | None = None) -> HamiltonianSpec:
    """Many-body Hamiltonian matching the mean-field equations of the same inputs."""
    regime = regime or RegimePreset.unscaled()
    pair = None if spec is None else kernel_table(spec, grid)
    return HamiltonianSpec(one_body_hamiltonian(grid, w, regime), pair, regime.hbar_eff)


# ---------------------------------------------------------------------------
# exact propagation
# ---------------------------------------------------------------------------


@dataclass
class KrylovStats:
    substeps: int = 0
    rejected: int = 0
    max_error_estimate: float = 0.0


def _lanczos(matvec, v0: np.ndarray, m: int):
    """Lanczos with full reorthogonalization.  Returns basis, diag, offdiag, next beta."""
    n = v0.size
    m = min(m, n)
    basis = np.zeros((m, n), dtype=complex)
    alpha = np.zeros(m)
    beta = np.zeros(m)
    basis[0] = v0
    scale = 1.0
    for j in range(m):
        w = matvec(basis[j])
        alpha[j] = np.real(np.vdot(basis[j], w))
        if j == 0:
            scale = max(abs(alpha[0]), np.linalg.norm(w), 1.0)
        w = w - basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
        w = w - basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
        b = np.linalg.norm(w)
        beta[j] = b
        if b <= 1e-13 * scale:
            return basis[: j + 1], alpha[: j + 1], beta[:j], 0.0
        if j + 1 < m:
            basis[j + 1] = w / b
    return basis, alpha, beta[: m - 1], beta[m - 1]


def _krylov_phase(alpha, offdiag, tau):
    """First column of ``exp(-i T tau)`` for the tridiagonal T."""
    if alpha.size == 1:
        return np.array([np.exp(-1j * alpha[0] * tau)])
    evals, evecs = eigh_tridiagonal(alpha, offdiag)
    return evecs @ (np.exp(-1j * evals * tau) * evecs[0])


def exact_evolve(h: HamiltonianSpec, psi: FockVector, t: float,
                 cfg: ExactPropagatorConfig | None = None, stats: KrylovStats | None = None) -> FockVector:
    """Approximate ``exp(-i H t / hbar_eff) psi`` with adaptive Lanczos substeps.

    Each substep has length at most ``cfg.dt``; it is halved until the Krylov
    error estimate ``beta_m |e_m^T exp(-i T tau) e_1|`` drops below ``cfg.tol``.
    """
    cfg = cfg or ExactPropagatorConfig()
    stats = stats if stats is not None else KrylovStats()
    if abs(psi.norm() - 1) > 1e-10:
        raise InvalidArgumentError("exact_evolve expects a normalized state")
    if t == 0:
        return FockVector(psi.basis, psi.coeffs.copy())
    matvec = hamiltonian_operator(h, psi.basis)
    direction = math.copysign(1.0, t)
    remaining = abs(t)
    c = psi.coeffs.copy()
    tau_try = min(cfg.dt, remaining)
    done = 0.0
    while remaining > 1e-15 * abs(t):
        nrm = np.linalg.norm(c)
        basis, alpha, offdiag, beta_next = _lanczos(matvec, c / nrm, cfg.krylov_dim)
        tau = min(tau_try, remaining)
        while True:
            if stats.substeps >= cfg.max_substeps:
                raise PropagationError(
                    f"Krylov propagation exceeded {cfg.max_substeps} substeps",
                    time=direction * done,
                    diagnostics={"substeps": stats.substeps, "rejected": stats.rejected,
                                 "last_step": tau})
            y = _krylov_phase(alpha, offdiag, direction * tau / h.hbar_eff)
            err = beta_next * abs(y[-1])
            if err <= cfg.tol:
                break
            stats.rejected += 1
            stats.substeps += 1
            tau *= 0.5
        stats.substeps += 1
        stats.max_error_estimate = max(stats.max_error_estimate, err)
        c = nrm * (basis.T @ y)
        remaining -= tau
        done += tau
        tau_try = min(cfg.dt, 2 * tau) if tau < tau_try else tau_try
    return FockVector(psi.basis, c)


def exact_trajectory(h: HamiltonianSpec, psi: FockVector, times, cfg: ExactPropagatorConfig | None = None):
    """States at each of the (nondecreasing) ``times``, starting from ``psi`` at t=0."""
    out = []
    cur, t_cur = psi, 0.0
    for t in times:
        cur = exact_evolve(h, cur, t - t_cur, cfg)
        t_cur = t
        out.append(cur)
    return out


def energy_many(h: HamiltonianSpec, psi: FockVector) -> float:
    nrm = psi.norm()
    if nrm == 0:
        raise InvalidArgumentError("energy of the zero state is undefined")
    return float(np.real(np.vdot(psi.coeffs, apply_hamiltonian(h, psi).coeffs)) / nrm**2)


# ---------------------------------------------------------------------------
# mean-field dynamics
# ---------------------------------------------------------------------------


def _vmat(spec, grid: Grid) -> np.ndarray:
    if spec is None:
        return np.zeros((grid.points, grid.points))
    return kernel_table(spec, grid).matrix


def _field(w, grid: Grid) -> np.ndarray:
    return np.zeros(grid.points) if w is None else np.asarray(w, dtype=float)


class MeanFieldGenerator:
    """Right-hand side of the orbital equations for fixed kernel, field and regime."""

    def __init__(self, grid: Grid, spec, w=None, regime: RegimePreset | None = None,
                 exchange: bool = False):
        self.grid = grid
        self.regime = regime or RegimePreset.unscaled()
        self.vmat = _vmat(spec, grid)
        self.w = _field(w, grid)
        self.h0 = one_body_hamiltonian(grid, self.w, self.regime).matrix
        self.exchange = exchange

    def effective(self, vecs: np.ndarray) -> np.ndarray:
        """Effective one-body matrix ``H0 + v * rho`` (minus exchange) at the given orbitals."""
        weights = np.sum(np.abs(vecs) ** 2, axis=0)
        op = self.h0 + np.diag(self.vmat @ weights)
        if self.exchange:
            p = vecs.T @ vecs.conj()
            op = op - exchange_operator(self.vmat, p)
        return op

    def __call__(self, vecs: np.ndarray) -> np.ndarray:
        return (-1j / self.regime.hbar_eff) * (vecs @ self.effective(vecs).T)


def hartree_rhs(orbitals: OrbitalSet, spec, w=None, regime: RegimePreset | None = None) -> np.ndarray:
    """Tangent vectors (rows) of the fermionic Hartree flow."""
    return MeanFieldGenerator(orbitals.grid, spec, w, regime, exchange=False)(orbitals.vectors)


def hf_rhs(orbitals: OrbitalSet, spec, w=None, regime: RegimePreset | None = None) -> np.ndarray:
    """Tangent vectors (rows) of the Hartree-Fock flow."""
    return MeanFieldGenerator(orbitals.grid, spec, w, regime, exchange=True)(orbitals.vectors)


def rk4_step(rhs, vecs: np.ndarray, dt: float) -> np.ndarray:
    k1 = rhs(vecs)
    k2 = rhs(vecs + 0.5 * dt * k1)
    k3 = rhs(vecs + 0.5 * dt * k2)
    k4 = rhs(vecs + dt * k3)
    return vecs + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


class _StrangStepper:
    def __init__(self, gen: MeanFieldGenerator):
        g = gen.grid
        if g.boundary != "periodic":
            raise ConfigError("strang_split requires a periodic grid")
        if gen.exchange:
            raise ConfigError("strang_split supports the direct (Hartree) interaction only")
        self.gen = gen
        h = g.spacing
        self.kin = gen.regime.kinetic_prefactor * (2 - 2 * np.cos(g.momenta * h)) / h**2

    def __call__(self, vecs: np.ndarray, dt: float) -> np.ndarray:
        hbar = self.gen.regime.hbar_eff
        half = np.exp(-1j * self.kin * dt / (2 * hbar))
        v = np.fft.ifft(np.fft.fft(vecs, axis=1) * half, axis=1)
        weights = np.sum(np.abs(v) ** 2, axis=0)
        pot = self.gen.w + self.gen.vmat @ weights
        v = v * np.exp(-1j * pot * dt / hbar)
        return np.fft.ifft(np.fft.fft(v, axis=1) * half, axis=1)


@dataclass
class MeanFieldTrajectory:
    times: list
    orbitals: list
    gram_drift: list
    max_gram_drift: float = 0.0
    steps: int = 0


def _gram_drift(vecs: np.ndarray) -> float:
    g = vecs.conj() @ vecs.T
    return float(np.max(np.abs(g - np.eye(vecs.shape[0]))))


def mf_evolve(orbitals: OrbitalSet, spec, w=None, regime: RegimePreset | None = None,
              t: float = 1.0, cfg: MeanFieldConfig | None = None,
              sample_times=None) -> MeanFieldTrajectory:
    """Integrate the Hartree (or Hartree-Fock) equations up to time ``t``.

    Args:
        orbitals: orthonormal initial orbitals.
        spec: interaction (already carrying its N-scaling) or kernel table; None for free motion.
        w: external field on the grid, or None.
        regime: scaling regime; unscaled if None.
        t: final time (may be negative).
        cfg: integrator settings.
        sample_times: times in ``[0, t]`` (or ``[t, 0]``) at which to store orbitals;
            defaults to ``[0, t]``.

    Returns:
        Trajectory with the sampled orbital sets and the Gram drift at each sample.

    Raises:
        IntegratorAccuracyError: the Gram deviation exceeded ``cfg.gram_tol``.
    """
    cfg = cfg or MeanFieldConfig()
    gen = MeanFieldGenerator(orbitals.grid, spec, w, regime, exchange=cfg.exchange)
    if cfg.scheme == "rk4":
        def step(v, dt):
            return rk4_step(gen, v, dt)
    else:
        step = _StrangStepper(gen)
    samples = [0.0, t] if sample_times is None else [float(s) for s in sample_times]
    vecs = orbitals.vectors.copy()
    t_cur = 0.0
    traj = MeanFieldTrajectory([], [], [])
    for s in samples:
        span = s - t_cur
        n = int(math.ceil(abs(span) / cfg.dt - 1e-9)) if span else 0
        for i in range(n):
            vecs = step(vecs, span / n)
            traj.steps += 1
            drift = _gram_drift(vecs)
            traj.max_gram_drift = max(traj.max_gram_drift, drift)
            if drift > cfg.gram_tol:
                now = t_cur + span * (i + 1) / n
                raise IntegratorAccuracyError(
                    f"orbital Gram deviation {drift:.3e} exceeds {cfg.gram_tol:.1e} at t={now:.6g}; "
                    f"reduce dt (currently {cfg.dt})", time=now, drift=drift)
        t_cur = s
        traj.times.append(s)
        traj.orbitals.append(OrbitalSet(orbitals.grid, vecs.copy(), tol=max(cfg.gram_tol, orbitals.tol)))
        traj.gram_drift.append(_gram_drift(vecs))
    return traj


@dataclass(frozen=True)
class MeanFieldEnergy:
    total: float
    one_body: float
    direct: float
    exchange: float
    kinetic_sum: float


def energy_mf(orbitals: OrbitalSet, spec, w=None, regime: RegimePreset | None = None,
              exchange: bool = False) -> MeanFieldEnergy:
    """Mean-field energy functional.

    ``sum_j <phi_j, H0 phi_j> + 1/2 sum v(x-y) rho(x) rho(y)`` with ``h**2``
    weighting, minus half the exchange sum when ``exchange`` is set.  The plain
    gradient sum ``sum_j ||D phi_j||**2`` is reported as ``kinetic_sum``.
    """
    vecs = orbitals.vectors
    if orbitals.count == 0 or not np.any(vecs):
        raise InvalidArgumentError("energy of an empty orbital set is undefined")
    grid = orbitals.grid
    h0 = one_body_hamiltonian(grid, w, regime).matrix
    one = float(np.real(np.einsum("jx,xy,jy->", vecs.conj(), h0, vecs)))
    vmat = _vmat(spec, grid)
    weights = np.sum(np.abs(vecs) ** 2, axis=0)
    direct = 0.5 * float(weights @ vmat @ weights)
    ex = 0.0
    if exchange:
        p = vecs.T @ vecs.conj()
        ex = 0.5 * float(np.real(np.sum(vmat * np.abs(p) ** 2)))
    return MeanFieldEnergy(one + direct - ex, one, direct, ex, kinetic_sum(orbitals))


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def blob_hash(data: bytes) -> str:
    """Git-style object id of ``data`` (sha1 over ``b"blob <len>\\0" + data``)."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_checkpoints(directory, times, states=None, orbitals=None, config: dict | None = None) -> dict:
    """Persist snapshots at ``times`` plus a manifest; returns the manifest.

    States go to ``psi_<i>.json`` (see :func:`mflab.fock.save_snapshot`), orbital
    sets to ``orbitals_<i>.json`` as ``{"M", "N", "re", "im"}``.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files = []
    for i, t in enumerate(times):
        entry = {"t": float(t)}
        if states is not None:
            data = canonical_json(snapshot_dict(states[i]))
            (d / f"psi_{i:04d}.json").write_bytes(data)
            entry["psi"] = {"file": f"psi_{i:04d}.json", "hash": blob_hash(data)}
        if orbitals is not None:
            o = orbitals[i]
            data = canonical_json({"M": o.grid.points, "N": o.count,
                                   "re": o.vectors.real.tolist(), "im": o.vectors.imag.tolist()})
            (d / f"orbitals_{i:04d}.json").write_bytes(data)
            entry["orbitals"] = {"file": f"orbitals_{i:04d}.json", "hash": blob_hash(data)}
        files.append(entry)
    config = config or {}
    first = []
    if states is not None and len(times):
        first.append(files[0]["psi"]["hash"])
    if orbitals is not None and len(times):
        first.append(files[0]["orbitals"]["hash"])
    manifest = {
        "times": [float(t) for t in times],
        "config": config,
        "inputs_hash": blob_hash(canonical_json({"config": config, "initial": first})),
        "snapshots": files,
    }
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def load_orbital_snapshot(path, grid: Grid, tol: float = 1e-6) -> OrbitalSet:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if data["M"] != grid.points:
        raise InvalidArgumentError("snapshot grid size does not match")
    vecs = np.array(data["re"]) + 1j * np.array(data["im"])
    return OrbitalSet(grid, vecs.reshape(data["N"], data["M"]), tol=tol)
