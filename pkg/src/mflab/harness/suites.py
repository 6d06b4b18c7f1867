"""Self-check suites behind the ``check`` subcommand."""
from __future__ import annotations

import numpy as np

from .. import diagnostics as dg
from ..alpha import weight_m, weight_n
from ..fock import FockVector, build_basis, random_fock_vector, slater
from ..lattice import InteractionSpec, OrbitalSet, ground_orbitals, make_grid, packet_orbitals
from ..propagate import (ExactPropagatorConfig, MeanFieldConfig, build_hamiltonian, energy_many,
                         energy_mf, exact_evolve, mf_evolve)

SUITES = ("algebra", "lemmas", "dynamics")


def random_orbitals(grid, n, rng) -> OrbitalSet:
    a = rng.standard_normal((grid.points, grid.points)) + 1j * rng.standard_normal((grid.points, grid.points))
    q, _ = np.linalg.qr(a)
    return OrbitalSet(grid, q[:, :n].T.copy())


def correlated_state(orbitals, basis, rng, mix=None) -> FockVector:
    """Determinant plus a random admixture of random size (fully random when mix is inf)."""
    base = slater(orbitals, basis).coeffs
    x = random_fock_vector(basis, rng).coeffs
    mix = rng.uniform(0.05, 3.0) if mix is None else mix
    if np.isinf(mix):
        return FockVector(basis, x)
    return FockVector(basis, base + mix * x).normalized()


def algebra_suite(seed: int = 0, count: int = 20) -> list:
    rng = np.random.default_rng([seed, 1])
    grid = make_grid(10, 10.0)
    basis = build_basis(10, 3)
    out = []
    for _ in range(count):
        orb = random_orbitals(grid, 3, rng)
        out.append(dg.projector_algebra_check(correlated_state(orb, basis, rng), orb))
        phi = rng.standard_normal(10) + 1j * rng.standard_normal(10)
        out.append(dg.lemma_onebody_projector_check(random_fock_vector(basis, rng), phi))
    small = make_grid(6, 6.0)
    for i in range(count):
        orb = random_orbitals(small, 2, rng)
        h = rng.standard_normal((36, 36)) + 1j * rng.standard_normal((36, 36))
        h = h + h.conj().T
        psi = dg.antisymmetrize(rng.standard_normal(36) + 1j * rng.standard_normal(36), 6, 2)
        chi = dg.antisymmetrize(rng.standard_normal(36) + 1j * rng.standard_normal(36), 6, 2)
        f = weight_n(2) if i % 2 else weight_m(2, 0.5)
        out.append(dg.shift_lemma_check(h, psi, chi, orb, f, int(rng.integers(3)), int(rng.integers(3))))
    return out


def lemmas_suite(seed: int = 0, count: int = 20) -> list:
    rng = np.random.default_rng([seed, 2])
    grid = make_grid(10, 10.0)
    basis = build_basis(10, 3)
    out = []
    for _ in range(count):
        orb = random_orbitals(grid, 3, rng)
        psi = correlated_state(orb, basis, rng)
        out.append(dg.density_lemma_check(psi, orb))
        for g in (0.3, 0.5, 1.0):
            out.append(dg.alpha_m_vs_n_check(psi, orb, g))
            out.append(dg.qrootf_check(psi, orb, g))
    g8 = make_grid(8, 8.0)
    spec = InteractionSpec.gaussian(1.0, 1.0)
    b8 = build_basis(8, 2)
    for _ in range(max(1, count // 4)):
        orb = random_orbitals(g8, 2, rng)
        out.append(dg.variance_check(spec, orb, int(rng.integers(8))))
        h = rng.uniform(0, 1, (8, 8))
        out.append(dg.sandwich_bound_check(correlated_state(orb, b8, rng), orb, h + h.T))
    return out


def dynamics_suite(seed: int = 0) -> list:
    out = []
    for weight in ("n", "m"):
        sc = dg.random_derivative_scenario(12, 2, seed=seed, weight=weight)
        out.append(dg.derivative_identity_check(sc))
    grid = make_grid(10, 10.0)
    orb = ground_orbitals(grid, 0.3 * np.cos(2 * np.pi * grid.coords / 10), 3)
    moving = packet_orbitals(grid, [2.0, 5.0, 8.0], 1.0, [0.4, -0.2, 0.1])
    basis = build_basis(10, 3)
    h = build_hamiltonian(grid, None, None)
    psi_t = exact_evolve(h, slater(moving, basis), 1.0, ExactPropagatorConfig(dt=0.05))
    orb_t = mf_evolve(moving, None, None, None, 1.0, MeanFieldConfig(dt=0.005)).orbitals[-1]
    fid = abs(np.vdot(slater(orb_t, basis).coeffs, psi_t.coeffs)) ** 2
    rep = dg._report("noninteracting_fidelity", (moving,), {"fidelity": fid}, [fid - (1 - 1e-8)])
    out.append(rep)
    spec = InteractionSpec.gaussian(1.0, 1.0)
    h = build_hamiltonian(grid, spec, None)
    psi0 = slater(orb, basis)
    e0 = energy_many(h, psi0)
    psi = exact_evolve(h, psi0, 1.0, ExactPropagatorConfig(dt=0.05))
    drift = abs(energy_many(h, psi) - e0)
    out.append(dg._report("exact_conservation", (orb,), {"energy_drift": drift, "norm": psi.norm()},
                          [1e-8 - drift, 1e-10 - abs(psi.norm() - 1)]))
    em0 = energy_mf(moving, spec).total
    traj = mf_evolve(moving, spec, None, None, 1.0, MeanFieldConfig(dt=0.01))
    em1 = energy_mf(traj.orbitals[-1], spec).total
    out.append(dg._report("hartree_conservation", (moving,),
                          {"energy_drift": abs(em1 - em0), "gram_drift": traj.max_gram_drift},
                          [1e-6 - abs(em1 - em0), 1e-6 - traj.max_gram_drift]))
    return out


def run_suite(name: str = "all", seed: int = 0) -> list:
    if name == "all":
        return algebra_suite(seed) + lemmas_suite(seed) + dynamics_suite(seed)
    if name == "algebra":
        return algebra_suite(seed)
    if name == "lemmas":
        return lemmas_suite(seed)
    if name == "dynamics":
        return dynamics_suite(seed)
    raise ValueError(f"unknown suite {name!r}")
