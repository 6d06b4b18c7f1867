"""Named, verdict-producing checks of norms, inequalities and identities.

Every check returns a :class:`CheckReport` holding all evaluated left and right
sides.  Inequality checks pass when the smallest margin (right minus left) is
at least ``-tol``; informational checks only report numbers.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, fields, is_dataclass
from pathlib import Path

import numpy as np

from .alpha import (CountingOperator, derivative, derivative_terms, fhat_apply, pnk_distribution,
                    shifted, weight_m, weight_n, _check_two_body_cap, sandwich,
                    pair_kernel_matrix)
from .errors import InvalidArgumentError
from .fock import FockVector, Rdm, build_basis, expect_two_body, rdm1, slater
from .lattice import (Density, Grid, InteractionSpec, KernelTable, OrbitalSet, density,
                      gradient_matrix, kernel_table, kinetic_sum, mean_field, mean_field_squared)

PASS, FAIL, INFO = "pass", "fail", "informational"
ROUNDOFF_FLOOR = 1e-11


@dataclass
class CheckReport:
    check_id: str
    inputs_digest: str
    quantities: dict
    verdict: str
    slack: float | None = None

    @property
    def passed(self) -> bool:
        return self.verdict != FAIL

    def to_dict(self) -> dict:
        return {"check_id": self.check_id, "digest": self.inputs_digest,
                "quantities": {k: _jsonable(v) for k, v in self.quantities.items()},
                "verdict": self.verdict, "slack": _jsonable(self.slack)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _jsonable(v):
    if v is None:
        return None
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def write_reports(reports, path) -> None:
    """One JSON object per line."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in reports:
            fh.write(r.to_json() + "\n")


def read_reports(path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines() if line]


def digest(*objs) -> str:
    """Stable sha256 over arrays, states, orbital sets, specs and scalars."""
    hsh = hashlib.sha256()

    def feed(o):
        if isinstance(o, FockVector):
            hsh.update(b"fock%d,%d" % (o.basis.M, o.basis.N))
            feed(o.coeffs)
        elif isinstance(o, OrbitalSet):
            hsh.update(b"orbitals")
            feed(o.grid)
            feed(o.vectors)
        elif isinstance(o, (Density, KernelTable)):
            feed(o.grid)
            feed(o.values)
        elif isinstance(o, Rdm):
            feed(o.matrix)
        elif isinstance(o, np.ndarray):
            a = np.ascontiguousarray(o)
            hsh.update(str((a.dtype.str, a.shape)).encode())
            hsh.update(a.tobytes())
        elif is_dataclass(o):
            hsh.update(type(o).__name__.encode())
            for f_ in fields(o):
                feed(getattr(o, f_.name))
        elif isinstance(o, (list, tuple)):
            hsh.update(b"[")
            for x in o:
                feed(x)
            hsh.update(b"]")
        else:
            hsh.update(repr(o).encode())
        hsh.update(b";")

    for o in objs:
        feed(o)
    return hsh.hexdigest()


def _report(check_id, inputs, quantities, margins=None, tol=0.0, informational=False) -> CheckReport:
    d = digest(*inputs)
    if informational:
        return CheckReport(check_id, d, quantities, INFO, None)
    slack = float(min(margins)) if margins else 0.0
    return CheckReport(check_id, d, quantities, PASS if slack >= -tol else FAIL, slack)


# ---------------------------------------------------------------------------
# norms and density-matrix chains
# ---------------------------------------------------------------------------


def matrix_norms(a) -> tuple[float, float, float]:
    """(trace norm, Hilbert-Schmidt norm, operator norm)."""
    a = np.asarray(a)
    if np.allclose(a, a.conj().T, rtol=0, atol=1e-14):
        s = np.abs(np.linalg.eigvalsh(0.5 * (a + a.conj().T)))
    else:
        s = np.linalg.svd(a, compute_uv=False)
    return float(np.sum(s)), float(np.sqrt(np.sum(s**2))), float(np.max(s, initial=0.0))


def density_matrix_difference(psi: FockVector, orbitals: OrbitalSet) -> np.ndarray:
    """``gamma^(slater) - gamma^psi`` with both normalized to unit trace."""
    return orbitals.projector() / orbitals.count - rdm1(psi).matrix


def density_lemma_check(psi: FockVector, orbitals: OrbitalSet, tol: float = 1e-10) -> CheckReport:
    """Trace/Hilbert-Schmidt norms of the density-matrix difference against ``alpha_n``."""
    n = psi.basis.N
    diff = density_matrix_difference(psi, orbitals)
    tr, hs, op = matrix_norms(diff)
    a_n = pnk_distribution(psi, orbitals).expectation(weight_n(n))
    q = {"alpha_n": a_n, "tr_norm": tr, "hs_norm": hs, "op_norm": op,
         "tr_sq": tr**2, "8alpha": 8 * a_n, "8sqrtN_hs": 8 * math.sqrt(n) * hs,
         "N_hs_sq": n * hs**2, "2alpha": 2 * a_n}
    margins = [8 * a_n - tr**2, 8 * math.sqrt(n) * hs - 8 * a_n, 2 * a_n - n * hs**2, tr - 2 * a_n]
    return _report("density_lemma", (psi, orbitals), q, margins, tol)


def alpha_m_vs_n_check(psi: FockVector, orbitals: OrbitalSet, gamma: float, tol: float = 1e-12) -> CheckReport:
    n = psi.basis.N
    dist = pnk_distribution(psi, orbitals)
    a_n = dist.expectation(weight_n(n))
    a_m = dist.expectation(weight_m(n, gamma))
    upper = n ** (1 - gamma) * a_n
    q = {"alpha_n": a_n, "alpha_m": a_m, "upper": upper, "gamma": gamma}
    return _report("alpha_m_vs_n", (psi, orbitals, gamma), q, [upper - a_m, a_m - a_n], tol)


def qrootf_check(psi: FockVector, orbitals: OrbitalSet, gamma: float, tol: float = 1e-12) -> CheckReport:
    """Bounds on ``m'^(+-d)``-filtered states with zero, one and two q-projectors.

    Left sides use the filtered vector ``chi`` directly: ``||q_1 chi||**2`` is
    ``<chi, N_q chi> / N`` and ``||q_1 q_2 chi||**2`` is
    ``<chi, (N_q**2 - N_q) chi> / (N (N-1))``.  The same quantities computed
    from the distribution are reported with suffix ``_dist``.
    """
    n = psi.basis.N
    m = weight_m(n, gamma)
    dist = pnk_distribution(psi, orbitals)
    probs = dist.probs
    a_m = dist.expectation(m)
    ks = np.arange(n + 1)
    nq = CountingOperator(orbitals)
    q, margins = {"alpha_m": a_m, "gamma": gamma}, []

    def filtered(d):
        return fhat_apply(psi, orbitals, np.sqrt(np.clip(derivative(m, d), 0, None)))

    def one_q(chi):
        return float(np.real(np.vdot(chi.coeffs, nq.apply(chi.coeffs, chi.basis)))) / n

    def two_q(chi):
        c1 = nq.apply(chi.coeffs, chi.basis)
        c2 = nq.apply(c1, chi.basis)
        return float(np.real(np.vdot(chi.coeffs, c2 - c1))) / (n * (n - 1))

    for d in (1, 2):
        if d > n:
            continue
        for sgn in (1, -1):
            tag = f"{'+' if sgn > 0 else '-'}{d}"
            deriv = derivative(m, sgn * d)
            chi = filtered(sgn * d)
            lhs0 = chi.norm() ** 2
            rhs0 = d * n ** (-gamma)
            lhs1 = one_q(chi)
            rhs1 = (d if sgn < 0 else d + 1) * a_m / n
            q[f"norm_sq[{tag}]"] = lhs0
            q[f"norm_sq[{tag}]_dist"] = float(deriv @ probs)
            q[f"norm_sq_bound[{tag}]"] = rhs0
            q[f"q1_sq[{tag}]"] = lhs1
            q[f"q1_sq[{tag}]_dist"] = float((ks / n * deriv) @ probs)
            q[f"q1_sq_bound[{tag}]"] = rhs1
            margins += [rhs0 - lhs0, rhs1 - lhs1]
    if n >= 2:
        chi = filtered(1)
        lhs2 = two_q(chi)
        rhs2 = 3 * n ** (gamma - 2) * a_m
        q["q1q2_sq[+1]"] = lhs2
        q["q1q2_sq[+1]_dist"] = float((ks * (ks - 1) / (n * (n - 1)) * derivative(m, 1)) @ probs)
        q["q1q2_sq_bound[+1]"] = rhs2
        margins.append(rhs2 - lhs2)
    return _report("qrootf", (psi, orbitals, gamma), q, margins, tol)


# ---------------------------------------------------------------------------
# time-derivative identity
# ---------------------------------------------------------------------------


@dataclass
class DerivativeScenario:
    """Inputs of the finite-difference test of the alpha_f derivative decomposition."""

    psi: FockVector
    orbitals: OrbitalSet
    spec: object
    weight: object
    w: np.ndarray | None = None
    regime: object = None
    exchange: bool = False
    dt: float = 1e-3
    bound: float = 1e-6
    substeps: int = 8
    krylov_tol: float = 1e-15


def random_derivative_scenario(M: int = 12, N: int = 2, seed: int = 0, weight: str = "n",
                               gamma: float = 0.5, sigma: float = 1.5, strength: float = 1.0,
                               mix: float = 0.3, exchange: bool = False) -> DerivativeScenario:
    """Correlated state near a ground-state determinant, generic orbitals, gaussian kernel."""
    from .lattice import ground_orbitals, make_grid

    rng = np.random.default_rng(seed)
    grid = make_grid(M, float(M), "periodic")
    w = 0.3 * np.cos(2 * np.pi * grid.coords / grid.length)
    spec = InteractionSpec.gaussian(sigma, strength)
    basis = build_basis(M, N)
    base = slater(ground_orbitals(grid, w, N), basis).coeffs
    x = rng.standard_normal(basis.dim) + 1j * rng.standard_normal(basis.dim)
    psi = FockVector(basis, base + mix * x / np.linalg.norm(x)).normalized()
    a = rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))
    qmat, _ = np.linalg.qr(a)
    orbitals = OrbitalSet(grid, qmat[:, :N].T.copy())
    f = weight_n(N) if weight == "n" else weight_m(N, gamma)
    return DerivativeScenario(psi, orbitals, spec, f, w=w, exchange=exchange)


def finite_difference_alpha(sc: DerivativeScenario, dt: float) -> float:
    """Centered difference of alpha_f along the coupled exact / mean-field flow at t = 0."""
    from .alpha import alpha_f
    from .propagate import (ExactPropagatorConfig, MeanFieldConfig, build_hamiltonian,
                            exact_evolve, mf_evolve)

    h = build_hamiltonian(sc.orbitals.grid, sc.spec, sc.w, sc.regime)
    ecfg = ExactPropagatorConfig(dt=max(dt, 1e-2), tol=sc.krylov_tol)
    mcfg = MeanFieldConfig(dt=dt / sc.substeps, exchange=sc.exchange)
    vals = []
    for sgn in (1.0, -1.0):
        psi_t = exact_evolve(h, sc.psi, sgn * dt, ecfg)
        orb_t = mf_evolve(sc.orbitals, sc.spec, sc.w, sc.regime, sgn * dt, mcfg).orbitals[-1]
        vals.append(alpha_f(psi_t, orb_t, sc.weight))
    return (vals[0] - vals[1]) / (2 * dt)


def derivative_identity_check(sc: DerivativeScenario) -> CheckReport:
    """Finite difference of alpha_f against the three-term decomposition, at dt and dt/2."""
    hbar = 1.0 if sc.regime is None else sc.regime.hbar_eff
    terms = derivative_terms(sc.psi, sc.orbitals, sc.spec, sc.weight, exchange=sc.exchange, hbar_eff=hbar)
    fd1 = finite_difference_alpha(sc, sc.dt)
    fd2 = finite_difference_alpha(sc, sc.dt / 2)
    e1, e2 = abs(fd1 - terms.total), abs(fd2 - terms.total)
    ratio = e1 / e2 if e2 > 0 else math.inf
    q = {"term_I": terms.term_I, "term_II": terms.term_II, "term_III": terms.term_III,
         "terms_total": terms.total, "fd_dt": fd1, "fd_dt_half": fd2,
         "error_dt": e1, "error_dt_half": e2, "error_ratio": ratio, "dt": sc.dt}
    # both errors at the roundoff floor of a centered difference (~eps/dt): the ratio carries no information
    exact = e1 <= ROUNDOFF_FLOOR and e2 <= ROUNDOFF_FLOOR
    margins = [sc.bound - e1] if exact else [sc.bound - e1, ratio - 3, 5 - ratio]
    return _report("derivative_identity", (sc.psi, sc.orbitals, sc.spec, sc.weight, sc.dt), q, margins)


# ---------------------------------------------------------------------------
# shift lemma on the tensor representation
# ---------------------------------------------------------------------------


def _kron_all(mats):
    out = np.array([[1.0 + 0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


def tensor_counting_projectors(p: np.ndarray, n: int) -> list[np.ndarray]:
    """``P^(n,k)`` on the full n-fold tensor product, k = 0..n."""
    q = np.eye(p.shape[0]) - p
    out = []
    for k in range(n + 1):
        acc = 0
        for subset in itertools.combinations(range(n), k):
            acc = acc + _kron_all([q if i in subset else p for i in range(n)])
        out.append(acc)
    return out


def pair_projector(p: np.ndarray, a: int) -> np.ndarray:
    """Two-particle projector with exactly ``a`` q-factors."""
    q = np.eye(p.shape[0]) - p
    return [np.kron(p, p), np.kron(p, q) + np.kron(q, p), np.kron(q, q)][a]


def antisymmetrize(vec: np.ndarray, m: int, n: int) -> np.ndarray:
    t = vec.reshape((m,) * n)
    out = np.zeros_like(t)
    for perm in itertools.permutations(range(n)):
        sign = np.linalg.det(np.eye(n)[list(perm)])
        out = out + sign * np.transpose(t, perm)
    out = out.ravel()
    return out / np.linalg.norm(out)


def shift_lemma_check(hpair: np.ndarray, psi: np.ndarray, chi: np.ndarray, orbitals: OrbitalSet,
                      f, a: int, b: int, tol: float = 1e-10) -> CheckReport:
    """Compare ``<chi, (P^a h P^b) f^ psi>`` with ``<chi, f^_{b-a} (P^a h P^b) psi>``.

    ``psi`` and ``chi`` are vectors on the full N-fold tensor product; ``hpair``
    acts on the first two factors.
    """
    m, n = orbitals.grid.points, orbitals.count
    if psi.size != m**n or chi.size != m**n:
        raise InvalidArgumentError("tensor vectors must have length M**N")
    p = orbitals.projector()
    projs = tensor_counting_projectors(p, n)
    fv = f.values if hasattr(f, "values") else np.asarray(f, float)
    fhat = sum(fv[k] * projs[k] for k in range(n + 1))
    fs = shifted(fv, b - a)
    fhat_s = sum(fs[k] * projs[k] for k in range(n + 1))
    op2 = pair_projector(p, a) @ hpair @ pair_projector(p, b)
    op = np.kron(op2, np.eye(m ** (n - 2))) if n > 2 else op2
    lhs = np.vdot(chi, op @ (fhat @ psi))
    rhs = np.vdot(chi, fhat_s @ (op @ psi))
    gap = abs(lhs - rhs)
    q = {"lhs_re": lhs.real, "lhs_im": lhs.imag, "rhs_re": rhs.real, "rhs_im": rhs.imag,
         "gap": gap, "a": a, "b": b}
    return _report("shift_lemma", (hpair, psi, chi, orbitals, fv, a, b), q, [-gap], tol)


# ---------------------------------------------------------------------------
# hypotheses and auxiliary quantities
# ---------------------------------------------------------------------------


def _table(spec, grid: Grid) -> KernelTable:
    return kernel_table(spec, grid)


def _pair_distance(grid: Grid) -> np.ndarray:
    return grid.offset_distances[grid.offset_index]


def assumption_check(spec, rho: Density, omega_radius: float, gamma: float,
                     N: int | None = None) -> CheckReport:
    """Four fluctuation-control quantities of a kernel and density (informational).

    D1 = sup (v^2 * rho) N**gamma; D2 = sum (v^2 * rho) rho; D3 = N sup_y of the
    local integral of v^2 rho over ``|x - y| < R``; D4 = N**(1/2 + gamma/2) times
    ``sup |v|`` over distances ``>= R``.
    """
    grid = rho.grid
    n = int(round(rho.mass)) if N is None else int(N)
    table = _table(spec, grid)
    v2rho = mean_field_squared(table, rho)
    dist = _pair_distance(grid)
    vmat = table.matrix
    local = np.where(dist < omega_radius, vmat**2, 0.0) @ rho.weights
    far = np.abs(table.values[grid.offset_distances >= omega_radius])
    q = {
        "D1": float(np.max(v2rho)) * n**gamma,
        "D2": float(v2rho @ rho.weights),
        "D3": n * float(np.max(local)),
        "D4": n ** (0.5 + gamma / 2) * float(np.max(far, initial=0.0)),
        "N": n, "gamma": gamma, "radius": omega_radius,
    }
    return _report("assumption", (table, rho, omega_radius, gamma, n), q, informational=True)


def variance_check(spec, orbitals: OrbitalSet, y: int, tol: float = 1e-10) -> CheckReport:
    """Variance over the determinant of ``sum_k v(x_k - y)`` against ``(v^2 * rho)(y)``.

    ``y`` is a grid index.
    """
    grid = orbitals.grid
    if not 0 <= y < grid.points:
        raise InvalidArgumentError(f"site index {y} outside the grid")
    vmat = _table(spec, grid).matrix
    u = vmat[:, y]
    p = orbitals.projector()
    weights = np.real(np.diag(p))
    second = float(u**2 @ weights)
    exchange = float(np.real(u @ (np.abs(p) ** 2) @ u))
    var = second - exchange
    bound = float(mean_field_squared(_table(spec, grid), density(orbitals))[y])
    q = {"variance": var, "bound": bound, "second_moment_direct": second,
         "exchange_covariance": exchange, "mean": float(u @ weights), "y": y}
    return _report("variance", (spec, orbitals, y), q, [bound - var], tol)


def variance_bruteforce(spec, orbitals: OrbitalSet, y: int) -> float:
    """Variance of the position-diagonal many-body observable on the determinant's Fock vector."""
    grid = orbitals.grid
    basis = build_basis(grid.points, orbitals.count)
    psi = slater(orbitals, basis)
    u = _table(spec, grid).matrix[:, y]
    vals = basis.occupations @ u
    w = np.abs(psi.coeffs) ** 2
    mean = float(vals @ w)
    return float((vals - mean) ** 2 @ w)


def meanfield_sup_check(spec, rho: Density) -> CheckReport:
    mf = mean_field(spec, rho)
    q = {"sup": float(np.max(mf)), "inf": float(np.min(mf)), "sup_abs": float(np.max(np.abs(mf)))}
    return _report("meanfield_sup", (_table(spec, rho.grid), rho), q, informational=True)


def lt_ratio(orbitals: OrbitalSet, exponent: float = 3.0) -> CheckReport:
    """``h sum rho**p / sum ||D phi||**2`` (informational)."""
    rho = density(orbitals)
    num = float(rho.grid.spacing * np.sum(rho.values**exponent))
    kin = kinetic_sum(orbitals)
    q = {"density_integral": num, "kinetic_sum": kin,
         "ratio": num / kin if kin > 0 else math.inf, "exponent": exponent}
    return _report("lt_ratio", (orbitals, exponent), q, informational=True)


def sc_condition_check(orbitals: OrbitalSet, grid: Grid | None = None) -> CheckReport:
    """Trace norms of ``[p, e^{ikx}]`` (weighted by ``1/(1+|k|)``, sup over grid momenta) and ``[p, D]``."""
    grid = grid or orbitals.grid
    if grid != orbitals.grid:
        raise InvalidArgumentError("orbitals live on a different grid")
    p = orbitals.projector()
    x = grid.coords
    best, k_best = 0.0, 0.0
    for k in 2 * np.pi * np.fft.fftfreq(grid.points, d=grid.length / grid.points):
        e = np.exp(1j * k * x)
        comm = p * e[None, :] - e[:, None] * p
        val = matrix_norms(comm)[0] / (1 + abs(k))
        if val > best:
            best, k_best = val, k
    d = gradient_matrix(grid)[: grid.points]
    grad_comm = matrix_norms(p @ d - d @ p)[0]
    n = orbitals.count
    q = {"exp_commutator_sup": best, "k_at_sup": k_best, "grad_commutator": grad_comm,
         "exp_ratio_N23": best / n ** (2 / 3) if n else 0.0, "grad_ratio_N": grad_comm / n if n else 0.0}
    return _report("sc_condition", (orbitals,), q, informational=True)


def fractional_gradient_norm(orbitals: OrbitalSet, order: float) -> CheckReport:
    """``sum_j || |k|**order phi_j ||`` via the grid Fourier transform (periodic, informational)."""
    grid = orbitals.grid
    if grid.boundary != "periodic":
        raise InvalidArgumentError("fractional gradients need a periodic grid")
    k = np.abs(grid.momenta)
    vals = [float(np.linalg.norm(k**order * np.fft.fft(v) / np.sqrt(grid.points))) for v in orbitals.vectors]
    q = {"order": order, "max_norm": max(vals, default=0.0), "sum_norm": float(sum(vals))}
    return _report("fractional_gradient", (orbitals, order), q, informational=True)


def sandwich_bound_check(psi: FockVector, orbitals: OrbitalSet, hkernel, tol: float = 1e-10) -> CheckReport:
    """Projector-sandwiched pair-operator expectations against their density bounds.

    ``hkernel`` is a nonnegative kernel (spec, table or M x M matrix of ``h(x-y)``).
    """
    n = psi.basis.N
    if n < 2:
        raise InvalidArgumentError("sandwich bounds need N >= 2")
    _check_two_body_cap(psi)
    grid = orbitals.grid
    if isinstance(hkernel, np.ndarray):
        hmat = hkernel
    else:
        hmat = _table(hkernel, grid).matrix
    if np.any(hmat < 0):
        raise InvalidArgumentError("kernel must be nonnegative")
    p = orbitals.projector()
    eye = np.eye(grid.points)
    hk = pair_kernel_matrix(hmat)
    pairs = n * (n - 1)
    lhs_a = float(np.real(expect_two_body(sandwich(eye, p, hk, eye, p), psi))) / pairs
    lhs_b = float(np.real(expect_two_body(sandwich(p, p, hk, p, p), psi))) / pairs
    weights = np.real(np.diag(p))
    conv = hmat @ weights
    rhs_a = float(np.max(conv)) / (n - 1)
    rhs_b = float(conv @ weights) / pairs
    q = {"one_sided": lhs_a, "one_sided_bound": rhs_a, "two_sided": lhs_b, "two_sided_bound": rhs_b}
    return _report("sandwich_bound", (psi, orbitals, hmat), q, [rhs_a - lhs_a, rhs_b - lhs_b], tol)


def lemma_onebody_projector_check(psi: FockVector, phi: np.ndarray, tol: float = 1e-12) -> CheckReport:
    """``<psi, |phi><phi|_1 psi> <= 1/N`` for a unit vector phi."""
    phi = np.asarray(phi, dtype=complex)
    phi = phi / np.linalg.norm(phi)
    val = float(np.real(phi.conj() @ rdm1(psi).matrix @ phi))
    bound = 1.0 / psi.basis.N
    return _report("single_orbital_occupation", (psi, phi), {"value": val, "bound": bound},
                   [bound - val], tol)


def projector_algebra_check(psi: FockVector, orbitals: OrbitalSet, tol: float = 1e-9) -> CheckReport:
    """Resolution of identity, agreement of the two distribution routes, and ``alpha_n = tr(gamma q)``."""
    from .alpha import alpha_n_fast

    dist = pnk_distribution(psi, orbitals, tol=np.inf)
    total = float(np.sum(dist.probs))
    a_dist = dist.expectation(weight_n(psi.basis.N))
    a_trace = alpha_n_fast(rdm1(psi), orbitals)
    q = {"sum_probs": total, "method_gap": dist.disagreement, "alpha_n_distribution": a_dist,
         "alpha_n_trace": a_trace, "min_prob": float(np.min(dist.probs))}
    margins = [1e-10 - abs(total - 1), tol - dist.disagreement, tol - abs(a_dist - a_trace),
               float(np.min(dist.probs)) + 1e-12]
    return _report("projector_algebra", (psi, orbitals), q, margins, 0.0)
