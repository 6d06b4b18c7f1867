"""Counting functionals: weight functions, the projectors P^(N,k) and alpha_f.

``P^(N,k)`` is the spectral projector of the lifted counting operator
``N_q = sum_m q_m`` onto eigenvalue ``k``; it is applied by Lagrange
interpolation in ``N_q`` and never stored as a matrix.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import InternalConsistencyError, InvalidArgumentError, ResourceLimitError
from .fock import FockVector, Rdm, apply_one_body, expect_two_body
from .lattice import KernelTable, OneBodyOperator, OrbitalSet, kernel_table

DISTRIBUTION_TOL = 1e-9
TWO_BODY_CAP = 2000
TWO_BODY_MAX_M = 16


@dataclass(frozen=True, eq=False)
class WeightFunction:
    """Map ``{0..N} -> [0, 1]`` with ``f(0) = 0`` and ``f(N) = 1``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise InvalidArgumentError("weight function needs values for k = 0..N with N >= 1")
        if v[0] != 0 or abs(v[-1] - 1) > 1e-15:
            raise InvalidArgumentError("weight function must satisfy f(0) = 0 and f(N) = 1")
        if np.any(v < 0) or np.any(v > 1):
            raise InvalidArgumentError("weight function values must lie in [0, 1]")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return self.values.size - 1

    def __call__(self, k):
        return self.values[k]

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.values) >= 0))

    def to_json(self) -> str:
        return json.dumps([float(x) for x in self.values])

    @classmethod
    def from_json(cls, text: str) -> "WeightFunction":
        return cls(np.array(json.loads(text), dtype=float))


def weight_n(N: int) -> WeightFunction:
    """``n(k) = k / N``."""
    if N < 1:
        raise InvalidArgumentError(f"N must be >= 1, got {N}")
    return WeightFunction(np.arange(N + 1) / N)


def weight_m(N: int, gamma: float) -> WeightFunction:
    """``m(k) = k N**-gamma`` for ``k <= N**gamma``, else 1."""
    if not 0 < gamma <= 1:
        raise InvalidArgumentError(f"gamma must lie in (0, 1], got {gamma}")
    if N < 1:
        raise InvalidArgumentError(f"N must be >= 1, got {N}")
    k = np.arange(N + 1)
    return WeightFunction(np.minimum(k * float(N) ** (-gamma), 1.0))


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, WeightFunction) else np.asarray(f, dtype=float)


def derivative(f, d: int) -> np.ndarray:
    """Discrete first derivative ``f'^(d)`` over ``k = 0..N``.

    Args:
        f: weight function (or raw value array over ``0..N``).
        d: signed step with ``|d|`` in {1, 2}.

    Returns:
        For ``d > 0``, ``f(k) - f(k-d)`` on ``k >= d``; for ``d < 0``,
        ``f(k+|d|) - f(k)`` on ``k <= N - |d|``; zero elsewhere.
    """
    if abs(d) not in (1, 2):
        raise InvalidArgumentError(f"|d| must be 1 or 2, got {d}")
    v = _values(f)
    n = v.size - 1
    out = np.zeros(n + 1)
    e = abs(d)
    if e > n:
        return out
    if d > 0:
        out[e:] = v[e:] - v[:-e]
    else:
        out[: n + 1 - e] = v[e:] - v[:-e]
    return out


def shifted(f, d: int) -> np.ndarray:
    """``f_d(k) = f(k + d)``, with f taken as zero outside ``0..N``."""
    v = _values(f)
    n = v.size - 1
    k = np.arange(n + 1) + d
    inside = (k >= 0) & (k <= n)
    out = np.zeros(n + 1)
    out[inside] = v[k[inside]]
    return out


def q_onebody(orbitals: OrbitalSet) -> OneBodyOperator:
    """``q = 1 - sum_j |phi_j><phi_j|``."""
    m = orbitals.grid.points
    q = np.eye(m) - orbitals.projector()
    return OneBodyOperator(0.5 * (q + q.conj().T))


def _lagrange_coefficients(n: int) -> np.ndarray:
    """``C[k, j]``: monomial coefficients of the Lagrange basis polynomial for node k on ``0..n``."""
    nodes = np.arange(n + 1, dtype=float)
    c = np.zeros((n + 1, n + 1))
    for k in range(n + 1):
        others = np.delete(nodes, k)
        poly = np.polynomial.polynomial.polyfromroots(others)
        c[k] = poly / np.prod(k - others)
    return c


class CountingOperator:
    """The lifted operator ``N_q`` for a fixed orbital set."""

    def __init__(self, orbitals: OrbitalSet):
        self.orbitals = orbitals
        self.q = q_onebody(orbitals)

    def apply(self, c: np.ndarray, basis) -> np.ndarray:
        return apply_one_body(self.q, FockVector(basis, c)).coeffs

    def projections(self, psi: FockVector) -> np.ndarray:
        """Rows ``P^(N,k) psi`` for ``k = 0..N`` by the product formula."""
        n = psi.basis.N
        out = np.empty((n + 1, psi.basis.dim), dtype=complex)
        for k in range(n + 1):
            v = psi.coeffs
            for j in range(n + 1):
                if j == k:
                    continue
                v = (self.apply(v, psi.basis) - j * v) / (k - j)
            out[k] = v
        return out

    def moments(self, psi: FockVector) -> np.ndarray:
        """``mu_j = <psi, N_q**j psi>`` for ``j = 0..N``."""
        n = psi.basis.N
        mu = np.empty(n + 1)
        v = psi.coeffs
        for j in range(n + 1):
            mu[j] = np.real(np.vdot(psi.coeffs, v))
            v = self.apply(v, psi.basis)
        return mu


@dataclass(frozen=True, eq=False)
class ProjectedDistribution:
    """``probs[k] = <psi, P^(N,k) psi>`` with both evaluation routes kept for inspection."""

    probs: np.ndarray
    moment_probs: np.ndarray
    product_probs: np.ndarray

    @property
    def N(self) -> int:
        return self.probs.size - 1

    @property
    def disagreement(self) -> float:
        return float(np.max(np.abs(self.moment_probs - self.product_probs)))

    def expectation(self, g) -> float:
        return float(np.dot(_values(g), self.probs))


def _check_match(psi: FockVector, orbitals: OrbitalSet) -> None:
    if orbitals.count != psi.basis.N or orbitals.grid.points != psi.basis.M:
        raise InvalidArgumentError("orbital set does not match the state's sector")


def _check_normalized(psi: FockVector, tol: float = 1e-10) -> None:
    if abs(psi.norm() - 1) > tol:
        raise InvalidArgumentError(f"state is not normalized (norm {psi.norm():.3e})")


def pnk_distribution(psi: FockVector, orbitals: OrbitalSet, tol: float = DISTRIBUTION_TOL) -> ProjectedDistribution:
    """Distribution of the number of particles outside the orbital span.

    Evaluated twice, from the moments of ``N_q`` combined with Lagrange-basis
    coefficients and from the product formula for each projector; the two must
    agree within ``tol``.
    """
    _check_match(psi, orbitals)
    _check_normalized(psi)
    nq = CountingOperator(orbitals)
    n = psi.basis.N
    mu = nq.moments(psi)
    by_moments = _lagrange_coefficients(n) @ mu
    proj = nq.projections(psi)
    by_product = np.real(proj @ psi.coeffs.conj())
    gap = float(np.max(np.abs(by_moments - by_product)))
    if gap > tol:
        raise InternalConsistencyError(
            f"moment and product evaluations of the distribution differ by {gap:.3e}")
    return ProjectedDistribution(by_product, by_moments, by_product)


def alpha_f(psi: FockVector, orbitals: OrbitalSet, f) -> float:
    """``sum_k f(k) <psi, P^(N,k) psi>``, clipped to [0, 1] against roundoff."""
    dist = pnk_distribution(psi, orbitals)
    return float(np.clip(dist.expectation(f), 0.0, 1.0))


def alpha_n_fast(gamma1: Rdm, orbitals: OrbitalSet) -> float:
    """``tr(gamma_1 q)``."""
    q = q_onebody(orbitals).matrix
    return float(np.real(np.trace(gamma1.matrix @ q)))


def fhat_apply(psi: FockVector, orbitals: OrbitalSet, g) -> FockVector:
    """``sum_k g(k) P^(N,k) psi``."""
    _check_match(psi, orbitals)
    g = _values(g)
    if g.size != psi.basis.N + 1:
        raise InvalidArgumentError(f"g must have {psi.basis.N + 1} entries")
    if np.all(g == 1):
        return FockVector(psi.basis, psi.coeffs.copy())
    proj = CountingOperator(orbitals).projections(psi)
    return FockVector(psi.basis, g @ proj)


# ---------------------------------------------------------------------------
# time-derivative decomposition
# ---------------------------------------------------------------------------


def pair_kernel_matrix(vmat: np.ndarray) -> np.ndarray:
    """``diag(v(x - y))`` on the two-particle grid, index ``x * M + y``."""
    return np.diag(np.asarray(vmat).ravel())


def sandwich(a: np.ndarray, b: np.ndarray, k: np.ndarray, c: np.ndarray, d: np.ndarray) -> np.ndarray:
    """``(A (x) B) K (C (x) D)``."""
    return np.kron(a, b) @ k @ np.kron(c, d)


def _check_two_body_cap(psi: FockVector) -> None:
    b = psi.basis
    if b.M > TWO_BODY_MAX_M or comb(b.M, b.N) > TWO_BODY_CAP:
        raise ResourceLimitError(
            f"two-body evaluation limited to M <= {TWO_BODY_MAX_M} and dimension <= {TWO_BODY_CAP}; "
            f"got M={b.M}, dimension {b.dim}")


def exchange_operator(vmat: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Kernel ``v(x - y) p(x, y)`` of the exchange term (subtracted in Hartree-Fock)."""
    return vmat * p


def mean_field_operator(vmat: np.ndarray, orbitals: OrbitalSet, exchange: bool = False) -> np.ndarray:
    """One-body matrix of the mean field: ``diag(v * rho)``, minus exchange if requested."""
    p = orbitals.projector()
    weights = np.real(np.diag(p))
    op = np.diag(vmat @ weights).astype(complex)
    if exchange:
        op = op - exchange_operator(vmat, p)
    return op


@dataclass(frozen=True)
class DerivativeTerms:
    term_I: float
    term_II: float
    term_III: float

    @property
    def total(self) -> float:
        return self.term_I + self.term_II + self.term_III


def _prepare(psi, orbitals, spec, f):
    _check_match(psi, orbitals)
    _check_two_body_cap(psi)
    fv = _values(f)
    if fv.size != psi.basis.N + 1:
        raise InvalidArgumentError("weight function length does not match N")
    if np.any(np.diff(fv) < 0):
        raise InvalidArgumentError("the derivative decomposition requires a monotone increasing f")
    table = spec if isinstance(spec, KernelTable) else kernel_table(spec, orbitals.grid)
    p = orbitals.projector()
    q = np.eye(orbitals.grid.points) - p
    return fv, table.matrix, p, q


def _root_filtered(psi, orbitals, fv, d):
    g = np.sqrt(np.clip(derivative(fv, d), 0.0, None))
    return fhat_apply(psi, orbitals, g)


def term_I(psi, orbitals, spec, f, exchange: bool = False, hbar_eff: float = 1.0) -> float:
    """Mean-field-cancelling part (one q, three p)."""
    fv, vmat, p, q = _prepare(psi, orbitals, spec, f)
    left = _root_filtered(psi, orbitals, fv, 1)
    right = _root_filtered(psi, orbitals, fv, -1)
    k = sandwich(q, p, pair_kernel_matrix(vmat), p, p)
    two = expect_two_body(k, right, left)
    mf = q @ mean_field_operator(vmat, orbitals, exchange) @ p
    one = np.vdot(left.coeffs, apply_one_body(mf, right).coeffs)
    return float(2 * np.imag(two - one) / hbar_eff)


def term_II(psi, orbitals, spec, f, hbar_eff: float = 1.0) -> float:
    """Pair-creation part (q q v p p)."""
    fv, vmat, p, q = _prepare(psi, orbitals, spec, f)
    if psi.basis.N < 2:
        return 0.0
    left = _root_filtered(psi, orbitals, fv, 2)
    right = _root_filtered(psi, orbitals, fv, -2)
    k = sandwich(q, q, pair_kernel_matrix(vmat), p, p)
    return float(np.imag(expect_two_body(k, right, left)) / hbar_eff)


def term_III(psi, orbitals, spec, f, hbar_eff: float = 1.0) -> float:
    """Scattering part (q q v p q)."""
    fv, vmat, p, q = _prepare(psi, orbitals, spec, f)
    if psi.basis.N < 2:
        return 0.0
    left = _root_filtered(psi, orbitals, fv, 1)
    right = _root_filtered(psi, orbitals, fv, -1)
    k = sandwich(q, q, pair_kernel_matrix(vmat), p, q)
    return float(2 * np.imag(expect_two_body(k, right, left)) / hbar_eff)


def derivative_terms(psi, orbitals, spec, f, exchange: bool = False, hbar_eff: float = 1.0) -> DerivativeTerms:
    return DerivativeTerms(
        term_I(psi, orbitals, spec, f, exchange=exchange, hbar_eff=hbar_eff),
        term_II(psi, orbitals, spec, f, hbar_eff=hbar_eff),
        term_III(psi, orbitals, spec, f, hbar_eff=hbar_eff),
    )
