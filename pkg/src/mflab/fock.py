"""Antisymmetric N-particle sector in the occupation-number basis.

Basis states are M-bit masks with N set bits, sorted ascending.  A mask
``S = {s_1 < ... < s_N}`` stands for ``a+_{s_1} ... a+_{s_N} |0>``, so
annihilating site ``x`` picks up the sign ``(-1)**(# occupied sites below x)``.

Operators are applied through the sparse annihilation map ``S_N`` from the
N-sector into ``(N-1)-sector (x) sites``:

    sum_{x', x} A(x', x) a+_{x'} a_x  =  S_N^H (I (x) A) S_N
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property, lru_cache
from itertools import combinations
from math import comb
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError, ResourceLimitError
from .lattice import KernelTable, OneBodyOperator, OrbitalSet

DEFAULT_CAP = 200_000


class OccupationBasis:
    """Sorted list of N-particle occupation masks on M sites."""

    def __init__(self, M: int, N: int):
        self.M = int(M)
        self.N = int(N)
        masks = [sum(1 << i for i in c) for c in combinations(range(self.M), self.N)]
        self.states = np.array(sorted(masks), dtype=np.int64)
        self.states.flags.writeable = False

    def __len__(self) -> int:
        return len(self.states)

    @property
    def dim(self) -> int:
        return len(self.states)

    def __repr__(self) -> str:
        return f"OccupationBasis(M={self.M}, N={self.N}, dim={self.dim})"

    @cached_property
    def index(self) -> dict:
        """Mask -> ordinal position."""
        return {int(s): i for i, s in enumerate(self.states)}

    def lookup(self, masks) -> np.ndarray:
        """Vectorized inverse of ``states``; raises if a mask is absent."""
        masks = np.asarray(masks, dtype=np.int64)
        pos = np.searchsorted(self.states, masks)
        pos_c = np.minimum(pos, self.dim - 1)
        if np.any(self.states[pos_c] != masks):
            raise InvalidArgumentError("mask not in basis")
        return pos_c

    @cached_property
    def occupations(self) -> np.ndarray:
        """0/1 matrix of shape (dim, M)."""
        occ = (self.states[:, None] >> np.arange(self.M)[None, :]) & 1
        occ = occ.astype(np.int8)
        occ.flags.writeable = False
        return occ

    @cached_property
    def sites(self) -> np.ndarray:
        """Occupied sites per state in ascending order, shape (dim, N)."""
        if self.N == 0:
            return np.zeros((self.dim, 0), dtype=np.int64)
        rows, cols = np.nonzero(self.occupations)
        return cols.reshape(self.dim, self.N)

    @cached_property
    def lower(self) -> "OccupationBasis":
        if self.N == 0:
            raise InvalidArgumentError("the vacuum sector has no lower sector")
        return _basis(self.M, self.N - 1)

    @cached_property
    def annihilator(self) -> sp.csr_matrix:
        """Sparse map with entries ``<R| a_x |S>`` at row ``index(R) * M + x``."""
        occ = self.occupations.astype(np.int64)
        below = np.cumsum(occ, axis=1) - occ
        st, x = np.nonzero(occ)
        sign = np.where(below[st, x] % 2 == 0, 1.0, -1.0)
        lower_masks = self.states[st] ^ (np.int64(1) << x)
        rows = self.lower.lookup(lower_masks) * self.M + x
        shape = (self.lower.dim * self.M, self.dim)
        return sp.csr_matrix((sign, (rows, st)), shape=shape)

    @cached_property
    def creator(self) -> sp.csr_matrix:
        """Adjoint of :attr:`annihilator` (real, so a plain transpose)."""
        return self.annihilator.T.tocsr()


@lru_cache(maxsize=64)
def _basis(M: int, N: int) -> OccupationBasis:
    return OccupationBasis(M, N)


def build_basis(M: int, N: int, cap: int = DEFAULT_CAP) -> OccupationBasis:
    """Enumerate the N-particle sector on M sites.

    Args:
        M: number of one-particle sites.
        N: particle number, ``1 <= N <= M``.
        cap: largest admissible basis dimension.

    Returns:
        The (cached, shared) basis object.
    """
    if int(M) != M or int(N) != N or not 1 <= N <= M:
        raise InvalidArgumentError(f"need 1 <= N <= M, got M={M}, N={N}")
    dim = comb(int(M), int(N))
    if dim > cap:
        raise ResourceLimitError(
            f"basis dimension binomial({M},{N}) = {dim} exceeds the cap {cap}")
    return _basis(int(M), int(N))


@dataclass(eq=False)
class FockVector:
    basis: OccupationBasis
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.basis.dim,):
            raise InvalidArgumentError(
                f"coefficient vector must have length {self.basis.dim}, got shape {c.shape}")
        self.coeffs = c

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def is_normalized(self, tol: float = 1e-12) -> bool:
        return abs(self.norm() - 1.0) <= tol

    def normalized(self) -> "FockVector":
        n = self.norm()
        if n == 0:
            raise InvalidArgumentError("cannot normalize the zero vector")
        return FockVector(self.basis, self.coeffs / n)

    def inner(self, other: "FockVector") -> complex:
        """``<self, other>``, antilinear in ``self``."""
        _check_same_basis(self, other)
        return complex(np.vdot(self.coeffs, other.coeffs))

    def with_coeffs(self, coeffs) -> "FockVector":
        return FockVector(self.basis, coeffs)

    def __add__(self, other: "FockVector") -> "FockVector":
        _check_same_basis(self, other)
        return FockVector(self.basis, self.coeffs + other.coeffs)

    def __sub__(self, other: "FockVector") -> "FockVector":
        _check_same_basis(self, other)
        return FockVector(self.basis, self.coeffs - other.coeffs)

    def __mul__(self, c) -> "FockVector":
        return FockVector(self.basis, c * self.coeffs)

    __rmul__ = __mul__


def _check_same_basis(a: FockVector, b: FockVector) -> None:
    if a.basis.M != b.basis.M or a.basis.N != b.basis.N:
        raise InvalidArgumentError("vectors live in different sectors")


def random_fock_vector(basis: OccupationBasis, rng: np.random.Generator) -> FockVector:
    """Normalized vector with i.i.d. complex Gaussian coefficients."""
    c = rng.standard_normal(basis.dim) + 1j * rng.standard_normal(basis.dim)
    return FockVector(basis, c / np.linalg.norm(c))


def slater(orbitals: OrbitalSet, basis: OccupationBasis) -> FockVector:
    """Antisymmetrized product of the orbitals in the occupation basis."""
    if orbitals.count != basis.N or orbitals.grid.points != basis.M:
        raise InvalidArgumentError(
            f"orbital set ({orbitals.count} x {orbitals.grid.points}) does not match "
            f"basis (N={basis.N}, M={basis.M})")
    phi = orbitals.vectors.T  # M x N
    minors = phi[basis.sites]  # dim x N x N, rows in ascending site order
    return FockVector(basis, np.linalg.det(minors))


def _matrix_of(a) -> np.ndarray:
    return a.matrix if isinstance(a, OneBodyOperator) else np.asarray(a)


def annihilate(psi: FockVector) -> np.ndarray:
    """``V[R, x] = <R| a_x psi>`` as a (dim_{N-1}, M) array."""
    b = psi.basis
    return (b.annihilator @ psi.coeffs).reshape(b.lower.dim, b.M)


def create(basis: OccupationBasis, v: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`annihilate`: ``sum_x a+_x v[:, x]`` back in ``basis``."""
    return basis.creator @ np.ascontiguousarray(v).ravel()


def apply_one_body(a, psi: FockVector) -> FockVector:
    """Apply ``sum_m A_m`` (A acting on particle m) to an antisymmetric state."""
    mat = _matrix_of(a)
    b = psi.basis
    if mat.shape != (b.M, b.M):
        raise InvalidArgumentError(f"operator shape {mat.shape} does not match M={b.M}")
    v = annihilate(psi)
    return FockVector(b, create(b, v @ mat.T))


def two_body_amplitudes(psi: FockVector) -> np.ndarray:
    """``u[R, x * M + y] = <R| a_y a_x psi>`` over the (N-2)-sector."""
    b = psi.basis
    if b.N < 2:
        raise InvalidArgumentError("two-body amplitudes need N >= 2")
    v1 = annihilate(psi)
    lower = b.lower
    u = (lower.annihilator @ v1).reshape(lower.lower.dim, b.M, b.M)  # [R, y, x]
    return u.transpose(0, 2, 1).reshape(lower.lower.dim, b.M * b.M)


def two_body_create(basis: OccupationBasis, w: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`two_body_amplitudes`."""
    m = basis.M
    lower = basis.lower
    w3 = w.reshape(-1, m, m).transpose(0, 2, 1).reshape(-1, m)  # [(R, y), x]
    v1 = lower.creator @ w3
    return basis.creator @ v1.ravel()


def apply_two_body(k: np.ndarray, psi: FockVector) -> FockVector:
    """Apply ``sum_{i != j} K_ij`` for an M^2 x M^2 pair kernel.

    ``K[x' * M + y', x * M + y] = <x' y'| K |x y>`` with the first factor acting
    on particle i.  For N < 2 the sum is empty.
    """
    b = psi.basis
    k = np.asarray(k)
    if k.shape != (b.M**2, b.M**2):
        raise InvalidArgumentError(f"pair kernel must be {b.M**2} x {b.M**2}")
    if b.N < 2:
        return FockVector(b, np.zeros(b.dim, dtype=complex))
    u = two_body_amplitudes(psi)
    return FockVector(b, two_body_create(b, u @ k.T))


def expect_two_body(k: np.ndarray, psi: FockVector, chi: FockVector | None = None) -> complex:
    """``<chi, sum_{i != j} K_ij psi>`` without forming the output vector."""
    chi = psi if chi is None else chi
    _check_same_basis(psi, chi)
    if psi.basis.N < 2:
        return 0j
    u = two_body_amplitudes(psi)
    uc = two_body_amplitudes(chi)
    return complex(np.vdot(uc, u @ np.asarray(k).T))


def pair_energies(basis: OccupationBasis, vtab: KernelTable | np.ndarray) -> np.ndarray:
    """``sum_{x<y occupied} v(x - y)`` for every basis state."""
    vmat = vtab.matrix if isinstance(vtab, KernelTable) else np.asarray(vtab)
    occ = basis.occupations.astype(float)
    full = np.einsum("sx,xy,sy->s", occ, vmat, occ)
    return 0.5 * (full - occ @ np.diag(vmat))


def apply_pair_diagonal(vtab: KernelTable, psi: FockVector) -> FockVector:
    return FockVector(psi.basis, pair_energies(psi.basis, vtab) * psi.coeffs)


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """One-body part, position-diagonal pair table and the time-derivative prefactor."""

    one_body: OneBodyOperator
    pair: KernelTable | None = None
    hbar_eff: float = 1.0

    def __post_init__(self):
        if not self.one_body.hermitian:
            raise InvalidArgumentError("one-body part must be hermitian")
        if self.pair is not None:
            m = self.pair.matrix
            if not np.array_equal(m, m.T):
                raise InvalidArgumentError("pair table is not symmetric")
        if not self.hbar_eff > 0:
            raise InvalidArgumentError("hbar_eff must be positive")


class _HamiltonianCache:
    """Per-basis precomputation of the diagonal pair energies."""

    def __init__(self, h: HamiltonianSpec, basis: OccupationBasis):
        self.h = h
        self.basis = basis
        self.mat = h.one_body.matrix
        self.diag = pair_energies(basis, h.pair) if h.pair is not None else None

    def matvec(self, c: np.ndarray) -> np.ndarray:
        b = self.basis
        v = (b.annihilator @ c).reshape(b.lower.dim, b.M)
        out = b.creator @ (v @ self.mat.T).ravel()
        if self.diag is not None:
            out = out + self.diag * c
        return out


def hamiltonian_operator(h: HamiltonianSpec, basis: OccupationBasis):
    """Return a callable ``c -> H c`` on raw coefficient arrays."""
    return _HamiltonianCache(h, basis).matvec


def apply_hamiltonian(h: HamiltonianSpec, psi: FockVector) -> FockVector:
    if h.one_body.dim != psi.basis.M:
        raise InvalidArgumentError("Hamiltonian and state have different one-particle dimension")
    out = apply_one_body(h.one_body, psi).coeffs
    if h.pair is not None:
        out = out + pair_energies(psi.basis, h.pair) * psi.coeffs
    return FockVector(psi.basis, out)


def hamiltonian_matrix(h: HamiltonianSpec, basis: OccupationBasis) -> sp.csr_matrix:
    """Sparse matrix of the Hamiltonian in the occupation basis."""
    s = basis.annihilator
    lift = sp.kron(sp.identity(basis.lower.dim, format="csr"), sp.csr_matrix(h.one_body.matrix))
    mat = (s.T @ lift @ s).tocsr()
    if h.pair is not None:
        mat = mat + sp.diags(pair_energies(basis, h.pair))
    return mat.tocsr()


@dataclass(frozen=True, eq=False)
class Rdm:
    """One-particle reduced density matrix normalized to unit trace."""

    matrix: np.ndarray
    N: int

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidArgumentError("density matrix must be square")
        if not np.allclose(m, m.conj().T, rtol=0, atol=1e-12):
            raise InvalidArgumentError("density matrix is not hermitian")
        object.__setattr__(self, "matrix", m)

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


def rdm1(psi: FockVector, tol: float = 1e-10) -> Rdm:
    """``gamma[y, x] = <a+_x a_y> / N``."""
    if abs(psi.norm() - 1.0) > tol:
        raise InvalidArgumentError(f"state is not normalized (norm {psi.norm():.3e})")
    v = annihilate(psi)
    g = (v.T @ v.conj()) / psi.basis.N
    g = 0.5 * (g + g.conj().T)
    return Rdm(g, psi.basis.N)


def mix_excitation(orbitals: OrbitalSet, replacement, slot: int, epsilon: float,
                   basis: OccupationBasis | None = None, tol: float = 1e-10) -> FockVector:
    """``sqrt(1 - eps**2) * slater(phi) + eps * slater(phi with phi_slot -> replacement)``."""
    if not 0 <= epsilon <= 1:
        raise InvalidArgumentError(f"epsilon must lie in [0, 1], got {epsilon}")
    if not 0 <= slot < orbitals.count:
        raise InvalidArgumentError(f"slot {slot} out of range for {orbitals.count} orbitals")
    r = np.asarray(replacement, dtype=complex)
    r = r / np.linalg.norm(r)
    overlap = orbitals.vectors.conj() @ r
    if np.max(np.abs(overlap), initial=0.0) > tol:
        raise InvalidArgumentError("replacement is not orthogonal to the orbital span")
    if basis is None:
        basis = build_basis(orbitals.grid.points, orbitals.count)
    excited_vecs = orbitals.vectors.copy()
    excited_vecs[slot] = r
    excited = OrbitalSet(orbitals.grid, excited_vecs, tol=orbitals.tol)
    c = np.sqrt(1 - epsilon**2) * slater(orbitals, basis).coeffs + epsilon * slater(excited, basis).coeffs
    return FockVector(basis, c / np.linalg.norm(c))


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------


def snapshot_dict(psi: FockVector) -> dict:
    entries = [[int(m), float(c.real), float(c.imag)]
               for m, c in zip(psi.basis.states, psi.coeffs)]
    return {"M": psi.basis.M, "N": psi.basis.N, "entries": entries}


def from_snapshot_dict(data: dict, cap: int = DEFAULT_CAP) -> FockVector:
    basis = build_basis(int(data["M"]), int(data["N"]), cap=cap)
    coeffs = np.zeros(basis.dim, dtype=complex)
    entries = data["entries"]
    if entries:
        masks = np.array([e[0] for e in entries], dtype=np.int64)
        vals = np.array([complex(e[1], e[2]) for e in entries])
        coeffs[basis.lookup(masks)] = vals
    return FockVector(basis, coeffs)


def save_snapshot(psi: FockVector, path) -> None:
    """Write ``{"M", "N", "entries": [[mask, re, im], ...]}`` as JSON (lossless floats)."""
    Path(path).write_text(json.dumps(snapshot_dict(psi)), encoding="utf-8")


def load_snapshot(path, cap: int = DEFAULT_CAP) -> FockVector:
    return from_snapshot_dict(json.loads(Path(path).read_text(encoding="utf-8")), cap=cap)
