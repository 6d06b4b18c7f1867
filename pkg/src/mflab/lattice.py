"""One-particle discretized space.

Grids, the finite-difference Laplacian, pair-interaction kernels with an
``N**-beta`` scaling, mean-field convolutions and initial-orbital generators.

Measure convention: the grid weight ``h`` is absorbed into orbital vectors so
that inner products are plain sums (``sum |phi|**2 == 1``).  Densities are
stored as continuum densities (``mass == h * sum(values)``) and convolutions
carry ``h`` explicitly, so that ``(v * rho)(x_i) = h * sum_j v(x_i - x_j) rho(x_j)``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateInputError, InvalidArgumentError, UnsupportedError

BOUNDARIES = ("periodic", "dirichlet")


@dataclass(frozen=True)
class Grid:
    """Uniform 1D grid.

    Periodic grids have coordinates ``0, h, ..., (M-1) h`` with ``h = L / M``;
    Dirichlet grids hold the interior points ``h, ..., M h`` with
    ``h = L / (M + 1)``.
    """

    points: int
    length: float
    boundary: str = "periodic"

    @property
    def spacing(self) -> float:
        if self.boundary == "periodic":
            return self.length / self.points
        return self.length / (self.points + 1)

    @cached_property
    def coords(self) -> np.ndarray:
        h = self.spacing
        if self.boundary == "periodic":
            return h * np.arange(self.points)
        return h * np.arange(1, self.points + 1)

    @cached_property
    def offset_index(self) -> np.ndarray:
        """Integer displacement ``i - j`` folded to the table index used by kernels."""
        i = np.arange(self.points)
        d = i[:, None] - i[None, :]
        if self.boundary == "periodic":
            return np.mod(d, self.points)
        return d + (self.points - 1)

    @cached_property
    def offset_distances(self) -> np.ndarray:
        """Distance attached to each kernel-table slot."""
        h = self.spacing
        if self.boundary == "periodic":
            d = np.arange(self.points)
            return h * np.minimum(d, self.points - d)
        d = np.arange(-(self.points - 1), self.points)
        return h * np.abs(d)

    @cached_property
    def momenta(self) -> np.ndarray:
        """Discrete momenta ``2 pi m / L`` in FFT order (periodic grids)."""
        return 2 * np.pi * np.fft.fftfreq(self.points, d=self.spacing)


def make_grid(points: int, length: float, boundary: str = "periodic") -> Grid:
    if int(points) != points or points < 2:
        raise InvalidArgumentError(f"points must be an integer >= 2, got {points!r}")
    if not length > 0:
        raise InvalidArgumentError(f"length must be positive, got {length!r}")
    if boundary not in BOUNDARIES:
        raise InvalidArgumentError(f"boundary must be one of {BOUNDARIES}, got {boundary!r}")
    return Grid(int(points), float(length), boundary)


@dataclass(frozen=True, eq=False)
class OneBodyOperator:
    """An M x M one-particle operator."""

    matrix: np.ndarray
    hermitian: bool = True

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidArgumentError(f"one-body matrix must be square, got shape {m.shape}")
        if self.hermitian and not np.allclose(m, m.conj().T, rtol=0, atol=1e-12):
            raise InvalidArgumentError("matrix flagged hermitian is not hermitian within 1e-12")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __add__(self, other):
        other_m = other.matrix if isinstance(other, OneBodyOperator) else np.asarray(other)
        herm = self.hermitian and getattr(other, "hermitian", False)
        return OneBodyOperator(self.matrix + other_m, hermitian=herm)

    def scaled(self, c: float) -> "OneBodyOperator":
        return OneBodyOperator(c * self.matrix, hermitian=self.hermitian and np.isreal(c))


def laplacian(grid: Grid) -> OneBodyOperator:
    """Discrete ``-Delta`` with the 3-point stencil.

    Returns the positive semidefinite operator ``(-f[i-1] + 2 f[i] - f[i+1]) / h**2``.
    """
    m = grid.points
    h2 = grid.spacing**2
    mat = np.zeros((m, m))
    idx = np.arange(m)
    mat[idx, idx] = 2.0
    if grid.boundary == "periodic":
        np.add.at(mat, (idx, (idx + 1) % m), -1.0)
        np.add.at(mat, (idx, (idx - 1) % m), -1.0)
    else:
        mat[idx[:-1], idx[:-1] + 1] = -1.0
        mat[idx[1:], idx[1:] - 1] = -1.0
    return OneBodyOperator(mat / h2)


def gradient_matrix(grid: Grid) -> np.ndarray:
    """Forward difference ``D`` with ``D^T D == -Delta`` (same stencil as :func:`laplacian`).

    Periodic grids give an M x M matrix; Dirichlet grids an (M+1) x M matrix
    whose rows include the two boundary links.
    """
    m = grid.points
    h = grid.spacing
    if grid.boundary == "periodic":
        d = -np.eye(m)
        d[np.arange(m), (np.arange(m) + 1) % m] += 1.0
        return d / h
    d = np.zeros((m + 1, m))
    d[np.arange(m), np.arange(m)] = 1.0
    d[np.arange(1, m + 1), np.arange(m)] = -1.0
    return d / h


# ---------------------------------------------------------------------------
# interactions
# ---------------------------------------------------------------------------

KINDS = ("power_law", "cutoff_power_law", "soft_coulomb", "gaussian", "tabulated")


@dataclass(frozen=True)
class InteractionSpec:
    """Pair kernel ``v`` together with its particle-number scaling ``N**-beta``.

    Use the classmethod constructors rather than building instances by hand.
    """

    kind: str
    s: float | None = None
    sign: float = 1.0
    delta: float | None = None
    D: float | None = None
    a: float | None = None
    sigma: float | None = None
    strength: float = 1.0
    table_x: tuple | None = None
    table_v: tuple | None = None
    beta: float = 0.0
    n: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown interaction kind {self.kind!r}")
        if self.kind in ("power_law", "cutoff_power_law"):
            if self.s is None or not 0 < self.s < 2:
                raise InvalidArgumentError(f"power-law exponent must lie in (0, 2), got {self.s!r}")
            if self.sign not in (1, -1, 1.0, -1.0):
                raise InvalidArgumentError("sign must be +1 or -1")
        if self.kind == "cutoff_power_law" and (self.delta is None or self.D is None or self.D <= 0):
            raise InvalidArgumentError("cutoff_power_law needs delta and D > 0")
        if self.kind == "soft_coulomb" and not (self.a and self.a > 0):
            raise InvalidArgumentError("soft_coulomb needs a > 0")
        if self.kind == "gaussian" and not (self.sigma and self.sigma > 0):
            raise InvalidArgumentError("gaussian needs sigma > 0")
        if self.kind == "tabulated":
            if self.table_x is None or self.table_v is None or len(self.table_x) != len(self.table_v):
                raise InvalidArgumentError("tabulated kernel needs equal-length x and value tables")
            if np.any(np.diff(self.table_x) <= 0) or self.table_x[0] != 0:
                raise InvalidArgumentError("tabulated kernel abscissae must start at 0 and increase")
        if int(self.n) != self.n or self.n < 1:
            raise InvalidArgumentError(f"particle count for scaling must be >= 1, got {self.n!r}")

    # constructors -----------------------------------------------------------
    @classmethod
    def power_law(cls, s, sign=1, beta=0.0, n=1):
        return cls("power_law", s=float(s), sign=float(sign), beta=float(beta), n=int(n))

    @classmethod
    def cutoff_power_law(cls, s, delta, D=1.0, sign=1, beta=0.0, n=1):
        return cls("cutoff_power_law", s=float(s), delta=float(delta), D=float(D),
                   sign=float(sign), beta=float(beta), n=int(n))

    @classmethod
    def soft_coulomb(cls, a, strength=1.0, beta=0.0, n=1):
        return cls("soft_coulomb", a=float(a), strength=float(strength), beta=float(beta), n=int(n))

    @classmethod
    def gaussian(cls, sigma, strength=1.0, beta=0.0, n=1):
        return cls("gaussian", sigma=float(sigma), strength=float(strength), beta=float(beta), n=int(n))

    @classmethod
    def tabulated(cls, values, spacing=1.0, x=None, beta=0.0, n=1):
        """Kernel given by samples; ``values[d]`` sits at distance ``d * spacing`` unless ``x`` is given."""
        values = tuple(float(v) for v in np.asarray(values, dtype=float).ravel())
        if x is None:
            x = tuple(spacing * i for i in range(len(values)))
        else:
            x = tuple(float(xi) for xi in np.asarray(x, dtype=float).ravel())
        return cls("tabulated", table_x=x, table_v=values, beta=float(beta), n=int(n))

    @classmethod
    def from_csv(cls, path, beta=0.0, n=1):
        x, v = load_table_csv(path)
        return cls.tabulated(v, x=x, beta=beta, n=n)

    @classmethod
    def zero(cls):
        return cls.gaussian(1.0, strength=0.0)

    def scaled_for(self, n: int, beta: float | None = None) -> "InteractionSpec":
        return replace(self, n=int(n), beta=self.beta if beta is None else float(beta))

    @property
    def scale(self) -> float:
        return float(self.n) ** (-self.beta)

    def profile(self, r, spacing: float) -> np.ndarray:
        """Unscaled kernel values at distances ``r >= 0``.

        ``spacing`` is the grid step; power laws without cutoff use ``v(spacing / 2)``
        at ``r == 0``.
        """
        r = np.abs(np.asarray(r, dtype=float))
        if self.kind == "power_law":
            rr = np.where(r == 0, spacing / 2, r)
            return self.sign * rr ** (-self.s)
        if self.kind == "cutoff_power_law":
            cap = self.D * float(self.n) ** (self.delta * self.s)
            inside = r <= float(self.n) ** (-self.delta)
            with np.errstate(divide="ignore"):
                bare = np.where(r == 0, np.inf, r ** (-self.s))
            return self.sign * np.where(inside, np.minimum(bare, cap), bare)
        if self.kind == "soft_coulomb":
            return self.strength / np.sqrt(r**2 + self.a**2)
        if self.kind == "gaussian":
            return self.strength * np.exp(-(r**2) / (2 * self.sigma**2))
        xs = np.asarray(self.table_x)
        if np.any(r > xs[-1] * (1 + 1e-12) + 1e-12):
            raise InvalidArgumentError(
                f"tabulated kernel covers distances up to {xs[-1]}, needed {r.max()}")
        return np.interp(r, xs, np.asarray(self.table_v))


@dataclass(frozen=True, eq=False)
class KernelTable:
    """Scaled kernel ``v^(N)`` tabulated over the grid displacements.

    Periodic grids index slot ``d`` by ``(i - j) mod M``; Dirichlet grids by
    ``i - j + M - 1``.
    """

    grid: Grid
    values: np.ndarray

    @cached_property
    def matrix(self) -> np.ndarray:
        """``V[i, j] = v^(N)(x_i - x_j)``."""
        return self.values[self.grid.offset_index]

    @cached_property
    def pair_diagonal(self) -> np.ndarray:
        """``diag(v(x - y))`` on the two-particle space, flattened as ``x * M + y``."""
        return self.matrix.ravel()

    def squared(self) -> "KernelTable":
        return KernelTable(self.grid, self.values**2)

    def at(self, r_index: int) -> float:
        """Value at signed displacement index ``r_index``."""
        if self.grid.boundary == "periodic":
            return float(self.values[r_index % self.grid.points])
        return float(self.values[r_index + self.grid.points - 1])


def kernel_table(spec: InteractionSpec | KernelTable, grid: Grid) -> KernelTable:
    if isinstance(spec, KernelTable):
        if spec.grid != grid:
            raise InvalidArgumentError("kernel table was built on a different grid")
        return spec
    vals = spec.scale * spec.profile(grid.offset_distances, grid.spacing)
    if not np.all(np.isfinite(vals)):
        raise InvalidArgumentError("kernel table contains non-finite values")
    return KernelTable(grid, np.asarray(vals, dtype=float))


def zero_kernel(grid: Grid) -> KernelTable:
    return KernelTable(grid, np.zeros_like(grid.offset_distances))


# ---------------------------------------------------------------------------
# densities and orbitals
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Density:
    grid: Grid
    values: np.ndarray

    @property
    def mass(self) -> float:
        return float(self.grid.spacing * np.sum(self.values))

    @property
    def weights(self) -> np.ndarray:
        """Per-site occupation ``h * rho`` (the discrete density)."""
        return self.grid.spacing * self.values


@dataclass(frozen=True, eq=False)
class OrbitalSet:
    """N orthonormal orbitals on a grid, stored as rows of ``vectors`` (shape N x M)."""

    grid: Grid
    vectors: np.ndarray
    tol: float = 1e-10

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=complex)
        if v.ndim == 1:
            v = v[None, :]
        if v.ndim != 2 or (v.size and v.shape[1] != self.grid.points):
            raise InvalidArgumentError(
                f"orbital vectors must have shape (N, {self.grid.points}), got {v.shape}")
        if v.size == 0:
            v = np.zeros((0, self.grid.points), dtype=complex)
        object.__setattr__(self, "vectors", v)
        dev = self.gram_deviation()
        if dev > self.tol:
            raise InvalidArgumentError(f"orbitals are not orthonormal: Gram deviation {dev:.3e}")

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    def gram(self) -> np.ndarray:
        return self.vectors.conj() @ self.vectors.T

    def gram_deviation(self) -> float:
        if self.count == 0:
            return 0.0
        return float(np.max(np.abs(self.gram() - np.eye(self.count))))

    def projector(self) -> np.ndarray:
        """``p = sum_j |phi_j><phi_j|`` as an M x M matrix."""
        return self.vectors.T @ self.vectors.conj()

    def density(self) -> Density:
        return density(self)


def density(orbitals: OrbitalSet) -> Density:
    w = np.sum(np.abs(orbitals.vectors) ** 2, axis=0)
    return Density(orbitals.grid, w / orbitals.grid.spacing)


def _as_table(spec, grid: Grid) -> KernelTable:
    return kernel_table(spec, grid)


def mean_field(spec: InteractionSpec | KernelTable, rho: Density) -> np.ndarray:
    """Discrete convolution ``(v^(N) * rho)(x)`` including the measure weight ``h``."""
    table = _as_table(spec, rho.grid)
    return table.matrix @ rho.weights


def mean_field_squared(spec: InteractionSpec | KernelTable, rho: Density) -> np.ndarray:
    """``((v^(N))**2 * rho)(x)``."""
    table = _as_table(spec, rho.grid)
    return table.squared().matrix @ rho.weights


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(vec)))
    return vec * (abs(vec[k]) / vec[k])


def ground_orbitals(grid: Grid, w=None, n: int = 1, kinetic_prefactor: float = 1.0) -> OrbitalSet:
    """Lowest ``n`` eigenvectors of ``kinetic_prefactor * (-Delta) + w``.

    The phase of each vector is fixed so that its largest-magnitude entry is
    real and positive.
    """
    if n > grid.points:
        raise InvalidArgumentError(f"cannot place {n} orbitals on {grid.points} sites")
    h0 = kinetic_prefactor * laplacian(grid).matrix
    if w is not None:
        h0 = h0 + np.diag(np.asarray(w, dtype=float))
    evals, evecs = np.linalg.eigh(h0)
    vecs = np.array([_fix_phase(evecs[:, j].astype(complex)) for j in range(n)])
    if n:
        # degenerate levels: eigh already returns an orthonormal basis; one QR pass keeps it tight
        q, r = np.linalg.qr(vecs.T)
        q = q * (np.sign(np.real(np.diag(r))) + (np.real(np.diag(r)) == 0))
        vecs = np.array([_fix_phase(q[:, j]) for j in range(n)])
    return OrbitalSet(grid, vecs)


def packet_orbitals(grid: Grid, centers: Sequence[float], width: float,
                    momenta: Sequence[float] | None = None, n: int | None = None,
                    tol: float = 1e-8) -> OrbitalSet:
    """Gaussian wave packets ``exp(-(x-c)**2 / (4 w**2)) exp(i p x)``, Gram-Schmidt orthonormalized."""
    centers = list(centers)
    if n is None:
        n = len(centers)
    if len(centers) != n:
        raise InvalidArgumentError(f"need {n} centers, got {len(centers)}")
    momenta = [0.0] * n if momenta is None else list(momenta)
    if len(momenta) != n:
        raise InvalidArgumentError(f"need {n} momenta, got {len(momenta)}")
    if not width > 0:
        raise InvalidArgumentError("packet width must be positive")
    x = grid.coords
    out = []
    for c, p in zip(centers, momenta):
        dx = x - c
        if grid.boundary == "periodic":
            dx = (dx + grid.length / 2) % grid.length - grid.length / 2
        g = np.exp(-(dx**2) / (4 * width**2)) * np.exp(1j * p * x)
        g = g / np.linalg.norm(g)
        for prev in out:
            g = g - (prev.conj() @ g) * prev
        nrm = np.linalg.norm(g)
        if nrm < tol:
            raise DegenerateInputError("wave packets are linearly dependent")
        out.append(g / nrm)
    return OrbitalSet(grid, np.array(out))


def fourier_weight(spec: InteractionSpec | KernelTable, grid: Grid) -> float:
    """``sum_k (1 + k**2) |v_hat(k)|`` with ``v(x) = sum_k v_hat(k) exp(i k x)``."""
    if grid.boundary != "periodic":
        raise UnsupportedError("fourier_weight requires a periodic grid")
    table = _as_table(spec, grid)
    vhat = np.fft.fft(table.values) / grid.points
    k = grid.momenta
    return float(np.sum((1 + k**2) * np.abs(vhat)))


def force_scale(spec: InteractionSpec | KernelTable, rho: Density) -> float:
    """Largest centered finite difference of the mean field."""
    field_ = mean_field(spec, rho)
    h = rho.grid.spacing
    if rho.grid.boundary == "periodic":
        grad = (np.roll(field_, -1) - np.roll(field_, 1)) / (2 * h)
    else:
        grad = np.gradient(field_, h)
    return float(np.max(np.abs(grad)))


def kinetic_sum(orbitals: OrbitalSet) -> float:
    """``sum_j ||grad phi_j||**2`` with the discrete gradient; equals ``sum <phi, -Delta phi>``."""
    d = gradient_matrix(orbitals.grid)
    return float(np.sum(np.abs(orbitals.vectors @ d.T) ** 2))


# ---------------------------------------------------------------------------
# CSV tables
# ---------------------------------------------------------------------------


def load_table_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a two-column ``x,value`` CSV (header line required)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["x", "value"]:
        raise InvalidArgumentError(f"{path}: expected header 'x,value'")
    data = np.array([[float(a), float(b)] for a, b in rows[1:]], dtype=float)
    if data.size == 0:
        raise InvalidArgumentError(f"{path}: table has no rows")
    return data[:, 0], data[:, 1]


def save_table_csv(path, x, values) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["x", "value"])
        for a, b in zip(np.asarray(x, float), np.asarray(values, float)):
            wr.writerow([repr(float(a)), repr(float(b))])


def field_from_csv(path, grid: Grid) -> np.ndarray:
    """Interpolate a tabulated external field onto the grid coordinates."""
    x, v = load_table_csv(path)
    return np.interp(grid.coords, x, v)
