"""
Measuring distance from a determinant
=====================================

A determinant built from N orbitals has no particles outside the orbital
span.  Mixing in a single excitation with amplitude eps moves weight eps**2
into the one-particle-outside sector, and the counting functionals pick this
up exactly.
"""

# %%
# A small periodic grid with a weak cosine trap; the four lowest orbitals.
import numpy as np

from mflab.alpha import pnk_distribution, weight_m, weight_n
from mflab.diagnostics import density_lemma_check
from mflab.fock import build_basis, mix_excitation, slater
from mflab.lattice import OrbitalSet, ground_orbitals, make_grid

grid = make_grid(10, 10.0)
trap = 0.3 * np.cos(2 * np.pi * grid.coords / grid.length)
lowest = ground_orbitals(grid, trap, 4)
orbitals = OrbitalSet(grid, lowest.vectors[:3].copy())
basis = build_basis(10, 3)
print(f"{basis.dim} occupation states for N=3 on M=10 sites")

# %%
# The determinant itself sits entirely in the k=0 sector.
det = slater(orbitals, basis)
print("determinant P(k):", np.round(pnk_distribution(det, orbitals).probs, 12))

# %%
# Excite the middle orbital into the fourth one and sweep the amplitude.
print(f"{'eps':>6} {'alpha_n':>10} {'eps^2/N':>10} {'alpha_m':>10} {'tr-norm':>10}")
for eps in (0.05, 0.1, 0.3, 0.6):
    psi = mix_excitation(orbitals, lowest.vectors[3], 1, eps, basis)
    dist = pnk_distribution(psi, orbitals)
    rep = density_lemma_check(psi, orbitals)
    print(f"{eps:6.2f} {dist.expectation(weight_n(3)):10.6f} {eps**2 / 3:10.6f} "
          f"{dist.expectation(weight_m(3, 0.5)):10.6f} {rep.quantities['tr_norm']:10.6f}")

# %%
# The m-weight is never below the n-weight, and never above N**(1-gamma) times it.
