"""Four interchangeable preconditioners behind a single apply interface.

All variants are frozen linear operators (direct or incomplete
factorizations prepared up front, no inner iterations), so plain
right-preconditioned GMRES applies without a flexible variant.

full_ilu0
    ILU(0) of the monolithic block matrix in its assembled (natural)
    ordering.
weighted_norm
    Block diagonal [C, M^W] with C = M^V + Fr^2 k^2 (coupling (x) E); the
    velocity block is inverted by sparse LU or approximated by ILU(0), the
    elevation block by exact diagonal inversion.
layer_decoupled
    The same with the coupling-weighted div-div term replaced by the
    unweighted one, so the velocity block splits into N independent
    single-layer solves.
tridiagonal_reform
    Applies the weighted-norm C^{-1} exactly through the LDL^T change of
    variables: the transformed matrix couples only adjacent layers, giving a
    layer-tridiagonal block matrix to factor instead of the dense layer
    coupling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import coupling_inverse, kron_lift, ldlt
from .sparse import FactorizationError, block_csr, direct_factor, ilu0_factor

VARIANT_FULL_ILU0 = "full_ilu0"
VARIANT_WEIGHTED = "weighted_norm"
VARIANT_DECOUPLED = "layer_decoupled"
VARIANT_TRIDIAG = "tridiagonal_reform"
VARIANTS = (VARIANT_FULL_ILU0, VARIANT_WEIGHTED, VARIANT_DECOUPLED,
            VARIANT_TRIDIAG)

INNER_EXACT = "exact_direct"
INNER_ILU0 = "ilu0"
INNERS = (INNER_EXACT, INNER_ILU0)


@dataclass(frozen=True)
class Preconditioner:
    """A fixed linear operator r -> P^{-1} r over full system vectors."""

    variant: str
    inner_solver: str
    size: int
    _apply: object = field(repr=False)

    def apply(self, r):
        r = np.asarray(r, dtype=np.float64)
        if r.shape != (self.size,):
            raise ValueError(f"expected vector of length {self.size}")
        return self._apply(r)


def weighted_c_matrix(system):
    """C = M^V + Fr^2 k^2 (coupling (x) E), the weighted-norm velocity block."""
    p = system.params
    scale = p.froude ** 2 * p.k ** 2
    return system.mass_v.add(system.divdiv_kron_coupling().scaled(scale))


def decoupled_c_blocks(system):
    """Per-layer blocks of C-hat = M^V + Fr^2 k^2 (I (x) E)."""
    p = system.params
    scale = p.froude ** 2 * p.k ** 2
    e_scaled = system.single.divdiv.scaled(scale)
    return [m.add(e_scaled) for m in system.mass_blocks]


def reform_c_tilde(system):
    """Layer-tridiagonal transform of C plus the LDL^T factors driving it.

    With coupling^{-1} = L D L^T, congruence by (L (x) I) turns C into
    (L^T (x) I) M^V (L (x) I) + Fr^2 k^2 (D^{-1} (x) E), whose mass part
    couples only adjacent layers: block (i, i) is M_i + l_i^2 M_{i+1} and
    block (i, i+1) is l_i M_{i+1}.
    """
    p = system.params
    n = system.n_layers
    scale = p.froude ** 2 * p.k ** 2
    factors = ldlt(coupling_inverse(system.stack))
    sub, d = factors.subdiag, factors.d
    masses = system.mass_blocks
    e = system.single.divdiv

    grid = [[None] * n for _ in range(n)]
    for i in range(n):
        diag = masses[i]
        if i < n - 1:
            diag = diag.add(masses[i + 1].scaled(sub[i] ** 2))
        grid[i][i] = diag.add(e.scaled(scale / d[i]))
        if i < n - 1:
            off = masses[i + 1].scaled(sub[i])
            grid[i][i + 1] = off
            grid[i + 1][i] = off
    dims = [m.nrows for m in masses]
    return block_csr(grid, dims, dims), factors


def _inner_solve(matrix, inner_solver):
    if inner_solver == INNER_EXACT:
        return direct_factor(matrix).solve
    if inner_solver == INNER_ILU0:
        return ilu0_factor(matrix).apply
    raise ValueError(f"unknown inner solver {inner_solver!r}; "
                     f"choose from {INNERS}")


def build_preconditioner(system, variant, inner_solver=INNER_EXACT):
    """Prepare the factorizations of the requested variant.

    The elevation block of every block-diagonal variant is applied by exact
    diagonal inversion; ``inner_solver`` selects how the velocity block is
    inverted (sparse LU with fill, or ILU(0) on the same matrix).
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown preconditioner variant {variant!r}; "
                         f"choose from {VARIANTS}")
    nu = system.n_velocity
    size = system.size
    try:
        if variant == VARIANT_FULL_ILU0:
            factors = ilu0_factor(system.monolithic)
            return Preconditioner(variant, INNER_ILU0, size, factors.apply)

        w_inv = 1.0 / system.mass_w_diag()
        if variant == VARIANT_WEIGHTED:
            solve_c = _inner_solve(weighted_c_matrix(system), inner_solver)
        elif variant == VARIANT_DECOUPLED:
            solves = [_inner_solve(blk, inner_solver)
                      for blk in decoupled_c_blocks(system)]
            nv = system.n_vdofs

            def solve_c(r, _solves=solves, _nv=nv):
                parts = [s(r[i * _nv:(i + 1) * _nv])
                         for i, s in enumerate(_solves)]
                return np.concatenate(parts)
        else:
            c_tilde, ldl = reform_c_tilde(system)
            solve_mid = _inner_solve(c_tilde, inner_solver)
            nv = system.n_vdofs

            def solve_c(r, _ldl=ldl, _mid=solve_mid, _nv=nv):
                return _ldl.lkron_matvec(_mid(_ldl.ltkron_matvec(r, _nv)), _nv)

        def apply(r, _solve=solve_c, _w=w_inv, _nu=nu):
            return np.concatenate([_solve(r[:_nu]), _w * r[_nu:]])

        return Preconditioner(variant, inner_solver, size, apply)
    except FactorizationError as exc:
        raise type(exc)(f"building {variant} preconditioner failed: {exc}",
                        exc.pivot_index) from exc
