"""Finite-difference realization of div(A Du) on clamped box grids.

Assembly is in conservative flux form: along each axis the coefficient is
taken at cell midpoints and combined with first differences, and the mixed
axis terms difference the centered cross-derivative between the two shifted
nodes.  For constant coefficients this collapses to the familiar centered
stencils (exact on quadratics, symmetric interior matrix).

Rows are assembled at every stencil-complete node (lattice distance >= 1
from the faces).  This includes the inner ring of the clamped band: the
curvature connecting the prescribed boundary slope to the free region is
measured there, which is what makes the clamped first-derivative data
binding for sup-norm energies.  The free unknowns remain the nodes at
distance >= 2.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, LinearSolveFailure, StencilOutOfDomain


@dataclass(frozen=True)
class DiscreteOperator:
    """Sparse map from full nodal fields to div(A Du) at stencil-complete nodes."""

    grid: object
    n_components: int
    matrix: object            # (n_eq * N, n_nodes * N), acts on full fields
    eq_idx: np.ndarray        # flat node ids of the equation/cost nodes (distance >= 1)
    interior_idx: np.ndarray  # flat node ids of the free unknowns (distance >= 2)
    clamp_idx: np.ndarray     # flat node ids of the clamped band (two layers)
    free_matrix: object       # columns restricted to the free dofs
    clamp_matrix: object      # columns restricted to the clamped dofs
    square_rows: np.ndarray   # row dof positions of the interior nodes inside eq_idx

    @property
    def n_eq(self):
        return self.eq_idx.size

    @property
    def n_interior(self):
        return self.interior_idx.size

    def eq_coords(self):
        return self.grid.coords()[self.eq_idx]

    def scatter(self, eq_values):
        """Embed equation-node values into a full field, zeros elsewhere."""
        out = np.zeros((self.grid.n_nodes, self.n_components))
        out[self.eq_idx] = eq_values
        return out

    def interior_dofs(self, u):
        return np.asarray(u)[self.interior_idx].ravel()

    def with_interior_dofs(self, u, x):
        out = np.array(u, dtype=np.float64, copy=True)
        out[self.interior_idx] = np.asarray(x).reshape(self.n_interior, self.n_components)
        return out

    def square_matrix(self):
        """Rows of the free-column matrix at the interior nodes (the Dirichlet system)."""
        return self.free_matrix[self.square_rows]

    def operator_scale(self):
        """Infinity-norm of the transposed free-column matrix (max column abs sum)."""
        return float(np.max(np.abs(self.free_matrix).sum(axis=0)))


def assemble_operator(grid, tensor):
    """Assemble the flux-form stencil matrix of div(A Du)."""
    if any(m < 5 for m in grid.shape):
        raise StencilOutOfDomain(
            f"need at least 5 nodes per axis for the clamped stencil, got {grid.shape}"
        )
    if tensor.n != grid.dim:
        raise DimensionMismatch(
            f"tensor has {tensor.n} axes but grid has dimension {grid.dim}"
        )
    n = grid.dim
    n_comp = tensor.n_components
    h = np.array(grid.spacing)
    coords = grid.coords()
    eq_mask = grid.stencil_mask()
    interior = grid.interior_mask()
    eq_idx = np.flatnonzero(eq_mask)
    interior_idx = np.flatnonzero(interior)
    clamp_idx = np.flatnonzero(~interior)
    n_eq = eq_idx.size
    idx_eq = grid.multi_indices()[eq_idx]
    x_eq = coords[eq_idx]

    def flat_shifted(offsets):
        return grid.ravel_index(idx_eq + np.asarray(offsets, dtype=int))

    rows, cols, vals = [], [], []
    row_base = np.arange(n_eq) * n_comp

    def add_block(col_nodes, coeff):
        # coeff: (n_eq, N, N) stencil weights coupling (row comp i, col comp j)
        col_base = col_nodes * n_comp
        for i in range(n_comp):
            for j in range(n_comp):
                rows.append(row_base + i)
                cols.append(col_base + j)
                vals.append(coeff[:, i, j])

    for a in range(n):
        e_a = np.zeros(n)
        e_a[a] = h[a]
        # axis term: midpoint coefficients, first differences
        a_plus = tensor.at(x_eq + 0.5 * e_a)[:, a, a, :, :]
        a_minus = tensor.at(x_eq - 0.5 * e_a)[:, a, a, :, :]
        off = np.zeros(n, dtype=int)
        off[a] = 1
        inv_h2 = 1.0 / h[a] ** 2
        add_block(flat_shifted(off), a_plus * inv_h2)
        add_block(flat_shifted(-off), a_minus * inv_h2)
        add_block(eq_idx, -(a_plus + a_minus) * inv_h2)
        for b in range(n):
            if b == a:
                continue
            # cross term: centered difference in axis b of the flux at x +- h_a e_a
            c_plus = tensor.at(x_eq + e_a)[:, a, b, :, :]
            c_minus = tensor.at(x_eq - e_a)[:, a, b, :, :]
            w = 1.0 / (4.0 * h[a] * h[b])
            for sa, coeff in ((1, c_plus), (-1, c_minus)):
                for sb in (1, -1):
                    off = np.zeros(n, dtype=int)
                    off[a] = sa
                    off[b] = sb
                    add_block(flat_shifted(off), sa * sb * w * coeff)

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    matrix = sp.coo_matrix(
        (vals, (rows, cols)), shape=(n_eq * n_comp, grid.n_nodes * n_comp)
    ).tocsr()

    free_cols = (interior_idx[:, None] * n_comp + np.arange(n_comp)).ravel()
    clamp_cols = (clamp_idx[:, None] * n_comp + np.arange(n_comp)).ravel()
    csc = matrix.tocsc()
    free_matrix = csc[:, free_cols].tocsr()
    clamp_matrix = csc[:, clamp_cols].tocsr()

    # row positions of the interior nodes inside the equation-node ordering
    eq_pos = np.full(grid.n_nodes, -1, dtype=int)
    eq_pos[eq_idx] = np.arange(n_eq)
    sq = eq_pos[interior_idx]
    square_rows = (sq[:, None] * n_comp + np.arange(n_comp)).ravel()

    return DiscreteOperator(
        grid=grid,
        n_components=n_comp,
        matrix=matrix,
        eq_idx=eq_idx,
        interior_idx=interior_idx,
        clamp_idx=clamp_idx,
        free_matrix=free_matrix,
        clamp_matrix=clamp_matrix,
        square_rows=square_rows,
    )


def apply_operator(op, u):
    """Evaluate div(A Du) at the equation nodes; returns shape (n_eq, N)."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (op.grid.n_nodes, op.n_components):
        raise DimensionMismatch(
            f"field has shape {u.shape}, expected {(op.grid.n_nodes, op.n_components)}"
        )
    return (op.matrix @ u.ravel()).reshape(op.n_eq, op.n_components)


def pcg(matvec, b, rtol=1e-12, atol=0.0, max_iter=None, diag=None, x0=None):
    """Jacobi-preconditioned conjugate gradients on an SPD system.

    Deterministic given fixed inputs; returns (x, residual_norm, iterations).
    """
    b = np.asarray(b, dtype=np.float64)
    m = b.size
    if max_iter is None:
        max_iter = 20 * m + 200
    x = np.zeros(m) if x0 is None else np.array(x0, dtype=np.float64)
    r = b - matvec(x) if x0 is not None else b.copy()
    if diag is not None:
        inv_diag = 1.0 / np.where(np.abs(diag) > 0, diag, 1.0)
    else:
        inv_diag = None
    target = max(atol, rtol * np.linalg.norm(b))
    res = np.linalg.norm(r)
    if res <= target:
        return x, res, 0
    z = r * inv_diag if inv_diag is not None else r
    p = z.copy()
    rz = float(r @ z)
    for k in range(1, max_iter + 1):
        ap = matvec(p)
        denom = float(p @ ap)
        if denom <= 0.0:
            break  # curvature lost (numerically); keep the current iterate
        alpha = rz / denom
        x += alpha * p
        r -= alpha * ap
        res = np.linalg.norm(r)
        if res <= target:
            return x, res, k
        z = r * inv_diag if inv_diag is not None else r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, res, max_iter


def dirichlet_solve(op, rhs, clamp, tol=1e-12, max_iter=None):
    """Solve L_h u = rhs at the interior nodes with the clamped layers prescribed.

    rhs may be given on all nodes, on the equation nodes, or on the interior
    nodes; clamp is a full field whose values at the clamped band are used.
    The square interior system is solved by Jacobi-preconditioned CG on its
    (sign-flipped) SPD form to a residual <= tol * (1 + ||rhs||).
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.shape == (op.grid.n_nodes, op.n_components):
        rhs_int = rhs[op.interior_idx]
    elif rhs.shape == (op.n_eq, op.n_components):
        rhs_int = rhs.ravel()[op.square_rows].reshape(op.n_interior, op.n_components)
    elif rhs.shape == (op.n_interior, op.n_components):
        rhs_int = rhs
    else:
        raise DimensionMismatch(f"rhs has shape {rhs.shape}")
    clamp = np.asarray(clamp, dtype=np.float64)
    if clamp.shape != (op.grid.n_nodes, op.n_components):
        raise DimensionMismatch(f"clamp field has shape {clamp.shape}")

    clamp_vals = clamp[op.clamp_idx].ravel()
    b = rhs_int.ravel() - (op.clamp_matrix @ clamp_vals)[op.square_rows]
    # interior submatrix of an elliptic div-form operator is negative definite
    s_mat = -op.square_matrix()
    diag = s_mat.diagonal()
    target = tol * (1.0 + np.linalg.norm(rhs_int))
    x, res, _ = pcg(
        lambda v: s_mat @ v, -b, rtol=0.0, atol=target, max_iter=max_iter, diag=diag
    )
    if res > target:
        raise LinearSolveFailure(
            f"CG residual {res:.3e} above target {target:.3e}", residual=res
        )
    u = np.array(clamp, dtype=np.float64, copy=True)
    u[op.interior_idx] = x.reshape(op.n_interior, op.n_components)
    return u


def harmonic_zero_set_fraction(op, trials=20, seed=0, threshold=1e-10):
    """Largest interior fraction of near-zero nodes among random discrete solutions of L_h f = 0.

    Small values empirically support the unique-continuation property of the
    operator: nontrivial discrete solutions should vanish on a thin set only.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    zero_rhs = np.zeros((op.n_interior, op.n_components))
    worst = 0.0
    for _ in range(trials):
        clamp = np.zeros((op.grid.n_nodes, op.n_components))
        clamp[op.clamp_idx] = rng.standard_normal((op.clamp_idx.size, op.n_components))
        f = dirichlet_solve(op, zero_rhs, clamp)
        mag = np.linalg.norm(f[op.interior_idx], axis=1)
        peak = mag.max()
        if peak == 0.0:
            worst = 1.0
            continue
        frac = float(np.mean(mag <= threshold * peak))
        worst = max(worst, frac)
    return worst
