"""Residual checks for the limiting optimality system and its structure.

A minimizing field u with value e and dual field f must satisfy, away from
the zero set of f,
    F(x, L_h u) * F_xi / |F_xi| = e * f / |f|,
with f discretely orthogonal to L_h of interior-supported test fields, and
the nodal cost F(x, L_h u) constant at the level e.  The report quantifies
each statement on the grid.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateField
from .operators import apply_operator
from .supremand import duality_map_field


def coefficient_of_variation(values):
    """std / mean of a nonnegative sample; zero for an (effectively) zero mean."""
    mean = float(np.mean(values)) if len(values) else 0.0
    if mean <= 0.0:
        return 0.0
    return float(np.std(values) / mean)


@dataclass
class VerifyReport:
    r_system: float          # sup over active nodes of the direction-system residual
    r_harmonic: float        # relative adjoint residual of the dual field
    cv_F: float              # coefficient of variation of the nodal cost on the active set
    active_fraction: float   # fraction of nodes carrying the dual field
    zero_set_fraction: float

    def as_dict(self):
        return {
            "r_system": self.r_system,
            "r_harmonic": self.r_harmonic,
            "cv_F": self.cv_F,
            "active_fraction": self.active_fraction,
            "zero_set_fraction": self.zero_set_fraction,
        }


def verify_system(op, supremand, u, f, e_hat, theta=0.1):
    """Evaluate the optimality-system residuals for the pair (u, f) at level e_hat.

    The direction equation and the cost-constancy statistic are evaluated
    only where |f| exceeds theta times its peak: the dual field legitimately
    passes through zero on a thin set (the discrete trace of a null set), and
    neither its direction nor the limiting cost level is meaningful there.
    The adjoint residual is the norm of the transposed operator applied to f,
    relative to the operator scale and the size of f.
    """
    if e_hat < 0:
        raise ValueError("e_hat must be nonnegative")
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    f = np.asarray(f, dtype=np.float64)
    lu = apply_operator(op, u)
    coords = op.eq_coords()
    fv = supremand.eval_field(coords, lu)

    mag = np.linalg.norm(f, axis=1)
    peak = float(mag.max()) if mag.size else 0.0
    if peak == 0.0:
        if e_hat > 0.0:
            raise DegenerateField(
                f"dual field vanishes identically but e_hat={e_hat:.3e} > 0"
            )
        return VerifyReport(
            r_system=0.0,
            r_harmonic=0.0,
            cv_F=coefficient_of_variation(fv),
            active_fraction=0.0,
            zero_set_fraction=1.0,
        )

    active = mag > theta * peak
    cv = coefficient_of_variation(fv[active])
    phi = duality_map_field(supremand, coords, lu)
    directions = f[active] / mag[active, None]
    residual = phi[active] - e_hat * directions
    r_system = float(np.max(np.linalg.norm(residual, axis=1))) if active.any() else 0.0

    adjoint = op.free_matrix.T @ f.ravel()
    scale = op.operator_scale() * np.linalg.norm(f)
    r_harmonic = float(np.linalg.norm(adjoint) / scale) if scale > 0 else 0.0

    zero_frac = float(np.mean(~active))
    return VerifyReport(
        r_system=r_system,
        r_harmonic=r_harmonic,
        cv_F=cv,
        active_fraction=1.0 - zero_frac,
        zero_set_fraction=zero_frac,
    )


def uniqueness_check(op, supremand, clamp, start_a=None, start_b=None, **solve_kwargs):
    """Sup distance between continuation limits from two different starts.

    A strictly convex stage structure should make the limit start-independent;
    the distance quantifies how well the numerics realize that uniqueness.
    """
    from .continuation import continuation_solve

    rep_a = continuation_solve(op, supremand, clamp, initial=start_a, verify=False, **solve_kwargs)
    rep_b = continuation_solve(op, supremand, clamp, initial=start_b, verify=False, **solve_kwargs)
    return float(np.max(np.abs(rep_a.u - rep_b.u)))


def absolute_min_spotcheck(
    op, supremand, u, sub_start, sub_stop, perturbations=50, amplitude=0.1, seed=0
):
    """Local minimality probe on an interior sub-box.

    Perturbations supported strictly inside the sub-box (two clamped layers
    kept) must not lower the peak cost over the sub-box; returns True when no
    random perturbation wins by more than a 1e-6 margin.
    """
    if amplitude < 0:
        raise ValueError("amplitude must be nonnegative")
    grid = op.grid
    measure_mask, support_mask = grid.subbox_masks(sub_start, sub_stop)
    sel = measure_mask[op.eq_idx]  # sub-box nodes where the cost is read off
    if not sel.any():
        raise ValueError("sub-box contains no measurable nodes")
    coords = op.eq_coords()[sel]
    support = np.flatnonzero(support_mask)

    lu = apply_operator(op, u)[sel]
    base_peak = float(np.max(supremand.eval_field(coords, lu)))

    rng = np.random.default_rng(seed)
    ok = True
    for _ in range(perturbations):
        bump = np.zeros((grid.n_nodes, op.n_components))
        bump[support] = amplitude * rng.standard_normal((support.size, op.n_components))
        lu_try = apply_operator(op, u + bump)[sel]
        peak_try = float(np.max(supremand.eval_field(coords, lu_try)))
        if peak_try < base_peak - 1e-6:
            ok = False
    return ok


def rescaling_invariance_check(op, supremand, clamp, factor, **solve_kwargs):
    """Solve with F and with factor * F; positive rescalings share minimizers.

    Returns (sup distance between the two limit fields, ratio of the two value
    estimates); the ratio is NaN when both energies vanish.
    """
    from .continuation import continuation_solve

    if not factor > 0:
        raise ValueError("factor must be positive")
    rep_1 = continuation_solve(op, supremand, clamp, verify=False, **solve_kwargs)
    rep_2 = continuation_solve(op, supremand.scaled(factor), clamp, verify=False, **solve_kwargs)
    distance = float(np.max(np.abs(rep_1.u - rep_2.u)))
    if rep_1.e_inf == 0.0:
        ratio = float("nan") if rep_2.e_inf == 0.0 else float("inf")
    else:
        ratio = rep_2.e_inf / rep_1.e_inf
    return distance, ratio
