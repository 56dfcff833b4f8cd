"""Symmetric 4-tensor coefficient fields and their ellipticity checks.

A tensor A couples matrix fields X in R^(N x n) through the quadratic form
AX:X = A[a,b,i,j] X[i,a] X[j,b].  Entries are stored as arrays of shape
(n, n, N, N) indexed [axis_a, axis_b, comp_i, comp_j]; the required symmetry
is A[a,b,i,j] == A[b,a,j,i].
"""

from dataclasses import dataclass

import numpy as np

from .errors import AsymmetricTensor

LEGENDRE = "legendre"
LEGENDRE_HADAMARD = "legendre_hadamard"

_SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class EllipticTensor:
    """Coefficient field of a divergence-form operator div(A Du).

    entries  -- (n, n, N, N) array for constant coefficients, or a callable
                mapping points (M, n) to entry arrays (M, n, n, N, N)
    mode     -- "legendre" (pointwise convex form) or "legendre_hadamard"
                (rank-one convex form; constant coefficients only)
    lam      -- declared ellipticity constant
    """

    entries: object
    mode: str = LEGENDRE
    lam: float = 1.0

    def __post_init__(self):
        if self.mode not in (LEGENDRE, LEGENDRE_HADAMARD):
            raise ValueError(f"unknown ellipticity mode {self.mode!r}")
        if self.mode == LEGENDRE_HADAMARD and not self.is_constant:
            raise ValueError("legendre_hadamard mode requires constant coefficients")
        if self.is_constant:
            arr = np.asarray(self.entries, dtype=np.float64)
            if arr.ndim != 4 or arr.shape[0] != arr.shape[1] or arr.shape[2] != arr.shape[3]:
                raise ValueError(f"constant entries must have shape (n, n, N, N), got {arr.shape}")
            object.__setattr__(self, "entries", arr)

    @property
    def is_constant(self):
        return not callable(self.entries)

    @property
    def n(self):
        if self.is_constant:
            return self.entries.shape[0]
        return self.entries.n

    @property
    def n_components(self):
        if self.is_constant:
            return self.entries.shape[2]
        return self.entries.n_components

    def at(self, points):
        """Entry arrays at the given points, shape (M, n, n, N, N)."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if self.is_constant:
            return np.broadcast_to(self.entries, (points.shape[0],) + self.entries.shape)
        return np.asarray(self.entries(points), dtype=np.float64)

    def check_symmetry(self, points=None, tol=_SYMMETRY_TOL):
        """Raise AsymmetricTensor when A[a,b,i,j] != A[b,a,j,i] beyond tol."""
        if points is None:
            if not self.is_constant:
                raise ValueError("sample points required for a variable tensor")
            arrs = self.entries[None]
        else:
            arrs = self.at(points)
        dev = np.max(np.abs(arrs - arrs.transpose(0, 2, 1, 4, 3)))
        scale = max(1.0, float(np.max(np.abs(arrs))))
        if dev > tol * scale:
            raise AsymmetricTensor(
                f"tensor symmetry deviation {dev:.3e} exceeds {tol:.1e} * scale"
            )
        return float(dev)


def identity_tensor(n, n_components=1, lam=1.0):
    """A X = X; the operator reduces to the componentwise Laplacian."""
    entries = np.zeros((n, n, n_components, n_components))
    for a in range(n):
        for i in range(n_components):
            entries[a, a, i, i] = 1.0
    return EllipticTensor(entries, mode=LEGENDRE, lam=lam)


def constant_tensor(entries, mode=LEGENDRE, lam=1.0):
    return EllipticTensor(np.asarray(entries, dtype=np.float64), mode=mode, lam=lam)


def block_diagonal_tensor(blocks, lam=None):
    """One independent n x n elliptic matrix per component.

    blocks -- sequence of N symmetric (n, n) arrays B_h; component h of the
    operator is div(B_h D u^h), so the system decouples componentwise.
    """
    blocks = [np.asarray(b, dtype=np.float64) for b in blocks]
    n = blocks[0].shape[0]
    n_comp = len(blocks)
    entries = np.zeros((n, n, n_comp, n_comp))
    for h, b in enumerate(blocks):
        if b.shape != (n, n) or np.max(np.abs(b - b.T)) > 1e-14 * max(1.0, np.max(np.abs(b))):
            raise ValueError(f"block {h} must be a symmetric {n}x{n} matrix")
        entries[:, :, h, h] = b
    if lam is None:
        lam = min(float(np.linalg.eigvalsh(b).min()) for b in blocks)
    return EllipticTensor(entries, mode=LEGENDRE, lam=lam)


def det_coupled_tensor(gamma, lam=None):
    """Quadratic form |X|^2 + gamma * det X on 2x2 matrix fields.

    The determinant vanishes on rank-one matrices, so the rank-one constant is
    1 for every gamma while the full convexity constant is 1 - |gamma|/2.
    """
    gamma = float(gamma)
    eps = np.array([[0.0, 1.0], [-1.0, 0.0]])
    entries = np.zeros((2, 2, 2, 2))
    for a in range(2):
        for b in range(2):
            for i in range(2):
                for j in range(2):
                    entries[a, b, i, j] = (a == b) * (i == j) + 0.5 * gamma * eps[i, j] * eps[a, b]
    if lam is None:
        lam = 1.0 if abs(gamma) > 2.0 else 1.0 - abs(gamma) / 2.0
    mode = LEGENDRE if abs(gamma) < 2.0 else LEGENDRE_HADAMARD
    return EllipticTensor(entries, mode=mode, lam=lam)


def quadratic_form_matrix(entries):
    """Flatten (n, n, N, N) entries to the symmetric (N*n, N*n) matrix of AX:X.

    Rows/columns are indexed by (i, a) -> i * n + a so that the form acts on
    X.ravel() for X of shape (N, n).
    """
    n = entries.shape[0]
    n_comp = entries.shape[2]
    m = np.transpose(entries, (2, 0, 3, 1)).reshape(n_comp * n, n_comp * n)
    return 0.5 * (m + m.T)


def check_legendre(tensor, sample_points=None):
    """Smallest eigenvalue of the quadratic form AX:X over the sample points.

    Exact per point (eigen-decomposition of the flattened symmetric matrix);
    raises AsymmetricTensor when the index symmetry fails.
    """
    if sample_points is None:
        if not tensor.is_constant:
            raise ValueError("sample points required for a variable tensor")
        sample_points = np.zeros((1, tensor.n))
    sample_points = np.atleast_2d(np.asarray(sample_points, dtype=np.float64))
    if sample_points.shape[0] == 0:
        raise ValueError("need at least one sample point")
    tensor.check_symmetry(points=None if tensor.is_constant else sample_points)
    arrs = tensor.at(sample_points)
    worst = np.inf
    for entries in arrs:
        eigs = np.linalg.eigvalsh(quadratic_form_matrix(entries))
        worst = min(worst, float(eigs[0]))
    return worst


def _rank_one_min_for_direction(entries, eta):
    """min over unit xi of A(xi (x) eta):(xi (x) eta) -- exact via eigenvalues."""
    q = np.einsum("abij,a,b->ij", entries, eta, eta)
    return float(np.linalg.eigvalsh(0.5 * (q + q.T))[0])


def check_legendre_hadamard(tensor, angular_samples=360):
    """Least value of the quadratic form on rank-one matrices xi (x) eta.

    The minimum over xi at fixed unit eta is an exact smallest eigenvalue; the
    eta direction is scanned over angular_samples angles (2D) and the best
    sample refined by golden-section descent, so the result lower-bounds the
    rank-one constant up to the angular resolution.
    """
    if not tensor.is_constant:
        raise ValueError("legendre_hadamard check requires constant coefficients")
    if angular_samples < 1:
        raise ValueError("angular_samples must be >= 1")
    entries = tensor.entries
    n = tensor.n
    if n == 1:
        return _rank_one_min_for_direction(entries, np.array([1.0]))

    def value(theta):
        eta = np.array([np.cos(theta), np.sin(theta)])
        return _rank_one_min_for_direction(entries, eta)

    thetas = np.linspace(0.0, np.pi, angular_samples, endpoint=False)
    values = np.array([value(t) for t in thetas])
    k = int(np.argmin(values))
    # golden-section refinement around the best sampled angle
    span = np.pi / angular_samples
    a, b = thetas[k] - span, thetas[k] + span
    gr = (np.sqrt(5.0) - 1.0) / 2.0
    c, d = b - gr * (b - a), a + gr * (b - a)
    fc, fd = value(c), value(d)
    for _ in range(80):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = value(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = value(d)
    return min(float(values[k]), fc, fd)
