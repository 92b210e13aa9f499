"""Reductive decompositions g = h + m and plane tests on R + m."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFlagError, EuclideanFactorError, InputError, NotSubalgebraError
from .lie_algebra import LieAlgebra, null_space

CLOSURE_TOL = 1e-10
TRANSVERSE_TOL = 1e-10
FLAT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ReductiveSpace:
    algebra: LieAlgebra
    h_basis: np.ndarray  # (n, k), bi-orthonormal columns
    m_basis: np.ndarray  # (n, n - k), bi-orthonormal columns

    @property
    def dim_m(self):
        return self.m_basis.shape[1]

    def project_m(self, x):
        return self.algebra.project(self.m_basis, x)

    def residuals(self):
        """Closure of h, orthogonality of h and m, and ad(h)-stability of m."""
        alg, h, m = self.algebra, self.h_basis, self.m_basis
        closure = 0.0
        stable = 0.0
        for i in range(h.shape[1]):
            for j in range(h.shape[1]):
                z = alg.bracket(h[:, i], h[:, j])
                closure = max(closure, float(alg.norm(z - alg.project(h, z))))
            for j in range(m.shape[1]):
                z = alg.bracket(h[:, i], m[:, j])
                stable = max(stable, float(alg.norm(z - alg.project(m, z))))
        ortho = float(np.max(np.abs(h.T @ alg.inner_product @ m), initial=0.0))
        return {"closure": closure, "orthogonality": ortho, "m_stability": stable}


def reductive_decomposition(alg: LieAlgebra, h_basis=None) -> ReductiveSpace:
    n = alg.dim
    h = np.zeros((n, 0)) if h_basis is None else np.asarray(h_basis, dtype=float).reshape(n, -1)
    if h.shape[1]:
        if np.linalg.matrix_rank(h, tol=1e-10) < h.shape[1]:
            raise InputError("h_basis columns are linearly dependent")
        h = alg.orthonormalize(h)
    # m = h^perp: null space of h^T Q
    m = null_space(h.T @ alg.inner_product) if h.shape[1] else np.eye(n)
    m = alg.orthonormalize(m) if m.shape[1] else m
    space = ReductiveSpace(alg, h, m)
    res = space.residuals()
    if res["closure"] > CLOSURE_TOL:
        raise NotSubalgebraError(f"[h, h] leaves h (residual {res['closure']:.3g})")
    return space


def find_transverse(space: ReductiveSpace, w1) -> np.ndarray:
    """Unit v1 in m, orthogonal to w1, maximizing |[w1, v1]|.

    Raises ``EuclideanFactorError`` when ad(w1) vanishes on m ∩ w1^perp.
    """
    alg = space.algebra
    w1 = np.asarray(w1, dtype=float)
    norm = float(alg.norm(w1))
    if norm == 0.0:
        raise InputError("w1 must be nonzero")
    if alg.norm(w1 - space.project_m(w1)) > 1e-10 * norm:
        raise InputError("w1 must lie in m")
    # orthonormal basis of m ∩ w1^perp
    coeffs = null_space((w1 @ alg.inner_product @ space.m_basis)[None, :])
    slice_basis = space.m_basis @ coeffs
    if slice_basis.shape[1] == 0:
        raise EuclideanFactorError("m ∩ w1^perp is trivial")
    slice_basis = alg.orthonormalize(slice_basis)
    # ad(w1) restricted, in bi-orthonormal coordinates
    image = alg.ad(w1) @ slice_basis
    op = np.linalg.cholesky(alg.inner_product).T @ image
    _, sigma, vt = np.linalg.svd(op, full_matrices=False)
    if sigma[0] <= TRANSVERSE_TOL * norm:
        raise EuclideanFactorError(f"[w1, m] vanishes on the orthogonal slice (sigma={sigma[0]:.3g})")
    v1 = slice_basis @ vt[0]
    k = int(np.argmax(np.abs(v1)))
    if v1[k] < 0:
        v1 = -v1
    return alg.normalize(v1)


def flat_plane_test(space: ReductiveSpace, u, v) -> bool:
    """True iff the plane spanned by (t, u1), (t', v1) in R + m has a commuting spanning pair.

    [u1, v1] scales by the determinant under a change of spanning pair, so
    testing a canonical orthonormal pair decides the question.
    """
    alg = space.algebra
    (t, u1), (s, v1) = u, v
    a = np.concatenate([[float(t)], np.asarray(u1, dtype=float)])
    b = np.concatenate([[float(s)], np.asarray(v1, dtype=float)])
    # metric on R + m: unit on the scalar slot, bi-invariant on m
    n = alg.dim
    metric = np.zeros((n + 1, n + 1))
    metric[0, 0] = 1.0
    metric[1:, 1:] = alg.inner_product
    cols = np.stack([a, b], axis=1)
    gram = cols.T @ metric @ cols
    if np.linalg.det(gram) <= 1e-12 * max(gram[0, 0] * gram[1, 1], 1e-300):
        raise DegenerateFlagError("u and v do not span a plane")
    basis = cols @ np.linalg.inv(np.linalg.cholesky(gram)).T
    return bool(alg.norm(alg.bracket(basis[1:, 0], basis[1:, 1])) <= FLAT_TOL)
