"""Compact Lie algebras given by structure constants and a bi-invariant inner product.

Conventions: ``[e_i, e_j] = sum_k c[i, j, k] e_k`` and vectors are plain
coordinate arrays in the basis ``e_i``.  All randomized helpers take an
explicit seed so repeated runs are identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AlgebraError, InputError, SearchFailure

TOL = 1e-12
KERNEL_RTOL = 1e-9
RANK_DRAWS = 64


def null_space(matrix, rtol=KERNEL_RTOL):
    """Euclidean-orthonormal kernel basis (columns) with relative SVD cutoff."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    n = matrix.shape[1]
    _, s, vh = np.linalg.svd(matrix)
    if s.size == 0 or s[0] == 0.0:
        return np.eye(n)
    rank = int(np.sum(s > rtol * s[0]))
    return vh[rank:].T.copy()


@dataclass(frozen=True, eq=False)
class LieAlgebra:
    structure_constants: np.ndarray
    inner_product: np.ndarray
    labels: tuple = ()
    name: str = "custom"
    _chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        c = np.array(self.structure_constants, dtype=float)
        q = np.array(self.inner_product, dtype=float)
        if c.ndim != 3 or c.shape[0] != c.shape[1] or c.shape[1] != c.shape[2]:
            raise InputError(f"structure constants must be n x n x n, got {c.shape}")
        n = c.shape[0]
        if q.shape != (n, n):
            raise InputError(f"inner product must be {n} x {n}, got {q.shape}")
        labels = tuple(self.labels) if self.labels else tuple(f"e{i + 1}" for i in range(n))
        if len(labels) != n:
            raise InputError("one label per basis vector required")
        c.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "structure_constants", c)
        object.__setattr__(self, "inner_product", q)
        object.__setattr__(self, "labels", labels)
        try:
            chol = np.linalg.cholesky(0.5 * (q + q.T))
        except np.linalg.LinAlgError:
            chol = None
        object.__setattr__(self, "_chol", chol)

    @property
    def dim(self) -> int:
        return self.structure_constants.shape[0]

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise InputError(f"expected vectors of length {self.dim}, got shape {x.shape}")
        return x

    def basis(self, label):
        v = np.zeros(self.dim)
        v[self.labels.index(label)] = 1.0
        return v

    # -- brackets and inner products --------------------------------------

    def bracket(self, x, y):
        x, y = self._check(x), self._check(y)
        return np.einsum("...i,...j,ijk->...k", x, y, self.structure_constants)

    def ad(self, x):
        """Matrix of ad_x, so that ``ad(x) @ y == bracket(x, y)``."""
        x = self._check(x)
        return np.einsum("...i,ijk->...kj", x, self.structure_constants)

    def ip(self, x, y):
        return np.einsum("...i,ij,...j->...", x, self.inner_product, y)

    def norm(self, x):
        return np.sqrt(np.maximum(self.ip(x, x), 0.0))

    def normalize(self, x):
        x = self._check(x)
        return x / self.norm(x)[..., None]

    def orthonormalize(self, vectors):
        """Orthonormal basis (columns) of span(columns), w.r.t. the bi-invariant product."""
        b = np.atleast_2d(np.asarray(vectors, dtype=float))
        if b.shape[1] == 0:
            return b
        gram = b.T @ self.inner_product @ b
        low = np.linalg.cholesky(0.5 * (gram + gram.T))
        return np.linalg.solve(low, b.T).T

    def project(self, basis, x):
        """Orthogonal projection onto the span of an orthonormal basis."""
        if basis.shape[1] == 0:
            return np.zeros_like(x)
        return (x @ self.inner_product @ basis) @ basis.T

    def random_unit(self, rng, size=None):
        """Uniform samples on the bi-invariant unit sphere."""
        shape = (self.dim,) if size is None else (size, self.dim)
        z = rng.standard_normal(shape)
        z /= np.linalg.norm(z, axis=-1, keepdims=True)
        # y = L^{-T} z has y^T Q y = |z|^2
        return np.linalg.solve(self._chol.T, z.T).T

    # -- derived subspaces --------------------------------------------------

    def centralizer(self, v):
        """Orthonormal basis of ker(ad_v)."""
        v = self._check(v)
        if not np.any(v):
            raise InputError("centralizer of the zero vector is not defined")
        return self.orthonormalize(null_space(self.ad(v)))

    def center(self):
        stacked = np.concatenate([self.ad(e) for e in np.eye(self.dim)], axis=0)
        return self.orthonormalize(null_space(stacked))

    def center_unit(self):
        """Unit generator u0 of a one-dimensional center, else None."""
        c = self.center()
        if c.shape[1] != 1:
            return None
        u0 = c[:, 0]
        # fix the sign so that the largest coordinate is positive
        return u0 if u0[np.argmax(np.abs(u0))] > 0 else -u0

    def rank(self, seed=0):
        rng = np.random.default_rng(seed)
        draws = self.random_unit(rng, RANK_DRAWS)
        return min(self.centralizer(v).shape[1] for v in draws)

    def rank_and_genericity(self, v, seed=0):
        v = self._check(v)
        if not np.any(v):
            raise InputError("genericity of the zero vector is not defined")
        r = self.rank(seed)
        return r, self.centralizer(v).shape[1] == r

    def cartan_avoiding(self, u, seed=0, draws=RANK_DRAWS, slack=1e-3, candidates=()):
        """Find a Cartan subalgebra t = c(v), v generic, with u outside t.

        ``candidates`` are tried before random draws (useful for reusing
        winds already attached to other charts).  Returns a ``CartanData``.
        """
        u = self._check(u)
        rng = np.random.default_rng(seed)
        rank = self.rank(seed)
        pool = [np.asarray(c, dtype=float) for c in candidates]
        tried = 0
        while tried < draws:
            if pool:
                v = pool.pop(0)
            else:
                v = self.random_unit(rng)
                tried += 1
            t = self.centralizer(v)
            if t.shape[1] != rank:
                continue
            proj = self.norm(self.project(t, u))
            if proj <= 1.0 - slack:
                margin = float(np.sqrt(max(1.0 - proj**2, 0.0)))
                return CartanData(basis=t, v=self.normalize(v), margin=margin)
        raise SearchFailure(f"no Cartan subalgebra avoiding u found in {draws} draws")

    # -- validation ---------------------------------------------------------

    def validate(self) -> "ValidationReport":
        c, q, n = self.structure_constants, self.inner_product, self.dim
        antisym = float(np.max(np.abs(c + c.transpose(1, 0, 2)), initial=0.0))
        # [[e_i, e_j], e_k] = sum_l c[i,j,l] c[l,k,:]
        jj = np.einsum("ijl,lkm->ijkm", c, c)
        jac = jj + jj.transpose(1, 2, 0, 3) + jj.transpose(2, 0, 1, 3)
        jacobi = float(np.max(np.abs(jac), initial=0.0))
        sym = float(np.max(np.abs(q - q.T), initial=0.0))
        min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (q + q.T)))) if n else 0.0
        # <[e_i, e_j], e_k> + <e_j, [e_i, e_k]>
        cq = np.einsum("ijl,lk->ijk", c, q)
        adinv = float(np.max(np.abs(cq + cq.transpose(0, 2, 1)), initial=0.0))
        if min_eig > 0:
            center_dim = self.center().shape[1]
            rank = self.rank()
        else:
            center_dim, rank = -1, -1
        return ValidationReport(
            antisymmetry=antisym,
            jacobi=jacobi,
            inner_product_symmetry=sym,
            inner_product_min_eigenvalue=min_eig,
            ad_invariance=adinv,
            center_dim=center_dim,
            rank=rank,
        )

    # -- serialization ------------------------------------------------------

    def to_json(self):
        c = self.structure_constants
        entries = [
            [i, j, k, float(c[i, j, k])]
            for i in range(self.dim)
            for j in range(i + 1, self.dim)
            for k in range(self.dim)
            if c[i, j, k] != 0.0
        ]
        return {
            "dim": self.dim,
            "labels": list(self.labels),
            "structure_constants": entries,
            "inner_product": self.inner_product.tolist(),
        }


@dataclass(frozen=True, eq=False)
class CartanData:
    basis: np.ndarray
    v: np.ndarray
    margin: float


@dataclass
class ValidationReport:
    antisymmetry: float
    jacobi: float
    inner_product_symmetry: float
    inner_product_min_eigenvalue: float
    ad_invariance: float
    center_dim: int
    rank: int
    tol: float = TOL

    @property
    def passed(self) -> bool:
        return (
            self.antisymmetry <= self.tol
            and self.jacobi <= self.tol
            and self.inner_product_symmetry <= self.tol
            and self.inner_product_min_eigenvalue > 0.0
            and self.ad_invariance <= self.tol
        )

    @property
    def center_ok(self) -> bool:
        """dim c(g) <= 1, the hypothesis of the group construction."""
        return 0 <= self.center_dim <= 1

    def failures(self):
        out = []
        for name in ("antisymmetry", "jacobi", "inner_product_symmetry", "ad_invariance"):
            if getattr(self, name) > self.tol:
                out.append(name)
        if self.inner_product_min_eigenvalue <= 0.0:
            out.append("inner_product_positive_definite")
        return out

    def to_dict(self):
        return {
            "passed": self.passed,
            "failures": self.failures(),
            "max_violation": {
                "antisymmetry": self.antisymmetry,
                "jacobi": self.jacobi,
                "inner_product_symmetry": self.inner_product_symmetry,
                "ad_invariance": self.ad_invariance,
            },
            "inner_product_min_eigenvalue": self.inner_product_min_eigenvalue,
            "center_dim": self.center_dim,
            "rank": self.rank,
            "center_dim_at_most_one": self.center_ok,
        }


# -- built-in algebras ------------------------------------------------------


def _su2_constants(offset, n):
    c = np.zeros((n, n, n))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        c[offset + i, offset + j, offset + k] = 1.0
        c[offset + j, offset + i, offset + k] = -1.0
    return c


def su2():
    return LieAlgebra(_su2_constants(0, 3), np.eye(3), ("e1", "e2", "e3"), name="su2")


def su2_plus_r():
    return LieAlgebra(_su2_constants(0, 4), np.eye(4), ("e1", "e2", "e3", "u0"), name="su2xR")


def su2_plus_su2():
    c = _su2_constants(0, 6) + _su2_constants(3, 6)
    return LieAlgebra(c, np.eye(6), ("e1", "e2", "e3", "f1", "f2", "f3"), name="su2xsu2")


def abelian(n):
    return LieAlgebra(np.zeros((n, n, n)), np.eye(n), name=f"abelian{n}")


BUILTINS = {
    "su2": su2,
    "su2xR": su2_plus_r,
    "su2+R": su2_plus_r,
    "su2xsu2": su2_plus_su2,
    "su2+su2": su2_plus_su2,
}


def builtin(name):
    if name in BUILTINS:
        return BUILTINS[name]()
    if name.startswith("abelian") and name[len("abelian"):].isdigit():
        return abelian(int(name[len("abelian"):]))
    raise InputError(f"unknown built-in algebra {name!r}")


def from_json(data, name="custom"):
    """Build an algebra from the JSON schema; rejects algebras failing validate()."""
    try:
        n = int(data["dim"])
        c = np.zeros((n, n, n))
        for i, j, k, value in data["structure_constants"]:
            i, j, k = int(i), int(j), int(k)
            if not i < j:
                raise AlgebraError(f"structure constant entries need i < j, got ({i}, {j})")
            c[i, j, k] = value
            c[j, i, k] = -value
        q = np.asarray(data["inner_product"], dtype=float).reshape(n, n)
        labels = tuple(data.get("labels") or ())
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise AlgebraError(f"malformed algebra JSON: {exc}") from exc
    try:
        alg = LieAlgebra(c, q, labels, name=name)
    except InputError as exc:
        raise AlgebraError(str(exc)) from exc
    report = alg.validate()
    if not report.passed:
        raise InvalidAlgebra(report)
    return alg


class InvalidAlgebra(AlgebraError):
    def __init__(self, report):
        super().__init__("algebra failed validation: " + ", ".join(report.failures()))
        self.report = report


def load(source):
    """Built-in name or path to a JSON file."""
    path = Path(source)
    if path.suffix == ".json" or path.exists():
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise AlgebraError(f"cannot read {source}: {exc}") from exc
        return from_json(data, name=path.stem)
    return builtin(source)
