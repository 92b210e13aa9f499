"""Minkowski norms on a real vector space, Zermelo navigation and gluing.

Every norm evaluates on batches: the last axis of an input array is the
vector axis, leading axes are broadcast.  ``F(0) = 0`` by continuity; the
derivative methods require nonzero input.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvexityError, DomainError, InputError, InvalidDatumError, PartitionError

HESSIAN_STEP = 1e-4
GRADIENT_STEP = 1e-5
BISECTION_TOL = 1e-12
CONVEXITY_SAMPLES = 10_000


def _as_batch(y, dim):
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != dim:
        raise InputError(f"expected vectors of length {dim}, got shape {y.shape}")
    return y


class MinkowskiNorm:
    """Base class; subclasses implement ``value`` and may override derivatives.

    The defaults differentiate ``F^2`` by central differences: the gradient
    with step ``1e-5 |y|`` and the Hessian with step ``1e-4 |y|``.
    """

    kind = "abstract"

    def __init__(self, dim):
        self.dim = int(dim)

    def __call__(self, y):
        return self.value(y)

    def value(self, y):
        raise NotImplementedError

    def energy(self, y):
        return self.value(y) ** 2

    def grad(self, y):
        """Gradient of F."""
        y = _as_batch(y, self.dim)
        return self.energy_grad(y) / (2.0 * self.value(y)[..., None])

    def energy_grad(self, y):
        """Gradient of F^2 (equals 2 g(y) y)."""
        y = _as_batch(y, self.dim)
        h = GRADIENT_STEP * np.linalg.norm(y, axis=-1)[..., None, None]
        steps = h * np.eye(self.dim)
        e_plus = self.energy(y[..., None, :] + steps)
        e_minus = self.energy(y[..., None, :] - steps)
        return (e_plus - e_minus) / (2.0 * h[..., 0])

    def tensor(self, y):
        """Fundamental tensor g_ij(y) = (1/2) d^2 F^2 / dy^i dy^j without checks."""
        y = _as_batch(y, self.dim)
        n = self.dim
        h = HESSIAN_STEP * np.linalg.norm(y, axis=-1)
        eye = np.eye(n)
        di = eye[:, None, :]
        dj = eye[None, :, :]
        hh = h[..., None, None, None]
        base = y[..., None, None, :]
        pp = self.energy(base + hh * (di + dj))
        pm = self.energy(base + hh * (di - dj))
        mp = self.energy(base + hh * (-di + dj))
        mm = self.energy(base - hh * (di + dj))
        hess = (pp - pm - mp + mm) / (4.0 * h[..., None, None] ** 2)
        return 0.25 * (hess + np.swapaxes(hess, -1, -2))


class QuadraticNorm(MinkowskiNorm):
    kind = "quadratic"

    def __init__(self, q):
        q = np.asarray(q, dtype=float)
        super().__init__(q.shape[0])
        if q.shape != (self.dim, self.dim) or not np.allclose(q, q.T, atol=1e-14):
            raise InputError("quadratic norm needs a symmetric matrix")
        if np.min(np.linalg.eigvalsh(q)) <= 0:
            raise InputError("quadratic norm needs a positive definite matrix")
        self.q = q

    def value(self, y):
        y = _as_batch(y, self.dim)
        return np.sqrt(np.maximum(np.einsum("...i,ij,...j->...", y, self.q, y), 0.0))

    def energy(self, y):
        return np.einsum("...i,ij,...j->...", y, self.q, y)

    def grad(self, y):
        y = _as_batch(y, self.dim)
        return (y @ self.q) / self.value(y)[..., None]

    def energy_grad(self, y):
        return 2.0 * (_as_batch(y, self.dim) @ self.q)

    def tensor(self, y):
        y = _as_batch(y, self.dim)
        return np.broadcast_to(self.q, y.shape[:-1] + self.q.shape).copy()


class RandersNorm(MinkowskiNorm):
    """Closed-form solution of the navigation equation for a quadratic base.

    With ``b = h W`` and ``lam = 1 - h(W, W)``:
    ``F(y) = (sqrt(lam h(y, y) + <b, y>^2) - <b, y>) / lam``.
    Gradient and Hessian are analytic.
    """

    kind = "zermelo_randers"

    def __init__(self, h, wind):
        h = np.asarray(h, dtype=float)
        wind = np.asarray(wind, dtype=float)
        super().__init__(h.shape[0])
        if wind.shape != (self.dim,):
            raise InputError("wind has the wrong length")
        self.h = h
        self.wind = wind
        self.b = h @ wind
        self.lam = 1.0 - float(wind @ self.b)
        if self.lam <= 0.0:
            raise InvalidDatumError(f"h(W, W) = {1 - self.lam:.6g} >= 1")

    def _parts(self, y):
        y = _as_batch(y, self.dim)
        hy = y @ self.h
        sy = y @ self.b
        alpha = np.sqrt(np.maximum(self.lam * np.einsum("...i,...i->...", hy, y) + sy**2, 0.0))
        return y, hy, sy, alpha

    def value(self, y):
        _, _, sy, alpha = self._parts(y)
        return (alpha - sy) / self.lam

    def grad(self, y):
        _, hy, sy, alpha = self._parts(y)
        grad_alpha = (self.lam * hy + sy[..., None] * self.b) / alpha[..., None]
        return (grad_alpha - self.b) / self.lam

    def energy_grad(self, y):
        return 2.0 * self.value(y)[..., None] * self.grad(y)

    def tensor(self, y):
        _, hy, sy, alpha = self._parts(y)
        a = alpha[..., None, None]
        grad_alpha = (self.lam * hy + sy[..., None] * self.b) / alpha[..., None]
        hess_alpha = (self.lam * self.h + np.outer(self.b, self.b)) / a - (
            grad_alpha[..., :, None] * grad_alpha[..., None, :]
        ) / a
        f = ((alpha - sy) / self.lam)[..., None, None]
        df = (grad_alpha - self.b) / self.lam
        g = df[..., :, None] * df[..., None, :] + f * hess_alpha / self.lam
        return 0.5 * (g + np.swapaxes(g, -1, -2))


class NavigationDatum:
    """Base norm F and wind W with F(W) < 1."""

    def __init__(self, base, wind):
        self.base = base
        self.wind = np.asarray(wind, dtype=float)
        if self.wind.shape != (base.dim,):
            raise InputError("wind has the wrong length")
        strength = float(base(self.wind))
        if strength >= 1.0:
            raise InvalidDatumError(f"base(W) = {strength:.6g} >= 1")
        self.strength = strength


def solve_navigation_batch(datum, u):
    """Vectorized root of base(u - lam W) = lam, lam >= 0."""
    base, wind = datum.base, datum.wind
    u = _as_batch(u, base.dim)
    flat = u.reshape(-1, base.dim)
    out = np.zeros(flat.shape[0])
    nz = np.any(flat != 0.0, axis=-1)
    if not np.any(nz):
        return out.reshape(u.shape[:-1])
    uu = flat[nz]
    lo = np.zeros(uu.shape[0])
    hi = base(uu) / (1.0 - datum.strength)
    # f(lam) = base(u - lam W) - lam is decreasing, f(0) >= 0 >= f(hi)
    while True:
        mid = 0.5 * (lo + hi)
        f = base(uu - mid[:, None] * wind) - mid
        pos = f > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
        if np.max(hi - lo) <= BISECTION_TOL:
            break
    lam = 0.5 * (lo + hi)
    for _ in range(2):
        z = uu - lam[:, None] * wind
        f = base(z) - lam
        df = -np.einsum("...i,i->...", base.grad(z), wind) - 1.0
        step = lam - f / df
        better = np.abs(base(uu - step[:, None] * wind) - step) <= np.abs(f)
        lam = np.where(better & (step > 0), step, lam)
    out[nz] = lam
    return out.reshape(u.shape[:-1])


def solve_navigation(datum, u):
    """The unique lam >= 0 with base(u - lam W) = lam."""
    return float(solve_navigation_batch(datum, np.asarray(u, dtype=float)))


class NavigationNorm(MinkowskiNorm):
    """Norm defined implicitly by a navigation datum with arbitrary base."""

    kind = "implicit_navigation"

    def __init__(self, base, wind):
        super().__init__(base.dim)
        self.datum = NavigationDatum(base, wind)
        self.base = base
        self.wind = self.datum.wind

    def value(self, y):
        return solve_navigation_batch(self.datum, y)


def zermelo_randers_closed_form(h, wind):
    return RandersNorm(h, wind)


def navigation_norm(base, wind):
    """Navigation of ``base`` by ``wind``; quadratic bases use the closed form."""
    if isinstance(base, QuadraticNorm):
        NavigationDatum(base, wind)
        return RandersNorm(base.q, wind)
    return NavigationNorm(base, wind)


class GluedNorm(MinkowskiNorm):
    """F(y) = sum_i mu_i(y/|y|) F_i(y) for a partition of unity ``mu``.

    ``partition`` must provide ``weights(w)`` on unit vectors returning an
    array with one column per component and ``unit(y)`` normalizing to the
    sphere the weights live on.  Where one weight is exactly 1 the value and
    every derivative are taken from that component alone.
    """

    kind = "glued"

    def __init__(self, components, partition, check_samples=1000, seed=0):
        components = list(components)
        if not components:
            raise InputError("glued norm needs at least one component")
        super().__init__(components[0].dim)
        if any(c.dim != self.dim for c in components):
            raise InputError("all components must share a dimension")
        self.components = components
        self.partition = partition
        if check_samples:
            rng = np.random.default_rng(seed)
            w = partition.unit(rng.standard_normal((check_samples, self.dim)))
            mu = partition.weights(w)
            dev = float(np.max(np.abs(mu.sum(axis=-1) - 1.0)))
            if mu.shape[-1] != len(components):
                raise PartitionError("one weight per component required")
            if dev > 1e-10 or np.min(mu) < 0:
                raise PartitionError(f"weights deviate from a partition of unity by {dev:.3g}")

    def _weights(self, y):
        return self.partition.weights(self.partition.unit(y))

    def sole_component(self, y):
        """Index of the component with weight exactly one, else -1."""
        y = _as_batch(y, self.dim)
        mu = self._weights(y)
        idx = np.argmax(mu, axis=-1)
        top = np.take_along_axis(mu, idx[..., None], axis=-1)[..., 0]
        return np.where(top == 1.0, idx, -1)

    def value(self, y):
        y = _as_batch(y, self.dim)
        flat = y.reshape(-1, self.dim)
        out = np.zeros(flat.shape[0])
        nz = np.any(flat != 0.0, axis=-1)
        if np.any(nz):
            yy = flat[nz]
            mu = self._weights(yy)
            acc = np.zeros(yy.shape[0])
            for i in np.flatnonzero(np.any(mu > 0, axis=0)):
                sel = mu[:, i] > 0
                acc[sel] += mu[sel, i] * self.components[i].value(yy[sel])
            out[nz] = acc
        return out.reshape(y.shape[:-1])

    def _delegate(self, y, method):
        y = _as_batch(y, self.dim)
        shape = y.shape[:-1]
        flat = y.reshape(-1, self.dim)
        sole = self.sole_component(flat)
        fallback = getattr(MinkowskiNorm, method)
        tail = (self.dim,) if method == "energy_grad" else (self.dim, self.dim)
        out = np.zeros((flat.shape[0],) + tail)
        for i in np.unique(sole):
            sel = sole == i
            if i < 0:
                out[sel] = fallback(self, flat[sel])
            else:
                out[sel] = getattr(self.components[i], method)(flat[sel])
        return out.reshape(shape + tail)

    def energy_grad(self, y):
        return self._delegate(y, "energy_grad")

    def tensor(self, y):
        return self._delegate(y, "tensor")


class SingleWeight:
    """Trivial partition: one component with weight 1 everywhere."""

    def unit(self, y):
        y = np.asarray(y, dtype=float)
        return y / np.linalg.norm(y, axis=-1, keepdims=True)

    def weights(self, w):
        return np.ones(np.shape(w)[:-1] + (1,))


def glued_norm(components, partition):
    return GluedNorm(components, partition)


def fundamental_tensor(norm, y):
    """g_ij(y), checked: raises on y = 0 and on a non positive definite result."""
    y = np.asarray(y, dtype=float)
    if not np.any(y):
        raise DomainError("fundamental tensor undefined at y = 0")
    g = norm.tensor(y)
    lo = float(np.min(np.linalg.eigvalsh(g)))
    if lo <= 0.0:
        raise ConvexityError(f"fundamental tensor not positive definite (min eig {lo:.3g})", lo)
    return g


def inner_at(norm, y, u, v):
    return float(np.asarray(u) @ fundamental_tensor(norm, y) @ np.asarray(v))


def strong_convexity_margin(norm, n_samples=CONVEXITY_SAMPLES, seed=0, sampler=None):
    """Minimum eigenvalue of g over seeded unit directions (negative = failure)."""
    if n_samples < 1:
        raise InputError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    if sampler is None:
        y = rng.standard_normal((n_samples, norm.dim))
        y /= np.linalg.norm(y, axis=-1, keepdims=True)
    else:
        y = sampler(rng, n_samples)
    lo = np.inf
    for chunk in np.array_split(y, max(1, n_samples // 2000)):
        lo = min(lo, float(np.min(np.linalg.eigvalsh(norm.tensor(chunk)))))
    return lo
