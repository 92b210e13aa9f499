"""Curvature of left-invariant Finsler metrics at the identity.

A Minkowski norm ``F_e`` on the Lie algebra is read in the exponential chart
as ``F(x, y) = F_e(T(x) y)`` where ``T(x) = sum_k (-ad_x)^k / (k+1)!`` is the
left-trivialized differential of ``exp``.  From ``E = F^2`` we form the spray

    G^i = 1/4 g^{il} (E_{x^k y^l} y^k - E_{x^l})

and the Riemann curvature

    R^i_k = 2 G^i_{x^k} - y^j G^i_{x^j y^k} + 2 G^j G^i_{y^j y^k} - G^i_{y^j} G^j_{y^k}

with all derivatives of ``G`` taken by Richardson-extrapolated central
differences at ``x = 0``.  Left invariance makes the identity sufficient.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .errors import ConvexityError, DegenerateFlagError, InputError, InvalidDatumError
from .minkowski import QuadraticNorm, RandersNorm

OUTER_STEP = 1e-3
INNER_STEP = 1e-4
DEGENERATE = 1e-12


@dataclass(frozen=True, eq=False)
class InvariantMetric:
    algebra: object
    norm: object
    chart_order: int = 2

    def __post_init__(self):
        if self.norm.dim != self.algebra.dim:
            raise InputError("norm and algebra dimensions differ")
        if self.chart_order not in (1, 2, 3):
            raise InputError("chart_order must be 1, 2 or 3")


@dataclass(frozen=True)
class FlagData:
    y: np.ndarray
    v: np.ndarray

    @classmethod
    def checked(cls, algebra, y, v):
        y = np.asarray(y, dtype=float)
        v = np.asarray(v, dtype=float)
        yy, vv, yv = algebra.ip(y, y), algebra.ip(v, v), algebra.ip(y, v)
        if yy * vv - yv**2 <= DEGENERATE * yy * vv:
            raise DegenerateFlagError("flag pole and edge are linearly dependent")
        return cls(y, v)


# -- exponential chart ------------------------------------------------------


def _transport(ad_x, order):
    n = ad_x.shape[-1]
    t = np.broadcast_to(np.eye(n), ad_x.shape).copy()
    power = t.copy()
    for k in range(1, order + 1):
        power = power @ (-ad_x)
        t = t + power / factorial(k + 1)
    return t


def chart_transport(alg, x, order=2):
    """T(x) = sum_{k=0}^{order} (-ad_x)^k / (k+1)!  (batched over x)."""
    if order not in (1, 2, 3):
        raise InputError("order must be 1, 2 or 3")
    return _transport(alg.ad(x), order)


def _transport_derivative(alg, ad_x, u_ad, order):
    """Directional derivative dT_x[u] given ad_x and ad_u (batched matrices)."""
    powers = [np.broadcast_to(np.eye(ad_x.shape[-1]), ad_x.shape)]
    for _ in range(order - 1):
        powers.append(powers[-1] @ ad_x)
    out = np.zeros(np.broadcast_shapes(ad_x.shape, u_ad.shape))
    for k in range(1, order + 1):
        coef = (-1.0) ** k / factorial(k + 1)
        for j in range(k):
            out = out + coef * (powers[j] @ u_ad @ powers[k - 1 - j])
    return out


# -- spray --------------------------------------------------------------------


def _spray_exact(metric, x, y):
    alg, norm, order = metric.algebra, metric.norm, metric.chart_order
    ad_x = alg.ad(x)
    t = _transport(ad_x, order)
    z = np.einsum("...ij,...j->...i", t, y)
    grad_e = norm.energy_grad(z)
    g_e = norm.tensor(z)
    # A = dT_x[y];  B[:, l] = dT_x[e_l] y
    a = _transport_derivative(alg, ad_x, alg.ad(y), order)
    powers = [np.broadcast_to(np.eye(alg.dim), ad_x.shape)]
    for _ in range(order - 1):
        powers.append(powers[-1] @ ad_x)
    b = np.zeros_like(a)
    for k in range(1, order + 1):
        coef = (-1.0) ** k / factorial(k + 1)
        for j in range(k):
            w = np.einsum("...ij,...j->...i", powers[k - 1 - j], y)
            # [e_l, w] as columns is -ad_w
            b = b - coef * (powers[j] @ alg.ad(w))
    ay = np.einsum("...ij,...j->...i", a, y)
    rhs = (
        2.0 * np.einsum("...ji,...jk,...k->...i", t, g_e, ay)
        + np.einsum("...ji,...j->...i", a, grad_e)
        - np.einsum("...ji,...j->...i", b, grad_e)
    )
    g_x = np.einsum("...ji,...jk,...kl->...il", t, g_e, t)
    return 0.25 * np.linalg.solve(g_x, rhs[..., None])[..., 0]


def _spray_fd(metric, x, y, step=INNER_STEP):
    alg, norm, order = metric.algebra, metric.norm, metric.chart_order
    n = alg.dim

    def energy(xx, yy):
        tt = _transport(alg.ad(xx), order)
        return norm.energy(np.einsum("...ij,...j->...i", tt, yy))

    def energy_y(xx, yy):
        tt = _transport(alg.ad(xx), order)
        zz = np.einsum("...ij,...j->...i", tt, yy)
        return np.einsum("...ji,...j->...i", tt, norm.energy_grad(zz))

    steps = step * np.eye(n)
    xs = x[..., None, :]
    ys = np.broadcast_to(y[..., None, :], y.shape[:-1] + (n, n))
    e_x = (energy(xs + steps, ys) - energy(xs - steps, ys)) / (2 * step)
    # y^k E_{x^k y^l}: derivative of E_y along the x-direction y
    e_xy = (energy_y(x + step * y, y) - energy_y(x - step * y, y)) / (2 * step)
    t = _transport(alg.ad(x), order)
    z = np.einsum("...ij,...j->...i", t, y)
    g_x = np.einsum("...ji,...jk,...kl->...il", t, norm.tensor(z), t)
    return 0.25 * np.linalg.solve(g_x, (e_xy - e_x)[..., None])[..., 0]


def spray_at(metric, x, y, method="exact"):
    """Spray coefficients G^i(x, y) in the exponential chart (batched)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    if method == "exact":
        return _spray_exact(metric, x, y)
    if method == "fd":
        return _spray_fd(metric, x, y)
    raise InputError(f"unknown spray method {method!r}")


def spray_coefficients(metric, y, method="exact"):
    """G^i(y) at the identity.

    ``method="exact"`` differentiates the chart in x analytically (T is a
    polynomial in x); ``"fd"`` uses central differences with step 1e-4.
    """
    y = np.asarray(y, dtype=float)
    if not np.all(np.any(y != 0.0, axis=-1)):
        raise InputError("spray undefined at y = 0")
    try:
        return spray_at(metric, np.zeros_like(y), y, method)
    except np.linalg.LinAlgError as exc:
        raise ConvexityError("singular fundamental tensor", 0.0) from exc


# -- Riemann curvature ------------------------------------------------------


def riemann_curvature(metric, y, step=OUTER_STEP, method="exact", richardson=True):
    """R^i_k(y) at the identity.  ``y`` may be a batch of shape (m, n)."""
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    ys = np.atleast_2d(y)
    if not np.all(np.any(ys != 0.0, axis=-1)):
        raise InputError("Riemann curvature undefined at y = 0")
    m, n = ys.shape
    ynorm = np.linalg.norm(ys, axis=-1)
    yhat = ys / ynorm[:, None]
    g0 = spray_coefficients(metric, ys, method)
    g0norm = np.linalg.norm(g0, axis=-1)
    ghat = np.where(g0norm[:, None] > 0, g0 / np.where(g0norm > 0, g0norm, 1.0)[:, None], 0.0)
    eye = np.eye(n)
    sgn = np.array([1.0, -1.0])

    def derivatives(h):
        hy = h * ynorm[:, None, None, None]
        s = sgn[None, :, None, None]
        e = eye[None, None]
        # first derivatives, indexed [pole, sign, k, :]
        shape1 = (m, 2, n, n)
        x_gx = np.broadcast_to(s * h * e, shape1)
        y_gx = np.broadcast_to(ys[:, None, None, :], shape1)
        x_gy = np.zeros(shape1)
        y_gy = np.broadcast_to(ys[:, None, None, :] + s * hy * e, shape1)
        # mixed derivatives, indexed [pole, sign1, sign2, k, :]
        shape2 = (m, 2, 2, n, n)
        s1 = sgn[None, :, None, None, None]
        s2 = sgn[None, None, :, None, None]
        hy2 = hy[..., None]
        y_k = ys[:, None, None, None, :] + s2 * hy2 * e[None]
        x_m1 = np.broadcast_to(s1 * h * yhat[:, None, None, None, :], shape2)
        y_m1 = np.broadcast_to(y_k, shape2)
        x_m2 = np.zeros(shape2)
        y_m2 = np.broadcast_to(y_k + s1 * hy2 * ghat[:, None, None, None, :], shape2)
        xs = np.concatenate([a.reshape(m, -1, n) for a in (x_gx, x_gy, x_m1, x_m2)], axis=1)
        yy = np.concatenate([a.reshape(m, -1, n) for a in (y_gx, y_gy, y_m1, y_m2)], axis=1)
        gs = spray_at(metric, xs.reshape(-1, n), yy.reshape(-1, n), method).reshape(m, -1, n)
        k = 2 * n
        gx_pts = gs[:, :k].reshape(shape1)
        gy_pts = gs[:, k:2 * k].reshape(shape1)
        m1_pts = gs[:, 2 * k:4 * k].reshape(shape2)
        m2_pts = gs[:, 4 * k:].reshape(shape2)
        hy1 = ynorm[:, None, None]
        # [pole, k, i] -> derivative matrices [pole, i, k]
        gx = np.swapaxes((gx_pts[:, 0] - gx_pts[:, 1]) / (2 * h), -1, -2)
        gy = np.swapaxes((gy_pts[:, 0] - gy_pts[:, 1]) / (2 * h * hy1), -1, -2)
        w = (sgn[:, None] * sgn[None, :])[None, :, :, None, None]
        m1 = np.swapaxes(np.sum(w * m1_pts, axis=(1, 2)), -1, -2) / (4 * h * h)
        m2 = np.swapaxes(np.sum(w * m2_pts, axis=(1, 2)), -1, -2) / (4 * (h * hy1) ** 2) * g0norm[:, None, None]
        return gx, gy, m1, m2

    d1 = derivatives(step)
    if richardson:
        d2 = derivatives(0.5 * step)
        gx, gy, m1, m2 = ((4.0 * b - a) / 3.0 for a, b in zip(d1, d2))
    else:
        gx, gy, m1, m2 = d1
    r = 2.0 * gx - m1 + 2.0 * m2 - gy @ gy
    return r[0] if single else r


# -- flag curvature ---------------------------------------------------------


def flag_curvatures(metric, ys, vs, method="exact", riemann=None):
    """Batched flag curvature K(e, y, y ^ v); degenerate rows raise."""
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    vs = np.atleast_2d(np.asarray(vs, dtype=float))
    r = riemann_curvature(metric, ys, method=method) if riemann is None else riemann
    g = metric.norm.tensor(ys)
    if np.min(np.linalg.eigvalsh(g)) <= 0:
        raise ConvexityError("fundamental tensor not positive definite at a pole", np.min(np.linalg.eigvalsh(g)))
    gy = np.einsum("mij,mj->mi", g, ys)
    gv = np.einsum("mij,mj->mi", g, vs)
    yy = np.einsum("mi,mi->m", ys, gy)
    vv = np.einsum("mi,mi->m", vs, gv)
    yv = np.einsum("mi,mi->m", ys, gv)
    den = yy * vv - yv**2
    if np.any(den <= DEGENERATE * yy * vv):
        raise DegenerateFlagError("flag pole and edge are linearly dependent")
    num = np.einsum("mi,mij,mj->m", vs, np.einsum("mij,mjk->mik", g, r), vs)
    return num / den


def flag_curvature(metric, flag, method="exact"):
    return float(flag_curvatures(metric, flag.y[None], flag.v[None], method)[0])


def biinvariant_sectional_oracle(alg, u, v):
    """1/4 |[u, v]|^2 / area^2 for the bi-invariant metric."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    uu, vv, uv = alg.ip(u, u), alg.ip(v, v), alg.ip(u, v)
    area2 = uu * vv - uv**2
    if np.any(area2 <= DEGENERATE * uu * vv):
        raise DegenerateFlagError("u and v are linearly dependent")
    br = alg.bracket(u, v)
    return 0.25 * alg.ip(br, br) / area2


# -- Killing navigation correspondence --------------------------------------


def _is_biinvariant(metric):
    norm = metric.norm
    if not isinstance(norm, QuadraticNorm):
        return False
    ads = np.array([metric.algebra.ad(e) for e in np.eye(metric.algebra.dim)])
    sym = np.einsum("aji,jk->aik", ads, norm.q) + np.einsum("ij,ajk->aik", norm.q, ads)
    return float(np.max(np.abs(sym))) <= 1e-10


def correspondence_samples(metric, wind, n_samples, seed):
    """Return (y, v, y_tilde, K^F, K^F~) over seeded F-orthogonal flags."""
    if not _is_biinvariant(metric):
        raise InputError("correspondence check needs a bi-invariant quadratic norm")
    wind = np.asarray(wind, dtype=float)
    norm = metric.norm
    if float(norm(wind)) >= 1.0:
        raise InvalidDatumError(f"F(W) = {float(norm(wind)):.6g} >= 1")
    n = metric.algebra.dim
    ys, vs = [], []
    for i in range(n_samples):
        rng = np.random.default_rng([seed, i])
        while True:
            y, v = rng.standard_normal((2, n))
            g = norm.tensor(y)
            v = v - (y @ g @ v) / (y @ g @ y) * y
            yy, vv = y @ g @ y, v @ g @ v
            if vv > 1e-6 * yy:
                break
        ys.append(y)
        vs.append(v)
    ys, vs = np.array(ys), np.array(vs)
    yt = ys + norm(ys)[:, None] * wind
    navigated = InvariantMetric(metric.algebra, RandersNorm(norm.q, wind), metric.chart_order)
    k_f = flag_curvatures(metric, ys, vs)
    k_t = flag_curvatures(navigated, yt, vs)
    return ys, vs, yt, k_f, k_t


def navigation_correspondence_residual(metric, wind, n_samples=100, seed=0):
    """max |K^F(e, y, y^v) - K^F~(e, y~, y~^v)| with <v, y>_y = 0."""
    *_, k_f, k_t = correspondence_samples(metric, wind, n_samples, seed)
    return float(np.max(np.abs(k_f - k_t))) if n_samples else 0.0
