"""Flag-wise positively curved left-invariant metrics by Killing navigation and gluing.

Pipeline: ``build_covering`` -> ``select_delta`` -> ``build_regions`` ->
``assemble_glued_metric`` -> ``verify_fp``.  All geometry lives on the
bi-invariant unit sphere of the Lie algebra and uses chordal distances.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CoveringFailure,
    DeltaSearchFailure,
    EpsilonTooLarge,
    HypothesisViolation,
    InputError,
    RegionAssignmentError,
    SearchFailure,
)
from .lie_algebra import CartanData
from .invariant_metric import InvariantMetric, flag_curvatures
from .minkowski import GluedNorm, RandersNorm, strong_convexity_margin

MAX_CHART_RADIUS = 0.5
WIND_TRIES = 8
OVERLAP = 0.02
COVER_SAMPLES = 10_000
SCAN_POINTS = 512
POLE_BATCH = 1024


def smoothstep(t):
    """C^2 step 6t^5 - 15t^4 + 10t^3, clamped to [0, 1]."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def _signed_boundary_distance(cosines, radius):
    """Chordal distance from unit w to the sphere {|w - u| = r}, positive inside.

    ``cosines`` holds <w, u>; the nearest boundary point lies on the great
    circle through u and w.
    """
    alpha = np.arccos(np.clip(cosines, -1.0, 1.0))
    beta = 2.0 * np.arcsin(radius / 2.0)
    return 2.0 * np.sin((beta - alpha) / 2.0)


@dataclass(frozen=True, eq=False)
class Chart:
    center: np.ndarray
    radius: float
    cartan: np.ndarray
    v: np.ndarray
    margin: float

    def to_dict(self):
        return {
            "center": self.center.tolist(),
            "radius": self.radius,
            "cartan_basis": self.cartan.T.tolist(),
            "v": self.v.tolist(),
            "cartan_distance": self.margin,
        }


@dataclass(eq=False)
class SphereCovering:
    algebra: object
    charts: list
    u0: np.ndarray | None = None
    r0: float = 0.0
    seed: int = 0
    _centers: np.ndarray = field(init=False, repr=False)
    _radii: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.refresh()

    def refresh(self):
        n = self.algebra.dim
        self._centers = np.array([c.center for c in self.charts]).reshape(-1, n)
        self._radii = np.array([c.radius for c in self.charts])

    @property
    def has_caps(self):
        return self.u0 is not None

    def cosines(self, w):
        """<w, u_i> for all chart centers, shape (..., m)."""
        return w @ self.algebra.inner_product @ self._centers.T

    def chart_distances(self, w):
        return np.sqrt(np.maximum(2.0 - 2.0 * self.cosines(w), 0.0))

    def cap_distances(self, w):
        """Chordal distances to +u0 and -u0, shape (..., 2)."""
        c = w @ self.algebra.inner_product @ self.u0
        return np.stack([np.sqrt(np.maximum(2 - 2 * c, 0)), np.sqrt(np.maximum(2 + 2 * c, 0))], -1)

    def signed_distances(self, w):
        """Signed distances to every chart boundary, shape (..., m)."""
        return _signed_boundary_distance(self.cosines(w), self._radii)

    def boundary_clearance(self, w):
        """Distance to the union S' of chart and cap boundaries."""
        d = np.min(np.abs(self.signed_distances(w)), axis=-1, initial=np.inf)
        if self.has_caps:
            c = w @ self.algebra.inner_product @ self.u0
            caps = _signed_boundary_distance(np.stack([c, -c], -1), self.r0)
            d = np.minimum(d, np.min(np.abs(caps), axis=-1))
        return d

    def in_closed_caps(self, w):
        if not self.has_caps:
            return np.zeros(np.shape(w)[:-1], dtype=bool)
        return np.any(self.cap_distances(w) <= self.r0, axis=-1)

    def covered(self, w, margin=0.0):
        """Inside some open chart or cap, at least ``margin`` from its boundary."""
        if self.charts:
            inside = np.any(self.signed_distances(w) > margin, axis=-1)
        else:
            inside = np.zeros(np.shape(w)[:-1], bool)
        if self.has_caps:
            c = w @ self.algebra.inner_product @ self.u0
            caps = _signed_boundary_distance(np.stack([c, -c], -1), self.r0)
            inside |= np.any(caps > margin, axis=-1)
        return inside

    def first_chart(self, w):
        """Lowest chart index whose open chart contains w, else -1."""
        inside = self.chart_distances(w) < self._radii
        idx = np.argmax(inside, axis=-1)
        return np.where(np.any(inside, axis=-1), idx, -1)

    def to_dict(self):
        return {
            "n_charts": len(self.charts),
            "caps": None if self.u0 is None else {"u0": self.u0.tolist(), "r0": self.r0},
            "seed": self.seed,
            "charts": [c.to_dict() for c in self.charts],
        }


def _check_hypotheses(alg):
    center = alg.center().shape[1]
    if center == alg.dim:
        raise HypothesisViolation("the algebra is abelian")
    if center > 1:
        raise HypothesisViolation(f"center has dimension {center} > 1")
    return center


def _reuse_wind(alg, u, winds, reuse_margin):
    """Best previously used Cartan data whose distance margin at u is large enough."""
    best = None
    for data in winds:
        proj = alg.norm(alg.project(data.basis, u))
        margin = float(np.sqrt(max(1.0 - proj**2, 0.0)))
        if margin >= reuse_margin and (best is None or margin > best.margin):
            best = CartanData(data.basis, data.v, margin)
    return best


def _fresh_wind(alg, u, rng, tries=WIND_TRIES):
    """Cartan data with the largest distance margin among a few seeded searches."""
    best = None
    for _ in range(tries):
        try:
            data = alg.cartan_avoiding(u, seed=int(rng.integers(2**63)))
        except SearchFailure as exc:
            if best is None and _ == tries - 1:
                raise CoveringFailure(str(exc)) from exc
            continue
        if best is None or data.margin > best.margin:
            best = data
    return best


def build_covering(alg, r0=0.3, target_charts=64, seed=0, samples=COVER_SAMPLES, reuse_margin=0.6,
                   confirm=10, overlap=OVERLAP):
    """Greedy seeded covering of the unit sphere by Cartan-avoiding charts.

    Winds already attached to earlier charts are reused when their Cartan
    subalgebra stays at least ``reuse_margin`` away from the new center, so
    neighbouring charts often carry identical metrics.  ``reuse_margin=None``
    disables reuse.  The covering is accepted once ``confirm`` consecutive
    fresh batches of ``samples`` points are fully covered, each point at least
    ``overlap`` inside some chart or cap; the slack closes thin gaps where
    chart boundaries meet.
    """
    center = _check_hypotheses(alg)
    u0 = alg.center_unit() if center == 1 else None
    cover = SphereCovering(alg, [], u0=u0, r0=r0 if center == 1 else 0.0, seed=seed)
    rng = np.random.default_rng(seed)
    limit = 16 * target_charts
    pool = alg.random_unit(rng, samples)
    mask = ~cover.covered(pool, overlap)
    winds = []
    clean = 0
    if reuse_margin is None:
        reuse_margin = np.inf
    while True:
        if not np.any(mask):
            clean += 1
            if clean > confirm:
                return cover
            pool = alg.random_unit(rng, samples)
            mask = ~cover.covered(pool, overlap)
            continue
        clean = 0
        if len(cover.charts) >= limit:
            raise CoveringFailure(f"sphere not covered by {limit} charts")
        u = pool[np.argmax(mask)]
        data = _reuse_wind(alg, u, winds, reuse_margin)
        if data is None:
            data = _fresh_wind(alg, u, rng)
            winds.append(data)
        radius = min(0.5 * data.margin, MAX_CHART_RADIUS)
        cover.charts.append(Chart(u, radius, data.basis, data.v, data.margin))
        cover.refresh()
        mask &= _signed_boundary_distance(pool @ alg.inner_product @ u, radius) <= overlap


def check_covering(cover, n_points=1000, samples=COVER_SAMPLES, seed=1):
    """Sampled covering invariants: Cartan clearance per chart and coverage."""
    alg = cover.algebra
    rng = np.random.default_rng(seed)
    clearances = []
    for chart in cover.charts:
        w = _sample_cap(alg, rng, chart.center, chart.radius, n_points)
        proj = (w @ alg.inner_product @ chart.cartan) @ chart.cartan.T
        clearances.append(float(np.min(alg.norm(w - proj))))
    uncovered = int(np.sum(~cover.covered(alg.random_unit(rng, samples))))
    return {
        "min_cartan_clearance": min(clearances) if clearances else np.inf,
        "max_radius": float(np.max(cover._radii)) if cover.charts else 0.0,
        "uncovered": uncovered,
    }


def _sample_cap(alg, rng, center, radius, n):
    """Seeded points of the closed chart, a quarter of them on its boundary."""
    d = alg.random_unit(rng, n)
    d = d - (d @ alg.inner_product @ center)[:, None] * center
    d /= alg.norm(d)[:, None]
    top = 2.0 * np.arcsin(radius / 2.0)
    phi = top * np.sqrt(rng.random(n))
    phi[: n // 4] = top
    w = np.cos(phi)[:, None] * center + np.sin(phi)[:, None] * d
    w[-1] = center
    return w


# -- big circles ---------------------------------------------------------------


def plane_basis(alg, a, b):
    """Bi-orthonormal basis of span(a, b)."""
    basis = alg.orthonormalize(np.stack([a, b], axis=1))
    return basis[:, 0], basis[:, 1]


def big_circle(a, b, n_points=SCAN_POINTS):
    theta = 2.0 * np.pi * np.arange(n_points) / n_points
    return theta, np.cos(theta)[:, None] * a + np.sin(theta)[:, None] * b


def random_planes(alg, n_planes, seed):
    planes = []
    for i in range(n_planes):
        g = alg.random_unit(np.random.default_rng([seed, i]), 2)
        planes.append(plane_basis(alg, g[0], g[1]))
    return planes


def regionable(cover, w, delta):
    """Points outside the delta-thickened boundaries and the closed caps."""
    return (cover.boundary_clearance(w) > delta) & ~cover.in_closed_caps(w)


def verify_delta(cover, delta, n_planes=1000, seed=0, n_points=SCAN_POINTS):
    """Every sampled big circle meets the complement of S'_delta and the caps."""
    if delta <= 0:
        raise InputError("delta must be positive")
    planes = random_planes(cover.algebra, n_planes, seed)
    for start in range(0, n_planes, 64):
        chunk = planes[start:start + 64]
        if not chunk:
            break
        pts = np.stack([big_circle(a, b, n_points)[1] for a, b in chunk])
        ok = regionable(cover, pts, delta) & (cover.first_chart(pts) >= 0)
        if not np.all(np.any(ok, axis=-1)):
            return False
    return True


def select_delta(cover, seed=0, n_planes=1000, halvings=20):
    delta = float(np.min(cover._radii)) / 4.0
    for _ in range(halvings + 1):
        if verify_delta(cover, delta, n_planes, seed):
            return delta
        delta *= 0.5
    raise DeltaSearchFailure(f"no delta passed after {halvings} halvings")


# -- regions and partition of unity ------------------------------------------------


@dataclass(frozen=True)
class Region:
    chart: int
    representative: np.ndarray
    clearance: float
    n_samples: int

    def to_dict(self):
        return {
            "chart": self.chart,
            "representative": self.representative.tolist(),
            "clearance": self.clearance,
            "n_samples": self.n_samples,
        }


@dataclass(eq=False)
class RegionPartition:
    """Regions V_i (grouped by owning chart) and stick-breaking weights.

    A point outside S'_delta and the closed caps belongs to the region owned
    by the lowest-index chart containing it.  Weights live on charts:
    ``a_k = s((rho_k / delta + 1) / 2)`` with ``rho_k`` the signed distance to
    the boundary of chart k, ``mu_k = a_k prod_{j<k} (1 - a_j)``, and the
    leftover ``prod_k (1 - a_k)`` (supported inside S'_delta and the caps)
    is added to the first region's chart.
    """

    cover: SphereCovering
    delta: float
    regions: list
    seed: int = 0

    @property
    def n_components(self):
        return len(self.cover.charts)

    def unit(self, y):
        return y / self.cover.algebra.norm(y)[..., None]

    def weights(self, w):
        rho = self.cover.signed_distances(w)
        a = smoothstep(0.5 * (rho / self.delta + 1.0))
        rest = np.cumprod(1.0 - a, axis=-1)
        before = np.concatenate([np.ones(rest.shape[:-1] + (1,)), rest[..., :-1]], axis=-1)
        mu = a * before
        mu[..., self.regions[0].chart] += rest[..., -1]
        return mu

    def region_of(self, w):
        """Index into ``regions`` of each unit vector, -1 outside all regions."""
        owner = np.where(regionable(self.cover, w, self.delta), self.cover.first_chart(w), -1)
        lookup = np.full(self.n_components + 1, -1)
        for i, r in enumerate(self.regions):
            lookup[r.chart] = i
        return lookup[owner]

    def to_dict(self):
        return {"delta": self.delta, "seed": self.seed, "regions": [r.to_dict() for r in self.regions]}


def build_regions(cover, delta, resolution=20_000, seed=0):
    alg = cover.algebra
    w = alg.random_unit(np.random.default_rng(seed), resolution)
    keep = regionable(cover, w, delta)
    owner = cover.first_chart(w)
    if np.any(keep & (owner < 0)):
        raise RegionAssignmentError("a region point lies in no chart; shrink delta")
    clearance = cover.boundary_clearance(w)
    regions = []
    for chart in np.unique(owner[keep]):
        sel = np.flatnonzero(keep & (owner == chart))
        best = sel[np.argmax(clearance[sel])]
        regions.append(Region(int(chart), w[best], float(clearance[best]), int(sel.size)))
    if not regions:
        raise RegionAssignmentError("no region found; shrink delta")
    return RegionPartition(cover, delta, regions, seed)


# -- assembled metric -----------------------------------------------------------


@dataclass(eq=False)
class AssembledMetric:
    metric: InvariantMetric
    components: list
    partition: RegionPartition
    epsilon: float
    convexity_margin: float | None

    def component_metric(self, chart):
        return InvariantMetric(self.metric.algebra, self.components[chart], self.metric.chart_order)


def chart_norms(cover, epsilon):
    q = cover.algebra.inner_product
    return [RandersNorm(q, epsilon * c.v / cover.algebra.norm(c.v)) for c in cover.charts]


def assemble_glued_metric(alg, cover, partition, epsilon, convexity_samples=10_000, seed=0):
    """Glue the per-chart navigation metrics; checks strong convexity unless samples == 0."""
    if epsilon < 0:
        raise InputError("epsilon must be >= 0")
    components = chart_norms(cover, epsilon)
    glued = GluedNorm(components, partition, seed=seed)
    margin = None
    if convexity_samples:
        margin = strong_convexity_margin(
            glued, convexity_samples, seed, sampler=lambda rng, n: alg.random_unit(rng, n)
        )
        if margin <= 0:
            raise EpsilonTooLarge(f"glued metric not strongly convex at epsilon={epsilon} (margin {margin:.3g})", margin)
    return AssembledMetric(InvariantMetric(alg, glued), components, partition, float(epsilon), margin)


# -- (FP) verification -----------------------------------------------------------

def scan_plane(metric, a, b, pole_resolution=64):
    """Flag curvature of span(a, b) at evenly spaced poles of its big circle.

    Every pole is evaluated with ``metric`` directly (no region logic);
    returns (theta, K).
    """
    a, b = plane_basis(metric.algebra, np.asarray(a, float), np.asarray(b, float))
    theta, poles = big_circle(a, b, pole_resolution)
    edges = -np.sin(theta)[:, None] * a + np.cos(theta)[:, None] * b
    return theta, flag_curvatures(metric, poles, edges)


def adversarial_planes(cover):
    alg = cover.algebra
    planes = []
    for chart in cover.charts:
        t = chart.cartan
        for i in range(t.shape[1]):
            for j in range(i + 1, t.shape[1]):
                planes.append(plane_basis(alg, t[:, i], t[:, j]))
    if cover.has_caps:
        if "e3" in alg.labels:
            w = alg.basis("e3")
        else:
            w = np.eye(alg.dim)[np.argmin(np.abs(cover.u0))]
        planes.append(plane_basis(alg, w, cover.u0))
    return _unique_planes(alg, planes)


def _unique_planes(alg, planes, tol=1e-9):
    """Drop repeated planes (reused winds share their Cartan subalgebra)."""
    kept, projectors = [], []
    for a, b in planes:
        p = np.outer(a, a) + np.outer(b, b)
        if all(np.max(np.abs(p - q)) > tol for q in projectors):
            kept.append((a, b))
            projectors.append(p)
    return kept


@dataclass
class PlaneRecord:
    index: int
    kind: str
    basis: tuple
    best_pole: np.ndarray | None
    best_k: float
    region: int
    n_poles: int
    theta: np.ndarray
    k_values: np.ndarray

    @property
    def passed(self):
        return self.best_k > 0.0

    def to_dict(self):
        return {
            "index": self.index,
            "kind": self.kind,
            "basis": [self.basis[0].tolist(), self.basis[1].tolist()],
            "best_pole": None if self.best_pole is None else self.best_pole.tolist(),
            "best_k": self.best_k,
            "region": self.region,
            "n_poles": self.n_poles,
            "passed": self.passed,
        }


@dataclass
class FpReport:
    records: list
    epsilon: float
    delta: float
    seed: int
    pole_resolution: int

    @property
    def failures(self):
        return sum(not r.passed for r in self.records)

    @property
    def min_best_k(self):
        return min((r.best_k for r in self.records), default=np.inf)

    @property
    def passed(self):
        return self.failures == 0 and bool(self.records)

    def summary(self):
        return {
            "n_planes": len(self.records),
            "n_forced": sum(r.kind == "forced" for r in self.records),
            "failures": self.failures,
            "min_best_k": self.min_best_k,
            "passed": self.passed,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "seed": self.seed,
            "pole_resolution": self.pole_resolution,
        }

    def to_dict(self):
        return {"summary": self.summary(), "planes": [r.to_dict() for r in self.records]}

    def csv_rows(self):
        for r in self.records:
            for t, k in zip(r.theta, r.k_values):
                yield r.index, float(t), float(k)


def _threads():
    try:
        return max(1, int(os.environ.get("FLAGCURV_THREADS", "1")))
    except ValueError:
        return 1


def verify_fp(bundle, n_planes=1000, pole_resolution=64, seed=0, scan_points=SCAN_POINTS,
              extra_planes=()):
    """Scan poles on every plane's big circle inside the regions.

    Poles inside region V_i are evaluated with the owning chart metric alone,
    where the glued norm coincides with it.  Poles in blending zones are
    skipped.  ``bundle`` is an ``AssembledMetric``.
    """
    partition = bundle.partition
    alg = bundle.metric.algebra
    planes = [("forced", p) for p in adversarial_planes(partition.cover)]
    planes += [("forced", plane_basis(alg, a, b)) for a, b in extra_planes]
    planes += [("random", p) for p in random_planes(alg, n_planes, seed)]

    jobs = []  # (plane index, theta, pole, edge, owner chart, region)
    for pi, (_, (a, b)) in enumerate(planes):
        theta, pts = big_circle(a, b, scan_points)
        reg = partition.region_of(pts)
        idx = np.flatnonzero(reg >= 0)
        if idx.size > pole_resolution:
            idx = idx[np.linspace(0, idx.size - 1, pole_resolution).round().astype(int)]
        for j in idx:
            edge = -np.sin(theta[j]) * a + np.cos(theta[j]) * b
            jobs.append((pi, theta[j], pts[j], edge, partition.regions[reg[j]].chart, reg[j]))

    by_owner = {}
    for job_id, job in enumerate(jobs):
        by_owner.setdefault(job[4], []).append(job_id)
    k_all = np.full(len(jobs), np.nan)

    def run(owner):
        ids = by_owner[owner]
        metric = bundle.component_metric(owner)
        out = []
        for start in range(0, len(ids), POLE_BATCH):
            chunk = ids[start:start + POLE_BATCH]
            ys = np.array([jobs[i][2] for i in chunk])
            vs = np.array([jobs[i][3] for i in chunk])
            out.append(flag_curvatures(metric, ys, vs))
        return owner, np.concatenate(out)

    owners = sorted(by_owner)
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        for owner, ks in pool.map(run, owners):
            k_all[by_owner[owner]] = ks

    records = []
    per_plane = {}
    for job_id, job in enumerate(jobs):
        per_plane.setdefault(job[0], []).append(job_id)
    for pi, (kind, basis) in enumerate(planes):
        ids = per_plane.get(pi, [])
        if ids:
            ks = k_all[ids]
            best = ids[int(np.argmax(ks))]
            rec = PlaneRecord(pi, kind, basis, jobs[best][2], float(np.max(ks)), int(jobs[best][5]),
                              len(ids), np.array([jobs[i][1] for i in ids]), ks)
        else:
            rec = PlaneRecord(pi, kind, basis, None, -np.inf, -1, 0, np.array([]), np.array([]))
        records.append(rec)
    return FpReport(records, bundle.epsilon, partition.delta, seed, pole_resolution)


def select_epsilon(alg, cover, partition, start=0.2, halvings=12, n_planes=1000,
                   pole_resolution=64, seed=0, convexity_samples=10_000):
    """Halve epsilon until the glue is strongly convex and (FP) verifies."""
    eps = start
    last = None
    for _ in range(halvings + 1):
        try:
            bundle = assemble_glued_metric(alg, cover, partition, eps, convexity_samples, seed)
        except EpsilonTooLarge as exc:
            last = exc
            eps *= 0.5
            continue
        report = verify_fp(bundle, n_planes, pole_resolution, seed)
        if report.passed:
            return bundle, report
        eps *= 0.5
    raise EpsilonTooLarge(f"no epsilon down to {eps * 2:.3g} passed", last.margin if last else 0.0)


def run_pipeline(alg, epsilon=0.1, r0=0.3, target_charts=64, seed=0, delta=None, *, n_planes=1000,
                 pole_resolution=64, verify=False, convexity_samples=10_000, progress=None):
    """covering -> delta -> regions -> assemble [-> verify_fp], recording provenance.

    ``epsilon=None`` runs ``select_epsilon``.  A convexity failure at a fixed
    epsilon is recorded (``progress["convexity"]``) and the scan still runs on
    the unchecked glue, so the report shows both halves of the certificate.
    """
    info = {} if progress is None else progress
    out = {}
    info["stage"] = "covering"
    cover = build_covering(alg, r0, target_charts, seed)
    info["covering"] = cover.to_dict()
    info["stage"] = "delta"
    if delta is None:
        delta = select_delta(cover, seed)
    elif not verify_delta(cover, delta, 1000, seed):
        raise DeltaSearchFailure(f"delta override {delta} fails the big-circle check")
    info["delta"] = delta
    info["stage"] = "regions"
    partition = build_regions(cover, delta, seed=seed)
    info["partition"] = partition.to_dict()
    info["stage"] = "assemble"
    report = None
    if epsilon is None:
        bundle, report = select_epsilon(alg, cover, partition, n_planes=n_planes,
                                        pole_resolution=pole_resolution, seed=seed,
                                        convexity_samples=convexity_samples)
        info["epsilon_search"] = True
    else:
        try:
            bundle = assemble_glued_metric(alg, cover, partition, epsilon, convexity_samples, seed)
        except EpsilonTooLarge as exc:
            info["convexity"] = {"margin": exc.margin, "passed": False, "samples": convexity_samples}
            bundle = assemble_glued_metric(alg, cover, partition, epsilon, 0, seed)
    info["epsilon"] = bundle.epsilon
    if "convexity" not in info:
        info["convexity"] = {"margin": bundle.convexity_margin, "passed": True, "samples": convexity_samples}
    out.update(cover=cover, partition=partition, bundle=bundle)
    if verify:
        info["stage"] = "verify"
        if report is None:
            report = verify_fp(bundle, n_planes, pole_resolution, seed)
        info["fp"] = report.to_dict()
        out["report"] = report
    info["stage"] = "done"
    return out
