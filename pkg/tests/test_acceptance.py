"""Acceptance criteria 1-8, each at its stated tolerance.

Every test records a verdict line (printed in the terminal summary and, when
run with ``-s``, immediately) before asserting, so failures still report the
measured numbers.
"""

import json
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from flagcurv import construction as con
from flagcurv.cli import main
from flagcurv.coset_checks import find_transverse, flat_plane_test, reductive_decomposition
from flagcurv.errors import EuclideanFactorError
from flagcurv.invariant_metric import (
    InvariantMetric,
    biinvariant_sectional_oracle,
    flag_curvatures,
    navigation_correspondence_residual,
)
from flagcurv.lie_algebra import abelian, su2, su2_plus_r, su2_plus_su2
from flagcurv.minkowski import NavigationNorm, QuadraticNorm, RandersNorm, zermelo_randers_closed_form


def record(key, passed, detail):
    ACCEPTANCE[key] = (bool(passed), detail)
    print(f"criterion {key}: {'PASS' if passed else 'FAIL'} - {detail}")


def bi(alg):
    return InvariantMetric(alg, QuadraticNorm(alg.inner_product))


def flags(alg, n, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, alg.dim)), rng.standard_normal((n, alg.dim))


def test_criterion_1_oracle_equivalence():
    start = time.perf_counter()
    worst = {}
    for alg in (su2(), su2_plus_r(), su2_plus_su2()):
        ys, vs = flags(alg, 100, 1)
        k = flag_curvatures(bi(alg), ys, vs)
        worst[alg.name] = float(np.max(np.abs(k - biinvariant_sectional_oracle(alg, ys, vs))))
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) <= 1e-3 and elapsed < 60
    record(1, ok, f"max |K - oracle| per algebra {worst} (tol 1e-3), {elapsed:.2f}s (< 60s)")
    assert ok


def test_criterion_2_constant_curvature():
    ys, vs = flags(su2(), 100, 2)
    k = flag_curvatures(bi(su2()), ys, vs)
    ys, vs = flags(abelian(3), 100, 2)
    flat = flag_curvatures(bi(abelian(3)), ys, vs)
    dev, zero = float(np.max(np.abs(k - 0.25))), float(np.max(np.abs(flat)))
    ok = dev <= 1e-3 and zero <= 1e-6
    record(2, ok, f"su2 max |K - 0.25| = {dev:.2e} (tol 1e-3); abelian max |K| = {zero:.2e} (tol 1e-6)")
    assert ok


def test_criterion_3_navigation_correspondence():
    g = su2()
    start = time.perf_counter()
    residual = navigation_correspondence_residual(bi(g), 0.1 * g.basis("e3"), n_samples=100, seed=0)
    elapsed = time.perf_counter() - start
    ok = residual <= 1e-3 and elapsed < 120
    record(3, ok, f"max residual {residual:.2e} over 100 flag pairs (tol 1e-3), {elapsed:.2f}s (< 120s)")
    assert ok


def test_criterion_4_solver_equivalence():
    worst = 0.0
    for seed in (0, 1, 2):
        rng = np.random.default_rng([4, seed])
        a = rng.standard_normal((4, 4))
        h = a @ a.T + 4 * np.eye(4)
        w = rng.standard_normal(4)
        w *= rng.uniform(0.1, 0.9) / np.sqrt(w @ h @ w)
        u = rng.standard_normal((1000, 4))
        closed = zermelo_randers_closed_form(h, w)(u)
        implicit = NavigationNorm(QuadraticNorm(h), w)(u)
        worst = max(worst, float(np.max(np.abs(closed - implicit) / np.abs(implicit))))
    ok = worst <= 1e-10
    record(4, ok, f"max relative gap {worst:.2e} over 3 winds x 1000 samples (tol 1e-10)")
    assert ok


def test_criterion_5_failure_plane_witness():
    alg = su2_plus_r()
    wind = 0.1 * (alg.basis("e3") + alg.basis("u0")) / np.sqrt(2)
    metric = InvariantMetric(alg, RandersNorm(alg.inner_product, wind))
    _, k_cartan = con.scan_plane(metric, alg.basis("e3"), alg.basis("u0"), 64)
    best = [float(np.max(con.scan_plane(metric, a, b, 64)[1])) for a, b in con.random_planes(alg, 1000, 5)]
    cartan_best, generic_worst = float(np.max(k_cartan)), min(best)
    ok = cartan_best <= 1e-3 and generic_worst > 1e-3
    record(5, ok, f"Cartan plane best K = {cartan_best:.2e} (<= 1e-3); "
                  f"min best K over 1000 generic planes = {generic_worst:.2e} (> 1e-3)")
    assert ok


def _verify_fp(tmp_path, algebra, seed):
    out = tmp_path / f"{algebra}.json"
    start = time.perf_counter()
    code = main(["verify-fp", "--algebra", algebra, "--epsilon", "0.1", "--seed", str(seed),
                 "--planes", "1000", "--poles", "64", "--out", str(out)])
    return code, json.loads(out.read_text()), time.perf_counter() - start


@pytest.mark.slow
def test_criterion_6_end_to_end(tmp_path):
    details, ok, total = [], True, 0.0
    for algebra, seed in (("su2", 7), ("su2xR", 7)):
        code, report, elapsed = _verify_fp(tmp_path, algebra, seed)
        total += elapsed
        summary = report["fp"]["summary"]
        planes = report["fp"]["planes"]
        fp_ok = summary["passed"] and all(p["best_k"] > 0 for p in planes)
        conv = report["convexity"]
        if algebra == "su2xR":
            target = {"e3", "u0"}
            forced = [p for p in planes if p["kind"] == "forced"]
            center_plane = [p for p in forced if _spans(p["basis"], target)]
            fp_ok = fp_ok and bool(center_plane) and center_plane[0]["best_k"] > 0
        ok = ok and code == 0 and fp_ok and conv["passed"]
        details.append(f"{algebra}: exit {code}, {summary['n_planes']} planes ({summary['n_forced']} forced), "
                       f"failures {summary['failures']}, min best K {summary['min_best_k']:.2e}, "
                       f"convexity margin {conv['margin']:.3g} over {conv['samples']} directions")
    ok = ok and total < 1800
    record(6, ok, "; ".join(details) + f"; {total:.0f}s (< 1800s)")
    assert ok


def _spans(basis, labels):
    a, b = np.asarray(basis)
    p = np.outer(a, a) + np.outer(b, b)
    alg = su2_plus_r()
    q = sum(np.outer(alg.basis(x), alg.basis(x)) for x in labels)
    return np.allclose(p, q, atol=1e-9)


@pytest.mark.slow
def test_criterion_7_partition_of_unity():
    alg = su2_plus_r()
    cover = con.build_covering(alg, 0.3, seed=7)
    delta = con.select_delta(cover, seed=7)
    part = con.build_regions(cover, delta, seed=7)
    w = alg.random_unit(np.random.default_rng(77), 1000)
    sum_dev = float(np.max(np.abs(part.weights(w).sum(-1) - 1)))
    reps = np.array([r.representative for r in part.regions])
    mu = part.weights(reps)
    expected = np.zeros_like(mu)
    expected[np.arange(len(part.regions)), [r.chart for r in part.regions]] = 1.0
    kron = bool(np.array_equal(mu, expected))
    fresh = con.verify_delta(cover, delta, 1000, seed=12345)
    ok = sum_dev <= 1e-10 and kron and fresh
    record(7, ok, f"max |sum mu - 1| = {sum_dev:.1e} (tol 1e-10); mu_i = delta_ij at {len(reps)} "
                  f"representatives: {kron}; delta = {delta:.4g} passes fresh-seed check: {fresh}")
    assert ok


def test_criterion_8_coset_checks():
    g = su2()
    space = reductive_decomposition(g, g.basis("e3")[:, None])
    v1 = find_transverse(space, g.basis("e1"))
    gap = float(min(np.max(np.abs(v1 - g.basis("e2"))), np.max(np.abs(v1 + g.basis("e2")))))
    h = su2_plus_r()
    hs = reductive_decomposition(h)
    try:
        find_transverse(hs, h.basis("u0"))
        euclid = False
    except EuclideanFactorError:
        euclid = True
    rng = np.random.default_rng(8)
    agree = 0
    for i in range(100):
        u, v = rng.standard_normal((2, 4))
        if i % 3 == 0:  # include commuting planes so both verdicts occur
            v = rng.standard_normal() * u + rng.standard_normal() * h.basis("u0")
        agree += flat_plane_test(hs, (0.0, u), (0.0, v)) == (biinvariant_sectional_oracle(h, u, v) <= 1e-6)
    ok = gap <= 1e-10 and euclid and agree == 100
    record(8, ok, f"v1 = +-e2 within {gap:.1e} (tol 1e-10); u0 raises euclidean-factor error: {euclid}; "
                  f"flat-plane verdicts agree with oracle on {agree}/100 planes")
    assert ok
