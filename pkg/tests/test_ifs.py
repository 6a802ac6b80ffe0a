import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symblender.boxes import Box, BoxSet, hausdorff, hausdorff_interval, interval_set
from symblender.fiber import FiberMap, SkewProduct
from symblender.ifs import (
    IFS, blending_region_check, covering_check, hutchinson_attractor, hutchinson_step, lebesgue_lower_bound,
    orbit, translation_family,
)

D = Box([0.0], [1.0])
WIDE = Box([-0.5], [1.5])


def halves(dom=D):
    return IFS([FiberMap.affine(0.5, 0.0), FiberMap.affine(0.5, 0.5)], dom)


def pair(dom=WIDE):
    return IFS([FiberMap.affine(0.6, -0.05), FiberMap.affine(0.6, 0.45)], dom)


def cantor_cover(depth):
    iv = [(0.0, 1.0)]
    for _ in range(depth):
        iv = [(a, a + (b - a) / 3) for a, b in iv] + [(b - (b - a) / 3, b) for a, b in iv]
    return iv


def test_orbit_examples():
    one = IFS([FiberMap.affine(0.5, 0.0)], Box([0.0], [2.0]))
    assert sorted(orbit(one, [1.0], 3).ravel().tolist()) == [0.125, 0.25, 0.5]
    assert len(orbit(pair(), [0.3], 2)) <= 6
    pts = orbit(halves(), [0.0], 3)
    assert len(pts) == 14
    # exhaustive oracle over all words of length 1..3
    oracle = set()
    for n in range(1, 4):
        for w in np.ndindex(*(2,) * n):
            x = 0.0
            for s in w:
                x = x / 2 + 0.5 * s
            oracle.add(x)
    assert set(pts.ravel().tolist()) == oracle
    assert len(orbit(halves(), [0.0], 3, resolution=1e-6)) == len(oracle) == 8


def test_hutchinson_step_examples():
    A = interval_set([(0, 1)], 10)
    assert hausdorff(hutchinson_step(halves(), A), A) == 0
    C = hutchinson_step(IFS([FiberMap.affine(1 / 3, 0), FiberMap.affine(1 / 3, 2 / 3)], D), A)
    assert hausdorff(C, interval_set([(0, 1 / 3), (2 / 3, 1)], 10)) < 1e-12
    single = IFS([FiberMap.affine(0.5, 0.2)], D)
    p = BoxSet.from_points([[0.4]], 10)
    assert hausdorff(hutchinson_step(single, p), p) < 1e-12


def test_hutchinson_attractor_examples():
    single = IFS([FiberMap.affine(0.5, 0.0)], D)
    K = hutchinson_attractor(single, 1e-3, 10)
    assert hausdorff(K, BoxSet.from_points([[0.0]], 10)) <= 1e-3
    K = hutchinson_attractor(halves(), 1e-3, 10)
    assert hausdorff(K, interval_set([(0, 1)], 10)) <= 1e-3 + 2 ** -10
    C = IFS([FiberMap.affine(1 / 3, 0), FiberMap.affine(1 / 3, 2 / 3)], D)
    K = hutchinson_attractor(C, 1e-3, 10)
    lo, hi = hausdorff_interval(K, interval_set(cantor_cover(10), 10))
    assert hi <= 3 ** -10 + 1e-3
    with pytest.raises(ValueError):
        hutchinson_attractor(IFS([FiberMap.affine(1.0, 0.0)], D))


def test_covering_examples():
    c = covering_check(pair(), D, 10)
    assert c.verified and c.margin == pytest.approx(0.05, abs=1e-9)
    assert c.images[0].lo[0] == pytest.approx(-0.05) and c.images[1].hi[0] == pytest.approx(1.05)
    assert 0.09 <= c.lebesgue_lower_bound <= 0.1
    r = covering_check(halves(), D, 10)
    assert not r.verified and r.witness is not None
    w = float(r.witness[0])
    assert not any(0.5 * s < w < 0.5 * s + 0.5 for s in (0, 1))
    single = IFS([FiberMap.affine(0.9, 0.05)], WIDE)
    assert not covering_check(single, D, 10).verified


def test_covering_with_budget_shrinks_members():
    c0 = covering_check(pair(), D, 10, 0.0)
    c1 = covering_check(pair(), D, 10, 0.01)
    assert c1.verified and c1.margin == pytest.approx(c0.margin - 0.01, abs=1e-9)
    assert not covering_check(pair(), D, 10, 0.06).verified


def test_lebesgue_examples():
    X = Box([0.0], [1.0])
    assert lebesgue_lower_bound([X.inflate(0.3)], X) >= 0.3 - 1e-12
    L = lebesgue_lower_bound([Box([-0.05], [0.55]), Box([0.45], [1.05])], X, 10)
    assert 0.09 <= L <= 0.1
    coarse = lebesgue_lower_bound([Box([-0.05], [0.55]), Box([0.45], [1.05])], X, 4)
    assert coarse <= L + 1e-12
    with pytest.raises(ValueError):
        lebesgue_lower_bound([Box([0.0], [0.4])], X)


def test_lebesgue_bound_is_valid_by_sampling(rng):
    cover = [Box([-0.05], [0.55]), Box([0.45], [1.05])]
    X = Box([0.0], [1.0])
    L = lebesgue_lower_bound(cover, X, 10)
    for a in rng.uniform(0, 1, 2000):
        b = min(1.0, a + L * 0.999)
        assert any(m.contains_box(Box([a], [b]), open=True) for m in cover)


def test_translation_families():
    f1 = translation_family(FiberMap.affine(0.6, 0.0), Box([-1.0], [1.0]))
    assert f1.k == 2 and f1.certificate.verified
    f9 = translation_family(FiberMap.affine(0.9, 0.0), Box([-1.0], [1.0]))
    assert f9.certificate.verified
    f2 = translation_family(FiberMap.affine(0.6, 0.0, dim=2), Box([-1.0, -1.0], [1.0, 1.0]))
    assert f2.k == 4 and f2.certificate.verified
    odd = translation_family(FiberMap.affine(0.6, 0.0), Box([-1.0], [1.0]), require_original=True)
    assert odd.k == 3 and any(np.all(v == 0) for v in odd.translations)
    with pytest.raises(ValueError):
        translation_family(FiberMap.affine(1.2, 0.0), Box([-1.0], [1.0]))


def test_blending_region_examples():
    skew = pair().to_skew()
    rep = blending_region_check(skew, D, 0.01, samples=3, r=8)
    assert rep.covered
    single = SkewProduct.one_step([FiberMap.affine(0.5, 0.0)], WIDE)
    assert not blending_region_check(single, D, 0.0, samples=1, r=6).covered


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_covering_never_false_positive(seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.3, 0.8)
    shifts = rng.uniform(-0.5, 1.0, size=int(rng.integers(1, 4)))
    maps = [FiberMap.affine(a, s) for s in shifts]
    B = Box([0.0], [1.0])
    cert = covering_check(IFS(maps, Box([-5.0], [5.0])), B, 8)
    if cert.verified:
        xs = rng.uniform(0, 1, 100_000)
        xs = np.concatenate([xs, [0.0, 1.0]])
        inside = np.zeros(xs.shape, dtype=bool)
        for m in cert.images:
            inside |= (xs > m.lo[0]) & (xs < m.hi[0])
        assert inside.all()


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_hutchinson_contraction(seed):
    rng = np.random.default_rng(seed)
    ifs = pair()
    def rand_set():
        c = rng.uniform(-0.4, 1.4, size=int(rng.integers(1, 5)))
        w = rng.uniform(0, 0.1, size=c.size)
        return interval_set(list(zip(c, np.minimum(c + w, 1.5))), 10)
    A, B = rand_set(), rand_set()
    cell = 2 ** -10
    assert hausdorff(hutchinson_step(ifs, A), hutchinson_step(ifs, B)) <= ifs.beta * hausdorff(A, B) + 2 * cell


def test_attractor_self_similar():
    K = hutchinson_attractor(pair(), 1e-3, 10)
    assert hausdorff(hutchinson_step(pair(), K), K) <= 1e-3 + 2 * 2 ** -10


def test_monotone_trap():
    ifs = pair()
    A = interval_set([(0.0, 1.0)], 10)
    GA = hutchinson_step(ifs, A)
    assert all(GA.contains_point(x) for x in np.linspace(0, 1, 101))
    K = hutchinson_attractor(ifs, 1e-3, 10)
    assert all(K.contains_point([x], tol=1e-3 + 2 ** -10) for x in np.linspace(0, 1, 101))


def test_backward_itinerary_in_attractor(rng):
    from symblender.invariant_graph import evaluate_graph
    from symblender.symbolic import random_sequence
    ifs = pair()
    K = hutchinson_attractor(ifs, 1e-3, 10)
    tol = 1e-3 + 2 ** -10
    for _ in range(20):
        x = evaluate_graph(ifs.to_skew(), random_sequence(rng, 2), 60)[0][0]
        for _ in range(20):
            cands = [f.inv([x])[0] for f in ifs.maps]
            ok = [c for c in cands if K.contains_point([c], tol)]
            assert ok
            x = ok[0]


def test_shrinking_composition():
    ifs = pair()
    K = hutchinson_attractor(ifs, 1e-3, 10).bounding_box()
    for c in (-0.1, 0.1, 0.37, 0.8, 1.1):
        V = Box([c - 0.05], [c + 0.05])
        # V is centred on K, so the level-n image through c fits once beta^n diam K <= diam V / 2
        n_max = math.ceil(math.log(V.diameter / (2 * K.diameter)) / math.log(ifs.beta))
        found = False
        frontier = [K]
        for n in range(n_max + 1):
            if any(V.contains_box(b) for b in frontier):
                found = True
                break
            frontier = [f.image_box(b) for b in frontier for f in ifs.maps]
        assert found
