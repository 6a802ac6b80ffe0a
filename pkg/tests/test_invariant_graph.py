import numpy as np
import pytest

from symblender.boxes import Box, BoxSet, hausdorff_interval, interval_set
from symblender.fiber import FiberMap, SkewProduct, compose_forward, perturb
from symblender.ifs import IFS, hutchinson_attractor
from symblender.invariant_graph import (
    InvariantGraph, continuity_probe, evaluate_graph, graph_error, graph_image, graph_points, periodic_points,
)
from symblender.symbolic import BiSequence, random_sequence, shift

D = Box([-1.0], [2.0])


def halves():
    return SkewProduct.one_step([FiberMap.affine(0.5, 0.0), FiberMap.affine(0.5, 0.5)], D)


def pair():
    return SkewProduct.one_step([FiberMap.affine(0.6, -0.05), FiberMap.affine(0.6, 0.45)], D)


def test_common_fixed_point():
    phi = SkewProduct.one_step([FiberMap.affine(0.5, 0.0)] * 2, D)
    for s in ("(1|2);(|1)", "(|1,2);(2|2)"):
        g, err = evaluate_graph(phi, BiSequence.parse(s), 40)
        assert abs(g[0]) <= 2 ** -40 * D.diameter and err == pytest.approx(2 ** -40 * 3)


def test_geometric_series_oracle(rng):
    phi = halves()
    g, _ = evaluate_graph(phi, BiSequence.parse("(1,2|1);(|1)"), 40)
    assert g[0] == pytest.approx(0.5, abs=1e-11)
    for _ in range(50):
        xi = random_sequence(rng, 2)
        oracle = sum((1.0 if xi[-n] == 2 else 0.0) * 2.0 ** -n for n in range(1, 60))
        assert evaluate_graph(phi, xi, 40)[0][0] == pytest.approx(oracle, abs=2 ** -40 * 3 + 1e-15)


def test_fixed_points_and_periodic_points():
    phi = halves()
    assert evaluate_graph(phi, BiSequence.constant(2))[0][0] == pytest.approx(1.0)
    pts = {str(t): p[0] for t, p in periodic_points(phi, 2)}
    assert pts["(|1);(|1)"] == pytest.approx(0.0, abs=1e-13)
    assert pts["(|2);(|2)"] == pytest.approx(1.0)
    # along (12)^inf with xi_0 = 1 the return map is phi_2 o phi_1 = x/4 + 1/2
    assert pts["(|1,2);(|1,2)"] == pytest.approx(2 / 3)
    assert len(periodic_points(phi, 3)) == 2 + 2 + 6


def test_periodic_points_dense():
    # every point of K lies in a level-6 image phi_w(K), which holds a period-6 point
    phi = pair()
    pts = np.array([p[0] for _, p in periodic_points(phi, 6)])
    K = hutchinson_attractor(IFS.from_skew(phi), 1e-3, 10)
    lo, hi = K.bounding_box().lo[0], K.bounding_box().hi[0]
    gap = max(np.min(np.abs(pts - x)) for x in np.linspace(lo, hi, 2001))
    assert gap <= 0.6 ** 6 * (hi - lo) + 1e-3
    # the measured net is coarser than 2^-6: the widest hole sits between deep cylinders
    assert gap == pytest.approx(0.0204, abs=5e-4)


def test_graph_image_cross_oracle():
    for phi in (halves(), pair(), SkewProduct.one_step([FiberMap.affine(1 / 3, 0), FiberMap.affine(1 / 3, 2 / 3)], D)):
        K, err = graph_image(phi, 10, 10)
        H = hutchinson_attractor(IFS.from_skew(phi), 1e-3, 10)
        lo, hi = hausdorff_interval(K, H)
        assert lo <= err + 1e-3 + 2 * 2 ** -10
    K, _ = graph_image(pair(), 10)
    bb = K.bounding_box()
    assert bb.lo[0] == pytest.approx(-0.125, abs=0.02) and bb.hi[0] == pytest.approx(1.125, abs=0.02)
    single = SkewProduct.one_step([FiberMap.affine(0.5, 0.1)], D)
    Ks, err_s = graph_image(single, 8)
    assert Ks.bounding_box().lo[0] == pytest.approx(0.2, abs=err_s + 2 ** -8)
    assert Ks.bounding_box().hi[0] == pytest.approx(0.2, abs=err_s + 2 ** -8)


def test_invariance_and_attraction(rng):
    for phi in (pair(), perturb(pair(), 0.02, rng, 1)):
        g = InvariantGraph(phi)
        assert g.max_invariance_residual(1000, seed=1) <= 2 * phi.beta ** 40 * D.diameter + 1e-9
        for _ in range(50):
            xi = random_sequence(rng, 2)
            x = rng.uniform(-1, 2, size=1)
            d0 = np.linalg.norm(g(xi) - x)
            for n in range(21):
                dn = np.linalg.norm(compose_forward(phi, xi, x, n, False) - g(shift(xi, n)))
                assert dn <= phi.beta ** n * d0 + 2 * g.error + 1e-12


def test_conjugacy_marker(rng):
    phi = pair()
    g = InvariantGraph(phi)
    for _ in range(100):
        xi = random_sequence(rng, 2)
        assert np.allclose(phi.entry(xi)(g(xi)), g(shift(xi)), atol=2 * g.error + 1e-12)


def test_forward_maximality(rng):
    phi = pair()
    g = InvariantGraph(phi)
    for _ in range(50):
        xi = random_sequence(rng, 2)
        y = g(xi)
        for j in range(1, 31):
            y = phi.entry(xi, -j).inv(y)
            assert D.contains(y, tol=1e-6)
    # a point far from K leaves the domain backward
    xi = BiSequence.constant(1)
    y = np.array([1.9])
    escaped = False
    for j in range(1, 31):
        y = phi.entry(xi, -j).inv(y)
        escaped |= not D.contains(y)
    assert escaped


def test_continuity_probe():
    assert continuity_probe(pair(), 0.0, 3).max_distance == 0
    single = SkewProduct.one_step([FiberMap.affine(0.5, 0.0)], D)
    assert continuity_probe(single, 0.01, 1).max_distance == pytest.approx(0.02, abs=2 * 2 ** -10)
    rep = continuity_probe(pair(), 0.01, 50)
    assert rep.passed and rep.max_distance <= 0.01 / 0.4 + 2 * 2 ** -10 + 2 * graph_error(pair(), 10)


def test_graph_error_covers_depth1(rng):
    psi = perturb(pair(), 0.02, rng, 1)
    d = 6
    pts = graph_points(psi, d)
    err = graph_error(psi, d)
    from symblender.symbolic import words
    for w, p in zip(words(2, d), pts):
        for _ in range(3):
            xi = BiSequence.make(tuple(int(s) for s in rng.integers(1, 3, 3)) + w, (1, 2),
                                 tuple(int(s) for s in rng.integers(1, 3, 3)), (2,))
            assert np.linalg.norm(evaluate_graph(psi, xi, 60)[0] - p) <= err + 1e-12


def test_rejects_non_contracting():
    phi = SkewProduct.one_step([FiberMap.affine(1.0, 0.0)], D, check=False)
    with pytest.raises(ValueError):
        evaluate_graph(phi, BiSequence.constant(1))
