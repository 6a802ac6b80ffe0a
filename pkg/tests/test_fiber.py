import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symblender.boxes import Box
from symblender.fiber import (
    DomainEscape, FiberMap, SkewProduct, backward_orbit, compose_backward, compose_forward, forward_orbit,
    holder_exponent, inverse_skew_product, perturb, random_translations, apply_translations, raise_depth,
    skew_distance,
)
from symblender.symbolic import BiSequence, conjugate, metric, random_sequence, shift, words

D = Box([-1.0], [2.0])
HALF = FiberMap.affine(0.5, 0.0)


def halves():
    return SkewProduct.one_step([FiberMap.affine(0.5, 0.0), FiberMap.affine(0.5, 0.5)], D)


def depth1(rng, scale=0.01):
    base = SkewProduct.one_step([FiberMap.affine(0.6, -0.05), FiberMap.affine(0.6, 0.45)], D)
    return perturb(base, scale, rng, holder_depth=1)


def test_compose_examples():
    phi = SkewProduct.one_step([HALF], D)
    xi = BiSequence.constant(1)
    assert compose_forward(phi, xi, [0.3], 0)[0] == 0.3
    assert compose_forward(phi, xi, [1.0], 3)[0] == 0.125
    assert compose_backward(phi, xi, [0.125], 3)[0] == 1.0
    # xi = (21)^inf with xi_0 = 2: phi_1(phi_2(0)) = 1/4
    xi = BiSequence.periodic((2, 1))
    assert compose_forward(halves(), xi, [0.0], 2)[0] == 0.25
    # loop oracle
    y = 0.0
    for s in (2, 1):
        y = y / 2 + (0.5 if s == 2 else 0.0)
    assert y == 0.25


def test_domain_escape_step():
    phi = SkewProduct.one_step([FiberMap.affine(2.0, 0.0)], Box([-1.0], [1.0]), check=False)
    with pytest.raises(DomainEscape) as exc:
        compose_forward(phi, BiSequence.constant(1), [0.3], 5)
    assert exc.value.step == 2


def test_table_validation():
    with pytest.raises(ValueError):
        SkewProduct(2, {(1,): HALF}, D)
    with pytest.raises(ValueError):
        SkewProduct.one_step([FiberMap.affine(0.9, 0.5)], Box([0.0], [1.0]))
    with pytest.raises(ValueError):
        FiberMap.affine(0.0, 1.0)


def test_holder_constant_examples(rng):
    assert halves().holder_constant() == 0.0
    flat = raise_depth(halves(), 1)
    assert flat.holder_constant() == 0.0
    # entries differ by 0.01 according to the symbol at index -1 only
    table = {w: FiberMap.affine(0.5, 0.01 if w[0] == 2 else 0.0) for w in words(2, 3)}
    phi = SkewProduct(2, table, D, depth=1, check=False)
    # forward entries alone: 0.01 / nu = 0.02
    a, b = table[(1, 1, 1)], table[(2, 1, 1)]
    assert abs(a([0.3]) - b([0.3]))[0] / 0.5 == pytest.approx(0.02)
    # inverse entries differ by 0.01 / 0.5, so the constant covering both is 0.04
    assert abs(a.inv([0.3]) - b.inv([0.3]))[0] / 0.5 == pytest.approx(0.04)
    assert phi.holder_constant() == pytest.approx(0.04, abs=1e-12)


def test_holder_constant_is_smallest_on_sequence_pairs(rng):
    phi = depth1(rng, 0.03)
    C = phi.holder_constant()
    pts = D.grid(64)
    worst = 0.0
    for w1 in words(2, 3):
        for w2 in words(2, 3):
            if w1 == w2 or w1[1] != w2[1]:
                continue
            a = BiSequence.make((w1[0],), (1,), w1[1:], (1,))
            b = BiSequence.make((w2[0],), (1,), w2[1:], (1,))
            f, g = phi.entry(a), phi.entry(b)
            gap = max(np.max(np.abs(f(p) - g(p))) for p in pts)
            gap = max(gap, max(np.max(np.abs(f.inv(p) - g.inv(p))) for p in pts))
            worst = max(worst, gap / metric(a, b, phi.nu))
    assert worst <= C + 1e-12
    assert worst >= C - 1e-9


def test_skew_distance_examples(rng):
    phi = halves()
    assert skew_distance(phi, phi) == 0
    psi = SkewProduct.one_step([FiberMap.affine(0.5, 0.0), FiberMap.affine(0.5, 0.53)], D)
    assert skew_distance(phi, psi) == pytest.approx(0.03)
    a, b = depth1(rng), depth1(rng)
    assert skew_distance(a, b) == pytest.approx(skew_distance(b, a))


def test_inverse_skew_product():
    phi = SkewProduct.one_step([HALF], D)
    star = inverse_skew_product(phi)
    f = star.entry(BiSequence.constant(1))
    assert (f.lam, f.beta) == (2.0, 2.0)


def test_inverse_involution(rng):
    phi = depth1(rng)
    back = inverse_skew_product(inverse_skew_product(phi))
    x = np.array([0.3])
    for w, f in phi.table.items():
        assert np.allclose(back.table[w](x), f(x), atol=1e-14)


def test_dual_identity(rng):
    phi = depth1(rng)
    star = inverse_skew_product(phi)
    for _ in range(100):
        xi = random_sequence(rng, 2)
        n = int(rng.integers(0, 10))
        x = rng.uniform(0, 1, size=1)
        lhs = compose_forward(star, conjugate(xi), x, n, check_domain=False)
        rhs = compose_backward(phi, xi, x, n, check_domain=False)
        assert np.allclose(lhs, rhs, atol=1e-12)


def test_holder_exponent_examples():
    assert holder_exponent(0.5, 0.5) == 1
    assert holder_exponent(0.25, 0.5) == pytest.approx(0.5)
    assert holder_exponent(0.1, 0.5) == pytest.approx(0.30103, abs=1e-5)
    with pytest.raises(ValueError):
        holder_exponent(0.6, 0.5)


def test_piecewise_linear_and_serialisation():
    f = FiberMap.piecewise_linear([0, 1, 2], [0, 0.5, 2])
    assert (f.lam, f.beta) == (0.5, 1.5)
    assert f.inv(f([1.7]))[0] == pytest.approx(1.7)
    assert f([-1.0])[0] == pytest.approx(-0.5)
    g = FiberMap.from_dict(f.to_dict())
    assert g([1.3])[0] == f([1.3])[0]
    phi = halves()
    again = SkewProduct.from_json(phi.to_json())
    assert again.to_json() == phi.to_json()
    with pytest.raises(ValueError):
        SkewProduct.from_dict({"k": 1, "D": {"lo": [0], "hi": [1]}})


def test_declared_map_checked():
    with pytest.raises(ValueError):
        FiberMap.declared(lambda x: 0.5 * x, lambda y: 2 * y, 0.6, 0.7, Box([0.0], [1.0]), samples=200)
    f = FiberMap.declared(lambda x: 0.5 * x, lambda y: 2 * y, 0.5, 0.5, Box([0.0], [1.0]), samples=200)
    assert f.fixed_point([0.7])[0] == pytest.approx(0.0, abs=1e-12)


def test_random_translations_budget(rng):
    phi = halves()
    for _ in range(20):
        shifts = random_translations(phi, 0.03, rng, holder_depth=1)
        psi = apply_translations(phi, shifts)
        assert skew_distance(phi, psi) - psi.holder_constant() <= 0.03 / 3 + 0.5 * 0.03 / 6 + 1e-12
        assert psi.holder_constant() <= 0.03 / 3 / 0.5 + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 8), st.integers(0, 8))
def test_cocycle_law(seed, n, m):
    rng = np.random.default_rng(seed)
    phi = depth1(rng)
    xi = random_sequence(rng, 2)
    x = rng.uniform(-0.5, 1.5, size=1)
    lhs = compose_forward(phi, xi, x, n + m, check_domain=False)
    rhs = compose_forward(phi, shift(xi, n), compose_forward(phi, xi, x, n, check_domain=False), m, check_domain=False)
    assert np.allclose(lhs, rhs, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 10))
def test_backward_inverts_forward(seed, n):
    rng = np.random.default_rng(seed)
    phi = depth1(rng)
    xi = random_sequence(rng, 2)
    x = rng.uniform(-0.5, 1.5, size=1)
    y = compose_forward(phi, xi, x, n, check_domain=False)
    assert np.allclose(compose_backward(phi, shift(xi, n - 1), y, n, check_domain=False), x, atol=1e-10)
    orb = forward_orbit(phi, xi, x, n)
    assert np.allclose(orb[-1], y)
    bo = backward_orbit(phi, shift(xi, n), y, n)
    assert np.allclose(bo[-1], x, atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_lipschitz_bounds(seed):
    rng = np.random.default_rng(seed)
    phi = depth1(rng)
    xs, ys = rng.uniform(-1, 2, size=(2, 10_000, 1))
    for f in phi.table.values():
        d = np.abs(xs - ys)[:, 0]
        dd = np.abs(f(xs) - f(ys))[:, 0]
        assert np.all(dd >= f.lam * d - 1e-12) and np.all(dd <= f.beta * d + 1e-12)
