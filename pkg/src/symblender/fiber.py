"""Fiber maps with two-sided Lipschitz data and symbolic skew-products.

A skew-product of depth m assigns a fiber map to every centred word
``xi_{-m} .. xi_m``; depth 0 gives the one-step maps.  Points of the fiber
space R^c are numpy vectors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .boxes import Box, affine_box_image, as_point
from .symbolic import DEFAULT_NU, BiSequence, check_nu, shift, word_distance, words

LIPSCHITZ_TOL = 1e-12


class DomainEscape(Exception):
    """An orbit left the closed domain; ``step`` is the 1-based step index."""

    def __init__(self, step: int, point):
        super().__init__(f"orbit left the domain at step {step}: {np.asarray(point).tolist()}")
        self.step = step
        self.point = np.asarray(point)


class FiberMap:
    """A fiber diffeomorphism with lower/upper Lipschitz bounds (lam, beta)."""

    def __init__(self, forward: Callable, inverse: Callable, lam: float, beta: float,
                 kind: str = "user", a=None, b=None):
        if not 0 < lam <= beta:
            raise ValueError(f"need 0 < lam <= beta, got ({lam}, {beta})")
        self._f = forward
        self._g = inverse
        self.lam = float(lam)
        self.beta = float(beta)
        self.kind = kind
        self.a = None if a is None else as_point(a)
        self.b = None if b is None else as_point(b)

    @classmethod
    def affine(cls, a, b=0.0, dim: int | None = None) -> "FiberMap":
        """``x -> a*x + b`` with diagonal ``a`` (scalars broadcast to ``dim``)."""
        a, b = as_point(a), as_point(b)
        c = dim or max(a.size, b.size)
        a = np.broadcast_to(a, (c,)).copy()
        b = np.broadcast_to(b, (c,)).copy()
        if np.any(a == 0):
            raise ValueError("affine fiber map must be invertible")
        absa = np.abs(a)
        return cls(lambda x: a * x + b, lambda y: (y - b) / a, absa.min(), absa.max(), "affine", a, b)

    @classmethod
    def declared(cls, forward, inverse, lam, beta, domain: Box, samples: int = 10_000, seed: int = 0) -> "FiberMap":
        """A user map whose declared bounds are checked by sampling on ``domain``."""
        fm = cls(forward, inverse, lam, beta, "user")
        fm.verify(domain, samples, seed)
        return fm

    @classmethod
    def piecewise_linear(cls, xs, ys) -> "FiberMap":
        """Increasing piecewise-linear homeomorphism of the line through the knots (xs, ys).

        Extended beyond the end knots with the end slopes.
        """
        xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise ValueError("need matching knot vectors of length >= 2")
        if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
            raise ValueError("knots must be strictly increasing in both coordinates")
        slopes = np.diff(ys) / np.diff(xs)
        fm = cls(_pl(xs, ys), _pl(ys, xs), slopes.min(), slopes.max(), "pl")
        fm.xs, fm.ys = xs, ys
        return fm

    @property
    def is_affine(self) -> bool:
        return self.kind == "affine"

    @property
    def dim(self) -> int | None:
        return None if self.a is None else self.a.size

    def __call__(self, x) -> np.ndarray:
        return self._f(as_point(x))

    def inv(self, y) -> np.ndarray:
        return self._g(as_point(y))

    def inverse(self) -> "FiberMap":
        if self.is_affine:
            return FiberMap.affine(1.0 / self.a, -self.b / self.a)
        if self.kind == "pl":
            return FiberMap.piecewise_linear(self.ys, self.xs)
        return FiberMap(self._g, self._f, 1.0 / self.beta, 1.0 / self.lam, "user")

    def translated(self, v) -> "FiberMap":
        v = as_point(v)
        if self.is_affine:
            return FiberMap.affine(self.a, self.b + v)
        if self.kind == "pl":
            if v.size != 1:
                raise ValueError("piecewise-linear maps live on the line")
            return FiberMap.piecewise_linear(self.xs, self.ys + v[0])
        f, g = self._f, self._g
        return FiberMap(lambda x: f(x) + v, lambda y: g(y - v), self.lam, self.beta, "user")

    def image_box(self, box: Box) -> Box:
        """Exact image for affine maps, a Lipschitz enclosure otherwise."""
        if self.is_affine:
            return affine_box_image(self.a, self.b, box)
        if self.kind == "pl":
            return Box(self(box.lo), self(box.hi))
        return Box.around(self(box.center), self.beta * box.diameter / 2)

    def preimage_box(self, box: Box) -> Box:
        if self.is_affine:
            return affine_box_image(1.0 / self.a, -self.b / self.a, box)
        if self.kind == "pl":
            return Box(self.inv(box.lo), self.inv(box.hi))
        return Box.around(self.inv(box.center), box.diameter / (2 * self.lam))

    def fixed_point(self, start, tol: float = 1e-14, max_iter: int = 10_000) -> np.ndarray:
        """Fixed point of a contraction by iteration (or of the inverse if expanding)."""
        if self.beta < 1:
            step = self
        elif self.lam > 1:
            step = self.inverse()
        else:
            raise ValueError("fixed_point needs a contracting or expanding map")
        if self.is_affine:
            return self.b / (1 - self.a)
        x = as_point(start)
        for _ in range(max_iter):
            y = step(x)
            if np.linalg.norm(y - x) < tol:
                return y
            x = y
        return x

    def verify(self, domain: Box, samples: int = 10_000, seed: int = 0) -> None:
        """Check inverse consistency and the two-sided Lipschitz bounds by sampling."""
        rng = np.random.default_rng(seed)
        xs = domain.sample(rng, samples)
        ys = domain.sample(rng, samples)
        fx = np.array([self(x) for x in xs])
        fy = np.array([self(y) for y in ys])
        back = np.array([self.inv(v) for v in fx])
        if np.max(np.abs(back - xs)) > 1e-12 * max(1.0, np.max(np.abs(xs))):
            raise ValueError("declared inverse does not invert the map on the domain")
        d = np.linalg.norm(xs - ys, axis=1)
        dd = np.linalg.norm(fx - fy, axis=1)
        tol = LIPSCHITZ_TOL * np.maximum(1.0, d)
        if np.any(dd < self.lam * d - tol) or np.any(dd > self.beta * d + tol):
            raise ValueError("declared Lipschitz bounds violated on sampled pairs")

    def to_dict(self) -> dict:
        if self.kind == "pl":
            return {"kind": "pl", "xs": self.xs.tolist(), "ys": self.ys.tolist()}
        if not self.is_affine:
            raise ValueError("only affine and piecewise-linear fiber maps serialise")
        return {"kind": "affine", "a": self.a.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_dict(cls, d: dict, dim: int | None = None) -> "FiberMap":
        kind = d.get("kind", "affine")
        if kind == "affine":
            return cls.affine(d["a"], d["b"], dim=dim)
        if kind == "pl":
            return cls.piecewise_linear(d["xs"], d["ys"])
        raise ValueError(f"unknown fiber map kind {kind!r}")

    def __repr__(self):
        if self.is_affine:
            return f"FiberMap.affine({self.a.tolist()}, {self.b.tolist()})"
        if self.kind == "pl":
            return f"FiberMap.piecewise_linear({self.xs.tolist()}, {self.ys.tolist()})"
        return f"FiberMap(user, lam={self.lam}, beta={self.beta})"


def _pl(xs, ys):
    s0 = (ys[1] - ys[0]) / (xs[1] - xs[0])
    s1 = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])

    def f(x):
        x = np.asarray(x, dtype=float)
        y = np.interp(x, xs, ys)
        y = np.where(x < xs[0], ys[0] + s0 * (x - xs[0]), y)
        return np.where(x > xs[-1], ys[-1] + s1 * (x - xs[-1]), y)

    return f


def holder_exponent(mu: float, nu: float) -> float:
    """Exponent log(nu)/log(mu) relating a base contraction mu to the metric scale nu."""
    if not (0 < mu <= nu < 1):
        raise ValueError("need 0 < mu <= nu < 1")
    return math.log(nu) / math.log(mu)


@dataclass(frozen=True)
class PHConstants:
    lam: float
    beta: float
    alpha: float
    nu: float
    mu: float | None = None

    @property
    def s_dominated(self) -> bool:
        return self.nu ** self.alpha < self.lam

    @property
    def u_dominated(self) -> bool:
        return self.beta < self.nu ** -self.alpha

    @property
    def partially_hyperbolic(self) -> bool:
        return self.nu ** self.alpha < self.lam < 1 < self.beta < self.nu ** -self.alpha


class SkewProduct:
    """``(xi, x) -> (shift(xi), phi_xi(x))`` with fiber maps looked up by centred word."""

    def __init__(self, k: int, table: Mapping[tuple, FiberMap], D: Box, depth: int = 0,
                 alpha: float = 1.0, nu: float = DEFAULT_NU, grid: int = 256, check: bool = True):
        if k < 1:
            raise ValueError("k must be positive")
        if not 0 < alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        self.k = int(k)
        self.depth = int(depth)
        self.alpha = float(alpha)
        self.nu = check_nu(nu)
        self.D = D
        self.grid = int(grid)
        self.table = {tuple(int(s) for s in w): f for w, f in table.items()}
        width = 2 * self.depth + 1
        expected = set(words(self.k, width))
        if set(self.table) != expected:
            raise ValueError(f"table must have exactly one entry per word of length {width} over 1..{k}")
        self.lam = min(f.lam for f in self.table.values())
        self.beta = max(f.beta for f in self.table.values())
        self._holder = None
        if check:
            self._check_domain()

    @classmethod
    def one_step(cls, maps, D: Box, **kw) -> "SkewProduct":
        return cls(len(maps), {(i + 1,): f for i, f in enumerate(maps)}, D, depth=0, **kw)

    def _check_domain(self):
        if self.beta < 1:
            for w, f in self.table.items():
                img = f.image_box(self.D)
                if not self.D.contains_box(img, open=True):
                    raise ValueError(f"entry {w} does not map the closed domain into its interior")
        elif self.lam > 1:
            for w, f in self.table.items():
                pre = f.preimage_box(self.D)
                if not self.D.contains_box(pre, open=True):
                    raise ValueError(f"entry {w} image does not cover the closed domain")

    @property
    def dim(self) -> int:
        return self.D.dim

    @property
    def constants(self) -> PHConstants:
        return PHConstants(self.lam, self.beta, self.alpha, self.nu)

    @property
    def is_one_step(self) -> bool:
        return self.depth == 0

    def maps(self) -> list[FiberMap]:
        """The k one-step maps (depth 0 only)."""
        if self.depth:
            raise ValueError("maps() is defined for one-step skew-products")
        return [self.table[(i,)] for i in range(1, self.k + 1)]

    def entry(self, xi: BiSequence, j: int = 0) -> FiberMap:
        """Fiber map at ``shift(xi, j)``."""
        m = self.depth
        return self.table[tuple(xi[i] for i in range(j - m, j + m + 1))]

    def holder_constant(self) -> float:
        if self._holder is None:
            self._holder = holder_constant(self)
        return self._holder

    def restricted(self, symbols: int) -> "SkewProduct":
        """Entries whose words only use the first ``symbols`` symbols."""
        table = {w: f for w, f in self.table.items() if max(w) <= symbols}
        return SkewProduct(symbols, table, self.D, self.depth, self.alpha, self.nu, self.grid, check=False)

    def to_dict(self) -> dict:
        return {
            "k": self.k, "depth": self.depth, "alpha": self.alpha, "nu": self.nu,
            "D": {"lo": self.D.lo.tolist(), "hi": self.D.hi.tolist()},
            "entries": [{"word": list(w), **self.table[w].to_dict()} for w in sorted(self.table)],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict, check: bool = True) -> "SkewProduct":
        for key in ("k", "D", "entries"):
            if key not in d:
                raise ValueError(f"skew-product document lacks field {key!r}")
        D = Box(d["D"]["lo"], d["D"]["hi"])
        table = {}
        for n, e in enumerate(d["entries"]):
            try:
                table[tuple(e["word"])] = FiberMap.from_dict(e, dim=D.dim)
            except (KeyError, ValueError) as exc:
                raise ValueError(f"entries[{n}]: {exc}") from None
        return cls(int(d["k"]), table, D, int(d.get("depth", 0)), float(d.get("alpha", 1.0)),
                   float(d.get("nu", DEFAULT_NU)), check=check)

    @classmethod
    def from_json(cls, text: str, check: bool = True) -> "SkewProduct":
        return cls.from_dict(json.loads(text), check=check)


def _in_domain(D: Box, x, tol: float = 1e-12) -> bool:
    return D.contains(x, tol=tol)


def compose_forward(phi: SkewProduct, xi: BiSequence, x, n: int, check_domain: bool = True) -> np.ndarray:
    """``phi_{shift^{n-1} xi} o ... o phi_xi (x)``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    y = as_point(x)
    for j in range(n):
        y = phi.entry(xi, j)(y)
        if check_domain and not _in_domain(phi.D, y):
            raise DomainEscape(j + 1, y)
    return y


def compose_backward(phi: SkewProduct, xi: BiSequence, x, n: int, check_domain: bool = True) -> np.ndarray:
    """``phi^{-1}_{shift^{-(n-1)} xi} o ... o phi^{-1}_xi (x)``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    y = as_point(x)
    for j in range(n):
        y = phi.entry(xi, -j).inv(y)
        if check_domain and not _in_domain(phi.D, y):
            raise DomainEscape(j + 1, y)
    return y


def backward_orbit(phi: SkewProduct, xi: BiSequence, x, n: int) -> np.ndarray:
    """Points ``phi^{-j}_{shift^{-1} xi}(x)`` for j = 0..n (the fiber part of the inverse iterates)."""
    pts = [as_point(x)]
    for j in range(1, n + 1):
        pts.append(phi.entry(xi, -j).inv(pts[-1]))
    return np.array(pts)


def forward_orbit(phi: SkewProduct, xi: BiSequence, x, n: int) -> np.ndarray:
    pts = [as_point(x)]
    for j in range(n):
        pts.append(phi.entry(xi, j)(pts[-1]))
    return np.array(pts)


def _grid_points(phi: SkewProduct) -> np.ndarray:
    per_axis = phi.grid if phi.dim == 1 else max(2, int(round(phi.grid ** (1.0 / phi.dim))))
    return phi.D.grid(per_axis)


def _apply(f: FiberMap, pts: np.ndarray, inverse: bool = False) -> np.ndarray:
    if f.is_affine:
        return (pts - f.b) / f.a if inverse else pts * f.a + f.b
    if f.kind == "pl":
        return f.inv(pts) if inverse else f(pts)
    g = f.inv if inverse else f
    return np.array([g(p) for p in pts])


def holder_constant(phi: SkewProduct) -> float:
    """Smallest constant C with ``|phi^{+-1}_xi - phi^{+-1}_zeta| <= C d(xi, zeta)^alpha`` over the table.

    Pairs of centred words sharing the middle symbol are compared on a grid
    of the closed domain (corners included, so affine entries are exact).
    """
    if phi.depth == 0:
        return 0.0
    pts = _grid_points(phi)
    fw = {w: _apply(f, pts) for w, f in phi.table.items()}
    bw = {w: _apply(f, pts, inverse=True) for w, f in phi.table.items()}
    m = phi.depth
    best = 0.0
    keys = sorted(phi.table)
    for i, w1 in enumerate(keys):
        for w2 in keys[i + 1:]:
            if w1[m] != w2[m]:
                continue
            d = word_distance(w1, w2, phi.nu)
            sup = max(np.max(np.linalg.norm(fw[w1] - fw[w2], axis=1)),
                      np.max(np.linalg.norm(bw[w1] - bw[w2], axis=1)))
            best = max(best, float(sup) / d ** phi.alpha)
    return best


def skew_distance(phi: SkewProduct, psi: SkewProduct) -> float:
    """Sup over matched entries of the C0 distance on the domain, plus the Holder-constant gap."""
    if phi.k != psi.k or phi.D != psi.D or phi.dim != psi.dim:
        raise ValueError("skew-products must share k and domain")
    m = max(phi.depth, psi.depth)
    pts = _grid_points(phi)
    sup = 0.0
    for w in words(phi.k, 2 * m + 1):
        f = phi.table[w[m - phi.depth: m + phi.depth + 1]]
        g = psi.table[w[m - psi.depth: m + psi.depth + 1]]
        sup = max(sup, float(np.max(np.linalg.norm(_apply(f, pts) - _apply(g, pts), axis=1))))
    return sup + abs(phi.holder_constant() - psi.holder_constant())


def inverse_skew_product(phi: SkewProduct) -> SkewProduct:
    """Entry at word w is the inverse of phi's entry at the reversed word."""
    table = {}
    for w, f in phi.table.items():
        table[w[::-1]] = f.inverse()
    return SkewProduct(phi.k, table, phi.D, phi.depth, phi.alpha, phi.nu, phi.grid, check=False)


def raise_depth(phi: SkewProduct, depth: int) -> SkewProduct:
    """The same skew-product written with a larger symbol window."""
    if depth < phi.depth:
        raise ValueError("cannot lower the depth")
    m, d = phi.depth, depth
    table = {w: phi.table[w[d - m: d + m + 1]] for w in words(phi.k, 2 * d + 1)}
    return SkewProduct(phi.k, table, phi.D, d, phi.alpha, phi.nu, phi.grid, check=False)


def translate_entries(phi: SkewProduct, shifts: Mapping[tuple, np.ndarray]) -> SkewProduct:
    table = {w: f.translated(shifts[w]) if w in shifts else f for w, f in phi.table.items()}
    return SkewProduct(phi.k, table, phi.D, phi.depth, phi.alpha, phi.nu, phi.grid, check=False)


def random_ball_vector(rng, dim: int, radius: float) -> np.ndarray:
    """Uniform sample from the closed Euclidean ball."""
    v = rng.normal(size=dim)
    v /= max(np.linalg.norm(v), 1e-300)
    return v * radius * rng.uniform() ** (1.0 / dim)


def random_translations(phi: SkewProduct, budget: float, rng, holder_depth: int = 0) -> dict:
    """Translation vectors keyed by centred words of length 2*holder_depth+1.

    Each symbol gets a uniform vector of the ball of radius budget/3; with
    ``holder_depth`` = 1 every word also gets an extra vector of radius
    nu^alpha*budget/6 so that entries sharing the centre differ by at most
    nu^alpha*budget/3.
    """
    if holder_depth not in (0, 1):
        raise ValueError("holder_depth must be 0 or 1")
    base = {(i,): random_ball_vector(rng, phi.dim, budget / 3) for i in range(1, phi.k + 1)}
    if holder_depth == 0:
        return base
    eps = phi.nu ** phi.alpha * budget / 6
    return {w: base[(w[1],)] + random_ball_vector(rng, phi.dim, eps) for w in words(phi.k, 3)}


def apply_translations(phi: SkewProduct, shifts: dict) -> SkewProduct:
    """Translate the entries of a one-step map by word-keyed vectors (lifting the depth if needed)."""
    depth = len(next(iter(shifts))) // 2
    lifted = raise_depth(phi, depth) if depth > phi.depth else phi
    return translate_entries(lifted, shifts)


def perturb(phi: SkewProduct, budget: float, rng, holder_depth: int = 0) -> SkewProduct:
    """A random translation perturbation of a one-step map (see :func:`random_translations`)."""
    if not phi.is_one_step:
        raise ValueError("perturbations are drawn around one-step maps")
    return apply_translations(phi, random_translations(phi, budget, rng, holder_depth))
