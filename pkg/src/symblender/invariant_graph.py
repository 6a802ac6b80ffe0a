"""The attracting invariant graph of a fiber-contracting skew-product.

g(xi) is evaluated lazily by the backward telescope
phi_{shift^-1 xi} o ... o phi_{shift^-N xi}(x0) with x0 the centre of the
domain, which is within beta^N * diam(D) of the true value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .boxes import BoxSet, as_point
from .fiber import SkewProduct, _apply, apply_translations, compose_forward, random_ball_vector
from .symbolic import BiSequence, _primitive, random_sequence, shift, words

DEFAULT_DEPTH = 40


def _require_contracting(phi: SkewProduct):
    if not phi.beta < 1:
        raise ValueError(f"the invariant graph needs contracting fibers (beta = {phi.beta})")


def default_depth(phi: SkewProduct, tol: float | None = None) -> int:
    if tol is None:
        return DEFAULT_DEPTH
    return max(1, math.ceil(math.log(tol / phi.D.diameter) / math.log(phi.beta)))


def evaluate_graph(phi: SkewProduct, xi: BiSequence, N: int = DEFAULT_DEPTH) -> tuple[np.ndarray, float]:
    """(approximation of g(xi), error bound beta^N * diam(D))."""
    _require_contracting(phi)
    y = phi.D.center
    for j in range(N, 0, -1):
        y = phi.entry(xi, -j)(y)
    return y, phi.beta ** N * phi.D.diameter


@dataclass
class InvariantGraph:
    phi: SkewProduct
    N: int = DEFAULT_DEPTH

    def __post_init__(self):
        _require_contracting(self.phi)

    @property
    def error(self) -> float:
        return self.phi.beta ** self.N * self.phi.D.diameter

    def __call__(self, xi: BiSequence) -> np.ndarray:
        return evaluate_graph(self.phi, xi, self.N)[0]

    def invariance_residual(self, xi: BiSequence) -> float:
        """|phi_xi(g(xi)) - g(shift xi)|, at most 2*beta^N*diam(D)."""
        return float(np.linalg.norm(self.phi.entry(xi)(self(xi)) - self(shift(xi))))

    def max_invariance_residual(self, samples: int = 1000, seed: int = 0) -> float:
        rng = np.random.default_rng(seed)
        return max(self.invariance_residual(random_sequence(rng, self.phi.k)) for _ in range(samples))


def _primitive_words(k: int, n: int):
    for w in words(k, n):
        if len(_primitive(w)) == n:
            yield w


def periodic_points(phi: SkewProduct, P: int, tol: float = 1e-14, max_iter: int = 100_000) -> list:
    """(theta, p) for every shift-periodic theta of exact period n <= P, p the fixed point of phi^n_theta."""
    _require_contracting(phi)
    out = []
    for n in range(1, P + 1):
        for w in _primitive_words(phi.k, n):
            theta = BiSequence.periodic(w)
            p = phi.D.center
            for _ in range(max_iter):
                nxt = compose_forward(phi, theta, p, n, check_domain=False)
                step = float(np.linalg.norm(nxt - p))
                p = nxt
                if step < tol:
                    break
            residual = float(np.linalg.norm(compose_forward(phi, theta, p, n, check_domain=False) - p))
            if residual > 1e-12 * max(1.0, float(np.linalg.norm(p))):
                raise ValueError(f"fixed-point iteration did not converge for {w}")
            out.append((theta, p))
    return out


def graph_error(phi: SkewProduct, d: int) -> float:
    """Bound on |g(xi) - t| where t is the depth-d telescope along any sequence sharing xi's indices -d..-1.

    Entry j steps back sees sequences agreeing on |i| < min(j, d-j+1).
    """
    C = phi.holder_constant()
    nu_a = phi.nu ** phi.alpha
    holder = sum(phi.beta ** (j - 1) * C * nu_a ** min(j, d - j + 1) for j in range(1, d + 1))
    return phi.beta ** d * phi.D.diameter + holder


def graph_points(phi: SkewProduct, d: int) -> np.ndarray:
    """Depth-d telescopes from the domain centre over all k^d past words.

    Symbols outside -d..-1 are set to 1; the resulting points are within
    :func:`graph_error` of the graph values of every sequence carrying the
    same past word.
    """
    _require_contracting(phi)
    m = phi.depth
    W = np.array(list(words(phi.k, d)), dtype=int) if d else np.zeros((1, 0), dtype=int)
    # symbols at indices -d-m .. m-1, column c <-> index c - d - m
    S = np.ones((len(W), d + 2 * m), dtype=int)
    S[:, m: m + d] = W
    pts = np.repeat(phi.D.center[None, :], len(W), axis=0)
    for j in range(d, 0, -1):
        col = d + m - j
        keys = S[:, col - m: col + m + 1]
        uniq, inv = np.unique(keys, axis=0, return_inverse=True)
        inv = inv.ravel()
        out = np.empty_like(pts)
        for u, key in enumerate(uniq):
            rows = inv == u
            out[rows] = _apply(phi.table[tuple(int(s) for s in key)], pts[rows])
        pts = out
    return pts


def graph_image(phi: SkewProduct, d: int = 10, r: int = 10) -> tuple[BoxSet, float]:
    """Box cover of K = g(Sigma_k) from all k^d past words, inflated by the reported error."""
    pts = graph_points(phi, d)
    err = graph_error(phi, d)
    return BoxSet.from_points(pts, r, pad=err), err


def _cloud_hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    da, _ = cKDTree(b).query(a)
    db, _ = cKDTree(a).query(b)
    return float(max(da.max(), db.max()))


@dataclass
class ContinuityReport:
    max_distance: float
    bound: float
    trials: int
    budget: float
    seed: int
    distances: list

    @property
    def passed(self) -> bool:
        return self.max_distance <= self.bound


def continuity_probe(phi: SkewProduct, t: float, trials: int = 50, seed: int = 0, d: int = 10,
                     r: int = 10) -> ContinuityReport:
    """Largest observed Hausdorff distance between K_phi and K_psi over translation perturbations of size <= t.

    The first trial translates every map by t along the first axis (the
    extreme case); later ones draw independent vectors of the t-ball.
    Distances are measured between the depth-d point clouds, whose own
    errors enter the asserted bound t/(1-beta) + 2*cell + 2*error.
    """
    _require_contracting(phi)
    if not phi.is_one_step:
        raise ValueError("continuity_probe perturbs one-step maps")
    rng = np.random.default_rng(seed)
    base = graph_points(phi, d)
    err = graph_error(phi, d)
    dists = []
    e1 = np.zeros(phi.dim)
    e1[0] = t
    for n in range(trials):
        if n == 0:
            shifts = {(i,): e1 for i in range(1, phi.k + 1)}
        else:
            shifts = {(i,): random_ball_vector(rng, phi.dim, t) for i in range(1, phi.k + 1)}
        psi = apply_translations(phi, shifts)
        dists.append(_cloud_hausdorff(base, graph_points(psi, d)))
    cell = 2.0 ** -r
    bound = t / (1 - phi.beta) + 2 * cell + 2 * err
    return ContinuityReport(max(dists) if dists else 0.0, bound, trials, t, seed, dists)
