"""Local strong unstable and strong stable sets as Holder graphs over the base.

The unstable graph through (xi, x) is the limit of
gamma^{u,n}(xi') = phi^n_{shift^-n xi'} o (phi^n_{shift^-n xi})^{-1}(x)
over xi' agreeing with xi at every index <= 0.  The stable graph is the
same construction for the inverse skew-product evaluated at the conjugates
of the once back-shifted sequences, which unwinds to (phi^n_{xi'})^{-1} o phi^n_xi(x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boxes import as_point
from .fiber import SkewProduct, compose_backward, compose_forward, inverse_skew_product
from .invariant_graph import DEFAULT_DEPTH, evaluate_graph
from .symbolic import BiSequence, LocalStableSet, LocalUnstableSet, conjugate, metric, shift


def _depth_for(C: float, rate: float, tol: float = 1e-8) -> int:
    """Smallest n with C * rate^n / (1 - rate) < tol."""
    if C == 0:
        return 1
    return max(1, math.ceil(math.log(tol * (1 - rate) / C) / math.log(rate)))


def _unstable_value(phi: SkewProduct, xi: BiSequence, x, xi2: BiSequence, n: int) -> np.ndarray:
    base = compose_backward(phi, shift(xi, -1), x, n, check_domain=False)
    return compose_forward(phi, shift(xi2, -n), base, n, check_domain=False)


class UnstableGraph:
    """gamma^u over the local unstable set of xi, through (xi, x); x defaults to g(xi)."""

    def __init__(self, phi: SkewProduct, xi: BiSequence, x=None, n: int | None = None, graph_depth: int = DEFAULT_DEPTH):
        if not phi.beta < 1:
            raise ValueError(f"unstable graphs need contracting fibers (beta = {phi.beta})")
        self.phi = phi
        self.xi = xi
        self.x = evaluate_graph(phi, xi, graph_depth)[0] if x is None else as_point(x)
        self.nu_a = phi.nu ** phi.alpha
        self.rate = phi.beta * self.nu_a
        self.C_phi = phi.holder_constant()
        self.C = self.C_phi / (1 - self.rate)
        self.n = n if n is not None else _depth_for(self.C_phi, self.rate)
        self._leaf = LocalUnstableSet(xi)

    def _check(self, xi2):
        if xi2 not in self._leaf:
            raise ValueError("sequence is not in the local unstable set of the base")

    def value(self, xi2: BiSequence, n: int | None = None) -> np.ndarray:
        self._check(xi2)
        return _unstable_value(self.phi, self.xi, self.x, xi2, self.n if n is None else n)

    __call__ = value

    def step_bound(self, xi2: BiSequence, n: int) -> float:
        """Bound on |gamma^{u,n+1} - gamma^{u,n}| at xi2: C beta^n nu^{alpha(n+1)} d^alpha."""
        d = metric(self.xi, xi2, self.phi.nu)
        return self.C_phi * self.phi.beta ** n * self.nu_a ** (n + 1) * d ** self.phi.alpha

    def tail_bound(self, xi2: BiSequence, n: int | None = None) -> float:
        n = self.n if n is None else n
        d = metric(self.xi, xi2, self.phi.nu)
        return self.C_phi * self.nu_a * self.rate ** n * d ** self.phi.alpha / (1 - self.rate)

    def backward_shift(self) -> "UnstableGraph":
        """The graph through Phi^{-1}(xi, x)."""
        xprev = self.phi.entry(self.xi, -1).inv(self.x)
        return UnstableGraph(self.phi, shift(self.xi, -1), xprev, self.n)


class StableGraph:
    """gamma^s over the local stable set of xi, through (xi, x), computed from the inverse skew-product."""

    def __init__(self, phi: SkewProduct, xi: BiSequence, x, n: int | None = None):
        self.nu_a = phi.nu ** phi.alpha
        if not self.nu_a < phi.lam:
            raise ValueError(f"stable graphs need nu^alpha < lam ({self.nu_a} >= {phi.lam})")
        self.phi = phi
        self.star = inverse_skew_product(phi)
        self.xi = xi
        self.x = as_point(x)
        self.rate = self.nu_a / phi.lam
        self.C_phi = phi.holder_constant()
        self.C = self.C_phi / (1 - self.rate)
        self.n = n if n is not None else _depth_for(self.C_phi, self.rate)
        self._leaf = LocalStableSet(xi)

    def value(self, xi2: BiSequence, n: int | None = None) -> np.ndarray:
        if xi2 not in self._leaf:
            raise ValueError("sequence is not in the local stable set of the base")
        n = self.n if n is None else n
        # conjugation turns the stable leaf into an unstable one after a unit shift
        return _unstable_value(self.star, conjugate(shift(self.xi, -1)), self.x, conjugate(shift(xi2, -1)), n)

    __call__ = value

    def step_bound(self, xi2: BiSequence, n: int) -> float:
        """Bound on |gamma^{s,n+1} - gamma^{s,n}| at xi2: C (nu^alpha/lam)^n d^alpha."""
        d = metric(self.xi, xi2, self.phi.nu)
        return self.C_phi * self.rate ** n * d ** self.phi.alpha

    def tail_bound(self, xi2: BiSequence, n: int | None = None) -> float:
        n = self.n if n is None else n
        d = metric(self.xi, xi2, self.phi.nu)
        return self.C_phi * self.rate ** n * d ** self.phi.alpha / (1 - self.rate)

    def forward_shift(self) -> "StableGraph":
        """The graph through Phi(xi, x)."""
        return StableGraph(self.phi, shift(self.xi), self.phi.entry(self.xi)(self.x), self.n)


def unstable_graph_eval(phi: SkewProduct, xi: BiSequence, xi2: BiSequence, n: int, x=None) -> tuple[np.ndarray, float]:
    g = UnstableGraph(phi, xi, x, n)
    return g.value(xi2), g.tail_bound(xi2)


def stable_graph_eval(phi: SkewProduct, xi: BiSequence, x, xi2: BiSequence, n: int) -> tuple[np.ndarray, float]:
    g = StableGraph(phi, xi, x, n)
    return g.value(xi2), g.tail_bound(xi2)


@dataclass
class InvarianceReport:
    max_residual: float
    max_bound: float
    samples: int
    depth: int
    residuals: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r <= b for r, b in self.residuals)


def invariance_check(graph, samples: list, n: int | None = None) -> InvarianceReport:
    """Residuals of the functional equations of the graph at depth n.

    Unstable: phi^{-1}_{shift^-1 xi'}(gamma_xi(xi')) = gamma_{shift^-1 xi}(shift^-1 xi').
    Stable:   phi_{xi'}(gamma_{xi,x}(xi')) = gamma_{Phi(xi,x)}(shift xi').
    At equal depth the two sides are consecutive truncations of one
    limit, so the residual is bounded by a single Cauchy step (+1e-9).
    """
    if not isinstance(graph, (UnstableGraph, StableGraph)):
        raise ValueError("invariance_check expects an UnstableGraph or StableGraph")
    n = graph.n if n is None else n
    phi = graph.phi
    pairs = []
    if isinstance(graph, UnstableGraph):
        other = graph.backward_shift()
        for xi2 in samples:
            lhs = phi.entry(xi2, -1).inv(graph.value(xi2, n))
            rhs = other.value(shift(xi2, -1), n)
            bound = other.step_bound(shift(xi2, -1), n - 1) + 1e-9
            pairs.append((float(np.linalg.norm(lhs - rhs)), bound))
    else:
        other = graph.forward_shift()
        for xi2 in samples:
            lhs = phi.entry(xi2)(graph.value(xi2, n))
            rhs = other.value(shift(xi2), n)
            bound = other.step_bound(shift(xi2), n - 1) + 1e-9
            pairs.append((float(np.linalg.norm(lhs - rhs)), bound))
    res = [p[0] for p in pairs]
    return InvarianceReport(max(res, default=0.0), max((p[1] for p in pairs), default=0.0), len(pairs), n, pairs)
