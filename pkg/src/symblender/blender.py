"""Horizontal disks, the nested-set intersection algorithm and blender certificates.

A horizontal disk is the graph of a Holder map h over the local stable set
of a base sequence zeta (all sequences agreeing with zeta at indices >= 0).
:func:`disk_intersect` builds a past word one symbol at a time so that the
backward orbit of the disk point over the resulting sequence stays in B.

Two members of the depth-n relative cylinder (fixed past word of length n)
first differ at an index of absolute value >= n+1, so their distance is at
most nu^(n+1).  Both the enclosure of V_n and the pad of A_n use that
distance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .boxes import Box, as_point
from .fiber import (
    DomainEscape, SkewProduct, backward_orbit, compose_backward, inverse_skew_product, perturb,
    skew_distance,
)
from .ifs import IFS, CoveringCertificate, covering_check
from .invariant_graph import evaluate_graph
from .symbolic import BiSequence, random_sequence, shift, with_future, with_past, words

# horizontal disks ---------------------------------------------------------


class HorizontalDisk:
    """Graph of an (alpha, C)-Holder map h over the local stable set of ``zeta`` with slack ``delta``.

    h is either a table ``a`` of shape (J, symbols, dim) giving
    h(xi) = z + sum_j a[j-1, xi_{-j}-1], or a callable on sequences.
    """

    def __init__(self, zeta: BiSequence, z, alpha: float, C: float, delta: float, kind: str = "flat",
                 table=None, func: Callable | None = None, nu: float = 0.5, seed: int | None = None):
        if delta <= 0:
            raise ValueError("delta must be positive")
        if C < 0:
            raise ValueError("Holder constant must be non-negative")
        if table is not None and func is not None:
            raise ValueError("give a table or a callable, not both")
        self.zeta = zeta
        self.z = as_point(z)
        self.alpha = float(alpha)
        self.C = float(C)
        self.delta = float(delta)
        self.kind = kind
        self.nu = float(nu)
        self.seed = seed
        self.func = func
        self.table = None if table is None else np.asarray(table, dtype=float)
        if self.table is not None and (self.table.ndim != 3 or self.table.shape[2] != self.z.size):
            raise ValueError("disk table must have shape (J, symbols, dim)")

    # constructors
    @classmethod
    def flat(cls, zeta, z, delta, nu=0.5, alpha=1.0) -> "HorizontalDisk":
        return cls(zeta, z, alpha, 0.0, delta, "flat", nu=nu)

    @classmethod
    def tilted(cls, zeta, z, delta, symbols: int, nu=0.5, alpha=1.0, depth: int = 40) -> "HorizontalDisk":
        """h = z + c * sum_j eps(xi_{-j}) nu^(alpha j) e, eps = +1 on odd symbols, -1 on even."""
        z = as_point(z)
        nu_a = nu ** alpha
        c = 0.9 * delta * (1 - nu_a) / (2 * nu_a)
        e = np.ones(z.size) / math.sqrt(z.size)
        eps = np.array([1.0 if s % 2 else -1.0 for s in range(1, symbols + 1)])
        table = c * nu_a ** np.arange(1, depth + 1)[:, None, None] * eps[None, :, None] * e[None, None, :]
        return cls(zeta, z, alpha, table_holder(table, nu, alpha), delta, "tilted", table=table, nu=nu)

    @classmethod
    def random(cls, rng, zeta, z, delta, symbols: int, nu=0.5, alpha=1.0, depth: int = 20,
               seed: int | None = None) -> "HorizontalDisk":
        """Coefficients uniform in c*nu^(alpha j)*[-1, 1]^dim, sized so that C nu^alpha < delta."""
        z = as_point(z)
        nu_a = nu ** alpha
        c = 0.9 * delta * (1 - nu_a) / (2 * nu_a * math.sqrt(z.size))
        raw = rng.uniform(-1, 1, size=(depth, symbols, z.size))
        table = c * nu_a ** np.arange(1, depth + 1)[:, None, None] * raw
        return cls(zeta, z, alpha, table_holder(table, nu, alpha), delta, "random", table=table, nu=nu,
                   seed=seed)

    @classmethod
    def from_dict(cls, d: dict, symbols: int, nu: float = 0.5) -> "HorizontalDisk":
        for key in ("zeta", "z", "delta"):
            if key not in d:
                raise ValueError(f"disk description lacks field {key!r}")
        zeta = BiSequence.parse(d["zeta"])
        alpha = float(d.get("alpha", 1.0))
        kind = d.get("kind", "flat")
        delta = float(d["delta"])
        if "table" in d:
            table = np.asarray(d["table"], dtype=float)
            disk = cls(zeta, d["z"], alpha, table_holder(table, nu, alpha), delta, kind, table=table, nu=nu)
        elif kind == "flat":
            disk = cls.flat(zeta, d["z"], delta, nu, alpha)
        elif kind == "tilted":
            disk = cls.tilted(zeta, d["z"], delta, symbols, nu, alpha)
        elif kind == "random":
            seed = int(d.get("seed", 0))
            disk = cls.random(np.random.default_rng(seed), zeta, d["z"], delta, symbols, nu, alpha, seed=seed)
        else:
            raise ValueError(f"unknown disk kind {kind!r}")
        if "C" in d and float(d["C"]) < disk.C - 1e-15:
            raise ValueError(f"declared C = {d['C']} is below the Holder constant {disk.C} of the disk")
        return disk

    def to_dict(self) -> dict:
        d = {"zeta": str(self.zeta), "z": self.z.tolist(), "alpha": self.alpha, "C": self.C,
             "delta": self.delta, "kind": self.kind}
        if self.seed is not None:
            d["seed"] = self.seed
        return d

    # evaluation
    @property
    def dim(self) -> int:
        return self.z.size

    def __call__(self, xi: BiSequence) -> np.ndarray:
        if self.func is not None:
            return as_point(self.func(xi))
        if self.table is None:
            return self.z.copy()
        idx = np.array([xi[-j] - 1 for j in range(1, len(self.table) + 1)])
        if np.any(idx >= self.table.shape[1]):
            raise ValueError("sequence uses a symbol outside the disk table")
        return self.z + self.table[np.arange(len(self.table)), idx].sum(axis=0)

    def sup_offset(self) -> float | None:
        """Exact sup of |h - z| for table disks (None for callables)."""
        if self.func is not None:
            return None
        if self.table is None:
            return 0.0
        return float(np.sum(np.max(np.linalg.norm(self.table, axis=2), axis=1)))

    def validate(self, B: Box, symbols: int, samples: int = 64, seed: int = 0) -> None:
        """Raise ValueError unless z lies in B, C nu^alpha < delta (or C = 0) and |h - z| < delta."""
        if not B.contains(self.z, open=True):
            raise ValueError("disk centre is outside B")
        if self.C > 0 and not self.C * self.nu ** self.alpha < self.delta:
            raise ValueError(f"disk violates C nu^alpha < delta ({self.C * self.nu ** self.alpha} >= {self.delta})")
        sup = self.sup_offset()
        if sup is not None:
            if not sup < self.delta:
                raise ValueError("disk leaves the delta-ball around its centre")
            return
        rng = np.random.default_rng(seed)
        for _ in range(samples):
            xi = with_past(self.zeta, tuple(int(s) for s in rng.integers(1, symbols + 1, size=12)))
            if not np.linalg.norm(self(xi) - self.z) < self.delta:
                raise ValueError("disk leaves the delta-ball around its centre")

    def measured_diameter(self, word: tuple, symbols: int, samples: int = 16, seed: int = 0) -> float:
        """Largest sampled distance between h-values on the relative cylinder of ``word``."""
        rng = np.random.default_rng(seed)
        pts = [self(with_past(self.zeta, word))]
        for _ in range(samples):
            tail = tuple(int(s) for s in rng.integers(1, symbols + 1, size=int(rng.integers(1, 9))))
            pts.append(self(with_past(self.zeta, tail + tuple(word))))
        pts = np.array(pts)
        return float(np.max(np.linalg.norm(pts[:, None] - pts[None], axis=2)))


def table_holder(table: np.ndarray, nu: float, alpha: float) -> float:
    """Exact Holder bound of a table disk: max over l of sum_{j>=l} spread_j / nu^(alpha l)."""
    table = np.asarray(table, dtype=float)
    if table.size == 0:
        return 0.0
    diff = table[:, :, None, :] - table[:, None, :, :]
    spread = np.max(np.linalg.norm(diff, axis=3), axis=(1, 2))
    tails = np.cumsum(spread[::-1])[::-1]
    ell = np.arange(1, len(table) + 1)
    return float(np.max(tails / nu ** (alpha * ell)))


# backward divergence -------------------------------------------------------


def _lam_over(psi: SkewProduct, symbols: int | None = None) -> float:
    m = psi.depth
    return min(f.lam for w, f in psi.table.items() if symbols is None or w[m] <= symbols)


def backward_divergence_bound(psi: SkewProduct, i: int, d: float, lam: float | None = None) -> float:
    """C_psi nu^(-alpha i) sum_{j<i} (nu^alpha/lam)^j d^alpha."""
    if i < 0:
        raise ValueError("i must be non-negative")
    lam = psi.lam if lam is None else lam
    nu_a = psi.nu ** psi.alpha
    rate = nu_a / lam
    return psi.holder_constant() * nu_a ** -i * sum(rate ** j for j in range(i)) * d ** psi.alpha


@dataclass
class DivergenceReport:
    samples: int
    max_ratio: float
    max_measured: float
    violations: int
    records: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.violations == 0


def sample_backward_divergence(psi: SkewProduct, samples: int = 1000, max_i: int = 10, seed: int = 0,
                               graph_depth: int = 40) -> DivergenceReport:
    """Measure |psi^{-i}_{shift^-1 xi}(x) - psi^{-i}_{shift^-1 zeta}(x)| against the bound.

    xi is random, zeta agrees with xi on |l| < ell for ell in i+1..i+4 and
    differs at one of +-ell; x is the invariant-graph point over xi, whose
    backward orbits are checked against the domain.
    """
    rng = np.random.default_rng(seed)
    ratios, meas, recs = [], [], []
    for _ in range(samples):
        i = int(rng.integers(1, max_i + 1))
        ell = i + int(rng.integers(1, 5))
        xi = random_sequence(rng, psi.k)
        side = ell if rng.uniform() < 0.5 else -ell
        sym = int(rng.integers(1, psi.k)) if psi.k > 1 else 1
        new = sym if sym < xi[side] else sym + 1
        if psi.k == 1:
            zeta = xi
        elif side > 0:
            zeta = with_future(xi, tuple(xi[j] for j in range(1, side)) + (new,))
        else:
            zeta = with_past(xi, (new,) + tuple(xi[j] for j in range(side + 1, 0)))
        x = evaluate_graph(psi, xi, graph_depth)[0] if psi.beta < 1 else psi.D.center
        a = compose_backward(psi, shift(xi, -1), x, i)
        b = compose_backward(psi, shift(zeta, -1), x, i)
        d = psi.nu ** ell if zeta != xi else 0.0
        m = float(np.linalg.norm(a - b))
        bound = backward_divergence_bound(psi, i, d)
        ratio = 0.0 if m == 0 else (m / bound if bound > 0 else math.inf)
        ratios.append(ratio)
        meas.append(m)
        recs.append((i, ell, m, bound))
    return DivergenceReport(samples, max(ratios, default=0.0), max(meas, default=0.0),
                            sum(r > 1 for r in ratios), recs)


# disk intersection ----------------------------------------------------------


@dataclass
class IntersectionResult:
    success: bool
    word: tuple
    xi: BiSequence | None
    x: np.ndarray | None
    steps: list
    margins: list
    reason: str = ""
    L: float = 0.0

    @property
    def min_margin(self) -> float:
        return min(self.margins) if self.margins else -math.inf

    @property
    def laws_hold(self) -> bool:
        """Measured diam(V_n) <= C nu^(n alpha) and inflated extent of A_n < L at every step."""
        return all(s["V_measured"] <= s["V_bound"] + 1e-12 and s["A_extent"] < self.L for s in self.steps)

    def to_dict(self) -> dict:
        return {
            "success": self.success, "word": list(self.word), "xi": None if self.xi is None else str(self.xi),
            "x": None if self.x is None else self.x.tolist(), "steps": self.steps,
            "margins": self.margins, "reason": self.reason, "L": self.L,
        }


def _check_members(psi: SkewProduct, B: Box, members: list, symbols: int) -> None:
    m = psi.depth
    for w, f in psi.table.items():
        i = w[m]
        if i > symbols or members[i - 1] is None:
            continue
        # A strictly inside the member pulls back strictly inside this preimage
        if B.box_depth(f.preimage_box(members[i - 1])) < -1e-12:
            raise ValueError(f"member {i} is not inside the image of B under the entry at {w}")


def _preconditions(psi: SkewProduct, B: Box, cover: CoveringCertificate, H: HorizontalDisk, symbols: int):
    if not cover.verified:
        raise ValueError(f"covering is not certified ({cover.status})")
    if len(cover.members) < symbols:
        raise ValueError("covering certificate has fewer members than symbols")
    if H.dim != psi.dim:
        raise ValueError("disk and fiber dimensions differ")
    lam = _lam_over(psi, symbols)
    nu_a = psi.nu ** psi.alpha
    L = cover.lebesgue_lower_bound
    if not nu_a < lam:
        raise ValueError(f"need nu^alpha < lam ({nu_a} >= {lam})")
    if not H.delta < lam * L / 2:
        raise ValueError(f"delta = {H.delta} is not below lam*L/2 = {lam * L / 2}")
    total = psi.holder_constant() / (1 - nu_a / lam)
    if not total < L / 2:
        raise ValueError(f"Holder budget C/(1 - nu^alpha/lam) = {total} is not below L/2 = {L / 2}")
    _check_members(psi, B, cover.members[:symbols], symbols)
    H.validate(B, psi.k)
    return lam, nu_a, L


def disk_intersect(psi: SkewProduct, B: Box, cover: CoveringCertificate, H: HorizontalDisk, N: int = 30,
                   symbols: int | None = None, measure: bool = True) -> IntersectionResult:
    """Find xi in the local stable set of H's base with h(xi) in the forward-invariant part over B.

    Only symbols 1..``symbols`` (default all) enter the constructed past
    word.  Raises ValueError on violated preconditions; returns an
    unsuccessful result when no member contains some A_n.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    k = psi.k if symbols is None else int(symbols)
    if not 1 <= k <= psi.k:
        raise ValueError("symbols must lie in 1..k")
    lam, nu_a, L = _preconditions(psi, B, cover, H, k)
    members = cover.members[:k]
    C = H.C
    word: tuple = ()
    rep = H.zeta
    V = Box.around(H.z, H.delta).intersect(Box(B.lo, B.hi))
    if C > 0:
        V = V.intersect(Box.around(H(rep), C * nu_a))
    if V is None:
        raise ValueError("disk enclosure is empty; the declared Holder data is inconsistent")
    steps = []
    for n in range(N):
        A = V
        for j in range(1, n + 1):
            A = psi.entry(rep, -j).preimage_box(A)
        pad = backward_divergence_bound(psi, n, psi.nu ** (n + 1), lam)
        A = A.inflate(pad)
        depths = [(-math.inf if mb is None else mb.box_depth(A)) for mb in members]
        choice = next((i + 1 for i, dpt in enumerate(depths) if dpt > 0), None)
        record = {
            "n": n, "V_radius": float(np.max(V.sides) / 2), "V_bound": C * nu_a ** n,
            "V_measured": H.measured_diameter(word, psi.k, seed=n) if measure and C > 0 else 0.0,
            "A_extent": A.extent, "pad": pad, "member_depth": max(depths), "symbol": choice,
        }
        steps.append(record)
        if choice is None:
            return IntersectionResult(False, word, None, None, steps, [],
                                      f"no member contains A_{n} = {A}", L)
        word = (choice,) + word
        rep = with_past(H.zeta, word)
        nxt = V.intersect(Box.around(H(rep), C * nu_a ** (n + 2)))
        if nxt is None:
            raise ValueError("disk values leave the nested enclosure; the declared Holder constant is too small")
        V = nxt
    xi = rep
    x = H(xi)
    orbit = backward_orbit(psi, xi, x, N)
    margins = [float(B.depth(p)) for p in orbit]
    ok = min(margins) > 0
    return IntersectionResult(ok, word, xi, x, steps, margins, "" if ok else "backward orbit left B", L)


def embedded_disk_intersect(psi: SkewProduct, k: int, B: Box, cover: CoveringCertificate, H: HorizontalDisk,
                            N: int = 30) -> IntersectionResult:
    """disk_intersect for a skew-product on d >= k symbols whose past word uses only 1..k."""
    if not 1 <= k <= psi.k:
        raise ValueError("embedded alphabet must satisfy 1 <= k <= d")
    if k < psi.k:
        nu_a = psi.nu ** psi.alpha
        if not (nu_a < psi.lam and psi.beta < 1 / nu_a):
            raise ValueError("the ambient skew-product is not dominated (need nu^alpha < lam and beta < nu^-alpha)")
    return disk_intersect(psi, B, cover, H, N, symbols=k)


def brute_force_words(psi: SkewProduct, B: Box, H: HorizontalDisk, N: int, symbols: int | None = None):
    """All past words of length N (symbols 1..k) whose sequence keeps h(xi) backward in open B for n <= N.

    Returns (words array of shape (k^N, N), boolean admissibility mask).
    """
    k = psi.k if symbols is None else int(symbols)
    if N < 1 or k ** N > 2 ** 22:
        raise ValueError("brute force is limited to 1 <= N with k^N <= 2^22")
    W = np.array(list(words(k, N)), dtype=int)
    m = psi.depth
    zeta = H.zeta
    # columns hold indices -N-m .. m-1
    lo_idx = -N - m
    S = np.empty((len(W), N + 2 * m), dtype=int)
    S[:, :m] = [zeta[i] for i in range(lo_idx, -N)] if m else np.empty((len(W), 0), dtype=int)
    S[:, m:m + N] = W
    S[:, m + N:] = [zeta[i] for i in range(0, m)] if m else np.empty((len(W), 0), dtype=int)
    if H.func is None and H.table is not None:
        J = len(H.table)
        pts = np.repeat(H.z[None], len(W), axis=0)
        for j in range(1, J + 1):
            col = W[:, N - j] - 1 if j <= N else np.full(len(W), zeta[-j] - 1)
            pts = pts + H.table[j - 1][col]
    elif H.func is None:
        pts = np.repeat(H.z[None], len(W), axis=0)
    else:
        pts = np.array([H(with_past(zeta, tuple(int(s) for s in w))) for w in W])
    ok = _inside(B, pts)
    for j in range(1, N + 1):
        c = -j - lo_idx
        keys = S[:, c - m: c + m + 1]
        uniq, inv = np.unique(keys, axis=0, return_inverse=True)
        inv = inv.ravel()
        out = np.empty_like(pts)
        for u, key in enumerate(uniq):
            rows = inv == u
            f = psi.table[tuple(int(s) for s in key)]
            out[rows] = (pts[rows] - f.b) / f.a if f.is_affine else np.array([f.inv(p) for p in pts[rows]])
        pts = out
        ok &= _inside(B, pts)
    return W, ok


def _inside(B: Box, pts: np.ndarray) -> np.ndarray:
    return np.all((pts > B.lo) & (pts < B.hi), axis=1)


# certificates ---------------------------------------------------------------


@dataclass
class BlenderCertificate:
    passed: bool
    stage: str
    reason: str
    covering: CoveringCertificate | None
    delta_max: float = 0.0
    lam: float = 0.0
    L: float = 0.0
    holder_allowance: float = 0.0
    budget: float = 0.0
    radius: float = 0.0
    depth: int = 0
    seed: int = 0
    tests: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed, "stage": self.stage, "reason": self.reason,
            "covering": None if self.covering is None else self.covering.to_dict(),
            "delta_max": self.delta_max, "lam": self.lam, "L": self.L,
            "holder_allowance": self.holder_allowance, "budget": self.budget, "radius": self.radius,
            "depth": self.depth, "seed": self.seed, "tests": self.tests,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def disk_battery(B: Box, zeta_rng, delta: float, symbols: int, count: int, nu: float, alpha: float) -> list:
    """Flat disk at the centre, a tilted disk, and ``count`` random disks centred in B shrunk by delta."""
    inner = B.deflate(delta) or Box(B.center, B.center)
    disks = [HorizontalDisk.flat(random_sequence(zeta_rng, symbols), B.center, delta, nu, alpha),
             HorizontalDisk.tilted(random_sequence(zeta_rng, symbols), B.center, delta, symbols, nu, alpha)]
    for _ in range(count):
        seed = int(zeta_rng.integers(0, 2 ** 31))
        z = inner.sample(zeta_rng, 1)[0]
        disks.append(HorizontalDisk.random(np.random.default_rng(seed), random_sequence(zeta_rng, symbols), z,
                                           delta, symbols, nu, alpha, seed=seed))
    return disks


def certify_blender(phi: SkewProduct, B: Box, budget: float = 0.005, disks: int = 20, depth: int = 30,
                    perturbations: int = 5, seed: int = 0, safety: float = 0.1, r: int = 10) -> BlenderCertificate:
    """Covering certificate plus disk-intersection runs under sampled perturbations within the budget."""
    if not phi.is_one_step:
        raise ValueError("certify_blender takes a one-step skew-product")
    if budget < 0 or not 0 < safety < 1:
        raise ValueError("need budget >= 0 and 0 < safety < 1")
    nu_a = phi.nu ** phi.alpha
    if not phi.beta < 1:
        raise ValueError(f"certify_blender needs contracting fibers (beta = {phi.beta})")
    phi._check_domain()
    base = dict(budget=budget, depth=depth, seed=seed)
    cover = covering_check(IFS(phi.maps(), phi.D), B, r, budget)
    if not cover.verified:
        return BlenderCertificate(False, "covering", f"covering {cover.status}", cover, **base)
    if not nu_a < phi.lam:
        return BlenderCertificate(False, "constants", f"need nu^alpha < lam ({nu_a} >= {phi.lam})", cover, **base)
    lam, L = phi.lam, cover.lebesgue_lower_bound
    delta_max = lam * L / 2 * (1 - safety)
    allowance = L / 2 * (1 - nu_a / lam) * (1 - safety)
    cert = BlenderCertificate(False, "disks", "", cover, delta_max, lam, L, allowance, **base)
    rng = np.random.default_rng(seed)
    for p in range(perturbations):
        psi = perturb(phi, budget, rng, holder_depth=1) if budget > 0 else phi
        C_psi = psi.holder_constant()
        cert.radius = max(cert.radius, skew_distance(phi, psi))
        if not C_psi < allowance:
            cert.stage, cert.reason = "holder", f"perturbation {p}: C = {C_psi} exceeds the allowance {allowance}"
            return cert
        for n, H in enumerate(disk_battery(B, rng, delta_max, phi.k, disks, phi.nu, phi.alpha)):
            rec = {"perturbation": p, "C_psi": C_psi, "disk": H.to_dict()}
            try:
                res = disk_intersect(psi, B, cover, H, depth, measure=False)
            except (ValueError, DomainEscape) as exc:
                rec.update(success=False, reason=str(exc))
                cert.tests.append(rec)
                cert.stage, cert.reason = "disks", f"perturbation {p}, disk {n}: {exc}"
                return cert
            rec.update(success=res.success, word=list(res.word), x=res.x.tolist() if res.x is not None else None,
                       xi=None if res.xi is None else str(res.xi), min_margin=res.min_margin)
            cert.tests.append(rec)
            if not res.success:
                cert.stage, cert.reason = "disks", f"perturbation {p}, disk {n}: {res.reason}"
                return cert
    cert.passed, cert.stage, cert.reason = True, "done", ""
    return cert


def certify_cu_blender(phi: SkewProduct, B: Box, **kw) -> BlenderCertificate:
    """A cu-blender of an expanding one-step map is a cs-blender of its inverse skew-product."""
    if not phi.lam > 1:
        raise ValueError(f"certify_cu_blender needs expanding fibers (lam = {phi.lam})")
    return certify_blender(inverse_skew_product(phi), B, **kw)
