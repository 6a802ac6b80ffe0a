"""Symbolic cycles between a cs- and a cu-blender, and robust topological mixing.

Both checks rebuild every witness by direct orbit iteration under each
sampled perturbation; no stage reuses another stage's arithmetic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .blender import HorizontalDisk, _lam_over, embedded_disk_intersect
from .boxes import Box, as_point
from .fiber import (
    DomainEscape, FiberMap, SkewProduct, _apply, apply_translations, backward_orbit, compose_backward,
    compose_forward, forward_orbit, random_translations,
)
from .ifs import IFS, covering_check, translation_family
from .invariant_graph import evaluate_graph
from .laminations import StableGraph, _depth_for
from .symbolic import BiSequence, metric, shift, with_past, words

LE_TOL = 1e-12


@dataclass
class Stage:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


def _maps_to_dict(maps) -> list:
    return [f.to_dict() for f in maps]


def _maps_from_dict(items, dim: int) -> list:
    return [FiberMap.from_dict(e, dim) for e in items]


def _box(d) -> Box:
    return Box.from_dict(d)


# cycles ---------------------------------------------------------------------


@dataclass
class CycleScenario:
    """Global maps phi_1..phi_{k+2} (covering family then two transitions) with local affine models.

    ``local_cs`` are the covering maps on D_cs and ``local_cu`` on D_cu;
    the global maps must agree with them there.  The transition witness
    is phi_{k+1}^n(x) in B_cu and phi_{k+2}^m(y) in B_cs.
    """

    k: int
    maps: list
    local_cs: list
    local_cu: list
    D: Box
    D_cs: Box
    D_cu: Box
    B_cs: Box
    B_cu: Box
    x: np.ndarray
    n: int
    y: np.ndarray
    m: int
    nu: float = 0.5
    alpha: float = 1.0

    def __post_init__(self):
        if len(self.maps) != self.k + 2 or len(self.local_cs) != self.k or len(self.local_cu) != self.k:
            raise ValueError("a cycle scenario needs k local maps per region and k+2 global maps")
        if self.n < 1 or self.m < 1:
            raise ValueError("transition times must be positive")
        self.x, self.y = as_point(self.x), as_point(self.y)

    @property
    def d(self) -> int:
        return self.k + 2

    def skew(self) -> SkewProduct:
        return SkewProduct.one_step(self.maps, self.D, alpha=self.alpha, nu=self.nu, check=False)

    def cs_skew(self) -> SkewProduct:
        return SkewProduct.one_step(self.local_cs, self.D_cs, alpha=self.alpha, nu=self.nu, check=False)

    def to_dict(self) -> dict:
        return {
            "type": "cycle", "k": self.k, "maps": _maps_to_dict(self.maps),
            "local_cs": _maps_to_dict(self.local_cs), "local_cu": _maps_to_dict(self.local_cu),
            "D": self.D.to_dict(), "D_cs": self.D_cs.to_dict(), "D_cu": self.D_cu.to_dict(),
            "B_cs": self.B_cs.to_dict(), "B_cu": self.B_cu.to_dict(),
            "x": self.x.tolist(), "n": self.n, "y": self.y.tolist(), "m": self.m,
            "nu": self.nu, "alpha": self.alpha,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CycleScenario":
        try:
            D = _box(d["D"])
            return cls(int(d["k"]), _maps_from_dict(d["maps"], D.dim), _maps_from_dict(d["local_cs"], D.dim),
                       _maps_from_dict(d["local_cu"], D.dim), D, _box(d["D_cs"]), _box(d["D_cu"]),
                       _box(d["B_cs"]), _box(d["B_cu"]), d["x"], int(d["n"]), d["y"], int(d["m"]),
                       float(d.get("nu", 0.5)), float(d.get("alpha", 1.0)))
        except KeyError as exc:
            raise ValueError(f"cycle scenario lacks field {exc.args[0]!r}") from None


def default_cycle_scenario(cs_shifts=(-1 / 3, 0.0, 1 / 3), cu_shifts=(-1 / 3, 0.0, 1 / 3),
                           transitions=(1.25, -1.25), n: int = 4, m: int = 4) -> CycleScenario:
    """1-D scenario: sink-side family 0.6x + v on D_cs = (-1, 1), source-side family with
    inverses 0.6(y - 5) + 5 + w on D_cu = (4, 6), joined piecewise linearly; transitions are
    the translations x + 1.25 and x - 1.25."""
    if len(cs_shifts) != len(cu_shifts):
        raise ValueError("both local families need the same number of maps")
    lam, q = 0.6, 5.0
    local_cs = [FiberMap.affine(lam, v) for v in cs_shifts]
    local_cu = [FiberMap.affine(1 / lam, q - (q + w) / lam) for w in cu_shifts]
    knots = np.array([-1.0, 1.0, 4.0, 6.0])
    maps = []
    for f, g in zip(local_cs, local_cu):
        ys = [f(knots[0])[0], f(knots[1])[0], g(knots[2])[0], g(knots[3])[0]]
        maps.append(FiberMap.piecewise_linear(knots, ys))
    maps += [FiberMap.affine(1.0, transitions[0]), FiberMap.affine(1.0, transitions[1])]
    return CycleScenario(len(local_cs), maps, local_cs, local_cu, Box([-3.0], [9.0]), Box([-1.0], [1.0]),
                         Box([4.0], [6.0]), Box([-0.5], [0.5]), Box([4.5], [5.5]), [0.0], n, [q], m)


@dataclass
class CycleReport:
    passed: bool
    failed_stage: str | None
    reason: str
    stages: list
    perturbations: list
    budget: float
    depth: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "passed": self.passed, "failed_stage": self.failed_stage, "reason": self.reason,
            "stages": [s.to_dict() for s in self.stages], "perturbations": self.perturbations,
            "budget": self.budget, "depth": self.depth, "seed": self.seed,
        }


def _coherent(global_maps, local_maps, region: Box, samples: int = 256) -> float:
    pts = region.grid(samples if region.dim == 1 else 16)
    return max(float(np.max(np.abs(_apply(g, pts) - _apply(f, pts)))) for g, f in zip(global_maps, local_maps))


def _cycle_hypotheses(sc: CycleScenario, budget: float, r: int) -> tuple[list, dict]:
    k = sc.k
    stages = []
    # geometry
    disjoint = sc.D_cs.intersect(sc.D_cu) is None or np.any(
        (sc.D_cs.hi <= sc.D_cu.lo) | (sc.D_cu.hi <= sc.D_cs.lo))
    gap_cs = _coherent(sc.maps[:k], sc.local_cs, sc.D_cs)
    gap_cu = _coherent(sc.maps[:k], sc.local_cu, sc.D_cu)
    geo = bool(disjoint and sc.D_cs.contains_box(sc.B_cs, open=True) and sc.D_cu.contains_box(sc.B_cu, open=True)
               and gap_cs < 1e-9 and gap_cu < 1e-9
               and all(sc.D_cs.contains_box(f.image_box(sc.D_cs), open=True) for f in sc.local_cs)
               and all(sc.D_cu.contains_box(f.preimage_box(sc.D_cu), open=True) for f in sc.local_cu))
    stages.append(Stage("geometry", geo, {"disjoint": bool(disjoint), "local_gap_cs": gap_cs, "local_gap_cu": gap_cu}))
    # constants chain, equalities allowed between lam and beta of each region
    nu_a = sc.nu ** sc.alpha
    gam = min(f.lam for f in sc.maps)
    gam_hat_inv = max(f.beta for f in sc.maps)
    l_cs, b_cs = min(f.lam for f in sc.local_cs), max(f.beta for f in sc.local_cs)
    l_cu, b_cu = min(f.lam for f in sc.local_cu), max(f.beta for f in sc.local_cu)
    chain = (nu_a < gam <= l_cs + LE_TOL and l_cs <= b_cs + LE_TOL and b_cs < 1 < l_cu and l_cu <= b_cu + LE_TOL
             and b_cu <= gam_hat_inv + LE_TOL and gam_hat_inv < 1 / nu_a)
    consts = {"nu_alpha": nu_a, "gamma": gam, "lam_cs": l_cs, "beta_cs": b_cs, "lam_cu": l_cu, "beta_cu": b_cu,
              "gamma_hat_inv": gam_hat_inv}
    stages.append(Stage("constants", bool(chain), consts))
    cov_cs = covering_check(IFS(sc.local_cs, sc.D_cs), sc.B_cs, r, budget)
    stages.append(Stage("covering-cs", cov_cs.verified, cov_cs.to_dict()))
    cov_cu = covering_check(IFS([f.inverse() for f in sc.local_cu], sc.D_cu), sc.B_cu, r, budget)
    stages.append(Stage("covering-cu", cov_cu.verified, cov_cu.to_dict()))
    # cyclic intersections on the nominal maps
    fx = sc.x.copy()
    for _ in range(sc.n):
        fx = sc.maps[k](fx)
    gy = sc.y.copy()
    for _ in range(sc.m):
        gy = sc.maps[k + 1](gy)
    ok = (sc.B_cs.depth(sc.x) > 0 and sc.B_cu.depth(sc.y) > 0 and sc.B_cu.depth(fx) > 0 and sc.B_cs.depth(gy) > 0)
    stages.append(Stage("cyclic-intersections", bool(ok), {
        "x_image": fx.tolist(), "x_image_margin": sc.B_cu.depth(fx),
        "y_image": gy.tolist(), "y_image_margin": sc.B_cs.depth(gy)}))
    return stages, {"cs": cov_cs, "cu": cov_cu, "beta_cs": b_cs}


def _leg_a(sc: CycleScenario, psi: SkewProduct, psi_cs: SkewProduct, beta_cs: float, rng, N: int) -> dict:
    """Forward orbit of (xi, y), xi with k+2 on 0..m-1, enters D_cs and approaches the cs graph."""
    k, m = sc.k, sc.m
    past = tuple(int(s) for s in rng.integers(1, k + 1, size=8))
    fut = (k + 2,) * m + tuple(int(s) for s in rng.integers(1, k + 1, size=N))
    xi = BiSequence.make(past, (1,), fut, (1,))
    fwd = forward_orbit(psi, xi, sc.y, m + N)
    fmarg = [float(sc.D_cs.depth(p)) for p in fwd[m:]]
    eta = with_past(shift(xi, m), (1,) * (m + 2))
    tol = 2 * beta_cs ** 40 * psi_cs.D.diameter + LE_TOL
    dist = [float(np.linalg.norm(fwd[m + j] - evaluate_graph(psi_cs, shift(eta, j), 40)[0])) for j in range(N + 1)]
    rate_ok = all(dist[j + 1] <= beta_cs * dist[j] + tol for j in range(psi.depth, N))
    bwd = backward_orbit(psi, xi, sc.y, N)
    bmarg = [float(sc.D_cu.depth(p)) for p in bwd]
    passed = min(fmarg) > 0 and min(bmarg) > 0 and rate_ok
    return {"passed": bool(passed), "xi": str(xi), "y": sc.y.tolist(), "forward_margin": min(fmarg),
            "backward_margin": min(bmarg), "graph_distance": dist, "rate_ok": bool(rate_ok)}


def _greedy_future(maps, B: Box, x, length: int) -> tuple:
    word, cur = [], as_point(x)
    for _ in range(length):
        depths = [B.depth(f(cur)) for f in maps]
        i = int(np.argmax(depths))
        if depths[i] <= 0:
            raise ValueError("greedy address left the box; the inverse covering fails at this point")
        word.append(i + 1)
        cur = maps[i](cur)
    return tuple(word)


def _leg_b(sc: CycleScenario, psi: SkewProduct, cover_cs, rng, N: int, safety: float, graph_tol: float) -> dict:
    """Strong-stable disk of a cu point, pulled back into B_cs, meets the cs unstable lamination."""
    k, n = sc.k, sc.n
    w0 = sc.x.copy()
    for _ in range(n):
        w0 = sc.maps[k](w0)
    C_psi = psi.holder_constant()
    nu_a = psi.nu ** psi.alpha
    n_g = _depth_for(C_psi, nu_a / psi.lam, graph_tol)
    L_f = n_g + n + N + 10
    fut = _greedy_future(sc.local_cu, sc.B_cu, w0, L_f)
    xi = BiSequence.make((), (1,), fut, (1,))
    M = L_f + 60
    w = compose_backward(psi, shift(xi, M - 1), sc.local_cu[0].fixed_point(sc.B_cu.center), M, check_domain=False)
    cu_orbit = forward_orbit(psi, xi, w, N)
    cu_margin = min(float(sc.D_cu.depth(p)) for p in cu_orbit)
    zeta = with_past(xi, (k + 1,) * n)
    z = StableGraph(psi, xi, w, n=n_g)(zeta)
    z_back = compose_backward(psi, shift(zeta, -1), z, n, check_domain=False)
    base = shift(zeta, -n)
    leaf = StableGraph(psi, base, z_back, n=n_g + n)
    lam = _lam_over(psi, k)
    delta = lam * cover_cs.lebesgue_lower_bound / 2 * (1 - safety)
    rec = {"w": w.tolist(), "cu_margin": cu_margin, "z": z.tolist(), "z_pulled": z_back.tolist(),
           "z_pulled_margin": float(sc.B_cs.depth(z_back)), "graph_depth": n_g, "disk_C": leaf.C, "delta": delta}
    H = HorizontalDisk(base, z_back, psi.alpha, leaf.C, delta, "stable-graph", func=leaf.value, nu=psi.nu)
    res = embedded_disk_intersect(psi, k, sc.B_cs, cover_cs, H, N)
    rec.update(word=list(res.word), xi=None if res.xi is None else str(res.xi),
               x=None if res.x is None else res.x.tolist(), backward_margin=res.min_margin,
               laws_hold=res.laws_hold)
    if not res.success:
        rec.update(passed=False, reason=res.reason)
        return rec
    fwd = forward_orbit(psi, res.xi, res.x, n + N)
    fmarg = min(float(sc.D_cu.depth(p)) for p in fwd[n:])
    rec["forward_margin"] = fmarg
    rec["passed"] = bool(cu_margin > 0 and rec["z_pulled_margin"] > 0 and res.min_margin > 0 and fmarg > 0)
    return rec


def verify_cycle(sc: CycleScenario, budget: float = 0.005, depth: int = 30, perturbations: int = 20,
                 seed: int = 0, r: int = 10, safety: float = 0.1, graph_tol: float = 1e-6) -> CycleReport:
    """Check the cycle hypotheses, then both legs under each sampled perturbation within the budget."""
    if depth < 1 or budget < 0:
        raise ValueError("need depth >= 1 and budget >= 0")
    stages, data = _cycle_hypotheses(sc, budget, r)
    args = (budget, depth, seed)
    for s in stages:
        if not s.passed:
            return CycleReport(False, s.name, f"stage {s.name} failed", stages, [], *args)
    nominal, nominal_cs = sc.skew(), sc.cs_skew()
    rng = np.random.default_rng(seed)
    runs = []
    count = perturbations if budget > 0 else 1
    for p in range(count):
        if budget > 0:
            shifts = random_translations(nominal, budget, rng, holder_depth=1)
            psi = apply_translations(nominal, shifts)
            psi_cs = apply_translations(nominal_cs, {w: v for w, v in shifts.items() if max(w) <= sc.k})
        else:
            psi, psi_cs = nominal, nominal_cs
        rec = {"perturbation": p, "C_psi": psi.holder_constant()}
        try:
            rec["leg_a"] = _leg_a(sc, psi, psi_cs, data["beta_cs"], rng, depth)
        except (ValueError, DomainEscape) as exc:
            rec["leg_a"] = {"passed": False, "reason": str(exc)}
        try:
            rec["leg_b"] = _leg_b(sc, psi, data["cs"], rng, depth, safety, graph_tol)
        except (ValueError, DomainEscape) as exc:
            rec["leg_b"] = {"passed": False, "reason": str(exc)}
        runs.append(rec)
    a_ok = all(r_["leg_a"]["passed"] for r_ in runs)
    b_ok = all(r_["leg_b"]["passed"] for r_ in runs)
    stages.append(Stage("leg-a", a_ok, {"runs": len(runs)}))
    stages.append(Stage("leg-b", b_ok, {"runs": len(runs)}))
    failed = next((s.name for s in stages if not s.passed), None)
    return CycleReport(failed is None, failed, "" if failed is None else f"stage {failed} failed", stages, runs,
                       *args)


# mixing ---------------------------------------------------------------------


@dataclass
class MixingScenario:
    """One-step maps on d symbols: a covering family 1..k on B (phi_1 with the sink p) and,
    when ``repeller`` is set, a map with a source q in B."""

    k: int
    maps: list
    B: Box
    window: Box
    attractor: int = 1
    repeller: int | None = None
    nu: float = 0.5
    alpha: float = 1.0

    def __post_init__(self):
        if not 1 <= self.k <= len(self.maps):
            raise ValueError("need 1 <= k <= number of maps")
        if not 1 <= self.attractor <= self.k:
            raise ValueError("the attracting map must belong to the covering family")
        if self.repeller is not None and not self.k < self.repeller <= len(self.maps):
            raise ValueError("the repelling map must lie outside the covering family")

    @property
    def d(self) -> int:
        return len(self.maps)

    def skew(self) -> SkewProduct:
        return SkewProduct.one_step(self.maps, self.window, alpha=self.alpha, nu=self.nu, check=False)

    @property
    def p(self) -> np.ndarray:
        return self.maps[self.attractor - 1].fixed_point(self.B.center)

    @property
    def q(self) -> np.ndarray | None:
        return None if self.repeller is None else self.maps[self.repeller - 1].fixed_point(self.B.center)

    def to_dict(self) -> dict:
        return {"type": "mixing", "k": self.k, "maps": _maps_to_dict(self.maps), "B": self.B.to_dict(),
                "window": self.window.to_dict(), "attractor": self.attractor, "repeller": self.repeller,
                "nu": self.nu, "alpha": self.alpha}

    @classmethod
    def from_dict(cls, d: dict) -> "MixingScenario":
        try:
            B = _box(d["B"])
            return cls(int(d["k"]), _maps_from_dict(d["maps"], B.dim), B, _box(d["window"]),
                       int(d.get("attractor", 1)), d.get("repeller"), float(d.get("nu", 0.5)),
                       float(d.get("alpha", 1.0)))
        except KeyError as exc:
            raise ValueError(f"mixing scenario lacks field {exc.args[0]!r}") from None


def default_mixing_scenario(q: float = 0.2, with_repeller: bool = True) -> MixingScenario:
    """Translates of 0.6x covering B = (-1, 1) (the untranslated map first, sink p = 0) and
    the source map (x - q)/0.6 + q."""
    fam = translation_family(FiberMap.affine(0.6, 0.0), Box([-1.0], [1.0]), require_original=True)
    order = sorted(range(fam.k), key=lambda i: (float(np.abs(fam.translations[i]).max()) > 0, i))
    maps = [fam.maps[i] for i in order]
    rep = None
    if with_repeller:
        maps.append(FiberMap.affine(1 / 0.6, q - q / 0.6))
        rep = len(maps)
    return MixingScenario(fam.k, maps, fam.B, Box([-1.5], [1.5]), 1, rep)


class _Seq:
    """A finite symbol list with a default symbol outside, indexed from ``origin``."""

    def __init__(self, syms, origin: int = 0, fill: int = 1):
        self.syms = list(syms)
        self.origin = origin
        self.fill = fill

    def __getitem__(self, i):
        j = i + self.origin
        return self.syms[j] if 0 <= j < len(self.syms) else self.fill


def _entry(psi: SkewProduct, seq, i: int) -> FiberMap:
    m = psi.depth
    return psi.table[tuple(seq[j] for j in range(i - m, i + m + 1))]


def _robust_preimage(psi: SkewProduct, J: Box, s: int, right: int) -> Box | None:
    """Intersection over every left neighbour a of the preimage of J under the entry (a, s, right)."""
    if psi.depth == 0:
        return psi.table[(s,)].preimage_box(J)
    if psi.depth != 1:
        raise ValueError("witness construction supports depth 0 and 1")
    out = None
    for a in range(1, psi.k + 1):
        P = psi.table[(a, s, right)].preimage_box(J)
        out = P if out is None else out.intersect(P)
        if out is None:
            return None
    return out


def _fixed_point_type(psi: SkewProduct, theta: BiSequence, p) -> str:
    P = len(theta.fut_period)
    lo = hi = 1.0
    for j in range(P):
        f = psi.entry(theta, j)
        lo, hi = lo * f.lam, hi * f.beta
    if hi < 1:
        return "attracting"
    if lo > 1:
        return "repelling"
    return "neutral"


@dataclass
class DensityReport:
    direction: str
    cells: int
    reached: int
    worst_length: int
    resolution: int
    horizon: int

    @property
    def fraction(self) -> float:
        return self.reached / self.cells if self.cells else 0.0

    @property
    def passed(self) -> bool:
        return self.cells > 0 and self.reached == self.cells

    def to_dict(self) -> dict:
        return {"direction": self.direction, "cells": self.cells, "reached": self.reached,
                "fraction": self.fraction, "worst_length": self.worst_length, "resolution": self.resolution,
                "horizon": self.horizon}


def density_check(psi: SkewProduct, theta: BiSequence, p, direction: str, window: Box, r: int = 5,
                  horizon: int = 40, word_length: int = 2) -> DensityReport:
    """Fraction of cells (cylinder of a length-``word_length`` word x fiber cell of side 2^-r)
    from which (theta, p) is reached within the horizon.

    stable: xi = word then theta's future, iterate forward until the fiber
    point is within 2^-r of p at a matching phase and the base within
    2^-r of the orbit of theta.  unstable: the word sits at -len..-1
    after theta's past and the iteration runs backward.
    """
    if direction not in ("stable", "unstable"):
        raise ValueError("direction must be 'stable' or 'unstable'")
    if not theta.is_periodic():
        raise ValueError("theta must be shift-periodic")
    p = as_point(p)
    P = len(theta.fut_period)
    if np.linalg.norm(compose_forward(psi, theta, p, P, check_domain=False) - p) > 1e-9:
        raise ValueError("p is not a fixed point of the fiber return map over theta")
    kind = _fixed_point_type(psi, theta, p)
    want = "attracting" if direction == "stable" else "repelling"
    if kind != want:
        raise ValueError(f"{direction} density needs a {want} fixed point, got {kind}")
    eps = 2.0 ** -r
    n_axis = np.maximum(1, np.ceil(window.sides / eps)).astype(int)
    cell = window.sides / n_axis
    grids = np.meshgrid(*[window.lo[j] + (np.arange(n_axis[j]) + 0.5) * cell[j] for j in range(window.dim)],
                        indexing="ij")
    centres = np.stack([g.ravel() for g in grids], axis=1)
    base_steps = max(0, math.ceil(math.log(eps) / math.log(psi.nu)))
    reached, worst, total = 0, 0, 0
    for w in words(psi.k, word_length):
        if direction == "stable":
            xi = BiSequence.make(theta.past_transient, theta.past_period, w, theta.fut_period)
        else:
            xi = BiSequence.make(w, theta.past_period, theta.future_transient, theta.fut_period)
        pts = centres.copy()
        done = np.zeros(len(pts), dtype=bool)
        steps = np.zeros(len(pts), dtype=int)
        for t in range(1, horizon + 1):
            if direction == "stable":
                f = psi.entry(xi, t - 1)
                pts = f(pts.ravel()).reshape(pts.shape) if pts.shape[1] == 1 else np.array([f(x) for x in pts])
            else:
                f = psi.entry(xi, -t)
                pts = f.inv(pts.ravel()).reshape(pts.shape) if pts.shape[1] == 1 else np.array([f.inv(x) for x in pts])
            if t >= word_length + base_steps and (t - word_length) % P == 0:
                close = np.linalg.norm(pts - p, axis=1) < eps
                new = close & ~done
                steps[new] = t
                done |= close
        total += len(pts)
        reached += int(done.sum())
        if done.any():
            worst = max(worst, int(steps[done].max()))
    return DensityReport(direction, total, reached, worst, r, horizon)


@dataclass
class PairWitness:
    u: tuple
    U: Box
    v: tuple
    V: Box
    n0: int | None
    verified: list = field(default_factory=list)
    cover_word: tuple = ()
    j: int = 0
    reason: str = ""

    @property
    def passed(self) -> bool:
        return self.n0 is not None and all(ok for _, ok, _ in self.verified)

    def to_dict(self) -> dict:
        return {"u": list(self.u), "U": self.U.to_dict(), "v": list(self.v), "V": self.V.to_dict(),
                "n0": self.n0, "cover_word": list(self.cover_word), "j": self.j, "reason": self.reason,
                "verified": [{"n": n, "ok": ok, "margin": mg} for n, ok, mg in self.verified]}


def _word_for(u, s, c, j, sc: MixingScenario) -> list:
    return list(u) + [sc.attractor] * s + list(c) + [sc.repeller] * j


def _cover_block(psi: SkewProduct, sc: MixingScenario, V: Box, v: tuple, max_j: int = 10, max_m: int = 80):
    """Covering word c and j with every point of closure(B) carried into V by c then j copies of the repeller.

    Built right to left; each preimage is intersected over the unknown
    left neighbour so the block works whatever precedes it.
    """
    rep = sc.repeller
    right = v[0]
    T = V
    j = 0
    while j < max_j:
        T = _robust_preimage(psi, T, rep, right)
        right = rep
        j += 1
        if T is None:
            return None, 0, None
        if sc.B.depth(T.center) > 0:
            break
    else:
        return None, 0, None
    J = T
    word: list = []
    right = rep
    for _ in range(max_m):
        if J.box_depth(sc.B) > 0:
            return tuple(word), j, J
        best = None
        for s in range(1, sc.k + 1):
            P = _robust_preimage(psi, J, s, right)
            if P is None:
                continue
            score = sc.B.depth(P.center)
            if best is None or score > best[0]:
                best = (score, s, P)
        if best is None:
            return None, j, None
        _, s, J = best
        word.insert(0, s)
        right = s
    return None, j, None


def _run(psi: SkewProduct, word: list, tail: tuple, x, n: int) -> np.ndarray:
    seq = _Seq(list(word) + list(tail), origin=0, fill=1)
    y = as_point(x)
    for i in range(n):
        y = _entry(psi, seq, i)(y)
    return y


def mixing_witness(psi: SkewProduct, sc: MixingScenario, u: tuple, U: Box, v: tuple, V: Box,
                   horizon: int) -> PairWitness:
    """Witness Psi^n(cyl(u) x U) meets cyl(v) x V for n0 <= n <= horizon, checked by direct iteration."""
    out = PairWitness(tuple(u), U, tuple(v), V, None)
    if sc.repeller is None:
        out.reason = "no repelling map"
        return out
    c, j, J = _cover_block(psi, sc, V, v)
    if c is None:
        out.reason = "no covering block reaches V"
        return out
    out.cover_word, out.j = c, j
    x = U.center
    base = len(u) + len(c) + j
    s0 = None
    for s in range(0, horizon - base + 1):
        word = _word_for(u, s, c, j, sc)
        seq = _Seq(word + list(v), fill=1)
        y = as_point(x)
        for i in range(len(u) + s):
            y = _entry(psi, seq, i)(y)
        if J.depth(y) > 0:
            s0 = s
            break
    if s0 is None:
        out.reason = f"stable leg does not reach the covering block within horizon {horizon}"
        return out
    out.n0 = base + s0
    for n in range(out.n0, horizon + 1):
        word = _word_for(u, n - base, c, j, sc)
        y = _run(psi, word, v, x, n)
        mg = float(V.depth(y))
        out.verified.append((n, mg > 0 and U.contains(x, open=True), mg))
    return out


@dataclass
class MixingReport:
    passed: bool
    failed_stage: str | None
    reason: str
    stages: list
    perturbations: list
    n0_max: int | None
    budget: float
    pairs: int
    horizon: int
    seed: int

    def to_dict(self) -> dict:
        return {"passed": self.passed, "failed_stage": self.failed_stage, "reason": self.reason,
                "stages": [s.to_dict() for s in self.stages], "perturbations": self.perturbations,
                "n0_max": self.n0_max, "budget": self.budget, "pairs": self.pairs, "horizon": self.horizon,
                "seed": self.seed}


def _periodic_marker(psi: SkewProduct, symbol: int, start) -> dict:
    theta = BiSequence.constant(symbol)
    f = psi.entry(theta)
    p = f.fixed_point(start)
    kind = "attracting" if f.beta < 1 else ("repelling" if f.lam > 1 else "neutral")
    return {"sequence": str(theta), "point": as_point(p).tolist(), "type": kind,
            "multiplier": [f.lam, f.beta]}


def sample_pairs(sc: MixingScenario, count: int, rng, r: int = 5, max_len: int = 3) -> list:
    side = 2.0 ** -(r - 1)
    inner = sc.window.deflate(side / 2)
    out = []
    for _ in range(count):
        u = tuple(int(s) for s in rng.integers(1, sc.d + 1, size=int(rng.integers(1, max_len + 1))))
        v = tuple(int(s) for s in rng.integers(1, sc.d + 1, size=int(rng.integers(1, max_len + 1))))
        U = Box.cube(inner.sample(rng, 1)[0], side)
        V = Box.cube(inner.sample(rng, 1)[0], side)
        out.append((u, U, v, V))
    return out


def verify_mixing(sc: MixingScenario, budget: float = 0.005, pairs: int = 100, horizon: int = 40,
                  perturbations: int = 20, seed: int = 0, r: int = 5, n0_limit: int | None = None) -> MixingReport:
    """Covering, fixed-point and density hypotheses, then witnessed pairs under sampled perturbations."""
    if pairs < 1 or horizon < 0 or budget < 0:
        raise ValueError("need pairs >= 1, horizon >= 0 and budget >= 0")
    rng = np.random.default_rng(seed)
    stages = []
    args = dict(budget=budget, pairs=pairs, horizon=horizon, seed=seed)
    cover = covering_check(IFS(sc.maps[:sc.k], sc.window), sc.B, 10, budget)
    stages.append(Stage("covering", cover.verified, cover.to_dict()))
    p, q = sc.p, sc.q
    fp = {"p": p.tolist(), "p_in_B": bool(sc.B.contains(p, open=True)),
          "p_attracting": sc.maps[sc.attractor - 1].beta < 1}
    if q is not None:
        fp.update(q=q.tolist(), q_in_B=bool(sc.B.contains(q, open=True)), q_repelling=sc.maps[sc.repeller - 1].lam > 1)
    fp_ok = fp["p_in_B"] and fp["p_attracting"] and q is not None and fp["q_in_B"] and fp["q_repelling"]
    stages.append(Stage("fixed-points", bool(fp_ok), fp))
    nominal = sc.skew()
    for direction, sym, pt in (("stable", sc.attractor, p), ("unstable", sc.repeller or sc.attractor, q)):
        try:
            pt = p if pt is None else pt
            rep = density_check(nominal, BiSequence.constant(sym), pt, direction, sc.window, r, horizon)
            stages.append(Stage(f"density-{direction}", rep.passed, rep.to_dict()))
        except ValueError as exc:
            stages.append(Stage(f"density-{direction}", False, {"reason": str(exc)}))
    for s in stages:
        if not s.passed:
            return MixingReport(False, s.name, f"stage {s.name} failed", stages, [], None, **args)
    sample = sample_pairs(sc, pairs, rng, r)
    runs = []
    n0_max = 0
    count = perturbations if budget > 0 else 1
    for k_ in range(count):
        psi = apply_translations(nominal, random_translations(nominal, budget, rng, 1)) if budget > 0 else nominal
        rec = {"perturbation": k_, "C_psi": psi.holder_constant(),
               "markers": [_periodic_marker(psi, sc.attractor, p), _periodic_marker(psi, sc.repeller, q)]}
        dens = [density_check(psi, BiSequence.constant(sc.attractor),
                              psi.entry(BiSequence.constant(sc.attractor)).fixed_point(p), "stable", sc.window, r,
                              horizon),
                density_check(psi, BiSequence.constant(sc.repeller),
                              psi.entry(BiSequence.constant(sc.repeller)).fixed_point(q), "unstable", sc.window, r,
                              horizon)]
        rec["density"] = [d.to_dict() for d in dens]
        wits = [mixing_witness(psi, sc, u, U, v, V, horizon) for u, U, v, V in sample]
        rec["witnesses"] = [w.to_dict() for w in wits]
        rec["witnessed"] = sum(w.passed for w in wits)
        n0s = [w.n0 for w in wits if w.n0 is not None]
        rec["n0_max"] = max(n0s) if n0s else None
        markers_ok = {m["type"] for m in rec["markers"]} == {"attracting", "repelling"}
        rec["passed"] = bool(all(d.passed for d in dens) and all(w.passed for w in wits) and markers_ok
                             and (n0_limit is None or (n0s and max(n0s) <= n0_limit)))
        n0_max = max([n0_max] + n0s)
        runs.append(rec)
    ok = all(r_["passed"] for r_ in runs)
    stages.append(Stage("pairs", ok, {"runs": len(runs), "n0_max": n0_max}))
    return MixingReport(ok, None if ok else "pairs", "" if ok else "some pair is unwitnessed", stages, runs,
                        n0_max, **args)


# blender activation ---------------------------------------------------------


@dataclass
class ActivationRecord:
    n: int
    disk_C: float
    measured_C: float
    centre: list
    success: bool
    reason: str = ""
    word: tuple = ()

    def to_dict(self) -> dict:
        return {"n": self.n, "disk_C": self.disk_C, "measured_C": self.measured_C, "centre": self.centre,
                "success": self.success, "reason": self.reason, "word": list(self.word)}


def blender_activation(psi: SkewProduct, repeller: int, q, x, k: int, B: Box, cover, n_range, N: int = 30,
                       safety: float = 0.1, samples: int = 64, seed: int = 0) -> list:
    """Disks h_n(zeta') = (phi^n_{zeta'})^{-1}(x) over sequences whose future is the repeller symbol forever.

    For each n the measured Holder quotient is compared with the disk
    constant C_psi/(1 - nu^alpha/lam) and the disk is handed to
    :func:`embedded_disk_intersect`.
    """
    q = as_point(q)
    if not B.contains(q, open=True):
        raise ValueError("the repelling fixed point must lie in B")
    v = BiSequence.constant(repeller)
    f = psi.entry(v)
    if not f.lam > 1:
        raise ValueError("the designated map is not fiber-repelling")
    if np.linalg.norm(f(q) - q) > 1e-9:
        raise ValueError("q is not fixed by the repelling map")
    rng = np.random.default_rng(seed)
    nu_a = psi.nu ** psi.alpha
    lam = _lam_over(psi, k)
    C = psi.holder_constant() / (1 - nu_a / psi.lam)
    delta = lam * cover.lebesgue_lower_bound / 2 * (1 - safety)
    out = []
    for n in n_range:
        zeta = with_past(v, tuple(int(s) for s in rng.integers(1, k + 1, size=6)))

        def h(xi, n=n):
            return compose_backward(psi, shift(xi, n - 1), x, n, check_domain=False)

        measured = 0.0
        for _ in range(samples):
            ell = int(rng.integers(1, 9))
            a = with_past(zeta, tuple(int(s) for s in rng.integers(1, psi.k + 1, size=ell)))
            b = with_past(zeta, tuple(int(s) for s in rng.integers(1, psi.k + 1, size=ell)))
            dd = metric(a, b, psi.nu)
            if dd > 0:
                measured = max(measured, float(np.linalg.norm(h(a) - h(b))) / dd ** psi.alpha)
        centre = h(zeta)
        rec = ActivationRecord(n, C, measured, centre.tolist(), False)
        try:
            H = HorizontalDisk(zeta, centre, psi.alpha, C, delta, "activation", func=h, nu=psi.nu)
            res = embedded_disk_intersect(psi, k, B, cover, H, N)
            rec.success = bool(res.success and measured <= C + 1e-12)
            rec.reason, rec.word = res.reason, res.word
        except ValueError as exc:
            rec.reason = f"{exc}; try a larger n"
        out.append(rec)
    return out


def scenario_from_dict(d: dict):
    kind = d.get("type")
    if kind == "cycle":
        return CycleScenario.from_dict(d)
    if kind == "mixing":
        return MixingScenario.from_dict(d)
    raise ValueError(f"unknown scenario type {kind!r}")


def scenario_to_json(sc) -> str:
    return json.dumps(sc.to_dict(), indent=2, sort_keys=True)
