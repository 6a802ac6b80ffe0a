"""Iterated function systems of one-step maps.

Orbits, the Hutchinson operator and its attractor, certified covering
checks by box subdivision, Lebesgue-number lower bounds, translation
families that produce coverings, and sampled blending-region reports.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .boxes import Box, BoxSet, as_point, dyadic_levels, hausdorff
from .fiber import FiberMap, SkewProduct, _apply, perturb


class IFS:
    """Maps phi_1..phi_k acting on the closed domain ``D``."""

    def __init__(self, maps, D: Box):
        self.maps = list(maps)
        if not self.maps:
            raise ValueError("an IFS needs at least one map")
        self.D = D
        self.lam = min(f.lam for f in self.maps)
        self.beta = max(f.beta for f in self.maps)

    @classmethod
    def from_skew(cls, phi: SkewProduct) -> "IFS":
        return cls(phi.maps(), phi.D)

    def to_skew(self, **kw) -> SkewProduct:
        return SkewProduct.one_step(self.maps, self.D, **kw)

    @property
    def k(self) -> int:
        return len(self.maps)

    @property
    def dim(self) -> int:
        return self.D.dim

    @property
    def is_affine(self) -> bool:
        return all(f.is_affine for f in self.maps)


def _apply_all(f: FiberMap, pts: np.ndarray) -> np.ndarray:
    return _apply(f, pts)


def orbit(ifs: IFS, x, max_length: int, max_points: int = 100_000, resolution: float | None = None) -> np.ndarray:
    """Images of x under all compositions of length 1..max_length, breadth first.

    With ``resolution`` set, points falling in an already visited cell of
    that size are dropped (and not expanded further).
    """
    frontier = as_point(x)[None, :]
    out = []
    seen = set()
    count = 0
    for _ in range(max_length):
        nxt = np.concatenate([_apply_all(f, frontier) for f in ifs.maps])
        if resolution is not None:
            keys = np.floor(nxt / resolution).astype(np.int64)
            keep = []
            for j, key in enumerate(map(tuple, keys)):
                if key not in seen:
                    seen.add(key)
                    keep.append(j)
            nxt = nxt[keep]
        if count + len(nxt) > max_points:
            nxt = nxt[: max_points - count]
        if len(nxt) == 0:
            break
        out.append(nxt)
        count += len(nxt)
        frontier = nxt
        if count >= max_points:
            break
    if not out:
        return np.empty((0, ifs.dim))
    return np.concatenate(out)


def _image_set(f: FiberMap, A: BoxSet) -> BoxSet:
    if f.is_affine:
        return A.affine_image(f.a, f.b)
    boxes = [f.image_box(b) for b in A.boxes()]
    return BoxSet.from_boxes(boxes, A.r)


def hutchinson_step(ifs: IFS, A: BoxSet) -> BoxSet:
    """G(A) = phi_1(A) u ... u phi_k(A), renormalised at A's resolution."""
    imgs = [_image_set(f, A) for f in ifs.maps]
    lo = np.concatenate([s.lo for s in imgs])
    hi = np.concatenate([s.hi for s in imgs])
    return BoxSet(lo, hi, A.r)


@dataclass
class AttractorResult:
    boxset: BoxSet
    iterations: int
    last_step: float
    tol: float

    def __iter__(self):
        return iter((self.boxset, self.iterations))


def hutchinson_attractor(ifs: IFS, tol: float = 1e-3, r: int = 10, start: BoxSet | None = None,
                         max_iter: int | None = None) -> BoxSet:
    """Iterate G from the closed domain until successive sets are within tol*(1-beta)/beta."""
    return hutchinson_attractor_run(ifs, tol, r, start, max_iter).boxset


def hutchinson_attractor_run(ifs: IFS, tol: float = 1e-3, r: int = 10, start: BoxSet | None = None,
                             max_iter: int | None = None) -> AttractorResult:
    beta = ifs.beta
    if beta >= 1:
        raise ValueError("Hutchinson attractor needs contracting maps (beta < 1)")
    A = start if start is not None else BoxSet.from_boxes([ifs.D], r)
    threshold = tol * (1 - beta) / beta
    if max_iter is None:
        max_iter = math.ceil(math.log(threshold / max(ifs.D.diameter, 1e-300)) / math.log(beta)) + 10
    step = math.inf
    n = 0
    while n < max_iter:
        B = hutchinson_step(ifs, A)
        n += 1
        step = hausdorff(A, B)
        A = B
        if step <= threshold:
            break
    return AttractorResult(A, n, step, tol)


# covering certification -------------------------------------------------


@dataclass
class CoveringCertificate:
    B: Box
    images: list
    members: list
    margin: float
    lebesgue_lower_bound: float
    resolution: int
    verified: bool
    status: str
    budget: float = 0.0
    certified: bool = True
    witness: np.ndarray | None = None

    def to_dict(self) -> dict:
        d = {
            "B": self.B.to_dict(),
            "images": [b.to_dict() for b in self.images],
            "margin": self.margin,
            "lebesgue_lower_bound": self.lebesgue_lower_bound,
            "resolution": self.resolution,
            "verified": self.verified,
            "status": self.status,
            "budget": self.budget,
            "certified": self.certified,
        }
        if self.witness is not None:
            d["witness"] = self.witness.tolist()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _cells(box: Box) -> tuple[np.ndarray, np.ndarray]:
    return box.lo[None, :].copy(), box.hi[None, :].copy()


def _split(lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    c = lo.shape[1]
    mid = (lo + hi) / 2
    bits = ((np.arange(2 ** c)[:, None] >> np.arange(c)) & 1).astype(bool)
    new_lo = np.where(bits[None], mid[:, None, :], lo[:, None, :]).reshape(-1, c)
    new_hi = np.where(bits[None], hi[:, None, :], mid[:, None, :]).reshape(-1, c)
    return new_lo, new_hi


def _box_arrays(boxes) -> tuple[np.ndarray, np.ndarray]:
    return np.array([b.lo for b in boxes]), np.array([b.hi for b in boxes])


def _cell_depth(ulo, uhi, lo, hi) -> np.ndarray:
    """(cells, members) sup-norm depth of each cell inside each open member box."""
    d = np.minimum(lo[:, None, :] - ulo[None], uhi[None] - hi[:, None, :])
    return d.min(axis=2)


def _minimize(lo, hi, lower_fn, upper_fn, levels: int):
    """Branch and bound for the minimum over a box of a 1-Lipschitz-type score.

    ``lower_fn`` bounds the minimum over each cell from below and must not
    decrease under subdivision; ``upper_fn`` evaluates the score at a point
    of each cell.  Returns (lower bound, final cells, their lower values).
    """
    floor = math.inf
    low = lower_fn(lo, hi)
    for _ in range(levels):
        best_upper = float(np.min(upper_fn(lo, hi)))
        keep = low < best_upper
        if np.any(~keep):
            floor = min(floor, float(np.min(low[~keep])))
        if not keep.any():
            return floor, lo[:0], hi[:0], low[:0]
        lo, hi = _split(lo[keep], hi[keep])
        low = lower_fn(lo, hi)
    final = float(np.min(low)) if len(low) else math.inf
    return min(floor, final), lo, hi, low


def _member_depth_fns(maps, B: Box, budget: float):
    """Lower/upper depth functions of cells inside the shrunken images of B."""
    if all(f.is_affine for f in maps):
        members = [f.image_box(B).deflate(budget) for f in maps]
        valid = [m for m in members if m is not None]
        if not valid:
            return None, None, members
        ulo, uhi = _box_arrays(valid)

        def lower(lo, hi):
            return _cell_depth(ulo, uhi, lo, hi).max(axis=1)

        def upper(lo, hi):
            c = (lo + hi) / 2
            return _cell_depth(ulo, uhi, c, c).max(axis=1)

        return lower, upper, members

    # Lipschitz path: x is in phi(B) with depth >= lam * depth_B(phi^-1 x) - budget
    def point_depth(pts):
        out = np.full(len(pts), -np.inf)
        for f in maps:
            pre = np.array([f.inv(p) for p in pts])
            d = np.minimum(pre - B.lo, B.hi - pre).min(axis=1)
            out = np.maximum(out, f.lam * d - budget)
        return out

    def lower(lo, hi):
        c = (lo + hi) / 2
        half = np.max(hi - lo, axis=1) / 2
        return point_depth(c) - half

    def upper(lo, hi):
        return point_depth((lo + hi) / 2)

    return lower, upper, [f.image_box(B) for f in maps]


def _point_covered(maps, B: Box, budget: float, x) -> bool:
    for f in maps:
        if f.is_affine:
            m = f.image_box(B).deflate(budget)
            if m is not None and m.contains(x, open=True):
                return True
        else:
            y = f.inv(x)
            if f.lam * B.depth(y) - budget > 0:
                return True
    return False


def covering_check(ifs: IFS, B: Box, r: int = 10, budget: float = 0.0) -> CoveringCertificate:
    """Certify closure(B) inside the union of the open images phi_i(B) (shrunk by ``budget``).

    Subdivides B down to cells of side <= 2**-r.  The margin is a lower
    bound on min over x in closure(B) of max_i depth of x in the i-th member.
    On failure a witness point outside every member is searched among the
    corners and centres of the worst cells.
    """
    maps = ifs.maps
    lower, upper, members = _member_depth_fns(maps, B, budget)
    images = [f.image_box(B) for f in maps]
    certified = ifs.is_affine
    levels = dyadic_levels(B, r)
    if lower is None:
        return CoveringCertificate(B, images, members, -math.inf, 0.0, r, False, "refuted", budget,
                                   certified, B.center)
    lo, hi = _cells(B)
    margin, flo, fhi, flow = _minimize(lo, hi, lower, upper, levels)
    if margin > 0:
        L = 0.0
        valid = [m for m in members if m is not None]
        if certified:
            L = lebesgue_lower_bound(valid, B, r)
        L = max(L, margin)
        return CoveringCertificate(B, images, members, margin, L, r, True, "verified", budget, certified)
    bad = np.argsort(flow)
    for j in bad[: min(len(bad), 4096)]:
        if flow[j] > 0:
            break
        cell = Box(flo[j], fhi[j])
        for x in np.concatenate([cell.corners(), cell.center[None]]):
            if not _point_covered(maps, B, budget, x):
                return CoveringCertificate(B, images, members, margin, 0.0, r, False, "refuted", budget,
                                           certified, x)
    return CoveringCertificate(B, images, members, margin, 0.0, r, False, "unknown", budget, certified)


def lebesgue_lower_bound(cover, X: Box, r: int = 10) -> float:
    """A lower bound L such that every subset of X with extent < L lies in one member.

    Extent is the largest side of the bounding box, so the bound also holds
    for Euclidean diameter.  For a cell A of possible lower-left corners of
    such a subset, member U accepts every window of side L anchored in A when
    A's lower face is inside U and A's upper face plus L stays below U's upper
    face (axes where U overhangs X impose no upper constraint).
    """
    cover = list(cover)
    if not cover:
        raise ValueError("empty cover")
    ulo, uhi = _box_arrays(cover)
    cap = X.extent

    def slack(lo, hi):
        low_ok = np.all(np.maximum(lo, X.lo)[:, None, :] > ulo[None], axis=2)
        up = uhi[None] - hi[:, None, :]
        free = (uhi > X.hi)[None]
        up = np.where(free, np.maximum(up, cap), up)
        s = np.where(low_ok, up.min(axis=2), -np.inf)
        return s.max(axis=1)

    def upper(lo, hi):
        c = (lo + hi) / 2
        return slack(c, c)

    lo, hi = _cells(X)
    L, *_ = _minimize(lo, hi, slack, upper, dyadic_levels(X, r))
    if not L > 0:
        raise ValueError("the boxes do not cover X")
    return L


# translation families ----------------------------------------------------


@dataclass
class TranslationFamily:
    k: int
    B: Box
    maps: list
    D: Box
    certificate: CoveringCertificate
    fixed_point: np.ndarray
    translations: list = field(default_factory=list)

    def ifs(self) -> IFS:
        return IFS(self.maps, self.D)

    def skew(self, **kw) -> SkewProduct:
        return SkewProduct.one_step(self.maps, self.D, **kw)


def translation_family(phi: FiberMap, B_seed: Box, require_original: bool = False, r: int = 10,
                       shrink: float = 1.0) -> TranslationFamily:
    """Translates of a contraction whose images of a cube B around its fixed point cover B.

    Per axis with contraction ratio a, the cube of side s is covered by m
    translated images of side a*s, m = floor(1/a) + 1, centred on a lattice
    of spacing s/m; neighbouring images overlap by s(ma-1)/m and the outer
    ones overhang by half of that.  ``require_original`` forces odd m so the
    untranslated map belongs to the family.
    """
    if phi.beta >= 1:
        raise ValueError("translation_family needs a contraction")
    c = B_seed.dim
    p = phi.fixed_point(B_seed.center)
    if not B_seed.contains(p, open=True):
        raise ValueError("the map has no fixed point inside the seed box")
    s = 2 * float(np.min(np.minimum(p - B_seed.lo, B_seed.hi - p))) * shrink
    if phi.is_affine:
        ratio = np.abs(phi.a)
    else:
        ratio = np.full(c, phi.lam / math.sqrt(c))
    m = np.floor(1.0 / ratio).astype(int) + 1
    if require_original:
        m = np.where(m % 2 == 0, m + 1, m)
    spacing = s / m
    axes = [(np.arange(mj) - (mj - 1) / 2) * spacing[j] for j, mj in enumerate(m)]
    mesh = np.meshgrid(*axes, indexing="ij")
    shifts = np.stack([g.ravel() for g in mesh], axis=1)
    maps = [phi if np.all(v == 0) else phi.translated(v) for v in shifts]
    B = Box.cube(p, s)
    vmax = np.max(np.abs(shifts), axis=0)
    if phi.is_affine:
        R = np.maximum(s / 2, vmax / (1 - ratio)) * 1.5 + 1e-9
    else:
        rho = phi.beta * math.sqrt(c)
        if rho >= 1:
            raise ValueError("cannot size an invariant domain for this map")
        R = np.full(c, max(s / 2, float(np.linalg.norm(vmax)) / (1 - rho)) * 1.5)
    D = Box(p - R, p + R)
    cert = covering_check(IFS(maps, D), B, r)
    return TranslationFamily(len(maps), B, maps, D, cert, p, [v for v in shifts])


# blending regions --------------------------------------------------------


@dataclass
class BlendingReport:
    covered: bool
    resolution: int
    budget: float
    samples: int
    seed: int
    fractions: list
    worst_cell: list | None
    worst_gap: float
    uncovered_cells: int

    def to_dict(self) -> dict:
        return {
            "covered": self.covered, "resolution": self.resolution, "budget": self.budget,
            "samples": self.samples, "seed": self.seed, "fractions": self.fractions,
            "worst_cell": self.worst_cell, "worst_gap": self.worst_gap,
            "uncovered_cells": self.uncovered_cells,
        }


def blending_region_check(one_step: SkewProduct, B: Box, perturbation_budget: float, samples: int = 10,
                          r: int = 8, max_length: int = 60, max_points: int = 400_000,
                          seed: int = 0) -> BlendingReport:
    """Sampled check that orbits of points of B come within a cell of every point of B.

    For each sample a random translation perturbation within the budget is
    drawn together with a start point in B; B is cut into cells of side
    2**-r (per axis, at most) and a cell counts as reached when an orbit point
    lies in it.
    """
    if not one_step.is_one_step or one_step.beta >= 1:
        raise ValueError("blending_region_check needs a contracting one-step map")
    rng = np.random.default_rng(seed)
    n_axis = np.maximum(1, np.ceil(B.sides * 2.0 ** r)).astype(int)
    cell = B.sides / n_axis
    fractions = []
    worst_gap, worst_cell, uncovered_total = 0.0, None, 0
    for _ in range(samples):
        psi = perturb(one_step, perturbation_budget, rng) if perturbation_budget > 0 else one_step
        x = B.sample(rng, 1)[0]
        pts = orbit(IFS.from_skew(psi), x, max_length, max_points, resolution=float(cell.min()) / 2)
        inside = pts[np.all((pts >= B.lo) & (pts <= B.hi), axis=1)]
        idx = np.clip(np.floor((inside - B.lo) / cell).astype(int), 0, n_axis - 1)
        hit = np.zeros(tuple(n_axis), dtype=bool)
        if len(idx):
            hit[tuple(idx.T)] = True
        fractions.append(float(hit.mean()))
        missing = np.argwhere(~hit)
        uncovered_total += len(missing)
        if len(missing):
            centers = B.lo + (missing + 0.5) * cell
            if len(pts):
                gaps, _ = cKDTree(pts).query(centers)
            else:
                gaps = np.full(len(centers), np.inf)
            j = int(np.argmax(gaps))
            if gaps[j] > worst_gap:
                worst_gap = float(gaps[j])
                worst_cell = centers[j].tolist()
    return BlendingReport(uncovered_total == 0, r, perturbation_budget, samples, seed, fractions,
                          worst_cell, worst_gap, uncovered_total)
