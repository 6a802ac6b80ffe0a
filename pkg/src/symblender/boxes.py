"""Axis-aligned boxes and finite unions of boxes in R^c.

A :class:`BoxSet` is the computable stand-in for a compact set.  Boxes are
kept exactly (affine images of boxes are boxes); normalisation at dyadic
resolution ``2**-r`` merges boxes smaller than a cell whose centres fall in
the same cell, which caps memory while moving the set by less than a cell.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree


def as_point(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))


@dataclass(frozen=True, eq=False)
class Box:
    """Closed box ``[lo_j, hi_j]`` per axis.  Openness is decided by callers."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo, hi = as_point(self.lo).copy(), as_point(self.hi).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lo and hi must be vectors of equal length")
        if np.any(lo > hi):
            raise ValueError(f"empty box: lo={lo}, hi={hi}")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def parse(cls, text: str) -> "Box":
        """``"lo1,hi1,lo2,hi2,..."``."""
        vals = [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
        if len(vals) % 2 or not vals:
            raise ValueError(f"box needs an even number of bounds: {text!r}")
        return cls(vals[0::2], vals[1::2])

    @classmethod
    def cube(cls, center, side: float) -> "Box":
        c = as_point(center)
        return cls(c - side / 2, c + side / 2)

    @classmethod
    def around(cls, center, radius) -> "Box":
        c = as_point(center)
        return cls(c - radius, c + radius)

    def __eq__(self, other):
        return isinstance(other, Box) and np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __hash__(self):
        return hash((self.lo.tobytes(), self.hi.tobytes()))

    def __repr__(self):
        return f"Box({self.lo.tolist()}, {self.hi.tolist()})"

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def sides(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return (self.lo + self.hi) / 2

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.sides))

    @property
    def extent(self) -> float:
        """Largest side (the sup-norm diameter)."""
        return float(np.max(self.sides))

    def contains(self, x, open: bool = False, tol: float = 0.0) -> bool:
        x = as_point(x)
        if open:
            return bool(np.all(x > self.lo - tol) and np.all(x < self.hi + tol))
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def depth(self, x) -> float:
        """Distance from x to the complement (negative outside)."""
        x = as_point(x)
        return float(np.min(np.minimum(x - self.lo, self.hi - x)))

    def box_depth(self, other: "Box") -> float:
        """Largest r such that ``other`` inflated by r fits in this box (sup-norm)."""
        return float(np.min(np.minimum(other.lo - self.lo, self.hi - other.hi)))

    def contains_box(self, other: "Box", open: bool = False) -> bool:
        d = self.box_depth(other)
        return d > 0 if open else d >= 0

    def intersect(self, other: "Box") -> "Box | None":
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if np.any(lo > hi):
            return None
        return Box(lo, hi)

    def hull(self, other: "Box") -> "Box":
        return Box(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    def inflate(self, r) -> "Box":
        return Box(self.lo - r, self.hi + r)

    def deflate(self, r) -> "Box | None":
        lo, hi = self.lo + r, self.hi - r
        if np.any(lo > hi):
            return None
        return Box(lo, hi)

    def corners(self) -> np.ndarray:
        c = self.dim
        idx = (np.arange(2 ** c)[:, None] >> np.arange(c)) & 1
        return np.where(idx == 1, self.hi, self.lo)

    def grid(self, per_axis: int) -> np.ndarray:
        """Uniform grid including the faces, ``per_axis`` intervals per axis."""
        axes = [np.linspace(a, b, per_axis + 1) for a, b in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def sample(self, rng, n: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(n, self.dim))

    def subdivide(self) -> list["Box"]:
        mid = self.center
        out = []
        for corner in range(2 ** self.dim):
            bits = (corner >> np.arange(self.dim)) & 1
            out.append(Box(np.where(bits, mid, self.lo), np.where(bits, self.hi, mid)))
        return out

    def to_dict(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @classmethod
    def from_dict(cls, d) -> "Box":
        return cls(d["lo"], d["hi"])


def affine_box_image(a, b, box: Box) -> Box:
    """Exact image of a box under ``x -> a*x + b`` with diagonal ``a``."""
    p, q = a * box.lo + b, a * box.hi + b
    return Box(np.minimum(p, q), np.maximum(p, q))


class BoxSet:
    """Finite union of closed boxes with a dyadic resolution exponent ``r``."""

    def __init__(self, lo, hi, r: int = 10, normalize: bool = True):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.ndim == 1:
            lo, hi = lo[:, None], hi[:, None]
        if lo.shape != hi.shape:
            raise ValueError("lo/hi shape mismatch")
        if np.any(lo > hi):
            raise ValueError("empty box in BoxSet")
        self.r = int(r)
        self.lo, self.hi = (self._normalize(lo, hi) if normalize and len(lo) else (lo, hi))

    @classmethod
    def from_boxes(cls, boxes, r: int = 10) -> "BoxSet":
        boxes = list(boxes)
        if not boxes:
            raise ValueError("BoxSet needs at least one box")
        return cls(np.array([b.lo for b in boxes]), np.array([b.hi for b in boxes]), r)

    @classmethod
    def from_points(cls, pts, r: int = 10, pad=0.0) -> "BoxSet":
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return cls(pts - pad, pts + pad, r)

    @property
    def cell(self) -> float:
        return 2.0 ** -self.r

    @property
    def dim(self) -> int:
        return self.lo.shape[1]

    def __len__(self):
        return len(self.lo)

    def boxes(self) -> list[Box]:
        return [Box(a, b) for a, b in zip(self.lo, self.hi)]

    def _normalize(self, lo, hi):
        # merge sub-cell boxes that share the cell of their centre
        h = self.cell
        small = np.all(hi - lo < h, axis=1)
        big_lo, big_hi = lo[~small], hi[~small]
        if big_lo.size:
            keys = np.round(np.concatenate([big_lo, big_hi], axis=1) / (h * 1e-6))
            _, idx = np.unique(keys, axis=0, return_index=True)
            idx.sort()
            big_lo, big_hi = big_lo[idx], big_hi[idx]
        s_lo, s_hi = lo[small], hi[small]
        if s_lo.size:
            keys = np.floor((s_lo + s_hi) / 2 / h).astype(np.int64)
            uniq, inv = np.unique(keys, axis=0, return_inverse=True)
            inv = inv.ravel()
            m_lo = np.full((len(uniq), lo.shape[1]), np.inf)
            m_hi = np.full((len(uniq), lo.shape[1]), -np.inf)
            np.minimum.at(m_lo, inv, s_lo)
            np.maximum.at(m_hi, inv, s_hi)
            s_lo, s_hi = m_lo, m_hi
        return np.concatenate([big_lo, s_lo]), np.concatenate([big_hi, s_hi])

    def union(self, other: "BoxSet") -> "BoxSet":
        self._check(other)
        return BoxSet(np.concatenate([self.lo, other.lo]), np.concatenate([self.hi, other.hi]), min(self.r, other.r))

    def intersection(self, other: "BoxSet") -> "BoxSet | None":
        self._check(other)
        lo = np.maximum(self.lo[:, None, :], other.lo[None, :, :])
        hi = np.minimum(self.hi[:, None, :], other.hi[None, :, :])
        keep = np.all(lo <= hi, axis=2)
        if not keep.any():
            return None
        return BoxSet(lo[keep], hi[keep], min(self.r, other.r))

    def affine_image(self, a, b) -> "BoxSet":
        a, b = as_point(a), as_point(b)
        p, q = self.lo * a + b, self.hi * a + b
        return BoxSet(np.minimum(p, q), np.maximum(p, q), self.r)

    def bounding_box(self) -> Box:
        return Box(self.lo.min(axis=0), self.hi.max(axis=0))

    def contains_point(self, x, tol: float = 0.0) -> bool:
        x = as_point(x)
        return bool(np.any(np.all((self.lo - tol <= x) & (x <= self.hi + tol), axis=1)))

    def refined(self, size: float | None = None) -> "BoxSet":
        """Split boxes until every side is at most ``size`` (default: one cell)."""
        size = self.cell if size is None else size
        los, his = [], []
        for a, b in zip(self.lo, self.hi):
            n = np.maximum(1, np.ceil((b - a) / size - 1e-12)).astype(int)
            if np.all(n == 1):
                los.append(a[None])
                his.append(b[None])
                continue
            axes = [np.linspace(a[j], b[j], n[j] + 1) for j in range(len(a))]
            lo_ax = np.meshgrid(*[ax[:-1] for ax in axes], indexing="ij")
            hi_ax = np.meshgrid(*[ax[1:] for ax in axes], indexing="ij")
            los.append(np.stack([m.ravel() for m in lo_ax], axis=1))
            his.append(np.stack([m.ravel() for m in hi_ax], axis=1))
        return BoxSet(np.concatenate(los), np.concatenate(his), self.r, normalize=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        for a, b in zip(self.lo, self.hi):
            buf.write(",".join(repr(float(v)) for pair in zip(a, b) for v in pair) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, r: int = 10) -> "BoxSet":
        rows = [[float(t) for t in line.split(",")] for line in text.splitlines() if line.strip()]
        arr = np.array(rows)
        return cls(arr[:, 0::2], arr[:, 1::2], r, normalize=False)

    def _check(self, other):
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")


def _point_to_boxes(points: np.ndarray, target: BoxSet) -> np.ndarray:
    """Exact Euclidean distance from each point to the union of ``target``'s boxes."""
    centers = (target.lo + target.hi) / 2
    half = float(np.max(np.linalg.norm(target.hi - target.lo, axis=1))) / 2
    tree = cKDTree(centers)
    d0, _ = tree.query(points)
    out = np.empty(len(points))
    for j, (p, r) in enumerate(zip(points, d0)):
        cand = tree.query_ball_point(p, r + half + 1e-15)
        gap = np.maximum(0.0, np.maximum(target.lo[cand] - p, p - target.hi[cand]))
        out[j] = np.min(np.linalg.norm(gap, axis=1))
    return out


def hausdorff_interval(A: BoxSet, B: BoxSet) -> tuple[float, float]:
    """Lower and upper bounds on the Hausdorff distance between the unions.

    Both sets are refined to cell size; the lower bound uses box centres
    measured exactly against the other union, the upper bound adds the
    largest half-diagonal.
    """
    A._check(B)
    size = min(A.cell, B.cell)
    Ar, Br = A.refined(size), B.refined(size)
    ca = (Ar.lo + Ar.hi) / 2
    cb = (Br.lo + Br.hi) / 2
    da = _point_to_boxes(ca, Br)
    db = _point_to_boxes(cb, Ar)
    lower = float(max(da.max(), db.max()))
    hd = max(np.linalg.norm(Ar.hi - Ar.lo, axis=1).max(), np.linalg.norm(Br.hi - Br.lo, axis=1).max()) / 2
    return lower, lower + float(hd)


def hausdorff(A: BoxSet, B: BoxSet) -> float:
    """Hausdorff distance, exact to within half a refined cell diagonal."""
    return hausdorff_interval(A, B)[0]


def interval_set(intervals, r: int = 10) -> BoxSet:
    """1-D convenience constructor from ``[(a, b), ...]``."""
    arr = np.asarray(intervals, dtype=float)
    return BoxSet(arr[:, :1], arr[:, 1:2], r)


def cells_needed(box: Box, size: float) -> int:
    return int(np.prod(np.maximum(1, np.ceil(box.sides / size))))


def dyadic_levels(box: Box, r: int) -> int:
    """Bisection depth at which every side of ``box`` is at most ``2**-r``."""
    return max(0, math.ceil(math.log2(max(box.extent, 1e-300) * 2.0 ** r - 1e-9)))
