"""Eventually periodic points of the full shift on k symbols.

A point is stored as two one-sided eventually periodic sequences: the
future (indices 0, 1, 2, ...) and the past read outward (indices -1, -2,
...).  Both halves are kept in canonical form (primitive period, shortest
transient) so that equality and hashing are decided structurally.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from typing import Iterator, Sequence

DEFAULT_NU = 0.5

Word = tuple


def check_nu(nu: float) -> float:
    if not 0.0 < nu < 1.0:
        raise ValueError(f"nu must lie in (0, 1), got {nu}")
    return float(nu)


def check_word(word: Sequence[int], k: int | None = None) -> tuple:
    word = tuple(int(s) for s in word)
    for s in word:
        if s < 1 or (k is not None and s > k):
            raise ValueError(f"symbol {s} out of range 1..{k}")
    return word


def _primitive(period: tuple) -> tuple:
    n = len(period)
    for d in range(1, n + 1):
        if n % d == 0 and period[:d] * (n // d) == period:
            return period[:d]
    return period


def _canonical_ray(transient: tuple, period: tuple) -> tuple[tuple, tuple]:
    """Shortest transient and primitive period for ``transient + period^inf``."""
    if not period:
        raise ValueError("period must be nonempty")
    period = _primitive(period)
    while transient and transient[-1] == period[-1]:
        transient = transient[:-1]
        period = period[-1:] + period[:-1]
    return transient, period


def _ray_at(transient: tuple, period: tuple, j: int) -> int:
    if j < len(transient):
        return transient[j]
    return period[(j - len(transient)) % len(period)]


def _ray_drop(transient: tuple, period: tuple, n: int) -> tuple[tuple, tuple]:
    """The ray with its first ``n`` symbols removed."""
    if n <= len(transient):
        return transient[n:], period
    r = (n - len(transient)) % len(period)
    return (), period[r:] + period[:r]


@dataclass(frozen=True)
class BiSequence:
    """An eventually periodic bi-infinite sequence.

    ``fut``/``fut_period`` describe xi_0, xi_1, ...; ``back``/``back_period``
    describe xi_{-1}, xi_{-2}, ... (the past read from the origin outward).
    Use :meth:`make` or :meth:`parse` rather than the raw constructor.
    """

    fut: tuple
    fut_period: tuple
    back: tuple
    back_period: tuple

    @classmethod
    def make(cls, past_transient=(), past_period=(1,), future_transient=(), future_period=(1,)):
        """Build from the left-to-right text-form pieces.

        The past reads ``... p p w`` ending at index -1, the future reads
        ``w' p' p' ...`` starting at index 0.
        """
        pt = check_word(past_transient)
        pp = check_word(past_period)
        ft = check_word(future_transient)
        fp = check_word(future_period)
        if not pp or not fp:
            raise ValueError("both periods must be nonempty")
        return cls._from_rays(ft, fp, pt[::-1], pp[::-1])

    @classmethod
    def _from_rays(cls, fut, fut_period, back, back_period):
        fut, fut_period = _canonical_ray(tuple(fut), tuple(fut_period))
        back, back_period = _canonical_ray(tuple(back), tuple(back_period))
        return cls(fut, fut_period, back, back_period)

    @classmethod
    def periodic(cls, word: Sequence[int]) -> "BiSequence":
        """The shift-periodic point ``word^inf`` with ``xi_0 = word[0]``."""
        word = check_word(word)
        return cls.make((), word, (), word)

    @classmethod
    def constant(cls, symbol: int) -> "BiSequence":
        return cls.periodic((symbol,))

    @classmethod
    def parse(cls, text: str) -> "BiSequence":
        """Parse ``"(w_past|p_past);(w_fut|p_fut)"``."""
        m = re.fullmatch(r"\s*\(([^|()]*)\|([^|()]*)\)\s*;\s*\(([^|()]*)\|([^|()]*)\)\s*", text)
        if m is None:
            raise ValueError(f"cannot parse sequence {text!r}")

        def word(s):
            s = s.strip()
            return tuple(int(t) for t in s.split(",")) if s else ()

        return cls.make(*(word(g) for g in m.groups()))

    # text-form views
    @property
    def past_transient(self) -> tuple:
        return self.back[::-1]

    @property
    def past_period(self) -> tuple:
        return self.back_period[::-1]

    @property
    def future_transient(self) -> tuple:
        return self.fut

    @property
    def future_period(self) -> tuple:
        return self.fut_period

    def __str__(self) -> str:
        def w(t):
            return ",".join(str(s) for s in t)

        return f"({w(self.past_transient)}|{w(self.past_period)});({w(self.fut)}|{w(self.fut_period)})"

    def __repr__(self) -> str:
        return f"BiSequence.parse({str(self)!r})"

    def __getitem__(self, i: int) -> int:
        if i >= 0:
            return _ray_at(self.fut, self.fut_period, i)
        return _ray_at(self.back, self.back_period, -i - 1)

    def window(self, lo: int, hi: int) -> tuple:
        """Symbols at indices lo..hi inclusive."""
        return tuple(self[i] for i in range(lo, hi + 1))

    @property
    def max_symbol(self) -> int:
        return max(self.fut + self.fut_period + self.back + self.back_period)

    def horizon(self) -> int:
        """An index bound beyond which both halves are purely periodic."""
        return max(len(self.fut), len(self.back)) + math.lcm(len(self.fut_period), len(self.back_period))

    def is_periodic(self) -> bool:
        return not self.fut and not self.back and shift(self, len(self.fut_period)) == self


def shift(xi: BiSequence, n: int = 1) -> BiSequence:
    """The shift applied n times: ``result_i = xi_{i+n}``."""
    if n == 0:
        return xi
    if n > 0:
        moved = tuple(xi[i] for i in range(n - 1, -1, -1))
        fut, fp = _ray_drop(xi.fut, xi.fut_period, n)
        return BiSequence._from_rays(fut, fp, moved + xi.back, xi.back_period)
    m = -n
    moved = tuple(xi[-i] for i in range(m, 0, -1))
    back, bp = _ray_drop(xi.back, xi.back_period, m)
    return BiSequence._from_rays(moved + xi.fut, xi.fut_period, back, bp)


def conjugate(xi: BiSequence) -> BiSequence:
    """The index-reversed sequence, ``result_i = xi_{-i}``."""
    fut = (xi[0],) + xi.back
    back, bp = _ray_drop(xi.fut, xi.fut_period, 1)
    return BiSequence._from_rays(fut, xi.back_period, back, bp)


def agreement_index(xi: BiSequence, zeta: BiSequence) -> float:
    """Smallest l >= 0 with xi_l != zeta_l or xi_-l != zeta_-l (inf if equal)."""
    if xi == zeta:
        return math.inf
    bound = max(len(xi.fut), len(xi.back), len(zeta.fut), len(zeta.back)) + math.lcm(
        len(xi.fut_period), len(xi.back_period), len(zeta.fut_period), len(zeta.back_period))
    for i in range(bound + 1):
        if xi[i] != zeta[i] or xi[-i] != zeta[-i]:
            return i
    raise AssertionError("canonical forms disagree but no differing index found")


def metric(xi: BiSequence, zeta: BiSequence, nu: float = DEFAULT_NU) -> float:
    nu = check_nu(nu)
    ell = agreement_index(xi, zeta)
    return 0.0 if ell == math.inf else nu ** ell


def word_distance(w1: Sequence[int], w2: Sequence[int], nu: float = DEFAULT_NU) -> float:
    """Distance between two centred words of equal odd length (0 if equal).

    Entry j of a word of length 2m+1 is the symbol at index j - m.
    """
    if len(w1) != len(w2) or len(w1) % 2 == 0:
        raise ValueError("centred words must share an odd length")
    m = len(w1) // 2
    for ell in range(m + 1):
        if w1[m + ell] != w2[m + ell] or w1[m - ell] != w2[m - ell]:
            return nu ** ell
    return 0.0


def with_past(xi: BiSequence, word: Sequence[int]) -> BiSequence:
    """Replace indices -n..-1 of xi by ``word`` (read left to right)."""
    word = check_word(word)
    back, bp = _ray_drop(xi.back, xi.back_period, len(word))
    return BiSequence._from_rays(xi.fut, xi.fut_period, word[::-1] + back, bp)


def with_future(xi: BiSequence, word: Sequence[int]) -> BiSequence:
    """Replace indices 1..n of xi by ``word``."""
    word = check_word(word)
    fut, fp = _ray_drop(xi.fut, xi.fut_period, len(word) + 1)
    return BiSequence._from_rays((xi[0],) + word + fut, fp, xi.back, xi.back_period)


def words(k: int, n: int) -> Iterator[tuple]:
    return itertools.product(range(1, k + 1), repeat=n)


class LocalStableSet:
    """Sequences agreeing with ``base`` at every index i >= 0."""

    def __init__(self, base: BiSequence):
        self.base = base

    def __contains__(self, zeta: BiSequence) -> bool:
        return zeta.fut == self.base.fut and zeta.fut_period == self.base.fut_period

    def representative(self, word: Sequence[int]) -> BiSequence:
        return with_past(self.base, word)

    def enumerate(self, n: int, k: int) -> list[BiSequence]:
        """One member per relative cylinder of depth n: past word, then base's tail."""
        return [self.representative(w) for w in words(k, n)]


class LocalUnstableSet:
    """Sequences agreeing with ``base`` at every index i <= 0."""

    def __init__(self, base: BiSequence):
        self.base = base

    def __contains__(self, zeta: BiSequence) -> bool:
        return zeta[0] == self.base[0] and zeta.back == self.base.back and zeta.back_period == self.base.back_period

    def representative(self, word: Sequence[int]) -> BiSequence:
        return with_future(self.base, word)

    def enumerate(self, n: int, k: int) -> list[BiSequence]:
        return [self.representative(w) for w in words(k, n)]


def local_stable(xi: BiSequence) -> LocalStableSet:
    return LocalStableSet(xi)


def local_unstable(xi: BiSequence) -> LocalUnstableSet:
    return LocalUnstableSet(xi)


@dataclass(frozen=True)
class Cylinder:
    """Sequences carrying ``word`` at indices offset .. offset+len-1."""

    word: tuple
    offset: int

    def __post_init__(self):
        if not self.word:
            raise ValueError("cylinder word must be nonempty")
        object.__setattr__(self, "word", check_word(self.word))

    def __contains__(self, xi: BiSequence) -> bool:
        return all(xi[self.offset + j] == s for j, s in enumerate(self.word))


@dataclass(frozen=True)
class RelativeCylinder:
    """Members of the local stable set of ``base`` with prescribed indices -n..-1."""

    base: BiSequence
    past_word: tuple

    def __post_init__(self):
        if not self.past_word:
            raise ValueError("relative cylinder needs a past word of length >= 1")
        object.__setattr__(self, "past_word", check_word(self.past_word))

    def __contains__(self, xi: BiSequence) -> bool:
        n = len(self.past_word)
        return xi in LocalStableSet(self.base) and xi.window(-n, -1) == self.past_word

    def representative(self) -> BiSequence:
        return with_past(self.base, self.past_word)


def random_sequence(rng, k: int, max_transient: int = 4, max_period: int = 3) -> BiSequence:
    """A random eventually periodic point (for sampling and tests)."""

    def rand_word(lo, hi):
        return tuple(int(s) for s in rng.integers(1, k + 1, size=int(rng.integers(lo, hi + 1))))

    return BiSequence.make(rand_word(0, max_transient), rand_word(1, max_period),
                           rand_word(0, max_transient), rand_word(1, max_period))
