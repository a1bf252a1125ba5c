"""Exact combinatorics of Cantor space {0,1}^N.

Binary words are plain strings of '0'/'1'.  A clopen set is a finite union
of cylinders, kept in a canonical form (sorted, prefix-free, sibling-merged
antichain) so that set equality is string-tuple equality.  Points are
eventually periodic sequences, the finitely representable ones.  Measures
are rational convex combinations of Bernoulli measures and Dirac masses;
every evaluation is an exact ``fractions.Fraction``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence, Union


class CantorError(Exception):
    """Base error for this package."""


def check_word(w: str) -> str:
    if not isinstance(w, str) or any(c not in "01" for c in w):
        raise CantorError(f"not a binary word: {w!r}")
    return w


def is_prefix(u: str, w: str) -> bool:
    return w.startswith(u)


def common_prefix(u: str, w: str) -> str:
    n = min(len(u), len(w))
    i = 0
    while i < n and u[i] == w[i]:
        i += 1
    return u[:i]


def words_comparable(u: str, w: str) -> bool:
    """True iff the cylinders [u], [w] intersect (one word extends the other)."""
    return u.startswith(w) or w.startswith(u)


def canonical_words(words: Iterable[str]) -> tuple[str, ...]:
    """Canonical antichain with the same union of cylinders.

    Absorbs words extending another word, then merges sibling pairs u0/u1
    to u (cascading); the result is sorted and unique per set of points.
    In lexicographic order a prefix immediately dominates its extensions
    and siblings end up adjacent, so both passes are single sweeps.
    """
    ws = sorted({check_word(w) for w in words})
    kept: list[str] = []
    for w in ws:
        if kept and w.startswith(kept[-1]):
            continue
        kept.append(w)
    out: list[str] = []
    for w in kept:
        out.append(w)
        while len(out) >= 2 and out[-1].endswith("1") and out[-2] == out[-1][:-1] + "0":
            merged = out[-1][:-1]
            out.pop()
            out.pop()
            out.append(merged)
    return tuple(out)


@dataclass(frozen=True)
class ClopenSet:
    """Finite union of cylinders as a canonical prefix-free antichain."""

    words: tuple[str, ...]

    def __post_init__(self) -> None:
        if tuple(canonical_words(self.words)) != self.words:
            raise CantorError(f"words not in canonical form: {self.words}")

    @staticmethod
    def from_words(words: Iterable[str]) -> "ClopenSet":
        return ClopenSet(canonical_words(words))

    @staticmethod
    def cylinder(word: str) -> "ClopenSet":
        return ClopenSet((check_word(word),))

    @property
    def is_empty(self) -> bool:
        return not self.words

    @property
    def is_full(self) -> bool:
        return self.words == ("",)

    def union(self, other: "ClopenSet") -> "ClopenSet":
        return ClopenSet.from_words(self.words + other.words)

    def intersect(self, other: "ClopenSet") -> "ClopenSet":
        out = []
        for u in self.words:
            for w in other.words:
                if u.startswith(w):
                    out.append(u)
                elif w.startswith(u):
                    out.append(w)
        return ClopenSet.from_words(out)

    def complement(self) -> "ClopenSet":
        out: list[str] = []

        def walk(prefix: str) -> None:
            if prefix in self.words:
                return
            if not any(w.startswith(prefix) for w in self.words):
                out.append(prefix)
                return
            walk(prefix + "0")
            walk(prefix + "1")

        walk("")
        return ClopenSet.from_words(out)

    def diff(self, other: "ClopenSet") -> "ClopenSet":
        return self.intersect(other.complement())

    def contains_set(self, other: "ClopenSet") -> bool:
        return other.diff(self).is_empty

    def is_disjoint(self, other: "ClopenSet") -> bool:
        return self.intersect(other).is_empty

    def refine(self, depth: int) -> tuple[str, ...]:
        """All words of the set extended to length >= depth (shorter words split)."""
        out = []
        for w in self.words:
            if len(w) >= depth:
                out.append(w)
            else:
                k = depth - len(w)
                out.extend(w + format(i, f"0{k}b") for i in range(2**k))
        return tuple(sorted(out))

    def contains_point(self, x: "CantorPoint") -> bool:
        return any(x.starts_with(w) for w in self.words)

    def __contains__(self, x: "CantorPoint") -> bool:
        return self.contains_point(x)

    def __str__(self) -> str:
        if self.is_empty:
            return "{}"
        return "{" + ", ".join(w if w else "eps" for w in self.words) + "}"


EMPTY = ClopenSet(())
FULL = ClopenSet(("",))


def canonicalize(words: Iterable[str]) -> ClopenSet:
    return ClopenSet.from_words(words)


def boolean(a: ClopenSet, b: ClopenSet, op: str) -> ClopenSet:
    """Exact Boolean set operation; ``complement`` ignores ``b``."""
    if op == "union":
        return a.union(b)
    if op == "intersect":
        return a.intersect(b)
    if op == "diff":
        return a.diff(b)
    if op == "complement":
        return a.complement()
    raise CantorError(f"unknown boolean op: {op!r}")


def _primitive_root(w: str) -> str:
    n = len(w)
    for p in range(1, n + 1):
        if n % p == 0 and w == w[:p] * (n // p):
            return w[:p]
    return w


@dataclass(frozen=True)
class CantorPoint:
    """Eventually periodic point head . cycle cycle cycle ...

    Normalized so that the cycle is primitive and the head is as short as
    possible; the pair (head, cycle) is then unique per point.
    """

    head: str
    cycle: str

    def __post_init__(self) -> None:
        check_word(self.head)
        check_word(self.cycle)
        if not self.cycle:
            raise CantorError("cycle must be nonempty")
        cyc = _primitive_root(self.cycle)
        head = self.head
        while head and head[-1] == cyc[-1]:
            head = head[:-1]
            cyc = cyc[-1] + cyc[:-1]
        object.__setattr__(self, "head", head)
        object.__setattr__(self, "cycle", cyc)

    @staticmethod
    def parse(text: str) -> "CantorPoint":
        """Parse "head(cycle)" notation, e.g. "01(10)"; "(0)" is 0^inf."""
        text = text.strip()
        if "(" not in text or not text.endswith(")"):
            raise CantorError(f"bad point syntax: {text!r}")
        head, _, rest = text.partition("(")
        return CantorPoint(head, rest[:-1])

    def expand(self, n: int) -> str:
        if n <= len(self.head):
            return self.head[:n]
        k = n - len(self.head)
        reps = -(-k // len(self.cycle))
        return self.head + (self.cycle * reps)[:k]

    def digit(self, i: int) -> str:
        return self.expand(i + 1)[i]

    def starts_with(self, w: str) -> bool:
        return self.expand(len(w)) == w

    def drop(self, n: int) -> "CantorPoint":
        """The point with its first n digits removed."""
        if n <= len(self.head):
            return CantorPoint(self.head[n:], self.cycle)
        k = (n - len(self.head)) % len(self.cycle)
        return CantorPoint("", self.cycle[k:] + self.cycle[:k])

    def prepend(self, w: str) -> "CantorPoint":
        return CantorPoint(check_word(w) + self.head, self.cycle)

    def __str__(self) -> str:
        return f"{self.head}({self.cycle})"


def point(text: str) -> CantorPoint:
    return CantorPoint.parse(text)


ZEROS = CantorPoint("", "0")
ONES = CantorPoint("", "1")


@dataclass(frozen=True)
class MeasureComponent:
    weight: Fraction
    kind: str  # "bernoulli" | "dirac"
    param: Union[Fraction, CantorPoint]

    def __post_init__(self) -> None:
        if self.weight <= 0:
            raise CantorError("component weight must be positive")
        if self.kind == "bernoulli":
            p = self.param
            if not isinstance(p, Fraction) or not (0 < p < 1):
                raise CantorError("Bernoulli parameter must be a rational in (0,1)")
        elif self.kind == "dirac":
            if not isinstance(self.param, CantorPoint):
                raise CantorError("Dirac component needs a CantorPoint")
        else:
            raise CantorError(f"unknown measure kind {self.kind!r}")


@dataclass(frozen=True)
class MeasureSpec:
    """Convex combination of Bernoulli(p) measures and Dirac masses.

    The Bernoulli parameter p is the probability of digit 0.
    """

    components: tuple[MeasureComponent, ...]

    def __post_init__(self) -> None:
        if not self.components:
            raise CantorError("measure needs at least one component")
        if sum(c.weight for c in self.components) != 1:
            raise CantorError("component weights must sum to 1")

    @staticmethod
    def bernoulli(p: Fraction | int | str) -> "MeasureSpec":
        return MeasureSpec((MeasureComponent(Fraction(1), "bernoulli", Fraction(p)),))

    @staticmethod
    def dirac(x: CantorPoint) -> "MeasureSpec":
        return MeasureSpec((MeasureComponent(Fraction(1), "dirac", x),))

    @staticmethod
    def mix(*parts: tuple[Fraction | int | str, "MeasureSpec"]) -> "MeasureSpec":
        comps = []
        for w, mu in parts:
            w = Fraction(w)
            comps.extend(MeasureComponent(w * c.weight, c.kind, c.param) for c in mu.components)
        return MeasureSpec(tuple(comps))

    @property
    def is_continuous(self) -> bool:
        return all(c.kind == "bernoulli" for c in self.components)

    @property
    def bernoulli_mass(self) -> Fraction:
        return sum((c.weight for c in self.components if c.kind == "bernoulli"), Fraction(0))

    def word_mass(self, w: str) -> Fraction:
        """Mass of the cylinder [w] under the continuous part only."""
        total = Fraction(0)
        for c in self.components:
            if c.kind == "bernoulli":
                p = c.param
                m = Fraction(1)
                for ch in w:
                    m *= p if ch == "0" else 1 - p
                total += c.weight * m
        return total


def measure(mu: MeasureSpec, a: ClopenSet) -> Fraction:
    """Exact measure of a clopen set."""
    total = Fraction(0)
    for c in mu.components:
        if c.kind == "bernoulli":
            p = c.param
            for w in a.words:
                m = Fraction(1)
                for ch in w:
                    m *= p if ch == "0" else 1 - p
                total += c.weight * m
        else:
            if a.contains_point(c.param):
                total += c.weight
    return total


def point_in(a: ClopenSet, x: CantorPoint) -> bool:
    return a.contains_point(x)


def zigzag(m: int) -> int:
    """The standard bijection Z -> N along 0, 1, -1, 2, -2, ..."""
    return 2 * m - 1 if m > 0 else -2 * m


class ZSplit:
    """Z-indexed partition of a clopen set into clopen pieces.

    Piece m appends the code word 1^zigzag(m) 0 to every word of the base
    set; the union over all m is the base minus the single point w 1^inf
    for each base word w.
    """

    def __init__(self, base: ClopenSet):
        if base.is_empty:
            raise CantorError("empty set cannot be split")
        self.base = base

    def piece(self, m: int) -> ClopenSet:
        code = "1" * zigzag(m) + "0"
        return ClopenSet.from_words(w + code for w in self.base.words)

    def lost_points(self) -> tuple[CantorPoint, ...]:
        return tuple(CantorPoint(w, "1") for w in self.base.words)

    def range(self, lo: int, hi: int) -> dict[int, ClopenSet]:
        return {m: self.piece(m) for m in range(lo, hi + 1)}


def split_indexed(a: ClopenSet, count: Union[int, str]) -> Union[list[ClopenSet], ZSplit]:
    """Split a clopen set into disjoint nonempty clopen pieces.

    For an integer count, refines to the shallowest uniform depth giving at
    least ``count`` cylinders and groups consecutive cylinders greedily.
    For "Z" returns a :class:`ZSplit` indexed by the integers.
    """
    if a.is_empty:
        raise CantorError("empty set cannot be split")
    if count == "Z":
        return ZSplit(a)
    k = int(count)
    if k < 1:
        raise CantorError("count must be >= 1")
    cyls = list(a.words)
    while len(cyls) < k:
        cyls = [w + b for w in cyls for b in "01"]
    cyls.sort()
    head = len(cyls) - k + 1
    groups = [cyls[:head]] + [[w] for w in cyls[head:]]
    return [ClopenSet.from_words(g) for g in groups]


def split_half(a: ClopenSet) -> tuple[ClopenSet, ClopenSet]:
    """Deterministic binary split used by the dyadic strip maps."""
    if a.is_empty:
        raise CantorError("empty set cannot be split")
    if len(a.words) == 1:
        w = a.words[0]
        return ClopenSet.cylinder(w + "0"), ClopenSet.cylinder(w + "1")
    words = list(a.words)
    mid = (len(words) + 1) // 2
    return ClopenSet.from_words(words[:mid]), ClopenSet.from_words(words[mid:])


def dyadic_chunk(a: ClopenSet, t: Fraction) -> ClopenSet:
    """Initial chunk of a clopen set along the binary strip parameterization.

    chunk(A, 0) = empty, chunk(A, 1) = A, and for dyadic t in between the
    chunk follows the binary expansion of t through successive halvings, so
    the map t |-> chunk(A, t) is monotone and exact for dyadic t.
    """
    t = Fraction(t)
    if not (0 <= t <= 1):
        raise CantorError("chunk parameter must lie in [0,1]")
    if t.denominator & (t.denominator - 1):
        raise CantorError(f"chunk parameter must be dyadic, got {t}")
    if t == 0:
        return EMPTY
    if t == 1:
        return a
    lo, hi = split_half(a)
    if t == Fraction(1, 2):
        return lo
    if t < Fraction(1, 2):
        return dyadic_chunk(lo, 2 * t)
    return lo.union(dyadic_chunk(hi, 2 * t - 1))
