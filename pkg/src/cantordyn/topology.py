"""Computable uniform and weak neighborhoods on the automorphism group.

The uniform side measures the disagreement set E(S,T) = {x : Sx != Tx} or
its two-sided variant including inverses; answers are exact rational
intervals that shrink as the resolution depth grows.  The weak side asks
for equality of images of finitely many clopen sets, modulo countable.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .cantor import CantorError, CantorPoint, ClopenSet, MeasureSpec
from .automorphism import (
    DifferenceRegions,
    PrefixAutomorphism,
    _classify_at,
    compare_mod_ctbl,
    image_clopen,
)


@dataclass(frozen=True)
class RationalInterval:
    lo: Fraction
    hi: Fraction

    def __post_init__(self) -> None:
        if not (0 <= self.lo <= self.hi <= 1):
            raise CantorError(f"bad interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def __str__(self) -> str:
        return f"[{self.lo}, {self.hi}]"


@dataclass(frozen=True)
class UniformNbhdSpec:
    """Neighborhood of ``center``: mu_i of the disagreement set below epsilon."""

    center: PrefixAutomorphism
    measures: tuple[MeasureSpec, ...]
    epsilon: Fraction

    def __post_init__(self) -> None:
        if not self.measures:
            raise CantorError("uniform neighborhood needs at least one measure")
        if not (0 < self.epsilon <= 1):
            raise CantorError("epsilon must lie in (0, 1]")


@dataclass(frozen=True)
class WeakNbhdSpec:
    """Neighborhood of ``center``: equal images on each listed clopen set."""

    center: PrefixAutomorphism
    sets: tuple[ClopenSet, ...]

    def __post_init__(self) -> None:
        if not self.sets:
            raise CantorError("weak neighborhood needs at least one set")


def difference_regions(
    s: PrefixAutomorphism, t: PrefixAutomorphism, depth: int
) -> DifferenceRegions:
    """Cells where S and T certainly agree, certainly differ, or are unresolved."""
    return _classify_at(s, t, depth, None)


def _continuous_mass(mu: MeasureSpec, a: ClopenSet) -> Fraction:
    return sum((mu.word_mass(w) for w in a.words), Fraction(0))


def _dirac_differs(
    s: PrefixAutomorphism, t: PrefixAutomorphism, x: CantorPoint, variant: str
) -> bool:
    if s.apply(x) != t.apply(x):
        return True
    if variant == "E":
        return s.inverse().apply(x) != t.inverse().apply(x)
    return False


def e_measure(
    s: PrefixAutomorphism,
    t: PrefixAutomorphism,
    mu: MeasureSpec,
    depth: int,
    variant: str = "E",
) -> RationalInterval:
    """Interval certainly containing mu of the disagreement set.

    Aligned resolution cells with equal substitutions contribute nothing,
    cells with distinct substitutions their full continuous mass (the two
    images can coincide in at most one point per cell); cells where only
    image bounds are known widen the interval unless the bounds are
    disjoint cylinders.  Dirac components are decided exactly pointwise.
    """
    if variant not in ("E", "E0"):
        raise CantorError(f"variant must be 'E' or 'E0', got {variant!r}")
    regions = _classify_at(s, t, depth, None)
    differ = regions.differ
    unknown = regions.unknown
    if variant == "E":
        inv_regions = _classify_at(s.inverse(), t.inverse(), depth, None)
        differ = differ.union(inv_regions.differ)
        unknown = unknown.union(inv_regions.unknown)
    unknown = unknown.diff(differ)
    lo = _continuous_mass(mu, differ)
    hi = lo + _continuous_mass(mu, unknown)
    for comp in mu.components:
        if comp.kind == "dirac" and _dirac_differs(s, t, comp.param, variant):
            lo += comp.weight
            hi += comp.weight
    return RationalInterval(lo, min(hi, Fraction(1)))


@dataclass(frozen=True)
class UniformVerdict:
    kind: str  # "in" | "out" | "unknown"
    intervals: tuple[RationalInterval, ...]


def in_uniform_nbhd(
    s: PrefixAutomorphism, u: UniformNbhdSpec, depth: int, variant: str = "E"
) -> UniformVerdict:
    intervals = tuple(e_measure(s, u.center, mu, depth, variant) for mu in u.measures)
    if all(iv.hi < u.epsilon for iv in intervals):
        return UniformVerdict("in", intervals)
    if any(iv.lo >= u.epsilon for iv in intervals):
        return UniformVerdict("out", intervals)
    return UniformVerdict("unknown", intervals)


def in_weak_nbhd(s: PrefixAutomorphism, w: WeakNbhdSpec, strict: bool = False) -> bool:
    """Membership in a weak neighborhood, images compared modulo countable.

    In strict mode the finitely many representable points where the clopen
    answer could be off are also compared exactly.
    """
    for f in w.sets:
        img_s = image_clopen(s, f)
        img_t = image_clopen(w.center, f)
        if img_s.image != img_t.image:
            return False
        if strict:
            for p in set(img_s.residual_points) | set(img_t.residual_points):
                in_s = f.contains_point(s.inverse().apply(p))
                in_t = f.contains_point(w.center.inverse().apply(p))
                if in_s != in_t:
                    return False
    return True


@dataclass(frozen=True)
class EqualityVerdict:
    kind: str  # "equal" | "distinct" | "unknown"
    witness: Optional[str] = None


def equal_mod_ctbl(s: PrefixAutomorphism, t: PrefixAutomorphism, depth: int = 8) -> EqualityVerdict:
    kind, witness = compare_mod_ctbl(s, t, depth)
    return EqualityVerdict(kind, witness)


@dataclass(frozen=True)
class AtomReport:
    dropped: tuple[tuple[Fraction, CantorPoint], ...]  # per-measure lists flattened below
    per_measure: tuple[tuple[tuple[Fraction, CantorPoint], ...], ...]


def reduce_to_continuous(u: UniformNbhdSpec) -> tuple[UniformNbhdSpec, AtomReport]:
    """Replace each measure by its continuous part, renormalized.

    The atoms form a countable set; conditioning on its complement leaves
    the Bernoulli mixture with rescaled weights.  A measure with no
    continuous component makes the neighborhood trivial modulo countable
    support and is rejected.
    """
    new_measures = []
    per_measure = []
    for mu in u.measures:
        atoms = tuple((c.weight, c.param) for c in mu.components if c.kind == "dirac")
        per_measure.append(atoms)
        cont = [c for c in mu.components if c.kind == "bernoulli"]
        if not cont:
            raise CantorError("purely atomic measure")
        total = sum(c.weight for c in cont)
        new_measures.append(
            MeasureSpec(tuple(type(c)(c.weight / total, c.kind, c.param) for c in cont))
        )
    flat = tuple(a for atoms in per_measure for a in atoms)
    return (
        UniformNbhdSpec(u.center, tuple(new_measures), u.epsilon),
        AtomReport(flat, tuple(per_measure)),
    )
