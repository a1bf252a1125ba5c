"""Computable automorphisms of Cantor space.

An automorphism is described by finitely many rewrite rules, either literal
prefix exchanges u w -> v w or one-parameter schemes

    xu y^k zu w  ->  xv y2^k zv w      for all k >= 0,

together with a finite list of exceptional point pairs covering the
countably many points the rules miss (and, when a construction needs it,
overriding the rules on finitely many points).  The class is closed under
inversion and, via lazy pipelines, under composition; everything downstream
(images of clopen sets, resolution tables, periodic decomposition, cocycles)
is computed exactly from this description.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Iterable, Optional, Sequence, Union

from .cantor import (
    EMPTY,
    FULL,
    CantorError,
    CantorPoint,
    ClopenSet,
    MeasureSpec,
    canonical_words,
    check_word,
    common_prefix,
    measure,
    words_comparable,
)


class InvalidAutomorphism(CantorError):
    pass


class MapError(CantorError):
    pass


class BudgetExceeded(CantorError):
    pass


class ResolutionDiverges(CantorError):
    pass


# ---------------------------------------------------------------------------
# rewrite rules


@dataclass(frozen=True)
class Literal:
    u: str
    v: str

    def __post_init__(self) -> None:
        check_word(self.u)
        check_word(self.v)

    def inverted(self) -> "Literal":
        return Literal(self.v, self.u)

    @property
    def max_len(self) -> int:
        return max(len(self.u), len(self.v))


@dataclass(frozen=True)
class Scheme:
    xu: str
    y: str
    zu: str
    xv: str
    y2: str
    zv: str

    def __post_init__(self) -> None:
        for w in (self.xu, self.y, self.zu, self.xv, self.y2, self.zv):
            check_word(w)
        if len(self.y) != len(self.y2) or not self.y:
            raise InvalidAutomorphism("scheme blocks y, y2 must have equal positive length")
        if not self.zu or not self.zv:
            raise InvalidAutomorphism("scheme stops zu, zv must be nonempty")

    def pattern(self, k: int) -> str:
        return self.xu + self.y * k + self.zu

    def image(self, k: int) -> str:
        return self.xv + self.y2 * k + self.zv

    def domain_limit(self) -> CantorPoint:
        return CantorPoint(self.xu, self.y)

    def range_limit(self) -> CantorPoint:
        return CantorPoint(self.xv, self.y2)

    def inverted(self) -> "Scheme":
        return Scheme(self.xv, self.y2, self.zv, self.xu, self.y, self.zu)

    @property
    def max_len(self) -> int:
        return max(len(self.pattern(0)), len(self.image(0)))


Rule = Union[Literal, Scheme]


@dataclass(frozen=True)
class FamilyRelation:
    """How a cylinder [w] meets the instance family {x y^k z : k >= 0}."""

    inside: Optional[tuple[int, str]]  # (k, pattern) with pattern a prefix of w
    covered: tuple[int, ...]  # finite ks with w a proper prefix of pattern_k
    tail_start: Optional[int]  # all k >= tail_start have w a prefix of pattern_k


def relate_family(w: str, x: str, y: str, z: str) -> FamilyRelation:
    ly = len(y)
    inside = None
    kmax_inside = (len(w) - len(x) - len(z)) // ly if len(w) >= len(x) + len(z) else -1
    for k in range(kmax_inside + 1):
        p = x + y * k + z
        if w.startswith(p):
            inside = (k, p)
            break
    # w a prefix of x y^inf?
    tail_start = max(0, -(-(len(w) - len(x)) // ly))
    reps = tail_start + 1
    has_tail = (x + y * reps)[: len(w)] == w
    covered = []
    for k in range(tail_start):
        p = x + y * k + z
        if len(p) >= len(w) and p.startswith(w):
            covered.append(k)
    return FamilyRelation(inside, tuple(covered), tail_start if has_tail else None)


def family_common_image_prefix(s: Scheme, k0: int) -> str:
    """Common prefix of all image words xv y2^k zv with k >= k0."""
    base = s.xv + s.y2 * k0
    cp = s.zv
    while True:
        nxt = common_prefix(s.zv, s.y2 + cp)
        if nxt == cp:
            break
        cp = nxt
    return base + cp


# ---------------------------------------------------------------------------
# resolution tables


@dataclass(frozen=True)
class ResolutionTable:
    """Substitution view of an automorphism to a finite depth.

    ``cells`` act as prefix substitutions u w -> v w; ``tails`` are the
    unresolved cylinders, each with a word bounding every image from that
    cylinder (possibly the empty word when nothing is known).  Cell and
    tail domains together partition the space.
    """

    depth: int
    cells: tuple[tuple[str, str], ...]
    tails: tuple[tuple[str, str], ...]

    def unresolved(self) -> ClopenSet:
        return ClopenSet.from_words(u for u, _ in self.tails)

    def tail_bound(self, mu: MeasureSpec) -> Fraction:
        return measure(mu, self.unresolved())

    def entries(self) -> list[tuple[str, str, bool]]:
        """All (domain, image-or-bound, is_cell) rows."""
        rows = [(u, v, True) for u, v in self.cells]
        rows.extend((u, b, False) for u, b in self.tails)
        return rows

    def substitute(self, w: str) -> Optional[tuple[str, bool]]:
        """Image of [w] when a single row applies: (word, is_cell)."""
        for u, v in self.cells:
            if w.startswith(u):
                return v + w[len(u) :], True
        for u, b in self.tails:
            if w.startswith(u):
                return b, False
        return None


def _tail_bound_word(u: str, rules: Sequence[Rule], exceptional) -> str:
    """Longest word guaranteed to prefix every image originating in [u]."""
    contributions: list[str] = []
    for rule in rules:
        if isinstance(rule, Literal):
            if words_comparable(u, rule.u):
                contributions.append(rule.v)
        else:
            rel = relate_family(u, rule.xu, rule.y, rule.zu)
            if rel.inside is not None:
                k, p = rel.inside
                contributions.append(rule.image(k) + u[len(p) :])
            for k in rel.covered:
                contributions.append(rule.image(k))
            if rel.tail_start is not None:
                contributions.append(family_common_image_prefix(rule, rel.tail_start))
    for a, b in exceptional:
        if a.starts_with(u):
            contributions.append(b.expand(64))
    if not contributions:
        return ""
    out = contributions[0]
    for c in contributions[1:]:
        out = common_prefix(out, c)
    return out


def _resolve_atomic(rules: Sequence[Rule], exceptional, depth: int) -> ResolutionTable:
    cells: list[tuple[str, str]] = []
    for rule in rules:
        if isinstance(rule, Literal):
            if len(rule.u) <= depth:
                cells.append((rule.u, rule.v))
        else:
            k = 0
            while len(rule.pattern(k)) <= depth:
                cells.append((rule.pattern(k), rule.image(k)))
                k += 1
    covered = ClopenSet.from_words([u for u, _ in cells]) if cells else EMPTY
    tails = []
    for u in covered.complement().words:
        tails.append((u, _tail_bound_word(u, rules, exceptional)))
    return ResolutionTable(depth, tuple(sorted(cells)), tuple(sorted(tails)))


def _bound_through(table: ResolutionTable, bound: str) -> str:
    """Push an image bound through the next factor's table."""
    contributions = []
    for u, x, is_cell in table.entries():
        if not words_comparable(u, bound):
            continue
        if is_cell and bound.startswith(u):
            contributions.append(x + bound[len(u) :])
        else:
            contributions.append(x)
    if not contributions:
        return ""
    out = contributions[0]
    for c in contributions[1:]:
        out = common_prefix(out, c)
    return out


def _chain_tables(first: ResolutionTable, second: ResolutionTable, depth: int) -> ResolutionTable:
    cells: list[tuple[str, str]] = []
    tails: list[tuple[str, str]] = []
    for u, v in first.cells:
        hit_inside = False
        for a, b in second.cells:
            if v.startswith(a):
                cells.append((u, b + v[len(a) :]))
                hit_inside = True
                break
        if hit_inside:
            continue
        for a, b in second.cells:
            if a.startswith(v) and a != v:
                cells.append((u + a[len(v) :], b))
        for a, tb in second.tails:
            if v.startswith(a):
                tails.append((u, tb))
                break
            if a.startswith(v):
                tails.append((u + a[len(v) :], tb))
    for u, tb in first.tails:
        tails.append((u, _bound_through(second, tb)))
    return ResolutionTable(depth, tuple(sorted(cells)), tuple(sorted(tails)))


# ---------------------------------------------------------------------------
# the automorphism object


class PrefixAutomorphism:
    """A bijection of Cantor space given by rewrite rules or a pipeline.

    Immutable after construction.  ``factors`` (when set) is a pipeline in
    application order: the composite maps x through factors[0] first.
    Resolution tables are memoized per depth; the cache is append-only, so
    concurrent readers are safe under a single-writer discipline.
    """

    __slots__ = ("rules", "exceptional", "factors", "name", "aperiodic_reason", "_tables", "_inv")

    def __init__(
        self,
        rules: Optional[tuple[Rule, ...]] = None,
        exceptional: tuple[tuple[CantorPoint, CantorPoint], ...] = (),
        factors: Optional[tuple["PrefixAutomorphism", ...]] = None,
        name: Optional[str] = None,
        aperiodic_reason: Optional[str] = None,
    ):
        if (rules is None) == (factors is None):
            raise InvalidAutomorphism("exactly one of rules/factors must be given")
        self.rules = rules
        self.exceptional = tuple(exceptional)
        self.factors = factors
        self.name = name
        self.aperiodic_reason = aperiodic_reason
        self._tables: dict[int, ResolutionTable] = {}
        self._inv: Optional[PrefixAutomorphism] = None

    # -- structure ---------------------------------------------------------

    @property
    def is_atomic(self) -> bool:
        return self.factors is None

    def pipeline(self) -> tuple["PrefixAutomorphism", ...]:
        return (self,) if self.is_atomic else self.factors

    @property
    def complexity(self) -> int:
        if self.is_atomic:
            return max((r.max_len for r in self.rules), default=0)
        return max(f.complexity for f in self.factors)

    @property
    def depth_step(self) -> int:
        step = 1
        for f in self.pipeline():
            for r in f.rules or ():
                if isinstance(r, Scheme):
                    step = step * len(r.y) // gcd(step, len(r.y))
        return min(step, 12)

    def __repr__(self) -> str:
        if self.name:
            return f"<automorphism {self.name}>"
        if self.is_atomic:
            return f"<automorphism {len(self.rules)} rules>"
        return f"<automorphism pipeline of {len(self.factors)}>"

    # -- core operations ----------------------------------------------------

    def resolve(self, depth: int) -> ResolutionTable:
        if depth in self._tables:
            return self._tables[depth]
        if self.is_atomic:
            table = _resolve_atomic(self.rules, self.exceptional, depth)
        else:
            table = self.factors[0].resolve(depth)
            for f in self.factors[1:]:
                table = _chain_tables(table, f.resolve(depth), depth)
        self._tables[depth] = table
        return table

    def apply(self, x: CantorPoint) -> CantorPoint:
        if not self.is_atomic:
            for f in self.factors:
                x = f.apply(x)
            return x
        for a, b in self.exceptional:
            if x == a:
                return b
        img = _apply_rules(self.rules, x)
        if img is None:
            raise MapError(f"no rule or exceptional pair applies to {x}")
        return img

    def inverse(self) -> "PrefixAutomorphism":
        if self._inv is not None:
            return self._inv
        if self.is_atomic:
            inv = PrefixAutomorphism(
                rules=tuple(r.inverted() for r in self.rules),
                exceptional=tuple((b, a) for a, b in self.exceptional),
                name=f"{self.name}^-1" if self.name else None,
                aperiodic_reason=self.aperiodic_reason,
            )
        else:
            inv = PrefixAutomorphism(
                factors=tuple(f.inverse() for f in reversed(self.factors)),
                name=f"{self.name}^-1" if self.name else None,
                aperiodic_reason=self.aperiodic_reason,
            )
        self._inv = inv
        inv._inv = self
        return inv


def _apply_rules(rules: Sequence[Rule], x: CantorPoint) -> Optional[CantorPoint]:
    for rule in rules:
        if isinstance(rule, Literal):
            if x.starts_with(rule.u):
                return x.drop(len(rule.u)).prepend(rule.v)
        else:
            k = _match_scheme(rule, x)
            if k is not None:
                return x.drop(len(rule.pattern(k))).prepend(rule.image(k))
    return None


def _match_scheme(s: Scheme, x: CantorPoint) -> Optional[int]:
    if not x.starts_with(s.xu):
        return None
    ly, lz = len(s.y), len(s.zu)
    seen = set()
    k = 0
    while True:
        pos = len(s.xu) + k * ly
        if x.expand(pos + lz)[pos:] == s.zu:
            return k
        if x.expand(pos + ly)[pos:] != s.y:
            return None
        # once inside the periodic part the match state recurs
        if pos >= len(x.head):
            state = (pos - len(x.head)) % len(x.cycle)
            if state in seen:
                return None
            seen.add(state)
        k += 1


# ---------------------------------------------------------------------------
# composition


def identity() -> PrefixAutomorphism:
    return PrefixAutomorphism(rules=(Literal("", ""),), name="identity")


def invert(t: PrefixAutomorphism) -> PrefixAutomorphism:
    return t.inverse()


def apply_point(t: PrefixAutomorphism, x: CantorPoint) -> CantorPoint:
    return t.apply(x)


def resolve(t: PrefixAutomorphism, depth: int) -> ResolutionTable:
    return t.resolve(depth)


def compose(s: PrefixAutomorphism, t: PrefixAutomorphism, unify_budget: int = 256) -> PrefixAutomorphism:
    """The composite x -> s(t(x)).

    Adjacent atomic factors are unified eagerly when the rewrite algebra
    stays within budget; otherwise the result is a lazy pipeline that
    resolves by chaining tables.
    """
    pipeline = t.pipeline() + s.pipeline()
    folded: list[PrefixAutomorphism] = [pipeline[0]]
    for f in pipeline[1:]:
        merged = None
        if folded[-1].is_atomic and f.is_atomic:
            merged = _try_unify(folded[-1], f, unify_budget)
        if merged is not None:
            folded[-1] = merged
        else:
            folded.append(f)
    if len(folded) == 1:
        return folded[0]
    return PrefixAutomorphism(factors=tuple(folded))


def power(t: PrefixAutomorphism, n: int) -> PrefixAutomorphism:
    if n == 0:
        return identity()
    base = t if n > 0 else t.inverse()
    out = base
    for _ in range(abs(n) - 1):
        out = compose(base, out)
    return out


def conjugate(t: PrefixAutomorphism, by: PrefixAutomorphism) -> PrefixAutomorphism:
    """The conjugated map by . t . by^-1, inheriting t's aperiodicity."""
    out = compose(by, compose(t, by.inverse()))
    return PrefixAutomorphism(
        rules=out.rules,
        exceptional=out.exceptional,
        factors=out.factors,
        name=f"conj({t.name or '?'})",
        aperiodic_reason=t.aperiodic_reason and f"conjugate of: {t.aperiodic_reason}",
    )


def _try_unify(first: PrefixAutomorphism, second: PrefixAutomorphism, budget: int) -> Optional[PrefixAutomorphism]:
    try:
        rules = _unify_rules(first.rules, second.rules, budget)
    except BudgetExceeded:
        return None
    if rules is None:
        return None
    exc: dict[CantorPoint, CantorPoint] = {}
    try:
        for a, b in first.exceptional:
            exc[a] = second.apply(b)
        for a2, b2 in second.exceptional:
            p = first.inverse().apply(a2)
            if p not in exc:
                exc[p] = b2
    except MapError:
        return None
    cand = PrefixAutomorphism(rules=tuple(rules), exceptional=tuple(sorted(exc.items(), key=lambda ab: str(ab[0]))))
    if _unification_consistent(first, second, cand):
        return cand
    return None


def _unify_rules(first: Sequence[Rule], second: Sequence[Rule], budget: int) -> Optional[list[Rule]]:
    out: list[Rule] = []

    def spend() -> None:
        if len(out) > budget:
            raise BudgetExceeded("rule unification budget exhausted")

    for r in first:
        if isinstance(r, Literal):
            u, v = r.u, r.v
            inside = False
            for s in second:
                if isinstance(s, Literal):
                    if v.startswith(s.u):
                        out.append(Literal(u, s.v + v[len(s.u) :]))
                        inside = True
                        break
                else:
                    rel = relate_family(v, s.xu, s.y, s.zu)
                    if rel.inside is not None:
                        k, p = rel.inside
                        out.append(Literal(u, s.image(k) + v[len(p) :]))
                        inside = True
                        break
            if inside:
                spend()
                continue
            for s in second:
                if isinstance(s, Literal):
                    if s.u.startswith(v) and s.u != v:
                        out.append(Literal(u + s.u[len(v) :], s.v))
                else:
                    rel = relate_family(v, s.xu, s.y, s.zu)
                    for k in rel.covered:
                        out.append(Literal(u + s.pattern(k)[len(v) :], s.image(k)))
                    if rel.tail_start is not None:
                        k0 = rel.tail_start
                        pad = (s.xu + s.y * k0)[len(v) :]
                        out.append(Scheme(u + pad, s.y, s.zu, s.xv + s.y2 * k0, s.y2, s.zv))
                spend()
        else:
            # push the range family of a scheme through the second system
            for s in second:
                if isinstance(s, Scheme):
                    return None  # scheme-through-scheme stays lazy
            for s in second:
                a, b = s.u, s.v
                # instances with the range word extending a
                kmax = (len(a) - len(r.xv) - len(r.zv)) // len(r.y2) if len(a) >= len(r.xv) + len(r.zv) else -1
                matched_inside = False
                for k in range(kmax + 1):
                    rng = r.image(k)
                    if a.startswith(rng) and a != rng:
                        out.append(Literal(r.pattern(k) + a[len(rng) :], b))
                        matched_inside = True
                rel = relate_family(a, r.xv, r.y2, r.zv)
                if rel.inside is not None and not matched_inside:
                    k, p = rel.inside
                    out.append(Literal(r.pattern(k) + a[len(p) :], b))
                for k in rel.covered:
                    out.append(Literal(r.pattern(k), b + r.image(k)[len(a) :]))
                if rel.tail_start is not None:
                    k0 = rel.tail_start
                    pad2 = (r.xv + r.y2 * k0)[len(a) :]
                    out.append(Scheme(r.xu + r.y * k0, r.y, r.zu, b + pad2, r.y2, r.zv))
                spend()
    return out


def _unification_consistent(
    first: PrefixAutomorphism, second: PrefixAutomorphism, cand: PrefixAutomorphism
) -> bool:
    """Extensional smoke test of an eager unification against lazy chaining."""
    depth = max(first.complexity, second.complexity, cand.complexity) + 2
    try:
        chained = _chain_tables(first.resolve(depth), second.resolve(depth), depth)
        direct = cand.resolve(depth)
    except CantorError:
        return False
    rows_c = chained.entries()
    rows_d = direct.entries()
    for u1, x1, cell1 in rows_c:
        for u2, x2, cell2 in rows_d:
            if not words_comparable(u1, u2):
                continue
            if cell1 and cell2:
                w = u1 if len(u1) >= len(u2) else u2
                img1 = x1 + w[len(u1) :]
                img2 = x2 + w[len(u2) :]
                if img1 != img2:
                    return False
            elif cell1 != cell2:
                # one side resolved where the other is not: accept only if the
                # resolved image is consistent with the other's bound
                img, bound = (x1, x2) if cell1 else (x2, x1)
                if bound and not words_comparable(img, bound):
                    return False
    return True


# ---------------------------------------------------------------------------
# images of clopen sets


def substitute_word(t: PrefixAutomorphism, w: str) -> Optional[str]:
    """Image word of the cylinder [w] when t acts on it by one substitution.

    Returns None when [w] straddles rule domains (caller should split w).
    """
    if not t.is_atomic:
        cur = w
        for f in t.pipeline():
            cur = substitute_word(f, cur)
            if cur is None:
                return None
        return cur
    for rule in t.rules:
        if isinstance(rule, Literal):
            if w.startswith(rule.u):
                return rule.v + w[len(rule.u) :]
            if rule.u.startswith(w):
                return None
        else:
            rel = relate_family(w, rule.xu, rule.y, rule.zu)
            if rel.inside is not None:
                k, p = rel.inside
                return rule.image(k) + w[len(p) :]
            if rel.covered or rel.tail_start is not None:
                return None
    return None


@dataclass(frozen=True)
class ImageResult:
    image: ClopenSet
    residual_points: tuple[CantorPoint, ...]


def _image_once(table: ResolutionTable, a: ClopenSet) -> tuple[list[str], list[str]]:
    imgs: list[str] = []
    bounds: list[str] = []
    for u, x, is_cell in table.entries():
        for w in a.words:
            if u.startswith(w):
                (imgs if is_cell else bounds).append(x)
            elif w.startswith(u) and w != u:
                if is_cell:
                    imgs.append(x + w[len(u) :])
                else:
                    bounds.append(x)
    return imgs, bounds


def _nested(older: ClopenSet, newer: ClopenSet) -> bool:
    if newer.is_empty:
        return True
    if len(newer.words) > len(older.words):
        return False
    return all(any(w.startswith(o) and w != o for o in older.words) for w in newer.words)


def image_clopen(
    t: PrefixAutomorphism,
    a: ClopenSet,
    start_depth: Optional[int] = None,
    max_depth: int = 160,
) -> ImageResult:
    """Exact image t(A) as a canonical clopen set, modulo countably many points.

    The resolved part underestimates and the tail bounds overestimate the
    image; the answer is accepted once the combined canonical form is stable
    under deepening and the uncertain region shrinks as nested cylinders, so
    the overshoot is at most finitely many points (reported as residuals).
    """
    if a.is_empty:
        return ImageResult(EMPTY, ())
    step = max(t.depth_step, 1)
    depth = start_depth or (max(len(w) for w in a.words) + t.complexity + 2 * step + 2)
    prev_j: Optional[ClopenSet] = None
    prev_u: Optional[ClopenSet] = None
    while depth <= max_depth:
        table = t.resolve(depth)
        imgs, bounds = _image_once(table, a)
        resolved = ClopenSet.from_words(imgs)
        full = ClopenSet.from_words(imgs + bounds)
        uncertain = full.diff(resolved)
        if uncertain.is_empty:
            return ImageResult(full, _residuals(t, a, full))
        if prev_j == full and prev_u is not None and _nested(prev_u, uncertain):
            return ImageResult(full, _residuals(t, a, full))
        prev_j, prev_u = full, uncertain
        depth += step
    raise ResolutionDiverges(f"image of {a} did not stabilize by depth {max_depth}")


def _residuals(t: PrefixAutomorphism, a: ClopenSet, img: ClopenSet) -> tuple[CantorPoint, ...]:
    """Points whose membership in the returned clopen image may be off."""
    candidates: set[CantorPoint] = set()
    for f in t.pipeline():
        for a_pt, b_pt in f.exceptional:
            candidates.add(b_pt)
        for rule in f.rules or ():
            if isinstance(rule, Scheme):
                candidates.add(rule.range_limit())
    out = []
    inv = t.inverse()
    for p in sorted(candidates, key=str):
        try:
            pre = inv.apply(p)
        except MapError:
            continue
        truly_in = a.contains_point(pre)
        if truly_in != img.contains_point(p):
            out.append(p)
    return tuple(out)


def saturation_clopen(
    t: PrefixAutomorphism, a: ClopenSet, budget: int = 256
) -> tuple[ClopenSet, tuple[CantorPoint, ...]]:
    """Saturation of A under t (union of all forward and backward images).

    Exact as a clopen set modulo countably many points.  When the growing
    union does not close up within the budget, a limit is accepted only if
    the moving part of the complement shrinks as nested cylinders and the
    guessed limit is verifiably invariant.
    """
    inv = t.inverse()
    u = a
    prev_comp: Optional[ClopenSet] = None
    for _ in range(budget):
        fwd = image_clopen(t, u).image
        bwd = image_clopen(inv, u).image
        v = u.union(fwd).union(bwd)
        if v == u:
            return u, ()
        comp = v.complement()
        if prev_comp is not None and not comp.is_empty:
            stable = [w for w in comp.words if w in prev_comp.words]
            moving_old = [w for w in prev_comp.words if w not in stable]
            moving_new = [w for w in comp.words if w not in stable]
            if (
                moving_new
                and len(moving_new) <= len(moving_old)
                and all(any(w.startswith(o) and w != o for o in moving_old) for w in moving_new)
            ):
                guess = ClopenSet.from_words(stable).complement()
                if (
                    guess.contains_set(a)
                    and guess.contains_set(image_clopen(t, guess).image)
                    and guess.contains_set(image_clopen(inv, guess).image)
                ):
                    limits = tuple(CantorPoint(o, _chain_period(o, moving_new)) for o in moving_old if any(w.startswith(o) for w in moving_new))
                    return guess, limits
        prev_comp = comp
        u = v
    raise BudgetExceeded(f"saturation of {a} did not stabilize within {budget} rounds")


def _chain_period(old_word: str, new_words: Sequence[str]) -> str:
    for w in new_words:
        if w.startswith(old_word) and len(w) > len(old_word):
            return w[len(old_word) :]
    return "0"


def restrict_rules(t: PrefixAutomorphism, c: ClopenSet, depth: int = 48) -> list[Rule]:
    """Rules describing t on the clopen set c (domains contained in c)."""
    out: list[Rule] = []
    if t.is_atomic:
        for rule in t.rules:
            for w in c.words:
                if isinstance(rule, Literal):
                    if rule.u.startswith(w):
                        out.append(rule)
                    elif w.startswith(rule.u) and w != rule.u:
                        out.append(Literal(w, rule.v + w[len(rule.u) :]))
                else:
                    rel = relate_family(w, rule.xu, rule.y, rule.zu)
                    if rel.inside is not None:
                        k, p = rel.inside
                        out.append(Literal(w, rule.image(k) + w[len(p) :]))
                    for k in rel.covered:
                        out.append(Literal(rule.pattern(k), rule.image(k)))
                    if rel.tail_start is not None:
                        k0 = rel.tail_start
                        out.append(
                            Scheme(rule.xu + rule.y * k0, rule.y, rule.zu, rule.xv + rule.y2 * k0, rule.y2, rule.zv)
                        )
        return _dedupe_rules(out)
    table = t.resolve(depth)
    for u, v in table.cells:
        for w in c.words:
            if u.startswith(w):
                out.append(Literal(u, v))
            elif w.startswith(u) and w != u:
                out.append(Literal(w, v + w[len(u) :]))
    for u, _ in table.tails:
        for w in c.words:
            if words_comparable(u, w):
                raise BudgetExceeded(f"cannot restrict composite map on {w}: unresolved at depth {depth}")
    return _dedupe_rules(out)


def _dedupe_rules(rules: Iterable[Rule]) -> list[Rule]:
    seen = set()
    out = []
    for r in rules:
        key = (r.u, r.v) if isinstance(r, Literal) else (r.xu, r.y, r.zu, r.xv, r.y2, r.zv)
        if key not in seen:
            seen.add(key)
            out.append(r)
    return out


# ---------------------------------------------------------------------------
# builders and validation


def finite_exchange(mapping: dict[str, str], name: Optional[str] = None) -> PrefixAutomorphism:
    """Automorphism permuting cylinders by a complete prefix-code exchange."""
    rules = tuple(Literal(check_word(u), check_word(v)) for u, v in sorted(mapping.items()))
    auto = PrefixAutomorphism(rules=rules, name=name)
    validate_automorphism(auto)
    return auto


def scheme_automorphism(
    rules: Sequence[Rule],
    exceptional: Sequence[tuple[CantorPoint, CantorPoint]] = (),
    name: Optional[str] = None,
    aperiodic_reason: Optional[str] = None,
    validate: bool = True,
) -> PrefixAutomorphism:
    auto = PrefixAutomorphism(
        rules=tuple(rules),
        exceptional=tuple(exceptional),
        name=name,
        aperiodic_reason=aperiodic_reason,
    )
    if validate:
        validate_automorphism(auto)
    return auto


def odometer() -> PrefixAutomorphism:
    """The dyadic adding machine 1^k 0 w -> 0^k 1 w, with 1^inf -> 0^inf."""
    return scheme_automorphism(
        (Scheme("", "1", "0", "", "0", "1"),),
        ((CantorPoint("", "1"), CantorPoint("", "0")),),
        name="odometer",
        aperiodic_reason="adding machine: orbits strictly increase the carry chain",
    )


def bitflip() -> PrefixAutomorphism:
    return finite_exchange({"0": "1", "1": "0"}, name="bitflip")


def drift_map() -> PrefixAutomorphism:
    """The shrinking exchange 0->00, 10->01, 11->1; every orbit drifts into zeros."""
    return finite_exchange({"0": "00", "10": "01", "11": "1"}, name="drift")


def counter(bits: int) -> PrefixAutomorphism:
    """Cyclic +1 counter on the first ``bits`` digits (period 2^bits)."""
    n = 2**bits
    mapping = {}
    for i in range(n):
        w = format(i, f"0{bits}b")[::-1]
        w2 = format((i + 1) % n, f"0{bits}b")[::-1]
        mapping[w] = w2
    return finite_exchange(mapping, name=f"counter{n}")


def build(kind: str, **kwargs) -> PrefixAutomorphism:
    """Construct a validated automorphism from one of the named recipes."""
    if kind == "identity":
        return identity()
    if kind == "odometer":
        return odometer()
    if kind == "finite_exchange":
        return finite_exchange(kwargs["pairs"], name=kwargs.get("name"))
    if kind == "scheme":
        return scheme_automorphism(
            kwargs["rules"], kwargs.get("exceptional", ()), name=kwargs.get("name")
        )
    raise InvalidAutomorphism(f"unknown constructor {kind!r}")


def _instance_words(rule: Rule, up_to: int) -> list[str]:
    if isinstance(rule, Literal):
        return [rule.u]
    out = []
    k = 0
    while len(rule.pattern(k)) <= up_to:
        out.append(rule.pattern(k))
        k += 1
    return out


def _check_antichain(rules: Sequence[Rule], side: str) -> None:
    def words_of(rule: Rule, up_to: int) -> list[str]:
        if side == "domain":
            return _instance_words(rule, up_to)
        inv = rule.inverted()
        return _instance_words(inv, up_to)

    blocks = [len(r.y) for r in rules if isinstance(r, Scheme)]
    lcm = 1
    for b in blocks:
        lcm = lcm * b // gcd(lcm, b)
    window = sum(r.max_len for r in rules) + 2 * lcm + 4
    window = min(window, 96)
    seen: list[str] = []
    for rule in rules:
        for w in words_of(rule, window):
            for prev in seen:
                if words_comparable(prev, w):
                    raise InvalidAutomorphism(
                        f"{side} not prefix-free: {prev!r} vs {w!r}"
                        if side == "domain"
                        else f"ranges overlap: {prev!r} vs {w!r}"
                    )
            seen.append(w)


def _uncovered_limit_points(rules: Sequence[Rule]) -> list[CantorPoint]:
    out = []
    for rule in rules:
        if isinstance(rule, Scheme):
            p = rule.domain_limit()
            if _apply_rules(rules, p) is None:
                out.append(p)
    return out


def validate_automorphism(auto: PrefixAutomorphism, depth: int = 8) -> None:
    """Check the rule system describes a bijection, to the configured depth.

    Structural checks (prefix-freeness of both sides, vanishing unresolved
    tails, exceptional bookkeeping) are exact; coverage is extensional in
    the sense that tails must keep shrinking between two depths.
    """
    if not auto.is_atomic:
        for f in auto.factors:
            validate_automorphism(f, depth)
        return
    rules = auto.rules
    if not rules:
        raise InvalidAutomorphism("empty rule list")
    _check_antichain(rules, "domain")
    _check_antichain(rules, "range")
    d = max(depth, auto.complexity + 2)
    step = max(auto.depth_step, 1)
    t1 = auto.resolve(d)
    t2 = auto.resolve(d + step)
    u1, u2 = t1.unresolved(), t2.unresolved()
    if not u1.contains_set(u2):
        raise InvalidAutomorphism(f"not a bijection at depth {d}: unresolved region grows")
    if not u2.is_empty and not _nested(u1, u2):
        raise InvalidAutomorphism(f"not a bijection at depth {d}: unresolved region does not vanish")
    exc_domains = [a for a, _ in auto.exceptional]
    exc_images = [b for _, b in auto.exceptional]
    if len(set(exc_domains)) != len(exc_domains) or len(set(exc_images)) != len(exc_images):
        raise InvalidAutomorphism("exceptional pairs are not a bijection")
    for p in _uncovered_limit_points(rules):
        if p not in exc_domains:
            raise InvalidAutomorphism(f"not a bijection at depth {d}: uncovered point {p}")
    inv_rules = tuple(r.inverted() for r in rules)
    for q in _uncovered_limit_points(inv_rules):
        if q not in exc_images:
            raise InvalidAutomorphism(f"not a bijection at depth {d}: unreachable point {q}")
    # overridden rule images must be reclaimed by the exceptional part
    for a in exc_domains:
        stolen = _apply_rules(rules, a)
        if stolen is not None and stolen not in exc_images:
            raise InvalidAutomorphism(f"override at {a} leaves {stolen} without a preimage")
    for b in exc_images:
        pre = _apply_rules(inv_rules, b)
        if pre is not None and pre not in exc_domains:
            raise InvalidAutomorphism(f"image point {b} would be covered twice")


# ---------------------------------------------------------------------------
# periodic decomposition


@dataclass(frozen=True)
class OrbitTower:
    """One cyclic tower of a periodic region: column words level by level."""

    height: int
    column: tuple[str, ...]  # column[0] is the lexicographically least level


@dataclass(frozen=True)
class PeriodicDecomposition:
    parts: dict[int, tuple[ClopenSet, ClopenSet]]  # k -> (X_k, base B_k)
    aperiodic: ClopenSet
    unknown: ClopenSet
    orbits: tuple[OrbitTower, ...]

    @property
    def is_periodic(self) -> bool:
        return self.aperiodic.is_empty and self.unknown.is_empty

    @property
    def is_aperiodic(self) -> bool:
        return not self.parts and self.unknown.is_empty


def _max_shrink(t: PrefixAutomorphism) -> int:
    worst = 0
    for f in t.pipeline():
        for r in f.rules or ():
            if isinstance(r, Literal):
                worst = max(worst, len(r.u) - len(r.v))
            else:
                worst = max(worst, len(r.pattern(0)) - len(r.image(0)))
    return worst


def periodic_decomposition(
    t: PrefixAutomorphism, depth: int = 6, period_bound: int = 8
) -> PeriodicDecomposition:
    """Classify cylinders by exact period under t.

    A cell is k-periodic when the k-fold substitution returns its own word;
    cells not decided within the bounds land in ``unknown`` (never guessed).
    Automorphisms carrying an aperiodicity certificate short-circuit.
    """
    if t.aperiodic_reason is not None:
        return PeriodicDecomposition({}, FULL, EMPTY, ())
    level = depth + period_bound * max(_max_shrink(t), 0) + t.complexity
    words = FULL.refine(level)
    period_of: dict[str, tuple[int, tuple[str, ...]]] = {}
    unknown: list[str] = []
    for w in words:
        orbit = [w]
        cur = w
        found = None
        for j in range(1, period_bound + 1):
            nxt = substitute_word(t, cur)
            if nxt is None:
                break
            if nxt == w:
                found = j
                break
            orbit.append(nxt)
            cur = nxt
        if found is None:
            unknown.append(w)
        else:
            period_of[w] = (found, tuple(orbit))
    parts: dict[int, tuple[ClopenSet, ClopenSet]] = {}
    orbit_towers: list[OrbitTower] = []
    by_k: dict[int, list[str]] = {}
    seen_orbits: set[frozenset[str]] = set()
    for w, (k, orbit) in sorted(period_of.items()):
        by_k.setdefault(k, []).append(w)
        key = frozenset(orbit)
        if key not in seen_orbits:
            seen_orbits.add(key)
            base = min(orbit)
            i = orbit.index(base)
            orbit_towers.append(OrbitTower(k, orbit[i:] + orbit[:i]))
    for k, ws in sorted(by_k.items()):
        xk = ClopenSet.from_words(ws)
        bases = [ot.column[0] for ot in orbit_towers if ot.height == k]
        parts[k] = (xk, ClopenSet.from_words(bases))
    return PeriodicDecomposition(
        parts,
        EMPTY,
        ClopenSet.from_words(unknown),
        tuple(sorted(orbit_towers, key=lambda ot: (ot.height, ot.column))),
    )


# ---------------------------------------------------------------------------
# exact comparison of two automorphisms


@dataclass(frozen=True)
class DifferenceRegions:
    """Cell-exact classification of where two automorphisms differ."""

    agree: ClopenSet
    differ: ClopenSet
    unknown: ClopenSet
    witness: Optional[str]  # a differ cell, when any


def struct_window(*autos: PrefixAutomorphism) -> int:
    """Depth beyond which scheme instance alignment repeats periodically.

    Two rule systems whose resolved cells agree at this depth and one block
    step further agree at every depth: past the longest fixed parts, the
    way instances of one family cut those of another depends only on the
    offset modulo the least common block length.
    """
    total = 0
    lcm = 1
    for auto in autos:
        for f in auto.pipeline():
            total += max((r.max_len for r in f.rules or ()), default=0)
            for r in f.rules or ():
                if isinstance(r, Scheme):
                    lcm = lcm * len(r.y) // gcd(lcm, len(r.y))
    return min(total + 2 * lcm + 4, 64)


def _classify_at(s: PrefixAutomorphism, t: PrefixAutomorphism, depth: int, region: Optional[ClopenSet]) -> DifferenceRegions:
    ts, tt = s.resolve(depth), t.resolve(depth)
    agree: list[str] = []
    differ: list[str] = []
    unknown: list[str] = []
    witness = None
    region_words = None if region is None else region.words
    for u1, x1, c1 in ts.entries():
        for u2, x2, c2 in tt.entries():
            if not words_comparable(u1, u2):
                continue
            w = u1 if len(u1) >= len(u2) else u2
            pieces = [w]
            if region_words is not None:
                pieces = []
                for rw in region_words:
                    if rw.startswith(w):
                        pieces.append(rw)
                    elif w.startswith(rw):
                        pieces.append(w)
            for piece in pieces:
                i1 = x1 + piece[len(u1) :] if c1 else x1
                i2 = x2 + piece[len(u2) :] if c2 else x2
                if c1 and c2:
                    if i1 == i2:
                        agree.append(piece)
                    else:
                        differ.append(piece)
                        witness = witness or piece
                else:
                    # at least one side only bounded: certain difference iff
                    # the bounding cylinders cannot meet
                    if i1 and i2 and not words_comparable(i1, i2):
                        differ.append(piece)
                        witness = witness or piece
                    else:
                        unknown.append(piece)
    return DifferenceRegions(
        ClopenSet.from_words(agree),
        ClopenSet.from_words(differ),
        ClopenSet.from_words(unknown),
        witness,
    )


def compare_mod_ctbl(
    s: PrefixAutomorphism,
    t: PrefixAutomorphism,
    depth: int = 8,
    region: Optional[ClopenSet] = None,
) -> tuple[str, Optional[str]]:
    """Decide pointwise equality modulo a countable set, on a clopen region.

    Returns ("equal", None), ("distinct", witness-cell) or ("unknown", None).
    Equality is certified by agreement of all resolved cells at the
    structural window depth and one block step deeper, with the undecided
    region vanishing as nested cylinders.
    """
    base = max(depth, struct_window(s, t))
    step = max(s.depth_step, t.depth_step, 1)
    first = _classify_at(s, t, base, region)
    if not first.differ.is_empty:
        return "distinct", first.witness
    second = _classify_at(s, t, base + step, region)
    if not second.differ.is_empty:
        return "distinct", second.witness
    if second.unknown.is_empty:
        return "equal", None
    if _nested(first.unknown, second.unknown):
        return "equal", None
    return "unknown", None


# ---------------------------------------------------------------------------
# full group cocycles


@dataclass(frozen=True)
class Cocycle:
    cells: tuple[tuple[ClopenSet, int], ...]
    residual: ClopenSet
    verdict: str  # "ok" | "not in full group within bounds"
    witness: Optional[str] = None


def full_group_cocycle(
    gamma: PrefixAutomorphism,
    t: PrefixAutomorphism,
    depth: int = 8,
    power_bound: int = 8,
) -> Cocycle:
    """Exact power function m with gamma = t^m cell by cell.

    Cells where gamma provably matches no power within the bound yield the
    negative verdict with a witness cylinder; unresolved cells go to the
    residual, never guessed.
    """
    gt = gamma.resolve(depth)
    powers_auto = {0: identity()}
    for m in range(1, power_bound + 1):
        powers_auto[m] = power(t, m)
        powers_auto[-m] = power(t, -m)
    powers = {m: a.resolve(depth) for m, a in powers_auto.items()}
    order = sorted(powers, key=lambda m: (abs(m), -m))
    assignments: dict[int, list[str]] = {}
    residual: list[str] = []
    witness = None

    # refine the space against the gamma table and every power table
    subwords = {u for u, _, _ in gt.entries()}
    for m in order:
        table = powers[m]
        refined = set()
        for w in subwords:
            exts = [a for a, _, _ in table.entries() if a.startswith(w) and a != w]
            if exts:
                refined.update(exts)
            else:
                refined.add(w)
        subwords = refined

    for w in sorted(subwords):
        got = gt.substitute(w)
        if got is None or not got[1]:
            # gamma itself unresolved here: try a structural match per power
            matched = False
            for m in order:
                verdict, _ = compare_mod_ctbl(gamma, powers_auto[m], depth, ClopenSet.cylinder(w))
                if verdict == "equal":
                    assignments.setdefault(m, []).append(w)
                    matched = True
                    break
            if not matched:
                residual.append(w)
            continue
        gimg = got[0]
        matched = False
        undecided = False
        for m in order:
            res = powers[m].substitute(w)
            if res is None:
                continue
            img, is_cell = res
            if not is_cell:
                undecided = True
                continue
            if img == gimg:
                assignments.setdefault(m, []).append(w)
                matched = True
                break
        if matched:
            continue
        if undecided:
            residual.append(w)
        else:
            witness = w
    cells = tuple(
        (ClopenSet.from_words(ws), m) for m, ws in sorted(assignments.items(), key=lambda kv: kv[0])
    )
    if witness is not None:
        return Cocycle(cells, ClopenSet.from_words(residual), "not in full group within bounds", witness)
    return Cocycle(cells, ClopenSet.from_words(residual), "ok")
