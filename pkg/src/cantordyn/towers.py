"""Tower machinery: recurrence splitting, first-return partitions, markers,
and tall tower partitions with small boundary mass.

Everything is computed on clopen sets with exact images, so the usual
measure-theoretic statements become verifiable certificates: level
disjointness, the level-shift property, tops mapping onto bases, and the
boundary-mass bound are all checked and shipped with the result.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional, Sequence

from .cantor import EMPTY, FULL, CantorError, ClopenSet, MeasureSpec, measure
from .automorphism import (
    BudgetExceeded,
    PrefixAutomorphism,
    image_clopen,
    substitute_word,
)


class NotCertifiedAperiodic(CantorError):
    pass


class UnrecurrentError(CantorError):
    pass


@dataclass(frozen=True)
class Tower:
    base: ClopenSet
    height: int
    levels: tuple[ClopenSet, ...]

    @property
    def top(self) -> ClopenSet:
        return self.levels[-1]

    def support(self) -> ClopenSet:
        out = EMPTY
        for lv in self.levels:
            out = out.union(lv)
        return out


@dataclass(frozen=True)
class TowerPartition:
    automorphism: PrefixAutomorphism
    section: ClopenSet
    towers: tuple[Tower, ...]
    leftover: ClopenSet
    saturation: ClopenSet
    certificate: dict

    def support(self) -> ClopenSet:
        out = EMPTY
        for tw in self.towers:
            out = out.union(tw.support())
        return out


@dataclass
class _Track:
    returns: dict[int, ClopenSet]
    alive: list[tuple[ClopenSet, list[ClopenSet]]]
    visited: ClopenSet  # A together with all pre-return forward images


def _forward_track(t: PrefixAutomorphism, a: ClopenSet, budget: int) -> _Track:
    """Track forward images of A until they return to A.

    Image histories are kept so that partial hits can be pulled back
    exactly, one inverse step at a time.
    """
    inv = t.inverse()
    alive: list[tuple[ClopenSet, list[ClopenSet]]] = [(a, [a])]
    returns: dict[int, ClopenSet] = {}
    visited = a
    for i in range(1, budget + 1):
        nxt: list[tuple[ClopenSet, list[ClopenSet]]] = []
        for orig, history in alive:
            img = image_clopen(t, history[-1]).image
            visited = visited.union(img)
            hit = img.intersect(a)
            miss = img.diff(a)
            if not hit.is_empty:
                if miss.is_empty:
                    back = orig
                else:
                    back = hit
                    for prev in reversed(history):
                        back = image_clopen(inv, back).image.intersect(prev)
                returns[i] = returns.get(i, EMPTY).union(back)
                orig = orig.diff(back)
            if not miss.is_empty and not orig.is_empty:
                nxt.append((orig, history + [miss]))
        alive = nxt
        if not alive:
            break
    return _Track(returns, alive, visited)


def poincare_split(
    t: PrefixAutomorphism, a: ClopenSet, budget: int = 32
) -> tuple[ClopenSet, ClopenSet, ClopenSet]:
    """Split A into wandering, recurrent, and undecided parts.

    Recurrence is certified by an exact return within the budget; wandering
    by budget-long disjointness plus a forward-invariant clopen trap
    disjoint from A.  Everything else stays undecided.
    """
    if a.is_empty:
        return EMPTY, EMPTY, EMPTY
    track = _forward_track(t, a, budget)
    recurrent = EMPTY
    for piece in track.returns.values():
        recurrent = recurrent.union(piece)
    wandering = EMPTY
    undecided = EMPTY
    for orig, history in track.alive:
        trap = _find_trap(t, history[-1], a)
        if trap is not None:
            wandering = wandering.union(orig)
        else:
            undecided = undecided.union(orig)
    return wandering, recurrent, undecided


def _find_trap(t: PrefixAutomorphism, cur: ClopenSet, avoid: ClopenSet) -> Optional[ClopenSet]:
    """A clopen trap containing cur, disjoint from avoid, with t(C) inside C."""
    candidates = []
    for w in cur.words:
        for k in range(len(w), 0, -1):
            candidates.append(w[:k])
    for c in sorted(set(candidates), key=len):
        trap = ClopenSet.cylinder(c)
        if not trap.contains_set(cur) or not trap.is_disjoint(avoid):
            continue
        try:
            img = image_clopen(t, trap).image
        except CantorError:
            continue
        if trap.contains_set(img):
            return trap
    return None


def first_return(
    t: PrefixAutomorphism, a: ClopenSet, nmax: int = 64
) -> tuple[dict[int, ClopenSet], ClopenSet]:
    """First-return decomposition {C_k} of A with exact return times.

    C_k collects the points of A whose orbit re-enters A after exactly k
    steps, the intermediate images staying outside A; points not returning
    within the budget are reported as leftover, never dropped.
    """
    if a.is_empty:
        return {}, EMPTY
    track = _forward_track(t, a, nmax)
    leftover = EMPTY
    for orig, _ in track.alive:
        leftover = leftover.union(orig)
    return track.returns, leftover


def tower_partition(t: PrefixAutomorphism, a: ClopenSet, nmax: int = 64) -> TowerPartition:
    """Partition the saturation of A into towers over the first-return sets.

    For a recurrent section the forward orbit of A already fills its
    saturation; invariance of the filled region is still verified and
    recorded in the certificate.
    """
    track = _forward_track(t, a, nmax)
    leftover = EMPTY
    for orig, _ in track.alive:
        leftover = leftover.union(orig)
    if not leftover.is_empty:
        raise UnrecurrentError(f"unrecurrent within budget: leftover {leftover}")
    towers = []
    for k in sorted(track.returns):
        base = track.returns[k]
        levels = [base]
        for _ in range(k - 1):
            levels.append(image_clopen(t, levels[-1]).image)
        towers.append(Tower(base, k, tuple(levels)))
    sat = track.visited
    cert = verify_tower_partition(t, a, towers, leftover, sat)
    return TowerPartition(t, a, tuple(towers), leftover, sat, cert)


def verify_tower_partition(
    t: PrefixAutomorphism,
    section: ClopenSet,
    towers: Sequence[Tower],
    leftover: ClopenSet,
    saturation: ClopenSet,
) -> dict:
    """Re-check every tower partition invariant by exact clopen computation."""
    all_levels = [lv for tw in towers for lv in tw.levels]
    disjoint = True
    for i in range(len(all_levels)):
        for j in range(i + 1, len(all_levels)):
            if not all_levels[i].is_disjoint(all_levels[j]):
                disjoint = False
    shift_ok = True
    for tw in towers:
        for i in range(tw.height - 1):
            if image_clopen(t, tw.levels[i]).image != tw.levels[i + 1]:
                shift_ok = False
    tops = EMPTY
    bases = EMPTY
    union = leftover
    for tw in towers:
        tops = tops.union(tw.top)
        bases = bases.union(tw.base)
        union = union.union(tw.support())
    tops_to_bases = image_clopen(t, tops).image == bases if towers else True
    invariant = saturation.contains_set(image_clopen(t, saturation).image) and saturation.contains_set(
        image_clopen(t.inverse(), saturation).image
    )
    return {
        "levels_disjoint": disjoint,
        "level_shift": shift_ok,
        "tops_to_bases": tops_to_bases,
        "union_is_saturation": union == saturation,
        "saturation_invariant": invariant,
        "bases_equal_section": bases == section if towers else section.is_empty,
        "heights": tuple(tw.height for tw in towers),
    }


# ---------------------------------------------------------------------------
# markers


@dataclass(frozen=True)
class MarkerSequence:
    sets: tuple[ClopenSet, ...]
    reports: tuple[dict, ...]


def _disjoint_up_to(t: PrefixAutomorphism, a: ClopenSet, n: int) -> bool:
    cur = a
    for _ in range(n):
        cur = image_clopen(t, cur).image
        if not cur.is_disjoint(a):
            return False
    return True


def marker_candidates(
    t: PrefixAutomorphism,
    n: int,
    root: str = "",
    max_extra_depth: int = 18,
    nmax: int = 4096,
    check_complete: bool = True,
) -> Iterator[tuple[ClopenSet, Optional[_Track]]]:
    """Cylinders inside [root] disjoint from their own first n images,
    enumerated by depth then lexicographically.

    With ``check_complete`` the forward track is run and only complete
    recurrent sections are yielded (together with their track); otherwise
    the caller does its own completeness verification.
    """
    for extra in range(max_extra_depth + 1):
        for i in range(2**extra):
            w = root + format(i, f"0{extra}b") if extra else root
            a = ClopenSet.cylinder(w)
            if not _disjoint_up_to(t, a, n):
                continue
            if not check_complete:
                yield a, None
                continue
            track = _forward_track(t, a, nmax)
            if track.alive:
                continue
            if not track.visited.is_full:
                continue
            yield a, track


def markers(t: PrefixAutomorphism, n_count: int, nmax: int = 4096) -> MarkerSequence:
    """A nested family A_1, ..., A_N of marker sections.

    A_n is the first cylinder (by depth, then lexicographic order) inside
    A_{n-1} that is a complete section disjoint from its first n images, so
    every return time exceeds n.  All listed properties are verified
    exactly and included in the per-level report.
    """
    if t.aperiodic_reason is None:
        raise NotCertifiedAperiodic("not aperiodic (no certificate)")
    sets: list[ClopenSet] = []
    reports: list[dict] = []
    root = ""
    for n in range(1, n_count + 1):
        found = None
        for cand, track in marker_candidates(t, n, root, nmax=nmax):
            found = cand
            break
        if found is None:
            raise BudgetExceeded(f"cannot certify markers within budget at level {n}")
        root = found.words[0]
        from .automorphism import saturation_clopen

        comp_sat, _ = saturation_clopen(t, found.complement())
        reports.append(
            {
                "n": n,
                "set": found.words,
                "nested": not sets or sets[-1].contains_set(found),
                "disjoint_images_up_to": n,
                "complete_section": track.visited.is_full,
                "complement_complete_section": comp_sat.is_full,
                "all_points_recurrent": not track.alive,
                "return_times": tuple(sorted(track.returns)),
                "bases_nonempty_clopen": all(not c.is_empty for c in track.returns.values()),
            }
        )
        sets.append(found)
    return MarkerSequence(tuple(sets), tuple(reports))


# ---------------------------------------------------------------------------
# the tall-towers lemma


def bad_levels(tp: TowerPartition, n: int, m: int) -> ClopenSet:
    """The first n and last m levels of every tower."""
    out = EMPTY
    for tw in tp.towers:
        for i in range(n):
            out = out.union(tw.levels[i])
        for i in range(1, m + 1):
            out = out.union(tw.levels[tw.height - i])
    return out


def rokhlin(
    t: PrefixAutomorphism,
    measures: Sequence[MeasureSpec],
    eps: Fraction,
    n: int,
    m: int,
    nmax: int = 4096,
) -> tuple[TowerPartition, dict]:
    """Tower partition of the whole space with heights above n+m and the
    first n plus last m levels of mass below eps for every listed measure.

    The section is drawn from the marker search, deepened until the exact
    boundary mass drops under eps simultaneously for all measures.  Because
    all returns exceed n+m, the boundary equals the first n forward and
    first m backward images of the section, which gives a cheap exact
    prescreen; the final report recomputes the mass from the tower levels
    independently.
    """
    eps = Fraction(eps)
    if t.aperiodic_reason is None:
        raise NotCertifiedAperiodic("cannot certify aperiodicity")
    if eps <= 0:
        raise CantorError("eps must be positive")
    if n < 2 or m < 2:
        raise CantorError("n and m must be at least 2")
    for mu in measures:
        if not mu.is_continuous:
            raise CantorError("measure not continuous; apply reduce_to_continuous first")
    inv = t.inverse()
    for cand, _ in marker_candidates(t, n + m, nmax=nmax, check_complete=False):
        quick = EMPTY
        cur = cand
        for _ in range(n):
            quick = quick.union(cur)
            cur = image_clopen(t, cur).image
        cur = cand
        for _ in range(m):
            cur = image_clopen(inv, cur).image
            quick = quick.union(cur)
        if any(measure(mu, quick) >= eps for mu in measures):
            continue
        tp = tower_partition(t, cand, nmax)
        if not tp.saturation.is_full:
            continue
        bad = bad_levels(tp, n, m)
        masses = [measure(mu, bad) for mu in measures]
        if all(mass < eps for mass in masses):
            report = {
                "section": cand.words,
                "heights": tuple(tw.height for tw in tp.towers),
                "heights_exceed": n + m,
                "heights_ok": all(tw.height > n + m for tw in tp.towers),
                "bad_levels": bad.words,
                "bad_measures": tuple(masses),
                "eps": eps,
            }
            return tp, report
    raise BudgetExceeded("no marker section reached the requested boundary mass")


# ---------------------------------------------------------------------------
# fibered towers (column view, used by the rewiring constructions)


@dataclass(frozen=True)
class FiberedTower:
    """A tower whose levels are tracked word by word along each base fiber.

    column[i] lists the words of fiber i level by level; the map from base
    to any level is the tail-preserving prefix transport between the
    corresponding words.
    """

    height: int
    columns: tuple[tuple[str, ...], ...]

    def base_words(self) -> tuple[str, ...]:
        return tuple(col[0] for col in self.columns)

    def level_words(self, i: int) -> tuple[str, ...]:
        return tuple(col[i] for col in self.columns)

    def top_words(self) -> tuple[str, ...]:
        return tuple(col[-1] for col in self.columns)


def fibered_tower(
    t: PrefixAutomorphism, base: ClopenSet, height: int, max_word_len: int = 96
) -> FiberedTower:
    """Column view of the tower of the given height over a clopen base.

    Fibers split whenever an intermediate image straddles rule domains; the
    split extends every level of the fiber by the same digit, which is
    sound because all level maps preserve tails.
    """
    cols: list[list[str]] = [[w] for w in base.words]
    for _ in range(height - 1):
        out: list[list[str]] = []
        stack = cols
        while stack:
            col = stack.pop()
            img = substitute_word(t, col[-1])
            if img is None:
                if len(col[-1]) >= max_word_len:
                    raise BudgetExceeded(f"fiber {col[0]} exceeded word budget")
                stack.append([w + "0" for w in col])
                stack.append([w + "1" for w in col])
            else:
                out.append(col + [img])
        cols = out
    cols.sort(key=lambda c: c[0])
    return FiberedTower(height, tuple(tuple(c) for c in cols))
