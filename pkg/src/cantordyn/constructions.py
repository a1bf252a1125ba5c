"""Constructive approximation and conjugation of Cantor-space automorphisms.

The central device is rewiring: partition a tower base into a Z-indexed
family of slices (appending the complete code 1^j 0 to each base word),
keep the original map below the top level, and send the top of slice m to
the base of slice m+1 by prefix transport.  With the slice enumerations
used here the successor map is uniform enough that the infinitely many
transports collapse to two scheme rules and one literal per fiber, so the
rewired map stays inside the finite rule class.  Orbits then advance
monotonically through the slice index, which makes the result aperiodic
and gives a canonical section: the bases of the 0th slices.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Sequence

from .cantor import (
    EMPTY,
    FULL,
    CantorError,
    CantorPoint,
    ClopenSet,
    MeasureSpec,
    dyadic_chunk,
    measure,
)
from .automorphism import (
    BudgetExceeded,
    Literal,
    MapError,
    PrefixAutomorphism,
    Rule,
    Scheme,
    _apply_rules,
    compose,
    identity,
    image_clopen,
    invert,
    periodic_decomposition,
    restrict_rules,
    saturation_clopen,
    scheme_automorphism,
    validate_automorphism,
)
from .topology import UniformNbhdSpec, UniformVerdict, WeakNbhdSpec, in_uniform_nbhd
from .towers import (
    FiberedTower,
    NotCertifiedAperiodic,
    TowerPartition,
    fibered_tower,
    first_return,
    marker_candidates,
    markers,
    poincare_split,
    rokhlin,
    tower_partition,
)


class ConstructionError(CantorError):
    pass


SLICINGS = ("even-up", "odd-up")


def _slice_code(slicing: str, m: int) -> int:
    """Number of leading 1s in the code word of slice m."""
    if slicing == "even-up":
        return 2 * m if m >= 0 else 2 * (-m) - 1
    if slicing == "odd-up":
        return 2 * m + 1 if m >= 0 else 2 * (-m) - 2
    raise ConstructionError(f"unknown slicing {slicing!r}")


def slice_word(base: str, slicing: str, m: int) -> str:
    return base + "1" * _slice_code(slicing, m) + "0"


def _rewire_pair(top: str, base: str, slicing: str) -> list[Rule]:
    """Transport rules sending slice m of [top] onto slice m+1 of [base]."""
    if slicing == "even-up":
        return [
            Scheme(top, "11", "0", base + "11", "11", "0"),
            Literal(top + "10", base + "0"),
            Scheme(top + "111", "11", "0", base + "1", "11", "0"),
        ]
    return [
        Scheme(top + "1", "11", "0", base + "111", "11", "0"),
        Literal(top + "0", base + "10"),
        Scheme(top + "11", "11", "0", base, "11", "0"),
    ]


@dataclass(frozen=True)
class ChainTrace:
    """One rewired tower: fiber columns, slicing, and its section pieces."""

    height: int
    columns: tuple[tuple[str, ...], ...]
    slicing: str
    section_words: tuple[str, ...]

    def base_words(self) -> tuple[str, ...]:
        return tuple(col[0] for col in self.columns)

    def top_words(self) -> tuple[str, ...]:
        return tuple(col[-1] for col in self.columns)


@dataclass(frozen=True)
class SmoothTrace:
    refinement: tuple[ClopenSet, ...]
    chain_blocks: tuple[tuple[ClopenSet, ClopenSet], ...]  # (B_l, saturation)
    wandering: tuple[ClopenSet, ...]
    recurrent: tuple[ClopenSet, ...]
    chains: tuple[ChainTrace, ...]
    section: ClopenSet
    slicing: str
    rewired_tops: ClopenSet
    spliced_pairs: int


def _chain_rules(ft: FiberedTower, slicing: str) -> tuple[list[Rule], list[tuple[CantorPoint, CantorPoint]], list[str]]:
    """Rewiring of one fibered tower: keep the map below the top, transport
    top slices to next base slices, record section pieces and lost points."""
    rules: list[Rule] = []
    exceptional: list[tuple[CantorPoint, CantorPoint]] = []
    section: list[str] = []
    for col in ft.columns:
        for i in range(ft.height - 1):
            rules.append(Literal(col[i], col[i + 1]))
    tops = sorted(ft.top_words())
    bases = sorted(ft.base_words())
    for top, base in zip(tops, bases):
        rules.extend(_rewire_pair(top, base, slicing))
        exceptional.append((CantorPoint(top, "1"), CantorPoint(base, "1")))
    for base in bases:
        section.append(slice_word(base, slicing, 0))
    return rules, exceptional, section


def _inherit_exceptional(
    t: PrefixAutomorphism,
    rules: Sequence[Rule],
    region: ClopenSet,
) -> list[tuple[CantorPoint, CantorPoint]]:
    out = []
    for a, b in t.exceptional:
        if region.contains_point(a) and _apply_rules(tuple(rules), a) is None:
            out.append((a, b))
    return out


def _orbit_step(rules, exc: dict, p: CantorPoint) -> Optional[CantorPoint]:
    if p in exc:
        return exc[p]
    return _apply_rules(rules, p)


def _splice_cycles(
    rules: tuple[Rule, ...],
    exceptional: Sequence[tuple[CantorPoint, CantorPoint]],
    budget: int = 128,
) -> tuple[tuple[tuple[CantorPoint, CantorPoint], ...], int]:
    """Break finite cycles running through exceptional pairs.

    A cycle is cut open and grafted into the orbit of a donor point z:
    z -> cycle start, cycle end -> old image of z.  The donor is a
    rule-covered point whose orbit shows no short recurrence, so the
    grafted orbit is infinite and the map stays a bijection.
    """
    exc = {a: b for a, b in exceptional}
    spliced = 0
    for start in sorted(list(exc), key=str):
        if start not in exc:
            continue
        seen = [start]
        cur = _orbit_step(rules, exc, start)
        is_cycle = False
        while cur is not None and len(seen) <= budget:
            if cur == start:
                is_cycle = True
                break
            if cur in seen:
                break
            seen.append(cur)
            cur = _orbit_step(rules, exc, cur)
        if not is_cycle:
            continue
        last = seen[-1]
        donor = _find_donor(rules, exc, set(seen), budget)
        if donor is None:
            raise ConstructionError("no donor orbit found to break an exceptional cycle")
        donor_img = _apply_rules(rules, donor)
        exc[donor] = start
        exc[last] = donor_img
        spliced += 1
    return tuple(sorted(exc.items(), key=lambda ab: str(ab[0]))), spliced


def _orbit_clear(rules, exc: dict, z: CantorPoint, cycle: set, budget: int) -> bool:
    """No short recurrence of z and no contact with the cycle, both ways."""
    inv_rules = tuple(r.inverted() for r in rules)
    inv_exc = {b: a for a, b in exc.items()}
    for step_rules, step_exc in ((rules, exc), (inv_rules, inv_exc)):
        cur = z
        for _ in range(budget):
            cur = _orbit_step(step_rules, step_exc, cur)
            if cur is None:
                break
            if cur == z or cur in cycle:
                return False
    return True


def _find_donor(rules, exc: dict, cycle: set, budget: int) -> Optional[CantorPoint]:
    candidates = []
    for r in rules:
        if isinstance(r, Literal) and r.u:
            candidates.append(CantorPoint(r.u, "0"))
        elif isinstance(r, Scheme):
            candidates.append(CantorPoint(r.pattern(0), "0"))
    for z in sorted(set(candidates), key=str):
        if z in cycle or z in exc or any(b == z for b in exc.values()):
            continue
        if _apply_rules(rules, z) is None:
            continue
        if _orbit_clear(rules, exc, z, cycle, budget):
            return z
    return None


def _check_partition(partition: Sequence[ClopenSet]) -> tuple[ClopenSet, ...]:
    cells = tuple(partition)
    if not cells:
        raise ConstructionError("partition invalid: empty")
    union = EMPTY
    for i, c in enumerate(cells):
        if c.is_empty:
            raise ConstructionError("partition invalid: empty cell")
        for d in cells[i + 1 :]:
            if not c.is_disjoint(d):
                raise ConstructionError("partition invalid: cells overlap")
        union = union.union(c)
    if not union.is_full:
        raise ConstructionError("partition invalid: does not cover the space")
    return cells


def smooth_approx_aperiodic(
    t: PrefixAutomorphism,
    partition: Sequence[ClopenSet],
    slicing: str = "even-up",
    nmax: int = 256,
) -> tuple[PrefixAutomorphism, SmoothTrace]:
    """An aperiodic smooth automorphism with the same images on the partition.

    The partition is refined against the images of its own cells so that
    tower tops stay inside a single cell per block; wandering parts keep
    the original map, recurrent parts are split into first-return towers
    whose tops are rewired along Z-indexed base slices.  The result equals
    the input off the rewired tops and admits a clopen section meeting
    every orbit exactly once (off the countable exceptional set).
    """
    if t.aperiodic_reason is None:
        raise NotCertifiedAperiodic("T not certified aperiodic")
    if slicing not in SLICINGS:
        raise ConstructionError(f"unknown slicing {slicing!r}")
    cells = _check_partition(partition)
    refinement = []
    for fi in cells:
        img_cells = [image_clopen(t, fj).image for fj in cells]
        for img in img_cells:
            v = fi.intersect(img)
            if not v.is_empty:
                refinement.append(v)
    blocks: list[tuple[ClopenSet, ClopenSet]] = []
    sat_acc = EMPTY
    for v in refinement:
        b = v.diff(sat_acc)
        if b.is_empty:
            continue
        sat_b, _ = saturation_clopen(t, b)
        blocks.append((b, sat_b))
        sat_acc = sat_acc.union(sat_b)
    if not sat_acc.is_full:
        raise ConstructionError("chain blocks do not exhaust the space")

    rules: list[Rule] = []
    exceptional: list[tuple[CantorPoint, CantorPoint]] = []
    chains: list[ChainTrace] = []
    wandering_parts: list[ClopenSet] = []
    recurrent_parts: list[ClopenSet] = []
    section_words: list[str] = []
    rewired_tops = EMPTY
    for b, _sat_b in blocks:
        w, r, undecided = poincare_split(t, b, budget=nmax)
        if not undecided.is_empty:
            raise ConstructionError(f"recurrence undecided on {undecided}; refusing to rewire")
        d = r
        if not w.is_empty:
            sat_w, _ = saturation_clopen(t, w)
            d = r.diff(sat_w)
            rules.extend(restrict_rules(t, sat_w))
            exceptional.extend(_inherit_exceptional(t, rules, sat_w))
            section_words.extend(w.words)
        wandering_parts.append(w)
        recurrent_parts.append(d)
        if d.is_empty:
            continue
        cks, leftover = first_return(t, d, nmax)
        if not leftover.is_empty:
            raise ConstructionError(f"unrecurrent within budget on {leftover}")
        for k in sorted(cks):
            ft = fibered_tower(t, cks[k], k)
            chain_rules, chain_exc, chain_section = _chain_rules(ft, slicing)
            rules.extend(chain_rules)
            exceptional.extend(chain_exc)
            section_words.extend(chain_section)
            chains.append(ChainTrace(k, ft.columns, slicing, tuple(chain_section)))
            for top in ft.top_words():
                rewired_tops = rewired_tops.union(ClopenSet.cylinder(top))
    exc, spliced = _splice_cycles(tuple(rules), exceptional)
    s = scheme_automorphism(
        rules,
        exc,
        name=f"smooth({t.name or '?'})",
        aperiodic_reason="rewired slice chains: orbits advance monotonically through the slice index",
    )
    trace = SmoothTrace(
        tuple(refinement),
        tuple(blocks),
        tuple(wandering_parts),
        tuple(recurrent_parts),
        tuple(chains),
        ClopenSet.from_words(section_words),
        slicing,
        rewired_tops,
        spliced,
    )
    return s, trace


def _purify_columns(ft: FiberedTower, cells: Sequence[ClopenSet], max_len: int = 64) -> FiberedTower:
    """Split fibers until every level word lies inside one partition cell."""
    cellwords = [w for c in cells for w in c.words]
    out: list[list[str]] = []
    stack = [list(c) for c in ft.columns]
    while stack:
        col = stack.pop()
        if all(any(w.startswith(cw) for cw in cellwords) for w in col):
            out.append(col)
            continue
        if len(col[0]) >= max_len:
            raise BudgetExceeded("fiber purification exceeded word budget")
        stack.append([w + "0" for w in col])
        stack.append([w + "1" for w in col])
    out.sort(key=lambda c: c[0])
    return FiberedTower(ft.height, tuple(tuple(c) for c in out))


def smooth_approx_periodic(
    p: PrefixAutomorphism,
    partition: Sequence[ClopenSet],
    slicing: str = "even-up",
    depth: int = 6,
    period_bound: int = 16,
) -> tuple[PrefixAutomorphism, SmoothTrace]:
    """An aperiodic smooth automorphism weakly indistinguishable from a
    periodic one.

    Each periodic tower is refined until its levels are pure for the
    partition, then sliced and rewired; because every slice stays inside
    its own tower, images of partition cells are unchanged modulo a
    countable set while all orbits become infinite.
    """
    if slicing not in SLICINGS:
        raise ConstructionError(f"unknown slicing {slicing!r}")
    cells = _check_partition(partition)
    pd = periodic_decomposition(p, depth=depth, period_bound=period_bound)
    if not pd.is_periodic:
        raise ConstructionError("P not periodic (or not decided within bounds)")
    rules: list[Rule] = []
    exceptional: list[tuple[CantorPoint, CantorPoint]] = []
    chains: list[ChainTrace] = []
    section_words: list[str] = []
    rewired_tops = EMPTY
    for ot in pd.orbits:
        ft = FiberedTower(ot.height, (ot.column,))
        ft = _purify_columns(ft, cells)
        chain_rules, chain_exc, chain_section = _chain_rules(ft, slicing)
        rules.extend(chain_rules)
        exceptional.extend(chain_exc)
        section_words.extend(chain_section)
        chains.append(ChainTrace(ot.height, ft.columns, slicing, tuple(chain_section)))
        for top in ft.top_words():
            rewired_tops = rewired_tops.union(ClopenSet.cylinder(top))
    exc, spliced = _splice_cycles(tuple(rules), exceptional)
    s = scheme_automorphism(
        rules,
        exc,
        name=f"smooth({p.name or 'periodic'})",
        aperiodic_reason="rewired slice chains: orbits advance monotonically through the slice index",
    )
    trace = SmoothTrace(
        cells,
        (),
        (),
        (),
        tuple(chains),
        ClopenSet.from_words(section_words),
        slicing,
        rewired_tops,
        spliced,
    )
    return s, trace


def orbit_section_count(
    s: PrefixAutomorphism, x: CantorPoint, section: ClopenSet, steps: int
) -> int:
    """How often the orbit segment s^k(x), |k| <= steps, meets the section."""
    count = 1 if section.contains_point(x) else 0
    cur = x
    for _ in range(steps):
        cur = s.apply(cur)
        if section.contains_point(cur):
            count += 1
    cur = x
    inv = s.inverse()
    for _ in range(steps):
        cur = inv.apply(cur)
        if section.contains_point(cur):
            count += 1
    return count


# ---------------------------------------------------------------------------
# paths


def path_periodic(p: PrefixAutomorphism, t_param: Fraction, depth: int = 6, period_bound: int = 16) -> PrefixAutomorphism:
    """The path from the identity to a periodic automorphism at dyadic time.

    At time t the map acts as P on the towers grown over the initial
    t-chunk of every tower base and as the identity elsewhere; time 0 gives
    the identity and time 1 the full map.
    """
    t_param = Fraction(t_param)
    pd = periodic_decomposition(p, depth=depth, period_bound=period_bound)
    if not pd.is_periodic:
        raise ConstructionError("P not periodic")
    if t_param == 0:
        return identity()
    if t_param == 1:
        return p
    active = EMPTY
    rules: list[Rule] = []
    for k, (_xk, base) in sorted(pd.parts.items()):
        psi = dyadic_chunk(base, t_param)
        if psi.is_empty:
            continue
        level = psi
        for _ in range(k):
            active = active.union(level)
            rules.extend(restrict_rules(p, level))
            level = image_clopen(p, level).image
    for w in active.complement().words:
        rules.append(Literal(w, w))
    return scheme_automorphism(rules, name=f"path({p.name or 'P'};{t_param})")


@dataclass(frozen=True)
class PathSpec:
    """Dyadic-time evaluator for the section family of an aperiodic path.

    The grid is t_n = 1 - 2^-n; between grid points the marker section A_n
    loses the strip of F_n = A_n minus A_{n+1} cut out by the binary chunk
    map, so every dyadic time yields an exact clopen section.
    """

    automorphism: PrefixAutomorphism
    marker_sets: tuple[ClopenSet, ...]  # A_0 = X first

    def grid_point(self, n: int) -> Fraction:
        return 1 - Fraction(1, 2**n)

    def level_of(self, t_param: Fraction) -> int:
        if not 0 <= t_param < 1:
            raise ConstructionError("time must lie in [0,1)")
        n = 0
        while t_param >= self.grid_point(n + 1):
            n += 1
        return n

    def phi(self, t_param: Fraction) -> ClopenSet:
        t_param = Fraction(t_param)
        if t_param == 1:
            return EMPTY
        n = self.level_of(t_param)
        a_n = self.marker_sets[n]
        a_next = self.marker_sets[n + 1]
        rel = (t_param - self.grid_point(n)) / (self.grid_point(n + 1) - self.grid_point(n))
        strip = a_n.diff(a_next)
        if strip.is_empty or rel == 0:
            return a_n
        return a_n.diff(dyadic_chunk(strip, rel))


def make_path_spec(t: PrefixAutomorphism, max_level: int = 8) -> PathSpec:
    ms = markers(t, max_level + 1)
    return PathSpec(t, (FULL,) + ms.sets)


def path_aperiodic(
    t: PrefixAutomorphism,
    t_param: Fraction,
    spec: Optional[PathSpec] = None,
    nmax: int = 512,
) -> tuple[PrefixAutomorphism, dict]:
    """The path from the identity to an aperiodic automorphism at dyadic time.

    For t < 1 the first-return towers over the section phi(t) are closed
    into cycles: the map follows t below the tops and jumps from each tower
    top back to its own base fiber, so the result is periodic with periods
    equal to the tower heights.  Time 0 gives the identity, time 1 the map
    itself.
    """
    t_param = Fraction(t_param)
    if t_param.denominator & (t_param.denominator - 1):
        raise ConstructionError("t not dyadic")
    if t.aperiodic_reason is None:
        raise NotCertifiedAperiodic("T not certified aperiodic")
    if t_param == 1:
        return t, {"t": t_param, "phi": EMPTY.words, "heights": ()}
    if spec is None:
        spec = make_path_spec(t, max_level=max(2, spec_level_needed(t_param)))
    phi = spec.phi(t_param)
    cks, leftover = first_return(t, phi, nmax)
    if not leftover.is_empty:
        raise ConstructionError(f"section not recurrent within budget: {leftover}")
    rules: list[Rule] = []
    heights = []
    phi_levels: dict[int, tuple[str, ...]] = {}
    for k in sorted(cks):
        ft = fibered_tower(t, cks[k], k)
        heights.append(k)
        phi_levels[k] = cks[k].words
        for col in ft.columns:
            for i in range(k - 1):
                rules.append(Literal(col[i], col[i + 1]))
            rules.append(Literal(col[-1], col[0]))
    p_t = scheme_automorphism(rules, name=f"path({t.name or 'T'};{t_param})")
    trace = {
        "t": t_param,
        "phi": phi.words,
        "heights": tuple(heights),
        "bases": {k: v for k, v in phi_levels.items()},
    }
    return p_t, trace


def spec_level_needed(t_param: Fraction) -> int:
    n = 0
    while Fraction(t_param) >= 1 - Fraction(1, 2 ** (n + 1)):
        n += 1
    return n + 2


def path_difference_bound(
    t: PrefixAutomorphism, trace_a: dict, trace_b: dict, nmax: int = 512
) -> ClopenSet:
    """Union over n of the towers grown over the symmetric differences of
    the return bases of two path sections; contains where the paths differ."""
    keys = set(trace_a["bases"]) | set(trace_b["bases"])
    out = EMPTY
    for k in keys:
        sa = ClopenSet.from_words(trace_a["bases"].get(k, ()))
        sb = ClopenSet.from_words(trace_b["bases"].get(k, ()))
        sym = sa.diff(sb).union(sb.diff(sa))
        level = sym
        for _ in range(k):
            out = out.union(level)
            level = image_clopen(t, level).image
    return out


# ---------------------------------------------------------------------------
# conjugation


@dataclass(frozen=True)
class ConjugationTrace:
    rokhlin_report: dict
    tower_count: int
    r_heights: tuple[int, ...]
    s_section: ClopenSet
    base_transports: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...]
    verification_depth: int
    verdict: UniformVerdict


def _pair_fibers(fa: FiberedTower, fb: FiberedTower) -> tuple[FiberedTower, FiberedTower]:
    """Refine fibers until the two towers have equally many, so columns can
    be matched one to one."""
    ca = [list(c) for c in fa.columns]
    cb = [list(c) for c in fb.columns]
    while len(ca) != len(cb):
        small = ca if len(ca) < len(cb) else cb
        col = small.pop(0)
        small.append([w + "0" for w in col])
        small.append([w + "1" for w in col])
        small.sort(key=lambda c: c[0])
    fa2 = FiberedTower(fa.height, tuple(tuple(c) for c in sorted(ca, key=lambda c: c[0])))
    fb2 = FiberedTower(fb.height, tuple(tuple(c) for c in sorted(cb, key=lambda c: c[0])))
    return fa2, fb2


def conjugate_into(
    s: PrefixAutomorphism,
    r: PrefixAutomorphism,
    u: UniformNbhdSpec,
    nmax: int = 4096,
) -> tuple[PrefixAutomorphism, ConjugationTrace]:
    """A conjugator T with T^-1 S T inside the uniform neighborhood of R.

    R is partitioned into towers with boundary mass below half the radius;
    a matching family of S-towers with the same heights is found over a
    marker section of S, and T transports tower to tower, level by level.
    The conjugated map then agrees with R outside the boundary levels, and
    the membership verdict is recomputed independently and returned.
    """
    if s.aperiodic_reason is None or r.aperiodic_reason is None:
        raise NotCertifiedAperiodic("not aperiodic")
    if u.center is not r:
        raise ConstructionError("neighborhood center must be R")
    for mu in u.measures:
        if not mu.is_continuous:
            raise ConstructionError("measures must be continuous; apply reduce_to_continuous")
    tp, rep = rokhlin(r, u.measures, u.epsilon / 2, 2, 2, nmax=nmax)
    r_heights = tuple(tw.height for tw in tp.towers)
    matched = None
    for cand, _ in marker_candidates(s, max(r_heights), nmax=nmax, check_complete=False):
        try:
            sp = tower_partition(s, cand, nmax)
        except CantorError:
            continue
        if not sp.saturation.is_full:
            continue
        s_heights = tuple(tw.height for tw in sp.towers)
        if sorted(s_heights) == sorted(r_heights):
            matched = sp
            break
    if matched is None:
        raise ConstructionError("cannot match S-towers within budget")
    r_towers = sorted(tp.towers, key=lambda tw: tw.height)
    s_towers = sorted(matched.towers, key=lambda tw: tw.height)
    rules: list[Rule] = []
    transports = []
    for rt, st in zip(r_towers, s_towers):
        fr_ = fibered_tower(r, rt.base, rt.height)
        fs_ = fibered_tower(s, st.base, st.height)
        fr_, fs_ = _pair_fibers(fr_, fs_)
        transports.append((fr_.base_words(), fs_.base_words()))
        for col_r, col_s in zip(fr_.columns, fs_.columns):
            for i in range(rt.height):
                rules.append(Literal(col_r[i], col_s[i]))
    conj = scheme_automorphism(rules, name=f"conj-transport({s.name or 'S'})")
    conjugated = compose(invert(conj), compose(s, conj))
    depth = max(conj.complexity, s.complexity, r.complexity) + 4
    verdict = in_uniform_nbhd(conjugated, u, depth)
    if verdict.kind != "in":
        raise ConstructionError(f"conjugation verification failed: {verdict}")
    trace = ConjugationTrace(
        rep,
        len(r_towers),
        r_heights,
        matched.section,
        tuple(transports),
        depth,
        verdict,
    )
    return conj, trace


def conjugate_smooth_pair(
    s1: PrefixAutomorphism,
    trace1: SmoothTrace,
    s2: PrefixAutomorphism,
    trace2: SmoothTrace,
) -> PrefixAutomorphism:
    """A conjugator T with T^-1 S1 T equal to S2 modulo a countable set.

    Both inputs must carry the slice-chain structure; chains are matched in
    order, fibers one to one, and cells transported slice by slice.  The
    slice enumerations may differ (both families advance by two 1s per
    step, so the transports stay within the rule class); chains of unequal
    shape are rejected.
    """
    if trace1 is None or trace2 is None:
        raise ConstructionError("missing smooth certificate")
    if any(not w.is_empty for w in trace1.wandering) or any(not w.is_empty for w in trace2.wandering):
        raise ConstructionError("cannot align chains with wandering parts")
    if len(trace1.chains) != len(trace2.chains):
        raise ConstructionError("cannot align chains: different chain counts")
    rules: list[Rule] = []
    exceptional: list[tuple[CantorPoint, CantorPoint]] = []
    m_lo, m_hi = -2, 2
    for ch1, ch2 in zip(trace1.chains, trace2.chains):
        if ch1.height != ch2.height or len(ch1.columns) != len(ch2.columns):
            raise ConstructionError("cannot align chains: different shapes")
        for col1, col2 in zip(ch1.columns, ch2.columns):
            for lvl in range(ch1.height):
                w1, w2 = col1[lvl], col2[lvl]
                for m in range(m_lo, m_hi):
                    rules.append(Literal(slice_word(w2, ch2.slicing, m), slice_word(w1, ch1.slicing, m)))
                up2 = w2 + "1" * _slice_code(ch2.slicing, m_hi)
                up1 = w1 + "1" * _slice_code(ch1.slicing, m_hi)
                rules.append(Scheme(up2, "11", "0", up1, "11", "0"))
                dn2 = w2 + "1" * _slice_code(ch2.slicing, m_lo)
                dn1 = w1 + "1" * _slice_code(ch1.slicing, m_lo)
                rules.append(Scheme(dn2, "11", "0", dn1, "11", "0"))
                exceptional.append((CantorPoint(w2, "1"), CantorPoint(w1, "1")))
    return scheme_automorphism(rules, exceptional, name="chain-transport")


# ---------------------------------------------------------------------------
# witness generators


def strict_shrink(t: PrefixAutomorphism, max_depth: int = 8) -> tuple[ClopenSet, ClopenSet]:
    """A clopen set mapped strictly inside itself, certifying that the weak
    neighborhood it defines contains no periodic automorphism."""
    for depth in range(1, max_depth + 1):
        for i in range(2**depth):
            w = format(i, f"0{depth}b")
            f = ClopenSet.cylinder(w)
            try:
                img = image_clopen(t, f).image
            except CantorError:
                continue
            if f.contains_set(img) and img != f:
                return f, img
    raise ConstructionError("no strictly shrinking clopen found within depth")


def aperiodic_in_weak_nbhd(
    p: PrefixAutomorphism, partition: Sequence[ClopenSet]
) -> tuple[PrefixAutomorphism, SmoothTrace]:
    """An aperiodic automorphism inside the weak neighborhood of a periodic one."""
    return smooth_approx_periodic(p, partition)


def dirac_obstruction(
    p: PrefixAutomorphism,
    tests: Sequence[tuple[str, PrefixAutomorphism]] = (),
    depth: int = 6,
) -> dict:
    """The two Dirac measures pinning an involution's swap pair.

    Membership in the radius-1/2 neighborhood forces a candidate to swap
    the two points exactly; each test automorphism's verdict is evaluated
    and returned.
    """
    from .topology import equal_mod_ctbl

    if equal_mod_ctbl(compose(p, p), identity()).kind != "equal":
        raise ConstructionError("input is not an involution")
    x0 = None
    for word in ("", "0", "1", "00", "01", "10", "11"):
        for cyc in ("0", "1"):
            cand = CantorPoint(word, cyc)
            if p.apply(cand) != cand:
                x0 = cand
                break
        if x0 is not None:
            break
    if x0 is None:
        raise ConstructionError("could not find a moved point")
    y0 = p.apply(x0)
    u = UniformNbhdSpec(p, (MeasureSpec.dirac(x0), MeasureSpec.dirac(y0)), Fraction(1, 2))
    results = {}
    for name, auto in tests:
        verdict = in_uniform_nbhd(auto, u, depth)
        results[name] = verdict.kind
    return {
        "x0": x0,
        "y0": y0,
        "epsilon": Fraction(1, 2),
        "criterion": "member iff it sends x0 to y0 and y0 to x0",
        "tests": results,
    }
