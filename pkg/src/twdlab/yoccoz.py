"""Combinatorial Yoccoz puzzles for quadratic polynomials.

Input is the invariant cycle of co-landing external angles at the alpha
fixed point.  Depth l+1 rays are the preimages under doubling of depth l
rays; the two preimage classes of each class are chosen by exhaustive
search subject to disjointness, unlinkedness and fixing the seed cycle.
All angle arithmetic is exact.
"""

from __future__ import annotations

import itertools
from bisect import bisect_right
from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction

from .errors import (
    AmbiguousPullback,
    InconsistentImage,
    InvalidSeed,
    NonUniqueCritical,
    NoValidGrouping,
)
from .puzzle import AbstractPuzzle, PuzzlePiece
from .twd import End

HALF = Fraction(1, 2)

AngleClass = tuple  # sorted tuple of Fractions in [0, 1)


def double(t: Fraction) -> Fraction:
    return (2 * t) % 1


def _cls(angles) -> AngleClass:
    return tuple(sorted(Fraction(a) % 1 for a in angles))


def unlinked(a: AngleClass, b: AngleClass) -> bool:
    """True if the chords of ``b`` avoid those of ``a``: b sits in one gap of a."""
    gaps = list(zip(a, a[1:])) + [(a[-1], a[0])]
    return any(all(in_arc((lo, hi), x) for x in b) for lo, hi in gaps)


def in_arc(arc, x) -> bool:
    """x strictly inside the counterclockwise arc from arc[0] to arc[1]."""
    lo, hi = arc
    if lo < hi:
        return lo < x < hi
    return x > lo or x < hi


def _overlap(a, b) -> bool:
    return a[0] == b[0] or in_arc(b, a[0]) or in_arc(a, b[0])


def _midpoint(arc) -> Fraction:
    lo, hi = arc
    return ((lo + hi) / 2) % 1 if lo < hi else ((lo + hi + 1) / 2) % 1


def validate_seed(seed) -> tuple[AngleClass, ...]:
    classes = tuple(_cls(c) for c in seed)
    if not classes:
        raise InvalidSeed("seed is empty")
    angles = [a for c in classes for a in c]
    if any(len(c) < 2 for c in classes):
        raise InvalidSeed("every class needs at least two angles")
    if len(set(angles)) != len(angles):
        raise InvalidSeed("seed classes overlap or repeat an angle")
    images = {_cls(double(a) for a in c) for c in classes}
    if any(len(set(double(a) for a in c)) != len(c) for c in classes) or images != set(classes):
        raise InvalidSeed("doubling does not permute the seed classes")
    for a, b in itertools.combinations(classes, 2):
        if not unlinked(a, b):
            raise InvalidSeed(f"seed classes {_fmt(a)} and {_fmt(b)} are linked")
    return classes


def _fmt(c) -> str:
    return "{" + ", ".join(str(a) for a in c) + "}"


def _groupings(cls: AngleClass):
    """Every split of the 2|C| preimages into two classes mapping onto C."""
    pre = [(t / 2, t / 2 + HALF) for t in cls]
    seen = set()
    for pick in itertools.product((0, 1), repeat=len(cls)):
        g1 = _cls(p[s] for p, s in zip(pre, pick))
        g2 = _cls(p[1 - s] for p, s in zip(pre, pick))
        key = frozenset((g1, g2))
        if key not in seen:
            seen.add(key)
            yield g1, g2


def pullback(classes, seed=None, critical_value: Fraction | None = None) -> tuple[AngleClass, ...]:
    """Classes at depth l+1 from the classes at depth l.

    A grouping is valid when both groups are unlinked from each other and
    from every depth-l class, and a group holding a seed angle is exactly
    that seed class.  If several groupings survive and ``critical_value``
    (an angle in the depth-l piece holding the critical value) is given,
    the groups must sit on opposite sides of the diameter through half of
    it.  Otherwise a tie raises :class:`AmbiguousPullback`.
    """
    classes = tuple(_cls(c) for c in classes)
    seed = validate_seed(seed if seed is not None else _seed_of(classes))
    bad = _crossing(classes)
    if bad is not None:
        raise InvalidSeed(f"class {_fmt(bad)} is linked with another class")
    seed_of_angle = {a: c for c in seed for a in c}
    regions = _Regions(classes)
    preimages: dict[AngleClass, list] = {}
    for d in classes:
        preimages.setdefault(_cls(double(a) for a in d), []).append(d)
    out: list[AngleClass] = []
    for c in classes:
        # a class pulled back one depth earlier keeps its grouping
        known = preimages.get(c, ())
        if sum(len(d) for d in known) == 2 * len(c):
            out.extend(d for d in known if d not in out)
            continue
        valid = []
        for g1, g2 in _groupings(c):
            if not unlinked(g1, g2):
                continue
            if any(a in seed_of_angle and seed_of_angle[a] != g for g in (g1, g2) for a in g):
                continue
            if all(_unlinked_from_all(g, classes, regions) for g in (g1, g2)):
                valid.append((g1, g2))
        if len(valid) > 1 and critical_value is not None:
            valid = [g for g in valid if _split_by_diameter(g, critical_value / 2)]
        if not valid:
            raise NoValidGrouping(c)
        if len(valid) > 1:
            raise AmbiguousPullback(c, valid)
        for g in valid[0]:
            if g not in out:
                out.append(g)
    _check_global(out)
    return tuple(sorted(out))


def _split_by_diameter(groups, t) -> bool:
    side = (t, (t + HALF) % 1)
    sides = [{in_arc(side, a) for a in g} for g in groups]
    return all(len(s) == 1 for s in sides) and sides[0] != sides[1]


def _seed_of(classes):
    # the classes lying on a cycle of the induced map on classes
    image = {c: _cls(double(a) for a in c) for c in classes}
    cyc = []
    for c in classes:
        x = image[c]
        for _ in range(len(classes)):
            if x == c or x not in image:
                break
            x = image[x]
        if x == c:
            cyc.append(c)
    return cyc or classes


def _unlinked_from_all(g, classes, regions) -> bool:
    if g in regions.classes:
        return True
    if regions.angles.isdisjoint(g):
        # fresh angles avoid every chord iff they share one complementary region
        return len({regions.of(a) for a in g}) == 1
    return all(unlinked(g, d) for d in classes if set(g).isdisjoint(d))


def _crossing(classes):
    """A class whose chords cross an earlier one, or None.

    Walking around the circle, a non-crossing family must close each class
    before returning to any class opened earlier.
    """
    owner = {a: i for i, c in enumerate(classes) for a in c}
    left = [len(c) for c in classes]
    opened, stack = set(), []
    for a in sorted(owner):
        i = owner[a]
        if i in opened:
            if stack[-1] != i:
                return classes[i]
        else:
            opened.add(i)
            stack.append(i)
        left[i] -= 1
        if left[i] == 0:
            stack.pop()
    return None


def _check_global(classes):
    angles = [a for c in classes for a in c]
    if len(set(angles)) != len(angles):
        raise NoValidGrouping(classes[0])
    bad = _crossing(classes)
    if bad is not None:
        raise NoValidGrouping(bad)


class _Regions:
    """Complementary regions of a non-crossing family of classes.

    Elementary arc i runs from angle i to angle i+1.  Leaving an arc at its
    end angle, the region continues along the chord back to the previous
    angle of that class, so regions are the cycles of arc -> successor arc.
    """

    def __init__(self, classes):
        self.classes = set(classes)
        self.gamma = sorted({a for c in classes for a in c})
        self.angles = set(self.gamma)
        n = len(self.gamma)
        pos = {a: i for i, a in enumerate(self.gamma)}
        succ = {}
        for c in classes:
            for x, y in zip(c, c[1:] + c[:1]):
                succ[y] = x
        self.region = [-1] * n
        count = 0
        for i in range(n):
            if self.region[i] >= 0:
                continue
            j = i
            while self.region[j] < 0:
                self.region[j] = count
                j = pos[succ[self.gamma[(j + 1) % n]]]
            count += 1
        self.count = count

    def arc_index(self, x) -> int:
        return (bisect_right(self.gamma, x) - 1) % len(self.gamma)

    def of(self, x) -> int:
        return self.region[self.arc_index(x)]

    def arcs(self):
        n = len(self.gamma)
        return [(self.gamma[i], self.gamma[(i + 1) % n]) for i in range(n)]


# ---------------------------------------------------------------------------
# pieces


@dataclass(frozen=True)
class CombPiece:
    id: str
    depth: int
    arcs: tuple  # ((start, end), ...) counterclockwise, open
    critical: bool
    parent: str | None = None

    def contains(self, x: Fraction) -> bool:
        # a piece without arcs is the whole disk
        return not self.arcs or any(in_arc(a, x) for a in self.arcs)


@dataclass(frozen=True)
class CombPuzzleLevel:
    depth: int
    classes: tuple
    pieces: tuple

    @property
    def angles(self) -> tuple:
        return tuple(sorted({a for c in self.classes for a in c}))

    @cached_property
    def _index(self):
        gamma = list(self.angles)
        owner = {}
        for p in self.pieces:
            for arc in p.arcs:
                owner[arc[0]] = p
        return gamma, [owner[a] for a in gamma] if gamma else [self.pieces[0]]

    def piece_with_arc(self, arc) -> CombPiece:
        gamma, owner = self._index
        if not gamma:
            return owner[0]
        return owner[(bisect_right(gamma, _midpoint(arc)) - 1) % len(gamma)]

    @property
    def critical(self) -> CombPiece:
        return next(p for p in self.pieces if p.critical)


def is_critical(arcs) -> bool:
    shifted = [((a + HALF) % 1, (b + HALF) % 1) for a, b in arcs]
    return any(_overlap(a, s) for a in arcs for s in shifted)


def pieces(classes, depth: int, above: CombPuzzleLevel | None = None) -> CombPuzzleLevel:
    """Split the circle minus the angles into pieces.

    Two elementary arcs share a piece when no chord separates them.
    Pieces are numbered by (parent number, critical first, first arc).
    """
    classes = tuple(_cls(c) for c in classes)
    if depth <= 0 or not classes:
        return CombPuzzleLevel(depth, (), (CombPiece(f"P{depth}.0", depth, (), False),))
    regions = _Regions(classes)
    groups: dict[int, list] = {}
    for arc, r in zip(regions.arcs(), regions.region):
        groups.setdefault(r, []).append(arc)
    rank = {p.id: i for i, p in enumerate(above.pieces)} if above is not None else {}
    raw = []
    for arcset in groups.values():
        arcset = tuple(sorted(arcset))
        crit = is_critical(arcset)
        parent_rank, parent = 0, None
        if above is not None:
            found = {above.piece_with_arc(a).id for a in arcset}
            if len(found) != 1:
                raise InconsistentImage(f"arcs of one piece lie in different parents {sorted(found)}")
            parent = found.pop()
            parent_rank = rank[parent]
        raw.append((parent_rank, not crit, arcset[0][0], arcset, crit, parent))
    raw.sort(key=lambda r: r[:3])
    out = tuple(
        CombPiece(f"P{depth}.{i}", depth, arcset, crit, parent)
        for i, (_, _, _, arcset, crit, parent) in enumerate(raw)
    )
    expected = 1 + sum(len(c) - 1 for c in classes)
    if len(out) != expected:
        raise InconsistentImage(f"depth {depth}: {len(out)} pieces, face count predicts {expected}")
    n_crit = sum(p.critical for p in out)
    if n_crit != 1:
        raise NonUniqueCritical(f"depth {depth} has {n_crit} critical pieces")
    return CombPuzzleLevel(depth, classes, out)


def critical_piece(level: CombPuzzleLevel) -> str:
    """Id of the unique piece whose arcs meet their own half-turn."""
    crit = [p.id for p in level.pieces if is_critical(p.arcs)]
    if len(crit) != 1:
        raise NonUniqueCritical(f"depth {level.depth} has {len(crit)} critical pieces")
    return crit[0]


def piece_dynamics(level: CombPuzzleLevel, above: CombPuzzleLevel) -> tuple[dict[str, str], dict[str, str]]:
    """(image, parent) maps from depth-l pieces to depth-(l-1) pieces, l >= 2.

    The doubling image of an elementary arc is an elementary arc one depth
    up; every arc of a piece must land in the same piece.
    """
    if level.depth < 2:
        raise ValueError("full dynamics starts at depth 2; depth-1 pieces are exceptional")
    image, parent = {}, {}
    for p in level.pieces:
        targets = {above.piece_with_arc((double(a), double(b))).id for a, b in p.arcs}
        if len(targets) != 1:
            raise InconsistentImage(f"{p.id} has arcs doubling into {sorted(targets)}")
        image[p.id] = targets.pop()
        parent[p.id] = p.parent
    return image, parent


# ---------------------------------------------------------------------------
# assembly


class YoccozPuzzle(AbstractPuzzle):
    """An :class:`AbstractPuzzle` that keeps its angle data per depth."""

    def __init__(self, pieces_, window, seed, levels, name):
        super().__init__(pieces_, window, line_above=True, name=name)
        self.seed = seed
        self.levels = levels

    def critical_ids(self) -> dict[int, str]:
        return {d: lv.critical.id for d, lv in self.levels.items() if d >= 1}

    def classes_at(self, depth: int) -> tuple:
        return self.levels[depth].classes if depth >= 1 else ()


def build_levels(seed, max_depth: int, strict: bool = False) -> dict[int, CombPuzzleLevel]:
    """Angle classes and pieces for depths 0..max_depth.

    Ties left by the pullback rules are broken by tracking the critical
    value through the pieces touching the seed cycle (the centre of the
    hyperbolic component attached at alpha).  ``strict`` turns ties into
    :class:`AmbiguousPullback`.
    """
    seed = validate_seed(seed)
    seed_angles = {a for c in seed for a in c}
    levels = {0: pieces((), 0)}
    classes = seed
    value: CombPiece | None = None  # piece holding the critical value, one depth up
    for d in range(1, max_depth + 1):
        if d > 1:
            hint = None
            if value is not None and not strict:
                hint = _midpoint(value.arcs[0])
            classes = pullback(classes, seed, hint)
        levels[d] = pieces(classes, d, levels[d - 1])
        if d >= 2:
            image, _ = piece_dynamics(levels[d], levels[d - 1])
            landed = image[levels[d].critical.id]
            if value is not None and landed != value.id:
                raise InconsistentImage(f"critical piece at depth {d} maps to {landed}, expected {value.id}")
            value = _touching_child(levels[d], landed, seed_angles)
    return levels


def _touching_child(level, parent_id, seed_angles):
    kids = [p for p in level.pieces if p.parent == parent_id and any(a in seed_angles for arc in p.arcs for a in arc)]
    if len(kids) != 1:
        raise InconsistentImage(f"{len(kids)} children of {parent_id} touch the seed cycle")
    return kids[0]


def build(seed, max_depth: int, name: str | None = None, strict: bool = False) -> YoccozPuzzle:
    """Yoccoz puzzle on depths -max_depth..max_depth.

    Depths <= 0 hold a single piece mapping one depth up.  Depth-1 pieces
    are exceptional, with images contained in the depth-0 piece.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    seed = validate_seed(seed)
    levels = build_levels(seed, max_depth, strict)
    out = []
    for d in range(-max_depth, 1):
        up = f"P{d - 1}.0" if d > -max_depth else None
        out.append(PuzzlePiece(f"P{d}.0", d, up, up))
    for p in levels[1].pieces:
        out.append(PuzzlePiece(p.id, 1, "P0.0", None, True, "P0.0"))
    for d in range(2, max_depth + 1):
        image, parent = piece_dynamics(levels[d], levels[d - 1])
        for p in levels[d].pieces:
            out.append(PuzzlePiece(p.id, d, parent[p.id], image[p.id]))
    name = name or "yoccoz:" + ";".join(",".join(map(str, c)) for c in seed)
    return YoccozPuzzle(out, (-max_depth, max_depth), seed, levels, name)


def critical_end() -> End:
    """The nest of critical pieces: critical children are numbered first."""
    return End.periodic("0", name="critical")


def parse_classes(text: str) -> tuple[AngleClass, ...]:
    """``"1/3,2/3"`` or ``"1/7,2/7,4/7"``; ``;`` separates classes."""
    try:
        return tuple(_cls(Fraction(a.strip()) for a in part.split(",")) for part in text.split(";") if part.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise InvalidSeed(f"cannot parse seed {text!r}: {exc}") from None
