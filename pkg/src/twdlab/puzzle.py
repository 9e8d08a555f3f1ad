"""Combinatorial puzzles: Markov checks, induced dynamics and return nests.

Pieces carry no geometry.  A piece knows its parent and either its image
piece or, if its dynamics is exceptional, a piece that its image is known
to lie in (``contained_in``).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    AddressOutOfRange,
    BudgetExhausted,
    InvalidPuzzle,
    NoReturnWithin,
    UnresolvableExceptional,
)
from .models import LINE, FiniteModel
from .twd import DEFAULT_N_MAX, End, TreeModel, Vertex


@dataclass(frozen=True)
class PuzzlePiece:
    id: str
    depth: int
    parent: str | None = None
    image: str | None = None
    exceptional: bool = False
    contained_in: str | None = None

    def to_json(self) -> dict:
        rec = {"id": self.id, "depth": self.depth, "parent": self.parent}
        if self.exceptional:
            rec["exceptional"] = True
            if self.contained_in is not None:
                rec["contained_in_image_of_parent"] = self.contained_in
        else:
            rec["image"] = self.image
        return rec


class AbstractPuzzle:
    """Pieces over a finite depth window ``lo..hi``.

    ``line_above`` continues the top of the window as a single piece per
    depth; by default it is on when the top depth holds exactly one piece.
    Children are ordered as the pieces were given.
    """

    def __init__(self, pieces, window=None, line_above=None, name="puzzle"):
        pieces = list(pieces)
        if not pieces:
            raise InvalidPuzzle("a puzzle needs at least one piece")
        self.name = name
        self.pieces: dict[str, PuzzlePiece] = {}
        for p in pieces:
            if p.id in self.pieces:
                raise InvalidPuzzle(f"duplicate piece id {p.id!r}")
            if p.id == LINE:
                raise InvalidPuzzle(f"piece id {LINE!r} is reserved")
            self.pieces[p.id] = p
        depths = [p.depth for p in pieces]
        self.lo, self.hi = window if window is not None else (min(depths), max(depths))
        if not all(self.lo <= d <= self.hi for d in depths):
            raise InvalidPuzzle(f"piece depths {min(depths)}..{max(depths)} exceed window {self.lo}..{self.hi}")
        self.by_depth: dict[int, list[str]] = {d: [] for d in range(self.lo, self.hi + 1)}
        self.kids: dict[str, list[str]] = {p.id: [] for p in pieces}
        for p in pieces:
            self.by_depth[p.depth].append(p.id)
            if p.parent in self.kids:
                self.kids[p.parent].append(p.id)
        self.line_above = len(self.by_depth[self.lo]) == 1 if line_above is None else line_above

    def __getitem__(self, pid: str) -> PuzzlePiece:
        return self.pieces[pid]

    def __iter__(self):
        for d in range(self.lo, self.hi + 1):
            for pid in self.by_depth[d]:
                yield self.pieces[pid]

    def __len__(self):
        return len(self.pieces)

    def counts(self) -> dict[int, int]:
        return {d: len(ids) for d, ids in self.by_depth.items()}

    def children(self, pid: str) -> list[str]:
        return list(self.kids[pid])

    def ancestor(self, pid: str, depth: int) -> str | None:
        p = self.pieces[pid]
        while p.depth > depth:
            if p.parent is None:
                return None
            p = self.pieces[p.parent]
        return p.id

    @property
    def exceptional(self) -> list[str]:
        return [p.id for p in self if p.exceptional]

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "window": [self.lo, self.hi],
            "line_above": self.line_above,
            "pieces": [p.to_json() for p in self],
        }

    @classmethod
    def from_json(cls, data: dict) -> AbstractPuzzle:
        pieces = []
        for rec in data["pieces"]:
            exc = bool(rec.get("exceptional", False))
            pieces.append(
                PuzzlePiece(
                    id=str(rec["id"]),
                    depth=int(rec["depth"]),
                    parent=rec.get("parent"),
                    image=None if exc else rec.get("image"),
                    exceptional=exc,
                    contained_in=rec.get("contained_in_image_of_parent") if exc else None,
                )
            )
        window = tuple(data["window"]) if "window" in data else None
        return cls(pieces, window, data.get("line_above"), data.get("name", "puzzle"))


def load_puzzle(path) -> AbstractPuzzle:
    return AbstractPuzzle.from_json(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# Markov properties


@dataclass
class MarkovReport:
    violations: list[dict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    exceptional: list[str] = field(default_factory=list)
    H: int | None = None

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, prop, piece, detail):
        self.violations.append({"property": prop, "piece": piece, "detail": detail})

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "H": self.H,
            "exceptional": list(self.exceptional),
            "violations": list(self.violations),
            "notes": list(self.notes),
        }


def validate_markov(puzzle: AbstractPuzzle) -> MarkovReport:
    """Check properties 1, 2, 3 (3' for exceptional pieces) on the window.

    Relations that leave the window are skipped and listed as notes.
    """
    rep = MarkovReport(exceptional=puzzle.exceptional)
    P = puzzle.pieces
    tops = set()
    for p in puzzle:
        # property 2: a unique parent one depth up
        if p.parent is None:
            if p.depth != puzzle.lo:
                rep.add("2", p.id, "no parent below the top of the window")
        elif p.parent not in P:
            rep.add("2", p.id, f"unknown parent {p.parent!r}")
        elif P[p.parent].depth != p.depth - 1:
            rep.add("2", p.id, f"parent {p.parent!r} is at depth {P[p.parent].depth}")
        top = _top(puzzle, p.id)
        if top is not None:
            tops.add(top)
    # property 1: common ancestors
    if len(tops) > 1 and not puzzle.line_above:
        rep.add("1", sorted(tops)[0], f"pieces descend from {len(tops)} unrelated tops")
    elif len(tops) > 1:
        rep.notes.append("several top pieces; their common ancestor lies above the window")

    for p in puzzle:
        if p.exceptional:
            if not _has_regular_ancestor(puzzle, p.id):
                rep.add("3'", p.id, "exceptional piece without a non-exceptional ancestor")
            if p.contained_in is not None and p.contained_in not in P:
                rep.add("3'", p.id, f"unknown containing piece {p.contained_in!r}")
            elif p.contained_in is not None and P[p.contained_in].depth >= p.depth:
                rep.add("3'", p.id, "containing piece must be shallower")
            continue
        if p.image is None:
            if p.parent is not None and P.get(p.parent) and not P[p.parent].exceptional and P[p.parent].image is not None:
                rep.add("3", p.id, "no image although the parent has one")
            continue
        if p.image not in P:
            rep.add("3", p.id, f"unknown image {p.image!r}")
            continue
        q = P[p.image]
        if q.depth >= p.depth:
            rep.add("3", p.id, f"image {q.id!r} is not shallower")

    if rep.ok:
        try:
            F = _resolve(puzzle)
        except UnresolvableExceptional as exc:
            rep.add("3'", exc.piece, str(exc))
            return rep
        shifts = set()
        for p in puzzle:
            if F.get(p.id) is None:
                continue
            q = P[F[p.id]]
            shifts.add(p.depth - q.depth)
            if p.parent is None or F.get(p.parent) is None:
                rep.notes.append(f"parent image of {p.id!r} lies outside the window")
                continue
            # property 3: parent of the image is the image of the parent
            if q.parent is None:
                rep.notes.append(f"parent of image {q.id!r} lies outside the window")
            elif q.parent != F[p.parent]:
                rep.add("3" if not p.exceptional else "3'", p.id,
                        f"image {q.id!r} has parent {q.parent!r}, parent maps to {F[p.parent]!r}")
        if len(shifts) == 1:
            (rep.H,) = shifts
        elif shifts:
            rep.notes.append(f"depth drops are not uniform: {sorted(shifts)}")
    return rep


def _top(puzzle, pid):
    seen = set()
    p = puzzle.pieces[pid]
    while p.parent is not None:
        if p.id in seen or p.parent not in puzzle.pieces:
            return None
        seen.add(p.id)
        p = puzzle.pieces[p.parent]
    return p.id


def _has_regular_ancestor(puzzle, pid):
    p = puzzle.pieces[pid]
    while p.parent is not None and p.parent in puzzle.pieces:
        p = puzzle.pieces[p.parent]
        if not p.exceptional:
            return True
    return False


# ---------------------------------------------------------------------------
# induced dynamics


def _resolve(puzzle: AbstractPuzzle) -> dict[str, str | None]:
    """Top-down resolution of the induced map; None marks window-edge images."""
    P = puzzle.pieces
    F: dict[str, str | None] = {}
    for d in range(puzzle.lo, puzzle.hi + 1):
        for pid in sorted(puzzle.by_depth[d]):
            p = P[pid]
            if not p.exceptional:
                F[pid] = p.image
                continue
            if p.parent is None:
                raise UnresolvableExceptional(pid, "it has no parent in the window")
            fpp = F.get(p.parent)
            if fpp is None:
                raise UnresolvableExceptional(pid, f"the image of its parent {p.parent!r} is unknown")
            target = P[fpp].depth + 1
            if p.contained_in is not None:
                q = p.contained_in
                if P[q].depth >= target:
                    q = puzzle.ancestor(q, target)
                else:
                    q = _descend_unique(puzzle, q, target)
                    if q is None:
                        raise UnresolvableExceptional(pid, "containing piece is too shallow to decide")
            else:
                q = _descend_unique(puzzle, fpp, target)
                if q is None:
                    raise UnresolvableExceptional(pid, f"{fpp!r} has several children and no containing piece is given")
            if q is None or P[q].parent != fpp:
                raise UnresolvableExceptional(pid, f"containing piece is not inside a child of {fpp!r}")
            F[pid] = q
    return F


def _descend_unique(puzzle, pid, depth):
    while puzzle.pieces[pid].depth < depth:
        kids = puzzle.kids[pid]
        if len(kids) != 1:
            return None
        pid = kids[0]
    return pid


def induced_dynamics(puzzle: AbstractPuzzle) -> dict[str, str]:
    """The induced map on pieces whose image lies in the window.

    An exceptional piece maps to the unique child of F(parent) that
    contains its image.
    """
    return {k: v for k, v in _resolve(puzzle).items() if v is not None}


def shift_of(puzzle: AbstractPuzzle, F: dict[str, str] | None = None) -> int:
    F = induced_dynamics(puzzle) if F is None else F
    drops = {puzzle[p].depth - puzzle[q].depth for p, q in F.items()}
    if len(drops) != 1:
        raise InvalidPuzzle(f"induced dynamics does not drop depth uniformly: {sorted(drops)}")
    return drops.pop()


def tree_of_puzzle(puzzle: AbstractPuzzle) -> FiniteModel:
    """The tree with dynamics whose vertices are the pieces."""
    F = induced_dynamics(puzzle)
    H = shift_of(puzzle, F)
    vertex = {p.id: Vertex(p.depth, p.id) for p in puzzle}
    parents = {vertex[p.id]: vertex.get(p.parent) for p in puzzle}
    images = {vertex[a]: vertex[b] for a, b in F.items()}
    # FiniteModel lists children in insertion order, which follows the puzzle
    return FiniteModel(parents, images, H=H, line_above=puzzle.line_above, name=puzzle.name)


# ---------------------------------------------------------------------------
# return nests


@dataclass(frozen=True)
class ReturnNest:
    k_lo: int
    levels: tuple[int, ...]
    times: tuple[int, ...]
    pieces: tuple[str, ...]

    @property
    def K(self) -> int:
        return self.k_lo + len(self.times) - 1

    def to_json(self) -> dict:
        return {"k_lo": self.k_lo, "l": list(self.levels), "n": list(self.times), "pieces": list(self.pieces)}


class _Nest:
    """Pieces of one nest, addressed by child index from the depth-0 piece."""

    def __init__(self, puzzle, F, H, address: End):
        self.puzzle, self.F, self.H, self.address = puzzle, F, H, address
        at0 = puzzle.by_depth.get(0, []) if puzzle.lo <= 0 else []
        if address.anchor is not None:
            start = address.anchor.id
        elif len(at0) == 1:
            start = at0[0]
        elif puzzle.lo > 0 and puzzle.line_above:
            start = LINE
        else:
            raise InvalidPuzzle("the nest needs a unique depth-0 piece or an explicit anchor")
        self.down = [start]
        self.up = [start]

    def at(self, l):
        if l >= 0:
            while len(self.down) <= l:
                cur, depth = self.down[-1], len(self.down) - 1
                if depth >= self.puzzle.hi:
                    raise AddressOutOfRange(f"nest leaves the window at depth {depth}")
                if cur == LINE:
                    kids = [LINE] if depth + 1 < self.puzzle.lo else self.puzzle.by_depth[self.puzzle.lo]
                else:
                    kids = self.puzzle.kids[cur]
                d = self.address.digit(depth)
                if self.address.wrap:
                    d %= len(kids)
                if not 0 <= d < len(kids):
                    raise AddressOutOfRange(f"digit {d} at piece {cur!r} with {len(kids)} children")
                self.down.append(kids[d])
            return self.down[l]
        while len(self.up) <= -l:
            cur = self.up[-1]
            p = self.puzzle.pieces[cur].parent if cur != LINE else None
            if p is None:
                if not self.puzzle.line_above:
                    raise AddressOutOfRange("nest leaves the top of the window")
                p = LINE
            self.up.append(p)
        return self.up[-l]

    def image(self, depth, pid):
        if pid == LINE:
            return depth - self.H, LINE
        q = self.F.get(pid)
        if q is None:
            if depth - self.H < self.puzzle.lo and self.puzzle.line_above:
                return depth - self.H, LINE
            raise AddressOutOfRange(f"image of {pid!r} lies outside the window")
        return self.puzzle[q].depth, q

    def first_return(self, l, n_max):
        depth, pid = l, self.at(l)
        for n in range(1, n_max + 1):
            depth, pid = self.image(depth, pid)
            if self.at(depth) == pid:
                return n
        raise NoReturnWithin(l, n_max)


def return_nest(
    puzzle: AbstractPuzzle,
    address: End,
    l0: int = 0,
    K: int = 8,
    n_max: int = DEFAULT_N_MAX,
    k_lo: int = -8,
) -> ReturnNest:
    """The minimal return nest of the nest given by ``address``.

    Works on the pieces and the induced map directly.  On budget or window
    exhaustion raises :class:`BudgetExhausted` with the partial nest.
    """
    F = induced_dynamics(puzzle)
    H = shift_of(puzzle, F)
    nest = _Nest(puzzle, F, H, address)
    levels, times = [], []
    l = l0
    for k in range(0, k_lo - 1, -1):
        try:
            n = nest.first_return(l, n_max)
        except NoReturnWithin as exc:
            raise BudgetExhausted(k, str(exc)) from None
        levels.insert(0, l)
        times.insert(0, n)
        l -= n * H

    def partial():
        return ReturnNest(k_lo, tuple(levels), tuple(times), tuple(nest.at(x) for x in levels))

    for k in range(1, K + 1):
        target = levels[-1]
        found = None
        for cand in range(target + 1, target + n_max * H + 1):
            try:
                n = nest.first_return(cand, n_max)
            except NoReturnWithin:
                continue
            except AddressOutOfRange as exc:
                raise BudgetExhausted(k, f"puzzle window exhausted: {exc}", partial()) from None
            if cand - n * H == target:
                found = cand, n
                break
        if found is None:
            raise BudgetExhausted(k, f"no depth within {n_max} iterates returns onto depth {target}", partial())
        levels.append(found[0])
        times.append(found[1])
    return partial()


# ---------------------------------------------------------------------------
# constructions


def puzzle_from_model(model: TreeModel, lo: int, hi: int, name: str | None = None) -> AbstractPuzzle:
    """One piece per vertex of ``model`` on depths lo..hi."""
    pid = lambda v: f"{v.level}:{v.id}"  # noqa: E731
    pieces = []
    for l in range(lo, hi + 1):
        for v in model.level_vertices(l):
            fv = model.F(v)
            pieces.append(
                PuzzlePiece(
                    id=pid(v),
                    depth=l,
                    parent=pid(model.parent(v)) if l > lo else None,
                    image=pid(fv) if fv.level >= lo else None,
                )
            )
    return AbstractPuzzle(pieces, (lo, hi), name=name or f"{model.name}-puzzle")


def chain_puzzle(lo: int, hi: int) -> AbstractPuzzle:
    """One piece per depth, each mapping to the one above."""
    pieces = [
        PuzzlePiece(f"L{d}", d, f"L{d - 1}" if d > lo else None, f"L{d - 1}" if d > lo else None)
        for d in range(lo, hi + 1)
    ]
    return AbstractPuzzle(pieces, (lo, hi), name="chain")


def random_puzzle(
    rng: random.Random,
    depth: int = 8,
    top: int = -2,
    max_branching: int = 3,
    max_level_size: int = 24,
    exceptional_depths: tuple[int, ...] = (1,),
) -> AbstractPuzzle:
    """A random rooted puzzle with H = 1 satisfying the Markov properties.

    Depths ``top..0`` hold one piece each.  Pieces at ``exceptional_depths``
    are marked exceptional; their containing piece is the true image, left
    out when the parent's image has a single child.
    """
    pieces: dict[str, dict] = {}
    order: list[str] = []
    kids: dict[str, list[str]] = {}
    counter = iter(range(10**9))

    def add(depth, parent, image):
        pid = f"Q{depth}.{next(counter)}"
        pieces[pid] = {"depth": depth, "parent": parent, "image": image}
        kids[pid] = []
        if parent is not None:
            kids[parent].append(pid)
        order.append(pid)
        return pid

    prev = add(top, None, None)
    for d in range(top + 1, 1):
        prev = add(d, prev, prev)
    level = [prev]
    for d in range(1, depth + 1):
        nxt = []
        for i, v in enumerate(level):
            room = max_level_size - len(nxt) - (len(level) - i - 1)
            lo_b = 2 if d == 1 else 1
            c = rng.randint(lo_b, max(lo_b, min(max_branching, room)))
            fv = pieces[v]["image"]
            for _ in range(c):
                nxt.append(add(d, v, rng.choice(kids[fv])))
        level = nxt

    out = []
    for pid in order:
        rec = pieces[pid]
        if rec["depth"] in exceptional_depths:
            q = rec["image"]
            siblings = kids[pieces[q]["parent"]]
            hint = None if len(siblings) == 1 and rng.random() < 0.5 else q
            out.append(PuzzlePiece(pid, rec["depth"], rec["parent"], None, True, hint))
        else:
            out.append(PuzzlePiece(pid, rec["depth"], rec["parent"], rec["image"]))
    return AbstractPuzzle(out, (top, depth), name="random")
