"""Built-in trees with dynamics and the JSON/random model loaders."""

from __future__ import annotations

import itertools
import json
import random
from pathlib import Path

from .errors import AddressOutOfRange, UnsupportedModel
from .twd import End, TreeModel, Vertex
from .words import fibonacci_word, thue_morse_word


class BinaryModel(TreeModel):
    """The full binary tree with the one-sided shift.

    Vertices at level l >= 1 are bit strings of length l.  Levels <= 0 form
    a single ancestor line with id "".  F deletes the first bit.
    """

    H = 1
    name = "binary"
    root = Vertex(0, "")

    def children(self, v):
        l, w = v
        if l < 0:
            return [Vertex(l + 1, "")]
        return [Vertex(l + 1, w + "0"), Vertex(l + 1, w + "1")]

    def parent(self, v):
        l, w = v
        return Vertex(l - 1, w[:-1])

    def F(self, v):
        l, w = v
        return Vertex(l - 1, w[1:])

    def level_vertices(self, l):
        if l <= 0:
            return [Vertex(l, "")]
        return [Vertex(l, "".join(bits)) for bits in itertools.product("01", repeat=l)]

    def is_return_target(self, end, m):
        # x_m is hit iff some shift of the address agrees with it on m letters;
        # for eventually periodic addresses shifts beyond |u| + |v| repeat.
        if m <= 0:
            return True
        if not end.eventually_periodic:
            return None
        span = len(end.preperiod) + len(end.period)
        addr = end.address(span + m)
        return any(addr[n : n + m] == addr[:m] for n in range(1, span + 1))


class Z2Model(TreeModel):
    """Vertices (l, m) in Z^2, parent (l-1, floor(m/2)) for m >= 0, (l-1, 0) for m < 0.

    Variant "F" shifts (l, m) -> (l-H, m); variant "G" collapses to (l-H, 0).
    Levels are infinite: ``sample`` bounds the |m| listed per level and the
    negative children of (l, 0).  The model has no root; ends anchor at (0, 0).
    """

    name = "z2"

    def __init__(self, H: int = 1, variant: str = "F", sample: int = 8):
        if variant not in ("F", "G"):
            raise ValueError("variant must be 'F' or 'G'")
        self.H = H
        self.variant = variant
        self.sample = sample
        self.name = f"z2:{variant}:{H}"

    @property
    def anchor(self):
        return Vertex(0, 0)

    def children(self, v):
        l, m = v
        if m < 0:
            return []
        kids = [Vertex(l + 1, 2 * m), Vertex(l + 1, 2 * m + 1)]
        if m == 0:
            kids += [Vertex(l + 1, -j) for j in range(1, self.sample + 1)]
        return kids

    def parent(self, v):
        l, m = v
        return Vertex(l - 1, m // 2 if m >= 0 else 0)

    def F(self, v):
        l, m = v
        return Vertex(l - self.H, m if self.variant == "F" else 0)

    def level_vertices(self, l):
        return [Vertex(l, m) for m in range(-self.sample, self.sample + 1)]


LINE = "~"


class FiniteModel(TreeModel):
    """A tree with dynamics given by explicit data on levels lo..hi.

    With ``line_above`` the levels above ``lo`` are a single ancestor line
    (vertex id ``"~"``) so the model is rooted when levels lo..0 are single.
    Data past ``hi`` is unknown and raises :class:`AddressOutOfRange`.
    """

    def __init__(self, parents, images, H=1, line_above=True, name="finite"):
        self.H = H
        self.name = name
        self.line_above = line_above
        self._parent = dict(parents)
        self._image = dict(images)
        self._levels: dict[int, list[Vertex]] = {}
        for v in self._parent:
            self._levels.setdefault(v.level, []).append(v)
        self.lo, self.hi = min(self._levels), max(self._levels)
        self._children: dict[Vertex, list[Vertex]] = {v: [] for v in self._parent}
        for v, p in self._parent.items():
            if p is not None and p in self._children:
                self._children[p].append(v)
        self.min_level = None if line_above else self.lo
        self.max_level = self.hi
        self.root = self._find_root()

    def _find_root(self):
        if not self.line_above:
            return None
        if self.lo > 0:
            return Vertex(0, LINE) if all(len(self._levels.get(l, ())) <= 1 for l in range(self.lo, 1)) else None
        if all(len(self._levels.get(l, ())) == 1 for l in range(self.lo, 1)):
            return self._levels[0][0]
        return None

    def _line(self, l):
        if not self.line_above:
            raise AddressOutOfRange(f"level {l} is above the model window")
        return Vertex(l, LINE)

    def children(self, v):
        if v.id == LINE:
            return [Vertex(v.level + 1, LINE)] if v.level + 1 < self.lo else list(self._levels[self.lo])
        if v.level >= self.hi:
            raise AddressOutOfRange(f"children of {v} lie beyond model depth {self.hi}")
        return list(self._children[v])

    def parent(self, v):
        if v.id == LINE:
            return self._line(v.level - 1)
        p = self._parent[v]
        return self._line(v.level - 1) if p is None else p

    def F(self, v):
        if v.id == LINE:
            return self._line(v.level - self.H)
        w = self._image.get(v)
        if w is None:
            if v.level - self.H < self.lo:
                return self._line(v.level - self.H)
            raise AddressOutOfRange(f"no image recorded for {v}")
        return w

    def level_vertices(self, l):
        if l < self.lo:
            return [self._line(l)]
        if l > self.hi:
            raise AddressOutOfRange(f"level {l} beyond model depth {self.hi}")
        return list(self._levels.get(l, []))

    def to_json(self) -> dict:
        vs = [v for l in sorted(self._levels) for v in self._levels[l]]
        return {
            "name": self.name,
            "levels": [self.lo, self.hi],
            "H": self.H,
            "periodic_extension": "ancestor_line" if self.line_above else None,
            "vertices": [
                {"id": v.id, "level": v.level, "parent": None if self._parent[v] is None else self._parent[v].id}
                for v in vs
            ],
            "F": [{"from": v.id, "to": self._image[v].id} for v in vs if self._image.get(v) is not None],
        }


def model_from_json(data: dict) -> FiniteModel:
    """Build a :class:`FiniteModel` from the JSON model schema.

    Vertex ids must be unique across levels.  ``periodic_extension`` may be
    null or ``"ancestor_line"``.
    """
    ext = data.get("periodic_extension")
    if ext not in (None, "ancestor_line"):
        raise UnsupportedModel(f"periodic_extension {ext!r} is not supported")
    by_id = {}
    for rec in data["vertices"]:
        if rec["id"] in by_id:
            raise UnsupportedModel(f"duplicate vertex id {rec['id']!r}")
        by_id[rec["id"]] = Vertex(int(rec["level"]), rec["id"])
    if "levels" in data:
        lo, hi = data["levels"]
        stray = [v for v in by_id.values() if not lo <= v.level <= hi]
        if stray:
            raise UnsupportedModel(f"vertex {stray[0]} outside declared levels {lo}..{hi}")

    def ref(i):
        if i is None:
            return None
        if i not in by_id:
            raise UnsupportedModel(f"unknown vertex id {i!r}")
        return by_id[i]

    parents = {by_id[r["id"]]: ref(r.get("parent")) for r in data["vertices"]}
    images = {ref(e["from"]): ref(e["to"]) for e in data.get("F", [])}
    return FiniteModel(parents, images, H=int(data.get("H", 1)), line_above=ext == "ancestor_line",
                       name=data.get("name", "json"))


def load_json_model(path) -> FiniteModel:
    return model_from_json(json.loads(Path(path).read_text()))


def random_rooted_model(
    rng: random.Random,
    depth: int = 12,
    max_branching: int = 4,
    max_level_size: int = 48,
) -> FiniteModel:
    """A random rooted tree with dynamics, H = 1, on levels 0..depth.

    The root has at least two children.  Each child of v maps to a random
    child of F(v), which keeps F children-preserving by construction.
    Level sizes are capped so deep models stay small.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    root = Vertex(0, "r")
    parents = {root: None}
    images = {}
    kids = {root: []}
    counter = itertools.count()
    level = [root]
    for l in range(depth):
        nxt = []
        for i, v in enumerate(level):
            room = max_level_size - len(nxt) - (len(level) - i - 1)
            hi = max(1, min(max_branching, room))
            c = rng.randint(2, max(2, max_branching)) if v is root else rng.randint(1, hi)
            targets = kids[images[v]] if v is not root else None
            for _ in range(c):
                w = Vertex(l + 1, f"v{next(counter)}")
                parents[w] = v
                kids[v].append(w)
                kids[w] = []
                images[w] = root if v is root else rng.choice(targets)
                nxt.append(w)
        level = nxt
    return FiniteModel(parents, images, H=1, line_above=True, name="random")


def random_end(rng: random.Random, max_pre: int = 4, max_period: int = 4, max_digit: int = 4) -> End:
    """A random eventually periodic address; digits wrap modulo the branching."""
    pre = [rng.randrange(max_digit) for _ in range(rng.randint(0, max_pre))]
    per = [rng.randrange(max_digit) for _ in range(rng.randint(1, max_period))]
    return End.periodic(per, pre, wrap=True)


def parse_model(ref: str) -> TreeModel:
    """``binary``, ``z2:F:<H>``, ``z2:G:<H>`` or ``json:<path>``."""
    if ref == "binary":
        return BinaryModel()
    if ref.startswith("z2:"):
        parts = ref.split(":")
        if len(parts) != 3 or parts[1] not in ("F", "G"):
            raise ValueError(f"bad z2 model reference {ref!r}")
        return Z2Model(int(parts[2]), parts[1])
    if ref.startswith("json:"):
        return load_json_model(ref[5:])
    raise ValueError(f"unknown model reference {ref!r}")


def parse_end(ref: str, wrap: bool = False) -> End:
    """``fib``, ``tm``, ``periodic:<word>``, ``word:<bits>`` or ``word:<bits>:<period>``."""
    if ref == "fib":
        return End(source=fibonacci_word, name="fib", wrap=wrap)
    if ref == "tm":
        return End(source=thue_morse_word, name="tm", wrap=wrap)
    if ref.startswith("periodic:"):
        return End.periodic(ref[9:], wrap=wrap)
    if ref.startswith("word:"):
        parts = ref.split(":")
        if len(parts) == 2:
            return End.from_word(parts[1], wrap=wrap)
        if len(parts) == 3 and parts[2]:
            return End.periodic(parts[2], parts[1], wrap=wrap)
    raise ValueError(f"unknown end reference {ref!r}")
