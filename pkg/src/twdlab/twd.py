"""Trees with dynamics: ends, first returns and return chains.

Trees are infinite, so a model is a set of functions (children, parent,
dynamics) evaluated lazily.  Every check works on an explicit finite
truncation.
"""

from __future__ import annotations

import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Hashable, NamedTuple, Sequence

from . import metafib
from .errors import (
    AddressOutOfRange,
    BudgetExhausted,
    Inconclusive,
    NoReturnWithin,
    NotMetaFib,
    PreconditionFailed,
    UnsupportedModel,
)

DEFAULT_N_MAX = 10_000


class Vertex(NamedTuple):
    level: int
    id: Hashable


class TreeModel(ABC):
    """A genealogical tree with a children-preserving self map ``F``.

    ``F`` sends level ``l`` to level ``l - H``.  ``min_level``/``max_level``
    bound the evaluable levels (None means unbounded).
    """

    H: int = 1
    name: str = "model"
    root: Vertex | None = None
    min_level: int | None = None
    max_level: int | None = None

    @abstractmethod
    def children(self, v: Vertex) -> list[Vertex]: ...

    @abstractmethod
    def parent(self, v: Vertex) -> Vertex: ...

    @abstractmethod
    def F(self, v: Vertex) -> Vertex: ...

    @abstractmethod
    def level_vertices(self, l: int) -> list[Vertex]:
        """A finite list of vertices at level ``l`` (a sample if the level is infinite)."""

    @property
    def anchor(self) -> Vertex | None:
        """Level-0 vertex that ends start from when they carry no anchor."""
        return self.root

    def is_return_target(self, end: End, m: int) -> bool | None:
        """Whether some iterate of some vertex of ``end`` lands on x_m.

        None means undecidable for this model/end pair.
        """
        return None


# ---------------------------------------------------------------------------
# ends


class End:
    """An infinite child-index address, starting at a level-0 anchor.

    Digit ``i`` picks the child taken from level ``i`` to level ``i + 1``.
    Eventually periodic ends store ``preperiod`` and ``period``; other ends
    carry a ``source`` returning a prefix of at least the requested length,
    or a finite ``word`` past which the address is unknown.  With
    ``wrap=True`` digits are reduced modulo the number of children.
    """

    __slots__ = ("preperiod", "period", "word", "source", "wrap", "anchor", "name", "_cache", "_lock")

    def __init__(
        self,
        preperiod: Sequence[int] = (),
        period: Sequence[int] | None = None,
        *,
        word: Sequence[int] | None = None,
        source: Callable[[int], Sequence[int]] | None = None,
        wrap: bool = False,
        anchor: Vertex | None = None,
        name: str = "",
    ):
        if sum(x is not None for x in (period, word, source)) != 1:
            raise ValueError("give exactly one of period, word, source")
        if period is not None and not period:
            raise ValueError("period must be nonempty")
        self.preperiod = tuple(preperiod)
        self.period = tuple(period) if period is not None else None
        self.word = tuple(word) if word is not None else None
        self.source = source
        self.wrap = wrap
        self.anchor = anchor
        self.name = name
        self._cache: tuple[int, ...] = ()
        self._lock = threading.Lock()

    @classmethod
    def periodic(cls, period, preperiod=(), **kw) -> End:
        period, preperiod = _digits(period), _digits(preperiod)
        name = kw.pop("name", None) or _periodic_name(preperiod, period)
        return cls(preperiod, period, name=name, **kw)

    @classmethod
    def from_word(cls, word, **kw) -> End:
        word = _digits(word)
        kw.setdefault("name", "word:" + "".join(map(str, word)))
        return cls(word=word, **kw)

    @property
    def eventually_periodic(self) -> bool:
        return self.period is not None

    @property
    def length(self) -> int | None:
        return len(self.word) if self.word is not None else None

    def digit(self, i: int) -> int:
        if i < 0:
            raise IndexError(i)
        if self.period is not None:
            if i < len(self.preperiod):
                return self.preperiod[i]
            return self.period[(i - len(self.preperiod)) % len(self.period)]
        if self.word is not None:
            if i >= len(self.word):
                raise AddressOutOfRange(f"end {self.name!r} is only known to level {len(self.word)}")
            return self.word[i]
        if i >= len(self._cache):
            with self._lock:
                if i >= len(self._cache):
                    want = max(2 * len(self._cache), i + 1, 64)
                    self._cache = tuple(_digits(self.source(want)))
        return self._cache[i]

    def address(self, n: int) -> tuple[int, ...]:
        return tuple(self.digit(i) for i in range(n))

    def __repr__(self):
        return f"End({self.name or '?'})"


def _digits(word) -> tuple[int, ...]:
    if isinstance(word, str):
        return tuple(int(c) for c in word)
    return tuple(int(c) for c in word)


def _periodic_name(preperiod, period) -> str:
    s = lambda w: "".join(map(str, w))  # noqa: E731
    return f"{s(preperiod)}({s(period)})^inf" if preperiod else f"({s(period)})^inf"


class _Walk:
    """Vertices of one end, memoized for the duration of one operation."""

    def __init__(self, model: TreeModel, end: End):
        anchor = end.anchor or model.anchor
        if anchor is None:
            raise UnsupportedModel(f"{model.name} has no root; the end needs an anchor")
        if anchor.level != 0:
            raise ValueError("end anchors must sit at level 0")
        self.model = model
        self.end = end
        self.down = [anchor]
        self.up = [anchor]

    def at(self, l: int) -> Vertex:
        if l >= 0:
            while len(self.down) <= l:
                v = self.down[-1]
                kids = self.model.children(v)
                d = self.end.digit(len(self.down) - 1)
                if self.end.wrap:
                    d %= len(kids)
                if not 0 <= d < len(kids):
                    raise AddressOutOfRange(f"digit {d} at {v} but it has {len(kids)} children")
                self.down.append(kids[d])
            return self.down[l]
        while len(self.up) <= -l:
            self.up.append(self.model.parent(self.up[-1]))
        return self.up[-l]

    def on_end(self, w: Vertex) -> bool:
        return self.at(w.level) == w

    def first_return(self, l: int, n_max: int) -> int:
        w = self.at(l)
        F = self.model.F
        for n in range(1, n_max + 1):
            w = F(w)
            if self.on_end(w):
                return n
        raise NoReturnWithin(l, n_max)


def _require_returns(model: TreeModel):
    if model.H < 1:
        raise UnsupportedModel(f"return operations need H >= 1, {model.name} has H = {model.H}")


def end_vertex(model: TreeModel, end: End, l: int) -> Vertex:
    """The vertex of ``end`` at level ``l``."""
    return _Walk(model, end).at(l)


def first_return(model: TreeModel, end: End, l: int, n_max: int = DEFAULT_N_MAX) -> int:
    """Least n >= 1 with F^n(x_l) on the end; it lands at level l - nH."""
    _require_returns(model)
    return _Walk(model, end).first_return(l, n_max)


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    kind: str
    witness: object
    detail: str = ""

    def to_json(self):
        return {"kind": self.kind, "witness": _jsonable(self.witness), "detail": self.detail}


@dataclass
class ValidationReport:
    depth: int
    H: int | None
    violations: list[Violation] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, kind, witness, detail=""):
        self.violations.append(Violation(kind, witness, detail))

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "depth": self.depth,
            "H": self.H,
            "checked": self.checked,
            "violations": [v.to_json() for v in self.violations],
            "notes": list(self.notes),
        }


def _jsonable(x):
    if isinstance(x, Vertex):
        return {"level": x.level, "id": _jsonable(x.id)}
    if isinstance(x, tuple):
        return [_jsonable(y) for y in x]
    if isinstance(x, (str, int, float, bool)) or x is None:
        return x
    return str(x)


def validate(model: TreeModel, depth: int, lo: int | None = None, ancestor_budget: int = 128) -> ValidationReport:
    """Check the tree-with-dynamics axioms on levels ``lo..depth``.

    Every violation is recorded with a witness vertex; nothing is raised
    for model defects.
    """
    if lo is None:
        lo = -2 if model.min_level is None else max(-2, model.min_level)
    if model.max_level is not None:
        depth = min(depth, model.max_level)
    report = ValidationReport(depth=depth, H=None)
    shifts: dict[int, Vertex] = {}
    first: Vertex | None = None
    for l in range(lo, depth + 1):
        for v in model.level_vertices(l):
            report.checked += 1
            first = first or v
            if v.level != l:
                report.add("level", v, f"listed at level {l}")
                continue
            try:
                p = model.parent(v)
            except AddressOutOfRange:
                p = None
            if p is not None:
                if p.level != l - 1:
                    report.add("parent-level", v, f"parent {p} is not one level up")
                elif l > lo or model.min_level is None:
                    if v not in model.children(p):
                        report.add("parent-children", v, f"not listed among the children of {p}")
            fv = model.F(v)
            shifts.setdefault(l - fv.level, v)
            if l == depth:
                continue
            kids = model.children(v)
            if not kids:
                report.notes.append(f"leaf at {v}")
            fkids = set(model.children(fv))
            for c in kids:
                if model.parent(c) != v:
                    report.add("children-parent", c, f"child of {v} whose parent is {model.parent(c)}")
                fc = model.F(c)
                if fc not in fkids:
                    report.add("preserves-children", c, f"F({c}) = {fc} is not a child of F({v}) = {fv}")
    if len(shifts) > 1:
        for shift, w in sorted(shifts.items()):
            report.add("uniform-shift", w, f"F drops level by {shift}")
    elif shifts:
        (report.H,) = shifts
        if report.H != model.H:
            report.add("declared-H", first, f"declared H = {model.H}, observed {report.H}")
    if first is not None:
        _check_common_ancestors(model, lo, depth, first, report, ancestor_budget)
    return report


def _ancestor(model, v, level):
    while v.level > level:
        v = model.parent(v)
    return v


def _check_common_ancestors(model, lo, depth, ref, report, budget):
    for l in range(lo, depth + 1):
        for v in model.level_vertices(l):
            try:
                top = min(v.level, ref.level)
                a, b = _ancestor(model, v, top), _ancestor(model, ref, top)
                for _ in range(budget):
                    if a == b:
                        break
                    a, b = model.parent(a), model.parent(b)
                else:
                    report.add("common-ancestor", v, f"no common ancestor with {ref} within {budget} levels")
            except AddressOutOfRange:
                report.notes.append(f"common ancestor of {v} and {ref} lies outside the model window")
                return


# ---------------------------------------------------------------------------
# metric


@dataclass(frozen=True)
class Distance:
    value: float
    level: int
    at_cap: bool


def gromov_distance(model: TreeModel, x: End, y: End, gamma: float = 2.0, l_max: int = 64) -> Distance:
    """gamma^(-L), L the deepest level where the ends agree (capped at ``l_max``)."""
    if gamma <= 1:
        raise ValueError("gamma must exceed 1")
    wx, wy = _Walk(model, x), _Walk(model, y)
    if wx.at(0) == wy.at(0):
        for l in range(1, l_max + 1):
            if wx.at(l) != wy.at(l):
                return Distance(gamma ** -(l - 1), l - 1, False)
        return Distance(gamma**-l_max, l_max, True)
    for l in range(-1, -l_max - 1, -1):
        if wx.at(l) == wy.at(l):
            return Distance(gamma**-l, l, False)
    return Distance(gamma**l_max, -l_max, True)


# ---------------------------------------------------------------------------
# return chains


@dataclass(frozen=True)
class ReturnChain:
    """Levels l(k) and first return times n_k for k = k_lo..K.

    ``nonrecurrent_at`` = K means the construction provably stops there:
    n_k = r(k) = infinity for every k > K.
    """

    k_lo: int
    levels: tuple[int, ...]
    times: tuple[int, ...]
    nonrecurrent_at: int | None = None
    H: int = 1

    @property
    def K(self) -> int:
        return self.k_lo + len(self.times) - 1

    @property
    def ks(self) -> range:
        return range(self.k_lo, self.K + 1)

    def level(self, k: int) -> int:
        return self.levels[k - self.k_lo]

    def time(self, k: int) -> int:
        return self.times[k - self.k_lo]

    def times_from(self, k: int) -> tuple[int, ...]:
        return self.times[k - self.k_lo :]

    def to_json(self) -> dict:
        try:
            rt = verify_theorem(self)
            r = [rt.get(k) for k in self.ks]
        except NotMetaFib:
            r = None
        return {
            "k": list(self.ks),
            "l": list(self.levels),
            "n": list(self.times),
            "r": r,
            "nonrecurrent_at": self.nonrecurrent_at,
        }


def minimal_return_chain(
    model: TreeModel,
    end: End,
    l0: int = 0,
    K: int = 8,
    n_max: int = DEFAULT_N_MAX,
    k_lo: int = -8,
) -> ReturnChain:
    """The unique minimal return chain of ``end`` with l(0) = ``l0``.

    For k <= 0 the chain follows first returns upward from ``l0``; for
    k > 0, l(k) is the least level whose first return is x_{l(k-1)}.
    Raises :class:`BudgetExhausted` (with the partial chain attached) when a
    search runs out of budget or model depth before index ``K``.
    """
    _require_returns(model)
    if k_lo > 0:
        raise ValueError("k_lo must be <= 0")
    H = model.H
    walk = _Walk(model, end)
    back_levels, back_times = [], []
    l = l0
    for k in range(0, k_lo - 1, -1):
        try:
            n = walk.first_return(l, n_max)
        except NoReturnWithin as exc:
            raise BudgetExhausted(k, str(exc)) from None
        back_levels.append(l)
        back_times.append(n)
        l -= n * H
    levels = back_levels[::-1]
    times = back_times[::-1]

    def chain(nonrec=None):
        return ReturnChain(k_lo, tuple(levels), tuple(times), nonrec, H)

    for k in range(1, K + 1):
        target = levels[-1]
        if model.is_return_target(end, target) is False:
            return chain(nonrec=k - 1)
        found = None
        for cand in range(target + 1, target + n_max * H + 1):
            try:
                n = walk.first_return(cand, n_max)
            except NoReturnWithin:
                continue
            except AddressOutOfRange as exc:
                raise BudgetExhausted(k, f"model or end exhausted: {exc}", chain()) from None
            if cand - n * H == target:
                found = cand, n
                break
        if found is None:
            raise BudgetExhausted(k, f"no level within {n_max} iterates returns onto level {target}", chain())
        levels.append(found[0])
        times.append(found[1])
    return chain()


def is_return_chain(model: TreeModel, end: End, levels: Sequence[int], n_max: int = DEFAULT_N_MAX) -> bool:
    """True iff each x_{levels[i]} first-returns exactly onto x_{levels[i-1]}."""
    _require_returns(model)
    walk = _Walk(model, end)
    for prev, cur in zip(levels, levels[1:]):
        try:
            n = walk.first_return(cur, n_max)
        except NoReturnWithin:
            return False
        if cur - n * model.H != prev:
            return False
    return True


def verify_theorem(chain: ReturnChain) -> dict[int, int]:
    """An r-table {k: r(k)} for the chain's return times.

    When n_{k_lo} = 1, monotonicity forces every earlier time to be 1 and
    the whole window is in normal form; otherwise r(k) is reported only for
    the k whose backward sums close inside the window.
    """
    times = chain.times
    if times and times[0] == 1:
        shift = chain.k_lo - 1
        try:
            r = metafib.infer_r(times)
        except NotMetaFib as exc:
            raise NotMetaFib(exc.k + shift, exc.undershoot, exc.overshoot) from None
        return {j + shift: rj for j, rj in enumerate(r, start=1)}
    out = {}
    for i, target in enumerate(times):
        total = 0
        for j in range(1, i + 1):
            before = total
            total += times[i - j]
            if total == target:
                out[chain.k_lo + i] = j
                break
            if total > target:
                raise NotMetaFib(chain.k_lo + i, before, total)
    return out


def detect_period(
    model: TreeModel,
    end: End,
    l_probe: int = 0,
    n_max: int = DEFAULT_N_MAX,
    K: int = 12,
    stable: int = 3,
) -> int | None:
    """Minimum period N of ``end`` under F, or None if aperiodic within budget.

    The answer is read off the minimal chain from ``l_probe``: periodic ends
    have eventually constant return times equal to the period.  N is
    certified by checking F^N(x_l) = x_{l-NH} on every level up to the
    deepest chain level.  Raises :class:`Inconclusive` when the chain runs
    out of budget before stabilising.
    """
    _require_returns(model)
    try:
        chain = minimal_return_chain(model, end, l_probe, K, n_max, k_lo=0)
        complete = True
    except BudgetExhausted as exc:
        chain, complete = exc.partial, False
    if chain is None:
        raise Inconclusive("no return chain could be started")
    if chain.nonrecurrent_at is not None:
        return None
    tail = chain.times[-stable:]
    if len(tail) == stable and len(set(tail)) == 1 and chain.K >= stable:
        N = tail[0]
        walk = _Walk(model, end)
        for l in range(l_probe, chain.levels[-1] + 1):
            w = walk.at(l)
            for _ in range(N):
                w = model.F(w)
            if w != walk.at(l - N * model.H):
                return None
        return N
    if not complete:
        raise Inconclusive(f"return times {list(chain.times)} had not stabilised when the budget ran out")
    return None


def check_ancestor_returns(model: TreeModel, end: End, l: int, n: int, depth: int = 8) -> bool:
    """If F^n(x_l) returns, F^n(x_m) returns for every m < l (down to -depth)."""
    _require_returns(model)
    walk = _Walk(model, end)

    def returns(m):
        w = walk.at(m)
        for _ in range(n):
            w = model.F(w)
        return walk.on_end(w)

    if not returns(l):
        raise PreconditionFailed(f"F^{n}(x_{l}) does not return")
    return all(returns(m) for m in range(l - 1, -depth - 1, -1))


# ---------------------------------------------------------------------------
# export


def to_dot(model: TreeModel, lo: int, hi: int, dynamics: bool = False, name: str = "twd") -> str:
    """Graphviz DOT for the truncation of ``model`` to levels ``lo..hi``."""

    def node(v: Vertex) -> str:
        return '"' + f"{v.level}:{v.id}".replace('"', '\\"') + '"'

    lines = [f"digraph {name} {{", "  rankdir=TB;", "  node [shape=circle];"]
    levels = {l: model.level_vertices(l) for l in range(lo, hi + 1)}
    for l, vs in levels.items():
        label = lambda v: str(v.id) if v.id not in ("", None) else f"v{v.level}"  # noqa: E731
        lines.append("  { rank=same; " + " ".join(f'{node(v)} [label="{label(v)}"];' for v in vs) + " }")
    for l, vs in levels.items():
        if l == lo:
            continue
        for v in vs:
            lines.append(f"  {node(model.parent(v))} -> {node(v)};")
    if dynamics:
        for l, vs in levels.items():
            for v in vs:
                fv = model.F(v)
                if lo <= fv.level <= hi:
                    lines.append(f"  {node(v)} -> {node(fv)} [style=dashed, constraint=false, color=gray];")
    lines.append("}")
    return "\n".join(lines) + "\n"
