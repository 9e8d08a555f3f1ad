"""Variable-r meta-Fibonacci sequences.

A sequence is generated by a rule ``r`` through

    n_k = n_{k-1} + n_{k-2} + ... + n_{k-r(k)}

with the normal form ``n_k = 1`` for every ``k <= 0``.  All arithmetic is on
Python integers, so values never overflow.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import InvalidRSpec, NotMetaFib, PreconditionFailed

__all__ = [
    "RSpec",
    "MetaFibSeq",
    "Cascade",
    "GrowthConstant",
    "GrowthReport",
    "generate",
    "infer_r",
    "cascades",
    "lower_bound",
    "check_lower_bound",
    "check_upper_bound",
    "check_doubling",
    "gamma",
    "growth_report",
    "to_csv",
    "to_json",
]


def _positive_int(k, value):
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise InvalidRSpec(k, value)
    return value


def _is_power_of_two(k: int) -> bool:
    # k = 2^m with m >= 1
    return k >= 2 and k & (k - 1) == 0


@dataclass(frozen=True)
class RSpec:
    """The generating rule ``r``.  Evaluates to 1 for every ``k <= 0``.

    Build instances with the classmethods rather than the raw constructor.
    """

    kind: str
    params: tuple = ()
    tail: RSpec | None = None
    label: str = ""

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, r: int) -> RSpec:
        return cls("constant", (_positive_int(1, r),), label=f"const:{r}")

    @classmethod
    def identity(cls) -> RSpec:
        return cls("identity", label="identity")

    @classmethod
    def power_of_two(cls) -> RSpec:
        return cls("pow2", label="pow2")

    @classmethod
    def indicator_powers_of_two(cls, a: int = 2, b: int = 1) -> RSpec:
        """r(k) = a when k = 2^m (m >= 1), else b."""
        _positive_int(2, a)
        _positive_int(1, b)
        label = "linear" if (a, b) == (2, 1) else f"pow2ind:{a}:{b}"
        return cls("indicator", ("pow2", None, a, b), label=label)

    @classmethod
    def indicator_residue(cls, modulus: int, residue: int, a: int, b: int) -> RSpec:
        """r(k) = a when k = residue (mod modulus), else b."""
        if modulus < 1:
            raise ValueError("modulus must be positive")
        _positive_int(residue % modulus or modulus, a)
        _positive_int(1, b)
        return cls(
            "indicator",
            ("residue", (modulus, residue % modulus), a, b),
            label=f"residue:{modulus}:{residue % modulus}:{a}:{b}",
        )

    @classmethod
    def table(cls, entries: dict[int, int] | Sequence[int], tail: RSpec) -> RSpec:
        """Explicit values for a finite set of k, with ``tail`` used everywhere else.

        A plain sequence is read as r(1), r(2), ...
        """
        if not isinstance(entries, dict):
            entries = {k: v for k, v in enumerate(entries, start=1)}
        if tail is None:
            raise InvalidRSpec(0, "table without tail rule")
        items = tuple(sorted((int(k), _positive_int(k, v)) for k, v in entries.items()))
        if any(k < 1 for k, _ in items):
            raise InvalidRSpec(items[0][0], "table entries must have k >= 1")
        body = ",".join(str(v) for _, v in items)
        return cls("table", items, tail=tail, label=f"table:{body}:{tail.label}")

    @classmethod
    def fibonacci(cls) -> RSpec:
        """r(1) = 1 and r(k) = 2 afterwards, giving n_k = u_{k+1}."""
        spec = cls.table({1: 1}, cls.constant(2))
        return cls(spec.kind, spec.params, spec.tail, label="fib")

    @classmethod
    def sharpness(cls, J: int) -> RSpec:
        """The family showing the lower bound 2^floor(k/(J+2)) is attained."""
        spec = cls.indicator_residue(J + 2, 0, 2, 1)
        return cls(spec.kind, spec.params, label=f"sharp:{J}")

    @classmethod
    def parse(cls, text: str) -> RSpec:
        """Parse the command line syntax.

        ``pow2``, ``identity``, ``fib``, ``linear``, ``const:R``, ``sharp:J``,
        ``residue:M:RES:A:B``, ``table:R1,R2,...:TAIL`` (TAIL is another spec).
        """
        text = text.strip()
        head, _, rest = text.partition(":")
        try:
            if head in ("pow2", "power-of-two") and not rest:
                return cls.power_of_two()
            if head in ("identity", "id") and not rest:
                return cls.identity()
            if head == "fib" and not rest:
                return cls.fibonacci()
            if head == "linear" and not rest:
                return cls.indicator_powers_of_two()
            if head == "const":
                return cls.constant(int(rest))
            if head == "sharp":
                return cls.sharpness(int(rest))
            if head == "residue":
                m, res, a, b = (int(x) for x in rest.split(":"))
                return cls.indicator_residue(m, res, a, b)
            if head == "table":
                body, _, tail = rest.partition(":")
                values = [int(x) for x in body.split(",") if x]
                return cls.table(values, cls.parse(tail or "const:1"))
        except ValueError as exc:
            raise ValueError(f"malformed r spec {text!r}: {exc}") from None
        raise ValueError(f"unknown r spec {text!r}")

    # -- evaluation -------------------------------------------------------
    def __call__(self, k: int) -> int:
        if k <= 0:
            return 1
        kind = self.kind
        if kind == "constant":
            return self.params[0]
        if kind == "identity":
            return k
        if kind == "pow2":
            return 1 << (k - 1)
        if kind == "indicator":
            pred, arg, a, b = self.params
            if pred == "pow2":
                hit = _is_power_of_two(k)
            else:
                modulus, residue = arg
                hit = k % modulus == residue
            return a if hit else b
        if kind == "table":
            for key, value in self.params:
                if key == k:
                    return value
            return self.tail(k)
        raise InvalidRSpec(k, f"unknown kind {kind!r}")

    def values(self, K: int) -> tuple[int, ...]:
        return tuple(_positive_int(k, self(k)) for k in range(1, K + 1))

    def __str__(self):
        return self.label or self.kind


@dataclass(frozen=True)
class MetaFibSeq:
    """Terms n_1..n_K of a normal-form sequence; ``seq[k]`` is 1 for k_lo <= k <= 0."""

    values: tuple[int, ...]
    k_lo: int = 0
    spec: RSpec | None = field(default=None, compare=False)

    @classmethod
    def from_values(cls, values: Iterable[int]) -> MetaFibSeq:
        vals = tuple(int(v) for v in values)
        if not vals:
            raise PreconditionFailed("empty sequence")
        for k, v in enumerate(vals, start=1):
            if v < 1:
                raise PreconditionFailed("terms must be positive", witness=k)
        return cls(vals)

    @property
    def K(self) -> int:
        return len(self.values)

    @property
    def window(self) -> tuple[int, int]:
        return (self.k_lo, self.K)

    def __getitem__(self, k: int) -> int:
        if k <= 0:
            if k < self.k_lo:
                raise IndexError(f"index {k} below window start {self.k_lo}")
            return 1
        return self.values[k - 1]

    def __len__(self):
        return self.K

    def __iter__(self):
        return iter(self.values)


@dataclass(frozen=True)
class Cascade:
    start: int
    length: int

    @property
    def stop(self) -> int:
        return self.start + self.length - 1


@dataclass(frozen=True)
class GrowthConstant:
    r: int
    gamma: float
    tol: float
    residual: float


@dataclass(frozen=True)
class GrowthReport:
    R: int
    gamma: float
    min_ratio: float
    max_ratio: float
    argmin: int
    argmax: int


def generate(r: RSpec, K: int) -> MetaFibSeq:
    """Terms n_1..n_K generated by ``r`` from the all-ones history."""
    if K < 1:
        raise ValueError("K must be at least 1")
    values: list[int] = []
    prefix = [0]  # prefix[i] = n_1 + ... + n_i
    widest = 1
    for k in range(1, K + 1):
        rk = _positive_int(k, r(k))
        widest = max(widest, rk)
        lo = k - rk
        ones = 1 - lo if lo <= 0 else 0
        total = prefix[k - 1] - prefix[max(lo, 1) - 1] + ones
        values.append(total)
        prefix.append(prefix[-1] + total)
    return MetaFibSeq(tuple(values), k_lo=1 - widest, spec=r)


def _terms(seq) -> tuple[int, ...]:
    if isinstance(seq, MetaFibSeq):
        return seq.values
    return MetaFibSeq.from_values(seq).values


def infer_r(seq: MetaFibSeq | Sequence[int]) -> tuple[int, ...]:
    """Recover r(1..K) from a normal-form sequence.

    Backward partial sums are strictly increasing, so r(k) is unique when
    it exists; :class:`NotMetaFib` is raised when the sums skip n_k.
    """
    n = _terms(seq)
    out = []
    for k in range(1, len(n) + 1):
        target = n[k - 1]
        total = 0
        for j, i in enumerate(range(k - 1, 0, -1), start=1):
            before = total
            total += n[i - 1]
            if total == target:
                out.append(j)
                break
            if total > target:
                raise NotMetaFib(k, before, total)
        else:
            # every remaining term is a normal-form 1
            out.append(k - 1 + target - total)
    return tuple(out)


def cascades(seq: MetaFibSeq | Sequence[int]) -> list[Cascade]:
    """Maximal constant runs among n_1..n_K, in increasing start order."""
    n = _terms(seq)
    runs: list[Cascade] = []
    start = 1
    for k in range(2, len(n) + 2):
        if k > len(n) or n[k - 1] != n[k - 2]:
            runs.append(Cascade(start, k - start))
            start = k
    return runs


def lower_bound(k: int, J: int) -> int:
    return 1 << (k // (J + 2))


def check_lower_bound(seq, J: int, require_cascade_bound: bool = True) -> int | None:
    """First k with n_k < 2^floor(k/(J+2)), or None when the bound holds.

    Raises :class:`PreconditionFailed` if a cascade is longer than ``J``
    (unless ``require_cascade_bound`` is False).
    """
    if J < 1:
        raise ValueError("J must be positive")
    n = _terms(seq)
    if require_cascade_bound:
        for c in cascades(n):
            if c.length > J:
                raise PreconditionFailed(f"cascade longer than J={J}", witness=(c.start, c.length))
    for k in range(1, len(n) + 1):
        if n[k - 1] < lower_bound(k, J):
            return k
    return None


def check_upper_bound(seq, r: RSpec, M: int) -> int | None:
    """First k with n_k > (M+1)^k, or None.

    Requires r(k+1) <= M r(k) + 1 on the window, including k = 0 with
    r(0) = 1 so that n_1 = r(1) <= M + 1.
    """
    if M < 1:
        raise ValueError("M must be positive")
    n = _terms(seq)
    for k in range(0, len(n)):
        if r(k + 1) > M * r(k) + 1:
            raise PreconditionFailed(f"r(k+1) <= {M} r(k) + 1 fails", witness=k)
    bound = 1
    for k in range(1, len(n) + 1):
        bound *= M + 1
        if n[k - 1] > bound:
            return k
    return None


def check_doubling(seq, r: RSpec) -> int | None:
    """First k where r(k+1) = r(k) + 1 but n_{k+1} != 2 n_k, or None."""
    n = _terms(seq)
    if infer_r(n) != r.values(len(n)):
        raise PreconditionFailed("sequence is not generated by the given r")
    term = lambda k: 1 if k <= 0 else n[k - 1]  # noqa: E731
    for k in range(0, len(n)):
        if r(k + 1) == r(k) + 1 and term(k + 1) != 2 * term(k):
            return k
    return None


def _char_poly(r: int, z: Fraction) -> Fraction:
    # z^r - z^{r-1} - ... - z - 1 by Horner
    acc = Fraction(1)
    for _ in range(r):
        acc = acc * z - 1
    return acc


def gamma(r: int, tol: float = 1e-12) -> GrowthConstant:
    """Root in [1, 2) of z^r - z^(r-1) - ... - 1, bracketed to width ``tol``.

    Bisection runs in exact rationals so the sign tests are never wrong.
    """
    if r < 1 or not 2.0**-70 <= tol:
        raise ValueError("need r >= 1 and tol >= 2**-70")
    lo = Fraction(1)
    if _char_poly(r, lo) == 0:
        return GrowthConstant(r, 1.0, tol, 0.0)
    hi = 2 - Fraction(1, 10**15)
    if _char_poly(r, hi) <= 0:
        hi = Fraction(2)
    width = Fraction(tol)
    while hi - lo > width:
        mid = (lo + hi) / 2
        if _char_poly(r, mid) <= 0:
            lo = mid
        else:
            hi = mid
        # keep denominators small; the bracket only has to contain the root
        lo = Fraction(math.floor(lo * 2**80), 2**80)
        hi = Fraction(math.ceil(hi * 2**80), 2**80)
    g = float((lo + hi) / 2)
    return GrowthConstant(r, g, tol, abs(float(_char_poly(r, Fraction(g)))))


def growth_report(seq, R: int) -> GrowthReport:
    """Empirical min and max of n_k / gamma_R^k over k >= 1."""
    n = _terms(seq)
    g = gamma(R).gamma
    lg = math.log(g)
    ratios = [math.exp(math.log(v) - k * lg) for k, v in enumerate(n, start=1)]
    lo = min(range(len(ratios)), key=ratios.__getitem__)
    hi = max(range(len(ratios)), key=ratios.__getitem__)
    return GrowthReport(R, g, ratios[lo], ratios[hi], lo + 1, hi + 1)


def to_csv(seq: MetaFibSeq, r: Sequence[int] | None = None) -> str:
    if r is None:
        r = seq.spec.values(seq.K) if seq.spec is not None else infer_r(seq)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["k", "r", "n"])
    for k, (rk, nk) in enumerate(zip(r, seq.values), start=1):
        writer.writerow([k, rk, nk])
    return buf.getvalue()


def to_json(seq: MetaFibSeq, r: Sequence[int] | None = None) -> str:
    if r is None:
        r = seq.spec.values(seq.K) if seq.spec is not None else infer_r(seq)
    doc = {
        "spec": str(seq.spec) if seq.spec is not None else None,
        "window": list(seq.window),
        "values": list(seq.values),
        "r": list(r),
    }
    return json.dumps(doc)
