"""Bit words and a naive border oracle for the binary shift tree.

On the binary model F deletes the first letter, so x_l returns after n
iterates exactly when its length-(l - n) prefix is also a suffix.  The
first return time is therefore l - b(l), b the longest proper border.
Everything here is deliberately brute force: it is the independent check
for the tree engine.
"""

from __future__ import annotations

import random as _random
from functools import lru_cache

from .errors import NoSuchLevel


def border_array(word: str) -> list[int]:
    """b[l-1] = length of the longest proper border of word[:l]."""
    if not word:
        raise ValueError("word must be nonempty")
    out = []
    for l in range(1, len(word) + 1):
        prefix = word[:l]
        out.append(next(b for b in range(l - 1, -1, -1) if prefix[:b] == prefix[l - b :]))
    return out


def oracle_first_return(word: str, l: int) -> int:
    """First return time of the level-l vertex along ``word``."""
    if not 1 <= l <= len(word):
        raise ValueError(f"level {l} outside 1..{len(word)}")
    return l - border_array(word[:l])[-1]


def oracle_minimal_chain(word: str, K: int) -> list[int]:
    """Levels l(0) = 0, l(1), ..., l(K) of the minimal chain along ``word``.

    l(k+1) is the least l whose longest border has length l(k).
    """
    borders = border_array(word)
    levels = [0]
    for k in range(1, K + 1):
        target = levels[-1]
        hit = next((l for l in range(target + 1, len(word) + 1) if borders[l - 1] == target), None)
        if hit is None:
            raise NoSuchLevel(k, target, len(word))
        levels.append(hit)
    return levels


# -- generators --------------------------------------------------------------
# Fibonacci convention: S_1 = "0", S_2 = "01", S_{k+1} = S_k S_{k-1}.


@lru_cache(maxsize=64)
def _fibonacci_block(L: int) -> str:
    a, b = "0", "01"
    while len(b) < L:
        a, b = b, b + a
    return b


def fibonacci_word(L: int) -> str:
    return _fibonacci_block(max(L, 2))[:L]


def thue_morse_word(L: int) -> str:
    return "".join(str(bin(i).count("1") & 1) for i in range(L))


def periodic_word(period: str, L: int) -> str:
    if not period:
        raise ValueError("period must be nonempty")
    return (period * (L // len(period) + 1))[:L]


def random_word(seed: int, L: int, alphabet: str = "01") -> str:
    rng = _random.Random(seed)
    return "".join(rng.choice(alphabet) for _ in range(L))


def word_generators(name: str, L: int, **kw) -> str:
    """Dispatch: fibonacci, thue_morse, periodic(period=...), random(seed=...)."""
    if L < 1:
        raise ValueError("L must be >= 1")
    if name == "fibonacci":
        return fibonacci_word(L)
    if name == "thue_morse":
        return thue_morse_word(L)
    if name == "periodic":
        return periodic_word(kw["period"], L)
    if name == "random":
        return random_word(kw.get("seed", 0), L)
    raise ValueError(f"unknown word generator {name!r}")
