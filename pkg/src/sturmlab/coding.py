"""Symbolic coding of spectral bands.

Letters are typed symbols ``(t, k)_n`` with type ``t`` in {1, 2, 3}, index
``k`` and level ``n``.  The level of the i-th letter of a word equals the
i-th frequency digit.  Successor rules:

    after type 1: (2,1)_n
    after type 2: (1,k)_n for k <= n+1, (3,k)_n for k <= n
    after type 3: (1,k)_n for k <= n,   (3,k)_n for k <= n-1

Band words start from a boundary symbol (1 or 3, the two order-0 bands);
fiber words start with any letter.  Counting is exact through products of
the 3x3 matrices ``A_k`` below.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple, Sequence

__all__ = [
    "Letter",
    "Word",
    "CapExceeded",
    "ENUMERATION_CAP",
    "alphabet",
    "admissible",
    "successors",
    "count_matrix",
    "count_vector",
    "count_words",
    "enumerate_words",
    "iota_lift",
    "type_vector",
]

ENUMERATION_CAP = 10**6


class Letter(NamedTuple):
    band_type: int
    index: int
    level: int

    def __str__(self) -> str:
        return f"{self.band_type}.{self.index}@{self.level}"

    @classmethod
    def parse(cls, text: str) -> "Letter":
        tk, n = text.split("@")
        t, k = tk.split(".")
        return cls(int(t), int(k), int(n))

    def is_valid(self) -> bool:
        t, k, n = self
        if n < 1 or k < 1:
            return False
        if t == 1:
            return k <= n + 1
        if t == 2:
            return k == 1
        if t == 3:
            return k <= n
        return False


class Word(NamedTuple):
    """A letter sequence, optionally preceded by a boundary symbol 1 or 3."""

    letters: tuple[Letter, ...] = ()
    boundary: int | None = None

    def __str__(self) -> str:
        parts = [] if self.boundary is None else [f"B{self.boundary}"]
        parts.extend(str(e) for e in self.letters)
        return "-".join(parts)

    @classmethod
    def parse(cls, text: str) -> "Word":
        parts = [p for p in text.strip().split("-") if p]
        boundary = None
        if parts and parts[0].startswith("B"):
            boundary = int(parts[0][1:])
            parts = parts[1:]
        return cls(tuple(Letter.parse(p) for p in parts), boundary)

    @property
    def order(self) -> int:
        return len(self.letters)

    @property
    def end_type(self) -> int:
        if self.letters:
            return self.letters[-1].band_type
        if self.boundary is None:
            raise ValueError("empty fiber word has no type")
        return self.boundary

    def extend(self, e: Letter) -> "Word":
        return Word(self.letters + (e,), self.boundary)

    def prefix(self, n: int) -> "Word":
        return Word(self.letters[:n], self.boundary)

    def is_admissible(self, levels: Sequence[int] | None = None) -> bool:
        if levels is not None:
            if len(levels) < len(self.letters):
                return False
            if any(e.level != a for e, a in zip(self.letters, levels)):
                return False
        if not all(e.is_valid() for e in self.letters):
            return False
        prev: Letter | int | None = self.boundary
        for e in self.letters:
            if prev is not None and not admissible(prev, e):
                return False
            prev = e
        return True


class CapExceeded(RuntimeError):
    """Enumeration refused; ``count`` holds the exact number of words."""

    def __init__(self, count: int, cap: int):
        super().__init__(f"{count} words exceed the enumeration cap {cap}")
        self.count = count
        self.cap = cap


def alphabet(n: int) -> list[Letter]:
    """All ``2n + 2`` letters of level ``n``."""
    if n < 1:
        raise ValueError("level must be >= 1")
    out = [Letter(1, k, n) for k in range(1, n + 2)]
    out.append(Letter(2, 1, n))
    out.extend(Letter(3, k, n) for k in range(1, n + 1))
    return out


def admissible(e: Letter | int, nxt: Letter) -> bool:
    """Whether ``nxt`` may follow ``e`` (a letter or a bare type/boundary)."""
    t = e.band_type if isinstance(e, Letter) else int(e)
    u, k, n = nxt
    if not nxt.is_valid():
        return False
    if t == 1:
        return u == 2 and k == 1
    if t == 2:
        return (u == 1 and k <= n + 1) or (u == 3 and k <= n)
    if t == 3:
        return (u == 1 and k <= n) or (u == 3 and k <= n - 1)
    return False


def successors(t: int, n: int) -> list[Letter]:
    """Letters admissible after type ``t`` at level ``n``, interlaced 1,3,1,...

    For types 2 and 3 this is also the left-to-right order of the child
    bands inside a parent band.
    """
    if t == 1:
        return [Letter(2, 1, n)]
    n1, n3 = (n + 1, n) if t == 2 else (n, n - 1)
    out = []
    for k in range(1, n1 + 1):
        out.append(Letter(1, k, n))
        if k <= n3:
            out.append(Letter(3, k, n))
    return out


def count_matrix(k: int) -> tuple[tuple[int, int, int], ...]:
    """Transition count matrix ``A_k`` (rows: current type, cols: next type)."""
    return ((0, 1, 0), (k + 1, 0, k), (k, 0, k - 1))


def type_vector(t: int) -> tuple[int, int, int]:
    return tuple(int(i == t - 1) for i in range(3))  # type: ignore[return-value]


def _vecmat(v: Sequence[int], k: int) -> tuple[int, int, int]:
    v1, v2, v3 = v
    return (v2 * (k + 1) + v3 * k, v1, v2 * k + v3 * (k - 1))


def count_vector(start, levels: Sequence[int]) -> tuple[int, int, int]:
    """Counts of admissible words by end type.

    ``start`` is a type 1/2/3, ``"boundary"`` (sum over boundary symbols
    1 and 3) or ``"fiber"`` (first letter free).  An empty ``levels``
    returns the start vector itself.
    """
    levels = list(levels)
    if start == "boundary":
        a = _add(count_vector(1, levels), count_vector(3, levels))
        return a
    if start == "fiber":
        if not levels:
            raise ValueError("fiber words need at least one level")
        a1 = levels[0]
        v: tuple[int, int, int] = (a1 + 1, 1, a1)
        levels = levels[1:]
    else:
        v = type_vector(int(start))
    for k in levels:
        v = _vecmat(v, k)
    return v


def _add(u, v):
    return tuple(x + y for x, y in zip(u, v))


def count_words(start, levels: Sequence[int], end_type_filter: int | Iterable[int] | None = None) -> int:
    """Exact number of admissible words; optional filter on the end type."""
    v = count_vector(start, levels)
    if end_type_filter is None:
        return sum(v)
    if isinstance(end_type_filter, int):
        end_type_filter = (end_type_filter,)
    return sum(v[t - 1] for t in set(end_type_filter))


def enumerate_words(
    start,
    levels: Sequence[int],
    end_type_filter: int | Iterable[int] | None = None,
    cap: int = ENUMERATION_CAP,
) -> list[Word]:
    """All admissible words over ``levels`` from ``start`` (see ``count_vector``)."""
    levels = list(levels)
    n = count_words(start, levels, end_type_filter)
    total = count_words(start, levels)
    if total > cap:
        raise CapExceeded(n, cap)
    if isinstance(end_type_filter, int):
        end_type_filter = (end_type_filter,)
    keep = None if end_type_filter is None else set(end_type_filter)

    if start == "boundary":
        roots = [Word((), 1), Word((), 3)]
        rest = levels
    elif start == "fiber":
        roots = [Word((e,)) for e in alphabet(levels[0])]
        rest = levels[1:]
    else:
        roots = [Word((), None)]
        rest = levels
        first_type = int(start)

    out: list[Word] = []

    def walk(w: Word, t: int, i: int):
        if i == len(rest):
            if keep is None or w.end_type in keep:
                out.append(w)
            return
        for e in successors(t, rest[i]):
            walk(w.extend(e), e.band_type, i + 1)

    for r in roots:
        if start in ("boundary", "fiber"):
            walk(r, r.end_type, 0)
        else:
            if not rest:
                if keep is None or first_type in keep:
                    out.append(r)
                continue
            for e in successors(first_type, rest[0]):
                walk(Word((e,)), e.band_type, 1)
    return out


def iota_lift(w: Word) -> Word:
    """Lift a fiber word over ``a`` to a band word over ``1a``."""
    if w.boundary is not None:
        raise ValueError("iota_lift expects a fiber word")
    if not w.letters:
        raise ValueError("cannot lift the empty word")
    if w.letters[0].band_type in (1, 3):
        return Word((Letter(2, 1, 1),) + w.letters, 1)
    return Word((Letter(1, 1, 1),) + w.letters, 3)
