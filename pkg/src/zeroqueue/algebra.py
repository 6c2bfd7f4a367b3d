"""Generator alphabets, partial products and normal-form buffer words.

A buffer word is a tuple of generator indices in multiplication order:
``w[0]`` is the back-end of the buffer (where arrivals interact) and
``w[-1]`` is the front-end (the customer in service). A word is in normal
form when no two adjacent letters reduce.

The product table is stored as an integer matrix ``table[a, b]`` holding
the index of ``a*b`` when it is a letter, :data:`IDENTITY_CODE` when
``a*b`` is the unit and :data:`IRREDUCIBLE_CODE` otherwise.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import AlgebraError

IDENTITY_CODE = -1
IRREDUCIBLE_CODE = -2

Word = tuple  # tuple[int, ...]


class Kind(enum.Enum):
    IDENTITY = "1"
    LETTER = "letter"
    IRREDUCIBLE = "*"


@dataclass(frozen=True)
class Reduction:
    """Outcome of multiplying two generators."""

    kind: Kind
    letter: int | None = None

    @classmethod
    def from_code(cls, code: int) -> "Reduction":
        if code == IDENTITY_CODE:
            return IDENTITY
        if code == IRREDUCIBLE_CODE:
            return IRREDUCIBLE
        return cls(Kind.LETTER, int(code))


IDENTITY = Reduction(Kind.IDENTITY)
IRREDUCIBLE = Reduction(Kind.IRREDUCIBLE)


def Letter(c: int) -> Reduction:
    return Reduction(Kind.LETTER, c)


class Excluded(str, enum.Enum):
    """Plain monoids for which the plain-triple theorems do not apply."""

    ISOMORPHIC_TO_Z = "IsomorphicToZ"
    ISOMORPHIC_TO_Z2_STAR_Z2 = "IsomorphicToZ2starZ2"
    FINITE = "Finite"


# -- factor specifications -------------------------------------------------


@dataclass(frozen=True)
class FreeMonoid:
    letters: tuple[str, ...]

    def __init__(self, letters: Iterable[str]):
        object.__setattr__(self, "letters", tuple(letters))


@dataclass(frozen=True)
class FreeGroup:
    """Free group on ``letters``; inverse labels default to ``x^-1``."""

    letters: tuple[str, ...]
    inverses: tuple[str, ...]

    def __init__(self, letters: Iterable[str], inverses: Iterable[str] | None = None):
        letters = tuple(letters)
        inverses = tuple(inverses) if inverses is not None else tuple(f"{x}^-1" for x in letters)
        if len(inverses) != len(letters):
            raise AlgebraError("free group needs one inverse label per letter")
        object.__setattr__(self, "letters", letters)
        object.__setattr__(self, "inverses", inverses)


@dataclass(frozen=True)
class FiniteMonoid:
    """Finite monoid given by its elements (unit included) and a full
    row-major multiplication table over element labels."""

    elements: tuple[str, ...]
    table: tuple[tuple[str, ...], ...]

    def __init__(self, elements: Iterable[str], table: Sequence[Sequence[str]]):
        object.__setattr__(self, "elements", tuple(elements))
        object.__setattr__(self, "table", tuple(tuple(row) for row in table))

    def unit(self) -> str:
        els = self.elements
        idx = {e: i for i, e in enumerate(els)}
        for e in els:
            i = idx[e]
            if all(self.table[i][idx[x]] == x and self.table[idx[x]][i] == x for x in els):
                return e
        raise AlgebraError(f"finite monoid {els} has no unit element")

    def is_group(self) -> bool:
        u = self.unit()
        return all(any(self.table[i][j] == u for j in range(len(self.elements)))
                   for i in range(len(self.elements)))


def cyclic_group(n: int, name: str) -> FiniteMonoid:
    """Z/nZ with elements ``1, name, name^2, ...``."""
    labels = ["1"] + [name if k == 1 else f"{name}^{k}" for k in range(1, n)]
    table = [[labels[(i + j) % n] for j in range(n)] for i in range(n)]
    return FiniteMonoid(labels, table)


def idempotent_monoid(name: str) -> FiniteMonoid:
    """The two-element monoid {1, b} with b*b = b."""
    return FiniteMonoid(["1", name], [["1", name], [name, name]])


# -- the pair ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PairSpec:
    """A generator alphabet with its partial product table.

    ``right[a]`` is the set of ``b`` with ``a*b`` irreducible and ``left[a]``
    the set of ``b`` with ``b*a`` irreducible. For plain pairs both agree
    and equal ``Next(a)``.
    """

    labels: tuple[str, ...]
    table: np.ndarray
    is_plain: bool
    excluded_case: Excluded | None = None
    left: tuple[frozenset, ...] = field(init=False)
    right: tuple[frozenset, ...] = field(init=False)

    def __post_init__(self):
        t = np.array(self.table, dtype=np.int64)
        n = len(self.labels)
        if t.shape != (n, n):
            raise AlgebraError(f"table shape {t.shape} does not match |Sigma|={n}")
        if len(set(self.labels)) != n:
            raise AlgebraError(f"duplicate generator labels in {self.labels}")
        if ((t < IRREDUCIBLE_CODE) | (t >= n)).any():
            raise AlgebraError("table entries must be letter indices or reduction codes")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)
        irr = t == IRREDUCIBLE_CODE
        object.__setattr__(self, "right", tuple(frozenset(np.flatnonzero(irr[a]).tolist()) for a in range(n)))
        object.__setattr__(self, "left", tuple(frozenset(np.flatnonzero(irr[:, a]).tolist()) for a in range(n)))

    def __len__(self):
        return len(self.labels)

    def __eq__(self, other):
        if not isinstance(other, PairSpec):
            return NotImplemented
        return (self.labels == other.labels and np.array_equal(self.table, other.table)
                and self.is_plain == other.is_plain and self.excluded_case == other.excluded_case)

    def __hash__(self):
        return hash((self.labels, self.table.tobytes()))

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise AlgebraError(f"unknown generator {label!r}") from None

    def word(self, labels: Iterable[str] | str) -> Word:
        """Letter indices for a sequence of labels (or a whitespace-separated string)."""
        if isinstance(labels, str):
            labels = labels.split()
        return tuple(self.index(x) for x in labels)

    def format(self, w: Iterable[int]) -> str:
        w = tuple(w)
        return " ".join(self.labels[a] for a in w) if w else "1"

    @property
    def right_matrix(self) -> np.ndarray:
        """0/1 matrix with ``[a, b] = 1`` iff ``b`` is in ``right[a]``."""
        return (self.table == IRREDUCIBLE_CODE).astype(float)

    @property
    def next_sets(self) -> tuple[frozenset, ...]:
        if self.left != self.right:
            raise AlgebraError("Next sets are only defined when Left = Right")
        return self.right


def _validate_finite(f: FiniteMonoid) -> dict[str, int]:
    els = f.elements
    if len(set(els)) != len(els):
        raise AlgebraError(f"duplicate elements in finite monoid {els}")
    idx = {e: i for i, e in enumerate(els)}
    if len(f.table) != len(els) or any(len(row) != len(els) for row in f.table):
        raise AlgebraError("finite monoid table must be total (|X| x |X|)")
    for row in f.table:
        for v in row:
            if v not in idx:
                raise AlgebraError(f"table entry {v!r} is not an element of {els}")
    mul = [[idx[v] for v in row] for row in f.table]
    n = len(els)
    for a, b, c in itertools.product(range(n), repeat=3):
        if mul[mul[a][b]][c] != mul[a][mul[b][c]]:
            raise AlgebraError(f"finite monoid table is not associative at ({els[a]}, {els[b]}, {els[c]})")
    return idx


def build_pair(factors: Sequence[FreeMonoid | FreeGroup | FiniteMonoid]) -> PairSpec:
    """Natural generators and product table of a plain monoid (free product of the factors)."""
    if not factors:
        raise AlgebraError("at least one factor is required")
    labels: list[str] = []
    entries: list[tuple[int, int, int]] = []
    n_free_letters = 0
    n_group_letters = 0
    finite_sizes: list[tuple[int, bool]] = []
    for f in factors:
        if isinstance(f, FreeMonoid):
            labels.extend(f.letters)
            n_free_letters += len(f.letters)
        elif isinstance(f, FreeGroup):
            for x, xi in zip(f.letters, f.inverses):
                i = len(labels)
                labels.extend([x, xi])
                entries += [(i, i + 1, IDENTITY_CODE), (i + 1, i, IDENTITY_CODE)]
            n_group_letters += len(f.letters)
        elif isinstance(f, FiniteMonoid):
            idx = _validate_finite(f)
            unit = f.unit()
            offset = len(labels)
            nonunit = [e for e in f.elements if e != unit]
            pos = {e: offset + k for k, e in enumerate(nonunit)}
            labels.extend(nonunit)
            for a, b in itertools.product(nonunit, repeat=2):
                c = f.table[idx[a]][idx[b]]
                entries.append((pos[a], pos[b], IDENTITY_CODE if c == unit else pos[c]))
            if nonunit:
                finite_sizes.append((len(f.elements), f.is_group()))
        else:
            raise AlgebraError(f"unknown factor type {type(f).__name__}")
    if len(set(labels)) != len(labels):
        raise AlgebraError(f"duplicate generator labels across factors: {labels}")
    if not labels:
        raise AlgebraError("the monoid is trivial (no generators)")
    n = len(labels)
    table = np.full((n, n), IRREDUCIBLE_CODE, dtype=np.int64)
    for a, b, c in entries:
        table[a, b] = c

    excluded = None
    if n_free_letters == 0 and n_group_letters == 0:
        if len(finite_sizes) <= 1:
            excluded = Excluded.FINITE
        elif len(finite_sizes) == 2 and all(s == (2, True) for s in finite_sizes):
            excluded = Excluded.ISOMORPHIC_TO_Z2_STAR_Z2
    elif n_free_letters == 0 and n_group_letters == 1 and not finite_sizes:
        excluded = Excluded.ISOMORPHIC_TO_Z
    return PairSpec(tuple(labels), table, is_plain=excluded is None, excluded_case=excluded)


def _cell_code(value, lookup: Mapping[str, int]) -> int:
    if isinstance(value, Reduction):
        if value.kind is Kind.IDENTITY:
            return IDENTITY_CODE
        if value.kind is Kind.IRREDUCIBLE:
            return IRREDUCIBLE_CODE
        return int(value.letter)
    value = str(value)
    if value == "1":
        return IDENTITY_CODE
    if value == "*":
        return IRREDUCIBLE_CODE
    if value not in lookup:
        raise AlgebraError(f"table cell {value!r} is neither '1', '*' nor a generator")
    return lookup[value]


def build_custom_pair(sigma: Sequence[str], table) -> PairSpec:
    """A 0-automatic pair given by an explicit product table on generators.

    ``table`` is either a row-major nested sequence or a mapping
    ``(a, b) -> cell`` over labels; cells are ``"1"``, ``"*"``, a label or
    a :class:`Reduction`. Only necessary conditions are checked: the
    Left/Right compatibility of letter products and associativity on
    triples whose two adjacent products both reduce. Custom pairs are
    never flagged plain.
    """
    sigma = tuple(sigma)
    if not sigma:
        raise AlgebraError("empty alphabet")
    if len(set(sigma)) != len(sigma):
        raise AlgebraError(f"duplicate generator labels in {sigma}")
    lookup = {x: i for i, x in enumerate(sigma)}
    n = len(sigma)
    codes = np.empty((n, n), dtype=np.int64)
    if isinstance(table, Mapping):
        for a, b in itertools.product(sigma, repeat=2):
            if (a, b) not in table:
                raise AlgebraError(f"table is missing the product ({a}, {b})")
            codes[lookup[a], lookup[b]] = _cell_code(table[(a, b)], lookup)
    else:
        rows = list(table)
        if len(rows) != n or any(len(r) != n for r in rows):
            raise AlgebraError("table must be |Sigma| x |Sigma|")
        for i, row in enumerate(rows):
            for j, v in enumerate(row):
                codes[i, j] = _cell_code(v, lookup)
    pair = PairSpec(sigma, codes, is_plain=False)
    _check_zero_automatic(pair)
    return pair


def _product_word(pair: PairSpec, a: int, b: int) -> Word:
    c = pair.table[a, b]
    if c == IDENTITY_CODE:
        return ()
    if c == IRREDUCIBLE_CODE:
        return (a, b)
    return (int(c),)


def _check_zero_automatic(pair: PairSpec) -> None:
    t = pair.table
    n = pair.size
    for a, b in itertools.product(range(n), repeat=2):
        c = t[a, b]
        if c >= 0:
            if pair.left[c] != pair.left[a] or pair.right[c] != pair.right[b]:
                raise AlgebraError(
                    f"{pair.labels[a]}*{pair.labels[b]}={pair.labels[c]} violates "
                    "Left(a*b)=Left(a), Right(a*b)=Right(b)")
    for a, b, c in itertools.product(range(n), repeat=3):
        if t[a, b] == IRREDUCIBLE_CODE or t[b, c] == IRREDUCIBLE_CODE:
            continue
        lhs = _mul_word(pair, _product_word(pair, a, b), c)
        rhs = _mul_word_left(pair, a, _product_word(pair, b, c))
        if lhs != rhs:
            raise AlgebraError(
                f"associativity fails on ({pair.labels[a]}, {pair.labels[b]}, {pair.labels[c]}): "
                f"{pair.format(lhs)} != {pair.format(rhs)}")


def _mul_word(pair: PairSpec, w: Word, c: int) -> Word:
    """Normal form of ``w*c`` for a normal word ``w`` (right multiplication)."""
    if not w:
        return (c,)
    code = pair.table[w[-1], c]
    if code == IDENTITY_CODE:
        return w[:-1]
    if code == IRREDUCIBLE_CODE:
        return w + (c,)
    return w[:-1] + (int(code),)


def _mul_word_left(pair: PairSpec, a: int, w: Word) -> Word:
    return arrive(pair, w, a)


# -- operations --------------------------------------------------------------


def product(pair: PairSpec, a: int, b: int) -> Reduction:
    return Reduction.from_code(int(pair.table[a, b]))


def neighbor_sets(pair: PairSpec, a: int) -> tuple[frozenset, frozenset]:
    """``(Left(a), Right(a))``."""
    return pair.left[a], pair.right[a]


def arrive(pair: PairSpec, w: Word, b: int) -> Word:
    """Buffer content after a class-``b`` customer arrives at the back-end."""
    if not w:
        return (b,)
    code = pair.table[b, w[0]]
    if code == IRREDUCIBLE_CODE:
        return (b,) + w
    if code == IDENTITY_CODE:
        return w[1:]
    return (int(code),) + w[1:]


def serve(pair: PairSpec, w: Word) -> Word:
    """Buffer content after the front-end customer completes service."""
    if not w:
        raise AlgebraError("cannot serve an empty buffer")
    return w[:-1]


def is_normal(pair: PairSpec, letters: Sequence[int]) -> bool:
    n = pair.size
    for x in letters:
        if not (0 <= x < n):
            raise AlgebraError(f"unknown letter index {x}")
    t = pair.table
    return all(t[x, y] == IRREDUCIBLE_CODE for x, y in zip(letters, letters[1:]))


def successor_strongly_connected(pair: PairSpec) -> bool:
    """Strong connectivity of the graph with arcs ``a -> b`` for ``b`` in Right(a)."""
    n = pair.size

    def reach(adj) -> set:
        seen = {0}
        stack = [0]
        while stack:
            a = stack.pop()
            for b in adj[a]:
                if b not in seen:
                    seen.add(b)
                    stack.append(b)
        return seen

    forward = pair.right
    backward = [frozenset(a for a in range(n) if b in pair.right[a]) for b in range(n)]
    return len(reach(forward)) == n and len(reach(backward)) == n
