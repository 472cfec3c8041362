"""
Subshift of Finite Type
Alphabets, transition matrices, admissible words and truncated leaves.

Symbols are the integers 1..N. Forward words are read left to right from the
first iterate; backward words keep reading order (θ_{-m}, ..., θ_0), so the
letter closest to the present sits at the right end.
"""
import logging
import string
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from symbolic.budget import EnumerationBudget, enumeration_budget

logger = logging.getLogger(__name__)

# one character per symbol for string scans
SYMBOL_CHARS = string.digits[1:] + string.ascii_letters


class SymbolError(ValueError):
    """Symbol outside 1..N."""


class JunctionError(ValueError):
    """Concatenation across an inadmissible junction (not a cylinder)."""


class Orientation(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


@dataclass(frozen=True)
class TransitionMatrix:
    """0/1 transition matrix; ``entries[a-1][b-1] == 1`` allows a then b."""
    entries: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(int(v) for v in row) for row in self.entries)
        n = len(rows)
        if n == 0 or any(len(row) != n for row in rows):
            raise ValueError("transition matrix must be square and non-empty")
        if any(v not in (0, 1) for row in rows for v in row):
            raise ValueError("transition matrix entries must be 0 or 1")
        arr = np.array(rows, dtype=np.int64)
        if (arr.sum(axis=1) == 0).any() or (arr.sum(axis=0) == 0).any():
            raise ValueError("transition matrix has a dead symbol (empty row or column)")
        object.__setattr__(self, "entries", rows)

    @classmethod
    def full(cls, n_symbols: int) -> "TransitionMatrix":
        return cls(tuple(tuple(1 for _ in range(n_symbols)) for _ in range(n_symbols)))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> "TransitionMatrix":
        return cls(tuple(tuple(row) for row in rows))

    @property
    def n_symbols(self) -> int:
        return len(self.entries)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64)

    def allows(self, a: int, b: int) -> bool:
        return self.entries[a - 1][b - 1] == 1

    def successors(self, a: int) -> List[int]:
        return [b for b in range(1, self.n_symbols + 1) if self.allows(a, b)]

    def check_symbol(self, a: int) -> None:
        if not 1 <= a <= self.n_symbols:
            raise SymbolError(f"symbol {a} outside 1..{self.n_symbols}")


@dataclass(frozen=True)
class Word:
    letters: Tuple[int, ...]
    orientation: Orientation = Orientation.FORWARD

    def __post_init__(self):
        object.__setattr__(self, "letters", tuple(int(a) for a in self.letters))

    @classmethod
    def forward(cls, letters: Iterable[int]) -> "Word":
        return cls(tuple(letters), Orientation.FORWARD)

    @classmethod
    def backward(cls, letters: Iterable[int]) -> "Word":
        return cls(tuple(letters), Orientation.BACKWARD)

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def at(self, j: int) -> int:
        """Letter θ_j of a forward word (1-based) or θ_{-j} of a backward word (0-based)"""
        if self.orientation == Orientation.FORWARD:
            return self.letters[j - 1]
        return self.letters[len(self.letters) - 1 - j]

    @property
    def first(self) -> int:
        return self.letters[0]

    @property
    def last(self) -> int:
        return self.letters[-1]

    def prefix(self, m: int) -> "Word":
        return Word(self.letters[:m], self.orientation)

    def suffix(self, m: int) -> "Word":
        return Word(self.letters[len(self.letters) - m:] if m else (), self.orientation)

    def encode(self) -> str:
        """Symbol string used by the recurrence scans"""
        return "".join(SYMBOL_CHARS[a - 1] for a in self.letters)

    def to_csv(self) -> str:
        return ",".join(str(a) for a in self.letters)

    def __str__(self) -> str:
        return "(" + ",".join(str(a) for a in self.letters) + ")"


@dataclass(frozen=True)
class LeafApprox:
    """
    Finite truncation of a backward-infinite word θ⁻.

    ``error_bound`` is the half-width of the unstable interval of leaves that
    share the suffix; two truncations with equal suffixes name the same
    leaf block.
    """
    suffix: Word
    error_bound: float

    def __post_init__(self):
        if self.suffix.orientation != Orientation.BACKWARD:
            raise ValueError("leaf suffix must be a backward word")
        if len(self.suffix) == 0:
            raise ValueError("leaf suffix needs at least the final letter θ_0")
        if self.error_bound < 0:
            raise ValueError("error_bound must be non-negative")

    @property
    def depth(self) -> int:
        return len(self.suffix)

    @property
    def final_letter(self) -> int:
        return self.suffix.last

    @property
    def letters(self) -> Tuple[int, ...]:
        return self.suffix.letters

    def same_block(self, other: "LeafApprox", length: int) -> bool:
        """Suffix equality on the last ``length`` letters"""
        return self.letters[-length:] == other.letters[-length:]


def is_admissible(word: Word, A: TransitionMatrix) -> bool:
    for a in word.letters:
        A.check_symbol(a)
    return all(A.allows(a, b) for a, b in zip(word.letters, word.letters[1:]))


def mixing_exponent(A: TransitionMatrix, n_max: int) -> Optional[int]:
    """Smallest n ≤ n_max with A^n strictly positive, else None"""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    base = (A.array > 0).astype(np.int64)
    power = base.copy()
    for n in range(1, n_max + 1):
        if (power > 0).all():
            return n
        power = ((power @ base) > 0).astype(np.int64)
    return None


def connection_length(A: TransitionMatrix, n_max: int = 64) -> int:
    """Number of letters r such that any two symbols are joined by an admissible r-letter word"""
    n = mixing_exponent(A, n_max)
    if n is None:
        raise ValueError("transition matrix is not mixing")
    return n + 1


def word_array(
    A: TransitionMatrix,
    length: int,
    following: Optional[int] = None,
    budget: EnumerationBudget = enumeration_budget,
) -> np.ndarray:
    """
    All admissible forward words of ``length`` as an integer array (rows in
    lexicographic order). With ``following=k`` only words whose first letter
    may follow k are kept.
    """
    if length < 0:
        raise ValueError("length must be non-negative")
    n = A.n_symbols
    allowed = A.array.astype(bool)
    if length == 0:
        return np.zeros((1, 0), dtype=np.int16)

    first = np.arange(1, n + 1, dtype=np.int16)
    if following is not None:
        A.check_symbol(following)
        first = first[allowed[following - 1]]
    words = first.reshape(-1, 1)

    for _ in range(1, length):
        budget.charge(len(words) * n)
        rows = np.repeat(words, n, axis=0)
        nxt = np.tile(np.arange(1, n + 1, dtype=np.int16), len(words))
        keep = allowed[rows[:, -1] - 1, nxt - 1]
        words = np.hstack([rows[keep], nxt[keep].reshape(-1, 1)])
    return words


def enumerate_words(A: TransitionMatrix, length: int, following: Optional[int] = None) -> List[Word]:
    return [Word.forward(row) for row in word_array(A, length, following).tolist()]


def concat(w1: Word, w2: Word, A: TransitionMatrix) -> Word:
    if w1.orientation != w2.orientation:
        raise ValueError("cannot concatenate words of different orientation")
    if len(w1) and len(w2) and not A.allows(w1.last, w2.first):
        raise JunctionError(f"junction ({w1.last},{w2.first}) is not admissible")
    return Word(w1.letters + w2.letters, w1.orientation)


def nonrepetitive_word(
    A: TransitionMatrix,
    length: int,
    window: int,
    start: Optional[int] = None,
) -> Word:
    """
    Admissible forward word in which no factor of ``window`` letters occurs
    twice. Depth-first search in lexicographic order, so the result is
    deterministic.
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    starts = [start] if start is not None else list(range(1, A.n_symbols + 1))
    letters: List[int] = []
    seen: set = set()

    def extend() -> bool:
        if len(letters) == length:
            return True
        candidates = A.successors(letters[-1]) if letters else starts
        for b in candidates:
            letters.append(b)
            factor = tuple(letters[-window:]) if len(letters) >= window else None
            if factor is None or factor not in seen:
                if factor is not None:
                    seen.add(factor)
                if extend():
                    return True
                if factor is not None:
                    seen.discard(factor)
            letters.pop()
        return False

    if not extend():
        raise ValueError(f"no admissible word of length {length} avoids repeated {window}-factors")
    logger.debug("non-repetitive word of length %d (window %d) found", length, window)
    return Word.forward(letters)
