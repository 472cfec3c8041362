"""
Recurrence Filters
(α,β)-non-recurrence of words and leaves, and the census of μ⁻-mass on
leaf blocks that contain a repeated factor.

Words are scanned as symbol strings (``Word.encode``); repetitions are found
with back-referencing regular expressions.
"""
import logging
import re
import threading
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from model.horseshoe import HorseshoeModel
from model.pieces import leaf_blocks_at_scale
from symbolic.subshift import SYMBOL_CHARS, LeafApprox, Word

logger = logging.getLogger(__name__)


class InsufficientDepth(ValueError):
    """Leaf truncation is shorter than the requested window."""


def _encode(letters: Sequence[int]) -> str:
    return "".join(SYMBOL_CHARS[a - 1] for a in letters)


class RecurrencePatterns:
    """
    Compiled pattern table, one entry per factor length.

    ``repeated`` matches a position whose m-letter factor occurs again later
    (overlaps allowed).
    """

    REPEATED_FACTOR = r"(?=(.{%d})).(?=.*\1)"

    def __init__(self):
        self._repeated: Dict[int, re.Pattern] = {}
        self._lock = threading.RLock()

    def repeated(self, m: int) -> re.Pattern:
        if m < 1:
            raise ValueError("factor length must be at least 1")
        with self._lock:
            if m not in self._repeated:
                self._repeated[m] = re.compile(self.REPEATED_FACTOR % m, re.DOTALL)
            return self._repeated[m]

    def occurrences(self, text: str, factor: str) -> int:
        """Overlapping occurrences of ``factor`` in ``text``"""
        return len(re.findall("(?=%s)" % re.escape(factor), text))

    def has_repeated_factor(self, text: str, m: int) -> bool:
        return self.repeated(m).search(text) is not None


def has_repeated_factor(letters: Sequence[int], m: int) -> bool:
    """True when some factor of m letters occurs twice (possibly overlapping)"""
    if m > len(letters):
        return False
    return recurrence_patterns.has_repeated_factor(_encode(letters), m)


def is_nonrecurrent_word(leaf: LeafApprox, word: Word, alpha: int, beta: int) -> bool:
    """
    The final ``alpha`` letters of the leaf do not occur anywhere else in the
    last ``beta`` letters of the leaf followed by the word.

    Raises:
        InsufficientDepth: if the leaf has fewer than ``beta`` letters
    """
    window = _leaf_window(leaf, alpha, beta)
    text = _encode(window + word.letters)
    return recurrence_patterns.occurrences(text, _encode(window[-alpha:])) == 1


def is_nonrecurrent_leaf(leaf: LeafApprox, alpha: int, beta: int) -> bool:
    """
    The final ``alpha`` letters occur only once in the last ``beta`` letters.

    Raises:
        InsufficientDepth: if the leaf has fewer than ``beta`` letters
    """
    window = _leaf_window(leaf, alpha, beta)
    return recurrence_patterns.occurrences(_encode(window), _encode(window[-alpha:])) == 1


def is_never_recurrent(leaf: LeafApprox, alphas: Sequence[int]) -> bool:
    """Non-recurrent at every listed scale, each against the full truncation"""
    return all(is_nonrecurrent_leaf(leaf, a, leaf.depth) for a in alphas if a <= leaf.depth)


def _leaf_window(leaf: LeafApprox, alpha: int, beta: int) -> Tuple[int, ...]:
    if alpha < 1 or beta < alpha:
        raise ValueError("need 1 <= alpha <= beta")
    if leaf.depth < beta:
        raise InsufficientDepth(f"leaf has {leaf.depth} letters, window needs {beta}")
    return leaf.letters[-beta:]


def factor_length(model: HorseshoeModel, scale: float, c1: Optional[float] = None) -> int:
    """Shortest leaf-block length at unstable scale ``scale``"""
    return min(len(b) for b in leaf_blocks_at_scale(model, scale, c1))


@dataclass
class CensusResult:
    fraction: float
    block_length: int
    factor_length: int
    n_blocks: int
    n_recurrent: int

    def to_dict(self) -> dict:
        return {
            "fraction": self.fraction,
            "block_length": self.block_length,
            "factor_length": self.factor_length,
            "n_blocks": self.n_blocks,
            "n_recurrent": self.n_recurrent,
        }


def recurrent_census(
    model: HorseshoeModel,
    measure,
    rho: float,
    c: float,
    k: int,
    c14: float = 1.0,
    c1: Optional[float] = None,
) -> CensusResult:
    """
    μ⁻-mass of the leaf blocks at unstable scale ½c₁₄ρ whose backward word
    contains a repeated factor of the block length at scale ρ^{c/k}. Exact,
    by enumerating every block.
    """
    blocks = leaf_blocks_at_scale(model, 0.5 * c14 * rho, c1)
    m = factor_length(model, rho ** (c / k), c1)
    weights = np.array([measure.cylinders(np.array([b], dtype=np.int64))[0] for b in blocks])
    recurrent = np.array([has_repeated_factor(b, m) for b in blocks])
    fraction = float(weights[recurrent].sum() / weights.sum())
    result = CensusResult(fraction, max(len(b) for b in blocks), m, len(blocks), int(recurrent.sum()))
    logger.info(
        "recurrence census of %s at rho=%.3g: %d of %d blocks recurrent, mass %.4f",
        model.name, rho, result.n_recurrent, result.n_blocks, fraction,
    )
    return result


recurrence_patterns = RecurrencePatterns()
