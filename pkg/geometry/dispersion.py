"""
Dispersion of piece displacements
Finite-difference derivative of a piece's projected endpoint with respect to
one block coordinate, checked against the band λ^j·c₃ρ set by the time j at
which the piece enters the block (zero when it never does).
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import settings
from model.horseshoe import HorseshoeModel
from model.perturbation import PerturbationFamily
from model.pieces import cylinders_at_scale, piece_interval
from stacking.recurrence import is_nonrecurrent_word
from symbolic.subshift import LeafApprox, Word, word_array

logger = logging.getLogger(__name__)

NEVER = "never"


class RecurrentPiece(ValueError):
    """The piece fails the (α,β)-non-recurrence precondition."""


@dataclass
class DispersionResult:
    word: Tuple[int, ...]
    block: int
    hits: List[int]
    derivative: float
    band: Tuple[float, float]

    @property
    def case(self):
        return self.hits[0] if self.hits else NEVER

    @property
    def within(self) -> bool:
        lo, hi = self.band
        if not self.hits:
            return abs(self.derivative) < hi
        return lo <= abs(self.derivative) <= hi


def dispersion_finite_difference_check(
    model: HorseshoeModel,
    family: PerturbationFamily,
    leaf: LeafApprox,
    word: Sequence[int],
    block: int,
    alpha: int,
    beta: int,
    band: Tuple[float, float] = (0.5, 2.0),
    step: Optional[float] = None,
) -> DispersionResult:
    """
    Central difference of the piece's left wall endpoint in γ_block.

    Raises:
        RecurrentPiece: if the piece is not (alpha, beta)-non-recurrent
    """
    word = tuple(word)
    if not is_nonrecurrent_word(leaf, Word.forward(word), alpha, beta):
        raise RecurrentPiece(f"piece {Word.forward(word)} in leaf {leaf.suffix} recurs at ({alpha},{beta})")
    h = settings.FD_STEP if step is None else step
    plus = piece_interval(model, leaf, Word.forward(word), family.unit(block, h)).lower
    minus = piece_interval(model, leaf, Word.forward(word), family.unit(block, -h)).lower
    derivative = (plus - minus) / (2.0 * h)

    hits = family.hit_times(leaf.letters, word, block)
    amp = family.amplitude
    if hits:
        j = hits[0]
        bounds = (band[0] * model.min_rate_ws ** j * amp, band[1] * model.max_rate_ws ** j * amp)
    else:
        bounds = (0.0, 1e-8 * amp)
    result = DispersionResult(word, block, hits, float(derivative), bounds)
    logger.debug("dispersion of %s at block %d: %.4g (hits %s)", Word.forward(word), block, derivative, hits)
    return result


@dataclass
class DispersionSurvey:
    results: Dict[object, List[DispersionResult]]

    def fraction_within(self, case) -> float:
        rs = self.results.get(case, [])
        return sum(r.within for r in rs) / len(rs) if rs else float("nan")

    def to_dict(self) -> dict:
        return {
            str(case): {
                "n": len(rs),
                "fraction_within": self.fraction_within(case),
                "derivatives": [r.derivative for r in rs],
            }
            for case, rs in self.results.items()
        }


def dispersion_survey(
    model: HorseshoeModel,
    family: PerturbationFamily,
    rho: float,
    cases: Sequence[int] = (0, 1, 2),
    n_per_case: int = 100,
    alpha: int = 2,
    seed: int = 0,
    c1: Optional[float] = None,
    max_tries: int = 50,
) -> DispersionSurvey:
    """
    Sample non-recurrent pieces at scale ρ, pair each with a block it first
    enters at step j for every j in ``cases`` and with a block it never
    enters, and collect the checks.
    """
    rng = np.random.default_rng(seed)
    depth = max(len(code) for code in {b.leaf for b in family.blocks}) + alpha
    leaves = [tuple(r) for r in word_array(model.subshift, depth).tolist()]
    results: Dict[object, List[DispersionResult]] = {case: [] for case in cases}
    results[NEVER] = []

    for _ in range(n_per_case * max_tries):
        if all(len(rs) >= n_per_case for rs in results.values()):
            break
        leaf = model.leaf(leaves[int(rng.integers(len(leaves)))])
        words = cylinders_at_scale(model, rho, c1, leaf=leaf)
        word = words[int(rng.integers(len(words)))].letters
        if not is_nonrecurrent_word(leaf, Word.forward(word), alpha, depth):
            continue
        steps = [family.block_of(leaf.letters + word[:j], word[j:]) for j in range(len(word))]
        for case in cases:
            if case < len(steps) and steps[case] is not None and len(results[case]) < n_per_case:
                idx = steps[case]
                if family.hit_times(leaf.letters, word, idx)[0] == case:
                    results[case].append(dispersion_finite_difference_check(model, family, leaf, word, idx, alpha, depth))
        if len(results[NEVER]) < n_per_case:
            idx = int(rng.integers(family.n_params))
            if idx not in steps:
                results[NEVER].append(dispersion_finite_difference_check(model, family, leaf, word, idx, alpha, depth))

    short = {str(c): len(rs) for c, rs in results.items() if len(rs) < n_per_case}
    if short:
        logger.warning("dispersion survey fell short of %d samples: %s", n_per_case, short)
    return DispersionSurvey(results)
