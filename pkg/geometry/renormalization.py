"""
Renormalization
R^γ_a̲(x, θ⁻): pull a wall point of leaf θ⁻ back along the piece a̲ to the
wall of leaf θ⁻a̲. Points outside the open piece interval map to ``OUTSIDE``.

An optional ``WallJitter`` adds a C¹-small term δ·a_b·sin(x + φ_b) to every
one-letter wall map; the robustness check re-evaluates witnesses with it.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from model.foliation import WallPoint
from model.horseshoe import HorseshoeModel
from model.intervals import Interval
from model.pieces import step_shifts, wall_step, wall_step_inverse
from symbolic.subshift import LeafApprox, Word

logger = logging.getLogger(__name__)


class _Outside:
    """The point does not lie in the interior of the piece"""
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "OUTSIDE"

    def __bool__(self) -> bool:
        return False


OUTSIDE = _Outside()


def is_outside(value) -> bool:
    return value is OUTSIDE


@dataclass(frozen=True)
class WallJitter:
    """C¹ perturbation of size δ of the one-letter wall maps"""
    delta: float
    amplitudes: np.ndarray = field(repr=False)
    phases: np.ndarray = field(repr=False)

    @classmethod
    def sample(cls, model: HorseshoeModel, delta: float, rng: np.random.Generator) -> "WallJitter":
        if delta < 0.0:
            raise ValueError("delta must be non-negative")
        lam = model.arr("lam") - np.abs(model.arr("bend")) - 0.5 * np.abs(model.arr("shear"))
        if delta >= lam.min():
            raise ValueError(f"delta {delta} would break monotonicity of the wall maps")
        n = model.n_symbols
        return cls(delta, rng.uniform(-1.0, 1.0, n), rng.uniform(0.0, 2.0 * np.pi, n))

    def value(self, letter: int, x):
        return self.delta * self.amplitudes[letter - 1] * np.sin(np.asarray(x, dtype=float) + self.phases[letter - 1])


def _step(model, letter, x, target, shift, jitter) -> float:
    y = float(wall_step(model, letter, x, target)) + shift
    if jitter is not None:
        y += float(jitter.value(letter, x))
    return y


def _inverse_step(model, letter, y, target, shift, jitter) -> Optional[float]:
    lo = _step(model, letter, 0.0, target, shift, jitter)
    hi = _step(model, letter, 1.0, target, shift, jitter)
    if not lo <= y <= hi:
        return None
    if jitter is None:
        return float(wall_step_inverse(model, letter, y - shift, target))
    return brentq(lambda x: _step(model, letter, x, target, shift, jitter) - y, 0.0, 1.0, xtol=1e-15)


def piece_image(
    model: HorseshoeModel,
    gamma,
    leaf: LeafApprox,
    letters: Sequence[int],
    jitter: Optional[WallJitter] = None,
) -> Interval:
    """Wall interval of the piece (θ⁻, a̲), jittered when asked"""
    letters = tuple(letters)
    shifts = step_shifts(gamma, leaf.letters, letters)
    lo, hi = 0.0, 1.0
    for j in range(len(letters) - 1, -1, -1):
        target = leaf.letters + letters[:j]
        lo = _step(model, letters[j], lo, target, shifts[j], jitter)
        hi = _step(model, letters[j], hi, target, shifts[j], jitter)
    return Interval(lo, hi)


def renormalize_value(
    model: HorseshoeModel,
    gamma,
    leaf: LeafApprox,
    letters: Sequence[int],
    x: float,
    jitter: Optional[WallJitter] = None,
    interval: Optional[Interval] = None,
) -> Optional[float]:
    """Wall coordinate of R_a̲(x), None outside the open piece interval"""
    letters = tuple(letters)
    interval = piece_image(model, gamma, leaf, letters, jitter) if interval is None else interval
    if not interval.interior_contains(x):
        return None
    shifts = step_shifts(gamma, leaf.letters, letters)
    y = float(x)
    for j, b in enumerate(letters):
        y = _inverse_step(model, b, y, leaf.letters + letters[:j], shifts[j], jitter)
        if y is None:
            return None
    return float(np.clip(y, 0.0, 1.0))


def renormalize(
    model: HorseshoeModel,
    gamma,
    word: Union[Word, Tuple[int, ...]],
    x: WallPoint,
    max_depth: Optional[int] = None,
) -> Union[WallPoint, _Outside]:
    """
    R^γ_a̲(x, θ⁻) on the wall of leaf θ⁻a̲, or ``OUTSIDE``.

    Raises:
        JunctionError: if the word cannot follow the leaf
    """
    word = word if isinstance(word, Word) else Word.forward(word)
    target_leaf = model.extend_leaf(x.leaf, word, max_depth)
    y = renormalize_value(model, gamma, x.leaf, word.letters, x.x)
    if y is None:
        return OUTSIDE
    return WallPoint(y, target_leaf)
