"""
Blender Curve Chase
Follow a curve close to a strong-stable leaf through K: at every depth pick
the witness piece for the curve's wall crossing, keep the part of the curve
inside the piece's cylinder and pull it back to the next leaf. The nested
cylinders shrink to a point of the curve on the unstable set.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from geometry.recurrence_check import find_witness
from model.horseshoe import WALL_S, HorseshoeModel, apply, apply_inverse, cylinder_box
from model.intervals import Interval
from stacking.candidate import CandidateK
from symbolic.subshift import SYMBOL_CHARS, Word

logger = logging.getLogger(__name__)

_EDGE_TOL = 1e-9


class ChaseFailed(RuntimeError):
    """No witness cylinder meets the curve at ``depth``."""

    def __init__(self, depth: int, reason: str):
        super().__init__(f"chase failed at depth {depth}: {reason}")
        self.depth = depth
        self.reason = reason


@dataclass
class Curve:
    """Graph w = w(s) over an s-interval, as a polyline in a stable leaf"""
    s: np.ndarray
    w: np.ndarray
    u: float = 0.5

    @classmethod
    def line(cls, w0: float, slope: float, u: float = 0.5, nodes: int = 65) -> "Curve":
        s = np.linspace(0.0, 1.0, nodes)
        return cls(s, w0 + slope * (s - WALL_S), u)

    def crossing(self) -> float:
        """w where the curve meets the wall s = ½"""
        return float(np.interp(WALL_S, self.s, self.w))

    def clip(self, s_range: Interval, nodes: int) -> Optional["Curve"]:
        lo, hi = max(s_range.lower, self.s[0]), min(s_range.upper, self.s[-1])
        if hi <= lo:
            return None
        s = np.linspace(lo, hi, nodes)
        return Curve(s, np.interp(s, self.s, self.w), self.u)

    @property
    def slope(self) -> float:
        return float(np.max(np.abs(np.diff(self.w) / np.diff(self.s))))


@dataclass
class ChaseResult:
    itinerary: List[Tuple[int, ...]]
    crossings: List[float]
    limit_point: np.ndarray
    diameter: float
    slopes: List[float] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.itinerary)

    @property
    def letters(self) -> Tuple[int, ...]:
        return tuple(a for word in self.itinerary for a in word)

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "itinerary": ["".join(SYMBOL_CHARS[a - 1] for a in w) for w in self.itinerary],
            "limit_point": [float(v) for v in self.limit_point],
            "diameter": self.diameter,
        }


def _pull_back(model: HorseshoeModel, gamma, curve: Curve, letter: int) -> Curve:
    if gamma is None:
        s = np.asarray(model.s_map_inverse(letter, curve.s))
        w = np.asarray(model.w_map_inverse(letter, curve.w, s))
        u = float(model.u_map_inverse(letter, curve.u))
        return Curve(s, w, u)
    points = [apply_inverse(model, gamma, (curve.u, w, s), letter) for w, s in zip(curve.w, curve.s)]
    pts = np.array(points)
    return Curve(pts[:, 2], pts[:, 1], float(pts[0, 0]))


def blender_curve_chase(
    model: HorseshoeModel,
    gamma,
    curve: Curve,
    block: Tuple[int, ...],
    K: CandidateK,
    max_depth: int,
    max_len: int = 2,
    nodes: int = 65,
    leaf_depth: int = 32,
    rule: str = "max-margin",
) -> ChaseResult:
    """
    Chase ``curve`` (in a leaf of ``block``) through K to ``max_depth``.

    Raises:
        ChaseFailed: when no witness exists or the curve misses its cylinder
    """
    leaf = model.leaf(block)
    itinerary: List[Tuple[int, ...]] = []
    crossings: List[float] = []
    slopes = [curve.slope]
    for depth in range(1, max_depth + 1):
        x = curve.crossing()
        crossings.append(x)
        witness = find_witness(model, gamma, K, leaf.letters, Interval(x, x), max_len, leaf=leaf, rule=rule)
        if witness is None:
            raise ChaseFailed(depth, f"no witness for w={x:.6g} in leaf {leaf.suffix}")
        word = witness.word
        box = cylinder_box(model, Word.forward(word))
        clipped = curve.clip(box.s, nodes)
        if clipped is None:
            raise ChaseFailed(depth, f"curve misses the s-range of cylinder {Word.forward(word)}")
        inside = (clipped.w >= box.w.lower - _EDGE_TOL) & (clipped.w <= box.w.upper + _EDGE_TOL)
        if not inside.all():
            raise ChaseFailed(depth, f"curve leaves the w-range of cylinder {Word.forward(word)}")
        for letter in word:
            clipped = _pull_back(model, gamma, clipped, letter)
        curve = clipped
        slopes.append(curve.slope)
        itinerary.append(word)
        leaf = model.extend_leaf(leaf, Word.forward(word), leaf_depth)

    letters = tuple(a for w in itinerary for a in w)
    point = np.array([curve.u, curve.crossing(), WALL_S])
    for letter in reversed(letters):
        point = model.base_map(letter, point) if gamma is None else apply(model, gamma, point)
    diameter = cylinder_box(model, Word.forward(letters)).w.length
    logger.info("chase reached depth %d with %d letters, diameter %.3g", max_depth, len(letters), diameter)
    return ChaseResult(itinerary, crossings, point, diameter, slopes)


def itinerary_of(model: HorseshoeModel, point: Sequence[float], length: int) -> Tuple[int, ...]:
    """Branches of the first ``length`` backward steps, read from the disjoint s-images"""
    p = np.asarray(point, dtype=float)
    letters = []
    for _ in range(length):
        branch = model.image_branch(p)
        if branch is None:
            break
        letters.append(branch)
        p = model.base_inverse(branch, p)
    return tuple(letters)
