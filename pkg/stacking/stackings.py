"""
Stackings
Pieces of one leaf grouped by the fundamental interval I_i = [(i−1)ρ, iρ]
their projection meets; the first stacking at a coarse scale and the
well-distributed stacking at the fine scale built on top of it.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from model.horseshoe import HorseshoeModel
from model.intervals import Interval, measure, merge
from model.pieces import Piece, cylinders_at_scale, pieces_at_scale
from stacking.recurrence import factor_length, is_nonrecurrent_word
from symbolic.subshift import LeafApprox

logger = logging.getLogger(__name__)


class EmptyStacking(ValueError):
    """Every fundamental interval fell below the stack-size threshold."""


def fundamental_interval(index: int, rho: float) -> Interval:
    return Interval((index - 1) * rho, index * rho)


def fundamental_index(x: float, rho: float) -> int:
    return int(math.floor(x / rho)) + 1


@dataclass
class StackingSet:
    leaf: LeafApprox
    scale: float
    stacks: Dict[int, List[Piece]]
    relaxation: float = 1.0
    parents: Dict[int, int] = field(default_factory=dict)
    target: Optional[float] = None
    discarded: int = 0

    @property
    def n_pieces(self) -> int:
        return sum(len(s) for s in self.stacks.values())

    def interval(self, index: int) -> Interval:
        return fundamental_interval(index, self.scale)

    def union(self, indices: Optional[Sequence[int]] = None) -> List[Interval]:
        indices = sorted(self.stacks) if indices is None else indices
        return merge(self.interval(i) for i in indices)

    def well_distributed(self) -> List[int]:
        """Stacks whose distinct-parent count reaches the target"""
        if self.target is None:
            return sorted(self.stacks)
        return sorted(i for i in self.stacks if self.parents.get(i, 0) >= self.target)

    @property
    def shortfall(self) -> int:
        return len(self.stacks) - len(self.well_distributed())

    def check(self) -> None:
        """Disjoint stacks whose pieces all meet their relaxed fundamental interval"""
        seen = set()
        for i, stack in self.stacks.items():
            relaxed = self.interval(i).scaled(self.relaxation)
            for p in stack:
                if p.word in seen:
                    raise AssertionError(f"piece {p.word} is in two stacks")
                seen.add(p.word)
                if p.interval.upper < relaxed.lower or p.interval.lower > relaxed.upper:
                    raise AssertionError(f"piece {p.word} misses its fundamental interval {i}")

    def to_dict(self) -> dict:
        return {
            "leaf": self.leaf.suffix.encode(),
            "scale": self.scale,
            "relaxation": self.relaxation,
            "stacks": {str(i): len(s) for i, s in sorted(self.stacks.items())},
            "parents": {str(i): n for i, n in sorted(self.parents.items())},
            "target": self.target,
            "discarded": self.discarded,
            "measure": measure(self.union()),
        }


def build_stackings(
    pieces: Sequence[Piece],
    rho: float,
    min_size: int,
    relaxation: float = 1.0,
) -> StackingSet:
    """
    One stack per fundamental interval, each piece going to the interval
    that holds its midpoint; intervals with fewer than ``min_size`` pieces
    are discarded.

    Raises:
        EmptyStacking: if no interval keeps ``min_size`` pieces
    """
    if not pieces:
        raise EmptyStacking("no pieces to stack")
    if relaxation < 1.0:
        raise ValueError("relaxation must be at least 1")
    grouped: Dict[int, List[Piece]] = {}
    for p in pieces:
        grouped.setdefault(fundamental_index(p.interval.midpoint, rho), []).append(p)
    stacks = {i: s for i, s in grouped.items() if len(s) >= min_size}
    if not stacks:
        raise EmptyStacking(f"no fundamental interval holds {min_size} pieces (max {max(map(len, grouped.values()))})")
    discarded = len(pieces) - sum(len(s) for s in stacks.values())
    logger.debug("stacking at rho=%.4g: %d of %d intervals kept, %d pieces discarded", rho, len(stacks), len(grouped), discarded)
    return StackingSet(pieces[0].leaf, rho, stacks, relaxation, discarded=discarded)


def first_stacking_threshold(rho: float, c: float, k: int, d: float, q_tilde: float) -> int:
    """Q̃·ρ^{−(c/k)(d−1)}, at least one piece"""
    return max(1, int(math.ceil(q_tilde * rho ** (-(c / k) * (d - 1.0)))))


def substacking_cap(rho: float, c: float, k: int, d: float) -> int:
    """Largest number of pieces one parent may put into a stack: ρ^{−(1−c/k)(d−1)}"""
    return max(1, int(math.ceil(rho ** (-(1.0 - c / k) * (d - 1.0)))))


def leaf_pieces(
    model: HorseshoeModel,
    leaf: LeafApprox,
    rho: float,
    c1: Optional[float] = None,
    system=None,
    gamma=None,
) -> List[Piece]:
    """Pieces at scale ρ, projected by a Marstrand function system when one is given"""
    if system is None:
        return pieces_at_scale(model, leaf, rho, c1, gamma)
    words = cylinders_at_scale(model, rho, c1, leaf=leaf)
    pieces = []
    for w in words:
        pieces.append(Piece(leaf, w, system.interval(w.letters), rho))
    return pieces


def build_well_distributed(
    model: HorseshoeModel,
    leaf: LeafApprox,
    rho: float,
    c: float,
    k: int,
    d: float,
    q_tilde: float = 0.5,
    c24: float = 0.5,
    c25: float = 3.0,
    c1: Optional[float] = None,
    system=None,
) -> StackingSet:
    """
    Stacks of scale-ρ pieces drawn from many scale-ρ^{c/k} parents: a first
    stacking of the parents, then inside each kept parent the non-recurrent
    children, at most ``cap`` per parent and stack. The distinct-parent count
    of every stack is recorded against c₂₄ρ^{−(c/k)(d−1)}; shortfalls are
    reported, not raised.

    Raises:
        EmptyStacking: if the first stacking is empty
    """
    beta = rho ** (c / k)
    parents = leaf_pieces(model, leaf, beta, c1, system)
    first = build_stackings(parents, beta, first_stacking_threshold(rho, c, k, d, q_tilde), relaxation=c25)
    kept_parents = {p.word.letters for stack in first.stacks.values() for p in stack}

    m = factor_length(model, beta, c1)
    cap = substacking_cap(rho, c, k, d)
    target = c24 * rho ** (-(c / k) * (d - 1.0))

    lengths = sorted({len(w) for w in kept_parents})
    stacks: Dict[int, List[Piece]] = {}
    per_parent: Dict[Tuple[int, Tuple[int, ...]], int] = {}
    discarded = 0
    for child in leaf_pieces(model, leaf, rho, c1, system):
        letters = child.word.letters
        parent = next((letters[:n] for n in lengths if letters[:n] in kept_parents), None)
        if parent is None:
            continue
        if leaf.depth < m or not is_nonrecurrent_word(leaf, child.word, m, leaf.depth):
            discarded += 1
            continue
        i = fundamental_index(child.interval.midpoint, rho)
        if per_parent.get((i, parent), 0) >= cap:
            discarded += 1
            continue
        per_parent[(i, parent)] = per_parent.get((i, parent), 0) + 1
        stacks.setdefault(i, []).append(child)

    if not stacks:
        raise EmptyStacking(f"no non-recurrent children survive in leaf {leaf.suffix}")
    parent_counts: Dict[int, int] = {}
    for i, _ in per_parent:
        parent_counts[i] = parent_counts.get(i, 0) + 1
    result = StackingSet(leaf, rho, stacks, 1.0, parent_counts, target, discarded)
    if result.shortfall:
        logger.warning(
            "well-distributed stacking in leaf %s: %d of %d stacks below %.2f distinct parents",
            leaf.suffix, result.shortfall, len(stacks), target,
        )
    return result
