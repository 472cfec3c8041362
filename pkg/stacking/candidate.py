"""
Candidate Recurrent Compact
K = ∪ K_{θ⁻}: per leaf block at scale c₁₄ρ, the union of the fundamental
intervals of its well-distributed stacks. Every leaf of a block shares the
block's intervals.
"""
import json
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from joblib import Parallel, delayed

from model.horseshoe import HorseshoeModel
from model.intervals import Interval, erode, from_pairs, measure, merge, union_contains
from model.pieces import leaf_blocks_at_scale
from stacking.recurrence import factor_length, is_nonrecurrent_leaf
from stacking.stackings import EmptyStacking, StackingSet, build_well_distributed
from symbolic.subshift import SYMBOL_CHARS

logger = logging.getLogger(__name__)


class EmptyK(ValueError):
    """No leaf block kept a well-distributed stack."""


def block_key(block: Sequence[int]) -> str:
    return "".join(SYMBOL_CHARS[a - 1] for a in block)


@dataclass
class CandidateK:
    rho: float
    intervals: Dict[Tuple[int, ...], List[Interval]]
    leaf_intervals: Dict[Tuple[int, ...], Interval]
    witnesses: Dict[Tuple[int, ...], StackingSet] = field(default_factory=dict, repr=False)
    constants: Dict[str, dict] = field(default_factory=dict)

    @property
    def blocks(self) -> List[Tuple[int, ...]]:
        return sorted(self.intervals, key=lambda b: b[::-1])

    def block_of(self, letters: Sequence[int]) -> Optional[Tuple[int, ...]]:
        """The block whose backward word is a suffix of ``letters``"""
        letters = tuple(letters)
        for n in sorted({len(b) for b in self.intervals}):
            if n <= len(letters) and letters[len(letters) - n:] in self.intervals:
                return letters[len(letters) - n:]
        return None

    def for_leaf(self, letters: Sequence[int]) -> List[Interval]:
        block = self.block_of(letters)
        return [] if block is None else self.intervals[block]

    def contains(self, letters: Sequence[int], x: float) -> bool:
        return union_contains(self.for_leaf(letters), x)

    def measure(self, block: Tuple[int, ...]) -> float:
        return measure(self.intervals[block])

    def min_measure(self) -> float:
        """c₂₇: smallest per-leaf Lebesgue measure"""
        return min(self.measure(b) for b in self.intervals)

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "blocks": {
                block_key(b): {
                    "intervals": [iv.as_list() for iv in self.intervals[b]],
                    "leaf_interval": self.leaf_intervals[b].as_list(),
                }
                for b in self.blocks
            },
            "constants": self.constants,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "CandidateK":
        intervals, leaf_intervals = {}, {}
        for key, entry in data["blocks"].items():
            block = tuple(SYMBOL_CHARS.index(ch) + 1 for ch in key)
            intervals[block] = from_pairs(entry["intervals"])
            leaf_intervals[block] = Interval(*entry["leaf_interval"])
        return cls(data["rho"], intervals, leaf_intervals, constants=data.get("constants", {}))


def _block_stacking(model, block, rho, c, k, d, params, c1, system_for) -> Optional[StackingSet]:
    leaf = model.leaf(block)
    system = system_for(leaf) if system_for is not None else None
    try:
        return build_well_distributed(
            model, leaf, rho, c, k, d,
            q_tilde=params.get("q_tilde", 0.5),
            c24=params.get("c24", 0.5),
            c25=params.get("c25", 3.0),
            c1=c1,
            system=system,
        )
    except EmptyStacking as e:
        logger.debug("block %s dropped: %s", block, e)
        return None


def build_candidate_K(
    model: HorseshoeModel,
    rho: float,
    d: float,
    c: float,
    k: int,
    params: Optional[dict] = None,
    allowed_blocks: Optional[Iterable[Tuple[int, ...]]] = None,
    system_for=None,
    c1: Optional[float] = None,
    threads: int = 1,
) -> CandidateK:
    """
    K_{θ⁻} for every non-recurrent leaf block at scale c₁₄ρ (restricted to
    ``allowed_blocks`` when the Marstrand selection supplies them).
    ``system_for(leaf)`` gives the function system at t*, if any.

    Raises:
        EmptyK: if no block keeps a well-distributed stack
    """
    params = params or {}
    c14 = params.get("c14", 1.0)
    blocks = leaf_blocks_at_scale(model, c14 * rho, c1)
    if allowed_blocks is not None:
        allowed = set(map(tuple, allowed_blocks))
        blocks = [b for b in blocks if b in allowed]

    m = factor_length(model, rho ** (c / k), c1)
    good = [b for b in blocks if len(b) >= m and is_nonrecurrent_leaf(model.leaf(b), m, len(b))]
    logger.info("candidate K on %s: %d of %d leaf blocks are non-recurrent", model.name, len(good), len(blocks))

    stackings = Parallel(n_jobs=threads, prefer="threads")(
        delayed(_block_stacking)(model, b, rho, c, k, d, params, c1, system_for) for b in good
    )
    intervals, leaf_intervals, witnesses = {}, {}, {}
    for block, stacking in zip(good, stackings):
        if stacking is None:
            continue
        union = stacking.union(stacking.well_distributed())
        if not union:
            continue
        intervals[block] = union
        leaf_intervals[block] = model.leaf_u_interval(block)
        witnesses[block] = stacking
    if not intervals:
        raise EmptyK(f"no leaf block of {model.name} keeps a well-distributed stack at rho={rho}")

    K = CandidateK(rho, intervals, leaf_intervals, witnesses)
    K.constants["c27"] = {"value": K.min_measure(), "provenance": "measured"}
    for name in ("c14", "c24", "c25", "q_tilde"):
        if name in params:
            K.constants[name] = {"value": params[name], "provenance": "configured"}
    logger.info("candidate K on %s: %d blocks, min measure %.4f", model.name, len(intervals), K.min_measure())
    return K


def relaxed_interior(K: CandidateK, delta: float) -> CandidateK:
    """K₋δ: wall intervals eroded by δ, leaf intervals shrunk by δ"""
    if delta < 0.0:
        raise ValueError("delta must be non-negative")
    if delta == 0.0:
        return K
    intervals, leaf_intervals = {}, {}
    for block, ivs in K.intervals.items():
        eroded = erode(ivs, delta)
        leaf = erode([K.leaf_intervals[block]], delta)
        if eroded and leaf:
            intervals[block] = eroded
            leaf_intervals[block] = leaf[0]
    return CandidateK(K.rho, intervals, leaf_intervals, K.witnesses, dict(K.constants))


def single_block_K(rho: float, wall: Sequence[Tuple[float, float]], blocks: Iterable[Tuple[int, ...]], model: HorseshoeModel) -> CandidateK:
    """K with the same wall intervals on every listed leaf block"""
    ivs = merge(from_pairs(wall))
    blocks = list(blocks)
    return CandidateK(rho, {b: list(ivs) for b in blocks}, {b: model.leaf_u_interval(b) for b in blocks})
