"""
Perturbation Families
Block partitions Σ̃ of pieces (θ̲⁻, θ̲), the bump profile χ and parameter vectors γ.

A block pairs a leaf block (backward word at unstable scale α) with a forward
cylinder (word at weak-stable scale α̃) that may follow the leaf's final
letter. Setting coordinate γ_a displaces f(p) along the weak-stable axis by
γ_a·c₃ρ·χ(T_a(f(p))), where T_a sends the block's bounding box to [−1,1]³.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from model.horseshoe import HorseshoeModel, OutsideDomain, cylinder_box
from model.pieces import cylinders_at_scale, leaf_blocks_at_scale
from symbolic.subshift import Word, word_array

logger = logging.getLogger(__name__)


class PartitionError(ValueError):
    """Blocks do not partition the space of (leaf, word) pairs."""


def bump(r, inner: float, outer: float):
    """
    Radial profile: 1 for r ≤ inner, 0 for r ≥ outer, C^∞ and monotone
    in between.
    """
    r = np.asarray(r, dtype=float)
    tau = np.clip((r - inner) / (outer - inner), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        rise = np.where(tau > 0.0, np.exp(-1.0 / np.where(tau > 0.0, tau, 1.0)), 0.0)
        fall = np.where(tau < 1.0, np.exp(-1.0 / np.where(tau < 1.0, 1.0 - tau, 1.0)), 0.0)
    return fall / (fall + rise)


def block_scales(rho: float, k: int, c: float, kappa: float) -> Tuple[float, float]:
    """(α, α̃) = (κρ^{1/k}, ρ^{c/k})"""
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    return kappa * rho ** (1.0 / k), rho ** (c / k)


@dataclass(frozen=True)
class Block:
    index: int
    leaf: Tuple[int, ...]
    word: Tuple[int, ...]

    def __str__(self) -> str:
        return "%s|%s" % (Word.backward(self.leaf), Word.forward(self.word))


@dataclass
class _ForwardBoxes:
    """Bounding boxes of the forward words that follow one letter"""
    words: List[Tuple[int, ...]]
    center: np.ndarray     # (count, 2) in (w, s)
    half: np.ndarray       # (count, 2)


class PerturbationFamily:
    """
    Family f^γ indexed by γ ∈ [−1,1]^Σ̃.

    Blocks are looked up two ways: symbolically (``block_of``) for the wall
    function system, and geometrically (``locate``) for the map itself.
    """

    def __init__(
        self,
        model: HorseshoeModel,
        blocks: Sequence[Block],
        rho: float,
        c2: float,
        c3: float,
        leaf_scale: Optional[float] = None,
        word_scale: Optional[float] = None,
    ):
        if c2 <= 1.0:
            raise ValueError("bump plateau radius c2 must exceed 1")
        self.model = model
        self.blocks: Tuple[Block, ...] = tuple(blocks)
        self.rho = rho
        self.c2 = c2
        self.c3 = c3
        self.leaf_scale = leaf_scale
        self.word_scale = word_scale
        self._index: Dict[Tuple[Tuple[int, ...], Tuple[int, ...]], int] = {}
        for b in self.blocks:
            key = (b.leaf, b.word)
            if key in self._index:
                raise PartitionError(f"block {b} listed twice")
            self._index[key] = b.index
        self._leaf_codes = sorted({b.leaf for b in self.blocks}, key=len)
        self._leaf_set = set(self._leaf_codes)
        self._leaf_lengths = sorted({len(c) for c in self._leaf_codes})
        self._word_codes: Dict[int, set] = {}
        for b in self.blocks:
            self._word_codes.setdefault(b.leaf[-1], set()).add(b.word)
        self._word_lengths = sorted({len(b.word) for b in self.blocks})
        self.check_partition()
        self._boxes = {a: self._forward_boxes(a, codes) for a, codes in self._word_codes.items()}

    # --- partition -------------------------------------------------------

    def check_partition(self) -> None:
        """
        Every admissible backward word has exactly one leaf code as suffix,
        and every forward word after a letter has exactly one word code as
        prefix.

        Raises:
            PartitionError: naming the first word that is missed or double covered
        """
        if not self.blocks:
            raise PartitionError("empty block list")
        A = self.model.subshift
        depth = max(self._leaf_lengths)
        for row in map(tuple, word_array(A, depth).tolist()):
            hits = sum(row[len(row) - n:] in self._leaf_set for n in self._leaf_lengths)
            if hits != 1:
                raise PartitionError(f"backward word {Word.backward(row)} is covered by {hits} leaf blocks")

        for leaf in self._leaf_codes:
            codes = {b.word for b in self.blocks if b.leaf == leaf}
            if codes != self._word_codes[leaf[-1]]:
                raise PartitionError(f"leaf block {Word.backward(leaf)} does not carry the full word code")

        depth = max(self._word_lengths)
        for a, codes in self._word_codes.items():
            lengths = sorted({len(c) for c in codes})
            for row in map(tuple, word_array(A, depth, following=a).tolist()):
                hits = sum(row[:n] in codes for n in lengths)
                if hits != 1:
                    raise PartitionError(f"forward word {Word.forward(row)} after {a} is covered by {hits} blocks")

    # --- lookups ---------------------------------------------------------

    @property
    def n_params(self) -> int:
        return len(self.blocks)

    @property
    def amplitude(self) -> float:
        return self.c3 * self.rho

    def index_of(self, leaf: Sequence[int], word: Sequence[int]) -> int:
        return self._index[(tuple(leaf), tuple(word))]

    def leaf_code(self, history: Sequence[int]) -> Optional[Tuple[int, ...]]:
        """Leaf code that is a suffix of ``history``, None if history is too short"""
        history = tuple(history)
        for n in self._leaf_lengths:
            if n <= len(history) and history[len(history) - n:] in self._leaf_set:
                return history[len(history) - n:]
        return None

    def block_of(self, history: Sequence[int], future: Sequence[int]) -> Optional[int]:
        """
        Block containing the piece (history, future): its leaf code is a
        suffix of history and its word is a prefix of future. None when
        either side is too short to decide.
        """
        leaf = self.leaf_code(history)
        if leaf is None:
            return None
        future = tuple(future)
        codes = self._word_codes[leaf[-1]]
        for n in self._word_lengths:
            if n <= len(future) and future[:n] in codes:
                return self._index[(leaf, future[:n])]
        return None

    def hit_times(self, history: Sequence[int], word: Sequence[int], index: int) -> List[int]:
        """Steps j at which (history·word[:j], word[j:]) lies in block ``index``"""
        history, word = tuple(history), tuple(word)
        return [j for j in range(len(word)) if self.block_of(history + word[:j], word[j:]) == index]

    def _forward_boxes(self, letter: int, codes) -> _ForwardBoxes:
        words = sorted(codes)
        center, half = [], []
        for w in words:
            box = cylinder_box(self.model, Word.forward(w))
            center.append((box.w.midpoint, box.s.midpoint))
            half.append((0.5 * box.w.length, 0.5 * box.s.length))
        return _ForwardBoxes(words, np.array(center), np.maximum(np.array(half), 1e-300))

    def locate(self, point: Sequence[float]) -> Tuple[Optional[int], float]:
        """
        Block nearest to ``point`` in block-normalized sup distance, with that
        distance. The leaf code comes from the unstable itinerary of u.
        """
        u, w, s = (float(v) for v in point)
        try:
            leaf = self.model.leaf_of_point(u, max(self._leaf_lengths))
        except OutsideDomain:
            return None, np.inf
        code = self.leaf_code(leaf.letters)
        if code is None:
            return None, np.inf
        boxes = self._boxes[code[-1]]
        r = np.max(np.abs(np.array([w, s]) - boxes.center) / boxes.half, axis=1)
        best = int(np.argmin(r))
        return self._index[(code, boxes.words[best])], float(r[best])

    # --- parameters ------------------------------------------------------

    def zero(self) -> "Perturbation":
        return Perturbation(self, np.zeros(self.n_params))

    def unit(self, index: int, value: float = 1.0) -> "Perturbation":
        gamma = np.zeros(self.n_params)
        gamma[index] = value
        return Perturbation(self, gamma)

    def perturbation(self, gamma: Sequence[float]) -> "Perturbation":
        return Perturbation(self, np.asarray(gamma, dtype=float))

    def to_dict(self) -> dict:
        return {
            "n_blocks": self.n_params,
            "leaf_blocks": len(self._leaf_codes),
            "rho": self.rho,
            "leaf_scale": self.leaf_scale,
            "word_scale": self.word_scale,
            "amplitude": self.amplitude,
            "c2": self.c2,
            "c3": self.c3,
        }


@dataclass(frozen=True)
class Perturbation:
    """A point γ of the family; ``displacement`` is the weak-stable push after f"""
    family: PerturbationFamily
    gamma: np.ndarray = field(repr=False)

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=float)
        if gamma.shape != (self.family.n_params,):
            raise ValueError(f"expected {self.family.n_params} parameters, got shape {gamma.shape}")
        if np.any(np.abs(gamma) > 1.0):
            raise ValueError("parameters must lie in [-1, 1]")
        object.__setattr__(self, "gamma", gamma)

    def shift(self, index: int) -> float:
        return float(self.gamma[index]) * self.family.amplitude

    def displacement(self, point: Sequence[float]) -> float:
        index, r = self.family.locate(point)
        if index is None or self.gamma[index] == 0.0:
            return 0.0
        fam = self.family
        return self.shift(index) * float(bump(r, fam.c2, fam.c2 ** 2))


def make_perturbation_family(
    model: HorseshoeModel,
    block_spec: Tuple[float, float],
    rho: float,
    c2: float,
    c3: float,
    c1: Optional[float] = None,
) -> PerturbationFamily:
    """
    Family of type (Σ̃, α, α̃, ρ): leaf blocks at unstable scale α times the
    forward cylinders at scale α̃ that may follow each leaf block.

    Raises:
        PartitionError: if the selected blocks fail to partition
    """
    alpha, alpha_tilde = _check_block_spec(block_spec, rho)
    leaves = leaf_blocks_at_scale(model, alpha, c1)
    words_after = {
        a: [w.letters for w in cylinders_at_scale(model, alpha_tilde, c1, following=a)]
        for a in range(1, model.n_symbols + 1)
    }
    blocks = []
    for leaf in leaves:
        for word in words_after[leaf[-1]]:
            blocks.append(Block(len(blocks), leaf, word))
    family = PerturbationFamily(model, blocks, rho, c2, c3, alpha, alpha_tilde)
    logger.info(
        "perturbation family on %s: %d leaf blocks, %d blocks (alpha=%.4g, alpha~=%.4g)",
        model.name, len(leaves), len(blocks), alpha, alpha_tilde,
    )
    return family


def _check_block_spec(block_spec: Tuple[float, float], rho: float) -> Tuple[float, float]:
    alpha, alpha_tilde = block_spec
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    if not (rho <= alpha < 1.0 and rho <= alpha_tilde < 1.0):
        raise ValueError(f"block scales {block_spec} must lie in [rho, 1)")
    return alpha, alpha_tilde
