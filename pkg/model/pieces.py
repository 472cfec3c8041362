"""
Pieces and their wall intervals.

A piece (θ⁻, θ̲) projects to I = φ_{(θ⁻,θ̲)}([0,1]) with φ = ψ_{θ_1}∘…∘ψ_{θ_n}.
The one-letter wall map ψ_{θ⁻,b} takes the wall of leaf θ⁻b to the wall of
leaf θ⁻: apply f at s = ½ and slide back to s = ½ along the strong-stable
foliation. A perturbation adds its weak-stable shift at every step where the
shifted piece (θ⁻θ_1…θ_j, θ_{j+1}…θ_n) lies in one of its blocks.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from model.foliation import project_to_wall
from model.horseshoe import WALL_S, HorseshoeModel
from model.intervals import Interval
from symbolic.budget import enumeration_budget
from symbolic.subshift import LeafApprox, Word, is_admissible, word_array

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Piece:
    leaf: LeafApprox
    word: Word
    interval: Interval
    scale: float


def wall_step(model: HorseshoeModel, letters, x, target_letters: Optional[Sequence[int]] = None):
    """
    ψ_b on wall coordinates, vectorized. ``letters`` may be one symbol or an
    array aligned with ``x``. Sheared models need the target leaf letters.
    """
    letters = np.asarray(letters)
    x = np.asarray(x, dtype=float)
    idx = letters - 1
    t = model.arr("t")[idx]
    lam = model.arr("lam")[idx]
    bend = model.arr("bend")[idx]
    w = t + lam * x + bend * x * (1.0 - x)
    if not model.has_shear:
        return w
    if target_letters is None:
        raise ValueError("sheared models need the target leaf to project along the foliation")
    # the shear term vanishes on the wall itself; it acts through the foliation
    s = model.arr("q")[idx] + model.arr("lam_ss")[idx] * WALL_S
    return project_to_wall(model, target_letters, w, s)


def wall_step_inverse(model: HorseshoeModel, letter: int, y: float, target_letters: Optional[Sequence[int]] = None) -> float:
    """Inverse of the increasing map ψ_b"""
    if not model.has_shear:
        return float(model.w_map_inverse(letter, y, WALL_S))

    def residual(x: float) -> float:
        return float(wall_step(model, letter, x, target_letters)) - y

    return brentq(residual, 0.0, 1.0, xtol=1e-14)


def _shift(gamma, history: Tuple[int, ...], future: Tuple[int, ...]) -> float:
    if gamma is None:
        return 0.0
    idx = gamma.family.block_of(history, future)
    return 0.0 if idx is None else gamma.shift(idx)


def step_shifts(gamma, leaf_letters: Tuple[int, ...], word: Tuple[int, ...]) -> List[float]:
    """Displacement added at each step j = 0..n-1 (zero when no block contains the shifted piece)"""
    return [_shift(gamma, leaf_letters + word[:j], word[j:]) for j in range(len(word))]


def piece_interval(model: HorseshoeModel, leaf: LeafApprox, word: Word, gamma=None) -> Interval:
    """I^γ_{(θ⁻,θ̲)}"""
    if len(word) and not model.subshift.allows(leaf.final_letter, word.first):
        raise ValueError(f"word {word} cannot follow leaf letter {leaf.final_letter}")
    letters = word.letters
    shifts = step_shifts(gamma, leaf.letters, letters)
    lo, hi = 0.0, 1.0
    for j in range(len(letters) - 1, -1, -1):
        target = leaf.letters + letters[:j]
        lo = float(wall_step(model, letters[j], lo, target)) + shifts[j]
        hi = float(wall_step(model, letters[j], hi, target)) + shifts[j]
    return Interval(lo, hi)


def piece_intervals(model: HorseshoeModel, leaf: Optional[LeafApprox], words: np.ndarray, gamma=None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Wall intervals of equal-length words (rows of ``words``) in one leaf.
    The leaf may be omitted for unperturbed models without shear.
    """
    words = np.asarray(words, dtype=np.int64)
    if leaf is None and (model.has_shear or gamma is not None):
        raise ValueError("a leaf is required for sheared or perturbed models")
    if model.has_shear:
        ivs = [piece_interval(model, leaf, Word.forward(row), gamma) for row in words.tolist()]
        return np.array([iv.lower for iv in ivs]), np.array([iv.upper for iv in ivs])

    count, n = words.shape
    lo = np.zeros(count)
    hi = np.ones(count)
    shifts = None
    if gamma is not None:
        shifts = np.array([step_shifts(gamma, leaf.letters, tuple(row)) for row in words.tolist()]).reshape(count, n)
    for j in range(n - 1, -1, -1):
        col = words[:, j]
        lo = wall_step(model, col, lo)
        hi = wall_step(model, col, hi)
        if shifts is not None:
            lo = lo + shifts[:, j]
            hi = hi + shifts[:, j]
    return lo, hi


def diameters(model: HorseshoeModel, words: np.ndarray, leaf: Optional[LeafApprox] = None) -> np.ndarray:
    """D_s of equal-length words; leaf-independent unless the model is sheared"""
    words = np.asarray(words, dtype=np.int64)
    if words.shape[1] == 0:
        return np.ones(len(words))
    if model.is_affine:
        return np.prod(model.arr("lam")[words - 1], axis=1)
    if leaf is None and model.has_shear:
        return np.array([stable_diameters(model, Word.forward(row))[1] for row in words.tolist()])
    lo, hi = piece_intervals(model, leaf, words)
    return hi - lo


def sample_leaves(model: HorseshoeModel, word: Word, depth: int = 2) -> List[LeafApprox]:
    """Leaf truncations of ``depth`` letters that the word may follow"""
    leaves = []
    for row in word_array(model.subshift, depth).tolist():
        if len(word) == 0 or model.subshift.allows(row[-1], word.first):
            leaves.append(model.leaf(row))
    return leaves


def stable_diameters(model: HorseshoeModel, word: Word, leaves: Optional[List[LeafApprox]] = None, gamma=None) -> Tuple[List[float], float]:
    """(d_s over sampled leaves, D_s = max)"""
    if not is_admissible(word, model.subshift):
        raise ValueError(f"word {word} is not admissible")
    if len(word) == 0:
        return [1.0], 1.0
    leaves = sample_leaves(model, word) if leaves is None else leaves
    d_s = [piece_interval(model, leaf, word, gamma).length for leaf in leaves]
    return d_s, max(d_s)


def cylinders_at_scale(
    model: HorseshoeModel,
    rho: float,
    c1: Optional[float] = None,
    leaf: Optional[LeafApprox] = None,
    following: Optional[int] = None,
) -> List[Word]:
    """
    Words accepted by the first-entry stopping rule: extend a word until its
    D_s drops to c₁ρ. The result is a complete prefix code of the words
    that may follow ``following`` (or the leaf's final letter).
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError("rho must lie in (0, 1]")
    c1 = model.default_c1() if c1 is None else c1
    if leaf is not None:
        following = leaf.final_letter
    threshold = c1 * rho

    def diameter(letters: Tuple[int, ...]) -> float:
        if not letters:
            return 1.0
        if leaf is not None and model.has_shear:
            return piece_interval(model, leaf, Word.forward(letters)).length
        return float(diameters(model, np.array([letters], dtype=np.int64))[0])

    accepted: List[Word] = []
    frontier: List[Tuple[int, ...]] = [()]
    while frontier:
        enumeration_budget.charge(len(frontier))
        nxt = []
        for letters in frontier:
            if diameter(letters) <= threshold + 1e-15:
                accepted.append(Word.forward(letters))
                continue
            if letters:
                choices = model.subshift.successors(letters[-1])
            elif following is not None:
                choices = model.subshift.successors(following)
            else:
                choices = range(1, model.n_symbols + 1)
            nxt.extend(letters + (b,) for b in choices)
        frontier = nxt
    accepted.sort(key=lambda w: w.letters)
    return accepted


def leaf_blocks_at_scale(model: HorseshoeModel, alpha: float, c1: Optional[float] = None) -> List[Tuple[int, ...]]:
    """
    Backward words (reading order) selected by the stopping rule on unstable
    widths: grow to the left until the leaf interval is at most c₁α wide.
    """
    c1 = model.default_c1() if c1 is None else c1
    threshold = c1 * alpha
    accepted = []
    frontier = [(a,) for a in range(1, model.n_symbols + 1)]
    while frontier:
        enumeration_budget.charge(len(frontier))
        nxt = []
        for letters in frontier:
            if model.leaf_u_interval(letters).length <= threshold + 1e-15:
                accepted.append(letters)
                continue
            nxt.extend((c,) + letters for c in range(1, model.n_symbols + 1) if model.subshift.allows(c, letters[0]))
        frontier = nxt
    accepted.sort(key=lambda letters: letters[::-1])
    return accepted


def pieces_at_scale(model: HorseshoeModel, leaf: LeafApprox, rho: float, c1: Optional[float] = None, gamma=None) -> List[Piece]:
    """All pieces of the leaf at scale ρ"""
    words = cylinders_at_scale(model, rho, c1, leaf=leaf)
    by_length: Dict[int, List[Word]] = {}
    for w in words:
        by_length.setdefault(len(w), []).append(w)
    pieces = []
    for n, group in sorted(by_length.items()):
        arr = np.array([w.letters for w in group], dtype=np.int64).reshape(len(group), n)
        lo, hi = piece_intervals(model, leaf, arr, gamma)
        pieces.extend(Piece(leaf, w, Interval(float(a), float(b)), rho) for w, a, b in zip(group, lo, hi))
    pieces.sort(key=lambda p: p.word.letters)
    return pieces


def submultiplicativity_constant(model: HorseshoeModel, max_len: int = 8) -> float:
    """
    Largest c ≤ 1 with c·D(a)D(b) ≤ D(ab) ≤ c⁻¹·D(a)D(b) over admissible
    concatenations of total length ≤ max_len.
    """
    tables: Dict[int, Dict[Tuple[int, ...], float]] = {}
    for n in range(1, max_len + 1):
        words = word_array(model.subshift, n)
        tables[n] = dict(zip(map(tuple, words.tolist()), diameters(model, words).tolist()))

    c = 1.0
    for n in range(2, max_len + 1):
        for word, d_ab in tables[n].items():
            for k in range(1, n):
                ratio = d_ab / (tables[k][word[:k]] * tables[n - k][word[k:]])
                c = min(c, ratio, 1.0 / ratio)
    logger.info("submultiplicativity constant of %s up to length %d: %.6f", model.name, max_len, c)
    return c
