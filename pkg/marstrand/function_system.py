"""
Leafwise Function Systems
The wall maps φ^t_{(θ⁻,θ̲)} of a parameter family, the projection π^t_{θ⁻},
and the transversality and distortion-continuity checks the Marstrand-like
argument rests on.

A family moves every one-letter wall map by a parameter t_b ∈ [−A, A]:
``translation`` shifts its image by t_b, ``rate`` scales its contraction by
(1 + t_b).
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from config import settings
from model.horseshoe import HorseshoeModel
from model.intervals import Interval
from model.pieces import diameters, wall_step
from symbolic.subshift import LeafApprox, Word, word_array

logger = logging.getLogger(__name__)

FAMILY_KINDS = ("translation", "rate")
_DERIVATIVE_GRID = np.linspace(0.0, 1.0, 9)


@dataclass(frozen=True)
class MarstrandFamily:
    """Parameter family t ∈ [−A, A]^N acting on the one-letter wall maps"""
    model: HorseshoeModel
    kind: str = "translation"
    amplitude: float = 0.1

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ValueError(f"unknown family kind '{self.kind}'")
        if self.amplitude <= 0.0:
            raise ValueError("amplitude must be positive")
        if self.kind == "rate" and self.amplitude >= 1.0:
            raise ValueError("rate families need amplitude below 1")

    @property
    def n_params(self) -> int:
        return self.model.n_symbols

    def check(self, t: Sequence[float]) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if t.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got shape {t.shape}")
        if np.any(np.abs(t) > self.amplitude + 1e-15):
            raise ValueError(f"parameters must lie in [-{self.amplitude}, {self.amplitude}]")
        return t

    def offsets(self, t: np.ndarray) -> np.ndarray:
        return t if self.kind == "translation" else np.zeros_like(t)

    def slopes(self, t: np.ndarray) -> np.ndarray:
        return self.model.arr("lam") * t if self.kind == "rate" else np.zeros_like(t)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.uniform(-self.amplitude, self.amplitude, size=(count, self.n_params))

    def system(self, t: Sequence[float], leaf: LeafApprox) -> "FunctionSystem":
        return FunctionSystem(self, self.check(t), leaf)


class FunctionSystem:
    """The maps φ^t_{(θ⁻,θ̲)} of one leaf at one parameter"""

    def __init__(self, family: MarstrandFamily, t: np.ndarray, leaf: LeafApprox):
        self.family = family
        self.model = family.model
        self.t = t
        self.leaf = leaf
        self._offset = family.offsets(t)
        self._slope = family.slopes(t)

    def step(self, letters, x, target: Optional[Sequence[int]] = None):
        letters = np.asarray(letters)
        idx = letters - 1
        x = np.asarray(x, dtype=float)
        return wall_step(self.model, letters, x, target) + self._offset[idx] + self._slope[idx] * x

    def compose(self, word: Sequence[int], x):
        """φ_{(θ⁻,θ̲)}(x)"""
        word = tuple(word)
        for j in range(len(word) - 1, -1, -1):
            x = self.step(word[j], x, self.leaf.letters + word[:j])
        return x

    def interval(self, word: Sequence[int]) -> Interval:
        return Interval(float(self.compose(word, 0.0)), float(self.compose(word, 1.0)))

    def intervals(self, words: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Images of [0,1] for equal-length words (rows)"""
        words = np.asarray(words, dtype=np.int64)
        if self.model.has_shear:
            ivs = [self.interval(row) for row in words.tolist()]
            return np.array([iv.lower for iv in ivs]), np.array([iv.upper for iv in ivs])
        lo = np.zeros(len(words))
        hi = np.ones(len(words))
        for j in range(words.shape[1] - 1, -1, -1):
            lo = self.step(words[:, j], lo)
            hi = self.step(words[:, j], hi)
        return lo, hi

    def derivative_norm(self, word: Sequence[int]) -> float:
        """‖φ′‖ in sup norm; exact for affine models"""
        word = tuple(word)
        if self.model.is_affine:
            idx = np.asarray(word, dtype=np.int64) - 1
            return float(np.prod(self.model.arr("lam")[idx] + self._slope[idx]))
        h = settings.FD_STEP
        grid = np.clip(_DERIVATIVE_GRID, h, 1.0 - h)
        values = (self.compose(word, grid + h) - self.compose(word, grid - h)) / (2.0 * h)
        return float(np.max(np.abs(values)))


def pi_limit(system: FunctionSystem, theta_plus: Sequence[int]) -> Tuple[float, float]:
    """
    π^t_{θ⁻}(θ⁺) from the nested images of a truncated forward word: the
    left endpoint at depth m, with the interval length as error bound.
    """
    if len(theta_plus) == 0:
        raise ValueError("need at least one forward letter")
    iv = system.interval(theta_plus)
    return iv.lower, iv.length


def _projection_gap(family, leaf, theta, tau, t) -> float:
    system = FunctionSystem(family, t, leaf)
    return float(system.compose(theta, 0.0) - system.compose(tau, 0.0))


def _level_set_length(f, lo: float, hi: float, r: float) -> float:
    """Length of {x ∈ [lo, hi] : |f(x)| ≤ r} for monotone f"""
    f_lo, f_hi = f(lo), f(hi)
    if f_lo > f_hi:
        return _level_set_length(lambda x: -f(x), lo, hi, r)
    if f_hi < -r or f_lo > r:
        return 0.0
    a = lo if f_lo >= -r else brentq(lambda x: f(x) + r, lo, hi, xtol=1e-15)
    b = hi if f_hi <= r else brentq(lambda x: f(x) - r, lo, hi, xtol=1e-15)
    return max(0.0, b - a)


def _random_word(rng: np.random.Generator, model: HorseshoeModel, length: int, after: int, avoid_first: Optional[int] = None) -> Tuple[int, ...]:
    A = model.subshift
    choices = [b for b in A.successors(after) if b != avoid_first]
    word = [int(rng.choice(choices))]
    while len(word) < length:
        word.append(int(rng.choice(A.successors(word[-1]))))
    return tuple(word)


def transversal_pairs(
    model: HorseshoeModel,
    leaf: LeafApprox,
    n_pairs: int,
    depth: int,
    L: int,
    seed: int = 0,
    max_tries: int = 100,
) -> List[Tuple[Tuple[int, ...], Tuple[int, ...]]]:
    """
    Random pairs θ, τ after the leaf with θ₁ ≠ τ₁ where θ₁ does not recur in
    θ₂…θ_L nor occur in τ₁…τ_L.
    """
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n_pairs * max_tries):
        if len(pairs) == n_pairs:
            break
        theta = _random_word(rng, model, depth, leaf.final_letter)
        tau = _random_word(rng, model, depth, leaf.final_letter, avoid_first=theta[0])
        a = theta[0]
        if a in theta[1:L] or a in tau[:L]:
            continue
        pairs.append((theta, tau))
    if len(pairs) < n_pairs:
        logger.warning("only %d of %d non-recurrent pairs found", len(pairs), n_pairs)
    return pairs


@dataclass
class TransversalityReport:
    constant: float
    per_radius: List[Tuple[float, float]]
    min_derivative: float
    n_pairs: int

    def to_dict(self) -> dict:
        return {
            "constant": self.constant,
            "per_radius": [[r, c] for r, c in self.per_radius],
            "min_derivative": self.min_derivative,
            "n_pairs": self.n_pairs,
        }


def transversality_constant(
    family: MarstrandFamily,
    leaf: LeafApprox,
    pairs: Sequence[Tuple[Sequence[int], Sequence[int]]],
    r_grid: Sequence[float] = (1e-2, 1e-3, 1e-4),
    t_samples: int = 4,
    seed: int = 0,
) -> TransversalityReport:
    """
    Empirical C in Leb{t : |π^t(θ) − π^t(τ)| ≤ r} ≤ C·r, with Leb normalized
    on [−A, A]^N. The measure is integrated exactly along the t_{θ₁} axis
    (the gap is monotone there) and sampled in the other coordinates. Also
    the smallest finite-difference derivative of the gap along t_{θ₁} at t = 0.
    """
    if not pairs:
        raise ValueError("no pairs to test")
    rng = np.random.default_rng(seed)
    A = family.amplitude
    h = settings.FD_STEP
    others = family.sample(rng, t_samples)
    ratio = {r: 0.0 for r in r_grid}
    min_derivative = np.inf
    for theta, tau in pairs:
        theta, tau = tuple(theta), tuple(tau)
        if theta[0] == tau[0]:
            raise ValueError(f"pair {theta}, {tau} shares its first letter")
        a = theta[0] - 1

        def gap_along(base: np.ndarray):
            def gap(x: float) -> float:
                t = base.copy()
                t[a] = x
                return _projection_gap(family, leaf, theta, tau, t)
            return gap

        zero_gap = gap_along(np.zeros(family.n_params))
        derivative = abs(zero_gap(h) - zero_gap(-h)) / (2.0 * h)
        min_derivative = min(min_derivative, derivative)
        for r in r_grid:
            lengths = [_level_set_length(gap_along(base), -A, A, r) for base in others]
            ratio[r] = max(ratio[r], float(np.mean(lengths)) / (2.0 * A) / r)
    per_radius = [(r, ratio[r]) for r in r_grid]
    report = TransversalityReport(max(ratio.values()), per_radius, float(min_derivative), len(pairs))
    logger.info("transversality on %d pairs: C=%.4g, min derivative %.4g", len(pairs), report.constant, report.min_derivative)
    return report


def distortion_continuity_check(
    family: MarstrandFamily,
    leaf: LeafApprox,
    t1: Sequence[float],
    t2: Sequence[float],
    n_max: int,
) -> float:
    """max over words of length ≤ n_max of |log(‖φ^{t1}′‖/‖φ^{t2}′‖)| / |θ̲|"""
    s1, s2 = family.system(t1, leaf), family.system(t2, leaf)
    worst = 0.0
    for n in range(1, n_max + 1):
        for row in word_array(family.model.subshift, n, following=leaf.final_letter).tolist():
            ratio = s1.derivative_norm(row) / s2.derivative_norm(row)
            worst = max(worst, abs(float(np.log(ratio))) / n)
    return worst


def gibbs_constant_c9(system: FunctionSystem, n_words: int = 1000, length: int = 8, seed: int = 0) -> float:
    """Smallest c₉ with D_s/‖φ′‖ ∈ [c₉⁻¹, c₉] over random words"""
    rng = np.random.default_rng(seed)
    model = system.model
    words = np.array([_random_word(rng, model, length, system.leaf.final_letter) for _ in range(n_words)])
    d_s = diameters(model, words, system.leaf)
    norms = np.array([system.derivative_norm(row) for row in words.tolist()])
    ratio = d_s / norms
    return float(max(ratio.max(), 1.0 / ratio.min()))


def balancing_eta(eps0: float, lam: float) -> float:
    """η solving (1 + ε₀/4)·η + (ε₀/4)·log λ = 0"""
    if eps0 <= 0.0:
        raise ValueError("eps0 must be positive")
    if not 0.0 < lam < 1.0:
        raise ValueError("lam must lie in (0, 1)")
    return -(eps0 / 4.0) * float(np.log(lam)) / (1.0 + eps0 / 4.0)
