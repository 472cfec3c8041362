"""
Gibbs Measures
Markov measure of the potential d·log λ^ws, pressure estimates, Gibbs ratio
bounds and the leaf measures pushed onto the wall.

With locally constant rates the equilibrium state is the Parry-type Markov
measure built from the Perron eigendata of B_ij = A_ij·(λ_j)^d. Models whose
rates vary inside a box use the one-letter stable diameters as rates.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from dimension.stable_dimension import diameter_spectrum
from model.horseshoe import HorseshoeModel
from model.pieces import Piece, diameters, pieces_at_scale
from symbolic.subshift import LeafApprox, Word, mixing_exponent, word_array

logger = logging.getLogger(__name__)

POWER_TOL = 1e-12
POWER_MAX_ITER = 10_000


class NotMixing(ValueError):
    """The transition matrix has no strictly positive power."""


@dataclass(frozen=True)
class MarkovMeasure:
    """Shift-invariant Markov measure: stationary vector p and stochastic Q"""
    stationary: np.ndarray
    transition: np.ndarray
    exponent: float
    spectral_radius: float
    model_name: str = ""

    def __post_init__(self):
        p, Q = self.stationary, self.transition
        if not np.allclose(Q.sum(axis=1), 1.0, atol=1e-10):
            raise ValueError("transition rows must sum to 1")
        if not np.allclose(p @ Q, p, atol=1e-10):
            raise ValueError("stationary vector is not invariant")

    @property
    def n_symbols(self) -> int:
        return len(self.stationary)

    def cylinders(self, words: np.ndarray) -> np.ndarray:
        """μ of each row of an array of admissible words"""
        words = np.asarray(words, dtype=np.int64)
        if words.shape[1] == 0:
            return np.ones(len(words))
        mass = self.stationary[words[:, 0] - 1]
        if words.shape[1] > 1:
            steps = self.transition[words[:, :-1] - 1, words[:, 1:] - 1]
            mass = mass * np.prod(steps, axis=1)
        return mass

    def forward(self, after: int, letters: Sequence[int]) -> float:
        """μ_{θ₀⁻}(θ̲): conditional mass of a word following letter ``after``"""
        mass, prev = 1.0, after
        for a in letters:
            mass *= self.transition[prev - 1, a - 1]
            prev = a
        return float(mass)

    def to_dict(self) -> dict:
        return {
            "model": self.model_name,
            "exponent": self.exponent,
            "spectral_radius": self.spectral_radius,
            "stationary": self.stationary.tolist(),
            "transition": self.transition.tolist(),
        }


def letter_rates(model: HorseshoeModel) -> np.ndarray:
    """Per-letter weak-stable contraction used in the potential"""
    if model.is_affine:
        return model.arr("lam").copy()
    return diameters(model, word_array(model.subshift, 1))


def _power_iteration(M: np.ndarray) -> Tuple[float, np.ndarray]:
    v = np.full(len(M), 1.0 / len(M))
    beta = 0.0
    for _ in range(POWER_MAX_ITER):
        w = M @ v
        new_beta = float(w.sum())
        w = w / new_beta
        if np.max(np.abs(w - v)) < POWER_TOL:
            return new_beta, w
        v, beta = w, new_beta
    logger.warning("power iteration stopped after %d steps (beta=%.12g)", POWER_MAX_ITER, beta)
    return beta, v


def _perron(M: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
    """Perron root with positive left and right eigenvectors"""
    values, left, right = linalg.eig(M, left=True, right=True)
    k = int(np.argmax(values.real))
    beta = float(values[k].real)
    l = np.real(left[:, k])
    r = np.real(right[:, k])
    l = l * np.sign(l.sum())
    r = r * np.sign(r.sum())
    if np.any(l <= 0.0) or np.any(r <= 0.0):
        logger.debug("eigenvectors not positive, falling back to power iteration")
        beta, r = _power_iteration(M)
        _, l = _power_iteration(M.T)
    return beta, l, r


def build_gibbs_measure(model: HorseshoeModel, d: float) -> MarkovMeasure:
    """
    Gibbs state of φ = d·log λ^ws: Q_ij = B_ij r_j/(β r_i), p_i ∝ l_i r_i.

    Raises:
        NotMixing: if no power of A is strictly positive
    """
    if d <= 0.0:
        raise ValueError("d must be positive")
    A = model.subshift
    N = A.n_symbols
    if mixing_exponent(A, (N - 1) ** 2 + 1) is None:
        raise NotMixing(f"transition matrix of {model.name} is not mixing")

    B = A.array.astype(float) * letter_rates(model)[np.newaxis, :] ** d
    beta, l, r = _perron(B)
    Q = B * r[np.newaxis, :] / (beta * r[:, np.newaxis])
    Q = Q / Q.sum(axis=1, keepdims=True)
    p = l * r
    p = p / p.sum()
    logger.info("gibbs measure of %s at d=%.8f: spectral radius %.12f", model.name, d, beta)
    return MarkovMeasure(p, Q, float(d), beta, model.name)


def cylinder_measure(measure: MarkovMeasure, word) -> float:
    """μ(θ₁…θ_m); inadmissible words get mass zero"""
    letters = word.letters if isinstance(word, Word) else tuple(word)
    if not letters:
        return 1.0
    mass = float(measure.cylinders(np.array([letters], dtype=np.int64))[0])
    if mass == 0.0:
        logger.debug("cylinder %s is not admissible, mass 0", letters)
    return mass


def backward_measure(measure: MarkovMeasure, letters: Sequence[int]) -> float:
    """μ⁻ of the leaf block with backward suffix ``letters`` (reading order)"""
    return cylinder_measure(measure, tuple(letters))


def pressure_estimate(model: HorseshoeModel, d: float, n: int) -> float:
    """(1/n)·log Σ_{|θ̲|=n} D_s(θ̲)^d"""
    if n < 1:
        raise ValueError("n must be at least 1")
    return float(np.log(diameter_spectrum(model, n).weighted_sum(d)) / n)


def gibbs_ratio_bounds(model: HorseshoeModel, measure: MarkovMeasure, n_max: int) -> Tuple[float, float]:
    """min and max of μ(θ̲)/D_s(θ̲)^d over admissible words of length ≤ n_max"""
    lo, hi = np.inf, 0.0
    for n in range(1, n_max + 1):
        words = word_array(model.subshift, n)
        ratio = measure.cylinders(words) / diameters(model, words) ** measure.exponent
        lo = min(lo, float(ratio.min()))
        hi = max(hi, float(ratio.max()))
    return lo, hi


@dataclass
class LeafMeasure:
    """Discrete measure ν_{θ⁻}: one mass per piece interval on the wall"""
    leaf: LeafApprox
    rho: float
    lower: np.ndarray
    upper: np.ndarray
    mass: np.ndarray
    words: List[Word] = field(default_factory=list, repr=False)

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())

    def __len__(self) -> int:
        return len(self.mass)


def leaf_pushforward(
    measure: MarkovMeasure,
    model: HorseshoeModel,
    leaf: LeafApprox,
    rho: float,
    gamma=None,
    c1: Optional[float] = None,
    keep: Optional[Callable[[Piece], bool]] = None,
) -> LeafMeasure:
    """
    Puts μ_{θ₀⁻}(θ̲) on each piece interval I^γ_{(θ⁻,θ̲)} at scale ρ. ``keep``
    restricts to a sub-family of pieces (e.g. non-recurrent words).
    """
    pieces = pieces_at_scale(model, leaf, rho, c1, gamma)
    if keep is not None:
        pieces = [p for p in pieces if keep(p)]
    mass = np.array([measure.forward(leaf.final_letter, p.word.letters) for p in pieces])
    return LeafMeasure(
        leaf,
        rho,
        np.array([p.interval.lower for p in pieces]),
        np.array([p.interval.upper for p in pieces]),
        mass,
        [p.word for p in pieces],
    )


def piece_mass_constant(leaf_measure: LeafMeasure, d: float) -> float:
    """Smallest c₁₁ with c₁₁⁻¹ρ^d ≤ mass ≤ c₁₁ρ^d over the pieces"""
    if len(leaf_measure) == 0:
        raise ValueError("no pieces to compare")
    scaled = leaf_measure.mass / leaf_measure.rho ** d
    return float(max(scaled.max(), 1.0 / scaled.min()))


def piece_count_window(model: HorseshoeModel, leaf: LeafApprox, rhos: Sequence[float], d: float, c1: Optional[float] = None) -> List[dict]:
    """Number of pieces per scale against ρ^{-d}; the normalized count stays bounded"""
    rows = []
    for rho in rhos:
        count = len(pieces_at_scale(model, leaf, rho, c1))
        rows.append({"rho": rho, "pieces": count, "normalized": count * rho ** d})
    return rows
