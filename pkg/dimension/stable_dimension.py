"""
Upper Stable Dimension
The exponents λₙ solving Σ_{|θ̲|=n} D_s(θ̲)^λ = 1, the restricted λ̃ₙ, the
limit d̄_s with an error bar, and continuity under perturbation.

For affine models D_s(θ̲) = Π λ^ws_{θ_i} only depends on how often each
letter occurs, so the sums run over letter-count vectors with path-count
multiplicities. Other models enumerate the words explicitly.
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import bisect
from sklearn.linear_model import LinearRegression

from config import settings
from model.foliation import check_sharp_splitting
from model.horseshoe import HorseshoeModel
from model.pieces import diameters, submultiplicativity_constant
from symbolic.budget import BudgetExceeded, enumeration_budget
from symbolic.subshift import connection_length, word_array

logger = logging.getLogger(__name__)


class NotContracted(ValueError):
    """Some length-n cylinder has D_s ≥ 1; n is too small."""


class EmptyFamily(ValueError):
    """No admissible word with the requested first and last letters."""


class ConvergenceError(RuntimeError):
    """λₙ did not stabilize within the budget; ``partial`` holds the computed (n, λₙ)."""

    def __init__(self, message: str, partial: List[Tuple[int, float]]):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class Spectrum:
    """Distinct D_s values of a word family with their multiplicities"""
    values: np.ndarray
    counts: np.ndarray

    @property
    def size(self) -> int:
        return int(self.counts.sum())

    def weighted_sum(self, exponent: float) -> float:
        return float(np.sum(self.counts * np.exp(exponent * np.log(self.values))))


def _affine_spectrum(model: HorseshoeModel, n: int, first: Optional[int], last: Optional[int]) -> Spectrum:
    N = model.n_symbols
    A = model.subshift
    starts = [first] if first is not None else range(1, N + 1)
    states: Dict[Tuple[int, Tuple[int, ...]], int] = {}
    for a in starts:
        counts = [0] * N
        counts[a - 1] = 1
        states[(a, tuple(counts))] = 1
    for _ in range(1, n):
        enumeration_budget.charge(len(states) * N)
        nxt: Dict[Tuple[int, Tuple[int, ...]], int] = {}
        for (a, counts), mult in states.items():
            for b in A.successors(a):
                c = list(counts)
                c[b - 1] += 1
                key = (b, tuple(c))
                nxt[key] = nxt.get(key, 0) + mult
        states = nxt

    totals: Dict[Tuple[int, ...], int] = {}
    for (a, counts), mult in states.items():
        if last is None or a == last:
            totals[counts] = totals.get(counts, 0) + mult
    if not totals:
        return Spectrum(np.zeros(0), np.zeros(0))
    exps = np.array(list(totals.keys()), dtype=float)
    values = np.exp(exps @ np.log(model.arr("lam")))
    return Spectrum(values, np.array(list(totals.values()), dtype=float))


def _explicit_spectrum(model: HorseshoeModel, n: int, first: Optional[int], last: Optional[int]) -> Spectrum:
    words = word_array(model.subshift, n)
    if first is not None:
        words = words[words[:, 0] == first]
    if last is not None:
        words = words[words[:, -1] == last]
    if len(words) == 0:
        return Spectrum(np.zeros(0), np.zeros(0))
    return Spectrum(diameters(model, words), np.ones(len(words)))


@lru_cache(maxsize=64)
def diameter_spectrum(model: HorseshoeModel, n: int, first: Optional[int] = None, last: Optional[int] = None) -> Spectrum:
    """D_s over admissible words of length n (optionally with fixed first/last letter), cached per length"""
    if n < 1:
        raise ValueError("n must be at least 1")
    if model.is_affine:
        return _affine_spectrum(model, n, first, last)
    return _explicit_spectrum(model, n, first, last)


def solve_exponent(spectrum: Spectrum) -> float:
    """Unique root of λ ↦ Σ D_s^λ − 1 by bisection"""
    if spectrum.size == 0:
        raise EmptyFamily("empty word family")
    if np.any(spectrum.values >= 1.0):
        raise NotContracted(f"max D_s = {spectrum.values.max():.6g} is not below 1")

    def excess(lam: float) -> float:
        return spectrum.weighted_sum(lam) - 1.0

    lo, hi = settings.EXPONENT_BRACKET
    if excess(lo) <= 0.0:
        return lo
    while excess(hi) > 0.0:
        hi *= 2.0
    return bisect(excess, lo, hi, xtol=settings.BISECTION_TOL, maxiter=settings.BISECTION_MAX_ITER)


def lambda_n(model: HorseshoeModel, n: int) -> float:
    """
    λₙ: the exponent with Σ_{θ̲∈Σ^{+n}} D_s(θ̲)^λ = 1.

    Raises:
        NotContracted: if some length-n word has D_s ≥ 1
    """
    value = solve_exponent(diameter_spectrum(model, n))
    logger.debug("lambda_%d(%s) = %.12f", n, model.name, value)
    return value


def tilde_lambda_n(model: HorseshoeModel, n: int, a: int, b: int) -> float:
    """
    λ̃ₙ over words with θ₁ = a and θₙ = b, where ba is admissible.

    Raises:
        EmptyFamily: if no such word exists
    """
    A = model.subshift
    A.check_symbol(a)
    A.check_symbol(b)
    if not A.allows(b, a):
        raise ValueError(f"the junction ({b},{a}) must be admissible")
    r = connection_length(A)
    if n < 2 * r:
        raise ValueError(f"n = {n} is below twice the connection length {r}")
    spectrum = diameter_spectrum(model, n, a, b)
    if spectrum.size == 0:
        raise EmptyFamily(f"no admissible word of length {n} from {a} to {b}")
    return solve_exponent(spectrum)


def conformal_lambda_n(model: HorseshoeModel, n: int) -> float:
    """log Nₙ / (−n log λ) for models with a single weak-stable rate"""
    if not model.is_conformal:
        raise ValueError(f"{model.name} is not conformal")
    count = diameter_spectrum(model, n).size
    return float(np.log(count) / (-n * np.log(model.arr("lam")[0])))


@dataclass
class DimensionEstimate:
    value: float
    error: float
    n: int
    submultiplicativity: float
    sequence: List[Tuple[int, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "error": self.error,
            "n": self.n,
            "submultiplicativity": self.submultiplicativity,
            "sequence": [[n, lam] for n, lam in self.sequence],
        }


def semicontinuity_slack(c: float, n: int, max_diameter: float) -> float:
    """εₙ = |log c| / (n·|log max D_s(n)|)"""
    return abs(np.log(c)) / (n * abs(np.log(max_diameter)))


def upper_stable_dimension(model: HorseshoeModel, eps: float, n_max: int = 14) -> DimensionEstimate:
    """
    d̄_s = lim λₙ: increase n until successive values differ by less than eps.

    The error bar is λₙεₙ/(1+εₙ) + |λₙ − λₙ₋₁| with εₙ from the measured
    submultiplicativity constant.

    Raises:
        ConvergenceError: with the computed sequence, on budget or n_max
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    sequence: List[Tuple[int, float]] = []
    for n in range(1, n_max + 1):
        try:
            value = lambda_n(model, n)
        except NotContracted:
            continue
        except BudgetExceeded as e:
            raise ConvergenceError(f"budget exhausted at n={n}: {e}", sequence) from e
        sequence.append((n, value))
        if len(sequence) >= 2 and abs(sequence[-1][1] - sequence[-2][1]) < eps:
            c = submultiplicativity_constant(model, min(8, n))
            max_d = float(diameter_spectrum(model, n).values.max())
            slack = semicontinuity_slack(c, n, max_d)
            error = value * slack / (1.0 + slack) + abs(sequence[-1][1] - sequence[-2][1])
            logger.info("upper stable dimension of %s: %.10f +/- %.2e (n=%d)", model.name, value, error, n)
            return DimensionEstimate(value, error, n, c, sequence)
    raise ConvergenceError(f"lambda_n of {model.name} did not stabilize to {eps} by n={n_max}", sequence)


@dataclass
class ContinuityTable:
    rows: List[Tuple[float, float]]
    slope: float
    depth: int

    def to_dict(self) -> dict:
        return {"rows": [[d, v] for d, v in self.rows], "slope": self.slope, "depth": self.depth}


def continuity_experiment(
    model: HorseshoeModel,
    deltas: Sequence[float],
    depth: int = 8,
    n_orbits: int = 300,
    seed: int = 0,
) -> ContinuityTable:
    """
    d̄_s (as λ at a fixed depth) on bent copies of the model, plus the fitted
    constant C in |Δd̄_s| ≈ C·δ.

    Raises:
        SplittingLost: if a perturbed copy fails the cone check
    """
    rows = []
    for delta in deltas:
        perturbed = model.with_bend(delta) if delta else model
        check_sharp_splitting(perturbed, n_orbits=n_orbits, seed=seed)
        rows.append((float(delta), lambda_n(perturbed, depth)))
    base = next((v for d, v in rows if d == 0.0), lambda_n(model, depth))
    x = np.array([[abs(d)] for d, _ in rows])
    y = np.array([abs(v - base) for _, v in rows])
    slope = 0.0
    if np.any(x > 0):
        slope = float(LinearRegression(fit_intercept=False).fit(x, y).coef_[0])
    logger.info("continuity of %s at depth %d: fitted slope %.4g", model.name, depth, slope)
    return ContinuityTable(rows, slope, depth)


def dimension_table(model: HorseshoeModel, n_values: Sequence[int], a: int = 1, b: int = 1) -> List[dict]:
    """Rows (n, λₙ, λ̃ₙ) for the dim report; λ̃ₙ is None where undefined"""
    rows = []
    for n in n_values:
        try:
            lam = lambda_n(model, n)
        except NotContracted:
            continue
        try:
            tilde = tilde_lambda_n(model, n, a, b)
        except (ValueError, EmptyFamily):
            tilde = None
        rows.append({"n": n, "lambda_n": lam, "tilde_lambda_n": tilde})
    return rows
