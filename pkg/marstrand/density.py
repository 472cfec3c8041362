"""
Projected Densities
L² norms of the leaf measures ν^t_{θ⁻} against Lebesgue, the parameter
selection behind the Marstrand-like property, and the discretized
double-integral statistic.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from marstrand.function_system import FunctionSystem, MarstrandFamily
from model.pieces import cylinders_at_scale, leaf_blocks_at_scale
from symbolic.subshift import LeafApprox, word_array
from thermo.gibbs import MarkovMeasure, backward_measure

logger = logging.getLogger(__name__)


class SelectionError(RuntimeError):
    """No sampled parameter gives a bounded density quantile."""


@dataclass
class ProjectedMeasure:
    """Masses on the projected piece intervals of one leaf"""
    lower: np.ndarray
    upper: np.ndarray
    mass: np.ndarray

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())


def projected_measure(
    system: FunctionSystem,
    measure: MarkovMeasure,
    rho: float,
    c1: Optional[float] = None,
) -> ProjectedMeasure:
    """ν^t_{θ⁻} at scale ρ: μ_{θ₀⁻}(θ̲) on each interval φ^t_{(θ⁻,θ̲)}([0,1])"""
    leaf = system.leaf
    words = cylinders_at_scale(system.model, rho, c1, leaf=leaf)
    by_length: Dict[int, List[Tuple[int, ...]]] = {}
    for w in words:
        by_length.setdefault(len(w), []).append(w.letters)
    lower, upper, mass = [], [], []
    for n, group in sorted(by_length.items()):
        lo, hi = system.intervals(np.array(group, dtype=np.int64).reshape(len(group), n))
        lower.append(lo)
        upper.append(hi)
        mass.append([measure.forward(leaf.final_letter, w) for w in group])
    return ProjectedMeasure(np.concatenate(lower), np.concatenate(upper), np.concatenate([np.asarray(m) for m in mass]))


def histogram(nu: ProjectedMeasure, bin_width: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Bin edges and bin masses, each interval's mass spread uniformly over it.
    Edges sit on the grid bin_width·ℤ.
    """
    if bin_width <= 0.0:
        raise ValueError("bin_width must be positive")
    start = math.floor(nu.lower.min() / bin_width + 1e-9)
    stop = math.ceil(nu.upper.max() / bin_width - 1e-9)
    edges = np.arange(start, stop + 1) * bin_width
    length = np.maximum(nu.upper - nu.lower, 1e-300)
    frac = np.clip((edges[np.newaxis, :] - nu.lower[:, np.newaxis]) / length[:, np.newaxis], 0.0, 1.0)
    cumulative = nu.mass @ frac
    return edges, np.diff(cumulative)


def l2_norm(nu: ProjectedMeasure, bin_width: float) -> float:
    """‖dν/dLeb‖_{L²} of the histogram density: sqrt(Σ mass²/width)"""
    _, masses = histogram(nu, bin_width)
    return float(np.sqrt(np.sum(masses ** 2) / bin_width))


def density_l2(
    family: MarstrandFamily,
    t: Sequence[float],
    leaf: LeafApprox,
    measure: MarkovMeasure,
    bin_width: float,
    rho: float,
    c1: Optional[float] = None,
) -> float:
    if bin_width < rho * 1e-3:
        raise ValueError("bin_width is below the working resolution")
    nu = projected_measure(family.system(t, leaf), measure, rho, c1)
    return l2_norm(nu, bin_width)


def weighted_quantile(values: np.ndarray, weights: np.ndarray, level: float) -> float:
    order = np.argsort(values)
    cumulative = np.cumsum(weights[order]) / weights.sum()
    k = int(np.searchsorted(cumulative, level - 1e-12))
    return float(values[order][min(k, len(values) - 1)])


@dataclass
class MarstrandSelection:
    t_star: np.ndarray
    K1: float
    blocks: List[Tuple[int, ...]]
    coverage: float
    quantiles: List[float] = field(default_factory=list)
    per_leaf: List[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "t_star": self.t_star.tolist(),
            "K1": self.K1,
            "blocks": ["".join(map(str, b)) for b in self.blocks],
            "coverage": self.coverage,
            "quantiles": self.quantiles,
        }


def sample_leaf_blocks(
    model,
    measure: MarkovMeasure,
    scale: float,
    count: int,
    seed: int = 0,
    c1: Optional[float] = None,
) -> Tuple[List[Tuple[int, ...]], np.ndarray]:
    """μ⁻-weighted sample of distinct leaf blocks at unstable scale ``scale``"""
    blocks = leaf_blocks_at_scale(model, scale, c1)
    weights = np.array([backward_measure(measure, b) for b in blocks])
    if count >= len(blocks):
        return blocks, weights
    rng = np.random.default_rng(seed)
    picked = sorted(set(rng.choice(len(blocks), size=count, replace=True, p=weights / weights.sum()).tolist()))
    return [blocks[i] for i in picked], weights[picked]


def _leaf_norms(family, t, leaves, measure, bin_width, rho, c1) -> np.ndarray:
    return np.array([density_l2(family, t, leaf, measure, bin_width, rho, c1) for leaf in leaves])


def select_marstrand_parameter(
    family: MarstrandFamily,
    measure: MarkovMeasure,
    xi: float,
    rho: float,
    t_samples: int = 8,
    leaf_samples: int = 32,
    bin_width: Optional[float] = None,
    c14: float = 1.0,
    c1: Optional[float] = None,
    seed: int = 0,
    threads: int = 1,
) -> MarstrandSelection:
    """
    Pick t* among t = 0 and random samples, minimizing the μ⁻-weighted
    (1 − ξ/2)-quantile of the leafwise L² norms; K1 is that quantile and the
    selected blocks are those at or below it.

    Raises:
        SelectionError: if every sampled parameter has an unbounded quantile
    """
    if not 0.0 < xi < 1.0:
        raise ValueError("xi must lie in (0, 1)")
    model = family.model
    bin_width = rho if bin_width is None else bin_width
    blocks, weights = sample_leaf_blocks(model, measure, c14 * rho, leaf_samples, seed, c1)
    leaves = [model.leaf(b) for b in blocks]
    rng = np.random.default_rng(seed)
    ts = np.vstack([np.zeros(family.n_params), family.sample(rng, t_samples - 1)]) if t_samples > 1 else np.zeros((1, family.n_params))

    norms = Parallel(n_jobs=threads, prefer="threads")(
        delayed(_leaf_norms)(family, t, leaves, measure, bin_width, rho, c1) for t in ts
    )
    level = 1.0 - xi / 2.0
    quantiles = [weighted_quantile(n, weights, level) if np.all(np.isfinite(n)) else np.inf for n in norms]
    best = int(np.argmin(quantiles))
    if not np.isfinite(quantiles[best]):
        raise SelectionError("no sampled parameter has bounded densities")
    K1 = quantiles[best]
    keep = norms[best] <= K1
    coverage = float(weights[keep].sum() / weights.sum())
    per_leaf = [
        {"block": "".join(map(str, b)), "weight": float(w), "l2": float(v), "selected": bool(k)}
        for b, w, v, k in zip(blocks, weights, norms[best], keep)
    ]
    logger.info("marstrand selection on %s: K1=%.4g, coverage %.4f over %d blocks", model.name, K1, coverage, len(blocks))
    return MarstrandSelection(ts[best], K1, [b for b, k in zip(blocks, keep) if k], coverage, quantiles, per_leaf)


def _pair_term(ma: float, mb: float, xa: float, xb: float, r: float) -> float:
    return ma * mb if abs(xa - xb) <= r else 0.0


def pair_statistic(system: FunctionSystem, measure: MarkovMeasure, depth: int, r: float) -> Tuple[float, float]:
    """
    X_r/r = Σ_{θ≠τ} μ(θ)μ(τ)·1[|π(θ) − π(τ)| ≤ r] / r over words of length
    ``depth``, once over all pairs and once through the partition by
    first-disagreement index. Exact summation makes the two agree bitwise.
    """
    if r <= 0.0:
        raise ValueError("r must be positive")
    leaf = system.leaf
    words = [tuple(w) for w in word_array(system.model.subshift, depth, following=leaf.final_letter).tolist()]
    lo, _ = system.intervals(np.array(words, dtype=np.int64))
    mass = [measure.forward(leaf.final_letter, w) for w in words]
    pos = lo.tolist()

    direct = [
        _pair_term(mass[i], mass[j], pos[i], pos[j], r)
        for i in range(len(words)) for j in range(len(words)) if i != j
    ]

    by_prefix: Dict[Tuple[int, ...], List[int]] = {}
    for i, w in enumerate(words):
        for k in range(depth):
            by_prefix.setdefault(w[:k], []).append(i)
    split = []
    for k in range(depth):
        for prefix, members in by_prefix.items():
            if len(prefix) != k:
                continue
            branches: Dict[int, List[int]] = {}
            for i in members:
                branches.setdefault(words[i][k], []).append(i)
            for a, first in branches.items():
                for b, second in branches.items():
                    if a == b:
                        continue
                    split.extend(_pair_term(mass[i], mass[j], pos[i], pos[j], r) for i in first for j in second)
    return math.fsum(direct) / r, math.fsum(split) / r
