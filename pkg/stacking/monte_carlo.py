"""
Monte Carlo Recurrence
Estimates, for points (x, θ⁻) of K, the probability over ω ∈ Ω that no
piece a at scale ρ renormalizes x into the relaxed interior K₋ρ² of the
leaf θ⁻a.

Affine models only: there every piece interval moves rigidly under ω, by
d = D·ω with a sparse operator D (pieces × blocks), and
R^ω_a(x) = (x − lo_a − d_a) / |I_a|.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from sklearn.linear_model import LinearRegression

from model.horseshoe import HorseshoeModel, ModelError
from model.intervals import endpoints
from model.perturbation import PerturbationFamily
from model.pieces import pieces_at_scale
from stacking.candidate import CandidateK, block_key, relaxed_interior
from symbolic.budget import enumeration_budget

logger = logging.getLogger(__name__)


def philox_generator(seed: int, trial: int, block: int = 0) -> np.random.Generator:
    """Counter-based stream keyed by (seed, trial, block), reproducible without the others"""
    return np.random.Generator(np.random.Philox(counter=block << 128, key=(seed << 64) | trial))


def omega_coordinate(seed: int, trial: int, block: int) -> float:
    """ω_b of trial ``trial``: one uniform draw on [−1, 1] from its own stream"""
    return float(philox_generator(seed, trial, block).uniform(-1.0, 1.0))


@dataclass(frozen=True)
class OmegaParams:
    """ω ∈ [−1,1]^{Σ₁}, one coordinate per block of the family"""
    family: PerturbationFamily
    omega: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.omega.shape != (self.family.n_params,):
            raise ValueError(f"expected {self.family.n_params} coordinates, got {self.omega.shape}")
        if np.any(np.abs(self.omega) > 1.0):
            raise ValueError("coordinates must lie in [-1, 1]")

    @classmethod
    def sample(cls, family: PerturbationFamily, seed: int, trial: int) -> "OmegaParams":
        omega = np.array([omega_coordinate(seed, trial, b) for b in range(family.n_params)])
        return cls(family, omega)

    def perturbation(self):
        return self.family.perturbation(self.omega)


def displacement_operator(model: HorseshoeModel, family: PerturbationFamily, leaf, pieces) -> sparse.csr_matrix:
    """
    D with (D·ω)_a the displacement of piece a: a hit of block b at step j
    contributes c₃ρ·Π_{i<j} λ_{θ_i}.
    """
    lam = model.arr("lam")
    rows, cols, vals = [], [], []
    for r, p in enumerate(pieces):
        letters = p.word.letters
        coeff = family.amplitude
        for j in range(len(letters)):
            idx = family.block_of(leaf.letters + letters[:j], letters[j:])
            if idx is not None:
                rows.append(r)
                cols.append(idx)
                vals.append(coeff)
            coeff *= lam[letters[j] - 1]
    return sparse.csr_matrix((vals, (rows, cols)), shape=(len(pieces), family.n_params))


@dataclass
class _LeafSystem:
    """
    Grid points of one leaf block and the success segments of its pieces.

    Segment i is the part of piece ``seg_piece[i]`` that renormalizes into one
    component [seg_lo[i], seg_hi[i]] of the target leaf's K₋ε, in the piece's
    unit coordinate.
    """
    block: Tuple[int, ...]
    xs: np.ndarray
    lower: np.ndarray
    length: np.ndarray
    D: sparse.csr_matrix
    seg_piece: np.ndarray
    seg_lo: np.ndarray
    seg_hi: np.ndarray

    @property
    def units(self) -> int:
        return len(self.xs) + len(self.seg_piece)

    def failures(self, omega: np.ndarray) -> np.ndarray:
        """Boolean mask of grid points no moved segment covers"""
        d = (self.D @ omega)[self.seg_piece]
        base = self.lower[self.seg_piece] + d
        scale = self.length[self.seg_piece]
        first = np.searchsorted(self.xs, base + scale * self.seg_lo, side="left")
        stop = np.searchsorted(self.xs, base + scale * self.seg_hi, side="right")
        cover = np.zeros(len(self.xs) + 1, dtype=np.int64)
        np.add.at(cover, first, 1)
        np.add.at(cover, stop, -1)
        return np.cumsum(cover[:-1]) == 0


def _leaf_system(model, family, K, K_inner, block, rho, grid_dx, c1) -> _LeafSystem:
    leaf = model.leaf(block)
    xs = np.unique(np.concatenate([
        np.arange(iv.lower, iv.upper + 1e-12, grid_dx) for iv in K.intervals[block]
    ]))
    pieces = pieces_at_scale(model, leaf, rho, c1)
    lower = np.array([p.interval.lower for p in pieces])
    length = np.array([p.interval.length for p in pieces])
    D = displacement_operator(model, family, leaf, pieces)

    targets: Dict[Optional[Tuple[int, ...]], np.ndarray] = {}
    seg_piece, seg_lo, seg_hi = [], [], []
    for i, p in enumerate(pieces):
        tb = K_inner.block_of(leaf.letters + p.word.letters)
        if tb is None:
            continue
        if tb not in targets:
            targets[tb] = endpoints(K_inner.intervals[tb]).reshape(-1, 2)
        for lo, hi in targets[tb]:
            seg_piece.append(i)
            seg_lo.append(lo)
            seg_hi.append(hi)
    return _LeafSystem(
        block, xs, lower, length, D,
        np.array(seg_piece, dtype=np.int64), np.array(seg_lo, dtype=float), np.array(seg_hi, dtype=float),
    )


@dataclass
class MonteCarloResult:
    rho: float
    trials: int
    grid: Dict[str, np.ndarray]
    failure: np.ndarray
    blocks_covered: int = 0
    blocks_total: int = 0

    @property
    def n_points(self) -> int:
        return int(sum(len(xs) for xs in self.grid.values()))

    @property
    def points(self) -> List[Tuple[str, float]]:
        """(block key, x) per grid point, in the order of ``failure``"""
        return [(key, float(x)) for key, xs in self.grid.items() for x in xs]

    @property
    def max_failure(self) -> float:
        return float(self.failure.max()) if len(self.failure) else 0.0

    @property
    def resolved(self) -> bool:
        return self.max_failure > 0.0

    def max_failure_label(self) -> str:
        if not self.resolved:
            return f"< 1/{self.trials}"
        return f"{self.max_failure:.6g}"

    def rows(self) -> List[dict]:
        return [{"block": b, "x": x, "failure": float(f)} for (b, x), f in zip(self.points, self.failure)]

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "trials": self.trials,
            "n_points": self.n_points,
            "max_failure": self.max_failure_label(),
            "mean_failure": float(self.failure.mean()) if len(self.failure) else 0.0,
            "leaf_blocks": {"covered": self.blocks_covered, "total": self.blocks_total},
        }


def monte_carlo_recurrence(
    model: HorseshoeModel,
    K: CandidateK,
    family: PerturbationFamily,
    rho: float,
    trials: int,
    grid_dx: Optional[float] = None,
    erosion: Optional[float] = None,
    max_leaf_blocks: Optional[int] = None,
    seed: int = 0,
    c1: Optional[float] = None,
) -> MonteCarloResult:
    """
    Failure rate per grid point: the fraction of trials ω with no piece a
    such that x ∈ I^ω_a and R^ω_a(x) ∈ K₋ε of the leaf θ⁻a (ε = ρ² by
    default).

    Raises:
        ModelError: for models with bend or shear
    """
    if not model.is_affine:
        raise ModelError("the Monte Carlo fast path needs an affine model")
    if trials < 1:
        raise ValueError("trials must be positive")
    grid_dx = rho ** 2 if grid_dx is None else grid_dx
    if grid_dx > rho ** 2:
        logger.warning("grid step %.3g is coarser than rho^2 = %.3g", grid_dx, rho ** 2)
    erosion = rho ** 2 if erosion is None else erosion
    K_inner = relaxed_interior(K, erosion)
    blocks = K.blocks if max_leaf_blocks is None else K.blocks[:max_leaf_blocks]
    if len(blocks) < len(K.blocks):
        logger.warning("monte carlo covers %d of %d leaf blocks of K", len(blocks), len(K.blocks))
    systems = [_leaf_system(model, family, K, K_inner, b, rho, grid_dx, c1) for b in blocks]

    failures = [np.zeros(len(s.xs)) for s in systems]
    for trial in range(trials):
        omega = OmegaParams.sample(family, seed, trial).omega
        for s, fail in zip(systems, failures):
            enumeration_budget.charge(s.units)
            fail += s.failures(omega)
        logger.debug("trial %d of %d done", trial + 1, trials)

    grid = {block_key(s.block): s.xs for s in systems}
    failure = np.concatenate(failures) / trials if failures else np.zeros(0)
    result = MonteCarloResult(rho, trials, grid, failure, len(blocks), len(K.blocks))
    if not result.resolved:
        logger.warning("no failures in %d trials at rho=%.4g: rate below resolution", trials, rho)
    logger.info("monte carlo on %s at rho=%.4g: %d points, max failure %s", model.name, rho, result.n_points, result.max_failure_label())
    return result


def fit_failure_exponent(results: Sequence[MonteCarloResult], c: float, k: int, d: float) -> Optional[float]:
    """
    Slope of log(max failure) against ρ^{−(c/k)(d−1)} over the ladder;
    None when fewer than two rates are resolved.
    """
    xs, ys = [], []
    for r in results:
        if r.resolved:
            xs.append([r.rho ** (-(c / k) * (d - 1.0))])
            ys.append(np.log(r.max_failure))
    if len(xs) < 2:
        return None
    return float(LinearRegression().fit(np.array(xs), np.array(ys)).coef_[0])


@dataclass
class OracleResult:
    estimate: float
    expected: float
    sigma: float


def bernoulli_failure_oracle(p: float, m: int, trials: int, seed: int = 0) -> OracleResult:
    """All of m independent events with success probability p fail: (1 − p)^m"""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    rng = philox_generator(seed, 0)
    failed = np.all(rng.random((trials, m)) >= p, axis=1)
    expected = (1.0 - p) ** m
    return OracleResult(float(failed.mean()), expected, float(np.sqrt(expected * (1.0 - expected) / trials)))
