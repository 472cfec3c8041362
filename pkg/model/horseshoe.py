"""
Skew Horseshoe Models
Piecewise maps of the unit cube with sharp splitting λ^ss < λ^ws < 1 < μ.

A point is p = (u, w, s): u unstable, w weak-stable, s strong-stable. On the
Markov box P_i = [a_i, b_i] × [0,1]² the map is

    u ↦ μ_i (u − a_i)
    w ↦ t_i + λ^ws_i w + (κ_i + η_i (s − ½)) w (1 − w)
    s ↦ q_i + λ^ss_i s

κ (bend) and η (shear) are the optional nonlinearity hooks; with both zero the
model is affine and the strong-stable foliation is vertical. The wall of a
leaf is its s = ½ slice.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from config import settings
from model.intervals import Interval
from symbolic.subshift import (
    JunctionError,
    LeafApprox,
    Orientation,
    TransitionMatrix,
    Word,
    is_admissible,
)

logger = logging.getLogger(__name__)

WALL_S = 0.5
_BOX_TOL = 1e-12


class ModelError(ValueError):
    """Model data violates sharp splitting or the Markov structure."""


class OutsideDomain(ValueError):
    """Point outside every Markov box."""


class BranchError(ValueError):
    """No preimage of the point in the requested branch."""


@dataclass(frozen=True)
class SymbolData:
    u_interval: Tuple[float, float]
    rate_u: float
    rate_ws: float
    rate_ss: float
    t: float
    q: float
    bend: float = 0.0
    shear: float = 0.0


@dataclass(frozen=True)
class Box:
    u: Interval
    w: Interval
    s: Interval

    def contains(self, p: Sequence[float], tol: float = _BOX_TOL) -> bool:
        return all(iv.lower - tol <= x <= iv.upper + tol for iv, x in zip((self.u, self.w, self.s), p))

    @property
    def w_diameter(self) -> float:
        return self.w.length


@dataclass(frozen=True)
class HorseshoeModel:
    name: str
    subshift: TransitionMatrix
    symbols: Tuple[SymbolData, ...]
    _arrays: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if len(self.symbols) != self.subshift.n_symbols:
            raise ModelError("one SymbolData per symbol is required")
        for i, sd in enumerate(self.symbols, start=1):
            a, b = sd.u_interval
            if not 0.0 <= a < b <= 1.0:
                raise ModelError(f"symbol {i}: u_interval {sd.u_interval} not inside [0,1]")
            if not 0.0 < sd.rate_ss < sd.rate_ws < 1.0 < sd.rate_u:
                raise ModelError(
                    f"symbol {i}: sharp splitting needs 0 < λss < λws < 1 < μ, "
                    f"got {sd.rate_ss}, {sd.rate_ws}, {sd.rate_u}"
                )
            if abs(sd.rate_u * (b - a) - 1.0) > 1e-9:
                raise ModelError(f"symbol {i}: unstable image of the box must be [0,1]")
            if abs(sd.bend) + 0.5 * abs(sd.shear) >= sd.rate_ws:
                raise ModelError(f"symbol {i}: bend/shear break monotonicity of the w-map")
            if sd.t < -_BOX_TOL or sd.t + sd.rate_ws > 1.0 + _BOX_TOL:
                raise ModelError(f"symbol {i}: weak-stable image leaves [0,1]")
            if sd.q < -_BOX_TOL or sd.q + sd.rate_ss > 1.0 + _BOX_TOL:
                raise ModelError(f"symbol {i}: strong-stable image leaves [0,1]")

        u_sorted = sorted(sd.u_interval for sd in self.symbols)
        if any(prev[1] > nxt[0] + _BOX_TOL for prev, nxt in zip(u_sorted, u_sorted[1:])):
            raise ModelError("u_intervals overlap")
        s_sorted = sorted((sd.q, sd.q + sd.rate_ss) for sd in self.symbols)
        if any(prev[1] >= nxt[0] for prev, nxt in zip(s_sorted, s_sorted[1:])):
            raise ModelError("strong-stable images must be pairwise disjoint")

        arrays = {
            "a": np.array([sd.u_interval[0] for sd in self.symbols]),
            "b": np.array([sd.u_interval[1] for sd in self.symbols]),
            "mu": np.array([sd.rate_u for sd in self.symbols]),
            "lam": np.array([sd.rate_ws for sd in self.symbols]),
            "lam_ss": np.array([sd.rate_ss for sd in self.symbols]),
            "t": np.array([sd.t for sd in self.symbols]),
            "q": np.array([sd.q for sd in self.symbols]),
            "bend": np.array([sd.bend for sd in self.symbols]),
            "shear": np.array([sd.shear for sd in self.symbols]),
        }
        object.__setattr__(self, "_arrays", arrays)

    # --- data access ---------------------------------------------------

    @property
    def n_symbols(self) -> int:
        return self.subshift.n_symbols

    def symbol(self, i: int) -> SymbolData:
        self.subshift.check_symbol(i)
        return self.symbols[i - 1]

    def arr(self, key: str) -> np.ndarray:
        return self._arrays[key]

    @property
    def is_affine(self) -> bool:
        return not (self.arr("bend").any() or self.arr("shear").any())

    @property
    def has_shear(self) -> bool:
        return bool(self.arr("shear").any())

    @property
    def min_rate_ws(self) -> float:
        return float(self.arr("lam").min())

    @property
    def max_rate_ws(self) -> float:
        return float(self.arr("lam").max())

    @property
    def is_conformal(self) -> bool:
        lam = self.arr("lam")
        return self.is_affine and bool(np.all(lam == lam[0]))

    def default_c1(self) -> float:
        return self.min_rate_ws ** -0.5 + 0.01

    def default_c(self) -> float:
        return float(np.log(self.max_rate_ws) / np.log(self.min_rate_ws))

    def with_bend(self, delta: float) -> "HorseshoeModel":
        """Copy with every symbol's bend set to ``delta`` (signs alternate by symbol)"""
        symbols = tuple(
            replace(sd, bend=delta * (1 if i % 2 == 0 else -1)) for i, sd in enumerate(self.symbols)
        )
        return HorseshoeModel(f"{self.name}+bend({delta:g})", self.subshift, symbols)

    def with_shear(self, delta: float) -> "HorseshoeModel":
        symbols = tuple(replace(sd, shear=delta) for sd in self.symbols)
        return HorseshoeModel(f"{self.name}+shear({delta:g})", self.subshift, symbols)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "transition": [list(row) for row in self.subshift.entries],
            "symbols": [
                {
                    "u_interval": list(sd.u_interval),
                    "rate_u": sd.rate_u,
                    "rate_ws": sd.rate_ws,
                    "rate_ss": sd.rate_ss,
                    "t": sd.t,
                    "q": sd.q,
                    "bend": sd.bend,
                    "shear": sd.shear,
                }
                for sd in self.symbols
            ],
        }

    # --- componentwise maps (vectorized over numpy arrays) -------------

    def w_map(self, i: int, w, s):
        sd = self.symbols[i - 1]
        coef = sd.bend + sd.shear * (s - WALL_S)
        return sd.t + sd.rate_ws * w + coef * w * (1.0 - w)

    def w_map_inverse(self, i: int, w_image, s):
        """Solve w_map(i, w, s) = w_image for w on the increasing branch"""
        sd = self.symbols[i - 1]
        coef = sd.bend + sd.shear * (s - WALL_S)
        rhs = np.asarray(w_image, dtype=float) - sd.t
        lin = sd.rate_ws + coef
        disc = np.maximum(lin * lin - 4.0 * coef * rhs, 0.0)
        return 2.0 * rhs / (lin + np.sqrt(disc))

    def s_map(self, i: int, s):
        sd = self.symbols[i - 1]
        return sd.q + sd.rate_ss * s

    def s_map_inverse(self, i: int, s_image):
        sd = self.symbols[i - 1]
        return (np.asarray(s_image, dtype=float) - sd.q) / sd.rate_ss

    def u_map(self, i: int, u):
        sd = self.symbols[i - 1]
        return sd.rate_u * (u - sd.u_interval[0])

    def u_map_inverse(self, i: int, u_image):
        sd = self.symbols[i - 1]
        return sd.u_interval[0] + np.asarray(u_image, dtype=float) / sd.rate_u

    def stable_jacobian(self, i: int, w: float, s: float) -> np.ndarray:
        """Derivative of (w, s) ↦ (w_map, s_map) on box i"""
        sd = self.symbols[i - 1]
        coef = sd.bend + sd.shear * (s - WALL_S)
        m11 = sd.rate_ws + coef * (1.0 - 2.0 * w)
        m12 = sd.shear * w * (1.0 - w)
        return np.array([[m11, m12], [0.0, sd.rate_ss]])

    # --- boxes ---------------------------------------------------------

    def box_of(self, p: Sequence[float]) -> Optional[int]:
        u, w, s = p
        if not (-_BOX_TOL <= w <= 1.0 + _BOX_TOL and -_BOX_TOL <= s <= 1.0 + _BOX_TOL):
            return None
        for i, sd in enumerate(self.symbols, start=1):
            if sd.u_interval[0] - _BOX_TOL <= u <= sd.u_interval[1] + _BOX_TOL:
                return i
        return None

    def image_branch(self, p: Sequence[float]) -> Optional[int]:
        """Branch whose forward image contains p, decided by the disjoint s-images"""
        s = p[2]
        for i, sd in enumerate(self.symbols, start=1):
            if sd.q - _BOX_TOL <= s <= sd.q + sd.rate_ss + _BOX_TOL:
                return i
        return None

    def base_map(self, i: int, p: Sequence[float]) -> np.ndarray:
        u, w, s = p
        return np.array([self.u_map(i, u), self.w_map(i, w, s), self.s_map(i, s)], dtype=float)

    def base_inverse(self, i: int, p: Sequence[float]) -> np.ndarray:
        u, w, s = p
        s0 = float(self.s_map_inverse(i, s))
        return np.array([float(self.u_map_inverse(i, u)), float(self.w_map_inverse(i, w, s0)), s0])

    # --- leaves --------------------------------------------------------

    def leaf_u_interval(self, letters: Sequence[int]) -> Interval:
        """Unstable interval of leaves with backward suffix ``letters`` (reading order)"""
        lo, hi = 0.0, 1.0
        for a in letters:
            sd = self.symbols[a - 1]
            lo = sd.u_interval[0] + lo / sd.rate_u
            hi = sd.u_interval[0] + hi / sd.rate_u
        return Interval(lo, hi)

    def leaf(self, letters: Sequence[int]) -> LeafApprox:
        suffix = Word.backward(letters)
        if not is_admissible(suffix, self.subshift):
            raise JunctionError(f"leaf suffix {suffix} is not admissible")
        return LeafApprox(suffix, 0.5 * self.leaf_u_interval(suffix.letters).length)

    def extend_leaf(self, leaf: LeafApprox, word: Word, max_depth: Optional[int] = None) -> LeafApprox:
        """Leaf θ⁻a̲ reached by renormalizing along ``word``"""
        if len(word) and not self.subshift.allows(leaf.final_letter, word.first):
            raise JunctionError(f"word {word} cannot follow leaf letter {leaf.final_letter}")
        letters = leaf.letters + word.letters
        if max_depth is not None:
            letters = letters[-max_depth:]
        return self.leaf(letters)

    def leaf_of_point(self, u: float, depth: int) -> LeafApprox:
        """Backward coding of u from its forward unstable itinerary"""
        letters = []
        for _ in range(depth):
            i = self.box_of((u, 0.5, 0.5))
            if i is None:
                raise OutsideDomain(f"u={u} leaves the unstable domain")
            letters.append(i)
            u = float(np.clip(self.u_map(i, u), 0.0, 1.0))
        return self.leaf(list(reversed(letters)))


def apply(model: HorseshoeModel, gamma, p: Sequence[float]) -> np.ndarray:
    """
    Image of p under the (perturbed) map f^γ = (id + Σ γ_a X_a)∘f.

    ``gamma`` is None or a perturbation object exposing ``displacement(point)``
    (a weak-stable shift).
    """
    i = model.box_of(p)
    if i is None:
        raise OutsideDomain(f"point {tuple(p)} is outside every Markov box")
    image = model.base_map(i, p)
    if gamma is not None:
        image[1] += gamma.displacement(image)
    return image


def apply_inverse(model: HorseshoeModel, gamma, p: Sequence[float], branch: int) -> np.ndarray:
    """Unique preimage of p inside P_branch; fixed-point iteration when perturbed"""
    model.subshift.check_symbol(branch)
    y = model.base_inverse(branch, p)
    if gamma is not None:
        target = np.asarray(p, dtype=float)
        for iteration in range(settings.INVERSE_MAX_ITER):
            shifted = target.copy()
            shifted[1] -= gamma.displacement(model.base_map(branch, y))
            y_next = model.base_inverse(branch, shifted)
            if np.max(np.abs(y_next - y)) < settings.INVERSE_TOL:
                y = y_next
                break
            y = y_next
        else:
            raise BranchError(f"inverse iteration did not converge for {tuple(p)} in branch {branch}")
        logger.debug("perturbed inverse converged in %d iterations", iteration + 1)

    sd = model.symbols[branch - 1]
    a, b = sd.u_interval
    if not (a - 1e-10 <= y[0] <= b + 1e-10 and -1e-10 <= y[1] <= 1 + 1e-10 and -1e-10 <= y[2] <= 1 + 1e-10):
        raise BranchError(f"point {tuple(p)} has no preimage in branch {branch}")
    return y


def _stable_image_box(model: HorseshoeModel, i: int, w: Interval, s: Interval) -> Tuple[Interval, Interval]:
    s_img = Interval(float(model.s_map(i, s.lower)), float(model.s_map(i, s.upper)))
    if model.symbols[i - 1].shear == 0.0:
        coef_s = WALL_S
        w_img = Interval(float(model.w_map(i, w.lower, coef_s)), float(model.w_map(i, w.upper, coef_s)))
        return w_img, s_img
    ws = np.linspace(w.lower, w.upper, 9)
    ss = np.linspace(s.lower, s.upper, 9)
    vals = model.w_map(i, ws[:, None], ss[None, :])
    return Interval(float(vals.min()), float(vals.max())), s_img


def cylinder_box(model: HorseshoeModel, word: Word) -> Box:
    """
    Bounding box of the geometric cylinder.

    Forward words: V = ∩ f^i(P_{θ_i}), composed from the innermost letter out.
    Backward words: ∩ f^{-j}(P_{θ_{-j}}), a u-slab of full stable extent.
    """
    if not is_admissible(word, model.subshift):
        raise JunctionError(f"word {word} is not admissible")
    unit = Interval(0.0, 1.0)
    if word.orientation == Orientation.BACKWARD:
        if len(word) == 0:
            return Box(unit, unit, unit)
        return Box(model.leaf_u_interval(word.letters), unit, unit)

    w, s = unit, unit
    for a in reversed(word.letters):
        w, s = _stable_image_box(model, a, w, s)
    return Box(unit, w, s)


def leaf_distance(model: HorseshoeModel, l1: LeafApprox, l2: LeafApprox) -> float:
    """Unstable distance between two leaves of the same Markov box"""
    if l1.final_letter != l2.final_letter:
        raise ValueError(f"leaves end in different boxes ({l1.final_letter} vs {l2.final_letter})")
    u1 = model.leaf_u_interval(l1.letters).midpoint
    u2 = model.leaf_u_interval(l2.letters).midpoint
    return abs(u1 - u2)
