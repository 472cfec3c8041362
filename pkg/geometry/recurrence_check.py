"""
Recurrent Compact Verification
Certify that every grid cell of K renormalizes, along some piece, into the
interior of K, and test how witness margins survive C¹-small perturbations.

Witness search: words by increasing length. Under the default ``max-margin``
rule the largest margin within the first length that has an acceptable
witness wins, ties going to the lexicographically first word; under
``first`` the first acceptable word in lexicographic order wins. A witness
is acceptable when the center's depth into K exceeds twice the grid error,
the grid error being the measured spread of the renormalized cell around
its center.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from geometry.renormalization import WallJitter, piece_image, renormalize_value
from model.horseshoe import HorseshoeModel
from model.intervals import Interval, union_depth
from model.perturbation import PerturbationFamily
from stacking.candidate import CandidateK, block_key
from symbolic.subshift import SYMBOL_CHARS, LeafApprox, word_array

logger = logging.getLogger(__name__)

WITNESS_RULES = ("max-margin", "first")
ROBUSTNESS_MODES = ("family", "jitter")


@dataclass(frozen=True)
class GridSpec:
    """Each K interval is cut into ``cells`` equal cells"""
    cells: int = 400

    def __post_init__(self):
        if self.cells < 1:
            raise ValueError("cells must be positive")

    def cells_of(self, intervals: Sequence[Interval]) -> List[Interval]:
        out = []
        for iv in intervals:
            edges = np.linspace(iv.lower, iv.upper, self.cells + 1)
            out.extend(Interval(float(a), float(b)) for a, b in zip(edges[:-1], edges[1:]))
        return out


@dataclass(frozen=True)
class Witness:
    block: Tuple[int, ...]
    cell: Interval
    word: Tuple[int, ...]
    margin: float
    error: float

    def to_dict(self) -> dict:
        return {
            "block": block_key(self.block),
            "cell": self.cell.as_list(),
            "word": "".join(SYMBOL_CHARS[a - 1] for a in self.word),
            "margin": self.margin,
        }


@dataclass
class RecurrenceCertificate:
    K: CandidateK = field(repr=False)
    grid: GridSpec
    witnesses: List[Witness]
    gamma_label: str = "0"

    @property
    def min_margin(self) -> float:
        return min(w.margin for w in self.witnesses)

    @property
    def max_word_length(self) -> int:
        return max(len(w.word) for w in self.witnesses)

    def recheck(self, model: HorseshoeModel, gamma=None, jitter: Optional[WallJitter] = None) -> np.ndarray:
        """Margins of the stored witnesses re-evaluated from scratch"""
        return np.array([
            witness_margin(model, gamma, self.K, w.block, w.cell, w.word, jitter)[0] for w in self.witnesses
        ])

    def to_dict(self) -> dict:
        return {
            "status": "certified",
            "rho": self.K.rho,
            "grid_cells": self.grid.cells,
            "gamma": self.gamma_label,
            "n_cells": len(self.witnesses),
            "min_margin": self.min_margin,
            "max_word_length": self.max_word_length,
            "witnesses": [w.to_dict() for w in self.witnesses],
        }


@dataclass
class Counterexample:
    block: Tuple[int, ...]
    cell: Interval
    uncovered: List[Tuple[Tuple[int, ...], Interval]]
    max_len: int

    def to_dict(self) -> dict:
        return {
            "status": "counterexample",
            "block": block_key(self.block),
            "cell": self.cell.as_list(),
            "max_len": self.max_len,
            "n_uncovered": len(self.uncovered),
            "uncovered": [[block_key(b), c.as_list()] for b, c in self.uncovered],
        }


def witness_margin(
    model: HorseshoeModel,
    gamma,
    K: CandidateK,
    block: Tuple[int, ...],
    cell: Interval,
    word: Tuple[int, ...],
    jitter: Optional[WallJitter] = None,
    leaf: Optional[LeafApprox] = None,
) -> Tuple[float, float]:
    """
    (margin, grid error) of ``word`` on ``cell``; margin is the center's
    depth into K of leaf θ⁻a̲ minus the error, −inf when the cell leaves
    the open piece interval.
    """
    leaf = model.leaf(block) if leaf is None else leaf
    interval = piece_image(model, gamma, leaf, word, jitter)
    if not (interval.lower < cell.lower and cell.upper < interval.upper):
        return -np.inf, np.inf
    ys = [renormalize_value(model, gamma, leaf, word, x, jitter, interval) for x in (cell.lower, cell.midpoint, cell.upper)]
    if any(y is None for y in ys):
        return -np.inf, np.inf
    lo, center, hi = ys
    error = max(abs(lo - center), abs(hi - center))
    depth = union_depth(K.for_leaf(leaf.letters + word), center)
    return depth - error, error


def _candidate_words(model: HorseshoeModel, last: int, max_len: int):
    for n in range(1, max_len + 1):
        yield n, [tuple(row) for row in word_array(model.subshift, n, following=last).tolist()]


def find_witness(
    model: HorseshoeModel,
    gamma,
    K: CandidateK,
    block: Tuple[int, ...],
    cell: Interval,
    max_len: int,
    leaf: Optional[LeafApprox] = None,
    rule: str = "max-margin",
) -> Optional[Witness]:
    if rule not in WITNESS_RULES:
        raise ValueError(f"unknown witness rule {rule!r}, expected one of {WITNESS_RULES}")
    leaf = model.leaf(block) if leaf is None else leaf
    for _, words in _candidate_words(model, leaf.final_letter, max_len):
        best = None
        for word in words:
            margin, error = witness_margin(model, gamma, K, block, cell, word, leaf=leaf)
            # center depth must exceed twice the grid error
            if margin > error and (best is None or margin > best.margin):
                best = Witness(block, cell, word, margin, error)
                if rule == "first":
                    return best
        if best is not None:
            return best
    return None


def _deepest(uncovered: List[Tuple[Tuple[int, ...], Interval]]) -> Tuple[Tuple[int, ...], Interval]:
    """Middle cell of the longest run of adjacent uncovered cells; first run on ties"""
    runs: List[List[Tuple[Tuple[int, ...], Interval]]] = []
    for block, cell in uncovered:
        last = runs[-1][-1] if runs else None
        if last is not None and last[0] == block and last[1].upper == cell.lower:
            runs[-1].append((block, cell))
        else:
            runs.append([(block, cell)])
    longest = max(runs, key=len)
    return longest[(len(longest) - 1) // 2]


def verify_recurrent_compact(
    model: HorseshoeModel,
    gamma,
    K: CandidateK,
    grid: GridSpec,
    max_len: int,
    threads: int = 1,
    gamma_label: str = "0",
    rule: str = "max-margin",
):
    """
    A certificate covering every grid cell of K, or a ``Counterexample``
    naming the deepest uncovered cell (and listing all of them).
    """
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    tasks = [(block, cell) for block in K.blocks for cell in grid.cells_of(K.intervals[block])]
    found = Parallel(n_jobs=threads, prefer="threads")(
        delayed(find_witness)(model, gamma, K, block, cell, max_len, rule=rule) for block, cell in tasks
    )
    uncovered = [task for task, w in zip(tasks, found) if w is None]
    if uncovered:
        block, cell = _deepest(uncovered)
        logger.warning(
            "K on %s is not certified: %d of %d cells uncovered, deepest at %s in block %s",
            model.name, len(uncovered), len(tasks), cell, block_key(block),
        )
        return Counterexample(block, cell, uncovered, max_len)

    certificate = RecurrenceCertificate(K, grid, list(found), gamma_label)
    logger.info(
        "K on %s certified: %d cells, min margin %.4g, words up to length %d",
        model.name, len(tasks), certificate.min_margin, certificate.max_word_length,
    )
    return certificate


@dataclass
class RobustnessRow:
    delta: float
    min_margin: float

    @property
    def survived(self) -> bool:
        return self.min_margin > 0.0


@dataclass
class RobustnessReport:
    rows: List[RobustnessRow]

    @property
    def breaking_delta(self) -> Optional[float]:
        return next((r.delta for r in self.rows if not r.survived), None)

    def to_dict(self) -> Dict[str, object]:
        return {
            "rows": [{"delta": r.delta, "min_margin": r.min_margin, "survived": r.survived} for r in self.rows],
            "breaking_delta": self.breaking_delta,
        }


def _family_perturbation(family: PerturbationFamily, delta: float, rng: np.random.Generator):
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta {delta} must lie in [0, 1] as a fraction of the family amplitude")
    return family.perturbation(delta * rng.uniform(-1.0, 1.0, family.n_params))


def robustness_check(
    model: HorseshoeModel,
    certificate: RecurrenceCertificate,
    deltas: Sequence[float],
    samples: int = 4,
    family: Optional[PerturbationFamily] = None,
    mode: str = "family",
    seed: int = 0,
) -> RobustnessReport:
    """
    Re-evaluate every witness under ``samples`` random perturbations of each
    size δ and report the smallest surviving margin.

    In ``family`` mode the perturbation is γ(ω) with ω drawn from δ·[−1,1]^{Σ₁},
    so the pieces shift by at most δ·c₃ρ; in ``jitter`` mode it is a
    ``WallJitter`` of C¹ size δ.
    """
    if mode not in ROBUSTNESS_MODES:
        raise ValueError(f"unknown robustness mode {mode!r}, expected one of {ROBUSTNESS_MODES}")
    if mode == "family" and family is None:
        raise ValueError("family mode needs a perturbation family")
    rng = np.random.default_rng(seed)
    rows = []
    for delta in deltas:
        if delta == 0.0:
            margin = float(certificate.recheck(model).min())
        elif mode == "family":
            margin = min(
                float(certificate.recheck(model, _family_perturbation(family, delta, rng)).min())
                for _ in range(samples)
            )
        else:
            margin = min(
                float(certificate.recheck(model, None, WallJitter.sample(model, delta, rng)).min())
                for _ in range(samples)
            )
        rows.append(RobustnessRow(float(delta), margin))
        logger.info("robustness (%s) at delta=%.3g: min margin %.4g", mode, delta, margin)
    report = RobustnessReport(rows)
    if report.breaking_delta is not None:
        logger.warning("witness margins break at delta=%.3g", report.breaking_delta)
    return report
