"""
Experiment Pipeline Stages
A registry of named stages with declared dependencies, and the runner that
executes a requested stage list against one resolved experiment spec.

Stages run sequentially in registry order; intra-stage parallelism is
delegated to the modules (capped by the spec's thread count). Every stage
draws its randomness from the spec seed, so a rerun of the embedded spec
reproduces the reports byte for byte.
"""
import logging
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import ExperimentSpec
from dimension.stable_dimension import continuity_experiment, dimension_table, upper_stable_dimension
from geometry.blender import ChaseFailed, Curve, blender_curve_chase
from geometry.projection_test import PROJECTION_MAPS, projection_interval_test
from geometry.recurrence_check import Counterexample, GridSpec, robustness_check, verify_recurrent_compact
from marstrand.density import select_marstrand_parameter
from marstrand.function_system import (
    MarstrandFamily,
    distortion_continuity_check,
    gibbs_constant_c9,
    transversal_pairs,
    transversality_constant,
)
from model.horseshoe import HorseshoeModel
from model.perturbation import block_scales, make_perturbation_family
from model.reference import model_from_spec
from pipeline.reports import ReportBundle, StageReport
from stacking.candidate import CandidateK, EmptyK, build_candidate_K
from stacking.monte_carlo import bernoulli_failure_oracle, fit_failure_exponent, monte_carlo_recurrence
from stacking.recurrence import recurrent_census
from thermo.gibbs import (
    build_gibbs_measure,
    gibbs_ratio_bounds,
    leaf_pushforward,
    piece_count_window,
    piece_mass_constant,
    pressure_estimate,
)

logger = logging.getLogger(__name__)


class DependencyError(RuntimeError):
    """A requested stage needs the output of a stage that is not scheduled before it."""

    def __init__(self, stage: str, missing: Sequence[str]):
        super().__init__(f"stage '{stage}' requires {', '.join(missing)}")
        self.stage = stage
        self.missing = list(missing)


@dataclass
class PipelineContext:
    """Shared state of one run: the spec, its model and the stage outputs"""
    spec: ExperimentSpec
    model: HorseshoeModel
    bundle: ReportBundle
    outputs: Dict[str, Any] = field(default_factory=dict)

    @property
    def rho(self) -> float:
        return self.spec.scales.rho

    @property
    def k(self) -> int:
        return self.spec.scales.k

    @property
    def c(self) -> float:
        c = self.spec.scales.c
        return self.model.default_c() if c is None else c

    @property
    def c1(self) -> float:
        c1 = self.spec.scales.c1
        return self.model.default_c1() if c1 is None else c1

    @property
    def threads(self) -> int:
        return self.spec.threads

    @property
    def d(self) -> float:
        return self.outputs["dim"].value

    def rng(self, stage: str) -> np.random.Generator:
        # one stream per stage, all keyed by the spec seed
        return np.random.default_rng([self.spec.seed, sum(map(ord, stage))])


@dataclass(frozen=True)
class Stage:
    name: str
    requires: Tuple[str, ...]
    runner: Callable[[PipelineContext], StageReport]


class StageRegistry:
    """Ordered registry of pipeline stages"""

    def __init__(self):
        self._stages: Dict[str, Stage] = {}
        self._lock = threading.RLock()

    def register(self, name: str, requires: Sequence[str] = ()):
        """Decorator registering ``runner`` under ``name``"""
        def wrap(runner: Callable[[PipelineContext], StageReport]):
            with self._lock:
                unknown = [r for r in requires if r not in self._stages]
                if unknown:
                    raise ValueError(f"stage '{name}' depends on unregistered {unknown}")
                self._stages[name] = Stage(name, tuple(requires), runner)
            return runner
        return wrap

    @property
    def names(self) -> List[str]:
        with self._lock:
            return list(self._stages)

    def get(self, name: str) -> Stage:
        with self._lock:
            if name not in self._stages:
                raise ValueError(f"unknown stage '{name}'; valid stages: {', '.join(self._stages)}")
            return self._stages[name]

    def schedule(self, stages: Sequence[str]) -> List[Stage]:
        """
        The requested stages in registry order.

        Raises:
            DependencyError: if a stage's requirement is not requested too
        """
        requested = {self.get(s).name for s in stages}
        ordered = [s for name, s in self._stages.items() if name in requested]
        for stage in ordered:
            missing = [r for r in stage.requires if r not in requested]
            if missing:
                raise DependencyError(stage.name, missing)
        return ordered

    def closure(self, stages: Sequence[str]) -> List[str]:
        """The requested stages plus everything they depend on, in registry order"""
        needed = set()
        todo = list(stages)
        while todo:
            stage = self.get(todo.pop())
            if stage.name not in needed:
                needed.add(stage.name)
                todo.extend(stage.requires)
        return [name for name in self.names if name in needed]


# Global stage registry
stage_registry = StageRegistry()


# ================= STAGES =================

@stage_registry.register("dim")
def _dim(ctx: PipelineContext) -> StageReport:
    cfg = ctx.spec.dimension
    estimate = upper_stable_dimension(ctx.model, cfg.eps, cfg.n_max)
    ctx.outputs["dim"] = estimate
    rows = dimension_table(ctx.model, range(1, estimate.n + 1))
    summary = {"model": ctx.model.name, "d_s": estimate.to_dict()}
    ctx.bundle.record_constant("d_s", estimate.value, "measured")
    ctx.bundle.record_constant("c", estimate.submultiplicativity, "measured")
    if cfg.continuity_deltas:
        table = continuity_experiment(ctx.model, cfg.continuity_deltas, cfg.continuity_depth, seed=ctx.spec.seed)
        summary["continuity"] = table.to_dict()
        ctx.bundle.record_constant("continuity_slope", table.slope, "measured")
    return StageReport("dim", summary, {"lambda_n": rows})


@stage_registry.register("gibbs", requires=("dim",))
def _gibbs(ctx: PipelineContext) -> StageReport:
    d = ctx.d
    measure = build_gibbs_measure(ctx.model, d)
    ctx.outputs["gibbs"] = measure
    n = min(12, ctx.spec.dimension.n_max)
    lo, hi = gibbs_ratio_bounds(ctx.model, measure, min(6, n))
    leaf = ctx.model.leaf((1,))
    pushed = leaf_pushforward(measure, ctx.model, leaf, ctx.rho, c1=ctx.c1)
    c11 = piece_mass_constant(pushed, d)
    ctx.bundle.record_constant("c11", c11, "measured")
    summary = {
        "measure": measure.to_dict(),
        "pressure": {"n": n, "value": pressure_estimate(ctx.model, d, n)},
        "ratio_bounds": [lo, hi],
        "leaf_mass": pushed.total_mass,
        "piece_count_window": piece_count_window(ctx.model, leaf, ctx.spec.scales.rho_ladder, d, ctx.c1),
    }
    return StageReport("gibbs", summary)


@stage_registry.register("marstrand", requires=("gibbs",))
def _marstrand(ctx: PipelineContext) -> StageReport:
    cfg = ctx.spec.marstrand
    consts = ctx.spec.constants
    family = MarstrandFamily(ctx.model, cfg.kind, cfg.amplitude)
    selection = select_marstrand_parameter(
        family, ctx.outputs["gibbs"], consts.xi, ctx.rho,
        t_samples=cfg.t_samples,
        leaf_samples=cfg.leaf_samples,
        bin_width=cfg.bin_width,
        c14=consts.c14,
        c1=ctx.c1,
        seed=ctx.spec.seed,
        threads=ctx.threads,
    )
    ctx.outputs["marstrand"] = (family, selection)
    summary = {"family": {"kind": cfg.kind, "amplitude": cfg.amplitude}, "selection": selection.to_dict()}
    ctx.bundle.record_constant("K1", selection.K1, "measured")

    leaf = ctx.model.leaf((1,))
    system = family.system(selection.t_star, leaf)
    c9 = gibbs_constant_c9(system, n_words=200, seed=ctx.spec.seed)
    ctx.bundle.record_constant("c9", c9, "measured")
    delta = 0.1 * cfg.amplitude if cfg.delta is None else cfg.delta
    t_near = np.clip(selection.t_star + delta, -cfg.amplitude, cfg.amplitude)
    summary["distortion_continuity"] = {
        "delta": delta,
        "value": distortion_continuity_check(family, leaf, selection.t_star, t_near, 4),
    }
    ctx.bundle.record_constant("delta", delta, "configured")
    if cfg.transversality_pairs:
        pairs = transversal_pairs(ctx.model, leaf, cfg.transversality_pairs, cfg.pair_depth, consts.L, seed=ctx.spec.seed)
        if pairs:
            report = transversality_constant(family, leaf, pairs, seed=ctx.spec.seed)
            summary["transversality"] = report.to_dict()
            ctx.bundle.record_constant("transversality_C", report.constant, "measured")
    return StageReport("marstrand", summary, {"L2-vs-leaf": selection.per_leaf})


def _candidate(ctx: PipelineContext, rho: float, allowed_blocks=None, system_for=None) -> CandidateK:
    consts = ctx.spec.constants
    params = {"c14": consts.c14, "c24": consts.c24, "c25": consts.c25, "q_tilde": consts.q_tilde}
    return build_candidate_K(
        ctx.model, rho, ctx.d, ctx.c, ctx.k, params,
        allowed_blocks=allowed_blocks,
        system_for=system_for,
        c1=ctx.c1,
        threads=ctx.threads,
    )


@stage_registry.register("build-k", requires=("marstrand",))
def _build_k(ctx: PipelineContext) -> StageReport:
    family, selection = ctx.outputs["marstrand"]
    t_star = selection.t_star
    system_for = (lambda leaf: family.system(t_star, leaf)) if np.any(t_star) else None
    K = _candidate(ctx, ctx.rho, selection.blocks, system_for)
    ctx.outputs["build-k"] = K
    ctx.bundle.record_constants(K.constants)
    census = recurrent_census(ctx.model, ctx.outputs["gibbs"], ctx.rho, ctx.c, ctx.k, ctx.spec.constants.c14, ctx.c1)
    stackings = list(K.witnesses.values())
    summary = {
        "K": K.to_dict(),
        "census": census.to_dict(),
        "stacks": {
            "well_distributed": sum(len(s.well_distributed()) for s in stackings),
            "min_distinct_parents": min(
                (s.parents.get(i, 0) for s in stackings for i in s.well_distributed()), default=None,
            ),
            "total_shortfall": sum(s.shortfall for s in stackings),
        },
    }
    return StageReport("build-k", summary)


@stage_registry.register("verify-k", requires=("build-k",))
def _verify_k(ctx: PipelineContext) -> StageReport:
    cfg = ctx.spec.geometry
    K = ctx.outputs["build-k"]
    result = verify_recurrent_compact(
        ctx.model, None, K, GridSpec(cfg.grid_cells), cfg.max_len, ctx.threads, rule=cfg.witness_rule,
    )
    ctx.outputs["verify-k"] = result
    if isinstance(result, Counterexample):
        return StageReport("verify-k", result.to_dict(), status="counterexample")
    family = None
    if cfg.robustness_mode == "family":
        consts = ctx.spec.constants
        family = make_perturbation_family(
            ctx.model, block_scales(ctx.rho, ctx.k, ctx.c, consts.kappa), ctx.rho, consts.c2, consts.c3, ctx.c1,
        )
    robustness = robustness_check(
        ctx.model, result, cfg.robustness_deltas, cfg.robustness_samples,
        family=family, mode=cfg.robustness_mode, seed=ctx.spec.seed,
    )
    summary = result.to_dict()
    summary["robustness"] = {"mode": cfg.robustness_mode, **robustness.to_dict()}
    return StageReport("verify-k", summary)


@stage_registry.register("mc", requires=("build-k",))
def _mc(ctx: PipelineContext) -> StageReport:
    cfg = ctx.spec.monte_carlo
    consts = ctx.spec.constants
    built: CandidateK = ctx.outputs["build-k"]
    ladder = sorted(set(ctx.spec.scales.rho_ladder) | {built.rho}, reverse=True)
    results, rows = [], []
    for rho in ladder:
        try:
            K = built if rho == built.rho else _candidate(ctx, rho)
        except EmptyK as e:
            logger.warning("monte carlo skips rho=%.4g: %s", rho, e)
            rows.append({"rho": rho, "trials": cfg.trials, "n_points": 0, "max_failure": None, "resolved": False})
            continue
        family = make_perturbation_family(
            ctx.model, block_scales(rho, ctx.k, ctx.c, consts.kappa), rho, consts.c2, consts.c3, ctx.c1,
        )
        result = monte_carlo_recurrence(
            ctx.model, K, family, rho, cfg.trials,
            grid_dx=cfg.grid_dx,
            erosion=cfg.erosion,
            max_leaf_blocks=cfg.max_leaf_blocks,
            seed=ctx.spec.seed,
            c1=ctx.c1,
        )
        results.append(result)
        rows.append({**result.to_dict(), "resolved": result.resolved})
    exponent = fit_failure_exponent(results, ctx.c, ctx.k, ctx.d)
    oracle = bernoulli_failure_oracle(0.3, 10, cfg.trials, ctx.spec.seed)
    summary = {
        "ladder": rows,
        "fitted_exponent": exponent,
        "oracle": {"estimate": oracle.estimate, "expected": oracle.expected, "sigma": oracle.sigma},
    }
    for name in ("c2", "c3", "kappa"):
        ctx.bundle.record_constant(name, getattr(consts, name), "configured")
    return StageReport("mc", summary, {"failure-vs-rho": rows})


@stage_registry.register("blender", requires=("verify-k",))
def _blender(ctx: PipelineContext) -> StageReport:
    cfg = ctx.spec.geometry
    if isinstance(ctx.outputs["verify-k"], Counterexample):
        return StageReport("blender", {"reason": "K is not certified"}, status="skipped")
    K: CandidateK = ctx.outputs["build-k"]
    rng = ctx.rng("blender")
    chases = []
    for i in range(cfg.curves):
        block = K.blocks[i % len(K.blocks)]
        intervals = K.intervals[block]
        iv = intervals[int(rng.integers(len(intervals)))]
        w0 = float(rng.uniform(iv.lower + 0.25 * iv.length, iv.upper - 0.25 * iv.length))
        slope = float(rng.uniform(-cfg.curve_slope, cfg.curve_slope))
        curve = Curve.line(w0, slope, u=K.leaf_intervals[block].midpoint)
        entry = {"block": "".join(map(str, block)), "w0": w0, "slope": slope}
        try:
            result = blender_curve_chase(ctx.model, None, curve, block, K, cfg.max_depth, cfg.max_len, rule=cfg.witness_rule)
            entry.update(depth=result.depth, diameter=result.diameter, failed=False)
        except ChaseFailed as e:
            entry.update(depth=e.depth - 1, diameter=None, failed=True, reason=str(e))
        chases.append(entry)
    completed = [c for c in chases if not c["failed"]]
    summary = {
        "curves": len(chases),
        "completed": len(completed),
        "max_diameter": max((c["diameter"] for c in completed), default=None),
        "chases": chases,
    }
    return StageReport("blender", summary)


@stage_registry.register("project")
def _project(ctx: PipelineContext) -> StageReport:
    cfg = ctx.spec.geometry
    target = PROJECTION_MAPS[cfg.projection_map]
    rows = [
        projection_interval_test(ctx.model, None, target, res, ctx.c1).to_dict()
        for res in cfg.resolutions
    ]
    return StageReport("project", {"map": cfg.projection_map, "rows": rows}, {"hit-fraction-vs-resolution": rows})


# ================= RUNNER =================

def _record_configured(ctx: PipelineContext) -> None:
    consts = ctx.spec.constants
    ctx.bundle.record_constant("c1", ctx.c1, "configured")
    ctx.bundle.record_constant("c_rate", ctx.c, "configured")
    ctx.bundle.record_constant("k", ctx.k, "configured")
    for name in ("c14", "c24", "c25", "q_tilde", "xi", "L"):
        ctx.bundle.record_constant(name, getattr(consts, name), "configured")


def run_pipeline(
    spec: ExperimentSpec,
    stages: Sequence[str],
    registry: Optional[StageRegistry] = None,
) -> ReportBundle:
    """
    Run the requested stages (in registry order) and collect their reports.

    Raises:
        DependencyError: naming the first stage whose requirement is missing
    """
    registry = registry or stage_registry
    scheduled = registry.schedule(stages)
    model = model_from_spec(spec.model)
    bundle = ReportBundle(spec)
    ctx = PipelineContext(spec, model, bundle)
    _record_configured(ctx)
    logger.info("pipeline on %s: %s", model.name, " -> ".join(s.name for s in scheduled))
    for stage in scheduled:
        logger.info("running stage %s", stage.name)
        bundle.publish(stage.runner(ctx))
    return bundle
