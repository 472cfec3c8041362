"""
Configuration settings for the Horseshoe Recurrence Lab

Two layers:
- ``Settings``: runtime defaults (tolerances, budgets, seeds) with environment
  overrides, shared through the ``settings`` singleton.
- ``ExperimentSpec``: the schema of an experiment file; ``load_config`` resolves
  a JSON file into a fully defaulted spec.
"""
import json
import os
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

load_dotenv()


class Settings(BaseModel):
    # Run Settings
    SEED: int = int(os.getenv("HORSESHOE_SEED", "20240611"))
    THREADS: int = int(os.getenv("HORSESHOE_THREADS", "1"))
    OUT_DIR: str = os.getenv("HORSESHOE_OUT_DIR", "reports")
    LOG_LEVEL: str = os.getenv("HORSESHOE_LOG_LEVEL", "INFO")

    # Enumeration budget (3^14 words on three symbols fit, deeper tables are refused)
    MAX_WORDS: int = int(os.getenv("HORSESHOE_MAX_WORDS", "5000000"))

    # Root finding
    BISECTION_TOL: float = 1e-12
    BISECTION_MAX_ITER: int = 200
    EXPONENT_BRACKET: Tuple[float, float] = (0.0, 3.0)

    # Perturbed inverse branches
    INVERSE_TOL: float = 1e-12
    INVERSE_MAX_ITER: int = 50

    # Strong-stable foliation
    SS_DEPTH: int = 20
    ODE_RTOL: float = 1e-12
    ODE_ATOL: float = 1e-13
    FOLIATION_MARGIN: float = 0.05

    # Finite differences
    FD_STEP: float = 1e-4


settings = Settings()


class ConfigError(ValueError):
    """Schema violation in an experiment file; message carries the field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SymbolSpec(_Section):
    u_interval: Tuple[float, float]
    rate_u: Optional[float] = None
    rate_ws: float
    rate_ss: float
    t: float
    q: float
    bend: float = 0.0
    shear: float = 0.0


class ModelSpec(_Section):
    preset: Optional[Literal["REF3", "REF3b", "REF2", "TWO_RATE"]] = None
    transition: Optional[List[List[int]]] = None
    symbols: Optional[List[SymbolSpec]] = None

    @model_validator(mode="after")
    def _preset_or_explicit(self):
        explicit = self.transition is not None or self.symbols is not None
        if self.preset is None and not explicit:
            raise ValueError("either 'preset' or 'transition' + 'symbols' is required")
        if self.preset is not None and explicit:
            raise ValueError("'preset' excludes an explicit definition")
        if explicit and (self.transition is None or self.symbols is None):
            raise ValueError("explicit models need both 'transition' and 'symbols'")
        return self


class ScaleSpec(_Section):
    rho: float = Field(default=2.0 ** -8, gt=0.0, lt=1.0)
    rho_ladder: List[float] = [2.0 ** -6, 2.0 ** -7, 2.0 ** -8]
    k: int = Field(default=2, ge=1)
    c: Optional[float] = None     # defaults to log(max rate_ws) / log(min rate_ws)
    c1: Optional[float] = None    # defaults to (min rate_ws)^(-1/2) + 0.01


class ConstantSpec(_Section):
    c2: float = Field(default=1.5, gt=1.0)
    c3: float = Field(default=0.05, gt=0.0)
    c14: float = Field(default=1.0, gt=0.0)
    c24: float = Field(default=0.5, gt=0.0)
    c25: float = Field(default=3.0, ge=1.0)
    q_tilde: float = Field(default=0.5, gt=0.0)
    kappa: float = Field(default=0.5, gt=0.0)
    L: int = Field(default=6, ge=0)
    xi: float = Field(default=0.1, gt=0.0, lt=1.0)


class DimensionSpec(_Section):
    eps: float = Field(default=1e-6, gt=0.0)
    n_max: int = Field(default=14, ge=1)
    continuity_deltas: List[float] = [0.0, 1e-3, 1e-2]
    continuity_depth: int = Field(default=8, ge=2)


class MarstrandSpec(_Section):
    kind: Literal["translation", "rate"] = "translation"
    amplitude: float = Field(default=0.1, gt=0.0)
    delta: Optional[float] = None  # t-ball radius, defaults to 0.1 * amplitude
    t_samples: int = Field(default=8, ge=1)
    leaf_samples: int = Field(default=32, ge=1)
    bin_width: Optional[float] = None
    transversality_pairs: int = Field(default=50, ge=0)
    pair_depth: int = Field(default=12, ge=2)


class MonteCarloSpec(_Section):
    trials: int = Field(default=500, ge=1)
    grid_dx: Optional[float] = None       # defaults to rho^2
    max_leaf_blocks: Optional[int] = Field(default=None, ge=1)  # None covers every leaf block of K
    erosion: Optional[float] = None       # defaults to rho^2


class GeometrySpec(_Section):
    max_len: int = Field(default=3, ge=1)
    grid_cells: int = Field(default=400, ge=1)
    robustness_deltas: List[float] = [0.0, 1e-3]
    robustness_samples: int = Field(default=4, ge=1)
    robustness_mode: Literal["family", "jitter"] = "family"
    witness_rule: Literal["max-margin", "first"] = "max-margin"
    curves: int = Field(default=50, ge=1)
    max_depth: int = Field(default=20, ge=1)
    curve_slope: float = Field(default=0.05, ge=0.0)
    projection_map: Literal["w", "tilted"] = "w"
    resolutions: List[float] = [2.0 ** -8, 2.0 ** -9, 2.0 ** -10]


class ExperimentSpec(_Section):
    model: ModelSpec
    scales: ScaleSpec = ScaleSpec()
    constants: ConstantSpec = ConstantSpec()
    dimension: DimensionSpec = DimensionSpec()
    marstrand: MarstrandSpec = MarstrandSpec()
    monte_carlo: MonteCarloSpec = MonteCarloSpec()
    geometry: GeometrySpec = GeometrySpec()
    seed: int = settings.SEED
    threads: int = Field(default=settings.THREADS, ge=1)

    def dump(self) -> str:
        """Canonical JSON of the resolved spec"""
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2)


def _field_path(loc: tuple) -> str:
    return ".".join(str(part) for part in loc)


def parse_config(data: Union[dict, str]) -> ExperimentSpec:
    """
    Validate a config mapping (or JSON text) into a resolved spec.

    Raises:
        ConfigError: naming the first offending field path
    """
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as e:
            raise ConfigError("", f"invalid JSON: {e}") from e
    try:
        return ExperimentSpec.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(_field_path(first["loc"]), first["msg"]) from e


def load_config(path: Union[str, Path]) -> ExperimentSpec:
    """Load and resolve an experiment file"""
    path = Path(path)
    if not path.exists():
        raise ConfigError("", f"config file not found: {path}")
    return parse_config(path.read_text())
