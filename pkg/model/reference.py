"""
Reference Models
Affine presets with closed-form oracles, plus construction from an experiment file.

REF3      conformal, three symbols, d̄_s = log3/log2
REF3b     non-conformal, three symbols, d̄_s ≈ 1.446
REF2      middle-thirds weak-stable Cantor set, d̄_s = log2/log3 (negative control)
TWO_RATE  two symbols with rates 1/2 and 1/3, d̄_s solves 2^-d + 3^-d = 1
"""
from typing import Callable, Dict, Sequence

from config import ModelSpec
from model.horseshoe import HorseshoeModel, SymbolData
from symbolic.subshift import TransitionMatrix


def _equal_branches(
    name: str,
    rates_ws: Sequence[float],
    t: Sequence[float],
    q: Sequence[float],
    rate_ss: float = 0.25,
) -> HorseshoeModel:
    n = len(rates_ws)
    symbols = tuple(
        SymbolData(
            u_interval=(i / n, (i + 1) / n),
            rate_u=float(n),
            rate_ws=float(rates_ws[i]),
            rate_ss=rate_ss,
            t=float(t[i]),
            q=float(q[i]),
        )
        for i in range(n)
    )
    return HorseshoeModel(name, TransitionMatrix.full(n), symbols)


def ref3() -> HorseshoeModel:
    return _equal_branches("REF3", (0.5, 0.5, 0.5), (0.0, 0.25, 0.5), (0.0, 0.375, 0.75))


def ref3b() -> HorseshoeModel:
    return _equal_branches("REF3b", (0.5, 0.5, 0.4), (0.0, 0.28, 0.55), (0.0, 0.375, 0.75))


def ref2() -> HorseshoeModel:
    return _equal_branches("REF2", (1 / 3, 1 / 3), (0.0, 2 / 3), (0.0, 0.75))


def two_rate() -> HorseshoeModel:
    return _equal_branches("TWO_RATE", (0.5, 1 / 3), (0.0, 0.6), (0.0, 0.5))


PRESETS: Dict[str, Callable[[], HorseshoeModel]] = {
    "REF3": ref3,
    "REF3b": ref3b,
    "REF2": ref2,
    "TWO_RATE": two_rate,
}


def model_from_spec(spec: ModelSpec, name: str = "custom") -> HorseshoeModel:
    """Build the model named by a preset or given explicitly in the config"""
    if spec.preset is not None:
        return PRESETS[spec.preset]()
    symbols = tuple(
        SymbolData(
            u_interval=tuple(s.u_interval),
            rate_u=s.rate_u if s.rate_u is not None else 1.0 / (s.u_interval[1] - s.u_interval[0]),
            rate_ws=s.rate_ws,
            rate_ss=s.rate_ss,
            t=s.t,
            q=s.q,
            bend=s.bend,
            shear=s.shear,
        )
        for s in spec.symbols
    )
    return HorseshoeModel(name, TransitionMatrix.from_rows(spec.transition), symbols)
