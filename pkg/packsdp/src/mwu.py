"""
Matrix multiplicative-weights baseline for normalized type-2 pairs
(min I•X s.t. A_i•X >= 1 against max 1^T y s.t. sum y_i A_i <= I).

Weights P(t) = (1+eps)^{F(t)} with F(t) = sum_i y_i(t) A_i; every step adds delta(t) P(t)/(I•P(t)) to X for the
constraint that P(t) covers least, delta(t) = 1/lambda_max(A_i). Stops once lambda_max(F) reaches T.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
import pandas as pd

from packsdp.src.errors import IterationCapExceeded, MatrixOverflow, ValidationError
from packsdp.src.instance import ConstraintOracle, DualKey, ExplicitOracle, OracleMode, PrimalDualPair, Variant
from packsdp.src.linalg import exp_base, lambda_max, symmetrize
from packsdp.src.normalization import NormalizedInstance

logger = logging.getLogger(__name__)

CAP_MULTIPLIER = 4
TRACE_FIELDS = ["t", "M", "L_running", "delta", "oracle_index"]


@dataclass
class MwuState:
    t: int = 0
    y: dict[DualKey, float] = field(default_factory=dict)
    X: Optional[np.ndarray] = None
    F: Optional[np.ndarray] = None
    M: float = 0.0
    T: float = 0.0


@dataclass
class MwuTrace:
    records: list[dict[str, Any]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.records)

    def public_records(self) -> list[dict[str, Any]]:
        return [{k: r[k] for k in TRACE_FIELDS} for r in self.records]


def mwu_threshold(n: int, eps: float) -> float:
    # ln n vanishes at n = 1; the floor keeps the loop running there
    return (math.log(n) if n >= 2 else 1.0) / eps**2


def mwu_iteration_bound(n: int, eps: float) -> int:
    return math.ceil(n * mwu_threshold(n, eps))


def mwu_ratio_floor(eps: float) -> float:
    """Lower bound on L/M at termination."""
    return math.log1p(eps) / eps - eps


def _weights(F: np.ndarray, base: float, M: float) -> np.ndarray:
    try:
        P = exp_base(F, base)
    except MatrixOverflow:
        logger.info("(1+eps)^F overflows at lambda_max(F)=%.3f; exponentiating F - lambda_max(F) I", M)
        P = exp_base(F, base, shift=M)
    return P / float(np.trace(P))


def solve_mwu(
    normalized: NormalizedInstance,
    oracle: Optional[ConstraintOracle] = None,
    eps: float = 0.1,
) -> tuple[PrimalDualPair, MwuTrace]:
    if normalized.variant is not Variant.TYPE2:
        raise ValidationError("the MWU solver handles type2 instances only")
    if not 0.0 < eps <= 0.5:
        raise ValidationError(f"MWU eps must lie in (0, 0.5], got {eps}")
    if normalized.matrices is None:
        raise ValidationError("the MWU solver needs an explicit constraint family")
    n = normalized.dim
    oracle = oracle or normalized.oracle()
    scan = ExplicitOracle(normalized.matrices, OracleMode.MIN, normalized.keys)
    lmax_cache = {key: lambda_max(A) for key, A in zip(normalized.keys, normalized.matrices)}
    base = 1.0 + eps
    bound = mwu_iteration_bound(n, eps)
    cap = CAP_MULTIPLIER * bound

    state = MwuState(X=np.zeros((n, n)), F=np.zeros((n, n)), T=mwu_threshold(n, eps))
    trace = MwuTrace()
    while state.M < state.T:
        W = _weights(state.F, base, state.M)
        ans = oracle(W)
        if ans.key not in lmax_cache:
            lmax_cache[ans.key] = lambda_max(ans.realized)
        delta = 1.0 / lmax_cache[ans.key]
        state.X = state.X + delta * W
        state.F = symmetrize(state.F + delta * ans.realized)
        state.y[ans.key] = state.y.get(ans.key, 0.0) + delta
        state.M = lambda_max(state.F)
        state.t += 1
        trace.records.append(
            {
                "t": state.t,
                "M": state.M,
                "L_running": scan(state.X).value,
                "delta": delta,
                "oracle_index": str(ans.key),
                "trace_X": float(np.trace(state.X)),
                "sum_y": float(sum(state.y.values())),
                "trace_F": float(np.trace(state.F)),
            }
        )
        if state.t >= cap:
            raise IterationCapExceeded(f"MWU iteration cap {cap} reached (T={state.T:.3f})", trace=trace)

    L = scan(state.X).value
    Xhat = symmetrize(state.X / L)
    yhat = {k: w / state.M for k, w in state.y.items() if w > 0}
    pair = PrimalDualPair(
        X=Xhat,
        y=yhat,
        primal_objective=float(np.trace(Xhat)),
        dual_objective=float(sum(yhat.values())),
        iterations=state.t,
        phases=1,
        epsilon=eps,
        variant=Variant.TYPE2,
        solver="mwu",
        report={
            "iteration_bound": bound,
            "threshold": state.T,
            "L": L,
            "M": state.M,
            "ratio_floor": mwu_ratio_floor(eps),
            "claim_ratio": 1.0 / (1.0 - 1.5 * eps),
            "target_eps": eps,
        },
    )
    logger.info("MWU finished: %d iterations, L/M=%.6f", state.t, L / state.M)
    return pair, trace
