"""
End-to-end solve: normalize the instance, run a solver on the normalized form, pull the pair back to the
original coordinates and certify it against the ORIGINAL instance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Any, Mapping, Optional, Union

import numpy as np

from packsdp.src.config import SolverConfig
from packsdp.src.errors import ConfigError
from packsdp.src.instance import ExplicitFamily, PackCoverInstance, PrimalDualPair, Variant
from packsdp.src.linalg import inner
from packsdp.src.log_potential import PotentialTrace, solve
from packsdp.src.mwu import MwuTrace, solve_mwu
from packsdp.src.normalization import NormalizedInstance, TransformRecord, normalize, pull_back
from packsdp.src.verification import Certificate, certify

logger = logging.getLogger(__name__)

SOLVERS = ("log", "mwu")


@dataclass
class SolveResult:
    pair: PrimalDualPair
    certificate: Certificate
    trace: Union[PotentialTrace, MwuTrace]
    normalized: NormalizedInstance


def lifted_claim_ratio(normalized_claim: float, record: TransformRecord, rescale: float = 1.0) -> float:
    """Claim constant after pull-back: the reductions cost an extra eps-sized factor."""
    e = record.eps
    if record.kind is Variant.TYPE1:
        # C(delta)•X = I•X' and C•X >= C(delta)•X - eps z*
        return normalized_claim - e if record.delta > 0.0 else normalized_claim
    return normalized_claim * (1.0 + e * (2.0 + e)) / (1.0 - e) * rescale


def check_solver_choice(instance: PackCoverInstance, solver: str) -> None:
    if solver not in SOLVERS:
        raise ConfigError(f"unknown solver {solver!r}; expected one of {SOLVERS}")
    if solver == "mwu" and instance.variant is not Variant.TYPE2:
        raise ConfigError("the MWU solver is restricted to type2 (covering-primal) instances")


def solve_instance(
    instance: PackCoverInstance,
    config: Optional[SolverConfig] = None,
    solver: str = "log",
    tolerances: Optional[Mapping[str, float]] = None,
) -> SolveResult:
    config = config or SolverConfig()
    check_solver_choice(instance, solver)
    normalized = normalize(instance, config.eps, config.seed)
    logger.info(
        "normalized %s instance: n=%d -> %d, m=%d -> %d", instance.variant.value, instance.n, normalized.dim,
        instance.m, normalized.m,
    )
    if solver == "log":
        pair, trace = solve(normalized, config=config)
    else:
        pair, trace = solve_mwu(normalized, eps=config.eps)

    record = normalized.record
    original = instance.constraints.matrices if isinstance(instance.constraints, ExplicitFamily) else None
    stats: dict[str, Any] = {}
    X, y = pull_back(record, pair.X, pair.y, original, stats)
    rescale = float(stats.get("rescale", 1.0))
    report = {
        **pair.report,
        "normalized_claim_ratio": pair.report.get("claim_ratio"),
        "claim_ratio": lifted_claim_ratio(float(pair.report["claim_ratio"]), record, rescale),
        "normalized_dim": normalized.dim,
        "perturbation_delta": record.delta,
        "dropped": list(record.dropped),
        "trimmed": list(record.trimmed),
        "rescale": rescale,
    }
    lifted = replace(
        pair,
        X=X,
        y=y,
        primal_objective=inner(instance.C, X),
        dual_objective=_dual_objective(y, instance.b),
        report=report,
    )
    cert = certify(instance, lifted, eps=config.eps, **dict(tolerances or {}))
    lifted.certificates = cert.summary()
    if not cert.passed:
        logger.warning("certificate failed: %s", cert.to_dict())
    return SolveResult(pair=lifted, certificate=cert, trace=trace, normalized=normalized)


def _dual_objective(y: Mapping[Any, float], b: np.ndarray) -> float:
    return float(sum(w * float(b[int(str(k).split(":", 1)[0])]) for k, w in y.items()))
