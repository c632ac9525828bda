"""
Independent certificate checks for primal-dual pairs, duality-gap reporting, and a grid-search reference
optimum for tiny normalized instances. Nothing computed by a solver is trusted: eigenvalues and inner
products are recomputed from the instance and the pair.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional, Union

import numpy as np

from packsdp.src.errors import DegenerateDual, TooLarge, ValidationError
from packsdp.src.instance import (
    ExplicitFamily,
    PackCoverInstance,
    PrimalDualPair,
    Variant,
    realized_atom,
    robust_worst_case,
)
from packsdp.src.linalg import inner, symmetrize
from packsdp.src.log_potential import claim_ratio
from packsdp.src.normalization import NormalizedInstance

logger = logging.getLogger(__name__)

VIOLATION_TOL = 1e-7
SPECTRAL_TOL = 1e-7
RATIO_SLACK = 1e-9
GRID_BATCH = 4096


@dataclass(frozen=True)
class Certificate:
    max_primal_violation: float
    dual_spectral_residual: float
    dual_slack_min_eig: float
    gap_ratio: float
    support_size: int
    iter_bound_satisfied: bool
    claim_ratio: float
    primal_ok: bool
    dual_ok: bool
    gap_ok: bool

    @property
    def passed(self) -> bool:
        return self.primal_ok and self.dual_ok and self.gap_ok and self.iter_bound_satisfied

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out

    def summary(self) -> dict:
        """Fields stored in the solution document."""
        return {"max_violation": self.max_primal_violation, "dual_min_eig": self.dual_slack_min_eig, "gap": self.gap_ratio}


Problem = Union[PackCoverInstance, NormalizedInstance]


def _view(problem: Problem):
    """(variant, C, b, matrix for a dual key, primal constraint values for X)."""
    if isinstance(problem, NormalizedInstance):
        n = problem.dim
        oracle = problem.oracle()
        scan = None if problem.matrices is None else np.stack(problem.matrices)

        def values(X):
            if scan is None:
                return np.array([oracle(X).value])
            return np.einsum("kij,ij->k", scan, X)

        def atom(key, _atoms):
            if problem.matrices is None:
                raise ValidationError("certify a robust family against the original instance")
            return problem.matrix_for(key)

        return problem.variant, np.eye(n), np.ones(problem.m), atom, values

    inst = problem

    def values(X):
        if isinstance(inst.constraints, ExplicitFamily):
            return np.array([inner(A, X) for A in inst.constraints.matrices]) / inst.b
        return np.array([robust_worst_case(uc, X)[1] for uc in inst.constraints.constraints]) / inst.b

    def atom(key, atoms):
        return realized_atom(inst, key, atoms)

    return inst.variant, inst.C, inst.b, atom, values


def certify(
    problem: Problem,
    pair: PrimalDualPair,
    eps: Optional[float] = None,
    violation_tol: float = VIOLATION_TOL,
    spectral_tol: float = SPECTRAL_TOL,
    ratio_slack: float = RATIO_SLACK,
) -> Certificate:
    variant, C, b, atom, values = _view(problem)
    X = np.asarray(pair.X, dtype=np.float64)
    if X.shape != C.shape:
        raise ValidationError(f"solution X has shape {X.shape}, instance expects {C.shape}")
    X = symmetrize(X)

    vals = values(X)
    if variant is Variant.TYPE1:
        violation = float(np.max(vals)) - 1.0
    else:
        violation = 1.0 - float(np.min(vals))

    H = np.zeros_like(C)
    for key, w in pair.y.items():
        H += w * atom(key, pair.atoms)
    H = symmetrize(H)
    scale = max(float(np.linalg.eigvalsh(C)[-1]), 1e-300)
    # residual of sum y_i A_i >= C (variant I) or <= C (variant II), relative to lambda_max(C)
    diff = np.linalg.eigvalsh(H - C)
    residual = float(-diff[0]) / scale if variant is Variant.TYPE1 else float(diff[-1]) / scale
    slack = float(diff[0]) if variant is Variant.TYPE1 else float(-diff[-1])

    primal = inner(C, X)
    dual = float(sum(w * bi for w, bi in _weighted_b(pair, b)))
    ratio = primal / dual if dual > 0 else math.inf

    claim = float(pair.report.get("claim_ratio", math.nan))
    if math.isnan(claim) and eps is not None:
        claim = claim_ratio(eps, variant)
    if math.isnan(claim):
        gap_ok = True
    elif variant is Variant.TYPE1:
        gap_ok = ratio >= claim - ratio_slack
    else:
        gap_ok = ratio <= claim + ratio_slack

    bound = pair.report.get("iteration_bound")
    iter_ok = bound is None or pair.iterations <= int(bound)
    return Certificate(
        max_primal_violation=violation,
        dual_spectral_residual=residual,
        dual_slack_min_eig=slack,
        gap_ratio=ratio,
        support_size=pair.support_size,
        iter_bound_satisfied=iter_ok,
        claim_ratio=claim,
        primal_ok=violation <= violation_tol,
        dual_ok=residual <= spectral_tol,
        gap_ok=gap_ok,
    )


def _weighted_b(pair: PrimalDualPair, b: np.ndarray):
    for key, w in pair.y.items():
        i = int(str(key).split(":", 1)[0])
        yield w, float(b[i]) if i < b.size else 1.0


def duality_gap(pair: PrimalDualPair) -> float:
    if pair.dual_objective == 0:
        raise DegenerateDual("dual objective is zero; the gap ratio is undefined")
    return pair.primal_objective / pair.dual_objective


def _simplex_grid(m: int, grid: int):
    """Points w on the simplex with coordinates in {0, 1/(grid-1), ..., 1}."""
    steps = grid - 1
    if m == 1:
        yield np.ones(1)
        return
    for head in itertools.product(range(steps + 1), repeat=m - 1):
        rest = steps - sum(head)
        if rest >= 0:
            yield np.array((*head, rest), dtype=np.float64) / steps


def reference_optimum(normalized: NormalizedInstance, grid: int = 1001) -> float:
    """
    Covering value min 1^T y s.t. sum y_i A_i >= I (variant I) or packing value max 1^T y s.t. sum y_i A_i <= I
    (variant II). Writing y = s w with w on the simplex, the best scale is s = 1/lambda_min(F(w)) (resp.
    1/lambda_max(F(w))), so the search runs over the simplex only.
    """
    if normalized.matrices is None:
        raise ValidationError("reference_optimum needs an explicit constraint family")
    m = normalized.m
    if m > 3:
        raise TooLarge(f"reference_optimum handles at most 3 constraints, got {m}")
    if normalized.dim > 8:
        raise TooLarge(f"reference_optimum handles n <= 8, got {normalized.dim}")
    if grid < 2:
        raise ValidationError("grid must have at least 2 points per axis")
    stack = np.stack(normalized.matrices)
    best = math.inf if normalized.variant is Variant.TYPE1 else -math.inf
    batch: list[np.ndarray] = []

    def flush(points: list[np.ndarray]) -> float:
        W = np.stack(points)
        F = np.einsum("pk,kij->pij", W, stack)
        eig = np.linalg.eigvalsh(F)
        if normalized.variant is Variant.TYPE1:
            lmin = eig[:, 0]
            with np.errstate(divide="ignore"):
                vals = np.where(lmin > 0, 1.0 / np.where(lmin > 0, lmin, 1.0), math.inf)
            return float(np.min(vals))
        return float(np.max(1.0 / eig[:, -1]))

    for w in _simplex_grid(m, grid):
        batch.append(w)
        if len(batch) == GRID_BATCH:
            v = flush(batch)
            best = min(best, v) if normalized.variant is Variant.TYPE1 else max(best, v)
            batch = []
    if batch:
        v = flush(batch)
        best = min(best, v) if normalized.variant is Variant.TYPE1 else max(best, v)
    return best
