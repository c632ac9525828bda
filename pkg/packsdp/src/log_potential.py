"""
Logarithmic-potential primal-dual solvers for normalized packing/covering SDPs.

Variant I (type 1): max I•X s.t. A_i•X <= 1 against min 1^T y s.t. sum y_i A_i >= I.
Variant II (type 2): min I•X s.t. A_i•X >= 1 against max 1^T y s.t. sum y_i A_i <= I.

Each iteration keeps y on the simplex, finds theta near the root of
    g(theta) = (eps_s theta / n) Tr((F - theta I)^{-1}) = 1      (variant I, theta below lambda_min(F))
    g(theta) = (eps_s theta / n) Tr((theta I - F)^{-1}) = 1      (variant II, theta above lambda_max(F))
sets X = (eps_s theta / n)(F - theta I)^{-1} (resp. (theta I - F)^{-1}), asks the oracle for the most violated
constraint and moves y towards it. Accuracy is halved phase by phase until the target eps is reached.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
import pandas as pd

from packsdp.src.config import DIRECT_ROOT_MAX_N, SolverConfig, ThetaStrategy
from packsdp.src.errors import IterationCapExceeded, NumericalFailure, ShiftInSpectrum, ValidationError
from packsdp.src.instance import ConstraintOracle, DualKey, OracleAnswer, PrimalDualPair, Variant
from packsdp.src.linalg import (
    FMINUS,
    MINUSF,
    extreme_eigenvalue,
    inner,
    lambda_max,
    lambda_min,
    shifted_inverse,
    symmetrize,
)
from packsdp.src.normalization import NormalizedInstance

logger = logging.getLogger(__name__)

EPS0 = {Variant.TYPE1: 0.5, Variant.TYPE2: 0.25}
WINDOW_SLACK = 1e-9
CAP_MULTIPLIER = 4
NEWTON_MAX_STEPS = 100
TRACE_FIELDS = ["t", "s", "eps_s", "theta", "nu", "oracle_index", "phi"]


@dataclass
class SolverState:
    t: int = 0
    s: int = 0
    eps_s: float = 0.5
    delta_s: float = 0.0
    y: dict[DualKey, float] = field(default_factory=dict)
    F: Optional[np.ndarray] = None
    theta: float = 0.0
    X: Optional[np.ndarray] = None
    nu: float = 1.0
    step: float = 0.0


@dataclass
class PotentialTrace:
    records: list[dict[str, Any]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def append(self, **record: Any) -> None:
        self.records.append(record)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.records)

    def public_records(self) -> list[dict[str, Any]]:
        return [{k: r[k] for k in TRACE_FIELDS} for r in self.records]


def delta_for(eps_s: float, n: int) -> float:
    return eps_s**3 / (32.0 * n)


def _side(variant: Variant) -> str:
    return FMINUS if variant is Variant.TYPE1 else MINUSF


def g_value(F: np.ndarray, theta: float, eps_s: float, variant: Variant) -> float:
    """g(theta); +inf when theta is not strictly outside the spectrum on the variant's side."""
    n = F.shape[0]
    try:
        inv = shifted_inverse(F, theta, _side(variant))
    except ShiftInSpectrum:
        return math.inf
    return eps_s * theta / n * float(np.trace(inv))


def potential(F: np.ndarray, theta: float, eps_s: float, variant: Variant) -> float:
    n = F.shape[0]
    if variant is Variant.TYPE1:
        sign, logdet = np.linalg.slogdet(F - theta * np.eye(n))
        return math.log(theta) + eps_s / n * logdet if sign > 0 else -math.inf
    sign, logdet = np.linalg.slogdet(theta * np.eye(n) - F)
    return math.log(theta) - eps_s / n * logdet if sign > 0 else math.inf


# --- theta root finding ----------------------------------------------------------------------------


def _grid_search(F, eps_s, delta_s, variant, base, K) -> Optional[float]:
    """Binary search on theta_k = base (1+delta_s)^k, k = 0..K. None when the ends do not bracket the root."""
    grid = lambda k: base * (1.0 + delta_s) ** k  # noqa: E731
    lo, hi = 0, K
    g_lo = g_value(F, grid(lo), eps_s, variant)
    g_hi = g_value(F, grid(hi), eps_s, variant)
    if variant is Variant.TYPE1:
        if not (g_lo < 1.0 <= g_hi):
            return None
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if g_value(F, grid(mid), eps_s, variant) < 1.0:
                lo = mid
            else:
                hi = mid
        return grid(lo)
    if not (g_lo > 1.0 >= g_hi):
        return None
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if g_value(F, grid(mid), eps_s, variant) > 1.0:
            lo = mid
        else:
            hi = mid
    return grid(hi)


def _bracket(F, eps_s, delta_s, variant, estimate: float, gamma: float) -> tuple[float, int]:
    """Grid base and length from an extreme-eigenvalue estimate with relative accuracy gamma."""
    step = math.log1p(delta_s)
    if variant is Variant.TYPE1:
        # estimate of lambda_min within [(1-gamma) lambda_min, lambda_min]
        # one extra step down keeps the lower end strictly below the root for a flat spectrum
        base = estimate / ((1.0 + eps_s) * (1.0 + delta_s))
        K = math.ceil((math.log1p(eps_s) - math.log1p(-gamma)) / step) + 1
    else:
        # estimate of lambda_max within [(1-gamma) lambda_max, lambda_max]
        base = estimate
        K = math.ceil(-(math.log1p(-gamma) + math.log1p(-eps_s)) / step) + 1
    return base, max(K, 1)


def _binary_search_theta(F, eps_s, delta_s, variant, seed) -> float:
    n = F.shape[0]
    gamma = eps_s / 2.0
    if variant is Variant.TYPE1:
        try:
            Finv = shifted_inverse(F, 0.0, FMINUS)
        except ShiftInSpectrum as e:
            raise NumericalFailure("F(y) is not positive definite") from e
        rho = extreme_eigenvalue(Finv, gamma, seed, power=n)
        estimate = (1.0 - gamma) / rho
    else:
        estimate = extreme_eigenvalue(F, gamma, seed, power=n)
    base, K = _bracket(F, eps_s, delta_s, variant, estimate, gamma)
    theta = _grid_search(F, eps_s, delta_s, variant, base, K)
    if theta is not None:
        return theta
    logger.warning("theta bracket from the randomized estimate failed; retrying with exact eigenvalues")
    exact = lambda_min(F) if variant is Variant.TYPE1 else lambda_max(F)
    base, K = _bracket(F, eps_s, delta_s, variant, exact, 0.0)
    theta = _grid_search(F, eps_s, delta_s, variant, base, K)
    if theta is None:
        raise NumericalFailure(f"could not bracket theta (variant {variant.value}, eps_s={eps_s})")
    return theta


def _direct_root_theta(F, eps_s, delta_s, variant) -> float:
    """Safeguarded Newton on g(theta) - 1 in eigenvalue form, then a half-window step to the safe side."""
    lam = np.linalg.eigvalsh(F)
    n = lam.size
    c = eps_s / n
    if variant is Variant.TYPE1:
        lmin = float(lam[0])
        if lmin <= 0:
            raise NumericalFailure("F(y) is not positive definite")
        lo, hi = lmin / (1.0 + eps_s), lmin / (1.0 + eps_s / n)
        g = lambda x: c * x * float(np.sum(1.0 / (lam - x)))  # noqa: E731
        dg = lambda x: c * float(np.sum(lam / (lam - x) ** 2))  # noqa: E731
        x = hi
    else:
        lmax = float(lam[-1])
        lo, hi = lmax / (1.0 - eps_s / n), lmax / (1.0 - eps_s)
        g = lambda x: c * x * float(np.sum(1.0 / (x - lam)))  # noqa: E731
        dg = lambda x: -c * float(np.sum(lam / (x - lam) ** 2))  # noqa: E731
        x = lo
    for _ in range(NEWTON_MAX_STEPS):
        r = g(x) - 1.0
        if abs(r) <= 1e-14:
            break
        d = dg(x)
        nxt = x - r / d if d != 0 else 0.5 * (lo + hi)
        if not lo <= nxt <= hi:
            nxt = 0.5 * (lo + hi)
        if nxt == x:
            break
        # the bracket shrinks to the side Newton came from
        if (variant is Variant.TYPE1) == (r > 0):
            hi = x
        else:
            lo = x
        x = nxt
    return x * (1.0 - delta_s / 2.0) if variant is Variant.TYPE1 else x * (1.0 + delta_s / 2.0)


def find_theta(
    F: np.ndarray,
    eps_s: float,
    delta_s: float,
    variant: Variant,
    seed: int = 0,
    strategy: ThetaStrategy = ThetaStrategy.BINARY_SEARCH,
) -> float:
    """theta within a (1 +/- delta_s) window of the root of g(theta) = 1 on the variant's safe side."""
    F = symmetrize(np.asarray(F, dtype=np.float64))
    if strategy is ThetaStrategy.DIRECT_ROOT and F.shape[0] <= DIRECT_ROOT_MAX_N:
        theta = _direct_root_theta(F, eps_s, delta_s, variant)
    else:
        theta = _binary_search_theta(F, eps_s, delta_s, variant, seed)
    g = g_value(F, theta, eps_s, variant)
    if not (1.0 - eps_s < g <= 1.0 + WINDOW_SLACK):
        raise NumericalFailure(f"g(theta)={g:.12f} outside ({1 - eps_s}, 1] at theta={theta:.6e}")
    return theta


def primal_from_theta(F: np.ndarray, theta: float, eps_s: float, variant: Variant) -> np.ndarray:
    n = F.shape[0]
    X = (eps_s * theta / n) * shifted_inverse(F, theta, _side(variant))
    tr = float(np.trace(X))
    if not (1.0 - eps_s < tr <= 1.0 + WINDOW_SLACK):
        raise NumericalFailure(f"Tr(X)={tr:.12f} outside ({1 - eps_s}, 1]")
    return X


# --- bounds ----------------------------------------------------------------------------------------


def iteration_bound(n: int, psi: float, eps: float, variant: Variant) -> int:
    """Explicit-constant iteration bound summed over phases 0..ceil(log2(1/eps))."""
    phases = math.ceil(math.log2(1.0 / eps))
    if variant is Variant.TYPE1:
        total = 480.0 * n * max(math.log(2.0 * psi), 0.0)
        total += sum(600.0 * n / (2.0 ** -(s + 1)) ** 2 for s in range(1, phases + 1))
    else:
        total = 1920.0 * n * max(math.log(9.0 * psi / 8.0), 0.0) + math.log(4.0 / 3.0)
        total += sum(1400.0 * n / (2.0 ** -(s + 2)) ** 2 for s in range(1, phases + 1))
    return math.ceil(total)


def claim_ratio(eps_s: float, variant: Variant) -> float:
    """I•X̂ / sum(ŷ) lower bound (variant I) or upper bound (variant II) guaranteed at accuracy eps_s."""
    if variant is Variant.TYPE1:
        return ((1.0 - eps_s) / (1.0 + eps_s)) ** 2
    return (1.0 + eps_s) / (1.0 - 2.0 * eps_s) ** 2


# --- solver ----------------------------------------------------------------------------------------


def _rebuild_F(y: dict[DualKey, float], atoms: dict[DualKey, np.ndarray], n: int) -> np.ndarray:
    F = np.zeros((n, n))
    for key, w in y.items():
        F += w * atoms[key]
    return symmetrize(F)


def _initial_weights(normalized: NormalizedInstance, config: SolverConfig) -> tuple[dict, dict, float]:
    """(y, atoms, psi numerator context); psi is finished once the first oracle answer is known."""
    atoms: dict[DualKey, np.ndarray] = {}
    if config.dense_init:
        if normalized.matrices is None:
            raise ValidationError("dense initialization needs an explicit constraint family")
        m = normalized.m
        for key, A in zip(normalized.keys, normalized.matrices):
            atoms[key] = A
        return {k: 1.0 / m for k in normalized.keys}, atoms, float(m)
    if normalized.variant is Variant.TYPE1:
        r = len(normalized.initial_atoms)
        if r == 0:
            raise ValidationError("variant I needs an initial support whose matrices sum to a PD matrix")
        for a in normalized.initial_atoms:
            atoms[a.key] = a.realized
        return {a.key: 1.0 / r for a in normalized.initial_atoms}, atoms, float("nan")
    if normalized.matrices is None:
        raise ValidationError("variant II needs an explicit constraint family")
    lmax = [lambda_max(A) for A in normalized.matrices]
    start = int(np.argmax(lmax))
    key = normalized.keys[start]
    atoms[key] = normalized.matrices[start]
    return {key: 1.0}, atoms, float("nan")


def _psi(normalized: NormalizedInstance, first: OracleAnswer, atoms: dict, y0: dict, config: SolverConfig) -> float:
    if config.dense_init:
        return float(normalized.m)
    if normalized.variant is Variant.TYPE1:
        Abar = sum(atoms[k] for k in y0)
        return len(y0) * lambda_max(first.realized) / lambda_min(Abar)
    (start,) = tuple(y0)
    return lambda_max(atoms[start]) / lambda_min(first.realized)


def solve(
    normalized: NormalizedInstance,
    oracle: Optional[ConstraintOracle] = None,
    config: Optional[SolverConfig] = None,
) -> tuple[PrimalDualPair, PotentialTrace]:
    config = config or SolverConfig()
    oracle = oracle or normalized.oracle()
    variant = normalized.variant
    n = normalized.dim
    eps = config.eps

    y, atoms, psi = _initial_weights(normalized, config)
    atom_meta = {
        str(a.key): {"index": a.index, "delta": a.delta} for a in normalized.initial_atoms if a.delta is not None
    }
    y0 = dict(y)
    F = _rebuild_F(y, atoms, n)
    trace = PotentialTrace()
    state = SolverState(eps_s=EPS0[variant], y=y, F=F)
    cap = config.max_iterations or None
    bound: Optional[int] = None
    last: Optional[tuple[np.ndarray, float, dict, float]] = None

    while True:
        state.delta_s = delta_for(state.eps_s, n)
        logger.info("phase %d: eps_s=%.6g delta_s=%.3e", state.s, state.eps_s, state.delta_s)
        while state.nu > state.eps_s:
            theta = find_theta(state.F, state.eps_s, state.delta_s, variant, config.seed + state.t, config.theta_strategy)
            X = primal_from_theta(state.F, theta, state.eps_s, variant)
            ans = oracle(X)
            if ans.key not in atoms:
                atoms[ans.key] = ans.realized
                if ans.delta is not None:
                    atom_meta[str(ans.key)] = {"index": ans.index, "delta": ans.delta}
            if bound is None:
                psi = _psi(normalized, ans, atoms, y0, config)
                bound = iteration_bound(n, psi, eps, variant)
                cap = cap or CAP_MULTIPLIER * bound
            xa = inner(X, ans.realized)
            xf = inner(X, state.F)
            raw_nu = (xa - xf) / (xa + xf) if variant is Variant.TYPE1 else (xf - xa) / (xa + xf)
            nu = max(raw_nu, 0.0)
            step = state.eps_s * theta * nu / (4.0 * n * (xa + xf))
            trace.append(
                t=state.t,
                s=state.s,
                eps_s=state.eps_s,
                theta=theta,
                nu=raw_nu,
                oracle_index=str(ans.key),
                phi=potential(state.F, theta, state.eps_s, variant),
                g=float(np.trace(X)),
                x_dot_f=xf,
                y_sum=float(sum(state.y.values())),
                step=step,
                support=len(state.y),
            )
            last = (X, theta, dict(state.y), state.eps_s)

            for k in state.y:
                state.y[k] *= 1.0 - step
            state.y[ans.key] = state.y.get(ans.key, 0.0) + step
            state.t += 1
            if state.t % config.refresh_interval == 0:
                state.F = _rebuild_F(state.y, atoms, n)
            else:
                state.F = symmetrize((1.0 - step) * state.F + step * ans.realized)
            state.theta, state.X, state.nu, state.step = theta, X, nu, step
            if config.debug_spectrum_checks:
                _check_spectrum_side(state.F, theta, variant)
            if state.t >= cap and state.nu > state.eps_s:
                raise IterationCapExceeded(f"iteration cap {cap} reached in phase {state.s}", trace=trace)
        if state.eps_s <= eps:
            break
        state.eps_s /= 2.0
        state.s += 1

    X_last, theta_last, y_last, eps_out = last
    if variant is Variant.TYPE1:
        Xhat = (1.0 - eps_out) * X_last / ((1.0 + eps_out) ** 2 * theta_last)
    else:
        Xhat = (1.0 + eps_out) * X_last / ((1.0 - 2.0 * eps_out) ** 2 * theta_last)
    yhat = {k: w / theta_last for k, w in y_last.items() if w > 0}
    pair = PrimalDualPair(
        X=symmetrize(Xhat),
        y=yhat,
        primal_objective=float(np.trace(Xhat)),
        dual_objective=float(sum(yhat.values())),
        iterations=state.t,
        phases=state.s + 1,
        epsilon=eps_out,
        variant=variant,
        solver="log",
        atoms={k: v for k, v in atom_meta.items() if k in {str(key) for key in yhat}},
        report={
            "psi": psi,
            "iteration_bound": bound,
            "claim_ratio": claim_ratio(eps_out, variant),
            "initial_support": len(y0),
            "target_eps": eps,
        },
    )
    logger.info(
        "solved: %d iterations, %d phases, support %d, primal %.8g, dual %.8g",
        pair.iterations,
        pair.phases,
        pair.support_size,
        pair.primal_objective,
        pair.dual_objective,
    )
    return pair, trace


def _check_spectrum_side(F: np.ndarray, theta: float, variant: Variant) -> None:
    if variant is Variant.TYPE1:
        lmin = lambda_min(F)
        if not theta < lmin:
            raise NumericalFailure(f"theta={theta:.12e} is not below lambda_min(F)={lmin:.12e}")
    else:
        lmax = lambda_max(F)
        if not theta > lmax:
            raise NumericalFailure(f"theta={theta:.12e} is not above lambda_max(F)={lmax:.12e}")