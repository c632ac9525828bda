"""
Reductions to normalized form (C = I, b = 1) and solution pull-back.

Type 1 (packing max C•X s.t. A_i•X <= b_i): LDL of C, perturbation of zero pivots by delta, congruence
A'_i = R^T A_i R with R = L^{-T} D(delta)^{-1/2}. Robust families keep their oracle; the congruence is applied
to the query and to the realized matrix instead of to stored data.

Type 2 (covering min C•X s.t. A_i•X >= b_i): constraints whose range leaves range(C) are dropped with a
witness, the rest are reduced to dimension rank(C), then trimmed to the set J with bounded spectra and
shifted by (eps beta'/n') I.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from packsdp.src.errors import EmptyAfterSupportFilter, NoPositiveDefiniteSubset, ValidationError
from packsdp.src.instance import (
    ConstraintOracle,
    DualKey,
    ExplicitFamily,
    ExplicitOracle,
    OracleAnswer,
    OracleMode,
    PackCoverInstance,
    RobustOracle,
    UncertainConstraint,
    Variant,
    mode_for,
    robust_key,
    robust_worst_case,
)
from packsdp.src.linalg import eig_sym, extreme_eigenvalue, inner, lambda_max, lambda_min, ldl, symmetrize

logger = logging.getLogger(__name__)

PD_SUPPORT_TOL = 1e-10
NORMALIZED_PD_TOL = 1e-12
RANK_TOL = 1e-10
WITNESS_TOL = 1e-6
DELTA_FLOOR = 1e-300
TRIM_GAMMA = 0.5


@dataclass(frozen=True)
class TransformRecord:
    kind: Variant
    n: int
    dim: int
    lift: np.ndarray  # R, n x dim: X = R X' R^T and A'_i = R^T A_i R
    L: np.ndarray
    D: np.ndarray  # D(delta) for type 1, D' (kept pivots) for type 2
    columns: tuple[int, ...]
    delta: float = 0.0
    kept: tuple[int, ...] = ()
    dropped: tuple[int, ...] = ()
    witnesses: dict[int, np.ndarray] = field(default_factory=dict)
    trimmed: tuple[int, ...] = ()
    shift: float = 0.0
    beta: float = 0.0
    eps: float = 0.0
    scale_b: np.ndarray = field(default_factory=lambda: np.ones(0))
    zero_mask: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    trace_bound: float = 0.0
    zeta: float = 0.0

    def lift_matrix(self, Xprime: np.ndarray) -> np.ndarray:
        return symmetrize(self.lift @ Xprime @ self.lift.T)

    def reduce_matrix(self, A: np.ndarray) -> np.ndarray:
        return symmetrize(self.lift.T @ A @ self.lift)

    def perturbed_objective(self, C: np.ndarray) -> np.ndarray:
        """C(delta) = C + delta L diag(zero_mask) L^T."""
        if self.delta == 0.0:
            return C
        Lm = self.L[:, self.zero_mask]
        return symmetrize(C + self.delta * Lm @ Lm.T)


class CongruenceOracle:
    """Oracle in normalized coordinates backed by an oracle on the original family."""

    def __init__(self, inner_oracle: ConstraintOracle, record: TransformRecord):
        self.inner_oracle = inner_oracle
        self.record = record
        self.mode = inner_oracle.mode

    def __call__(self, Y: np.ndarray) -> OracleAnswer:
        ans = self.inner_oracle(self.record.lift_matrix(Y))
        return OracleAnswer(
            index=ans.index,
            realized=self.record.reduce_matrix(ans.realized),
            value=ans.value,
            key=ans.key,
            delta=ans.delta,
        )


@dataclass(frozen=True)
class NormalizedInstance:
    variant: Variant
    matrices: Optional[tuple[np.ndarray, ...]]
    keys: tuple[DualKey, ...]
    dim: int
    record: TransformRecord
    initial_support: tuple[int, ...] = ()
    initial_atoms: tuple[OracleAnswer, ...] = ()
    robust_oracle: Optional[ConstraintOracle] = None

    @property
    def m(self) -> int:
        return len(self.keys)

    @property
    def is_robust(self) -> bool:
        return self.robust_oracle is not None

    def oracle(self) -> ConstraintOracle:
        if self.robust_oracle is not None:
            return self.robust_oracle
        return ExplicitOracle(self.matrices, mode_for(self.variant), self.keys)

    def matrix_for(self, key: DualKey) -> np.ndarray:
        return self.matrices[self.keys.index(key)]

    @classmethod
    def from_matrices(
        cls,
        variant: Variant,
        matrices: Sequence[np.ndarray],
        initial_support: Optional[Sequence[int]] = None,
    ) -> "NormalizedInstance":
        """Wrap matrices that are already in normalized form (C = I, b = 1) with an identity record."""
        mats = tuple(symmetrize(np.asarray(A, dtype=np.float64)) for A in matrices)
        if not mats:
            raise ValidationError("constraint family is empty")
        n = mats[0].shape[0]
        record = _identity_record(variant, n, len(mats))
        support: tuple[int, ...] = ()
        atoms: tuple[OracleAnswer, ...] = ()
        if variant is Variant.TYPE1:
            support = tuple(initial_support) if initial_support is not None else find_pd_support(mats)
            _check_normalized_support(mats, support)
            atoms = tuple(OracleAnswer(index=i, realized=mats[i], value=float("nan"), key=i) for i in support)
        return cls(
            variant=variant,
            matrices=mats,
            keys=tuple(range(len(mats))),
            dim=n,
            record=record,
            initial_support=support,
            initial_atoms=atoms,
        )


def _identity_record(variant: Variant, n: int, m: int) -> TransformRecord:
    return TransformRecord(
        kind=variant,
        n=n,
        dim=n,
        lift=np.eye(n),
        L=np.eye(n),
        D=np.ones(n),
        columns=tuple(range(n)),
        kept=tuple(range(m)),
        scale_b=np.ones(m),
        zero_mask=np.zeros(n, dtype=bool),
    )


def find_pd_support(matrices: Sequence[np.ndarray], tol: float = PD_SUPPORT_TOL) -> tuple[int, ...]:
    """First prefix A_1 + ... + A_k whose sum has lambda_min > tol."""
    total = np.zeros_like(matrices[0])
    for k, A in enumerate(matrices, start=1):
        total = total + A
        if lambda_min(total) > tol:
            return tuple(range(k))
    raise NoPositiveDefiniteSubset(
        f"no prefix of the {len(matrices)} constraint matrices sums to a positive definite matrix (assumption B-I)"
    )


def _check_normalized_support(matrices: Sequence[np.ndarray], support: Sequence[int]) -> None:
    total = sum(matrices[i] for i in support)
    lmin = lambda_min(total)
    if lmin <= NORMALIZED_PD_TOL:
        raise NoPositiveDefiniteSubset(f"initial support sums to a matrix with lambda_min={lmin:.3e}")


def _scale_uncertain(uc: UncertainConstraint, b: float) -> UncertainConstraint:
    return UncertainConstraint(
        A0=uc.A0 / b, perturbations=tuple(P / b for P in uc.perturbations), uncertainty=uc.uncertainty
    )


def _unit_lower_inverse_t(L: np.ndarray) -> np.ndarray:
    """U = L^{-T} for unit lower-triangular L."""
    return np.linalg.solve(L, np.eye(L.shape[0])).T


# --- type 1 ----------------------------------------------------------------------------------------


def normalize_type1(
    instance: PackCoverInstance, eps: float, support: Optional[Sequence[int]] = None
) -> NormalizedInstance:
    if instance.variant is not Variant.TYPE1:
        raise ValidationError("normalize_type1 requires a type1 instance")
    if not 0.0 < eps < 1.0:
        raise ValidationError(f"eps must lie in (0, 1), got {eps}")
    n = instance.n
    b = instance.b
    identity = np.eye(n)

    if isinstance(instance.constraints, ExplicitFamily):
        scaled = tuple(A / bi for A, bi in zip(instance.constraints.matrices, b))
        base_oracle = None
    else:
        ucs = tuple(_scale_uncertain(uc, bi) for uc, bi in zip(instance.constraints.constraints, b))
        base_oracle = RobustOracle(ucs, OracleMode.MAX)
        # worst-case realizations at Y = I stand in for the family when bounding traces
        scaled = tuple(uc.realize(_worst_delta(uc, identity)) for uc in ucs)

    if support is None:
        support = find_pd_support(scaled)
    else:
        support = tuple(support)
        if lambda_min(sum(scaled[i] for i in support)) <= PD_SUPPORT_TOL:
            raise NoPositiveDefiniteSubset("designated support does not sum to a positive definite matrix")
    r = len(support)
    Abar = sum(scaled[i] for i in support)
    trace_bound = r / lambda_min(Abar)
    zeta = float(np.trace(instance.C)) / max(float(np.trace(A)) for A in scaled)

    fac = ldl(instance.C)
    delta = 0.0
    D = fac.D.copy()
    if fac.zero_mask.any():
        frob2 = float(np.sum(fac.L**2))
        delta = eps * zeta / (trace_bound * frob2)
        if delta < DELTA_FLOOR:
            logger.warning("perturbation delta=%.3e underflows; clamped to %.1e", delta, DELTA_FLOOR)
            delta = DELTA_FLOOR
        D[fac.zero_mask] = delta
        logger.info("C is singular (%d zero pivots); perturbed with delta=%.6e", int(fac.zero_mask.sum()), delta)
    lift = _unit_lower_inverse_t(fac.L) / np.sqrt(D)[None, :]
    record = TransformRecord(
        kind=Variant.TYPE1,
        n=n,
        dim=n,
        lift=lift,
        L=fac.L,
        D=D,
        columns=tuple(range(n)),
        delta=delta,
        kept=tuple(range(instance.m)),
        eps=eps,
        scale_b=b.copy(),
        zero_mask=fac.zero_mask.copy(),
        trace_bound=trace_bound,
        zeta=zeta,
    )

    if base_oracle is None:
        mats = tuple(record.reduce_matrix(A) for A in scaled)
        _check_normalized_support(mats, support)
        atoms = tuple(OracleAnswer(index=i, realized=mats[i], value=float("nan"), key=i) for i in support)
        return NormalizedInstance(
            variant=Variant.TYPE1,
            matrices=mats,
            keys=tuple(range(instance.m)),
            dim=n,
            record=record,
            initial_support=support,
            initial_atoms=atoms,
        )

    oracle = CongruenceOracle(base_oracle, record)
    atoms = []
    for i in support:
        uc = base_oracle.constraints[i]
        d = _worst_delta(uc, identity)
        atoms.append(
            OracleAnswer(index=i, realized=record.reduce_matrix(uc.realize(d)), value=float("nan"), key=robust_key(i, d), delta=d)
        )
    _check_normalized_support([a.realized for a in atoms], range(len(atoms)))
    return NormalizedInstance(
        variant=Variant.TYPE1,
        matrices=None,
        keys=tuple(range(instance.m)),
        dim=n,
        record=record,
        initial_support=support,
        initial_atoms=tuple(atoms),
        robust_oracle=oracle,
    )


def _worst_delta(uc: UncertainConstraint, Y: np.ndarray) -> np.ndarray:
    return robust_worst_case(uc, Y)[0]


def pull_back_type1(
    record: TransformRecord, Xprime: np.ndarray, yprime: dict[DualKey, float]
) -> tuple[np.ndarray, dict[DualKey, float]]:
    """X = R X' R^T; dual weights are unchanged apart from undoing the b-scaling."""
    X = record.lift_matrix(np.asarray(Xprime, dtype=np.float64))
    return X, _unscale_dual(record, yprime)


def _unscale_dual(record: TransformRecord, yprime: dict[DualKey, float]) -> dict[DualKey, float]:
    out: dict[DualKey, float] = {}
    for key, w in yprime.items():
        i = int(str(key).split(":", 1)[0])
        out[key] = float(w) / float(record.scale_b[i]) if record.scale_b.size else float(w)
    return out


# --- type 2 ----------------------------------------------------------------------------------------

@dataclass(frozen=True)
class Contained:
    pass


@dataclass(frozen=True)
class Witness:
    x: np.ndarray


CONTAINED = Contained()
SupportResult = Union[Contained, Witness]


def _null_basis(C: np.ndarray) -> np.ndarray:
    dec = eig_sym(C)
    cutoff = RANK_TOL * max(dec.lambda_max, 0.0)
    return dec.basis[:, dec.eigenvalues <= cutoff]


def check_support(C: np.ndarray, A: np.ndarray, null_basis: Optional[np.ndarray] = None) -> SupportResult:
    """CONTAINED when range(A) is inside range(C), otherwise a Witness x with Cx = 0 and Ax != 0."""
    N = _null_basis(C) if null_basis is None else null_basis
    if N.shape[1] == 0:
        return CONTAINED
    dec = eig_sym(N.T @ A @ N)
    x = N @ dec.basis[:, -1]
    x = x / np.linalg.norm(x)
    a_norm = max(abs(lambda_max(A)), abs(lambda_min(A)))
    if np.linalg.norm(A @ x) > WITNESS_TOL * a_norm:
        return Witness(x=x)
    return CONTAINED


def _reduction_lift(C: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, tuple[int, ...], np.ndarray]:
    """R = U'(D')^{-1/2} from the LDL of C; falls back to the eigenbasis when pivot count and rank disagree."""
    dec = eig_sym(C)
    rank = int(np.sum(dec.eigenvalues > RANK_TOL * dec.lambda_max))
    fac = ldl(C)
    positive = tuple(int(j) for j in np.flatnonzero(~fac.zero_mask))
    if len(positive) == rank:
        U = _unit_lower_inverse_t(fac.L)
        Dp = fac.D[list(positive)]
        lift = U[:, list(positive)] / np.sqrt(Dp)[None, :]
        return lift, fac.L, Dp, positive, fac.zero_mask
    logger.warning("LDL pivot count %d differs from rank %d; reducing in the eigenbasis", len(positive), rank)
    keep = dec.eigenvalues > RANK_TOL * dec.lambda_max
    lift = dec.basis[:, keep] / np.sqrt(dec.eigenvalues[keep])[None, :]
    return lift, fac.L, dec.eigenvalues[keep], tuple(int(j) for j in np.flatnonzero(keep)), fac.zero_mask


def normalize_type2(instance: PackCoverInstance, eps: float, seed: int = 0) -> NormalizedInstance:
    if instance.variant is not Variant.TYPE2:
        raise ValidationError("normalize_type2 requires a type2 instance")
    if not isinstance(instance.constraints, ExplicitFamily):
        raise ValidationError("type2 normalization needs an explicit constraint family")
    if not 0.0 < eps < 1.0:
        raise ValidationError(f"eps must lie in (0, 1), got {eps}")
    C = instance.C
    scaled = [A / bi for A, bi in zip(instance.constraints.matrices, instance.b)]

    N = _null_basis(C)
    supported: list[int] = []
    dropped: list[int] = []
    witnesses: dict[int, np.ndarray] = {}
    for i, A in enumerate(scaled):
        res = check_support(C, A, N)
        if isinstance(res, Contained):
            supported.append(i)
        else:
            dropped.append(i)
            witnesses[i] = res.x
    if dropped:
        logger.info("dropped %d constraint(s) whose range leaves range(C): %s", len(dropped), dropped)
    if not supported:
        raise EmptyAfterSupportFilter("every constraint has range outside range(C); nothing left to normalize")

    lift, L, Dp, columns, zero_mask = _reduction_lift(C)
    dim = lift.shape[1]
    reduced = {i: symmetrize(lift.T @ scaled[i] @ lift) for i in supported}

    approx = {i: extreme_eigenvalue(reduced[i], TRIM_GAMMA, seed + i) for i in supported}
    beta = min(approx.values())
    kept = tuple(i for i in supported if approx[i] <= dim * beta / eps)
    trimmed = tuple(i for i in supported if i not in kept)
    if trimmed:
        logger.info("trimmed %d constraint(s) with lambda_max above n'*beta'/eps: %s", len(trimmed), list(trimmed))
    shift = eps * beta / dim
    identity = np.eye(dim)
    mats = tuple(reduced[i] + shift * identity for i in kept)

    record = TransformRecord(
        kind=Variant.TYPE2,
        n=instance.n,
        dim=dim,
        lift=lift,
        L=L,
        D=Dp,
        columns=columns,
        kept=kept,
        dropped=tuple(dropped),
        witnesses=witnesses,
        trimmed=trimmed,
        shift=shift,
        beta=beta,
        eps=eps,
        scale_b=instance.b.copy(),
        zero_mask=zero_mask,
    )
    return NormalizedInstance(variant=Variant.TYPE2, matrices=mats, keys=kept, dim=dim, record=record)


def pull_back_type2(
    record: TransformRecord,
    Xprime: np.ndarray,
    yprime: dict[DualKey, float],
    original: Optional[Sequence[np.ndarray]] = None,
    stats: Optional[dict] = None,
) -> tuple[np.ndarray, dict[DualKey, float]]:
    """
    X = (1/(1-eps)) R (X' + (eps/(beta' n')) I) R^T plus x x^T/(A_i•x x^T) for every dropped i.
    When the original matrices are given, X is finally rescaled so that min_i A_i•X >= 1.
    The applied rescale factor is written to stats["rescale"] when a dict is passed.
    """
    Xp = np.asarray(Xprime, dtype=np.float64)
    if record.shift > 0.0:
        Xp = (Xp + (record.eps / (record.beta * record.dim)) * np.eye(record.dim)) / (1.0 - record.eps)
    X = record.lift_matrix(Xp)
    if record.witnesses:
        if original is None:
            raise ValidationError("dropped constraints need the original matrices for the rank-one repair")
    for i, x in record.witnesses.items():
        A = original[i] / record.scale_b[i]
        xxT = np.outer(x, x)
        X = X + xxT / inner(A, xxT)
    X = symmetrize(X)
    if original is not None:
        values = [inner(A / bi, X) for A, bi in zip(original, record.scale_b)]
        lowest = min(values)
        if lowest < 1.0:
            logger.warning("pulled-back primal covers min_i A_i•X=%.12f < 1; rescaling", lowest)
            X = X / lowest
            if stats is not None:
                stats["rescale"] = 1.0 / lowest
    y = {k: w for k, w in _unscale_dual(record, yprime).items() if w > 0}
    return X, y


def pull_back(
    record: TransformRecord,
    Xprime: np.ndarray,
    yprime: dict[DualKey, float],
    original: Optional[Sequence[np.ndarray]] = None,
    stats: Optional[dict] = None,
) -> tuple[np.ndarray, dict[DualKey, float]]:
    if record.kind is Variant.TYPE1:
        return pull_back_type1(record, Xprime, yprime)
    return pull_back_type2(record, Xprime, yprime, original, stats)


def normalize(instance: PackCoverInstance, eps: float, seed: int = 0) -> NormalizedInstance:
    if instance.variant is Variant.TYPE1:
        return normalize_type1(instance, eps)
    return normalize_type2(instance, eps, seed)


def normalized_to_dict(normalized: NormalizedInstance) -> dict:
    """JSON view of the normalized instance plus its transform record."""
    rec = normalized.record
    doc: dict = {
        "variant": normalized.variant.value,
        "n": normalized.dim,
        "C": np.eye(normalized.dim),
        "b": np.ones(normalized.m),
        "keys": [str(k) for k in normalized.keys],
        "initial_support": list(normalized.initial_support),
        "record": {
            "kind": rec.kind.value,
            "original_n": rec.n,
            "lift": rec.lift,
            "L": rec.L,
            "D": rec.D,
            "columns": list(rec.columns),
            "delta": rec.delta,
            "kept": list(rec.kept),
            "dropped": list(rec.dropped),
            "witnesses": {str(i): x for i, x in rec.witnesses.items()},
            "trimmed": list(rec.trimmed),
            "shift": rec.shift,
            "beta": rec.beta,
            "eps": rec.eps,
            "scale_b": rec.scale_b,
            "trace_bound": rec.trace_bound,
            "zeta": rec.zeta,
        },
    }
    if normalized.matrices is not None:
        doc["constraints"] = [{"A": A} for A in normalized.matrices]
    return doc
