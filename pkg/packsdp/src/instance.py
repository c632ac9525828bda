"""
Problem instances (explicit and robust families), the Max/Min constraint oracles, and the JSON codec for
instances and solutions. Matrices are serialized dense, row-major.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional, Protocol, Sequence, Union

import numpy as np

from packsdp.src.errors import (
    EmptyFamily,
    InvalidMatrix,
    InvalidUncertaintySet,
    ParseError,
    ValidationError,
)
from packsdp.src.io import ensure_serializable
from packsdp.src.linalg import PSD_TOL, as_symmetric, inner, symmetrize

logger = logging.getLogger(__name__)

ELLIPSOID_TOL = 1e-10

DualKey = Union[int, str]


class Variant(str, Enum):
    TYPE1 = "type1"
    TYPE2 = "type2"


class OracleMode(str, Enum):
    MAX = "max"
    MIN = "min"


def mode_for(variant: Variant) -> OracleMode:
    return OracleMode.MAX if variant is Variant.TYPE1 else OracleMode.MIN


@dataclass(frozen=True)
class EllipsoidSet:
    delta0: np.ndarray
    D: np.ndarray
    kind: str = "ellipsoid"


@dataclass(frozen=True)
class BoxSet:
    delta0: np.ndarray
    rho: float
    kind: str = "box"


UncertaintySet = Union[EllipsoidSet, BoxSet]


@dataclass(frozen=True)
class UncertainConstraint:
    A0: np.ndarray
    perturbations: tuple[np.ndarray, ...]
    uncertainty: UncertaintySet

    @property
    def k(self) -> int:
        return len(self.perturbations)

    def realize(self, delta: np.ndarray) -> np.ndarray:
        out = self.A0.copy()
        for d, P in zip(delta, self.perturbations):
            out = out + float(d) * P
        return symmetrize(out)


@dataclass(frozen=True)
class ExplicitFamily:
    matrices: tuple[np.ndarray, ...]

    def __len__(self) -> int:
        return len(self.matrices)


@dataclass(frozen=True)
class RobustFamily:
    constraints: tuple[UncertainConstraint, ...]

    def __len__(self) -> int:
        return len(self.constraints)


ConstraintFamily = Union[ExplicitFamily, RobustFamily]


@dataclass(frozen=True)
class PackCoverInstance:
    variant: Variant
    C: np.ndarray
    b: np.ndarray
    constraints: ConstraintFamily

    @property
    def n(self) -> int:
        return int(self.C.shape[0])

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def is_robust(self) -> bool:
        return isinstance(self.constraints, RobustFamily)


@dataclass(frozen=True)
class OracleAnswer:
    index: int
    realized: np.ndarray
    value: float
    key: DualKey
    delta: Optional[np.ndarray] = None


class ConstraintOracle(Protocol):
    """Pure map from a PSD query matrix to the extreme constraint for that matrix."""

    mode: OracleMode

    def __call__(self, Y: np.ndarray) -> OracleAnswer: ...


@dataclass
class PrimalDualPair:
    X: np.ndarray
    y: dict[DualKey, float]
    primal_objective: float
    dual_objective: float
    iterations: int
    phases: int
    epsilon: float
    variant: Variant = Variant.TYPE1
    solver: str = "log"
    atoms: dict[str, dict[str, Any]] = field(default_factory=dict)
    certificates: dict[str, Any] = field(default_factory=dict)
    report: dict[str, Any] = field(default_factory=dict)

    @property
    def support_size(self) -> int:
        return sum(1 for w in self.y.values() if w > 0)


# --- oracles ---------------------------------------------------------------------------------------


def _pick(values: np.ndarray, mode: OracleMode) -> int:
    # argmax/argmin return the first occurrence, i.e. the lowest index on ties
    return int(np.argmax(values)) if mode is OracleMode.MAX else int(np.argmin(values))


class ExplicitOracle:
    """Exact scan over an explicit list. Inner products are evaluated in one einsum."""

    def __init__(self, matrices: Sequence[np.ndarray], mode: OracleMode, keys: Optional[Sequence[DualKey]] = None):
        if len(matrices) == 0:
            raise EmptyFamily("oracle over an empty constraint family")
        self.mode = mode
        self.matrices = tuple(matrices)
        self._stack = np.stack(self.matrices)
        self.keys = tuple(keys) if keys is not None else tuple(range(len(self.matrices)))

    def values(self, Y: np.ndarray) -> np.ndarray:
        return np.einsum("kij,ij->k", self._stack, Y)

    def __call__(self, Y: np.ndarray) -> OracleAnswer:
        vals = self.values(Y)
        i = _pick(vals, self.mode)
        return OracleAnswer(index=i, realized=self.matrices[i], value=float(vals[i]), key=self.keys[i])


def robust_key(index: int, delta: np.ndarray) -> str:
    return f"{index}:" + ",".join(repr(float(d)) for d in delta)


def robust_worst_case(uc: UncertainConstraint, Y: np.ndarray) -> tuple[np.ndarray, float]:
    """Maximize A0•Y + sum_r delta_r g_r over the uncertainty set, g_r = A^r•Y >= 0."""
    base = inner(uc.A0, Y)
    g = np.array([inner(P, Y) for P in uc.perturbations], dtype=np.float64)
    s = uc.uncertainty
    delta0 = np.asarray(s.delta0, dtype=np.float64)
    if isinstance(s, EllipsoidSet):
        D = np.asarray(s.D, dtype=np.float64)
        try:
            np.linalg.cholesky(symmetrize(D))
        except np.linalg.LinAlgError as e:
            raise InvalidUncertaintySet("ellipsoid matrix D is not positive definite") from e
        Dg = D @ g
        q = float(g @ Dg)
        delta = delta0.copy() if q <= 0.0 else delta0 + Dg / np.sqrt(q)
    else:
        delta = delta0.copy()
        if g.size:
            delta[int(np.argmax(g))] += float(s.rho)
    return delta, base + float(delta @ g)


class RobustOracle:
    """Worst case inside each uncertainty set, then the extreme constraint across the family."""

    def __init__(self, constraints: Sequence[UncertainConstraint], mode: OracleMode):
        if len(constraints) == 0:
            raise EmptyFamily("oracle over an empty constraint family")
        self.mode = mode
        self.constraints = tuple(constraints)

    def __call__(self, Y: np.ndarray) -> OracleAnswer:
        cases = [robust_worst_case(uc, Y) for uc in self.constraints]
        vals = np.array([v for _, v in cases])
        i = _pick(vals, self.mode)
        delta = cases[i][0]
        realized = self.constraints[i].realize(delta)
        return OracleAnswer(index=i, realized=realized, value=float(vals[i]), key=robust_key(i, delta), delta=delta)


def oracle_for(instance: PackCoverInstance, mode: Optional[OracleMode] = None) -> ConstraintOracle:
    mode = mode or mode_for(instance.variant)
    fam = instance.constraints
    if isinstance(fam, ExplicitFamily):
        return ExplicitOracle(fam.matrices, mode)
    return RobustOracle(fam.constraints, mode)


def oracle_query(instance: PackCoverInstance, Y: np.ndarray, mode: OracleMode) -> OracleAnswer:
    return oracle_for(instance, mode)(Y)


# --- JSON codec ------------------------------------------------------------------------------------


def _matrix(raw: Any, n: int, what: str, index: Optional[int] = None) -> np.ndarray:
    try:
        A = np.asarray(raw, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"{what}: not a numeric matrix", index) from e
    if A.shape != (n, n):
        raise ValidationError(f"{what}: expected shape ({n}, {n}), got {A.shape}", index)
    try:
        return as_symmetric(A, what)
    except InvalidMatrix as e:
        raise ValidationError(str(e), index) from e


def _require_psd(A: np.ndarray, what: str, index: Optional[int], nonzero: bool = True) -> None:
    w = np.linalg.eigvalsh(A)
    if w[0] < -PSD_TOL * max(1.0, abs(float(w[-1]))):
        raise ValidationError(f"{what}: matrix is not PSD (lambda_min={w[0]:.3e})", index)
    if nonzero and not np.any(A):
        raise ValidationError(f"{what}: matrix is zero", index)


def _parse_set(raw: dict, k: int, index: int) -> UncertaintySet:
    kind = raw.get("kind")
    delta0 = np.asarray(raw.get("delta0", []), dtype=np.float64)
    if delta0.shape != (k,):
        raise ValidationError(f"constraint {index}: delta0 must have length {k}", index)
    if np.any(delta0 < 0):
        raise ValidationError(f"constraint {index}: delta0 must be nonnegative", index)
    if kind == "ellipsoid":
        D = np.asarray(raw.get("D"), dtype=np.float64)
        if D.shape != (k, k):
            raise ValidationError(f"constraint {index}: ellipsoid D must be {k}x{k}", index)
        D = symmetrize(D)
        if k and np.linalg.eigvalsh(D)[0] <= 0:
            raise ValidationError(f"constraint {index}: ellipsoid D is not positive definite", index)
        if np.any(delta0 - np.sqrt(np.diag(D)) < -ELLIPSOID_TOL):
            raise ValidationError(f"constraint {index}: ellipsoid leaves the nonnegative orthant", index)
        return EllipsoidSet(delta0=delta0, D=D)
    if kind == "box":
        rho = float(raw.get("rho", 0.0))
        if rho <= 0:
            raise ValidationError(f"constraint {index}: box rho must be positive", index)
        return BoxSet(delta0=delta0, rho=rho)
    raise ValidationError(f"constraint {index}: unknown uncertainty set kind {kind!r}", index)


def _parse_robust(c: dict, n: int, i: int) -> UncertainConstraint:
    A0 = _matrix(c["A0"], n, f"constraint {i} A0", i)
    _require_psd(A0, f"constraint {i} A0", i, nonzero=False)
    perts = tuple(_matrix(P, n, f"constraint {i} perturbation {r}", i) for r, P in enumerate(c.get("perturbations", [])))
    for r, P in enumerate(perts):
        _require_psd(P, f"constraint {i} perturbation {r}", i, nonzero=False)
    if not np.any(A0) and not any(np.any(P) for P in perts):
        raise ValidationError(f"constraint {i}: nominal and perturbation matrices are all zero", i)
    return UncertainConstraint(A0=A0, perturbations=perts, uncertainty=_parse_set(c.get("set", {}), len(perts), i))


def _parse_explicit(c: dict, n: int, i: int) -> np.ndarray:
    A = _matrix(c["A"], n, f"constraint {i}", i)
    _require_psd(A, f"constraint {i}", i)
    return A


def _parse_constraint(parse: Callable[[dict, int, int], Any], c: Any, n: int, i: int) -> Any:
    try:
        return parse(c, n, i)
    except ValidationError:
        raise
    except KeyError as e:
        raise ValidationError(f"constraint {i}: missing field {e.args[0]!r}", i) from e
    except (TypeError, AttributeError, ValueError) as e:
        raise ValidationError(f"constraint {i}: malformed constraint ({e})", i) from e


def instance_from_dict(doc: dict) -> PackCoverInstance:
    try:
        variant = Variant(doc["variant"])
        n = int(doc["n"])
        raw_constraints = list(doc["constraints"])
        raw_b = doc["b"]
    except KeyError as e:
        raise ValidationError(f"instance document missing field {e.args[0]!r}") from e
    except (TypeError, ValueError) as e:
        raise ValidationError(f"invalid instance header: {e}") from e
    if n < 1:
        raise ValidationError(f"n must be positive, got {n}")
    C = _matrix(doc.get("C"), n, "C")
    _require_psd(C, "C", None)
    try:
        b = np.asarray(raw_b, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"b is not a numeric vector: {e}") from e
    if b.ndim != 1 or b.shape[0] != len(raw_constraints):
        raise ValidationError(f"b has length {b.shape}, expected {len(raw_constraints)} (one per constraint)")
    if len(raw_constraints) == 0:
        raise ValidationError("constraint family is empty")
    bad = np.flatnonzero(~(b > 0))
    if bad.size:
        i = int(bad[0])
        raise ValidationError(f"constraint {i}: b_{i}={b[i]} violates assumption (A): every b_i must be > 0", i)
    for i, c in enumerate(raw_constraints):
        if not isinstance(c, dict):
            raise ValidationError(f"constraint {i}: expected an object, got {type(c).__name__}", i)

    robust = ["A0" in c for c in raw_constraints]
    if any(robust) and not all(robust):
        raise ValidationError("constraint family mixes explicit and robust constraints")
    if all(robust):
        if variant is not Variant.TYPE1:
            raise ValidationError("robust constraint families are supported for type1 instances only")
        ucs = tuple(_parse_constraint(_parse_robust, c, n, i) for i, c in enumerate(raw_constraints))
        family: ConstraintFamily = RobustFamily(ucs)
    else:
        mats = tuple(_parse_constraint(_parse_explicit, c, n, i) for i, c in enumerate(raw_constraints))
        family = ExplicitFamily(mats)
    return PackCoverInstance(variant=variant, C=C, b=b, constraints=family)


def load_instance(text: str | bytes) -> PackCoverInstance:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed instance JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ParseError("instance JSON must be an object")
    return instance_from_dict(doc)


def instance_to_dict(instance: PackCoverInstance) -> dict:
    if isinstance(instance.constraints, ExplicitFamily):
        constraints = [{"A": A} for A in instance.constraints.matrices]
    else:
        constraints = []
        for uc in instance.constraints.constraints:
            s = uc.uncertainty
            raw_set: dict[str, Any] = {"kind": s.kind, "delta0": s.delta0}
            if isinstance(s, EllipsoidSet):
                raw_set["D"] = s.D
            else:
                raw_set["rho"] = s.rho
            constraints.append({"A0": uc.A0, "perturbations": list(uc.perturbations), "set": raw_set})
    return ensure_serializable(
        {"variant": instance.variant.value, "n": instance.n, "C": instance.C, "b": instance.b, "constraints": constraints}
    )


def dump_instance(instance: PackCoverInstance) -> str:
    return json.dumps(instance_to_dict(instance), indent=2)


def save_solution(pair: PrimalDualPair) -> str:
    doc: dict[str, Any] = {
        "X": pair.X,
        "y": {str(k): float(w) for k, w in pair.y.items()},
        "primal_objective": pair.primal_objective,
        "dual_objective": pair.dual_objective,
        "iterations": pair.iterations,
        "phases": pair.phases,
        "epsilon": pair.epsilon,
        "variant": pair.variant.value,
        "solver": pair.solver,
        "certificates": pair.certificates,
    }
    if pair.atoms:
        doc["atoms"] = pair.atoms
    if pair.report:
        doc["report"] = pair.report
    return json.dumps(ensure_serializable(doc), indent=2)


def _dual_key(raw: str) -> DualKey:
    return int(raw) if raw.lstrip("-").isdigit() else raw


def load_solution(text: str | bytes) -> PrimalDualPair:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text)
        X = np.asarray(doc["X"], dtype=np.float64)
        return PrimalDualPair(
            X=X,
            y={_dual_key(k): float(v) for k, v in doc.get("y", {}).items()},
            primal_objective=float(doc["primal_objective"]),
            dual_objective=float(doc["dual_objective"]),
            iterations=int(doc["iterations"]),
            phases=int(doc["phases"]),
            epsilon=float(doc["epsilon"]),
            variant=Variant(doc.get("variant", "type1")),
            solver=doc.get("solver", "log"),
            atoms=doc.get("atoms", {}),
            certificates=doc.get("certificates", {}),
            report=doc.get("report", {}),
        )
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed solution JSON: {e}") from e
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"invalid solution document: {e}") from e


def realized_atom(instance: PackCoverInstance, key: DualKey, atoms: dict[str, dict[str, Any]]) -> np.ndarray:
    """Constraint matrix behind a dual key: A_i for explicit families, A0 + sum delta_r A^r for robust ones."""
    fam = instance.constraints
    if isinstance(fam, ExplicitFamily):
        return fam.matrices[int(key)]
    atom = atoms.get(str(key))
    if atom is None:
        raise ValidationError(f"dual key {key!r} has no recorded atom for the robust family")
    i = int(atom["index"])
    return fam.constraints[i].realize(np.asarray(atom["delta"], dtype=np.float64))
