import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from packsdp.src.errors import EmptyFamily, InvalidUncertaintySet, ParseError, ValidationError
from packsdp.src.instance import (
    BoxSet,
    EllipsoidSet,
    ExplicitOracle,
    OracleMode,
    PackCoverInstance,
    PrimalDualPair,
    RobustFamily,
    UncertainConstraint,
    Variant,
    dump_instance,
    load_instance,
    load_solution,
    oracle_query,
    robust_worst_case,
    save_solution,
)


def _doc(**overrides):
    doc = {"variant": "type1", "n": 1, "C": [[1.0]], "b": [1.0], "constraints": [{"A": [[2.0]]}]}
    doc.update(overrides)
    return json.dumps(doc)


def test_oracle_query_max_and_min(make_instance):
    inst = make_instance(Variant.TYPE1, np.eye(2), [np.diag([1.0, 0.0]), np.diag([0.0, 2.0])])
    top = oracle_query(inst, np.eye(2), OracleMode.MAX)
    assert (top.index, top.value) == (1, 2.0)
    low = oracle_query(inst, np.eye(2), OracleMode.MIN)
    assert (low.index, low.value) == (0, 1.0)


def test_oracle_ties_pick_lowest_index():
    ans = ExplicitOracle([np.eye(2), np.eye(2)], OracleMode.MAX)(np.eye(2))
    assert ans.index == 0


def test_oracle_matches_linear_scan(rng, psd):
    mats = [psd(4, 4, rng) for _ in range(20)]
    Y = psd(4, 4, rng)
    scan = np.array([np.trace(A @ Y) for A in mats])
    oracle = ExplicitOracle(mats, OracleMode.MAX)
    assert oracle(Y).index == int(np.argmax(scan))
    assert ExplicitOracle(mats, OracleMode.MIN)(Y).index == int(np.argmin(scan))
    assert oracle(Y).value == pytest.approx(scan.max())


def test_empty_family_raises():
    with pytest.raises(EmptyFamily):
        ExplicitOracle([], OracleMode.MAX)


def _uc(uncertainty):
    return UncertainConstraint(A0=np.diag([1.0, 0.0]), perturbations=(np.diag([0.0, 1.0]),), uncertainty=uncertainty)


def test_robust_worst_case_ellipsoid():
    delta, value = robust_worst_case(_uc(EllipsoidSet(delta0=np.array([1.0]), D=np.array([[1.0]]))), np.eye(2))
    assert_allclose(delta, [2.0])
    assert value == pytest.approx(3.0)
    grid = np.linspace(0.0, 2.0, 201)
    assert value >= np.max(1.0 + grid) - 1e-12


def test_robust_worst_case_box():
    delta, value = robust_worst_case(_uc(BoxSet(delta0=np.array([0.0]), rho=0.5)), np.eye(2))
    assert_allclose(delta, [0.5])
    assert value == pytest.approx(1.5)


def test_robust_worst_case_zero_gradient():
    Y = np.diag([1.0, 0.0])
    delta, value = robust_worst_case(_uc(EllipsoidSet(delta0=np.array([1.0]), D=np.array([[1.0]]))), Y)
    assert_allclose(delta, [1.0])
    assert value == pytest.approx(1.0)


def test_robust_worst_case_rejects_indefinite_ellipsoid():
    uc = _uc(EllipsoidSet(delta0=np.array([1.0]), D=np.array([[-1.0]])))
    with pytest.raises(InvalidUncertaintySet):
        robust_worst_case(uc, np.eye(2))


def test_ellipsoid_closed_form_beats_sampling(rng, psd):
    for _ in range(50):
        k = 3
        d = rng.uniform(0.1, 0.5, size=k)
        uset = EllipsoidSet(delta0=d + 0.1, D=np.diag(d**2))
        uc = UncertainConstraint(A0=psd(3, 3, rng), perturbations=tuple(psd(3, 1, rng) for _ in range(k)), uncertainty=uset)
        Y = psd(3, 3, rng)
        _, best = robust_worst_case(uc, Y)
        u = rng.normal(size=(1000, k))
        u /= np.maximum(np.linalg.norm(u, axis=1, keepdims=True), 1.0) * rng.uniform(1.0, 2.0, size=(1000, 1))
        samples = uset.delta0 + u * d  # delta0 + D^{1/2} u with ||u|| <= 1
        values = [np.trace(uc.realize(s) @ Y) for s in samples]
        assert best >= max(values) - 1e-9


def _random_pd(k, rng):
    M = rng.normal(size=(k, k))
    return 0.05 * (M @ M.T) + 0.01 * np.eye(k)


def test_ellipsoid_closed_form_beats_sampling_full_matrix(rng, psd):
    k = 3
    for _ in range(30):
        D = _random_pd(k, rng)
        uset = EllipsoidSet(delta0=np.sqrt(np.diag(D)) + 0.1, D=D)
        uc = UncertainConstraint(A0=psd(3, 3, rng), perturbations=tuple(psd(3, 1, rng) for _ in range(k)), uncertainty=uset)
        Y = psd(3, 3, rng)
        delta, best = robust_worst_case(uc, Y)
        step = delta - uset.delta0
        assert step @ np.linalg.solve(D, step) == pytest.approx(1.0)
        u = rng.normal(size=(1000, k))
        u /= np.maximum(np.linalg.norm(u, axis=1, keepdims=True), 1.0)
        samples = uset.delta0 + u @ np.linalg.cholesky(D).T
        values = [np.trace(uc.realize(s) @ Y) for s in samples]
        assert best >= max(values) - 1e-9


@pytest.mark.parametrize("trial", range(10))
def test_worst_case_grows_with_the_uncertainty_set(rng, psd, trial):
    k = 2
    A0, perts, Y = psd(3, 3, rng), tuple(psd(3, 1, rng) for _ in range(k)), psd(3, 3, rng)
    delta0 = np.full(k, 0.2)
    box = [robust_worst_case(UncertainConstraint(A0, perts, BoxSet(delta0, rho)), Y)[1] for rho in (0.1, 0.5, 1.0, 3.0)]
    assert np.all(np.diff(box) >= -1e-12)
    D = 0.01 * _random_pd(k, rng)
    ell = [robust_worst_case(UncertainConstraint(A0, perts, EllipsoidSet(delta0, c * D)), Y)[1] for c in (1.0, 1.5, 4.0)]
    assert np.all(np.diff(ell) >= -1e-12)


def test_box_formula_beats_single_coordinate_allocations(rng, psd):
    uset = BoxSet(delta0=np.array([0.1, 0.0, 0.2]), rho=0.4)
    uc = UncertainConstraint(A0=psd(3, 3, rng), perturbations=tuple(psd(3, 1, rng) for _ in range(3)), uncertainty=uset)
    Y = psd(3, 3, rng)
    _, best = robust_worst_case(uc, Y)
    for r in range(3):
        delta = uset.delta0.copy()
        delta[r] += uset.rho
        assert best >= np.trace(uc.realize(delta) @ Y) - 1e-12


def test_load_minimal_instance():
    inst = load_instance(_doc())
    assert (inst.n, inst.m) == (1, 1)
    assert inst.variant is Variant.TYPE1


def test_load_rejects_nonpositive_b():
    with pytest.raises(ValidationError, match=r"assumption \(A\)") as err:
        load_instance(_doc(b=[0.0]))
    assert err.value.index == 0


def test_load_rejects_indefinite_constraint():
    with pytest.raises(ValidationError):
        load_instance(_doc(n=2, C=np.eye(2).tolist(), constraints=[{"A": [[1.0, 2.0], [2.0, 1.0]]}]))


def test_load_rejects_malformed_json():
    with pytest.raises(ParseError):
        load_instance("{not json")


@pytest.mark.parametrize(
    "constraints",
    [[{"B": [[1.0]]}], [[[1.0]]], [{"A0": [[1.0]], "set": {"kind": "box", "delta0": ["x"], "rho": 1.0}}]],
)
def test_load_malformed_constraint_names_its_index(constraints):
    with pytest.raises(ValidationError, match="constraint 0") as err:
        load_instance(_doc(constraints=constraints))
    assert err.value.index == 0


def test_load_rejects_non_numeric_b():
    with pytest.raises(ValidationError, match="numeric"):
        load_instance(_doc(b=["x"]))


def test_load_rejects_type2_robust():
    robust = {"A0": [[1.0]], "perturbations": [[[1.0]]], "set": {"kind": "box", "delta0": [0.0], "rho": 1.0}}
    with pytest.raises(ValidationError, match="type1"):
        load_instance(_doc(variant="type2", constraints=[robust]))


def test_load_rejects_ellipsoid_outside_orthant():
    robust = {"A0": [[1.0]], "perturbations": [[[1.0]]], "set": {"kind": "ellipsoid", "delta0": [0.1], "D": [[1.0]]}}
    with pytest.raises(ValidationError, match="orthant"):
        load_instance(_doc(constraints=[robust]))


def test_instance_document_round_trip(rng, psd):
    uset = EllipsoidSet(delta0=np.array([0.5, 0.6]), D=np.diag([0.04, 0.09]))
    uc = UncertainConstraint(A0=psd(3, 3, rng), perturbations=(psd(3, 1, rng), psd(3, 1, rng)), uncertainty=uset)
    inst = PackCoverInstance(variant=Variant.TYPE1, C=np.eye(3), b=np.array([2.0]), constraints=RobustFamily((uc,)))
    back = load_instance(dump_instance(inst))
    assert back.is_robust
    assert_allclose(back.constraints.constraints[0].uncertainty.D, uset.D)
    assert_allclose(back.constraints.constraints[0].A0, uc.A0)


def test_save_solution_keys_and_empty_support():
    pair = PrimalDualPair(X=np.eye(1), y={0: 0.5}, primal_objective=1.0, dual_objective=0.5, iterations=3, phases=1, epsilon=0.1)
    assert json.loads(save_solution(pair))["y"] == {"0": 0.5}
    pair.y = {}
    assert json.loads(save_solution(pair))["y"] == {}


def test_solution_round_trip(rng, psd):
    X = psd(3, 3, rng)
    pair = PrimalDualPair(
        X=X,
        y={0: 0.25, 4: 1.0 / 3.0},
        primal_objective=float(np.trace(X)),
        dual_objective=7.0 / 12.0,
        iterations=12,
        phases=3,
        epsilon=0.0625,
        variant=Variant.TYPE2,
        report={"claim_ratio": 1.5},
    )
    back = load_solution(save_solution(pair))
    assert_allclose(back.X, X, rtol=1e-15)
    assert back.y == pair.y
    assert (back.iterations, back.phases, back.variant) == (12, 3, Variant.TYPE2)
    assert back.epsilon == pair.epsilon
    assert back.report["claim_ratio"] == 1.5
