import numpy as np
import pytest

from packsdp.sim.src.generators.gen_degenerate import singular_type1, type2_with_dropped
from packsdp.sim.src.generators.gen_explicit import dense_matrices
from packsdp.sim.src.generators.gen_robust import robust_type1
from packsdp.src.config import SolverConfig
from packsdp.src.errors import ConfigError
from packsdp.src.instance import ExplicitFamily, PackCoverInstance, Variant, load_solution, save_solution
from packsdp.src.linalg import inner
from packsdp.src.normalization import normalize_type1
from packsdp.src.pipeline import check_solver_choice, lifted_claim_ratio, solve_instance
from packsdp.src.verification import certify


def test_identity_instance_keeps_normalized_answer(make_instance, diag_pair):
    res = solve_instance(make_instance(Variant.TYPE1, np.eye(2), diag_pair), SolverConfig(eps=0.1))
    assert res.certificate.passed
    assert res.pair.report["perturbation_delta"] == 0.0
    assert res.pair.report["claim_ratio"] == res.pair.report["normalized_claim_ratio"]
    assert res.pair.primal_objective == pytest.approx(np.trace(res.pair.X))
    assert res.pair.certificates["max_violation"] <= 1e-7


def test_b_scaled_dual_objective(make_instance):
    inst = make_instance(Variant.TYPE1, np.eye(2), [np.diag([4.0, 2.0]), np.diag([2.0, 4.0])], b=[2.0, 2.0])
    res = solve_instance(inst, SolverConfig(eps=0.1))
    assert res.certificate.passed
    assert res.pair.dual_objective == pytest.approx(sum(2.0 * w for w in res.pair.y.values()))
    assert res.pair.primal_objective <= 2 / 3 + 1e-9 <= res.pair.dual_objective + 1e-9


def test_singular_type1_end_to_end(rng):
    inst = singular_type1(4, 4, 1, rng)
    res = solve_instance(inst, SolverConfig(eps=0.1, seed=3))
    assert res.pair.report["perturbation_delta"] > 0
    assert res.certificate.primal_ok and res.certificate.dual_ok
    assert res.certificate.passed


@pytest.mark.parametrize("solver", ["log", "mwu"])
def test_type2_with_dropped_constraints_end_to_end(rng, solver):
    inst = type2_with_dropped(4, 6, 1, 2, rng)
    res = solve_instance(inst, SolverConfig(eps=0.1), solver)
    assert res.pair.report["dropped"]
    assert res.normalized.dim == 3
    for A, bi in zip(inst.constraints.matrices, inst.b):
        assert inner(A, res.pair.X) / bi >= 1 - 1e-7
    assert res.certificate.passed


def test_dense_type2_matches_across_solvers(rng):
    mats = dense_matrices(4, 5, rng)
    inst = PackCoverInstance(variant=Variant.TYPE2, C=np.eye(4), b=np.ones(5), constraints=ExplicitFamily(tuple(mats)))
    log = solve_instance(inst, SolverConfig(eps=0.1), "log")
    mwu = solve_instance(inst, SolverConfig(eps=0.1), "mwu")
    assert log.certificate.passed and mwu.certificate.passed
    assert max(log.pair.dual_objective, mwu.pair.dual_objective) <= min(
        log.pair.primal_objective, mwu.pair.primal_objective
    ) * (1 + 1e-7)


@pytest.mark.parametrize("kind", ["ellipsoid", "box"])
def test_robust_type1_end_to_end(rng, kind):
    inst = robust_type1(3, 3, 2, kind, rng)
    res = solve_instance(inst, SolverConfig(eps=0.1))
    assert res.certificate.passed
    assert all(str(k).count(":") == 1 for k in res.pair.y)
    assert set(res.pair.atoms) == {str(k) for k in res.pair.y}
    # the stored realizations are enough to re-certify from the written document
    again = load_solution(save_solution(res.pair))
    assert certify(inst, again).passed


def test_lifted_claim_ratio(make_instance):
    inst = make_instance(Variant.TYPE1, np.diag([1.0, 0.0]), [np.eye(2)])
    rec = normalize_type1(inst, 0.1).record
    assert lifted_claim_ratio(0.5, rec) == pytest.approx(0.4)
    rec = normalize_type1(make_instance(Variant.TYPE1, np.eye(2), [np.eye(2)]), 0.1).record
    assert lifted_claim_ratio(0.5, rec) == 0.5


def test_solver_choice_validation(make_instance, diag_pair):
    inst = make_instance(Variant.TYPE1, np.eye(2), diag_pair)
    with pytest.raises(ConfigError, match="type2"):
        check_solver_choice(inst, "mwu")
    with pytest.raises(ConfigError):
        check_solver_choice(inst, "simplex")
    check_solver_choice(inst, "log")
