import math

import numpy as np
import pytest

from packsdp.src.config import SolverConfig, ThetaStrategy
from packsdp.src.errors import IterationCapExceeded, NumericalFailure
from packsdp.src.instance import Variant
from packsdp.src.linalg import inner, lambda_max, lambda_min
from packsdp.src.log_potential import (
    EPS0,
    _bracket,
    _check_spectrum_side,
    _grid_search,
    claim_ratio,
    delta_for,
    find_theta,
    g_value,
    iteration_bound,
    primal_from_theta,
    solve,
)
from packsdp.src.normalization import NormalizedInstance
from packsdp.src.verification import certify


@pytest.mark.parametrize("strategy", list(ThetaStrategy))
@pytest.mark.parametrize("n", [1, 2, 5])
def test_find_theta_identity_variant_one(n, strategy):
    eps_s = 0.5
    d = delta_for(eps_s, n)
    theta = find_theta(np.eye(n), eps_s, d, Variant.TYPE1, seed=0, strategy=strategy)
    assert (1 - d) * 2 / 3 <= theta <= 2 / 3


@pytest.mark.parametrize("strategy", list(ThetaStrategy))
@pytest.mark.parametrize("n", [1, 2, 5])
def test_find_theta_identity_variant_two(n, strategy):
    eps_s = 0.25
    d = delta_for(eps_s, n)
    theta = find_theta(np.eye(n), eps_s, d, Variant.TYPE2, seed=0, strategy=strategy)
    assert 4 / 3 <= theta <= (1 + d) * 4 / 3


def test_find_theta_two_eigenvalues():
    # root of (theta/4)(1/(1-theta) + 1/(2-theta)) = 1 in (0, 1), by bisection
    f = lambda t: t / 4 * (1 / (1 - t) + 1 / (2 - t)) - 1  # noqa: E731
    lo, hi = 0.0, 1.0 - 1e-15
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if f(mid) < 0 else (lo, mid)
    d = delta_for(0.5, 2)
    theta = find_theta(np.diag([1.0, 2.0]), 0.5, d, Variant.TYPE1)
    assert (1 - d) * lo <= theta <= lo * (1 + 1e-12)


@pytest.mark.parametrize("variant", list(Variant))
@pytest.mark.parametrize("n", [1, 3, 7])
def test_exact_eigenvalue_bracket_on_flat_spectrum(variant, n):
    F = 3.0 * np.eye(n)
    eps_s = EPS0[variant]
    d = delta_for(eps_s, n)
    exact = lambda_min(F) if variant is Variant.TYPE1 else lambda_max(F)
    base, K = _bracket(F, eps_s, d, variant, exact, 0.0)
    theta = _grid_search(F, eps_s, d, variant, base, K)
    assert theta is not None
    assert 1 - eps_s < g_value(F, theta, eps_s, variant) <= 1 + 1e-9


def test_primal_from_theta_examples():
    X = primal_from_theta(np.eye(2), 2 / 3, 0.5, Variant.TYPE1)
    np.testing.assert_allclose(X, 0.5 * np.eye(2))
    X = primal_from_theta(np.eye(2), 4 / 3, 0.25, Variant.TYPE2)
    np.testing.assert_allclose(X, 0.5 * np.eye(2))


def test_primal_trace_window_on_random_F(rng, psd):
    for variant, eps_s in ((Variant.TYPE1, 0.5), (Variant.TYPE2, 0.25)):
        F = psd(6, 6, rng) + 0.05 * np.eye(6)
        theta = find_theta(F, eps_s, delta_for(eps_s, 6), variant, seed=4)
        X = primal_from_theta(F, theta, eps_s, variant)
        assert 1 - eps_s < np.trace(X) <= 1 + 1e-9
        if variant is Variant.TYPE1:
            assert theta < lambda_min(F)
        else:
            assert theta > lambda_max(F)


def test_g_value_outside_spectrum_is_infinite():
    assert g_value(np.eye(2), 1.0, 0.5, Variant.TYPE1) == math.inf
    assert g_value(np.eye(2), 0.5, 0.5, Variant.TYPE2) == math.inf


def test_iteration_bound_constants():
    expected = math.ceil(480 * math.log(2) + 600 / 0.25**2)
    assert iteration_bound(1, 1.0, 0.5, Variant.TYPE1) == expected == 9933
    assert abs(iteration_bound(8, 1.0, 0.1, Variant.TYPE1) - 2 * iteration_bound(4, 1.0, 0.1, Variant.TYPE1)) <= 1
    assert abs(iteration_bound(8, 2.0, 0.1, Variant.TYPE2) - 2 * iteration_bound(4, 2.0, 0.1, Variant.TYPE2)) <= 2


def test_claim_ratios():
    assert claim_ratio(0.1, Variant.TYPE1) == pytest.approx((0.9 / 1.1) ** 2)
    assert claim_ratio(0.1, Variant.TYPE2) == pytest.approx(1.1 / 0.8**2)


def _check_iteration_windows(trace, variant):
    for rec in trace.records[::10]:
        eps_s, theta = rec["eps_s"], rec["theta"]
        assert 1 - eps_s < rec["g"] <= 1 + 1e-9
        assert rec["y_sum"] == pytest.approx(1.0, abs=1e-10)
        xf = rec["x_dot_f"]
        if variant is Variant.TYPE1:
            assert theta < xf <= (1 + eps_s) * theta * (1 + 1e-9)
        else:
            assert (1 - 2 * eps_s) * theta < xf <= (1 - eps_s) * theta * (1 + 1e-9)


def _assert_certified(norm, pair, variant):
    cert = certify(norm, pair)
    assert cert.max_primal_violation <= 1e-9
    H = sum(w * norm.matrix_for(k) for k, w in pair.y.items())
    if variant is Variant.TYPE1:
        assert lambda_min(H) >= 1 - 1e-12
        assert pair.primal_objective / pair.dual_objective >= pair.report["claim_ratio"] - 1e-9
    else:
        assert lambda_max(H) <= 1 + 1e-12
        assert pair.primal_objective / pair.dual_objective <= pair.report["claim_ratio"] + 1e-9
    assert pair.iterations <= pair.report["iteration_bound"]
    assert cert.passed


def test_solve_variant_one_diagonal(diag_pair):
    norm = NormalizedInstance.from_matrices(Variant.TYPE1, diag_pair)
    pair, trace = solve(norm, config=SolverConfig(eps=0.1, seed=1))
    _assert_certified(norm, pair, Variant.TYPE1)
    assert pair.primal_objective >= (1 - 5 * 0.1) * 2 / 3
    for A in diag_pair:
        assert inner(A, pair.X) <= 1 + 1e-9
    assert pair.support_size <= pair.iterations + len(norm.initial_support)
    _check_iteration_windows(trace, Variant.TYPE1)


def test_solve_variant_two_scalar():
    norm = NormalizedInstance.from_matrices(Variant.TYPE2, [np.array([[2.0]])])
    pair, _ = solve(norm, config=SolverConfig(eps=0.1))
    _assert_certified(norm, pair, Variant.TYPE2)
    assert 2 * pair.X[0, 0] >= 1 - 1e-9
    assert pair.dual_objective <= 0.5 + 1e-12


def test_solve_single_constraint_fixed_point():
    norm = NormalizedInstance.from_matrices(Variant.TYPE1, [np.eye(3)])
    pair, trace = solve(norm, config=SolverConfig(eps=0.25))
    assert set(pair.y) == {0}
    assert trace.records[0]["nu"] == pytest.approx(0.0, abs=1e-12)
    ratio = pair.primal_objective / pair.dual_objective
    assert ratio >= ((1 - pair.epsilon) / (1 + pair.epsilon)) ** 2 - 1e-9
    _assert_certified(norm, pair, Variant.TYPE1)


def test_variant_two_large_eps_runs_one_phase(diag_pair):
    norm = NormalizedInstance.from_matrices(Variant.TYPE2, diag_pair)
    pair, trace = solve(norm, config=SolverConfig(eps=0.3))
    assert pair.phases == 1
    assert {r["eps_s"] for r in trace.records} == {EPS0[Variant.TYPE2]}
    _assert_certified(norm, pair, Variant.TYPE2)


def test_solve_variant_two_random(rng, psd):
    mats = [psd(3, int(rng.integers(1, 4)), rng) + 0.05 * np.eye(3) for _ in range(5)]
    norm = NormalizedInstance.from_matrices(Variant.TYPE2, mats)
    pair, trace = solve(norm, config=SolverConfig(eps=0.1, seed=2))
    _assert_certified(norm, pair, Variant.TYPE2)
    assert pair.support_size <= pair.iterations + 1
    _check_iteration_windows(trace, Variant.TYPE2)


def test_dense_init_uses_every_constraint(diag_pair):
    norm = NormalizedInstance.from_matrices(Variant.TYPE1, diag_pair)
    pair, _ = solve(norm, config=SolverConfig(eps=0.25, dense_init=True))
    assert pair.report["psi"] == 2.0
    _assert_certified(norm, pair, Variant.TYPE1)


def test_direct_root_agrees_with_binary_search(diag_pair):
    norm = NormalizedInstance.from_matrices(Variant.TYPE1, diag_pair)
    a, _ = solve(norm, config=SolverConfig(eps=0.25))
    b, _ = solve(norm, config=SolverConfig(eps=0.25, theta_strategy=ThetaStrategy.DIRECT_ROOT))
    # weak duality around the optimum 2/3 for both runs
    for pair in (a, b):
        assert pair.primal_objective <= 2 / 3 + 1e-9 <= pair.dual_objective + 2e-9
    _assert_certified(norm, b, Variant.TYPE1)


def test_solve_is_deterministic(diag_pair):
    norm = NormalizedInstance.from_matrices(Variant.TYPE2, diag_pair)
    a, _ = solve(norm, config=SolverConfig(eps=0.2, seed=5))
    b, _ = solve(norm, config=SolverConfig(eps=0.2, seed=5))
    np.testing.assert_array_equal(a.X, b.X)
    assert a.y == b.y


def test_iteration_cap_raises(diag_pair):
    norm = NormalizedInstance.from_matrices(Variant.TYPE1, diag_pair)
    with pytest.raises(IterationCapExceeded) as err:
        solve(norm, config=SolverConfig(eps=0.05, max_iterations=3))
    assert len(err.value.trace) == 3


def test_trace_frame_columns(diag_pair):
    norm = NormalizedInstance.from_matrices(Variant.TYPE1, diag_pair)
    _, trace = solve(norm, config=SolverConfig(eps=0.25))
    frame = trace.to_frame()
    assert {"t", "s", "eps_s", "theta", "nu", "oracle_index", "phi"} <= set(frame.columns)
    assert list(frame["t"]) == list(range(len(frame)))
    assert set(trace.public_records()[0]) == {"t", "s", "eps_s", "theta", "nu", "oracle_index", "phi"}


@pytest.mark.parametrize("strategy", list(ThetaStrategy))
@pytest.mark.parametrize("variant", list(Variant))
def test_potential_moves_by_the_guaranteed_amount(diag_pair, variant, strategy):
    # phi is stationary in theta at the root, so the theta window costs only a second-order term
    norm = NormalizedInstance.from_matrices(variant, diag_pair)
    _, trace = solve(norm, config=SolverConfig(eps=0.2, theta_strategy=strategy))
    n = norm.dim
    steps = 0
    for cur, nxt in zip(trace.records, trace.records[1:]):
        if cur["s"] != nxt["s"]:
            continue
        eps_s = cur["eps_s"]
        slack = n * n / eps_s * delta_for(eps_s, n) ** 2 + 1e-9
        gain = eps_s * max(cur["nu"], 0.0) ** 2 / (40 * n)
        change = nxt["phi"] - cur["phi"]
        if variant is Variant.TYPE1:
            assert change >= gain - slack
        else:
            assert change <= -gain + slack
        steps += 1
    assert steps > 0


@pytest.mark.parametrize("variant", list(Variant))
def test_theta_stays_outside_the_updated_spectrum(rng, psd, diag_pair, variant):
    cfg = SolverConfig(eps=0.1, debug_spectrum_checks=True)
    for mats in (diag_pair, [psd(3, 3, rng) + 0.1 * np.eye(3) for _ in range(4)]):
        norm = NormalizedInstance.from_matrices(variant, mats)
        pair, _ = solve(norm, config=cfg)
        assert certify(norm, pair).passed


@pytest.mark.parametrize("variant, theta", [(Variant.TYPE1, 1.0), (Variant.TYPE2, 2.0)])
def test_spectrum_side_check_rejects_wrong_side(variant, theta):
    with pytest.raises(NumericalFailure, match="lambda_m"):
        _check_spectrum_side(np.diag([1.0, 2.0]), theta, variant)
