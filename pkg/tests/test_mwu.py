import math

import numpy as np
import pytest

from packsdp.src.config import SolverConfig
from packsdp.src.errors import ValidationError
from packsdp.src.instance import Variant
from packsdp.src.linalg import inner, lambda_max
from packsdp.src.log_potential import solve
from packsdp.src.mwu import mwu_iteration_bound, mwu_ratio_floor, mwu_threshold, solve_mwu
from packsdp.src.normalization import NormalizedInstance
from packsdp.src.verification import certify


def test_threshold_and_bound():
    assert mwu_threshold(2, 0.3) == pytest.approx(math.log(2) / 0.09)
    assert mwu_threshold(1, 0.1) == pytest.approx(100.0)
    assert mwu_iteration_bound(2, 0.3) == 16
    assert mwu_iteration_bound(1, 0.5) == 4
    assert mwu_ratio_floor(0.1) >= 1 - 1.5 * 0.1


def test_identity_constraint_terminates_at_ceiling():
    norm = NormalizedInstance.from_matrices(Variant.TYPE2, [np.eye(2)])
    pair, trace = solve_mwu(norm, eps=0.3)
    assert pair.iterations == 8
    assert pair.report["M"] == pytest.approx(8.0)
    assert pair.report["L"] == pytest.approx(8.0)
    np.testing.assert_allclose(pair.X, 0.5 * np.eye(2))
    assert inner(np.eye(2), pair.X) == pytest.approx(1.0)
    assert pair.y == pytest.approx({0: 1.0})
    assert len(trace) == 8


def test_scalar_instance():
    norm = NormalizedInstance.from_matrices(Variant.TYPE2, [np.array([[2.0]])])
    pair, _ = solve_mwu(norm, eps=0.1)
    assert pair.iterations == 100
    assert pair.X[0, 0] == pytest.approx(0.5)
    assert pair.dual_objective == pytest.approx(0.5)


def test_trace_invariants(rng, psd):
    mats = [psd(4, int(rng.integers(1, 5)), rng) + 0.1 * np.eye(4) for _ in range(6)]
    norm = NormalizedInstance.from_matrices(Variant.TYPE2, mats)
    pair, trace = solve_mwu(norm, eps=0.1)
    frame = trace.to_frame()
    np.testing.assert_allclose(frame["trace_X"], frame["sum_y"], rtol=1e-10)
    assert (frame["M"].diff().dropna() >= -1e-12).all()
    assert pair.report["L"] / pair.report["M"] >= mwu_ratio_floor(0.1) - 1e-12
    assert pair.iterations <= mwu_iteration_bound(4, 0.1)

    cert = certify(norm, pair)
    assert cert.passed
    assert cert.gap_ratio <= 1 / (1 - 1.5 * 0.1) + 1e-12
    H = sum(w * norm.matrix_for(k) for k, w in pair.y.items())
    assert lambda_max(H) <= 1 + 1e-10


def test_public_trace_fields(diag_pair):
    norm = NormalizedInstance.from_matrices(Variant.TYPE2, diag_pair)
    _, trace = solve_mwu(norm, eps=0.25)
    assert set(trace.public_records()[0]) == {"t", "M", "L_running", "delta", "oracle_index"}


def test_rejects_type1(diag_pair):
    norm = NormalizedInstance.from_matrices(Variant.TYPE1, diag_pair)
    with pytest.raises(ValidationError, match="type2"):
        solve_mwu(norm)


@pytest.mark.parametrize("eps", [0.0, 0.6])
def test_rejects_eps_out_of_range(diag_pair, eps):
    norm = NormalizedInstance.from_matrices(Variant.TYPE2, diag_pair)
    with pytest.raises(ValidationError):
        solve_mwu(norm, eps=eps)


def test_agrees_with_log_potential_solver(rng, psd):
    for _ in range(10):
        n = int(rng.integers(2, 5))
        mats = [psd(n, n, rng) + 0.1 * np.eye(n) for _ in range(int(rng.integers(2, 6)))]
        norm = NormalizedInstance.from_matrices(Variant.TYPE2, mats)
        mwu_pair, _ = solve_mwu(norm, eps=0.1)
        log_pair, _ = solve(norm, config=SolverConfig(eps=0.1))
        ratio = mwu_pair.dual_objective / log_pair.dual_objective
        assert 1 / 1.5 <= ratio <= 1.5
        _assert_weak_duality(mwu_pair, log_pair)
        assert mwu_pair.primal_objective <= 1.5 * log_pair.primal_objective


def _assert_weak_duality(mwu_pair, log_pair):
    # every feasible dual value sits below every feasible primal value
    assert max(mwu_pair.dual_objective, log_pair.dual_objective) <= min(
        mwu_pair.primal_objective, log_pair.primal_objective
    ) * (1 + 1e-9)
