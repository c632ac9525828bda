"""
Acceptance matrix: solve every generated instance at each eps with every applicable solver, collect one row per
run and evaluate quality gates (feasibility, claimed ratio, iteration bound, sparsity). Fails CI on any gate.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import pandas as pd

from packsdp.sim.src.simulate import DEFAULT_SIM_CONFIG, generate_instances
from packsdp.src.config import DEFAULT_CONFIG_PATH, SolverConfig, certificate_tolerances, load_config
from packsdp.src.errors import PackSdpError
from packsdp.src.instance import PackCoverInstance, Variant
from packsdp.src.io import write_csv
from packsdp.src.pipeline import solve_instance

logger = logging.getLogger(__name__)

DEFAULT_EPS_GRID = (0.25, 0.1, 0.05)
DEFAULT_OUTPUT = "./runs/benchmark.csv"


def _solvers_for(instance: PackCoverInstance) -> list[str]:
    return ["log", "mwu"] if instance.variant is Variant.TYPE2 else ["log"]


def run_matrix(
    instances: Sequence[tuple[str, PackCoverInstance]],
    eps_grid: Sequence[float] = DEFAULT_EPS_GRID,
    base: Optional[SolverConfig] = None,
    tolerances: Optional[dict[str, float]] = None,
) -> pd.DataFrame:
    base = base or SolverConfig()
    rows = []
    for name, inst in instances:
        for eps in eps_grid:
            for solver in _solvers_for(inst):
                row = {"instance": name, "variant": inst.variant.value, "solver": solver, "eps": eps, "n": inst.n, "m": inst.m}
                start = time.perf_counter()
                try:
                    res = solve_instance(inst, base.with_overrides(eps=eps), solver, tolerances)
                except (PackSdpError, ArithmeticError) as e:
                    logger.warning("%s eps=%s solver=%s failed: %s", name, eps, solver, e)
                    row.update(status="error", error=str(e), runtime_s=time.perf_counter() - start)
                    rows.append(row)
                    continue
                pair, cert = res.pair, res.certificate
                initial = int(pair.report.get("initial_support", 1)) if solver == "log" else 0
                row.update(
                    status="ok",
                    error="",
                    iterations=pair.iterations,
                    iteration_bound=int(pair.report["iteration_bound"]),
                    phases=pair.phases,
                    support=pair.support_size,
                    initial_support=initial,
                    ratio=cert.gap_ratio,
                    claim_ratio=cert.claim_ratio,
                    max_violation=cert.max_primal_violation,
                    dual_residual=cert.dual_spectral_residual,
                    primal_ok=cert.primal_ok,
                    dual_ok=cert.dual_ok,
                    gap_ok=cert.gap_ok,
                    iter_ok=cert.iter_bound_satisfied,
                    runtime_s=time.perf_counter() - start,
                )
                rows.append(row)
    return pd.DataFrame(rows)


def evaluate_gates(df: pd.DataFrame) -> bool:
    """Print one OK/FAIL line per gate. Returns True if every gate passes."""
    if df.empty:
        print("No benchmark runs to evaluate.", file=sys.stderr)
        return False
    ok_runs = df[df["status"] == "ok"]
    gates = {
        "errors": df["status"] != "ok",
        "feasibility": ~(ok_runs["primal_ok"] & ok_runs["dual_ok"]),
        "claimed ratio": ~ok_runs["gap_ok"],
        "iteration bound": ~ok_runs["iter_ok"],
        "sparsity": ok_runs["support"] > ok_runs["iterations"] + ok_runs["initial_support"].clip(lower=1),
    }
    passed = True
    for gate, failures in gates.items():
        bad = int(failures.sum())
        if bad:
            names = sorted(set(df.loc[failures[failures].index, "instance"]))
            print(f"[{gate}] {bad} of {len(failures)} run(s) failed: {', '.join(names)} FAIL", file=sys.stderr)
            passed = False
        else:
            print(f"[{gate}] {len(failures)} run(s) OK")
    return passed


def main() -> None:
    parser = argparse.ArgumentParser(
        description="Run the eps x instance x solver acceptance matrix and fail if any quality gate fails.",
    )
    parser.add_argument("--sim-config", default=DEFAULT_SIM_CONFIG, help="Path to sim_config.yml")
    parser.add_argument("--config", default=str(DEFAULT_CONFIG_PATH), help="Path to solver_config.yml")
    parser.add_argument(
        "--eps",
        type=float,
        nargs="+",
        default=list(DEFAULT_EPS_GRID),
        help=f"Target accuracies (default {' '.join(map(str, DEFAULT_EPS_GRID))})",
    )
    parser.add_argument("--output", default=DEFAULT_OUTPUT, help="CSV with one row per run")
    parser.add_argument("--log-level", default="WARNING", help="Logging level on stderr")
    args = parser.parse_args()
    logging.basicConfig(level=args.log_level.upper(), stream=sys.stderr)

    raw = load_config(args.config)
    instances = generate_instances(load_config(args.sim_config))
    df = run_matrix(instances, args.eps, SolverConfig.from_dict(raw.get("solver")), certificate_tolerances(raw))
    path = write_csv(df, Path(args.output))
    print(f"Wrote {len(df)} runs to {path}")
    ok = evaluate_gates(df)
    raise SystemExit(0 if ok else 1)


if __name__ == "__main__":
    main()
