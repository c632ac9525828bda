"""
Instance generator: write seeded families of packing/covering instances as JSON for the CLI and the benchmark.
Deterministic for a given random_seed. Outputs to config output.base_path.
"""

from __future__ import annotations

import argparse
from pathlib import Path
from typing import Any, Callable

import numpy as np
import pandas as pd

from packsdp.sim.src.generators.gen_degenerate import generate_singular_type1, generate_type2_dropped
from packsdp.sim.src.generators.gen_explicit import generate_dense, generate_diagonal
from packsdp.sim.src.generators.gen_robust import generate_robust
from packsdp.src.config import load_config
from packsdp.src.instance import ExplicitFamily, PackCoverInstance, Variant, dump_instance
from packsdp.src.io import write_csv, write_text
from packsdp.src.linalg import lambda_max
from packsdp.src.normalization import Witness, check_support

DEFAULT_SIM_CONFIG = "packsdp/sim/config/sim_config.yml"

GENERATORS: dict[str, Callable[[dict, np.random.Generator], list[tuple[str, PackCoverInstance]]]] = {
    "diagonal": generate_diagonal,
    "dense": generate_dense,
    "singular_type1": generate_singular_type1,
    "type2_dropped": generate_type2_dropped,
    "robust": generate_robust,
}


def generate_instances(config: dict[str, Any]) -> list[tuple[str, PackCoverInstance]]:
    rng = np.random.default_rng(config.get("random_seed", 42))
    families = config.get("families", {}) or {}
    unknown = set(families) - set(GENERATORS)
    if unknown:
        raise ValueError(f"Unknown instance families: {sorted(unknown)}")
    out: list[tuple[str, PackCoverInstance]] = []
    for name, gen in GENERATORS.items():
        if name in families:
            out.extend(gen(families[name] or {}, rng))
    return out


def describe(name: str, inst: PackCoverInstance) -> dict[str, Any]:
    """One row of the quality report."""
    c_rank = int(np.linalg.matrix_rank(inst.C, tol=1e-10 * max(lambda_max(inst.C), 1e-300)))
    row: dict[str, Any] = {
        "name": name,
        "variant": inst.variant.value,
        "n": inst.n,
        "m": inst.m,
        "robust": inst.is_robust,
        "c_rank": c_rank,
        "cond_ratio": np.nan,
        "unsupported": 0,
    }
    if isinstance(inst.constraints, ExplicitFamily):
        tops = [lambda_max(A / bi) for A, bi in zip(inst.constraints.matrices, inst.b)]
        row["cond_ratio"] = max(tops) / min(tops)
        if inst.variant is Variant.TYPE2:
            row["unsupported"] = sum(isinstance(check_support(inst.C, A), Witness) for A in inst.constraints.matrices)
    return row


def _quality_report(summary: pd.DataFrame) -> None:
    print("\n--- Instance quality report ---")
    print("Instances per family/variant:")
    fam = summary["name"].str.rsplit("_", n=1).str[0]
    for key, count in fam.value_counts().sort_index().items():
        print(f"  {key}: {count}")
    print(f"Dimensions: n in [{summary['n'].min()}, {summary['n'].max()}], m in [{summary['m'].min()}, {summary['m'].max()}]")
    ratios = summary["cond_ratio"].dropna()
    if not ratios.empty:
        print(f"lambda_max ratio across constraints: median {ratios.median():.2f}, max {ratios.max():.2f}")
    singular = summary[summary["c_rank"] < summary["n"]]
    print(f"Singular C: {len(singular)} instance(s)")
    print(f"Unsupported type2 constraints: {int(summary['unsupported'].sum())} in total")
    print("---\n")


def run(config_path: str | Path) -> pd.DataFrame:
    config = load_config(config_path)
    out = config.get("output", {}) or {}
    base_path = Path(out.get("base_path", "./runs/instances")).resolve()
    fmt = out.get("format", "json")
    if fmt != "json":
        raise ValueError(f"Unsupported output format: {fmt}")

    instances = generate_instances(config)
    for name, inst in instances:
        write_text(dump_instance(inst), base_path / f"{name}.json")
    summary = pd.DataFrame([describe(name, inst) for name, inst in instances])
    write_csv(summary, base_path / "index.csv")

    print(f"Wrote {len(instances)} instances to {base_path}/ (index.csv lists them)")
    _quality_report(summary)
    return summary


def main() -> None:
    parser = argparse.ArgumentParser(description="Generate seeded packing/covering SDP instances (JSON).")
    parser.add_argument(
        "--config",
        default=DEFAULT_SIM_CONFIG,
        help="Path to sim_config.yml",
    )
    args = parser.parse_args()
    run(args.config)


if __name__ == "__main__":
    main()
