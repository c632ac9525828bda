"""Robust type1 families with ellipsoid or box uncertainty over PSD rank-one perturbations."""

from __future__ import annotations

import numpy as np

from packsdp.sim.src.generators.gen_explicit import RIDGE, _draw, random_psd
from packsdp.src.instance import BoxSet, EllipsoidSet, PackCoverInstance, RobustFamily, UncertainConstraint, Variant

PERTURBATION_SCALE = 0.2


def uncertain_constraint(n: int, k: int, kind: str, rng: np.random.Generator) -> UncertainConstraint:
    A0 = random_psd(n, n, rng) + RIDGE * np.eye(n)
    perts = []
    for _ in range(k):
        v = rng.normal(size=n)
        perts.append(PERTURBATION_SCALE * np.outer(v, v) / n)
    if kind == "ellipsoid":
        d = rng.uniform(0.1, 0.5, size=k)
        # delta0 >= sqrt(diag D) keeps the ellipsoid inside the nonnegative orthant
        uset = EllipsoidSet(delta0=d + rng.uniform(0.0, 0.2, size=k), D=np.diag(d**2))
    elif kind == "box":
        uset = BoxSet(delta0=rng.uniform(0.0, 0.3, size=k), rho=float(rng.uniform(0.1, 0.5)))
    else:
        raise ValueError(f"Unsupported uncertainty kind: {kind}")
    return UncertainConstraint(A0=A0, perturbations=tuple(perts), uncertainty=uset)


def robust_type1(n: int, m: int, k: int, kind: str, rng: np.random.Generator) -> PackCoverInstance:
    family = RobustFamily(tuple(uncertain_constraint(n, k, kind, rng) for _ in range(m)))
    C = random_psd(n, n, rng) + RIDGE * np.eye(n)
    return PackCoverInstance(variant=Variant.TYPE1, C=C, b=rng.uniform(0.5, 2.0, size=m), constraints=family)


def generate_robust(config: dict, rng: np.random.Generator) -> list[tuple[str, PackCoverInstance]]:
    k = int(config.get("k", 2))
    out = []
    for kind in config.get("kinds", ["ellipsoid", "box"]):
        for j in range(int(config.get("count", 2))):
            n = _draw(config.get("n", [3, 5]), rng)
            m = _draw(config.get("m", [2, 5]), rng)
            out.append((f"robust_{kind}_{j:02d}", robust_type1(n, m, k, kind, rng)))
    return out
