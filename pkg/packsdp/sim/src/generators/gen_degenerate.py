"""Instances that exercise the reductions: singular C for type1, unsupported constraints for type2."""

from __future__ import annotations

import numpy as np

from packsdp.sim.src.generators.gen_explicit import RIDGE, _draw, random_psd
from packsdp.src.instance import ExplicitFamily, PackCoverInstance, Variant


def singular_type1(n: int, m: int, deficit: int, rng: np.random.Generator) -> PackCoverInstance:
    rank = max(n - deficit, 1)
    C = random_psd(n, rank, rng)
    mats = tuple(random_psd(n, n, rng) + RIDGE * np.eye(n) for _ in range(m))
    return PackCoverInstance(variant=Variant.TYPE1, C=C, b=rng.uniform(0.5, 2.0, size=m), constraints=ExplicitFamily(mats))


def type2_with_dropped(n: int, m: int, deficit: int, unsupported: int, rng: np.random.Generator) -> PackCoverInstance:
    """C of rank n - deficit; `unsupported` constraints are full rank, so their range leaves range(C)."""
    rank = max(n - deficit, 1)
    unsupported = min(unsupported, m - 1)
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    Qk = Q[:, :rank]
    C = Qk @ np.diag(rng.uniform(0.5, 2.0, size=rank)) @ Qk.T
    mats = [Qk @ random_psd(rank, _draw([1, rank], rng), rng) @ Qk.T for _ in range(m - unsupported)]
    mats += [random_psd(n, n, rng) + RIDGE * np.eye(n) for _ in range(unsupported)]
    order = rng.permutation(m)
    family = ExplicitFamily(tuple(0.5 * (mats[i] + mats[i].T) for i in order))
    return PackCoverInstance(variant=Variant.TYPE2, C=0.5 * (C + C.T), b=rng.uniform(0.5, 2.0, size=m), constraints=family)


def generate_singular_type1(config: dict, rng: np.random.Generator) -> list[tuple[str, PackCoverInstance]]:
    deficit = int(config.get("rank_deficit", 1))
    out = []
    for j in range(int(config.get("count", 2))):
        n = _draw(config.get("n", [3, 6]), rng)
        m = _draw(config.get("m", [3, 8]), rng)
        out.append((f"singular_type1_{j:02d}", singular_type1(n, m, deficit, rng)))
    return out


def generate_type2_dropped(config: dict, rng: np.random.Generator) -> list[tuple[str, PackCoverInstance]]:
    deficit = int(config.get("rank_deficit", 1))
    unsupported = int(config.get("unsupported", 2))
    out = []
    for j in range(int(config.get("count", 2))):
        n = _draw(config.get("n", [3, 6]), rng)
        m = _draw(config.get("m", [4, 8]), rng)
        out.append((f"type2_dropped_{j:02d}", type2_with_dropped(n, m, deficit, unsupported, rng)))
    return out
