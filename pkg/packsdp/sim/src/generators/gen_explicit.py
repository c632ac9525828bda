"""Explicit families: diagonal instances (reference-checkable) and dense random PSD instances."""

from __future__ import annotations

import numpy as np

from packsdp.src.instance import ExplicitFamily, PackCoverInstance, Variant

RIDGE = 1e-2


def random_psd(n: int, rank: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """G G^T / rank with G standard normal, n x rank."""
    G = rng.normal(size=(n, rank))
    A = scale * (G @ G.T) / rank
    return 0.5 * (A + A.T)


def _draw(value, rng: np.random.Generator) -> int:
    """An int, or a [lo, hi] range sampled inclusively."""
    if isinstance(value, (list, tuple)):
        return int(rng.integers(int(value[0]), int(value[1]) + 1))
    return int(value)


def generate_diagonal(config: dict, rng: np.random.Generator) -> list[tuple[str, PackCoverInstance]]:
    lo, hi = (float(x) for x in config.get("entry_range", [0.5, 3.0]))
    variants = [Variant(v) for v in config.get("variants", ["type1", "type2"])]
    out = []
    for j in range(int(config.get("count", 4))):
        n = _draw(config.get("n", [2, 6]), rng)
        m = _draw(config.get("m", 2), rng)
        mats = tuple(np.diag(rng.uniform(lo, hi, size=n)) for _ in range(m))
        for v in variants:
            inst = PackCoverInstance(variant=v, C=np.eye(n), b=np.ones(m), constraints=ExplicitFamily(mats))
            out.append((f"diagonal_{v.value}_{j:02d}", inst))
    return out


def dense_matrices(n: int, m: int, rng: np.random.Generator) -> tuple[np.ndarray, ...]:
    """First matrix full rank (so a PD support exists); the rest of random rank."""
    mats = [random_psd(n, n, rng) + RIDGE * np.eye(n)]
    for _ in range(m - 1):
        mats.append(random_psd(n, _draw([1, n], rng), rng))
    order = rng.permutation(m)
    return tuple(mats[i] for i in order)


def generate_dense(config: dict, rng: np.random.Generator) -> list[tuple[str, PackCoverInstance]]:
    blo, bhi = (float(x) for x in config.get("b_range", [0.5, 2.0]))
    variants = [Variant(v) for v in config.get("variants", ["type1", "type2"])]
    out = []
    for j in range(int(config.get("count", 4))):
        n = _draw(config.get("n", [3, 8]), rng)
        m = _draw(config.get("m", [4, 12]), rng)
        for v in variants:
            C = random_psd(n, n, rng) + RIDGE * np.eye(n)
            mats = dense_matrices(n, m, rng)
            b = rng.uniform(blo, bhi, size=m)
            out.append((f"dense_{v.value}_{j:02d}", PackCoverInstance(variant=v, C=C, b=b, constraints=ExplicitFamily(mats))))
    return out
