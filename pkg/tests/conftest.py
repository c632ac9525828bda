"""Shared fixtures: seeded generators and small hand-checkable instances."""

from __future__ import annotations

import numpy as np
import pytest

from packsdp.sim.src.generators.gen_explicit import random_psd
from packsdp.src.instance import ExplicitFamily, PackCoverInstance, Variant


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def diag_pair() -> list[np.ndarray]:
    """A1 = diag(2,1), A2 = diag(1,2): both variants have optimum 2/3."""
    return [np.diag([2.0, 1.0]), np.diag([1.0, 2.0])]


def explicit_instance(variant: Variant, C, mats, b=None) -> PackCoverInstance:
    mats = tuple(np.asarray(A, dtype=np.float64) for A in mats)
    b = np.ones(len(mats)) if b is None else np.asarray(b, dtype=np.float64)
    return PackCoverInstance(variant=variant, C=np.asarray(C, dtype=np.float64), b=b, constraints=ExplicitFamily(mats))


@pytest.fixture
def psd():
    """random_psd(n, rank, rng) bound for tests."""
    return random_psd


@pytest.fixture
def make_instance():
    return explicit_instance
