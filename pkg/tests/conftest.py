from __future__ import annotations

import numpy as np
import pytest

from corrpin import (
    exponential_model,
    finite_law,
    finite_model,
    geometric_law,
    power_model,
    zero_model,
    zeta_law,
)


@pytest.fixture(scope="session")
def laws():
    return {
        "zeta05": zeta_law(0.5),
        "zeta03": zeta_law(0.3),
        "geom": geometric_law(0.5),
        "unit": finite_law({1: 1.0}),
        "two_point": finite_law({1: 0.5, 3: 0.5}),
    }


@pytest.fixture(scope="session")
def models():
    return {
        "zero": zero_model(),
        "fin1": finite_model({1: 0.5}),
        "fin2": finite_model({1: 0.5, 2: 0.25}),
        "mixed": finite_model({1: 0.3, 2: -0.2, 3: 0.1}),
        "exp": exponential_model(0.5, 0.5),
        "pow": power_model(0.4, 3.0),
    }


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)


def random_finite_model(rng, q_max=6, allow_negative=True):
    q = int(rng.integers(1, q_max + 1))
    vals = rng.uniform(-0.4 if allow_negative else 0.0, 0.5, size=q)
    return finite_model({d + 1: float(vals[d]) for d in range(q)})


def random_law(rng):
    choice = rng.integers(0, 3)
    if choice == 0:
        return zeta_law(float(rng.uniform(0.3, 1.5)))
    if choice == 1:
        return geometric_law(float(rng.uniform(0.2, 0.8)))
    gaps = sorted(set(int(g) for g in rng.integers(1, 7, size=3)))
    masses = rng.uniform(0.1, 1.0, size=len(gaps))
    masses /= masses.sum()
    return finite_law({g: float(m) for g, m in zip(gaps, masses)})
