import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dcselect.data_model import (  # noqa: E402
    Covariate,
    categorical_covariate,
    functional_covariate,
    scalar_covariate,
    vector_covariate,
)


def random_covariate(rng: np.random.Generator, kind: str, n: int,
                     name: str = "c") -> Covariate:
    """A random covariate of the requested kind for property-style tests."""
    if kind == "scalar":
        return scalar_covariate(name, rng.normal(size=n))
    if kind == "vector":
        return vector_covariate(name, rng.normal(size=(n, rng.integers(2, 5))))
    if kind == "functional":
        grid = np.linspace(0.0, 1.0, int(rng.integers(8, 30)))
        base = rng.normal(size=(n, 1))
        curves = base * np.sin(2 * np.pi * grid)[None, :] + \
            0.3 * rng.normal(size=(n, grid.size))
        return functional_covariate(name, grid, curves)
    labels = rng.integers(0, rng.integers(2, 5), size=n)
    return categorical_covariate(name, [str(v) for v in labels],
                                 levels=[str(v) for v in range(labels.max() + 1)]
                                 if labels.max() >= 1 else ["0", "1"])


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240811)
