import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def square_mask():
    """64x64 mask with two disjoint 5x5 squares labeled 1 and 2."""
    mask = np.zeros((64, 64), dtype=np.int32)
    mask[5:10, 5:10] = 1
    mask[30:35, 40:45] = 2
    return mask


@pytest.fixture(scope="session")
def demo_masks():
    from cellsynth import demo

    rng = np.random.default_rng(3)
    return [demo.make_demo_pair(256, 256, rng, cell_spacing=34, n_clusters=7)[1] for _ in range(2)]


@pytest.fixture(scope="session")
def demo_pairs():
    from cellsynth import demo

    rng = np.random.default_rng(11)
    return [demo.make_demo_pair(192, 192, rng, cell_spacing=34, n_clusters=5) for _ in range(2)]
