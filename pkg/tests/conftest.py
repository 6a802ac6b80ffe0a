from pathlib import Path

import numpy as np
import pytest

from symblender import Box, FiberMap, SkewProduct

D_PAIR = Box([-0.5], [1.5])
B_UNIT = Box([0.0], [1.0])
DEMOS_DIR = Path(__file__).resolve().parent.parent / "demos"


def covering_pair(D=D_PAIR) -> SkewProduct:
    return SkewProduct.one_step([FiberMap.affine(0.6, -0.05), FiberMap.affine(0.6, 0.45)], D)


def halves_pair(D=Box([0.0], [1.0])) -> SkewProduct:
    return SkewProduct.one_step([FiberMap.affine(0.5, 0.0), FiberMap.affine(0.5, 0.5)], D, check=False)


def cantor_pair(D=D_PAIR) -> SkewProduct:
    return SkewProduct.one_step([FiberMap.affine(1 / 3, 0.0), FiberMap.affine(1 / 3, 2 / 3)], D)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def pair():
    return covering_pair()
