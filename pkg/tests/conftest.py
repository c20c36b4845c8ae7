import random
from fractions import Fraction

import pytest
from hypothesis import settings, strategies as st

from latticecorr.modgroup import BasePoint, GroupElement, OMEGA_I, OMEGA_RHO, normalize

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

BASE_POINTS = [
    OMEGA_I,
    OMEGA_RHO,
    BasePoint(Fraction(1, 3), Fraction(3, 2)),
    BasePoint(Fraction(0), Fraction(2)),
    BasePoint(Fraction(-1, 4), Fraction(7, 5)),
]

S = (0, -1, 1, 0)


def _mul(m, n):
    a, b, c, d = m
    e, f, g, h = n
    return (a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)


def word_to_element(word) -> GroupElement:
    """Product T^n1 S T^n2 S ..., normalized."""
    m = (1, 0, 0, 1)
    for n in word:
        m = _mul(m, (1, n, 0, 1))
        m = _mul(m, S)
    return normalize(*m)


def random_element(rng: random.Random, length: int = 4, span: int = 3) -> GroupElement:
    return word_to_element([rng.randint(-span, span) for _ in range(rng.randint(0, length))])


elements = st.lists(st.integers(-3, 3), max_size=5).map(word_to_element)
base_points = st.sampled_from(BASE_POINTS)


@pytest.fixture
def rng():
    return random.Random(12345)
