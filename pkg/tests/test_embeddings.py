import math
from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prospective.embeddings import EmbeddingSpec, augment, embed, embed_many


@pytest.mark.parametrize(
    "spec,t,expected",
    [
        (EmbeddingSpec("fourier", 4), 0, [0, 0, 1, 1]),
        (EmbeddingSpec("fourier", 2), 1, [0, -1]),
        (EmbeddingSpec("monomial", 3, c=1.0), 2, [2, 4, 8]),
    ],
)
def test_known_values(spec, t, expected):
    np.testing.assert_allclose(embed(spec, t), expected, atol=1e-15)


def test_default_contains_switching_frequency():
    # frequency pi/10 has period 20, the periodic process's task cycle
    e = embed_many(EmbeddingSpec(), [3, 23, 43])
    np.testing.assert_allclose(e[0, [9, 19]], e[1, [9, 19]], atol=1e-12)
    np.testing.assert_allclose(e[0, [9, 19]], e[2, [9, 19]], atol=1e-12)
    assert EmbeddingSpec().d // 2 >= 10


@given(d=st.sampled_from([2, 4, 6, 8, 10]), t=st.integers(0, 10**7))
@settings(max_examples=80, deadline=None)
def test_fourier_bounded_and_periodic(d, t):
    spec = EmbeddingSpec("fourier", d)
    period = 2 * reduce(math.lcm, range(1, d // 2 + 1))
    a, b = embed(spec, t), embed(spec, t + period)
    assert np.all(np.abs(a) <= 1.0)
    assert len(a) == d
    np.testing.assert_allclose(a, b, atol=1e-9)


@given(d=st.integers(1, 6), c=st.floats(1.0, 1e4), t=st.integers(1, 10**5))
@settings(max_examples=60, deadline=None)
def test_monomial_increasing(d, c, t):
    spec = EmbeddingSpec("monomial", d, c)
    a, b = embed(spec, t), embed(spec, t + 1)
    assert len(a) == d
    assert np.all(b > a)


def test_monomial_needs_resolution():
    spec = EmbeddingSpec("monomial", 3)
    with pytest.raises(ValueError):
        embed(spec, 4)
    np.testing.assert_allclose(embed(spec.resolved(4), 4), [1, 1, 1])


@pytest.mark.parametrize("kwargs", [{"kind": "wavelet"}, {"kind": "fourier", "d": 3}, {"kind": "monomial", "d": 0}])
def test_invalid(kwargs):
    with pytest.raises(ValueError):
        EmbeddingSpec(**kwargs)


def test_augment_prepends_embedding():
    spec = EmbeddingSpec("fourier", 2)
    Z = augment(spec, [1, 2], np.array([5.0, 6.0]))
    np.testing.assert_allclose(Z, [[0, -1, 5], [0, 1, 6]], atol=1e-12)
    assert augment(EmbeddingSpec("none", 0), [1], np.array([[3.0]])).shape == (1, 1)
