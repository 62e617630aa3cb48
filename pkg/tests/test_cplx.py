"""Embedding round trips and the 2x2 multiplication blocks."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fouriernet.cplx import complex_block, embed, extract

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


def test_embed_examples():
    assert np.array_equal(embed([1.0]), [[1.0], [0.0], [1.0], [0.0]])
    assert np.array_equal(embed([1j]), [[0.0], [1.0], [0.0], [1.0]])


def test_extract_examples():
    assert extract(np.array([[1.0], [0.0], [1.0], [0.0]]))[0] == 1.0
    assert extract(np.array([[0.0], [1.0], [0.0], [1.0]]))[0] == 1j


def test_extract_rejects_broken_duplication():
    bad = np.array([[1.0], [0.0], [1.0 + 1e-6], [0.0]])
    with pytest.raises(ValueError):
        extract(bad)
    with pytest.raises(ValueError):
        extract(np.zeros((3, 2)))


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=8))
@settings(max_examples=200, deadline=None)
def test_round_trip_is_exact(pairs):
    z = np.array([re + 1j * im for re, im in pairs])
    assert np.array_equal(extract(embed(z)), z)


def test_block_examples():
    assert np.array_equal(complex_block(1.0), np.eye(2))
    assert np.array_equal(complex_block(1j), [[0.0, 1.0], [-1.0, 0.0]])


def test_block_row_action_is_multiplication():
    rng = np.random.default_rng(21)
    for _ in range(100):
        z, w = rng.standard_normal(4).view(complex)
        out = np.array([w.real, w.imag]) @ complex_block(z)
        assert np.allclose(out, [(z * w).real, (z * w).imag],
                           rtol=0.0, atol=1e-12)


def test_block_homomorphism():
    rng = np.random.default_rng(22)
    for _ in range(100):
        z1, z2 = rng.standard_normal(4).view(complex)
        assert np.allclose(complex_block(z1) @ complex_block(z2),
                           complex_block(z1 * z2), rtol=0.0, atol=1e-12)
