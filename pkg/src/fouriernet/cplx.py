"""Embedding of complex vectors into 4-channel real tensors.

A complex scalar z is stored as the column [Re z, Im z, Re z, Im z]; a complex
vector of length n becomes a (4, n) tensor. The duplication gives the diagonal
kernels of the synthesis layers simultaneous access to both components, which
is what lets a pair of 2-tap kernels implement multiplication by a constant.
"""

from __future__ import annotations

import numpy as np

__all__ = ["embed", "extract", "complex_block"]


def embed(z) -> np.ndarray:
    """Complex vector -> (4, n) real tensor, rows [Re, Im, Re, Im]."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if z.ndim != 1:
        raise ValueError(f"expected a complex vector, got shape {z.shape}")
    return np.stack([z.real, z.imag, z.real, z.imag])


def extract(x: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """(4, n) real tensor -> complex vector; checks the duplication rows agree."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != 4:
        raise ValueError(f"expected a (4, n) tensor, got shape {x.shape}")
    scale = max(1.0, np.abs(x).max())
    drift = max(np.abs(x[0] - x[2]).max(initial=0.0),
                np.abs(x[1] - x[3]).max(initial=0.0))
    if drift > tol * scale:
        raise ValueError(f"duplicated rows disagree by {drift:.3e} "
                         f"(tolerance {tol:.1e} * {scale:.3e})")
    return x[0] + 1j * x[1]


def complex_block(z: complex) -> np.ndarray:
    """2x2 real matrix encoding multiplication by z.

    Orientation convention: acting on the right of a row vector,
    [Re w, Im w] @ complex_block(z) == [Re(z w), Im(z w)].
    This is the block that appears in the lower two kernel rows of the
    doubling layer; the end-to-end interleaving tests pin the orientation.
    """
    z = complex(z)
    return np.array([[z.real, z.imag],
                     [-z.imag, z.real]])
