"""Convolutional networks that evaluate truncated Fourier series exactly.

Every builder in this module writes its weights down in closed form; nothing
is trained. The basic unit is a doubling block phi_z that interleaves a
complex vector with its multiple by a fixed z. Chaining doubling blocks with
z, z^2, z^4, ... produces all powers z^0 .. z^{2^k - 1} in a shuffled order;
a gather puts them back in exponent order. Running 2m+1 such chains side by
side (grouped channels, one chain per Fourier mode) and summing with a
1-kernel convolution evaluates sums of modes at every node of a dyadic grid.

Complex vectors pass through these networks in the 4-row embedding of
`fouriernet.cplx`. All graphs built here are linear: identity activations,
no biases.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from fouriernet.cplx import complex_block, embed
from fouriernet.layers import (
    Append,
    Conv,
    ConvSpec,
    Flatten,
    Gather,
    NetworkGraph,
    Reshape,
    Transpose,
    Truncate,
)

__all__ = [
    "DyadicGrid",
    "SpectralNet",
    "build_phi_z",
    "derive_permutation",
    "build_F_omega",
    "build_S_m",
    "build_Psi",
    "build_coefficient_adapter",
    "mode_frequencies",
    "pack_coefficients",
    "unpack_coefficients",
    "max_conv_channels",
    "max_kernel_size",
]


@dataclass(frozen=True)
class DyadicGrid:
    """Uniform grid on [0, 1] with step 2^-k, endpoints included."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("grid level must be >= 1")

    @property
    def h(self) -> float:
        return 2.0 ** -self.k

    @property
    def n_nodes(self) -> int:
        return 2 ** self.k + 1

    @property
    def nodes(self) -> np.ndarray:
        # j * 2^-k is exact in binary floating point, so build it that way
        return np.arange(self.n_nodes) * self.h


@dataclass(frozen=True)
class SpectralNet:
    """A built synthesis network plus the knobs it was built from."""

    graph: NetworkGraph
    kind: str
    level: int
    modes: int | None = None


# ---------------------------------------------------------------------------
# the doubling block

def _phi_stage(n: int, z: complex) -> list:
    """Node descriptors of the block mapping [w_1..w_n] to [w_1, z w_1, ...].

    Returned as (tag, ...) tuples rather than graph nodes so that parallel
    copies with different z can later be fused into grouped layers.

    The block widens positions with a stride-2 transposed convolution whose
    diagonal two-tap kernels hold [1, 0], [0, 1] on the first two channels
    and the 2x2 multiplication block of z on the last two; a 1-kernel
    convolution then sums the halves into [Re, Im] rows, and the remaining
    layers re-interleave [w_1..w_n, z w_1..z w_n] into the target order.
    """
    blk = complex_block(z)
    w1 = np.zeros((4, 4, 2))
    w1[0, 0] = [1.0, 0.0]
    w1[1, 1] = [0.0, 1.0]
    w1[2, 2] = blk[0]
    w1[3, 3] = blk[1]
    w2 = np.zeros((2, 4, 1))
    w2[0, 0, 0] = w2[0, 1, 0] = w2[1, 2, 0] = w2[1, 3, 0] = 1.0
    w3 = np.array([[[1.0, 0.0]], [[0.0, 1.0]], [[1.0, 0.0]], [[0.0, 1.0]]])
    w4 = np.zeros((8, 4, 2))
    for j in range(4):
        w4[j, j, 0] = 1.0
        w4[j + 4, j, 1] = 1.0
    return [
        ("conv", ConvSpec(4, 4, 2, stride=2, transposed=True), w1),
        ("conv", ConvSpec(4, 2, 1), w2),
        ("flatten",),
        ("conv", ConvSpec(1, 4, 2, stride=2), w3),
        # pairing w_j with z w_j, which sits n slots away after the flatten
        ("conv", ConvSpec(4, 8, 2, dilation=n), w4),
        ("transpose",),
        ("reshape", 2 * n, 4),
        ("transpose",),
    ]


def _branch_nodes(descriptors: list) -> list:
    nodes = []
    for d in descriptors:
        tag = d[0]
        if tag == "conv":
            nodes.append(Conv(d[1], d[2]))
        elif tag == "flatten":
            nodes.append(Flatten())
        elif tag == "transpose":
            nodes.append(Transpose())
        elif tag == "reshape":
            nodes.append(Reshape(d[1], d[2]))
        elif tag == "gather_positions":
            nodes.append(Gather(d[1]))
        else:
            raise ValueError(f"unknown descriptor {tag!r}")
    return nodes


def _stacked_conv(per_branch: tuple, g: int) -> Conv:
    spec = per_branch[0][1]
    co = spec.out_channels
    stacked = ConvSpec(g * spec.in_channels, g * co, spec.kernel_size,
                       spec.stride, spec.dilation, groups=g,
                       transposed=spec.transposed)
    weight = np.zeros(stacked.weight_shape)
    for b, d in enumerate(per_branch):
        if spec.transposed:
            weight[:, b * co:(b + 1) * co, :] = d[2]
        else:
            weight[b * co:(b + 1) * co] = d[2]
    return Conv(stacked, weight)


def _stacked_nodes(branch_lists: list) -> list:
    """Fuse structurally identical branch descriptor lists into grouped nodes."""
    g = len(branch_lists)
    nodes = []
    for per_branch in zip(*branch_lists):
        tag = per_branch[0][0]
        if tag == "conv":
            nodes.append(_stacked_conv(per_branch, g))
        elif tag == "flatten":
            nodes.append(Flatten(groups=g))
        elif tag == "transpose":
            nodes.append(Transpose(groups=g))
        elif tag == "reshape":
            nodes.append(Reshape(per_branch[0][1], per_branch[0][2], groups=g))
        elif tag == "gather_positions":
            # the shuffle is the same in every branch and the position axis
            # is shared, so one global gather covers the whole stack
            nodes.append(Gather(per_branch[0][1]))
        else:
            raise ValueError(f"unknown descriptor {tag!r}")
    return nodes


def build_phi_z(k: int, z: complex) -> SpectralNet:
    """Doubling block on C^{2^{k-1}}: [w_1..w_n] -> [w_1, z w_1, w_2, z w_2, ...]."""
    if k < 1:
        raise ValueError("k must be >= 1")
    n = 2 ** (k - 1)
    graph = NetworkGraph(_branch_nodes(_phi_stage(n, z)), (4, n))
    return SpectralNet(graph, "phi_z", k)


@lru_cache(maxsize=None)
def _permutation_tags(k: int) -> tuple:
    tags = np.zeros(2 ** k, dtype=int)
    one = embed([1.0 + 0.0j])
    for r in range(k):
        nodes = []
        for j in range(k):
            nodes += _branch_nodes(_phi_stage(2 ** j, 2.0 + 0.0j if j == r else 1.0 + 0.0j))
        net = NetworkGraph(nodes, (4, 1))
        bits = np.log2(net.forward(one)[0]).round().astype(int)
        tags += bits << r
    return tuple(int(v) for v in tags)


def derive_permutation(k: int) -> np.ndarray:
    """Exponent tag carried by each output slot of the doubling cascade.

    The cascade with stage factors z, z^2, ..., z^{2^{k-1}} emits the powers
    z^0 .. z^{2^k-1} in a shuffled order; entry i of the result is the
    exponent sitting at slot i. The tags are traced through the actual
    composed network, one stage bit at a time: run the cascade with stage r
    set to multiply by 2 and every other stage by 1, and slot i comes out as
    2^(bit r of its tag). All intermediate values are powers of two (the only
    additions combine a value with an exact zero), so the trace is exact.
    Tags are cached per level; every mode of a synthesis stack shares them.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    return np.array(_permutation_tags(k), dtype=int)


def _cascade_descriptors(k: int, omega: float) -> list:
    h = 2.0 ** -k
    desc = []
    for j in range(k):
        desc += _phi_stage(2 ** j, np.exp(1j * omega * h * 2 ** j))
    desc.append(("gather_positions", np.argsort(derive_permutation(k))))
    return desc


def build_F_omega(k: int, omega: float) -> SpectralNet:
    """Single-frequency bank: w -> [w e^{i omega x_j}] on the 2^k grid nodes in [0, 1).

    Output entry j (0-based) is w e^{i omega j 2^-k}; the node x = 1 is not
    produced (its value is determined by periodicity when omega is a multiple
    of 2 pi, and the series assembly appends it separately).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    graph = NetworkGraph(_branch_nodes(_cascade_descriptors(k, omega)), (4, 1))
    return SpectralNet(graph, "F_omega", k)


# ---------------------------------------------------------------------------
# mode stacking

def mode_frequencies(m: int) -> np.ndarray:
    """Integer mode numbers in the fixed input order -m, ..., -1, 0, 1, ..., m."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return np.arange(-m, m + 1)


def build_S_m(k: int, m: int) -> SpectralNet:
    """Truncated-series evaluator: Z -> [sum_kappa z_kappa e^{2 pi i kappa x_j}]_j.

    Input is the embedded coefficient vector (modes ordered per
    mode_frequencies); output is the embedded series value at all 2^k + 1
    grid nodes, the last of which duplicates the first by periodicity.

    One frequency-bank cascade runs per mode. The cascades are fused into
    grouped layers (2m+1 groups), so weight count grows linearly in m and
    in k rather than quadratically.
    """
    if k < 1 or m < 1:
        raise ValueError("k and m must be >= 1")
    g = 2 * m + 1
    tags_gather = np.argsort(derive_permutation(k))
    h = 2.0 ** -k

    branches = []
    for kappa in mode_frequencies(m):
        omega = 2.0 * np.pi * kappa
        desc = []
        for j in range(k):
            desc += _phi_stage(2 ** j, np.exp(1j * omega * h * 2 ** j))
        branches.append(desc)

    # split the embedded (4, 2m+1) input into per-mode 4-channel blocks
    nodes = [Transpose(), Reshape(4 * g, 1)]
    nodes += _stacked_nodes(branches)
    nodes.append(Gather(tags_gather))
    # mode-major -> component-major channels, so the summation layer can run
    # with one group per embedding component
    comp_major = np.array([4 * b + c for c in range(4) for b in range(g)])
    nodes.append(Gather(comp_major, axis="channel"))
    nodes.append(Conv(ConvSpec(4 * g, 4, 1, groups=4), np.ones((4, g, 1))))
    nodes.append(Append([0]))
    graph = NetworkGraph(nodes, (4, g))
    return SpectralNet(graph, "S_m", k, m)


def build_Psi(k: int, m: int) -> SpectralNet:
    """Real sampler Z -> [Re sum_kappa z_kappa e^{2 pi i kappa (x_j + 1)/2}]_j.

    Runs the series evaluator on the grid twice as fine, keeps the nodes
    lying in [1/2, 1] (they are the images of the x_j under x -> (x+1)/2) and
    drops everything but the real row of the embedding.
    """
    if k < 1 or m < 1:
        raise ValueError("k and m must be >= 1")
    n_nodes = 2 ** k + 1
    fine = build_S_m(k + 1, m)
    nodes = list(fine.graph.nodes)
    nodes.append(Truncate(n_nodes - 1, 2 * n_nodes - 1))
    nodes.append(Truncate(0, 1, axis="channel"))
    graph = NetworkGraph(nodes, fine.graph.input_shape)
    return SpectralNet(graph, "Psi", k, m)


def pack_coefficients(z: np.ndarray) -> np.ndarray:
    """Complex coefficient vector -> flat [Re z_1, Im z_1, Re z_2, ...]."""
    z = np.asarray(z, dtype=complex)
    return np.stack([z.real, z.imag], axis=-1).reshape(*z.shape[:-1], -1)


def unpack_coefficients(v: np.ndarray) -> np.ndarray:
    """Inverse of pack_coefficients."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] % 2:
        raise ValueError("packed coefficient vectors have even length")
    pairs = v.reshape(*v.shape[:-1], -1, 2)
    return pairs[..., 0] + 1j * pairs[..., 1]


def build_coefficient_adapter(m: int) -> NetworkGraph:
    """Graph mapping a packed (1, 4m+2) coefficient row to the 4-row embedding.

    This is the glue between a trained head that emits interleaved real and
    imaginary parts and the synthesis networks, which expect the duplicated
    embedding. Linear, so the composite can be frozen into a matrix.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    g = 2 * m + 1
    dup = np.array([[[1.0], [0.0]],
                    [[0.0], [1.0]],
                    [[1.0], [0.0]],
                    [[0.0], [1.0]]])
    nodes = [Reshape(g, 2), Transpose(), Conv(ConvSpec(2, 4, 1), dup)]
    return NetworkGraph(nodes, (1, 4 * m + 2))


# ---------------------------------------------------------------------------
# architecture audits

def max_conv_channels(graph: NetworkGraph) -> int:
    """Widest channel count any convolution touches (reshapes don't count)."""
    widths = [max(node.spec.in_channels, node.spec.out_channels)
              for node in graph.nodes if isinstance(node, Conv)]
    return max(widths, default=0)


def max_kernel_size(graph: NetworkGraph) -> int:
    return max((node.spec.kernel_size for node in graph.nodes
                if isinstance(node, Conv)), default=0)
