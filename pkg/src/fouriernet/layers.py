"""1D convolution semantics and layer pipelines.

A tensor is a numpy float64 array of shape (channels, length). Every forward
pass also accepts a leading batch axis, (batch, channels, length); batching is
what keeps the exactness sweeps affordable. All indices below are 0-based; the
docstrings state the 1-based textbook formulas where they matter.

Convolution (cross-correlation) with stride t and dilation d:

    out[j] = sum_i w[i] * x[j*t + i*d],      j = 0 .. floor((n - d(s-1) - 1)/t)

Transposed convolution is its adjoint: input entry x[j] is scattered to output
positions j*t + i*d with weight w[i], output length (n-1)t + d(s-1) + 1.

Grouped layers split the channels into g contiguous blocks; output channel c
belongs to block g*c // out_channels and only sees the matching input block.
Weight shapes: (out_channels, in_channels/g, s) for convolution and
(in_channels/g, out_channels, s) for the transposed case.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ConvSpec",
    "Conv",
    "Dense",
    "Reshape",
    "Flatten",
    "Transpose",
    "Truncate",
    "Append",
    "Gather",
    "NetworkGraph",
    "conv_output_length",
    "conv_forward",
    "conv_transpose_forward",
    "dense_forward",
    "network_forward",
    "count_active_weights",
    "materialize_linear_map",
]

_ACTIVATIONS = ("identity", "relu", "leaky_relu")


def _apply_activation(y: np.ndarray, activation: str, slope: float) -> np.ndarray:
    if activation == "identity":
        return y
    if activation == "relu":
        return np.maximum(y, 0.0)
    if activation == "leaky_relu":
        return np.where(y >= 0.0, y, slope * y)
    raise ValueError(f"unknown activation {activation!r}")


@dataclass(frozen=True)
class ConvSpec:
    """Hyperparameters of a 1D (transposed) convolutional layer."""

    in_channels: int
    out_channels: int
    kernel_size: int
    stride: int = 1
    dilation: int = 1
    groups: int = 1
    transposed: bool = False
    activation: str = "identity"
    slope: float = 0.01

    def __post_init__(self):
        if min(self.in_channels, self.out_channels, self.kernel_size,
               self.stride, self.dilation, self.groups) < 1:
            raise ValueError("channel counts, kernel size, stride, dilation and "
                             "groups must all be positive")
        if self.in_channels % self.groups or self.out_channels % self.groups:
            raise ValueError(
                f"groups={self.groups} must divide in_channels={self.in_channels} "
                f"and out_channels={self.out_channels}")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def weight_shape(self) -> tuple:
        if self.transposed:
            return (self.in_channels // self.groups, self.out_channels, self.kernel_size)
        return (self.out_channels, self.in_channels // self.groups, self.kernel_size)


def conv_output_length(n: int, spec: ConvSpec) -> int:
    """Output length of a (transposed) convolution on an input of length n."""
    s, t, d = spec.kernel_size, spec.stride, spec.dilation
    if spec.transposed:
        if n < 1:
            raise ValueError("transposed convolution needs a non-empty input")
        return (n - 1) * t + d * (s - 1) + 1
    out = (n - d * (s - 1) - 1) // t + 1
    if n < d * (s - 1) + 1 or out < 1:
        raise ValueError(
            f"input length {n} too short for kernel {s}, stride {t}, dilation {d}")
    return out


def _as_batch(x: np.ndarray):
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        return x[None], True
    if x.ndim == 3:
        return x, False
    raise ValueError(f"expected (channels, length) or (batch, channels, length), "
                     f"got shape {x.shape}")


def _check_channels(x: np.ndarray, spec: ConvSpec):
    if x.shape[1] != spec.in_channels:
        raise ValueError(f"input has {x.shape[1]} channels, layer expects "
                         f"{spec.in_channels}")


def conv_forward(x: np.ndarray, spec: ConvSpec, weight: np.ndarray,
                 bias: np.ndarray | None = None) -> np.ndarray:
    """Grouped 1D cross-correlation with stride and dilation.

    1-based form: out[k', j] = rho( sum_k W[k', k, i] x[k, (j-1)t + (i-1)d + 1] + B ),
    the channel sum running over the input block that owns output channel k'.

    Accumulation runs over (channel, tap) pairs in that order, each step a
    strided elementwise multiply-add. That keeps the summation order identical
    to the scalar reference (bit-exact agreement, not merely close) and touches
    no buffer larger than the output itself. Output columns whose coefficients
    vanish for a given (channel, tap) pair are skipped outright; the built
    synthesis kernels are mostly structural zeros and this is what keeps their
    evaluation affordable.
    """
    x, squeeze = _as_batch(x)
    _check_channels(x, spec)
    if weight.shape != spec.weight_shape:
        raise ValueError(f"weight shape {weight.shape}, expected {spec.weight_shape}")
    b, m, n = x.shape
    g = spec.groups
    s, t, d = spec.kernel_size, spec.stride, spec.dilation
    og = spec.out_channels // g
    length = conv_output_length(n, spec)

    xg = x.reshape(b, g, m // g, n)
    wg = weight.reshape(g, og, m // g, s)
    out = np.zeros((b, g, og, length))
    buf = np.empty_like(out)
    for c in range(m // g):
        for i in range(s):
            cols = np.flatnonzero(np.any(wg[:, :, c, i] != 0.0, axis=0))
            if cols.size == 0:
                continue
            taps = xg[:, :, c, i * d: i * d + (length - 1) * t + 1: t]
            if cols.size == og:
                np.multiply(wg[None, :, :, c, i, None], taps[:, :, None, :],
                            out=buf)
                out += buf
            else:
                for o in cols:
                    out[:, :, o, :] += wg[None, :, o, c, i, None] * taps
    out = out.reshape(b, spec.out_channels, length)
    if bias is not None:
        out = out + np.asarray(bias, dtype=float).reshape(
            (spec.out_channels, -1) if np.ndim(bias) > 1 else (spec.out_channels, 1))
    out = _apply_activation(out, spec.activation, spec.slope)
    return out[0] if squeeze else out


def conv_transpose_forward(x: np.ndarray, spec: ConvSpec, weight: np.ndarray,
                           bias: np.ndarray | None = None) -> np.ndarray:
    """Grouped 1D transposed cross-correlation (the adjoint of conv_forward).

    Input entry x[k, j] contributes W[k, k', i] * x[k, j] to output position
    (j-1)t + (i-1)d + 1 (1-based) of every output channel k' in its block.
    Vanishing coefficient columns are skipped, as in conv_forward.
    """
    x, squeeze = _as_batch(x)
    _check_channels(x, spec)
    if weight.shape != spec.weight_shape:
        raise ValueError(f"weight shape {weight.shape}, expected {spec.weight_shape}")
    b, m, n = x.shape
    g = spec.groups
    s, t, d = spec.kernel_size, spec.stride, spec.dilation
    og = spec.out_channels // g
    length = conv_output_length(n, spec)

    xg = x.reshape(b, g, m // g, n)
    wg = weight.reshape(m // g, g, og, s)
    out = np.zeros((b, g, og, length))
    for c in range(m // g):
        for i in range(s):
            cols = np.flatnonzero(np.any(wg[c, :, :, i] != 0.0, axis=0))
            if cols.size == 0:
                continue
            span = slice(i * d, i * d + (n - 1) * t + 1, t)
            if cols.size == og:
                out[:, :, :, span] += wg[None, c, :, :, i, None] * xg[:, :, None, c, :]
            else:
                for o in cols:
                    out[:, :, o, span] += wg[None, c, :, o, i, None] * xg[:, :, c, :]
    out = out.reshape(b, spec.out_channels, length)
    if bias is not None:
        out = out + np.asarray(bias, dtype=float).reshape(
            (spec.out_channels, -1) if np.ndim(bias) > 1 else (spec.out_channels, 1))
    out = _apply_activation(out, spec.activation, spec.slope)
    return out[0] if squeeze else out


def dense_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray | None = None,
                  activation: str = "identity", slope: float = 0.01) -> np.ndarray:
    """rho(W x + b) on a vector, or row-wise on a (batch, n) array."""
    x = np.asarray(x, dtype=float)
    weight = np.asarray(weight, dtype=float)
    if x.shape[-1] != weight.shape[1]:
        raise ValueError(f"input dim {x.shape[-1]} does not match weight "
                         f"shape {weight.shape}")
    y = x @ weight.T
    if bias is not None:
        bias = np.asarray(bias, dtype=float)
        if bias.shape != (weight.shape[0],):
            raise ValueError(f"bias shape {bias.shape}, expected ({weight.shape[0]},)")
        y = y + bias
    return _apply_activation(y, activation, slope)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class Conv:
    """Weight-bearing (transposed) convolution node."""

    def __init__(self, spec: ConvSpec, weight, bias=None):
        self.spec = spec
        self.weight = _frozen(weight)
        self.bias = None if bias is None else _frozen(bias)
        if self.weight.shape != spec.weight_shape:
            raise ValueError(f"weight shape {self.weight.shape}, expected "
                             f"{spec.weight_shape}")

    def out_shape(self, shape):
        c, n = shape
        if c != self.spec.in_channels:
            raise ValueError(f"conv node expects {self.spec.in_channels} channels, "
                             f"graph provides {c}")
        return (self.spec.out_channels, conv_output_length(n, self.spec))

    def forward(self, x):
        fn = conv_transpose_forward if self.spec.transposed else conv_forward
        return fn(x, self.spec, self.weight, self.bias)

    def active_weights(self):
        n = int(np.count_nonzero(self.weight))
        if self.bias is not None:
            n += int(np.count_nonzero(self.bias))
        return n

    def is_linear(self):
        return self.spec.activation == "identity" and self.bias is None


class Dense:
    """Fully connected node; flattens its input row-major."""

    def __init__(self, weight, bias=None, activation: str = "identity",
                 slope: float = 0.01):
        self.weight = _frozen(weight)
        self.bias = None if bias is None else _frozen(bias)
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.activation = activation
        self.slope = slope

    def out_shape(self, shape):
        c, n = shape
        if c * n != self.weight.shape[1]:
            raise ValueError(f"dense node expects {self.weight.shape[1]} inputs, "
                             f"graph provides {c}x{n}")
        return (self.weight.shape[0], 1)

    def forward(self, x):
        x, squeeze = _as_batch(x)
        y = dense_forward(x.reshape(x.shape[0], -1), self.weight, self.bias,
                          self.activation, self.slope)
        y = y[:, :, None]
        return y[0] if squeeze else y

    def active_weights(self):
        n = int(np.count_nonzero(self.weight))
        if self.bias is not None:
            n += int(np.count_nonzero(self.bias))
        return n

    def is_linear(self):
        return self.activation == "identity" and self.bias is None


class _DataMovement:
    """Base for nodes that move entries around without arithmetic."""

    def forward(self, x):
        x, squeeze = _as_batch(x)
        y = self._move(x)
        return y[0] if squeeze else y

    def active_weights(self):
        return 0

    def is_linear(self):
        return True


class Reshape(_DataMovement):
    """Row-major reinterpretation (channels, length) -> (channels2, length2).

    With groups > 1 the channel axis is split into `groups` consecutive blocks
    and each block is reshaped independently; the output has groups*channels2
    channels. This is how identical reshapes of stacked parallel branches are
    expressed as a single node.
    """

    def __init__(self, channels: int, length: int, groups: int = 1):
        self.channels, self.length, self.groups = channels, length, groups

    def out_shape(self, shape):
        c, n = shape
        g = self.groups
        if c % g:
            raise ValueError(f"{c} channels not divisible into {g} groups")
        if (c // g) * n != self.channels * self.length:
            raise ValueError(f"cannot reshape ({c // g}, {n}) blocks to "
                             f"({self.channels}, {self.length})")
        return (g * self.channels, self.length)

    def _move(self, x):
        b, c, n = x.shape
        g = self.groups
        return x.reshape(b, g * self.channels, self.length)


class Flatten(Reshape):
    """(channels, length) -> (1, channels*length), row-major."""

    def __init__(self, groups: int = 1):
        super().__init__(1, -1, groups)

    def out_shape(self, shape):
        c, n = shape
        if c % self.groups:
            raise ValueError(f"{c} channels not divisible into {self.groups} groups")
        return (self.groups, (c // self.groups) * n)

    def _move(self, x):
        b, c, n = x.shape
        return x.reshape(b, self.groups, (c // self.groups) * n)


class Transpose(_DataMovement):
    """Swap the channel and position axes, per group of channels."""

    def __init__(self, groups: int = 1):
        self.groups = groups

    def out_shape(self, shape):
        c, n = shape
        if c % self.groups:
            raise ValueError(f"{c} channels not divisible into {self.groups} groups")
        return (self.groups * n, c // self.groups)

    def _move(self, x):
        b, c, n = x.shape
        g = self.groups
        blocks = x.reshape(b, g, c // g, n)
        return blocks.transpose(0, 1, 3, 2).reshape(b, g * n, c // g)


class Truncate(_DataMovement):
    """Keep a contiguous index range [start, stop) along one axis."""

    def __init__(self, start: int, stop: int, axis: str = "position"):
        if axis not in ("position", "channel"):
            raise ValueError("axis must be 'position' or 'channel'")
        if stop <= start:
            raise ValueError("empty truncation range")
        self.start, self.stop, self.axis = start, stop, axis

    def out_shape(self, shape):
        c, n = shape
        size = n if self.axis == "position" else c
        if self.stop > size:
            raise ValueError(f"truncation [{self.start}, {self.stop}) exceeds "
                             f"{self.axis} size {size}")
        keep = self.stop - self.start
        return (c, keep) if self.axis == "position" else (keep, n)

    def _move(self, x):
        if self.axis == "position":
            return x[:, :, self.start: self.stop]
        return x[:, self.start: self.stop, :]


class Append(_DataMovement):
    """Append copies of the given positions at the end of the position axis."""

    def __init__(self, indices):
        self.indices = tuple(int(i) for i in indices)

    def out_shape(self, shape):
        c, n = shape
        if any(i < 0 or i >= n for i in self.indices):
            raise ValueError(f"append indices {self.indices} out of range for "
                             f"length {n}")
        return (c, n + len(self.indices))

    def _move(self, x):
        return np.concatenate([x, x[:, :, list(self.indices)]], axis=2)


class Gather(_DataMovement):
    """Arbitrary index selection (permutation or subset) along one axis."""

    def __init__(self, indices, axis: str = "position"):
        if axis not in ("position", "channel"):
            raise ValueError("axis must be 'position' or 'channel'")
        self.indices = np.array(indices, dtype=int)
        self.indices.setflags(write=False)
        self.axis = axis

    def out_shape(self, shape):
        c, n = shape
        size = n if self.axis == "position" else c
        if self.indices.min() < 0 or self.indices.max() >= size:
            raise ValueError(f"gather indices out of range for {self.axis} "
                             f"size {size}")
        m = len(self.indices)
        return (c, m) if self.axis == "position" else (m, n)

    def _move(self, x):
        if self.axis == "position":
            return x[:, :, self.indices]
        return x[:, self.indices, :]


class NetworkGraph:
    """An ordered, shape-checked pipeline of layer nodes."""

    def __init__(self, nodes, input_shape):
        self.nodes = tuple(nodes)
        self.input_shape = (int(input_shape[0]), int(input_shape[1]))
        shapes = [self.input_shape]
        for node in self.nodes:
            shapes.append(tuple(int(v) for v in node.out_shape(shapes[-1])))
        self.shapes = tuple(shapes)

    @property
    def output_shape(self):
        return self.shapes[-1]

    @property
    def depth(self):
        """Number of weight-bearing layers; data movement is free."""
        return sum(1 for node in self.nodes if isinstance(node, (Conv, Dense)))

    def forward(self, x):
        x, squeeze = _as_batch(x)
        if x.shape[1:] != self.input_shape:
            raise ValueError(f"input shape {x.shape[1:]}, graph expects "
                             f"{self.input_shape}")
        for node in self.nodes:
            x = node.forward(x)
        return x[0] if squeeze else x

    def then(self, other: "NetworkGraph") -> "NetworkGraph":
        if self.output_shape != other.input_shape:
            raise ValueError(f"cannot compose: output {self.output_shape} vs "
                             f"input {other.input_shape}")
        return NetworkGraph(self.nodes + other.nodes, self.input_shape)


def network_forward(net: NetworkGraph, x: np.ndarray) -> np.ndarray:
    return net.forward(x)


def count_active_weights(net: NetworkGraph) -> int:
    """Structurally nonzero stored weight/bias entries of the whole pipeline."""
    return sum(node.active_weights() for node in net.nodes)


def materialize_linear_map(net: NetworkGraph, in_dim: int | None = None) -> np.ndarray:
    """Freeze a linear graph into the matrix V with V e_i = net(e_i).

    Basis vectors are reshaped row-major into the graph's input shape and the
    outputs flattened row-major. Probing runs batched, chunked so that no
    intermediate exceeds a fixed element budget.
    """
    for node in net.nodes:
        if not node.is_linear():
            raise ValueError("graph is not linear (activation or bias present); "
                             "refusing to materialize")
    c, n = net.input_shape
    if in_dim is None:
        in_dim = c * n
    elif in_dim != c * n:
        raise ValueError(f"in_dim {in_dim} does not match input shape {c}x{n}")
    out_dim = int(np.prod(net.output_shape))

    widest = max(int(cc) * int(nn) for cc, nn in net.shapes)
    chunk = max(1, min(in_dim, int(16_000_000 // max(widest, 1))))
    v = np.empty((out_dim, in_dim))
    eye = np.eye(in_dim)
    for lo in range(0, in_dim, chunk):
        hi = min(lo + chunk, in_dim)
        probes = eye[lo:hi].reshape(hi - lo, c, n)
        v[:, lo:hi] = net.forward(probes).reshape(hi - lo, out_dim).T
    return v
