"""Convolution semantics against scalar-loop and dense-matrix oracles."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fouriernet.layers import (
    Append,
    Conv,
    ConvSpec,
    Dense,
    Flatten,
    Gather,
    NetworkGraph,
    Reshape,
    Transpose,
    Truncate,
    conv_forward,
    conv_output_length,
    conv_transpose_forward,
    count_active_weights,
    dense_forward,
    materialize_linear_map,
    network_forward,
)


# ---------------------------------------------------------------------------
# scalar reference implementations (deliberately naive)

def conv_reference(x, spec, w, bias=None):
    """Quadruple loop over (out channel, position, in channel, tap).

    Accumulation per output entry runs channel-major then tap, matching the
    order of the vectorized strided adds, so agreement must be bit-exact.
    """
    m, n = x.shape
    g, s, t, d = spec.groups, spec.kernel_size, spec.stride, spec.dilation
    length = conv_output_length(n, spec)
    mg, og = m // g, spec.out_channels // g
    out = np.zeros((spec.out_channels, length))
    for kp in range(spec.out_channels):
        grp = kp // og
        for j in range(length):
            acc = 0.0
            for c in range(mg):
                for i in range(s):
                    acc += w[kp, c, i] * x[grp * mg + c, j * t + i * d]
            out[kp, j] = acc
    if bias is not None:
        out = out + np.asarray(bias).reshape(-1, 1)
    return _activate(out, spec)


def conv_transpose_reference(x, spec, w, bias=None):
    """Scatter each input entry to positions j*t + i*d, per Def-2 index sets."""
    m, n = x.shape
    g, s, t, d = spec.groups, spec.kernel_size, spec.stride, spec.dilation
    length = conv_output_length(n, spec)
    mg, og = m // g, spec.out_channels // g
    out = np.zeros((spec.out_channels, length))
    for grp in range(g):
        for c in range(mg):
            for i in range(s):
                for o in range(og):
                    for j in range(n):
                        out[grp * og + o, j * t + i * d] += \
                            w[c, grp * og + o, i] * x[grp * mg + c, j]
    if bias is not None:
        out = out + np.asarray(bias).reshape(-1, 1)
    return _activate(out, spec)


def _activate(y, spec):
    if spec.activation == "relu":
        return np.maximum(y, 0.0)
    if spec.activation == "leaky_relu":
        return np.where(y >= 0, y, spec.slope * y)
    return y


def _random_spec(rng, transposed=False):
    g = rng.choice([1, 1, 1, 2, 4])
    m = g * rng.integers(1, 4)
    mp = g * rng.integers(1, 4)
    s = int(rng.integers(1, 4))
    t = int(rng.integers(1, 4))
    d = int(rng.integers(1, 4))
    act = rng.choice(["identity", "relu", "leaky_relu"])
    return ConvSpec(int(m), int(mp), s, t, d, int(g), transposed, str(act))


# ---------------------------------------------------------------------------
# output lengths

def test_output_length_examples():
    assert conv_output_length(10, ConvSpec(1, 1, 2, stride=2)) == 5
    assert conv_output_length(7, ConvSpec(1, 1, 3, stride=1, dilation=2)) == 3
    # doubling layer of the synthesis pipeline: n -> 2n
    assert conv_output_length(3, ConvSpec(1, 1, 2, stride=2, transposed=True)) == 6


def test_output_length_rejects_short_input():
    with pytest.raises(ValueError):
        conv_output_length(2, ConvSpec(1, 1, 3, dilation=2))
    with pytest.raises(ValueError):
        conv_output_length(1, ConvSpec(1, 1, 2))


def test_forward_lengths_match_formula():
    rng = np.random.default_rng(7)
    for _ in range(100):
        transposed = bool(rng.integers(2))
        spec = _random_spec(rng, transposed)
        lo = 1 if transposed else spec.dilation * (spec.kernel_size - 1) + 1
        n = int(rng.integers(lo, lo + 12))
        x = rng.standard_normal((spec.in_channels, n))
        w = rng.standard_normal(spec.weight_shape)
        fn = conv_transpose_forward if transposed else conv_forward
        y = fn(x, spec, w)
        assert y.shape == (spec.out_channels, conv_output_length(n, spec))


# ---------------------------------------------------------------------------
# convolution forward

def test_conv_two_tap_by_hand():
    spec = ConvSpec(1, 1, 2)
    y = conv_forward(np.array([[1.0, 1.0, 1.0]]), spec, np.array([[[1.0, 2.0]]]))
    assert np.array_equal(y, [[3.0, 3.0]])


def test_conv_identity_kernel():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((3, 9))
    spec = ConvSpec(3, 3, 1)
    w = np.eye(3)[:, :, None]
    assert np.array_equal(conv_forward(x, spec, w), x)


def test_conv_matches_scalar_reference_exactly():
    # the invariant is exact floating-point equality, not closeness
    rng = np.random.default_rng(1)
    for _ in range(1000):
        spec = _random_spec(rng)
        lo = spec.dilation * (spec.kernel_size - 1) + 1
        n = int(rng.integers(lo, lo + 10))
        x = rng.standard_normal((spec.in_channels, n))
        w = rng.standard_normal(spec.weight_shape)
        bias = rng.standard_normal(spec.out_channels) if rng.integers(2) else None
        got = conv_forward(x, spec, w, bias)
        want = conv_reference(x, spec, w, bias)
        assert np.array_equal(got, want)


def test_conv_grouped_equals_blockwise():
    rng = np.random.default_rng(2)
    spec = ConvSpec(8, 8, 2, stride=1, dilation=1, groups=4)
    x = rng.standard_normal((8, 11))
    w = rng.standard_normal(spec.weight_shape)
    got = conv_forward(x, spec, w)
    sub = ConvSpec(2, 2, 2)
    for grp in range(4):
        piece = conv_forward(x[2 * grp: 2 * grp + 2], sub, w[2 * grp: 2 * grp + 2])
        assert np.array_equal(got[2 * grp: 2 * grp + 2], piece)


def test_conv_batched_equals_loop():
    rng = np.random.default_rng(3)
    spec = ConvSpec(4, 6, 2, stride=2, groups=2)
    x = rng.standard_normal((5, 4, 9))
    w = rng.standard_normal(spec.weight_shape)
    batched = conv_forward(x, spec, w)
    for b in range(5):
        assert np.array_equal(batched[b], conv_forward(x[b], spec, w))


def test_conv_rejects_bad_shapes():
    spec = ConvSpec(2, 2, 2)
    with pytest.raises(ValueError):
        conv_forward(np.zeros((3, 5)), spec, np.zeros(spec.weight_shape))
    with pytest.raises(ValueError):
        conv_forward(np.zeros((2, 5)), spec, np.zeros((2, 2, 3)))
    with pytest.raises(ValueError):
        ConvSpec(3, 2, 1, groups=2)
    with pytest.raises(ValueError):
        ConvSpec(2, 2, 0)


@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(0, 8),
       st.integers(0, 2 ** 32 - 1))
@settings(max_examples=200, deadline=None)
def test_conv_scalar_agreement_property(s, t, d, extra, seed):
    rng = np.random.default_rng(seed)
    spec = ConvSpec(2, 3, s, t, d)
    n = d * (s - 1) + 1 + extra
    x = rng.standard_normal((2, n))
    w = rng.standard_normal(spec.weight_shape)
    assert np.array_equal(conv_forward(x, spec, w), conv_reference(x, spec, w))


# ---------------------------------------------------------------------------
# transposed convolution

def _adjoint_forward_weight(spec, w):
    """Forward-conv weight whose dense matrix is the transpose of `spec,w`."""
    g = spec.groups
    mg = spec.in_channels // g
    og = spec.out_channels // g
    wf = np.zeros((spec.in_channels, og, spec.kernel_size))
    for grp in range(g):
        for c in range(mg):
            for o in range(og):
                wf[grp * mg + c, o] = w[c, grp * og + o]
    return wf


def test_transpose_identity_kernel():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((2, 7))
    spec = ConvSpec(2, 2, 1, transposed=True)
    w = np.eye(2)[:, :, None]
    assert np.array_equal(conv_transpose_forward(x, spec, w), x)


def test_transpose_matches_scatter_reference():
    rng = np.random.default_rng(5)
    for _ in range(300):
        spec = _random_spec(rng, transposed=True)
        n = int(rng.integers(1, 9))
        x = rng.standard_normal((spec.in_channels, n))
        w = rng.standard_normal(spec.weight_shape)
        bias = rng.standard_normal(spec.out_channels) if rng.integers(2) else None
        got = conv_transpose_forward(x, spec, w, bias)
        want = conv_transpose_reference(x, spec, w, bias)
        assert np.allclose(got, want, rtol=0.0, atol=1e-12)


def test_transpose_is_adjoint_of_forward():
    # multiplication by M^T where M materializes the role-swapped forward conv
    rng = np.random.default_rng(6)
    for _ in range(60):
        g = int(rng.choice([1, 2]))
        spec = ConvSpec(2 * g, 3 * g, int(rng.integers(1, 4)),
                        stride=int(rng.integers(1, 3)),
                        dilation=int(rng.integers(1, 3)),
                        groups=g, transposed=True)
        n = int(rng.integers(1, 7))
        length = conv_output_length(n, spec)
        w = rng.standard_normal(spec.weight_shape)
        fwd = ConvSpec(spec.out_channels, spec.in_channels, spec.kernel_size,
                       spec.stride, spec.dilation, g)
        net = NetworkGraph([Conv(fwd, _adjoint_forward_weight(spec, w))],
                           (spec.out_channels, length))
        m = materialize_linear_map(net)
        x = rng.standard_normal((spec.in_channels, n))
        got = conv_transpose_forward(x, spec, w).ravel()
        assert np.allclose(got, m.T @ x.ravel(), rtol=0.0, atol=1e-12)


def test_transpose_doubling_layer_interleaves():
    # 4-channel doubling layer with the diagonal two-tap kernels at z = i:
    # channel k of input [Re w, Im w, Re w, Im w] lands on channel k of the
    # output, tap 0 at even positions and tap 1 at odd ones
    z = 1j
    w = np.zeros((4, 4, 2))
    w[0, 0] = [1.0, 0.0]
    w[1, 1] = [0.0, 1.0]
    w[2, 2] = [z.real, z.imag]
    w[3, 3] = [-z.imag, z.real]
    spec = ConvSpec(4, 4, 2, stride=2, transposed=True)
    y = conv_transpose_forward(np.array([[1.0], [0.0], [1.0], [0.0]]), spec, w)
    assert np.array_equal(y, [[1.0, 0.0],
                              [0.0, 0.0],
                              [0.0, 1.0],
                              [0.0, 0.0]])


# ---------------------------------------------------------------------------
# dense layers

def test_dense_identity():
    x = np.array([0.5, -2.0, 3.0])
    assert np.array_equal(dense_forward(x, np.eye(3)), x)


def test_dense_relu_clamp():
    y = dense_forward(np.array([0.3, 0.3]), np.array([[1.0, 1.0]]),
                      np.array([-1.0]), activation="relu")
    assert np.array_equal(y, [0.0])


def test_dense_leaky_matches_scalar_loop():
    rng = np.random.default_rng(8)
    w = rng.standard_normal((5, 7))
    b = rng.standard_normal(5)
    x = rng.standard_normal(7)
    got = dense_forward(x, w, b, activation="leaky_relu", slope=0.01)
    for i in range(5):
        acc = b[i]
        for j in range(7):
            acc += w[i, j] * x[j]
        want = acc if acc >= 0 else 0.01 * acc
        assert abs(got[i] - want) < 1e-14


def test_dense_rejects_mismatch():
    with pytest.raises(ValueError):
        dense_forward(np.zeros(3), np.zeros((2, 4)))
    with pytest.raises(ValueError):
        dense_forward(np.zeros(4), np.zeros((2, 4)), bias=np.zeros(3))


# ---------------------------------------------------------------------------
# graphs, reshapes, bookkeeping

def test_empty_graph_is_identity():
    rng = np.random.default_rng(9)
    x = rng.standard_normal((3, 4))
    net = NetworkGraph([], (3, 4))
    assert np.array_equal(network_forward(net, x), x)
    assert net.depth == 0


def test_flatten_truncate_selects_entries():
    x = np.arange(6.0).reshape(2, 3)
    net = NetworkGraph([Flatten(), Truncate(2, 4)], (2, 3))
    assert np.array_equal(network_forward(net, x), [[2.0, 3.0]])


def test_transpose_reshape_transpose_roundtrip():
    rng = np.random.default_rng(10)
    x = rng.standard_normal((8, 3))
    net = NetworkGraph([Transpose(), Reshape(6, 4), Transpose()], (8, 3))
    assert net.output_shape == (4, 6)
    y = network_forward(net, x)
    assert np.array_equal(y, x.T.reshape(6, 4).T)


def test_grouped_movement_acts_per_block():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((6, 4))
    grouped = NetworkGraph([Transpose(groups=3)], (6, 4))
    y = network_forward(grouped, x)
    for grp in range(3):
        assert np.array_equal(y[4 * grp: 4 * grp + 4], x[2 * grp: 2 * grp + 2].T)


def test_append_and_gather():
    x = np.array([[1.0, 2.0, 3.0]])
    assert np.array_equal(network_forward(NetworkGraph([Append([0])], (1, 3)), x),
                          [[1.0, 2.0, 3.0, 1.0]])
    assert np.array_equal(
        network_forward(NetworkGraph([Gather([2, 0, 1])], (1, 3)), x),
        [[3.0, 1.0, 2.0]])
    two = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(
        network_forward(NetworkGraph([Gather([1], axis="channel")], (2, 2)), two),
        [[3.0, 4.0]])


def test_graph_shape_validation():
    with pytest.raises(ValueError):
        NetworkGraph([Reshape(3, 3)], (2, 4))
    with pytest.raises(ValueError):
        NetworkGraph([Truncate(0, 9)], (2, 4))
    with pytest.raises(ValueError):
        NetworkGraph([Flatten(), Flatten(groups=5)], (2, 4))


def test_movement_outputs_are_drawn_from_inputs():
    rng = np.random.default_rng(12)
    for _ in range(50):
        c = int(rng.integers(1, 5)) * 2
        n = int(rng.integers(1, 5)) * 2
        x = rng.standard_normal((c, n))
        nodes = []
        shape = (c, n)
        for _ in range(int(rng.integers(1, 6))):
            choice = rng.integers(4)
            cc, nn = shape
            if choice == 0 and cc % 2 == 0:
                nodes.append(Transpose(groups=2))
            elif choice == 1:
                nodes.append(Flatten())
            elif choice == 2 and nn > 1:
                nodes.append(Truncate(0, nn - 1))
            else:
                nodes.append(Gather(rng.permutation(nn)))
            shape = nodes[-1].out_shape(shape)
        net = NetworkGraph(nodes, (c, n))
        y = network_forward(net, x)
        assert set(y.ravel()) <= set(x.ravel())
        assert count_active_weights(net) == 0


def test_active_weights_examples():
    assert count_active_weights(NetworkGraph([], (1, 1))) == 0
    dense = Dense(np.ones((3, 2)), np.ones(3))
    assert count_active_weights(NetworkGraph([dense], (1, 2))) == 9
    sparse = Conv(ConvSpec(2, 2, 2), np.array([[[1.0, 0.0], [0.0, 0.0]],
                                               [[0.0, 0.0], [0.0, 3.0]]]))
    assert count_active_weights(NetworkGraph([sparse], (2, 5))) == 2


def test_active_weights_additive_over_concatenation():
    rng = np.random.default_rng(13)
    a = NetworkGraph([Conv(ConvSpec(2, 4, 2), rng.standard_normal((4, 2, 2)))], (2, 6))
    b = NetworkGraph([Conv(ConvSpec(4, 1, 1), rng.standard_normal((1, 4, 1)))], (4, 5))
    combined = a.then(b)
    assert count_active_weights(combined) == \
        count_active_weights(a) + count_active_weights(b)
    assert combined.depth == 2


def test_then_rejects_shape_mismatch():
    a = NetworkGraph([Flatten()], (2, 3))
    b = NetworkGraph([], (2, 3))
    with pytest.raises(ValueError):
        a.then(b)


# ---------------------------------------------------------------------------
# materialization

def test_materialize_identity_graph():
    net = NetworkGraph([], (2, 3))
    assert np.array_equal(materialize_linear_map(net), np.eye(6))


def test_materialize_banded_conv():
    spec = ConvSpec(1, 1, 2)
    net = NetworkGraph([Conv(spec, np.array([[[1.0, 1.0]]]))], (1, 3))
    assert np.array_equal(materialize_linear_map(net),
                          [[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]])


def test_materialize_agrees_with_forward():
    rng = np.random.default_rng(14)
    spec = ConvSpec(2, 4, 2, stride=2, transposed=True)
    nodes = [Conv(spec, rng.standard_normal(spec.weight_shape)), Transpose()]
    net = NetworkGraph(nodes, (2, 5))
    v = materialize_linear_map(net)
    for _ in range(20):
        x = rng.standard_normal((2, 5))
        assert np.allclose(v @ x.ravel(),
                           network_forward(net, x).ravel(), atol=1e-12)


def test_materialize_rejects_nonlinear():
    spec = ConvSpec(1, 1, 1, activation="relu")
    net = NetworkGraph([Conv(spec, np.ones((1, 1, 1)))], (1, 3))
    with pytest.raises(ValueError):
        materialize_linear_map(net)
    biased = NetworkGraph([Dense(np.eye(3), np.ones(3))], (1, 3))
    with pytest.raises(ValueError):
        materialize_linear_map(biased)
