"""Exact-weight convolutional synthesis of truncated Fourier series,
with the training and data-generation pipeline used to validate it."""

from fouriernet.layers import (
    ConvSpec,
    NetworkGraph,
    conv_output_length,
    conv_forward,
    conv_transpose_forward,
    dense_forward,
    network_forward,
    count_active_weights,
    materialize_linear_map,
)
from fouriernet.cplx import embed, extract, complex_block
from fouriernet.synthesis import (
    DyadicGrid,
    SpectralNet,
    build_phi_z,
    derive_permutation,
    build_F_omega,
    build_S_m,
    build_Psi,
    build_coefficient_adapter,
    mode_frequencies,
    pack_coefficients,
    unpack_coefficients,
    max_conv_channels,
    max_kernel_size,
)

from fouriernet.periodization import (
    SobolevSignal,
    HermiteBasis,
    FourierCoeffs,
    hermite_basis,
    periodize,
    fold,
    fourier_coeffs,
    operator_T,
    truncated_series_eval,
    hs_norm,
)
from fouriernet.training import (
    MLPParams,
    TrainConfig,
    FrozenDecoder,
    frozen_decoder,
    mlp_dims,
    init_he,
    mlp_forward,
    model_forward,
    loss,
    loss_and_grad,
    optimize_lbfgs,
    optimize_adam,
    test_error,
    train_ensemble,
)
from fouriernet.problems import (
    BENCHMARK_BOX,
    FHN_MU_RANGE,
    FHNConfig,
    Trajectory,
    Dataset,
    benchmark_eval,
    sample_parameters,
    fhn_solve,
    fhn_dataset,
    save_dataset,
    load_dataset,
    save_trajectory,
)

__version__ = "0.1.0"
