#pragma once

#include "pitta/tensor.hpp"

namespace pitta::ops {

// Elementwise kernels. Binary ops accept equal shapes or a scalar (1-element)
// operand on either side; gradients for a broadcast scalar are reduced by sum.
TensorPtr add(Tape& tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(Tape& tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(Tape& tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(Tape& tape, const TensorPtr& a, Real c);
TensorPtr abs(Tape& tape, const TensorPtr& a);  // subgradient 0 at 0
TensorPtr relu(Tape& tape, const TensorPtr& a);
TensorPtr sigmoid(Tape& tape, const TensorPtr& a);

/// Sum of all elements, returned as a scalar tensor of shape [1].
TensorPtr sum(Tape& tape, const TensorPtr& a);

/// Direct 2D convolution. input is H x W x Cin, kernel is k x k x Cin x Cout
/// (k odd), output is Ho x Wo x Cout with Ho = floor((H + 2*pad - k)/stride) + 1.
/// Accumulation order per output element is (ky, kx, ci) row-major, which the
/// brute-force oracle in the tests reproduces bit-exactly.
TensorPtr conv2d(Tape& tape, const TensorPtr& input, const TensorPtr& kernel, int stride,
                 int pad);

/// Adds a per-channel bias vector (shape [C]) to an H x W x C tensor.
TensorPtr add_channel_bias(Tape& tape, const TensorPtr& input, const TensorPtr& bias);

enum class BnMode { train, eval };

/// Per-channel batch normalization over the spatial dimensions of an
/// H x W x C tensor. eval mode normalizes with the running statistics;
/// train mode normalizes with batch statistics (biased variance) and updates
/// the running buffers in place with the given momentum (unbiased variance,
/// matching the usual deep-learning convention).
TensorPtr batch_norm(Tape& tape, const TensorPtr& x, const TensorPtr& gamma,
                     const TensorPtr& beta, const TensorPtr& running_mean,
                     const TensorPtr& running_var, Real eps, Real momentum, BnMode mode);

/// Bilinear upsampling by an integer factor with align_corners=false
/// sampling and replicate borders.
TensorPtr upsample_bilinear(Tape& tape, const TensorPtr& input, int factor);

/// out(r, c) = x(clamp(r+dr), clamp(c+dc)) on an H x W tensor; the clamped
/// (replicate-border) shift used by the Laplacian edge stencil.
TensorPtr shift_clamp(Tape& tape, const TensorPtr& x, int dr, int dc);

TensorPtr concat_channels(Tape& tape, const TensorPtr& a, const TensorPtr& b);

/// Mean over the channel axis: H x W x C -> H x W.
TensorPtr channel_mean(Tape& tape, const TensorPtr& image);

/// Maps a sigmoid disparity field (values in [0,1], shape H x W or H x W x 1)
/// to depth via d = 1 / (1/max + sigma * (1/min - 1/max)); output is H x W
/// with every value in [min_depth, max_depth].
TensorPtr disparity_to_depth(Tape& tape, const TensorPtr& disp, Real min_depth, Real max_depth);

}  // namespace pitta::ops
