#pragma once

#include "decodet/tensor.hpp"

namespace decodet {

// ---------------------------------------------------------------------------
// Convolution. Input [C_in,H,W], weight [C_out,C_in,k,k], bias [C_out].
// Zero padding; H' = (H + 2*padding - k)/stride + 1.
// ---------------------------------------------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int padding);

struct Conv2dGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};

/// Exact vector-Jacobian products of conv2d.
Conv2dGrads conv2d_backward(const Tensor& grad_out, const Tensor& input,
                            const Tensor& weight, int stride, int padding);

// ---------------------------------------------------------------------------
// Affine map over the trailing axis. Input [...,C_in], weight [C_out,C_in],
// bias [C_out] -> [...,C_out].
// ---------------------------------------------------------------------------

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

struct LinearGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};

LinearGrads linear_backward(const Tensor& grad_out, const Tensor& input,
                            const Tensor& weight);

// ---------------------------------------------------------------------------
// Per-channel normalization + affine + ReLU over a [C,H,W] tensor.
// Batch mode normalizes with the statistics of the supplied tensor (computed
// over the H*W positions of each channel); running mode uses stored
// statistics. Batch mode updates the running statistics by EMA with momentum
// 0.9 whenever a state record is supplied.
// ---------------------------------------------------------------------------

enum class StatsMode { kBatch, kRunning };

/// Running statistics, one entry per channel. Single-writer.
struct NormState {
  Tensor mean;
  Tensor var;
};

NormState make_norm_state(std::size_t channels);

/// Saved intermediates consumed by norm_act_backward.
struct NormActCache {
  Tensor inv_std;     // [C]
  Tensor normalized;  // [C,H,W], pre-affine
  Tensor pre_act;     // [C,H,W], post-affine, pre-ReLU
  StatsMode mode = StatsMode::kBatch;
};

Tensor norm_act(const Tensor& input, const Tensor& gamma,
                const Tensor& beta_aff, StatsMode mode, double eps,
                NormState* state = nullptr, NormActCache* cache = nullptr);

struct NormActGrads {
  Tensor input;
  Tensor gamma;
  Tensor beta;
};

NormActGrads norm_act_backward(const Tensor& grad_out, const Tensor& gamma,
                               const NormActCache& cache);

// ---------------------------------------------------------------------------
// Elementwise and shape helpers.
// ---------------------------------------------------------------------------

Tensor relu(const Tensor& x);
/// grad_out masked by pre_act > 0 (the subgradient at 0 is taken as 0).
Tensor relu_backward(const Tensor& grad_out, const Tensor& pre_act);

void add_inplace(Tensor& a, const Tensor& b);
void axpy_inplace(Tensor& a, double s, const Tensor& b);  // a += s*b
void scale_inplace(Tensor& a, double s);
double sum(const Tensor& a);
double dot(const Tensor& a, const Tensor& b);

/// Average pooling over [C,H,W] with ceil-mode output sizing; edge windows
/// average over the valid pixels only.
Tensor avg_pool2d(const Tensor& input, std::size_t window, std::size_t stride);

/// Nearest-neighbour upsample of [C,h,w] to [C,out_h,out_w] with
/// out_h in {2h-1, 2h} (source index i/2). Backward is the exact adjoint.
Tensor upsample_nearest2x(const Tensor& input, std::size_t out_h,
                          std::size_t out_w);
Tensor upsample_nearest2x_backward(const Tensor& grad_out, std::size_t in_h,
                                   std::size_t in_w);

}  // namespace decodet
