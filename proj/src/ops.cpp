#include "decodet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

namespace decodet {

namespace {

void check_conv_args(const Tensor& input, const Tensor& weight,
                     const Tensor* bias, int stride, int padding) {
  if (input.rank() != 3) {
    throw std::invalid_argument("conv2d: input must be [C,H,W], got " +
                                input.shape_str());
  }
  if (weight.rank() != 4) {
    throw std::invalid_argument("conv2d: weight must be [C_out,C_in,k,k], got " +
                                weight.shape_str());
  }
  if (weight.dim(2) != weight.dim(3)) {
    throw std::invalid_argument("conv2d: kernel must be square, got " +
                                weight.shape_str());
  }
  if (weight.dim(2) % 2 == 0) {
    throw std::invalid_argument("conv2d: kernel size must be odd, got k=" +
                                std::to_string(weight.dim(2)));
  }
  if (weight.dim(1) != input.dim(0)) {
    throw std::invalid_argument(
        "conv2d: weight C_in=" + std::to_string(weight.dim(1)) +
        " does not match input C=" + std::to_string(input.dim(0)));
  }
  if (bias && bias->dim(0) != weight.dim(0)) {
    throw std::invalid_argument(
        "conv2d: bias length " + std::to_string(bias->dim(0)) +
        " does not match C_out=" + std::to_string(weight.dim(0)));
  }
  if (stride < 1) {
    throw std::invalid_argument("conv2d: stride must be >= 1, got " +
                                std::to_string(stride));
  }
  if (padding < 0) {
    throw std::invalid_argument("conv2d: padding must be >= 0, got " +
                                std::to_string(padding));
  }
  const std::int64_t span =
      static_cast<std::int64_t>(input.dim(1)) + 2 * padding;
  if (span < static_cast<std::int64_t>(weight.dim(2)) ||
      static_cast<std::int64_t>(input.dim(2)) + 2 * padding <
          static_cast<std::int64_t>(weight.dim(2))) {
    throw std::invalid_argument("conv2d: kernel k=" +
                                std::to_string(weight.dim(2)) +
                                " larger than padded input " +
                                input.shape_str());
  }
}

std::size_t conv_out_extent(std::size_t in, int pad, std::size_t k,
                            int stride) {
  return (in + 2 * static_cast<std::size_t>(pad) - k) /
             static_cast<std::size_t>(stride) +
         1;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int padding) {
  check_conv_args(input, weight, &bias, stride, padding);
  const std::size_t c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t c_out = weight.dim(0), k = weight.dim(2);
  const std::size_t oh = conv_out_extent(h, padding, k, stride);
  const std::size_t ow = conv_out_extent(w, padding, k, stride);

  Tensor out({c_out, oh, ow});
  const double* in = input.data();
  const double* wt = weight.data();
  const double* bs = bias.data();
  double* o = out.data();

#pragma omp parallel for schedule(static)
  for (std::int64_t co = 0; co < static_cast<std::int64_t>(c_out); ++co) {
    const double* wco = wt + static_cast<std::size_t>(co) * c_in * k * k;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        double acc = bs[co];
        for (std::size_t ci = 0; ci < c_in; ++ci) {
          const double* inc = in + ci * h * w;
          const double* wci = wco + ci * k * k;
          for (std::size_t ky = 0; ky < k; ++ky) {
            const std::int64_t iy = static_cast<std::int64_t>(y) * stride +
                                    static_cast<std::int64_t>(ky) - padding;
            if (iy < 0 || iy >= static_cast<std::int64_t>(h)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const std::int64_t ix = static_cast<std::int64_t>(x) * stride +
                                      static_cast<std::int64_t>(kx) - padding;
              if (ix < 0 || ix >= static_cast<std::int64_t>(w)) continue;
              acc += wci[ky * k + kx] * inc[iy * w + ix];
            }
          }
        }
        o[(static_cast<std::size_t>(co) * oh + y) * ow + x] = acc;
      }
    }
  }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& grad_out, const Tensor& input,
                            const Tensor& weight, int stride, int padding) {
  check_conv_args(input, weight, nullptr, stride, padding);
  const std::size_t c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t c_out = weight.dim(0), k = weight.dim(2);
  const std::size_t oh = conv_out_extent(h, padding, k, stride);
  const std::size_t ow = conv_out_extent(w, padding, k, stride);
  if (grad_out.rank() != 3 || grad_out.dim(0) != c_out ||
      grad_out.dim(1) != oh || grad_out.dim(2) != ow) {
    throw std::invalid_argument("conv2d_backward: grad_out shape " +
                                grad_out.shape_str() + " does not match [" +
                                std::to_string(c_out) + ", " +
                                std::to_string(oh) + ", " +
                                std::to_string(ow) + "]");
  }

  Conv2dGrads g{Tensor({c_in, h, w}), Tensor({c_out, c_in, k, k}),
                Tensor({c_out})};
  const double* go = grad_out.data();
  const double* in = input.data();
  const double* wt = weight.data();

  // Each thread owns a c_out slice of grad_weight and grad_bias.
#pragma omp parallel for schedule(static)
  for (std::int64_t co = 0; co < static_cast<std::int64_t>(c_out); ++co) {
    const double* goc = go + static_cast<std::size_t>(co) * oh * ow;
    double* gw = g.weight.data() + static_cast<std::size_t>(co) * c_in * k * k;
    double gb = 0.0;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const double gv = goc[y * ow + x];
        gb += gv;
        for (std::size_t ci = 0; ci < c_in; ++ci) {
          const double* inc = in + ci * h * w;
          double* gwc = gw + ci * k * k;
          for (std::size_t ky = 0; ky < k; ++ky) {
            const std::int64_t iy = static_cast<std::int64_t>(y) * stride +
                                    static_cast<std::int64_t>(ky) - padding;
            if (iy < 0 || iy >= static_cast<std::int64_t>(h)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const std::int64_t ix = static_cast<std::int64_t>(x) * stride +
                                      static_cast<std::int64_t>(kx) - padding;
              if (ix < 0 || ix >= static_cast<std::int64_t>(w)) continue;
              gwc[ky * k + kx] += gv * inc[iy * w + ix];
            }
          }
        }
      }
    }
    g.bias[static_cast<std::size_t>(co)] = gb;
  }

  // Gather form: every grad_input element is produced by exactly one thread.
#pragma omp parallel for schedule(static)
  for (std::int64_t ci = 0; ci < static_cast<std::int64_t>(c_in); ++ci) {
    double* gi = g.input.data() + static_cast<std::size_t>(ci) * h * w;
    for (std::size_t iy = 0; iy < h; ++iy) {
      for (std::size_t ix = 0; ix < w; ++ix) {
        double acc = 0.0;
        for (std::size_t co = 0; co < c_out; ++co) {
          const double* goc = go + co * oh * ow;
          const double* wc = wt + (co * c_in + ci) * k * k;
          for (std::size_t ky = 0; ky < k; ++ky) {
            const std::int64_t num_y =
                static_cast<std::int64_t>(iy) + padding -
                static_cast<std::int64_t>(ky);
            if (num_y < 0 || num_y % stride != 0) continue;
            const std::int64_t y = num_y / stride;
            if (y >= static_cast<std::int64_t>(oh)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const std::int64_t num_x =
                  static_cast<std::int64_t>(ix) + padding -
                  static_cast<std::int64_t>(kx);
              if (num_x < 0 || num_x % stride != 0) continue;
              const std::int64_t x = num_x / stride;
              if (x >= static_cast<std::int64_t>(ow)) continue;
              acc += goc[y * ow + x] * wc[ky * k + kx];
            }
          }
        }
        gi[iy * w + ix] = acc;
      }
    }
  }
  return g;
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.rank() < 1) {
    throw std::invalid_argument("linear: input must have at least one axis");
  }
  if (weight.rank() != 2) {
    throw std::invalid_argument("linear: weight must be [C_out,C_in], got " +
                                weight.shape_str());
  }
  const std::size_t c_in = input.dim(input.rank() - 1);
  const std::size_t c_out = weight.dim(0);
  if (weight.dim(1) != c_in) {
    throw std::invalid_argument(
        "linear: weight C_in=" + std::to_string(weight.dim(1)) +
        " does not match input trailing axis " + std::to_string(c_in));
  }
  if (bias.dim(0) != c_out) {
    throw std::invalid_argument(
        "linear: bias length " + std::to_string(bias.dim(0)) +
        " does not match C_out=" + std::to_string(c_out));
  }
  const std::size_t n = input.size() / c_in;

  std::vector<std::size_t> out_shape = input.shape();
  out_shape.back() = c_out;
  Tensor out(std::move(out_shape));
  const double* in = input.data();
  const double* wt = weight.data();
  const double* bs = bias.data();
  double* o = out.data();

#pragma omp parallel for schedule(static)
  for (std::int64_t row = 0; row < static_cast<std::int64_t>(n); ++row) {
    const double* ir = in + static_cast<std::size_t>(row) * c_in;
    double* orow = o + static_cast<std::size_t>(row) * c_out;
    for (std::size_t co = 0; co < c_out; ++co) {
      const double* wr = wt + co * c_in;
      double acc = bs[co];
      for (std::size_t ci = 0; ci < c_in; ++ci) acc += wr[ci] * ir[ci];
      orow[co] = acc;
    }
  }
  return out;
}

LinearGrads linear_backward(const Tensor& grad_out, const Tensor& input,
                            const Tensor& weight) {
  const std::size_t c_in = weight.dim(1), c_out = weight.dim(0);
  const std::size_t n = input.size() / c_in;
  if (grad_out.size() != n * c_out) {
    throw std::invalid_argument("linear_backward: grad_out shape " +
                                grad_out.shape_str() + " inconsistent with " +
                                std::to_string(n) + " rows of C_out=" +
                                std::to_string(c_out));
  }

  LinearGrads g{Tensor(input.shape()), Tensor({c_out, c_in}), Tensor({c_out})};
  const double* go = grad_out.data();
  const double* in = input.data();
  const double* wt = weight.data();

#pragma omp parallel for schedule(static)
  for (std::int64_t row = 0; row < static_cast<std::int64_t>(n); ++row) {
    const double* gr = go + static_cast<std::size_t>(row) * c_out;
    double* gi = g.input.data() + static_cast<std::size_t>(row) * c_in;
    for (std::size_t ci = 0; ci < c_in; ++ci) {
      double acc = 0.0;
      for (std::size_t co = 0; co < c_out; ++co) acc += gr[co] * wt[co * c_in + ci];
      gi[ci] = acc;
    }
  }

#pragma omp parallel for schedule(static)
  for (std::int64_t co = 0; co < static_cast<std::int64_t>(c_out); ++co) {
    double* gw = g.weight.data() + static_cast<std::size_t>(co) * c_in;
    double gb = 0.0;
    for (std::size_t row = 0; row < n; ++row) {
      const double gv = go[row * c_out + static_cast<std::size_t>(co)];
      gb += gv;
      const double* ir = in + row * c_in;
      for (std::size_t ci = 0; ci < c_in; ++ci) gw[ci] += gv * ir[ci];
    }
    g.bias[static_cast<std::size_t>(co)] = gb;
  }
  return g;
}

NormState make_norm_state(std::size_t channels) {
  return NormState{Tensor({channels}), Tensor::full({channels}, 1.0)};
}

Tensor norm_act(const Tensor& input, const Tensor& gamma,
                const Tensor& beta_aff, StatsMode mode, double eps,
                NormState* state, NormActCache* cache) {
  if (input.rank() != 3) {
    throw std::invalid_argument("norm_act: input must be [C,H,W], got " +
                                input.shape_str());
  }
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (gamma.dim(0) != c || beta_aff.dim(0) != c) {
    throw std::invalid_argument(
        "norm_act: affine parameters must have length C=" + std::to_string(c) +
        ", got gamma " + gamma.shape_str() + " beta " + beta_aff.shape_str());
  }
  if (!(eps > 0.0)) {
    throw std::invalid_argument("norm_act: eps must be > 0");
  }
  if (mode == StatsMode::kRunning && state == nullptr) {
    throw std::invalid_argument(
        "norm_act: running mode requires a statistics record");
  }
  const std::size_t spatial = h * w;

  Tensor out({c, h, w});
  Tensor mean_t({c}), var_t({c}), inv_std_t({c});
  Tensor normalized({c, h, w}), pre_act({c, h, w});
  const double* in = input.data();

#pragma omp parallel for schedule(static)
  for (std::int64_t ci = 0; ci < static_cast<std::int64_t>(c); ++ci) {
    const std::size_t cc = static_cast<std::size_t>(ci);
    const double* xc = in + cc * spatial;
    double mean, var;
    if (mode == StatsMode::kBatch) {
      double s = 0.0;
      for (std::size_t p = 0; p < spatial; ++p) s += xc[p];
      mean = s / static_cast<double>(spatial);
      double sq = 0.0;
      for (std::size_t p = 0; p < spatial; ++p) {
        const double d = xc[p] - mean;
        sq += d * d;
      }
      var = sq / static_cast<double>(spatial);
    } else {
      mean = state->mean[cc];
      var = state->var[cc];
    }
    const double inv_std = 1.0 / std::sqrt(var + eps);
    mean_t[cc] = mean;
    var_t[cc] = var;
    inv_std_t[cc] = inv_std;

    const double g = gamma[cc], b = beta_aff[cc];
    double* nc = normalized.data() + cc * spatial;
    double* pc = pre_act.data() + cc * spatial;
    double* oc = out.data() + cc * spatial;
    for (std::size_t p = 0; p < spatial; ++p) {
      const double xh = (xc[p] - mean) * inv_std;
      const double z = g * xh + b;
      nc[p] = xh;
      pc[p] = z;
      oc[p] = z > 0.0 ? z : 0.0;
    }
  }

  if (mode == StatsMode::kBatch && state != nullptr) {
    // EMA update, momentum 0.9.
    for (std::size_t cc = 0; cc < c; ++cc) {
      state->mean[cc] = 0.9 * state->mean[cc] + 0.1 * mean_t[cc];
      state->var[cc] = 0.9 * state->var[cc] + 0.1 * var_t[cc];
    }
  }
  if (cache) {
    cache->inv_std = std::move(inv_std_t);
    cache->normalized = std::move(normalized);
    cache->pre_act = std::move(pre_act);
    cache->mode = mode;
  }
  return out;
}

NormActGrads norm_act_backward(const Tensor& grad_out, const Tensor& gamma,
                               const NormActCache& cache) {
  const Tensor& x_hat = cache.normalized;
  const std::size_t c = x_hat.dim(0), h = x_hat.dim(1), w = x_hat.dim(2);
  check_same_shape(grad_out, x_hat, "norm_act_backward");
  const std::size_t spatial = h * w;

  NormActGrads g{Tensor({c, h, w}), Tensor({c}), Tensor({c})};
  const double* go = grad_out.data();
  const double* pa = cache.pre_act.data();
  const double* xh = x_hat.data();

#pragma omp parallel for schedule(static)
  for (std::int64_t ci = 0; ci < static_cast<std::int64_t>(c); ++ci) {
    const std::size_t cc = static_cast<std::size_t>(ci);
    const double inv_std = cache.inv_std[cc];
    const double gam = gamma[cc];
    const double* goc = go + cc * spatial;
    const double* pac = pa + cc * spatial;
    const double* xhc = xh + cc * spatial;
    double* gic = g.input.data() + cc * spatial;

    double sum_dz = 0.0, sum_dz_xhat = 0.0;
    for (std::size_t p = 0; p < spatial; ++p) {
      const double dz = pac[p] > 0.0 ? goc[p] : 0.0;
      sum_dz += dz;
      sum_dz_xhat += dz * xhc[p];
    }
    g.gamma[cc] = sum_dz_xhat;
    g.beta[cc] = sum_dz;

    if (cache.mode == StatsMode::kBatch) {
      const double n = static_cast<double>(spatial);
      for (std::size_t p = 0; p < spatial; ++p) {
        const double dz = pac[p] > 0.0 ? goc[p] : 0.0;
        const double dxhat = dz * gam;
        gic[p] = inv_std *
                 (dxhat - (gam * sum_dz + xhc[p] * gam * sum_dz_xhat) / n);
      }
    } else {
      for (std::size_t p = 0; p < spatial; ++p) {
        const double dz = pac[p] > 0.0 ? goc[p] : 0.0;
        gic[p] = dz * gam * inv_std;
      }
    }
  }
  return g;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  const double* in = x.data();
  double* o = out.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(x.size()); ++i) {
    o[i] = in[i] > 0.0 ? in[i] : 0.0;
  }
  return out;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& pre_act) {
  check_same_shape(grad_out, pre_act, "relu_backward");
  Tensor out(grad_out.shape());
  const double* go = grad_out.data();
  const double* pa = pre_act.data();
  double* o = out.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(out.size()); ++i) {
    o[i] = pa[i] > 0.0 ? go[i] : 0.0;
  }
  return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) pa[i] += pb[i];
}

void axpy_inplace(Tensor& a, double s, const Tensor& b) {
  check_same_shape(a, b, "axpy");
  double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) pa[i] += s * pb[i];
}

void scale_inplace(Tensor& a, double s) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] *= s;
}

double sum(const Tensor& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
  return s;
}

double dot(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Tensor avg_pool2d(const Tensor& input, std::size_t window, std::size_t stride) {
  if (input.rank() != 3) {
    throw std::invalid_argument("avg_pool2d: input must be [C,H,W], got " +
                                input.shape_str());
  }
  if (window == 0 || stride == 0) {
    throw std::invalid_argument("avg_pool2d: window and stride must be > 0");
  }
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t oh = (h + stride - 1) / stride;
  const std::size_t ow = (w + stride - 1) / stride;

  Tensor out({c, oh, ow});
#pragma omp parallel for schedule(static)
  for (std::int64_t ci = 0; ci < static_cast<std::int64_t>(c); ++ci) {
    const std::size_t cc = static_cast<std::size_t>(ci);
    const double* ic = input.data() + cc * h * w;
    double* oc = out.data() + cc * oh * ow;
    for (std::size_t y = 0; y < oh; ++y) {
      const std::size_t y0 = y * stride;
      const std::size_t y1 = std::min(y0 + window, h);
      for (std::size_t x = 0; x < ow; ++x) {
        const std::size_t x0 = x * stride;
        const std::size_t x1 = std::min(x0 + window, w);
        double acc = 0.0;
        for (std::size_t iy = y0; iy < y1; ++iy) {
          for (std::size_t ix = x0; ix < x1; ++ix) acc += ic[iy * w + ix];
        }
        oc[y * ow + x] = acc / static_cast<double>((y1 - y0) * (x1 - x0));
      }
    }
  }
  return out;
}

Tensor upsample_nearest2x(const Tensor& input, std::size_t out_h,
                          std::size_t out_w) {
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (out_h > 2 * h || out_w > 2 * w) {
    throw std::invalid_argument("upsample_nearest2x: target " +
                                std::to_string(out_h) + "x" +
                                std::to_string(out_w) +
                                " exceeds 2x source " + input.shape_str());
  }
  Tensor out({c, out_h, out_w});
#pragma omp parallel for schedule(static)
  for (std::int64_t ci = 0; ci < static_cast<std::int64_t>(c); ++ci) {
    const std::size_t cc = static_cast<std::size_t>(ci);
    const double* ic = input.data() + cc * h * w;
    double* oc = out.data() + cc * out_h * out_w;
    for (std::size_t y = 0; y < out_h; ++y) {
      const std::size_t sy = std::min(y / 2, h - 1);
      for (std::size_t x = 0; x < out_w; ++x) {
        const std::size_t sx = std::min(x / 2, w - 1);
        oc[y * out_w + x] = ic[sy * w + sx];
      }
    }
  }
  return out;
}

Tensor upsample_nearest2x_backward(const Tensor& grad_out, std::size_t in_h,
                                   std::size_t in_w) {
  const std::size_t c = grad_out.dim(0);
  const std::size_t oh = grad_out.dim(1), ow = grad_out.dim(2);
  Tensor g({c, in_h, in_w});
#pragma omp parallel for schedule(static)
  for (std::int64_t ci = 0; ci < static_cast<std::int64_t>(c); ++ci) {
    const std::size_t cc = static_cast<std::size_t>(ci);
    const double* goc = grad_out.data() + cc * oh * ow;
    double* gc = g.data() + cc * in_h * in_w;
    for (std::size_t y = 0; y < oh; ++y) {
      const std::size_t sy = std::min(y / 2, in_h - 1);
      for (std::size_t x = 0; x < ow; ++x) {
        const std::size_t sx = std::min(x / 2, in_w - 1);
        gc[sy * in_w + sx] += goc[y * ow + x];
      }
    }
  }
  return g;
}

}  // namespace decodet
