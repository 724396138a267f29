#include "pitta/ops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace pitta::ops {

namespace {

void require_same_shape(const char* op, const TensorPtr& a, const TensorPtr& b) {
  if (a->shape != b->shape) {
    throw InputError(std::string(op) + ": shape mismatch " + shape_str(a->shape) + " vs " +
                     shape_str(b->shape));
  }
}

bool broadcast_pair(const char* op, const TensorPtr& a, const TensorPtr& b) {
  // returns true when one side is a broadcast scalar
  if (a->shape == b->shape) return false;
  if (a->numel() == 1 || b->numel() == 1) return true;
  require_same_shape(op, a, b);
  return false;
}

void accumulate_to(const TensorPtr& t, const std::vector<Real>& g) {
  if (!wants_grad(t)) return;
  t->ensure_grad();
  for (size_t i = 0; i < g.size(); ++i) t->grad[i] += g[i];
}

int out_dim(int dim, int k, int stride, int pad) { return (dim + 2 * pad - k) / stride + 1; }

}  // namespace

TensorPtr add(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  bool bc = broadcast_pair("add", a, b);
  const TensorPtr& big = (bc && a->numel() == 1) ? b : a;
  auto out = Tensor::zeros(big->shape);
  const int n = big->numel();
  if (!bc) {
    for (int i = 0; i < n; ++i) out->data[i] = a->data[i] + b->data[i];
  } else if (a->numel() == 1) {
    for (int i = 0; i < n; ++i) out->data[i] = a->data[0] + b->data[i];
  } else {
    for (int i = 0; i < n; ++i) out->data[i] = a->data[i] + b->data[0];
  }
  if (wants_grad(a) || wants_grad(b)) {
    tape.record(OpId::add, {a, b}, out, [a, b, out] {
      for (const TensorPtr& t : {a, b}) {
        if (!wants_grad(t)) continue;
        t->ensure_grad();
        if (t->numel() == out->numel()) {
          for (int i = 0; i < out->numel(); ++i) t->grad[i] += out->grad[i];
        } else {
          for (int i = 0; i < out->numel(); ++i) t->grad[0] += out->grad[i];
        }
      }
    });
  }
  return out;
}

TensorPtr sub(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  bool bc = broadcast_pair("sub", a, b);
  const TensorPtr& big = (bc && a->numel() == 1) ? b : a;
  auto out = Tensor::zeros(big->shape);
  const int n = big->numel();
  if (!bc) {
    for (int i = 0; i < n; ++i) out->data[i] = a->data[i] - b->data[i];
  } else if (a->numel() == 1) {
    for (int i = 0; i < n; ++i) out->data[i] = a->data[0] - b->data[i];
  } else {
    for (int i = 0; i < n; ++i) out->data[i] = a->data[i] - b->data[0];
  }
  if (wants_grad(a) || wants_grad(b)) {
    tape.record(OpId::sub, {a, b}, out, [a, b, out] {
      if (wants_grad(a)) {
        a->ensure_grad();
        if (a->numel() == out->numel()) {
          for (int i = 0; i < out->numel(); ++i) a->grad[i] += out->grad[i];
        } else {
          for (int i = 0; i < out->numel(); ++i) a->grad[0] += out->grad[i];
        }
      }
      if (wants_grad(b)) {
        b->ensure_grad();
        if (b->numel() == out->numel()) {
          for (int i = 0; i < out->numel(); ++i) b->grad[i] -= out->grad[i];
        } else {
          for (int i = 0; i < out->numel(); ++i) b->grad[0] -= out->grad[i];
        }
      }
    });
  }
  return out;
}

TensorPtr mul(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  bool bc = broadcast_pair("mul", a, b);
  const TensorPtr& big = (bc && a->numel() == 1) ? b : a;
  auto out = Tensor::zeros(big->shape);
  const int n = big->numel();
  if (!bc) {
    for (int i = 0; i < n; ++i) out->data[i] = a->data[i] * b->data[i];
  } else if (a->numel() == 1) {
    for (int i = 0; i < n; ++i) out->data[i] = a->data[0] * b->data[i];
  } else {
    for (int i = 0; i < n; ++i) out->data[i] = a->data[i] * b->data[0];
  }
  if (wants_grad(a) || wants_grad(b)) {
    tape.record(OpId::mul, {a, b}, out, [a, b, out] {
      const int n = out->numel();
      if (wants_grad(a)) {
        a->ensure_grad();
        if (a->numel() == n) {
          if (b->numel() == n) {
            for (int i = 0; i < n; ++i) a->grad[i] += out->grad[i] * b->data[i];
          } else {
            for (int i = 0; i < n; ++i) a->grad[i] += out->grad[i] * b->data[0];
          }
        } else {
          for (int i = 0; i < n; ++i) a->grad[0] += out->grad[i] * b->data[i];
        }
      }
      if (wants_grad(b)) {
        b->ensure_grad();
        if (b->numel() == n) {
          if (a->numel() == n) {
            for (int i = 0; i < n; ++i) b->grad[i] += out->grad[i] * a->data[i];
          } else {
            for (int i = 0; i < n; ++i) b->grad[i] += out->grad[i] * a->data[0];
          }
        } else {
          for (int i = 0; i < n; ++i) b->grad[0] += out->grad[i] * a->data[i];
        }
      }
    });
  }
  return out;
}

TensorPtr scale(Tape& tape, const TensorPtr& a, Real c) {
  auto out = Tensor::zeros(a->shape);
  for (int i = 0; i < a->numel(); ++i) out->data[i] = c * a->data[i];
  if (wants_grad(a)) {
    tape.record(OpId::scale, {a}, out, [a, out, c] {
      a->ensure_grad();
      for (int i = 0; i < out->numel(); ++i) a->grad[i] += c * out->grad[i];
    });
  }
  return out;
}

TensorPtr abs(Tape& tape, const TensorPtr& a) {
  auto out = Tensor::zeros(a->shape);
  for (int i = 0; i < a->numel(); ++i) out->data[i] = std::fabs(a->data[i]);
  if (wants_grad(a)) {
    tape.record(OpId::abs, {a}, out, [a, out] {
      a->ensure_grad();
      for (int i = 0; i < out->numel(); ++i) {
        const Real x = a->data[i];
        const Real s = x > Real(0) ? Real(1) : (x < Real(0) ? Real(-1) : Real(0));
        a->grad[i] += s * out->grad[i];
      }
    });
  }
  return out;
}

TensorPtr relu(Tape& tape, const TensorPtr& a) {
  auto out = Tensor::zeros(a->shape);
  for (int i = 0; i < a->numel(); ++i) out->data[i] = a->data[i] > Real(0) ? a->data[i] : Real(0);
  if (wants_grad(a)) {
    tape.record(OpId::relu, {a}, out, [a, out] {
      a->ensure_grad();
      for (int i = 0; i < out->numel(); ++i) {
        if (a->data[i] > Real(0)) a->grad[i] += out->grad[i];
      }
    });
  }
  return out;
}

TensorPtr sigmoid(Tape& tape, const TensorPtr& a) {
  auto out = Tensor::zeros(a->shape);
  for (int i = 0; i < a->numel(); ++i) {
    const Real x = a->data[i];
    if (x >= Real(0)) {
      out->data[i] = Real(1) / (Real(1) + std::exp(-x));
    } else {
      const Real e = std::exp(x);
      out->data[i] = e / (Real(1) + e);
    }
  }
  if (wants_grad(a)) {
    tape.record(OpId::sigmoid, {a}, out, [a, out] {
      a->ensure_grad();
      for (int i = 0; i < out->numel(); ++i) {
        const Real s = out->data[i];
        a->grad[i] += s * (Real(1) - s) * out->grad[i];
      }
    });
  }
  return out;
}

TensorPtr sum(Tape& tape, const TensorPtr& a) {
  Real acc = 0;
  for (int i = 0; i < a->numel(); ++i) acc += a->data[i];
  auto out = Tensor::scalar(acc);
  if (wants_grad(a)) {
    tape.record(OpId::sum, {a}, out, [a, out] {
      a->ensure_grad();
      const Real g = out->grad[0];
      for (int i = 0; i < a->numel(); ++i) a->grad[i] += g;
    });
  }
  return out;
}

TensorPtr conv2d(Tape& tape, const TensorPtr& input, const TensorPtr& kernel, int stride,
                 int pad) {
  if (input->ndim() != 3) {
    throw InputError("conv2d: input must be HxWxC, got " + shape_str(input->shape));
  }
  if (kernel->ndim() != 4) {
    throw InputError("conv2d: kernel must be kxkxCinxCout, got " + shape_str(kernel->shape));
  }
  const int H = input->dim(0), W = input->dim(1), Ci = input->dim(2);
  const int k = kernel->dim(0);
  if (kernel->dim(1) != k) {
    throw InputError("conv2d: kernel must be square, got " + shape_str(kernel->shape));
  }
  if (k % 2 == 0) throw InputError("conv2d: kernel size must be odd, got " + std::to_string(k));
  if (kernel->dim(2) != Ci) {
    throw InputError("conv2d: kernel input channels " + std::to_string(kernel->dim(2)) +
                     " != input channels " + std::to_string(Ci));
  }
  if (H < k || W < k) {
    throw InputError("conv2d: input " + shape_str(input->shape) + " smaller than kernel " +
                     std::to_string(k));
  }
  if (stride < 1) throw InputError("conv2d: stride must be positive");
  if (pad < 0) throw InputError("conv2d: pad must be non-negative");
  const int Co = kernel->dim(3);
  const int Ho = out_dim(H, k, stride, pad);
  const int Wo = out_dim(W, k, stride, pad);

  auto out = Tensor::zeros({Ho, Wo, Co});
  const Real* in = input->data.data();
  const Real* w = kernel->data.data();
  Real* o = out->data.data();
  std::vector<Real> acc(static_cast<size_t>(Co));
  for (int oy = 0; oy < Ho; ++oy) {
    for (int ox = 0; ox < Wo; ++ox) {
      std::fill(acc.begin(), acc.end(), Real(0));
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * stride + ky - pad;
        if (iy < 0 || iy >= H) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * stride + kx - pad;
          if (ix < 0 || ix >= W) continue;
          const Real* inp = in + (static_cast<size_t>(iy) * W + ix) * Ci;
          const Real* wp = w + (static_cast<size_t>(ky) * k + kx) * Ci * Co;
          for (int ci = 0; ci < Ci; ++ci) {
            const Real v = inp[ci];
            const Real* wrow = wp + static_cast<size_t>(ci) * Co;
            for (int co = 0; co < Co; ++co) acc[static_cast<size_t>(co)] += v * wrow[co];
          }
        }
      }
      Real* orow = o + (static_cast<size_t>(oy) * Wo + ox) * Co;
      for (int co = 0; co < Co; ++co) orow[co] = acc[static_cast<size_t>(co)];
    }
  }

  if (wants_grad(input) || wants_grad(kernel)) {
    tape.record(OpId::conv2d, {input, kernel}, out,
                [input, kernel, out, stride, pad, H, W, Ci, k, Co, Ho, Wo] {
                  const Real* g = out->grad.data();
                  if (wants_grad(input)) {
                    input->ensure_grad();
                    Real* gi = input->grad.data();
                    const Real* w = kernel->data.data();
                    for (int iy = 0; iy < H; ++iy) {
                      for (int ix = 0; ix < W; ++ix) {
                        Real* girow = gi + (static_cast<size_t>(iy) * W + ix) * Ci;
                        for (int ky = 0; ky < k; ++ky) {
                          const int oyn = iy + pad - ky;
                          if (oyn < 0 || oyn % stride != 0) continue;
                          const int oy = oyn / stride;
                          if (oy >= Ho) continue;
                          for (int kx = 0; kx < k; ++kx) {
                            const int oxn = ix + pad - kx;
                            if (oxn < 0 || oxn % stride != 0) continue;
                            const int ox = oxn / stride;
                            if (ox >= Wo) continue;
                            const Real* grow = g + (static_cast<size_t>(oy) * Wo + ox) * Co;
                            const Real* wp =
                                w + (static_cast<size_t>(ky) * k + kx) * Ci * Co;
                            for (int ci = 0; ci < Ci; ++ci) {
                              const Real* wrow = wp + static_cast<size_t>(ci) * Co;
                              Real acc = 0;
                              for (int co = 0; co < Co; ++co) acc += grow[co] * wrow[co];
                              girow[ci] += acc;
                            }
                          }
                        }
                      }
                    }
                  }
                  if (wants_grad(kernel)) {
                    kernel->ensure_grad();
                    Real* gw = kernel->grad.data();
                    const Real* in = input->data.data();
                    for (int oy = 0; oy < Ho; ++oy) {
                      for (int ox = 0; ox < Wo; ++ox) {
                        const Real* grow = g + (static_cast<size_t>(oy) * Wo + ox) * Co;
                        for (int ky = 0; ky < k; ++ky) {
                          const int iy = oy * stride + ky - pad;
                          if (iy < 0 || iy >= H) continue;
                          for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * stride + kx - pad;
                            if (ix < 0 || ix >= W) continue;
                            const Real* inp = in + (static_cast<size_t>(iy) * W + ix) * Ci;
                            Real* gwp = gw + (static_cast<size_t>(ky) * k + kx) * Ci * Co;
                            for (int ci = 0; ci < Ci; ++ci) {
                              const Real v = inp[ci];
                              Real* gwrow = gwp + static_cast<size_t>(ci) * Co;
                              for (int co = 0; co < Co; ++co) gwrow[co] += v * grow[co];
                            }
                          }
                        }
                      }
                    }
                  }
                });
  }
  return out;
}

TensorPtr add_channel_bias(Tape& tape, const TensorPtr& input, const TensorPtr& bias) {
  if (input->ndim() != 3) {
    throw InputError("add_channel_bias: input must be HxWxC, got " + shape_str(input->shape));
  }
  const int C = input->dim(2);
  if (bias->numel() != C) {
    throw InputError("add_channel_bias: bias length " + std::to_string(bias->numel()) +
                     " != channels " + std::to_string(C));
  }
  auto out = Tensor::zeros(input->shape);
  const int pixels = input->dim(0) * input->dim(1);
  for (int p = 0; p < pixels; ++p) {
    for (int c = 0; c < C; ++c) {
      out->data[static_cast<size_t>(p) * C + c] =
          input->data[static_cast<size_t>(p) * C + c] + bias->data[static_cast<size_t>(c)];
    }
  }
  if (wants_grad(input) || wants_grad(bias)) {
    tape.record(OpId::add_channel_bias, {input, bias}, out, [input, bias, out, pixels, C] {
      if (wants_grad(input)) {
        input->ensure_grad();
        for (int i = 0; i < out->numel(); ++i) input->grad[i] += out->grad[i];
      }
      if (wants_grad(bias)) {
        bias->ensure_grad();
        for (int p = 0; p < pixels; ++p) {
          for (int c = 0; c < C; ++c) {
            bias->grad[static_cast<size_t>(c)] += out->grad[static_cast<size_t>(p) * C + c];
          }
        }
      }
    });
  }
  return out;
}

TensorPtr batch_norm(Tape& tape, const TensorPtr& x, const TensorPtr& gamma,
                     const TensorPtr& beta, const TensorPtr& running_mean,
                     const TensorPtr& running_var, Real eps, Real momentum, BnMode mode) {
  if (x->ndim() != 3) {
    throw InputError("batch_norm: input must be HxWxC, got " + shape_str(x->shape));
  }
  if (eps <= Real(0)) throw ConfigError("batch_norm: eps must be positive");
  const int C = x->dim(2);
  for (const auto& [t, nm] : {std::pair{gamma, "gamma"}, {beta, "beta"}, {running_mean, "running_mean"},
                              {running_var, "running_var"}}) {
    if (t->numel() != C) {
      throw InputError(std::string("batch_norm: ") + nm + " length " +
                       std::to_string(t->numel()) + " != channels " + std::to_string(C));
    }
  }
  const int M = x->dim(0) * x->dim(1);

  std::vector<Real> mean(static_cast<size_t>(C)), inv_std(static_cast<size_t>(C));
  if (mode == BnMode::train) {
    std::vector<Real> var(static_cast<size_t>(C), Real(0));
    for (int c = 0; c < C; ++c) {
      Real m = 0;
      for (int p = 0; p < M; ++p) m += x->data[static_cast<size_t>(p) * C + c];
      m /= static_cast<Real>(M);
      Real v = 0;
      for (int p = 0; p < M; ++p) {
        const Real d = x->data[static_cast<size_t>(p) * C + c] - m;
        v += d * d;
      }
      v /= static_cast<Real>(M);
      mean[static_cast<size_t>(c)] = m;
      var[static_cast<size_t>(c)] = v;
      inv_std[static_cast<size_t>(c)] = Real(1) / std::sqrt(v + eps);
    }
    // running buffers track batch statistics; variance stored unbiased
    const Real unbias = M > 1 ? static_cast<Real>(M) / static_cast<Real>(M - 1) : Real(1);
    for (int c = 0; c < C; ++c) {
      running_mean->data[static_cast<size_t>(c)] =
          (Real(1) - momentum) * running_mean->data[static_cast<size_t>(c)] +
          momentum * mean[static_cast<size_t>(c)];
      running_var->data[static_cast<size_t>(c)] =
          (Real(1) - momentum) * running_var->data[static_cast<size_t>(c)] +
          momentum * var[static_cast<size_t>(c)] * unbias;
    }
  } else {
    for (int c = 0; c < C; ++c) {
      mean[static_cast<size_t>(c)] = running_mean->data[static_cast<size_t>(c)];
      inv_std[static_cast<size_t>(c)] =
          Real(1) / std::sqrt(running_var->data[static_cast<size_t>(c)] + eps);
    }
  }

  auto out = Tensor::zeros(x->shape);
  for (int p = 0; p < M; ++p) {
    for (int c = 0; c < C; ++c) {
      const size_t i = static_cast<size_t>(p) * C + c;
      const Real xhat = (x->data[i] - mean[static_cast<size_t>(c)]) * inv_std[static_cast<size_t>(c)];
      out->data[i] = gamma->data[static_cast<size_t>(c)] * xhat + beta->data[static_cast<size_t>(c)];
    }
  }

  if (wants_grad(x) || wants_grad(gamma) || wants_grad(beta)) {
    tape.record(OpId::batch_norm, {x, gamma, beta}, out,
                [x, gamma, beta, out, mean, inv_std, M, C, mode] {
                  const Real* g = out->grad.data();
                  // per-channel reductions of g and g*xhat
                  std::vector<Real> sum_g(static_cast<size_t>(C), Real(0));
                  std::vector<Real> sum_gx(static_cast<size_t>(C), Real(0));
                  for (int p = 0; p < M; ++p) {
                    for (int c = 0; c < C; ++c) {
                      const size_t i = static_cast<size_t>(p) * C + c;
                      const Real xhat =
                          (x->data[i] - mean[static_cast<size_t>(c)]) * inv_std[static_cast<size_t>(c)];
                      sum_g[static_cast<size_t>(c)] += g[i];
                      sum_gx[static_cast<size_t>(c)] += g[i] * xhat;
                    }
                  }
                  if (wants_grad(gamma)) {
                    gamma->ensure_grad();
                    for (int c = 0; c < C; ++c) gamma->grad[static_cast<size_t>(c)] += sum_gx[static_cast<size_t>(c)];
                  }
                  if (wants_grad(beta)) {
                    beta->ensure_grad();
                    for (int c = 0; c < C; ++c) beta->grad[static_cast<size_t>(c)] += sum_g[static_cast<size_t>(c)];
                  }
                  if (wants_grad(x)) {
                    x->ensure_grad();
                    if (mode == BnMode::eval) {
                      for (int p = 0; p < M; ++p) {
                        for (int c = 0; c < C; ++c) {
                          const size_t i = static_cast<size_t>(p) * C + c;
                          x->grad[i] += g[i] * gamma->data[static_cast<size_t>(c)] *
                                        inv_std[static_cast<size_t>(c)];
                        }
                      }
                    } else {
                      const Real invM = Real(1) / static_cast<Real>(M);
                      for (int p = 0; p < M; ++p) {
                        for (int c = 0; c < C; ++c) {
                          const size_t i = static_cast<size_t>(p) * C + c;
                          const Real xhat = (x->data[i] - mean[static_cast<size_t>(c)]) *
                                            inv_std[static_cast<size_t>(c)];
                          x->grad[i] += gamma->data[static_cast<size_t>(c)] *
                                        inv_std[static_cast<size_t>(c)] *
                                        (g[i] - invM * sum_g[static_cast<size_t>(c)] -
                                         xhat * invM * sum_gx[static_cast<size_t>(c)]);
                        }
                      }
                    }
                  }
                });
  }
  return out;
}

TensorPtr upsample_bilinear(Tape& tape, const TensorPtr& input, int factor) {
  if (input->ndim() != 3) {
    throw InputError("upsample_bilinear: input must be HxWxC, got " + shape_str(input->shape));
  }
  if (factor < 1) throw InputError("upsample_bilinear: factor must be >= 1");
  const int H = input->dim(0), W = input->dim(1), C = input->dim(2);
  const int Ho = H * factor, Wo = W * factor;

  // sampling tables, align_corners=false
  auto make_table = [factor](int out_n, int in_n, std::vector<int>& i0, std::vector<int>& i1,
                             std::vector<Real>& w) {
    i0.resize(static_cast<size_t>(out_n));
    i1.resize(static_cast<size_t>(out_n));
    w.resize(static_cast<size_t>(out_n));
    for (int o = 0; o < out_n; ++o) {
      Real src = (static_cast<Real>(o) + Real(0.5)) / static_cast<Real>(factor) - Real(0.5);
      if (src < Real(0)) src = Real(0);
      const Real hi = static_cast<Real>(in_n - 1);
      if (src > hi) src = hi;
      int lo = static_cast<int>(src);
      if (lo > in_n - 1) lo = in_n - 1;
      i0[static_cast<size_t>(o)] = lo;
      i1[static_cast<size_t>(o)] = std::min(lo + 1, in_n - 1);
      w[static_cast<size_t>(o)] = src - static_cast<Real>(lo);
    }
  };
  std::vector<int> r0, r1, c0, c1;
  std::vector<Real> wr, wc;
  make_table(Ho, H, r0, r1, wr);
  make_table(Wo, W, c0, c1, wc);

  auto out = Tensor::zeros({Ho, Wo, C});
  for (int ro = 0; ro < Ho; ++ro) {
    const Real fr = wr[static_cast<size_t>(ro)];
    for (int co = 0; co < Wo; ++co) {
      const Real fc = wc[static_cast<size_t>(co)];
      const Real w00 = (Real(1) - fr) * (Real(1) - fc);
      const Real w01 = (Real(1) - fr) * fc;
      const Real w10 = fr * (Real(1) - fc);
      const Real w11 = fr * fc;
      for (int ch = 0; ch < C; ++ch) {
        out->at(ro, co, ch) = w00 * input->at(r0[static_cast<size_t>(ro)], c0[static_cast<size_t>(co)], ch) +
                              w01 * input->at(r0[static_cast<size_t>(ro)], c1[static_cast<size_t>(co)], ch) +
                              w10 * input->at(r1[static_cast<size_t>(ro)], c0[static_cast<size_t>(co)], ch) +
                              w11 * input->at(r1[static_cast<size_t>(ro)], c1[static_cast<size_t>(co)], ch);
      }
    }
  }

  if (wants_grad(input)) {
    tape.record(OpId::upsample_bilinear, {input}, out,
                [input, out, r0, r1, c0, c1, wr, wc, Ho, Wo, C] {
                  input->ensure_grad();
                  for (int ro = 0; ro < Ho; ++ro) {
                    const Real fr = wr[static_cast<size_t>(ro)];
                    for (int co = 0; co < Wo; ++co) {
                      const Real fc = wc[static_cast<size_t>(co)];
                      const Real w00 = (Real(1) - fr) * (Real(1) - fc);
                      const Real w01 = (Real(1) - fr) * fc;
                      const Real w10 = fr * (Real(1) - fc);
                      const Real w11 = fr * fc;
                      for (int ch = 0; ch < C; ++ch) {
                        const Real g = out->grad[static_cast<size_t>((ro * Wo + co) * C + ch)];
                        auto gi = [&](int r, int c) -> Real& {
                          return input->grad[static_cast<size_t>(
                              (r * input->dim(1) + c) * C + ch)];
                        };
                        gi(r0[static_cast<size_t>(ro)], c0[static_cast<size_t>(co)]) += w00 * g;
                        gi(r0[static_cast<size_t>(ro)], c1[static_cast<size_t>(co)]) += w01 * g;
                        gi(r1[static_cast<size_t>(ro)], c0[static_cast<size_t>(co)]) += w10 * g;
                        gi(r1[static_cast<size_t>(ro)], c1[static_cast<size_t>(co)]) += w11 * g;
                      }
                    }
                  }
                });
  }
  return out;
}

TensorPtr shift_clamp(Tape& tape, const TensorPtr& x, int dr, int dc) {
  if (x->ndim() != 2) {
    throw InputError("shift_clamp: input must be HxW, got " + shape_str(x->shape));
  }
  const int H = x->dim(0), W = x->dim(1);
  auto out = Tensor::zeros(x->shape);
  for (int r = 0; r < H; ++r) {
    const int sr = std::clamp(r + dr, 0, H - 1);
    for (int c = 0; c < W; ++c) {
      const int sc = std::clamp(c + dc, 0, W - 1);
      out->at(r, c) = x->at(sr, sc);
    }
  }
  if (wants_grad(x)) {
    tape.record(OpId::shift_clamp, {x}, out, [x, out, dr, dc, H, W] {
      x->ensure_grad();
      for (int r = 0; r < H; ++r) {
        const int sr = std::clamp(r + dr, 0, H - 1);
        for (int c = 0; c < W; ++c) {
          const int sc = std::clamp(c + dc, 0, W - 1);
          x->grad[static_cast<size_t>(sr * W + sc)] += out->grad[static_cast<size_t>(r * W + c)];
        }
      }
    });
  }
  return out;
}

TensorPtr concat_channels(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  if (a->ndim() != 3 || b->ndim() != 3 || a->dim(0) != b->dim(0) || a->dim(1) != b->dim(1)) {
    throw InputError("concat_channels: spatial shape mismatch " + shape_str(a->shape) + " vs " +
                     shape_str(b->shape));
  }
  const int H = a->dim(0), W = a->dim(1), Ca = a->dim(2), Cb = b->dim(2);
  auto out = Tensor::zeros({H, W, Ca + Cb});
  const int pixels = H * W;
  for (int p = 0; p < pixels; ++p) {
    for (int c = 0; c < Ca; ++c) {
      out->data[static_cast<size_t>(p) * (Ca + Cb) + c] = a->data[static_cast<size_t>(p) * Ca + c];
    }
    for (int c = 0; c < Cb; ++c) {
      out->data[static_cast<size_t>(p) * (Ca + Cb) + Ca + c] =
          b->data[static_cast<size_t>(p) * Cb + c];
    }
  }
  if (wants_grad(a) || wants_grad(b)) {
    tape.record(OpId::concat_channels, {a, b}, out, [a, b, out, pixels, Ca, Cb] {
      if (wants_grad(a)) {
        a->ensure_grad();
        for (int p = 0; p < pixels; ++p) {
          for (int c = 0; c < Ca; ++c) {
            a->grad[static_cast<size_t>(p) * Ca + c] +=
                out->grad[static_cast<size_t>(p) * (Ca + Cb) + c];
          }
        }
      }
      if (wants_grad(b)) {
        b->ensure_grad();
        for (int p = 0; p < pixels; ++p) {
          for (int c = 0; c < Cb; ++c) {
            b->grad[static_cast<size_t>(p) * Cb + c] +=
                out->grad[static_cast<size_t>(p) * (Ca + Cb) + Ca + c];
          }
        }
      }
    });
  }
  return out;
}

TensorPtr channel_mean(Tape& tape, const TensorPtr& image) {
  if (image->ndim() != 3) {
    throw InputError("channel_mean: input must be HxWxC, got " + shape_str(image->shape));
  }
  const int H = image->dim(0), W = image->dim(1), C = image->dim(2);
  auto out = Tensor::zeros({H, W});
  const Real inv = Real(1) / static_cast<Real>(C);
  for (int p = 0; p < H * W; ++p) {
    Real acc = 0;
    for (int c = 0; c < C; ++c) acc += image->data[static_cast<size_t>(p) * C + c];
    out->data[static_cast<size_t>(p)] = acc * inv;
  }
  if (wants_grad(image)) {
    tape.record(OpId::channel_mean, {image}, out, [image, out, H, W, C, inv] {
      image->ensure_grad();
      for (int p = 0; p < H * W; ++p) {
        const Real g = out->grad[static_cast<size_t>(p)] * inv;
        for (int c = 0; c < C; ++c) image->grad[static_cast<size_t>(p) * C + c] += g;
      }
    });
  }
  return out;
}

TensorPtr disparity_to_depth(Tape& tape, const TensorPtr& disp, Real min_depth, Real max_depth) {
  if (min_depth <= Real(0) || max_depth <= min_depth) {
    throw ConfigError("disparity_to_depth: need 0 < min_depth < max_depth");
  }
  int H, W;
  if (disp->ndim() == 2) {
    H = disp->dim(0);
    W = disp->dim(1);
  } else if (disp->ndim() == 3 && disp->dim(2) == 1) {
    H = disp->dim(0);
    W = disp->dim(1);
  } else {
    throw InputError("disparity_to_depth: expected HxW or HxWx1, got " + shape_str(disp->shape));
  }
  const Real a = Real(1) / max_depth;
  const Real b = Real(1) / min_depth - Real(1) / max_depth;
  auto out = Tensor::zeros({H, W});
  for (int i = 0; i < out->numel(); ++i) {
    out->data[static_cast<size_t>(i)] = Real(1) / (a + b * disp->data[static_cast<size_t>(i)]);
  }
  if (wants_grad(disp)) {
    tape.record(OpId::disparity_to_depth, {disp}, out, [disp, out, b] {
      disp->ensure_grad();
      for (int i = 0; i < out->numel(); ++i) {
        const Real d = out->data[static_cast<size_t>(i)];
        disp->grad[static_cast<size_t>(i)] -= b * d * d * out->grad[static_cast<size_t>(i)];
      }
    });
  }
  return out;
}

}  // namespace pitta::ops
