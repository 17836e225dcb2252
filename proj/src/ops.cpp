// Copyright 2026 The resim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "resim/ops.hpp"

#include <algorithm>
#include <cmath>

namespace resim {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw ShapeMismatch(msg);
}

void maybe_check_finite(const Tensor& t, const char* what) {
  if (debug_checks()) t.check_finite(what);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "add: shapes differ");
  std::vector<double> out(a.values());
  const double* pb = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] += pb[i];
  Tensor y = detail::make_tensor(a.shape(), std::move(out));
  auto ai = a.impl(), bi = b.impl();
  detail::attach(y, {a, b}, [ai, bi](TensorImpl& o) {
    if (ai->requires_grad) {
      auto& g = detail::ensure_grad(*ai);
      for (size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
    if (bi->requires_grad) {
      auto& g = detail::ensure_grad(*bi);
      for (size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
  });
  maybe_check_finite(y, "add");
  return y;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "sub: shapes differ");
  std::vector<double> out(a.values());
  const double* pb = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] -= pb[i];
  Tensor y = detail::make_tensor(a.shape(), std::move(out));
  auto ai = a.impl(), bi = b.impl();
  detail::attach(y, {a, b}, [ai, bi](TensorImpl& o) {
    if (ai->requires_grad) {
      auto& g = detail::ensure_grad(*ai);
      for (size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
    if (bi->requires_grad) {
      auto& g = detail::ensure_grad(*bi);
      for (size_t i = 0; i < g.size(); ++i) g[i] -= o.grad[i];
    }
  });
  return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "mul: shapes differ");
  std::vector<double> out(a.values());
  const double* pb = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] *= pb[i];
  Tensor y = detail::make_tensor(a.shape(), std::move(out));
  auto ai = a.impl(), bi = b.impl();
  detail::attach(y, {a, b}, [ai, bi](TensorImpl& o) {
    if (ai->requires_grad) {
      auto& g = detail::ensure_grad(*ai);
      const auto& bd = bi->data;
      for (size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * bd[i];
    }
    if (bi->requires_grad) {
      auto& g = detail::ensure_grad(*bi);
      const auto& ad = ai->data;
      for (size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * ad[i];
    }
  });
  return y;
}

Tensor scalar_mul(const Tensor& x, double s) {
  std::vector<double> out(x.values());
  for (double& v : out) v *= s;
  Tensor y = detail::make_tensor(x.shape(), std::move(out));
  auto xi = x.impl();
  detail::attach(y, {x}, [xi, s](TensorImpl& o) {
    auto& g = detail::ensure_grad(*xi);
    for (size_t i = 0; i < g.size(); ++i) g[i] += s * o.grad[i];
  });
  return y;
}

Tensor scalar_add(const Tensor& x, double s) {
  std::vector<double> out(x.values());
  for (double& v : out) v += s;
  Tensor y = detail::make_tensor(x.shape(), std::move(out));
  auto xi = x.impl();
  detail::attach(y, {x}, [xi](TensorImpl& o) {
    auto& g = detail::ensure_grad(*xi);
    for (size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
  });
  return y;
}

Tensor sum_all(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  Tensor y = detail::make_tensor({1}, {s});
  auto xi = x.impl();
  detail::attach(y, {x}, [xi](TensorImpl& o) {
    auto& g = detail::ensure_grad(*xi);
    for (double& v : g) v += o.grad[0];
  });
  return y;
}

Tensor mean_all(const Tensor& x) {
  const double inv = 1.0 / static_cast<double>(x.numel());
  double s = 0.0;
  for (double v : x.values()) s += v;
  Tensor y = detail::make_tensor({1}, {s * inv});
  auto xi = x.impl();
  detail::attach(y, {x}, [xi, inv](TensorImpl& o) {
    auto& g = detail::ensure_grad(*xi);
    for (double& v : g) v += inv * o.grad[0];
  });
  return y;
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.values());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  Tensor y = detail::make_tensor(x.shape(), std::move(out));
  auto xi = x.impl();
  detail::attach(y, {x}, [xi](TensorImpl& o) {
    auto& g = detail::ensure_grad(*xi);
    const auto& xd = xi->data;
    for (size_t i = 0; i < g.size(); ++i) {
      if (xd[i] > 0.0) g[i] += o.grad[i];
    }
  });
  return y;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const std::optional<Tensor>& bias, int stride,
              int pad) {
  require(x.ndim() == 4, "conv2d: input must be NCHW");
  require(w.ndim() == 4, "conv2d: weight must be OIKK");
  require(x.dim(1) == w.dim(1), "conv2d: channel mismatch between input and weight");
  if (stride < 1 || pad < 0) throw ShapeMismatch("conv2d: stride must be >=1 and pad >=0");
  const int64_t N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t Co = w.dim(0), Kh = w.dim(2), Kw = w.dim(3);
  if (bias) require(bias->numel() == Co, "conv2d: bias length must equal output channels");
  const int64_t Ho = (H + 2 * pad - Kh) / stride + 1;
  const int64_t Wo = (W + 2 * pad - Kw) / stride + 1;
  require(Ho > 0 && Wo > 0, "conv2d: output would be empty");

  std::vector<double> out(static_cast<size_t>(N * Co * Ho * Wo), 0.0);
  const double* px = x.data();
  const double* pw = w.data();

  // Valid output ranges per kernel offset so the inner loops stay branch-free.
  // Captured by value: the backward closure outlives this call.
  auto lo_for = [stride, pad](int64_t k) {
    int64_t lo = 0;
    while (lo * stride - pad + k < 0) ++lo;
    return lo;
  };
  auto hi_for = [stride, pad](int64_t k, int64_t in, int64_t outn) {
    int64_t hi = outn;
    while (hi > 0 && (hi - 1) * stride - pad + k >= in) --hi;
    return hi;
  };

  for (int64_t n = 0; n < N; ++n) {
    for (int64_t co = 0; co < Co; ++co) {
      double* dst = out.data() + ((n * Co + co) * Ho) * Wo;
      if (bias) {
        const double bv = bias->data()[co];
        for (int64_t i = 0; i < Ho * Wo; ++i) dst[i] = bv;
      }
      for (int64_t ci = 0; ci < Ci; ++ci) {
        const double* src = px + ((n * Ci + ci) * H) * W;
        const double* ker = pw + ((co * Ci + ci) * Kh) * Kw;
        for (int64_t kh = 0; kh < Kh; ++kh) {
          const int64_t oh_lo = lo_for(kh), oh_hi = hi_for(kh, H, Ho);
          for (int64_t kw = 0; kw < Kw; ++kw) {
            const double kv = ker[kh * Kw + kw];
            if (kv == 0.0) continue;
            const int64_t ow_lo = lo_for(kw), ow_hi = hi_for(kw, W, Wo);
            for (int64_t oh = oh_lo; oh < oh_hi; ++oh) {
              const int64_t ih = oh * stride - pad + kh;
              const double* srow = src + ih * W - pad + kw;
              double* drow = dst + oh * Wo;
              for (int64_t ow = ow_lo; ow < ow_hi; ++ow) {
                drow[ow] += kv * srow[ow * stride];
              }
            }
          }
        }
      }
    }
  }

  Tensor y = detail::make_tensor({N, Co, Ho, Wo}, std::move(out));
  auto xi = x.impl();
  auto wi = w.impl();
  std::shared_ptr<TensorImpl> bi = bias ? bias->impl() : nullptr;
  std::vector<Tensor> inputs{x, w};
  if (bias) inputs.push_back(*bias);
  detail::attach(y, std::move(inputs), [=](TensorImpl& o) {
    const double* go = o.grad.data();
    if (bi && bi->requires_grad) {
      auto& gb = detail::ensure_grad(*bi);
      for (int64_t n = 0; n < N; ++n) {
        for (int64_t co = 0; co < Co; ++co) {
          const double* grow = go + ((n * Co + co) * Ho) * Wo;
          double s = 0.0;
          for (int64_t i = 0; i < Ho * Wo; ++i) s += grow[i];
          gb[static_cast<size_t>(co)] += s;
        }
      }
    }
    if (wi->requires_grad) {
      auto& gw = detail::ensure_grad(*wi);
      const double* pxd = xi->data.data();
      for (int64_t n = 0; n < N; ++n) {
        for (int64_t co = 0; co < Co; ++co) {
          const double* grow0 = go + ((n * Co + co) * Ho) * Wo;
          for (int64_t ci = 0; ci < Ci; ++ci) {
            const double* src = pxd + ((n * Ci + ci) * H) * W;
            double* gker = gw.data() + ((co * Ci + ci) * Kh) * Kw;
            for (int64_t kh = 0; kh < Kh; ++kh) {
              const int64_t oh_lo = lo_for(kh), oh_hi = hi_for(kh, H, Ho);
              for (int64_t kw = 0; kw < Kw; ++kw) {
                const int64_t ow_lo = lo_for(kw), ow_hi = hi_for(kw, W, Wo);
                double s = 0.0;
                for (int64_t oh = oh_lo; oh < oh_hi; ++oh) {
                  const int64_t ih = oh * stride - pad + kh;
                  const double* srow = src + ih * W - pad + kw;
                  const double* grow = grow0 + oh * Wo;
                  for (int64_t ow = ow_lo; ow < ow_hi; ++ow) {
                    s += grow[ow] * srow[ow * stride];
                  }
                }
                gker[kh * Kw + kw] += s;
              }
            }
          }
        }
      }
    }
    if (xi->requires_grad) {
      auto& gx = detail::ensure_grad(*xi);
      const double* pwd = wi->data.data();
      for (int64_t n = 0; n < N; ++n) {
        for (int64_t co = 0; co < Co; ++co) {
          const double* grow0 = go + ((n * Co + co) * Ho) * Wo;
          for (int64_t ci = 0; ci < Ci; ++ci) {
            double* gsrc = gx.data() + ((n * Ci + ci) * H) * W;
            const double* ker = pwd + ((co * Ci + ci) * Kh) * Kw;
            for (int64_t kh = 0; kh < Kh; ++kh) {
              const int64_t oh_lo = lo_for(kh), oh_hi = hi_for(kh, H, Ho);
              for (int64_t kw = 0; kw < Kw; ++kw) {
                const double kv = ker[kh * Kw + kw];
                if (kv == 0.0) continue;
                const int64_t ow_lo = lo_for(kw), ow_hi = hi_for(kw, W, Wo);
                for (int64_t oh = oh_lo; oh < oh_hi; ++oh) {
                  const int64_t ih = oh * stride - pad + kh;
                  double* grow_x = gsrc + ih * W - pad + kw;
                  const double* grow = grow0 + oh * Wo;
                  for (int64_t ow = ow_lo; ow < ow_hi; ++ow) {
                    grow_x[ow * stride] += kv * grow[ow];
                  }
                }
              }
            }
          }
        }
      }
    }
  });
  maybe_check_finite(y, "conv2d");
  return y;
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BnStats* stats,
                  bool train, double eps, double momentum, bool update_running) {
  require(x.ndim() == 4 || x.ndim() == 2, "batch_norm: input must be NCHW or NC");
  const int64_t N = x.dim(0);
  const int64_t C = x.dim(1);
  const int64_t S = x.ndim() == 4 ? x.dim(2) * x.dim(3) : 1;  // spatial size
  require(gamma.numel() == C && beta.numel() == C, "batch_norm: affine size must equal channels");
  if (!stats) throw Error("batch_norm: stats must not be null");
  require(static_cast<int64_t>(stats->running_mean.size()) == C,
          "batch_norm: stats channel mismatch");
  const int64_t M = N * S;  // elements per channel
  if (train && M < 2) {
    throw DegenerateBatch("batch_norm: needs at least 2 elements per channel in train mode");
  }

  std::vector<double> mean(static_cast<size_t>(C), 0.0);
  std::vector<double> var(static_cast<size_t>(C), 0.0);
  const double* px = x.data();
  auto at = [&](int64_t n, int64_t c, int64_t s) { return px[(n * C + c) * S + s]; };

  if (train) {
    for (int64_t c = 0; c < C; ++c) {
      double m = 0.0;
      for (int64_t n = 0; n < N; ++n)
        for (int64_t s = 0; s < S; ++s) m += at(n, c, s);
      m /= static_cast<double>(M);
      double v = 0.0;
      for (int64_t n = 0; n < N; ++n)
        for (int64_t s = 0; s < S; ++s) {
          const double d = at(n, c, s) - m;
          v += d * d;
        }
      v /= static_cast<double>(M);  // biased, used for normalization
      mean[static_cast<size_t>(c)] = m;
      var[static_cast<size_t>(c)] = v;
    }
    if (update_running) {
      const double unbias = static_cast<double>(M) / static_cast<double>(M - 1);
      for (int64_t c = 0; c < C; ++c) {
        auto ci = static_cast<size_t>(c);
        stats->running_mean[ci] = (1.0 - momentum) * stats->running_mean[ci] + momentum * mean[ci];
        stats->running_var[ci] =
            (1.0 - momentum) * stats->running_var[ci] + momentum * var[ci] * unbias;
      }
    }
  } else {
    mean = stats->running_mean;
    var = stats->running_var;
  }

  std::vector<double> inv_sigma(static_cast<size_t>(C));
  for (int64_t c = 0; c < C; ++c) {
    inv_sigma[static_cast<size_t>(c)] = 1.0 / std::sqrt(var[static_cast<size_t>(c)] + eps);
  }

  std::vector<double> out(x.values().size());
  const double* pg = gamma.data();
  const double* pb = beta.data();
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const double m = mean[static_cast<size_t>(c)];
      const double is = inv_sigma[static_cast<size_t>(c)];
      const double g = pg[c], b = pb[c];
      const double* src = px + (n * C + c) * S;
      double* dst = out.data() + (n * C + c) * S;
      for (int64_t s = 0; s < S; ++s) dst[s] = (src[s] - m) * is * g + b;
    }
  }

  Tensor y = detail::make_tensor(x.shape(), std::move(out));
  auto xi = x.impl(), gi = gamma.impl(), bi = beta.impl();
  detail::attach(y, {x, gamma, beta},
                 [xi, gi, bi, mean, inv_sigma, N, C, S, train](TensorImpl& o) {
    const double* go = o.grad.data();
    const double* pxd = xi->data.data();
    const double* pgd = gi->data.data();
    const int64_t M = N * S;
    for (int64_t c = 0; c < C; ++c) {
      const double m = mean[static_cast<size_t>(c)];
      const double is = inv_sigma[static_cast<size_t>(c)];
      double sum_g = 0.0, sum_gx = 0.0;
      for (int64_t n = 0; n < N; ++n) {
        const double* grow = go + (n * C + c) * S;
        const double* xrow = pxd + (n * C + c) * S;
        for (int64_t s = 0; s < S; ++s) {
          sum_g += grow[s];
          sum_gx += grow[s] * (xrow[s] - m) * is;
        }
      }
      if (gi->requires_grad) detail::ensure_grad(*gi)[static_cast<size_t>(c)] += sum_gx;
      if (bi->requires_grad) detail::ensure_grad(*bi)[static_cast<size_t>(c)] += sum_g;
      if (xi->requires_grad) {
        auto& gx = detail::ensure_grad(*xi);
        const double g = pgd[c];
        if (train) {
          const double mg = sum_g / static_cast<double>(M);
          const double mgx = sum_gx / static_cast<double>(M);
          for (int64_t n = 0; n < N; ++n) {
            const double* grow = go + (n * C + c) * S;
            const double* xrow = pxd + (n * C + c) * S;
            double* dst = gx.data() + (n * C + c) * S;
            for (int64_t s = 0; s < S; ++s) {
              const double xh = (xrow[s] - m) * is;
              dst[s] += g * is * (grow[s] - mg - xh * mgx);
            }
          }
        } else {
          for (int64_t n = 0; n < N; ++n) {
            const double* grow = go + (n * C + c) * S;
            double* dst = gx.data() + (n * C + c) * S;
            for (int64_t s = 0; s < S; ++s) dst[s] += g * is * grow[s];
          }
        }
      }
    }
  });
  maybe_check_finite(y, "batch_norm");
  return y;
}

Tensor avg_pool(const Tensor& x, int kernel, int stride) {
  require(x.ndim() == 4, "avg_pool: input must be NCHW");
  if (kernel < 1 || stride < 1) throw ShapeMismatch("avg_pool: kernel and stride must be >= 1");
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (kernel > H || kernel > W) throw KernelTooLarge("avg_pool: kernel exceeds spatial size");
  const int64_t Ho = (H - kernel) / stride + 1;
  const int64_t Wo = (W - kernel) / stride + 1;
  const double inv = 1.0 / (static_cast<double>(kernel) * kernel);

  std::vector<double> out(static_cast<size_t>(N * C * Ho * Wo));
  const double* px = x.data();
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const double* src = px + nc * H * W;
    double* dst = out.data() + nc * Ho * Wo;
    for (int64_t oh = 0; oh < Ho; ++oh) {
      for (int64_t ow = 0; ow < Wo; ++ow) {
        double s = 0.0;
        for (int64_t kh = 0; kh < kernel; ++kh) {
          const double* row = src + (oh * stride + kh) * W + ow * stride;
          for (int64_t kw = 0; kw < kernel; ++kw) s += row[kw];
        }
        dst[oh * Wo + ow] = s * inv;
      }
    }
  }

  Tensor y = detail::make_tensor({N, C, Ho, Wo}, std::move(out));
  auto xi = x.impl();
  detail::attach(y, {x}, [xi, N, C, H, W, Ho, Wo, kernel, stride, inv](TensorImpl& o) {
    auto& gx = detail::ensure_grad(*xi);
    const double* go = o.grad.data();
    for (int64_t nc = 0; nc < N * C; ++nc) {
      double* dst = gx.data() + nc * H * W;
      const double* grow = go + nc * Ho * Wo;
      for (int64_t oh = 0; oh < Ho; ++oh) {
        for (int64_t ow = 0; ow < Wo; ++ow) {
          const double g = grow[oh * Wo + ow] * inv;
          for (int64_t kh = 0; kh < kernel; ++kh) {
            double* row = dst + (oh * stride + kh) * W + ow * stride;
            for (int64_t kw = 0; kw < kernel; ++kw) row[kw] += g;
          }
        }
      }
    }
  });
  return y;
}

Tensor global_avg_pool(const Tensor& x) {
  require(x.ndim() == 4, "global_avg_pool: input must be NCHW");
  const int64_t N = x.dim(0), C = x.dim(1), S = x.dim(2) * x.dim(3);
  const double inv = 1.0 / static_cast<double>(S);
  std::vector<double> out(static_cast<size_t>(N * C));
  const double* px = x.data();
  for (int64_t nc = 0; nc < N * C; ++nc) {
    double s = 0.0;
    const double* src = px + nc * S;
    for (int64_t i = 0; i < S; ++i) s += src[i];
    out[static_cast<size_t>(nc)] = s * inv;
  }
  Tensor y = detail::make_tensor({N, C}, std::move(out));
  auto xi = x.impl();
  detail::attach(y, {x}, [xi, N, C, S, inv](TensorImpl& o) {
    auto& gx = detail::ensure_grad(*xi);
    for (int64_t nc = 0; nc < N * C; ++nc) {
      const double g = o.grad[static_cast<size_t>(nc)] * inv;
      double* dst = gx.data() + nc * S;
      for (int64_t i = 0; i < S; ++i) dst[i] += g;
    }
  });
  return y;
}

Tensor nearest_upsample2x(const Tensor& x) {
  require(x.ndim() == 4, "nearest_upsample2x: input must be NCHW");
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  std::vector<double> out(static_cast<size_t>(N * C * 4 * H * W));
  const double* px = x.data();
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const double* src = px + nc * H * W;
    double* dst = out.data() + nc * 4 * H * W;
    for (int64_t i = 0; i < H; ++i) {
      for (int64_t j = 0; j < W; ++j) {
        const double v = src[i * W + j];
        dst[(2 * i) * 2 * W + 2 * j] = v;
        dst[(2 * i) * 2 * W + 2 * j + 1] = v;
        dst[(2 * i + 1) * 2 * W + 2 * j] = v;
        dst[(2 * i + 1) * 2 * W + 2 * j + 1] = v;
      }
    }
  }
  Tensor y = detail::make_tensor({N, C, 2 * H, 2 * W}, std::move(out));
  auto xi = x.impl();
  detail::attach(y, {x}, [xi, N, C, H, W](TensorImpl& o) {
    auto& gx = detail::ensure_grad(*xi);
    const double* go = o.grad.data();
    for (int64_t nc = 0; nc < N * C; ++nc) {
      double* dst = gx.data() + nc * H * W;
      const double* src = go + nc * 4 * H * W;
      for (int64_t i = 0; i < H; ++i) {
        for (int64_t j = 0; j < W; ++j) {
          dst[i * W + j] += src[(2 * i) * 2 * W + 2 * j] + src[(2 * i) * 2 * W + 2 * j + 1] +
                            src[(2 * i + 1) * 2 * W + 2 * j] +
                            src[(2 * i + 1) * 2 * W + 2 * j + 1];
        }
      }
    }
  });
  return y;
}

Tensor linear(const Tensor& x, const Tensor& w, const std::optional<Tensor>& bias) {
  require(x.ndim() == 2 && w.ndim() == 2, "linear: x and w must be 2-D");
  require(x.dim(1) == w.dim(1), "linear: inner dimensions differ");
  const int64_t N = x.dim(0), In = x.dim(1), Out = w.dim(0);
  if (bias) require(bias->numel() == Out, "linear: bias length must equal output dim");

  std::vector<double> out(static_cast<size_t>(N * Out), 0.0);
  const double* px = x.data();
  const double* pw = w.data();
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t o = 0; o < Out; ++o) {
      const double* xr = px + n * In;
      const double* wr = pw + o * In;
      double s = bias ? bias->data()[o] : 0.0;
      for (int64_t i = 0; i < In; ++i) s += xr[i] * wr[i];
      out[static_cast<size_t>(n * Out + o)] = s;
    }
  }

  Tensor y = detail::make_tensor({N, Out}, std::move(out));
  auto xi = x.impl(), wi = w.impl();
  std::shared_ptr<TensorImpl> bi = bias ? bias->impl() : nullptr;
  std::vector<Tensor> inputs{x, w};
  if (bias) inputs.push_back(*bias);
  detail::attach(y, std::move(inputs), [xi, wi, bi, N, In, Out](TensorImpl& o) {
    const double* go = o.grad.data();
    if (bi && bi->requires_grad) {
      auto& gb = detail::ensure_grad(*bi);
      for (int64_t n = 0; n < N; ++n)
        for (int64_t k = 0; k < Out; ++k) gb[static_cast<size_t>(k)] += go[n * Out + k];
    }
    if (wi->requires_grad) {
      auto& gw = detail::ensure_grad(*wi);
      const double* pxd = xi->data.data();
      for (int64_t n = 0; n < N; ++n) {
        for (int64_t k = 0; k < Out; ++k) {
          const double g = go[n * Out + k];
          if (g == 0.0) continue;
          double* wr = gw.data() + k * In;
          const double* xr = pxd + n * In;
          for (int64_t i = 0; i < In; ++i) wr[i] += g * xr[i];
        }
      }
    }
    if (xi->requires_grad) {
      auto& gx = detail::ensure_grad(*xi);
      const double* pwd = wi->data.data();
      for (int64_t n = 0; n < N; ++n) {
        for (int64_t k = 0; k < Out; ++k) {
          const double g = go[n * Out + k];
          if (g == 0.0) continue;
          double* xr = gx.data() + n * In;
          const double* wr = pwd + k * In;
          for (int64_t i = 0; i < In; ++i) xr[i] += g * wr[i];
        }
      }
    }
  });
  maybe_check_finite(y, "linear");
  return y;
}

Tensor l2_normalize(const Tensor& x) {
  require(x.ndim() == 1 || x.ndim() == 2, "l2_normalize: input must be 1-D or 2-D");
  const int64_t R = x.ndim() == 2 ? x.dim(0) : 1;
  const int64_t C = x.ndim() == 2 ? x.dim(1) : x.dim(0);
  constexpr double kMinNorm = 1e-12;

  std::vector<double> out(x.values().size());
  std::vector<double> norms(static_cast<size_t>(R));
  const double* px = x.data();
  for (int64_t r = 0; r < R; ++r) {
    const double* src = px + r * C;
    double s = 0.0;
    for (int64_t c = 0; c < C; ++c) s += src[c] * src[c];
    const double nrm = std::sqrt(s);
    norms[static_cast<size_t>(r)] = nrm;
    double* dst = out.data() + r * C;
    if (nrm < kMinNorm) {
      if (debug_checks()) throw DegenerateNorm("l2_normalize: vector norm below 1e-12");
      for (int64_t c = 0; c < C; ++c) dst[c] = 0.0;
    } else {
      const double inv = 1.0 / nrm;
      for (int64_t c = 0; c < C; ++c) dst[c] = src[c] * inv;
    }
  }

  Tensor y = detail::make_tensor(x.shape(), std::move(out));
  auto xi = x.impl(), yi = y.impl();
  detail::attach(y, {x}, [xi, yi, norms, R, C, kMinNorm](TensorImpl& o) {
    auto& gx = detail::ensure_grad(*xi);
    const double* go = o.grad.data();
    const double* py = yi->data.data();
    for (int64_t r = 0; r < R; ++r) {
      const double nrm = norms[static_cast<size_t>(r)];
      if (nrm < kMinNorm) continue;  // zero gradient for degenerate rows
      const double inv = 1.0 / nrm;
      const double* gr = go + r * C;
      const double* yr = py + r * C;
      double dot = 0.0;
      for (int64_t c = 0; c < C; ++c) dot += gr[c] * yr[c];
      double* dst = gx.data() + r * C;
      for (int64_t c = 0; c < C; ++c) dst[c] += (gr[c] - yr[c] * dot) * inv;
    }
  });
  return y;
}

Tensor pairwise_dot(const Tensor& a, const Tensor& b) {
  require(a.ndim() == 2 && b.ndim() == 2, "pairwise_dot: inputs must be 2-D");
  require(a.dim(1) == b.dim(1), "pairwise_dot: feature dims differ");
  const int64_t N = a.dim(0), M = b.dim(0), C = a.dim(1);
  std::vector<double> out(static_cast<size_t>(N * M));
  const double* pa = a.data();
  const double* pb = b.data();
  for (int64_t i = 0; i < N; ++i) {
    const double* ar = pa + i * C;
    for (int64_t j = 0; j < M; ++j) {
      const double* br = pb + j * C;
      double s = 0.0;
      for (int64_t c = 0; c < C; ++c) s += ar[c] * br[c];
      out[static_cast<size_t>(i * M + j)] = s;
    }
  }
  Tensor y = detail::make_tensor({N, M}, std::move(out));
  auto ai = a.impl(), bi = b.impl();
  detail::attach(y, {a, b}, [ai, bi, N, M, C](TensorImpl& o) {
    const double* go = o.grad.data();
    if (ai->requires_grad) {
      auto& ga = detail::ensure_grad(*ai);
      const double* pbd = bi->data.data();
      for (int64_t i = 0; i < N; ++i) {
        double* ar = ga.data() + i * C;
        for (int64_t j = 0; j < M; ++j) {
          const double g = go[i * M + j];
          if (g == 0.0) continue;
          const double* br = pbd + j * C;
          for (int64_t c = 0; c < C; ++c) ar[c] += g * br[c];
        }
      }
    }
    if (bi->requires_grad) {
      auto& gb = detail::ensure_grad(*bi);
      const double* pad = ai->data.data();
      for (int64_t i = 0; i < N; ++i) {
        const double* ar = pad + i * C;
        for (int64_t j = 0; j < M; ++j) {
          const double g = go[i * M + j];
          if (g == 0.0) continue;
          double* br = gb.data() + j * C;
          for (int64_t c = 0; c < C; ++c) br[c] += g * ar[c];
        }
      }
    }
  });
  return y;
}

Tensor rowwise_dot(const Tensor& a, const Tensor& b) {
  require(a.ndim() == 2 && b.ndim() == 2, "rowwise_dot: inputs must be 2-D");
  require(a.shape() == b.shape(), "rowwise_dot: shapes differ");
  const int64_t N = a.dim(0), C = a.dim(1);
  std::vector<double> out(static_cast<size_t>(N));
  const double* pa = a.data();
  const double* pb = b.data();
  for (int64_t i = 0; i < N; ++i) {
    double s = 0.0;
    for (int64_t c = 0; c < C; ++c) s += pa[i * C + c] * pb[i * C + c];
    out[static_cast<size_t>(i)] = s;
  }
  Tensor y = detail::make_tensor({N, 1}, std::move(out));
  auto ai = a.impl(), bi = b.impl();
  detail::attach(y, {a, b}, [ai, bi, N, C](TensorImpl& o) {
    const double* go = o.grad.data();
    if (ai->requires_grad) {
      auto& ga = detail::ensure_grad(*ai);
      const double* pbd = bi->data.data();
      for (int64_t i = 0; i < N; ++i)
        for (int64_t c = 0; c < C; ++c) ga[static_cast<size_t>(i * C + c)] += go[i] * pbd[i * C + c];
    }
    if (bi->requires_grad) {
      auto& gb = detail::ensure_grad(*bi);
      const double* pad = ai->data.data();
      for (int64_t i = 0; i < N; ++i)
        for (int64_t c = 0; c < C; ++c) gb[static_cast<size_t>(i * C + c)] += go[i] * pad[i * C + c];
    }
  });
  return y;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require(a.ndim() == 2 && b.ndim() == 2, "concat_cols: inputs must be 2-D");
  require(a.dim(0) == b.dim(0), "concat_cols: row counts differ");
  const int64_t N = a.dim(0), P = a.dim(1), Q = b.dim(1);
  std::vector<double> out(static_cast<size_t>(N * (P + Q)));
  const double* pa = a.data();
  const double* pb = b.data();
  for (int64_t n = 0; n < N; ++n) {
    double* dst = out.data() + n * (P + Q);
    for (int64_t i = 0; i < P; ++i) dst[i] = pa[n * P + i];
    for (int64_t i = 0; i < Q; ++i) dst[P + i] = pb[n * Q + i];
  }
  Tensor y = detail::make_tensor({N, P + Q}, std::move(out));
  auto ai = a.impl(), bi = b.impl();
  detail::attach(y, {a, b}, [ai, bi, N, P, Q](TensorImpl& o) {
    const double* go = o.grad.data();
    if (ai->requires_grad) {
      auto& ga = detail::ensure_grad(*ai);
      for (int64_t n = 0; n < N; ++n)
        for (int64_t i = 0; i < P; ++i) ga[static_cast<size_t>(n * P + i)] += go[n * (P + Q) + i];
    }
    if (bi->requires_grad) {
      auto& gb = detail::ensure_grad(*bi);
      for (int64_t n = 0; n < N; ++n)
        for (int64_t i = 0; i < Q; ++i)
          gb[static_cast<size_t>(n * Q + i)] += go[n * (P + Q) + P + i];
    }
  });
  return y;
}

Tensor softmax_cross_entropy(const Tensor& logits, int64_t target_index) {
  require(logits.ndim() == 1 || logits.ndim() == 2, "softmax_cross_entropy: logits must be 1-D or 2-D");
  const int64_t N = logits.ndim() == 2 ? logits.dim(0) : 1;
  const int64_t K = logits.ndim() == 2 ? logits.dim(1) : logits.dim(0);
  require(target_index >= 0 && target_index < K, "softmax_cross_entropy: target out of range");

  const double* pl = logits.data();
  double total = 0.0;
  std::vector<double> lse(static_cast<size_t>(N));
  for (int64_t n = 0; n < N; ++n) {
    const double* row = pl + n * K;
    double mx = row[0];
    for (int64_t k = 1; k < K; ++k) mx = std::max(mx, row[k]);
    double s = 0.0;
    for (int64_t k = 0; k < K; ++k) s += std::exp(row[k] - mx);
    const double l = mx + std::log(s);
    lse[static_cast<size_t>(n)] = l;
    total += l - row[target_index];
  }
  total /= static_cast<double>(N);

  Tensor y = detail::make_tensor({1}, {total});
  auto li = logits.impl();
  detail::attach(y, {logits}, [li, lse, N, K, target_index](TensorImpl& o) {
    auto& gl = detail::ensure_grad(*li);
    const double g = o.grad[0] / static_cast<double>(N);
    const double* pld = li->data.data();
    for (int64_t n = 0; n < N; ++n) {
      const double* row = pld + n * K;
      double* dst = gl.data() + n * K;
      const double l = lse[static_cast<size_t>(n)];
      for (int64_t k = 0; k < K; ++k) {
        const double p = std::exp(row[k] - l);
        dst[k] += g * (p - (k == target_index ? 1.0 : 0.0));
      }
    }
  });
  maybe_check_finite(y, "softmax_cross_entropy");
  return y;
}

Tensor grid_to_rows(const Tensor& x) {
  require(x.ndim() == 4, "grid_to_rows: input must be NCHW");
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  std::vector<double> out(static_cast<size_t>(N * H * W * C));
  const double* px = x.data();
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t i = 0; i < H; ++i)
        for (int64_t j = 0; j < W; ++j)
          out[static_cast<size_t>((((n * H + i) * W + j)) * C + c)] =
              px[((n * C + c) * H + i) * W + j];
  Tensor y = detail::make_tensor({N * H * W, C}, std::move(out));
  auto xi = x.impl();
  detail::attach(y, {x}, [xi, N, C, H, W](TensorImpl& o) {
    auto& gx = detail::ensure_grad(*xi);
    const double* go = o.grad.data();
    for (int64_t n = 0; n < N; ++n)
      for (int64_t c = 0; c < C; ++c)
        for (int64_t i = 0; i < H; ++i)
          for (int64_t j = 0; j < W; ++j)
            gx[static_cast<size_t>(((n * C + c) * H + i) * W + j)] +=
                go[(((n * H + i) * W + j)) * C + c];
  });
  return y;
}

Tensor reshape(const Tensor& x, Shape shape) {
  require(shape_numel(shape) == x.numel(), "reshape: element count must not change");
  Tensor y = detail::make_tensor(std::move(shape), x.values());
  auto xi = x.impl();
  detail::attach(y, {x}, [xi](TensorImpl& o) {
    auto& g = detail::ensure_grad(*xi);
    for (size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
  });
  return y;
}

Tensor take_rows(const Tensor& x, int64_t r0, int64_t r1) {
  require(x.ndim() == 2, "take_rows: input must be 2-D");
  if (x.requires_grad()) throw Error("take_rows: only supported on constant tensors");
  require(r0 >= 0 && r1 > r0 && r1 <= x.dim(0), "take_rows: row range out of bounds");
  const int64_t C = x.dim(1);
  std::vector<double> out(x.data() + r0 * C, x.data() + r1 * C);
  return detail::make_tensor({r1 - r0, C}, std::move(out));
}

}  // namespace resim
