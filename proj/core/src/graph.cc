#include "lungbench/graph.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lungbench/error.h"

namespace lungbench {
namespace {

void RequireRank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " +
                     std::to_string(rank) + ", got " +
                     ShapeToString(t.shape()));
  }
}

std::string Pair(const Tensor& a, const Tensor& b) {
  return ShapeToString(a.shape()) + " and " + ShapeToString(b.shape());
}

}  // namespace

bool Graph::ShouldRecord(std::initializer_list<const Tensor*> inputs) const {
  if (mode_ == GradMode::kDisabled) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

Tensor Graph::MakeOutput(Shape shape, std::vector<double> values,
                         bool record) const {
  return Tensor::FromValues(std::move(shape), std::move(values), record);
}

void Graph::Record(std::string_view op, std::vector<Tensor> inputs,
                   Tensor output, std::function<void()> backward) {
  nodes_.push_back(
      Node{op, std::move(inputs), std::move(output), std::move(backward)});
}

Tensor Graph::Add(const Tensor& a, const Tensor& b) {
  const bool same = a.shape() == b.shape();
  bool trailing = false;
  if (!same && a.rank() == b.rank() && a.rank() >= 1 &&
      b.shape().back() == 1) {
    trailing = std::equal(a.shape().begin(), a.shape().end() - 1,
                          b.shape().begin());
  }
  if (!same && !trailing) {
    throw ShapeError("add: shapes " + Pair(a, b) + " do not conform");
  }
  const std::size_t n = a.size();
  const std::size_t inner = same ? 1 : a.shape().back();
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = av[i] + bv[i / inner];
  const bool record = ShouldRecord({&a, &b});
  Tensor y = MakeOutput(a.shape(), std::move(out), record);
  if (record) {
    Record("add", {a, b}, y, [a, b, y, inner]() mutable {
      auto gy = y.grad();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        for (std::size_t i = 0; i < gy.size(); ++i) gb[i / inner] += gy[i];
      }
    });
  }
  return y;
}

Tensor Graph::AddRow(const Tensor& a, const Tensor& row) {
  if (a.rank() < 1 || row.rank() != 1 || row.dim(0) != a.shape().back()) {
    throw ShapeError("add_row: shapes " + Pair(a, row) + " do not conform");
  }
  const std::size_t cols = row.dim(0);
  auto av = a.values();
  auto rv = row.values();
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + rv[i % cols];
  const bool record = ShouldRecord({&a, &row});
  Tensor y = MakeOutput(a.shape(), std::move(out), record);
  if (record) {
    Record("add_row", {a, row}, y, [a, row, y, cols]() mutable {
      auto gy = y.grad();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
      }
      if (row.requires_grad()) {
        auto gr = row.mutable_grad();
        for (std::size_t i = 0; i < gy.size(); ++i) gr[i % cols] += gy[i];
      }
    });
  }
  return y;
}

Tensor Graph::Mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mul: shapes " + Pair(a, b) + " do not conform");
  }
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const bool record = ShouldRecord({&a, &b});
  Tensor y = MakeOutput(a.shape(), std::move(out), record);
  if (record) {
    Record("mul", {a, b}, y, [a, b, y]() mutable {
      auto gy = y.grad();
      auto av = a.values();
      auto bv = b.values();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * bv[i];
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * av[i];
      }
    });
  }
  return y;
}

Tensor Graph::MulScalar(const Tensor& a, double s) {
  auto av = a.values();
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * s;
  const bool record = ShouldRecord({&a});
  Tensor y = MakeOutput(a.shape(), std::move(out), record);
  if (record) {
    Record("mul_scalar", {a}, y, [a, y, s]() mutable {
      auto gy = y.grad();
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * s;
    });
  }
  return y;
}

Tensor Graph::MatMul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: shapes " + Pair(a, b) + " do not conform");
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += av[i * k + p] * bv[p * n + j];
      out[i * n + j] = acc;
    }
  }
  const bool record = ShouldRecord({&a, &b});
  Tensor y = MakeOutput({m, n}, std::move(out), record);
  if (record) {
    Record("matmul", {a, b}, y, [a, b, y, m, k, n]() mutable {
      auto gy = y.grad();
      auto av = a.values();
      auto bv = b.values();
      if (a.requires_grad()) {
        // dA = dY * B^T
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              acc += gy[i * n + j] * bv[p * n + j];
            }
            ga[i * k + p] += acc;
          }
        }
      }
      if (b.requires_grad()) {
        // dB = A^T * dY
        auto gb = b.mutable_grad();
        for (std::size_t p = 0; p < k; ++p) {
          for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
              acc += av[i * k + p] * gy[i * n + j];
            }
            gb[p * n + j] += acc;
          }
        }
      }
    });
  }
  return y;
}

Tensor Graph::Transpose(const Tensor& a) {
  RequireRank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  auto av = a.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  }
  const bool record = ShouldRecord({&a});
  Tensor y = MakeOutput({n, m}, std::move(out), record);
  if (record) {
    Record("transpose", {a}, y, [a, y, m, n]() mutable {
      auto gy = y.grad();
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += gy[j * m + i];
      }
    });
  }
  return y;
}

Tensor Graph::Conv2d(const Tensor& input, const Tensor& kernels,
                     const Tensor& bias, std::size_t stride,
                     std::size_t padding) {
  RequireRank(input, 3, "conv2d input");
  RequireRank(kernels, 4, "conv2d kernels");
  RequireRank(bias, 1, "conv2d bias");
  if (stride == 0) throw ArgumentError("conv2d: stride must be positive");
  const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t cout = kernels.dim(0), kh = kernels.dim(2),
                    kw = kernels.dim(3);
  if (kernels.dim(1) != cin || bias.dim(0) != cout) {
    throw ShapeError("conv2d: input " + ShapeToString(input.shape()) +
                     ", kernels " + ShapeToString(kernels.shape()) +
                     " and bias " + ShapeToString(bias.shape()) +
                     " do not conform");
  }
  if (h + 2 * padding < kh || w + 2 * padding < kw) {
    throw ShapeError("conv2d: kernel " + ShapeToString(kernels.shape()) +
                     " larger than padded input " +
                     ShapeToString(input.shape()) + " with padding " +
                     std::to_string(padding));
  }
  const std::size_t oh = (h + 2 * padding - kh) / stride + 1;
  const std::size_t ow = (w + 2 * padding - kw) / stride + 1;
  const auto pad = static_cast<std::ptrdiff_t>(padding);
  const auto ih = static_cast<std::ptrdiff_t>(h);
  const auto iw = static_cast<std::ptrdiff_t>(w);

  auto x = input.values();
  auto k = kernels.values();
  auto b = bias.values();
  std::vector<double> out(cout * oh * ow);
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        const auto y0 = static_cast<std::ptrdiff_t>(oy * stride) - pad;
        const auto x0 = static_cast<std::ptrdiff_t>(ox * stride) - pad;
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const double* xc = x.data() + ci * h * w;
          const double* kc = k.data() + (co * cin + ci) * kh * kw;
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const auto iy = y0 + static_cast<std::ptrdiff_t>(ky);
            if (iy < 0 || iy >= ih) continue;
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const auto ix = x0 + static_cast<std::ptrdiff_t>(kx);
              if (ix < 0 || ix >= iw) continue;
              acc += xc[iy * iw + ix] * kc[ky * kw + kx];
            }
          }
        }
        out[(co * oh + oy) * ow + ox] = acc + b[co];
      }
    }
  }

  const bool record = ShouldRecord({&input, &kernels, &bias});
  Tensor y = MakeOutput({cout, oh, ow}, std::move(out), record);
  if (record) {
    Record("conv2d", {input, kernels, bias}, y,
           [input, kernels, bias, y, cin, h, w, cout, kh, kw, oh, ow, stride,
            pad, ih, iw]() mutable {
             auto gy = y.grad();
             auto x = input.values();
             auto k = kernels.values();
             const bool gin = input.requires_grad();
             const bool gk = kernels.requires_grad();
             double* gx = gin ? input.mutable_grad().data() : nullptr;
             double* gw = gk ? kernels.mutable_grad().data() : nullptr;
             if (bias.requires_grad()) {
               auto gb = bias.mutable_grad();
               for (std::size_t co = 0; co < cout; ++co) {
                 double acc = 0.0;
                 for (std::size_t i = 0; i < oh * ow; ++i) {
                   acc += gy[co * oh * ow + i];
                 }
                 gb[co] += acc;
               }
             }
             if (!gin && !gk) return;
             for (std::size_t co = 0; co < cout; ++co) {
               for (std::size_t oy = 0; oy < oh; ++oy) {
                 for (std::size_t ox = 0; ox < ow; ++ox) {
                   const double g = gy[(co * oh + oy) * ow + ox];
                   if (g == 0.0) continue;
                   const auto y0 =
                       static_cast<std::ptrdiff_t>(oy * stride) - pad;
                   const auto x0 =
                       static_cast<std::ptrdiff_t>(ox * stride) - pad;
                   for (std::size_t ci = 0; ci < cin; ++ci) {
                     const std::size_t xoff = ci * h * w;
                     const std::size_t koff = (co * cin + ci) * kh * kw;
                     for (std::size_t ky = 0; ky < kh; ++ky) {
                       const auto iy = y0 + static_cast<std::ptrdiff_t>(ky);
                       if (iy < 0 || iy >= ih) continue;
                       for (std::size_t kx = 0; kx < kw; ++kx) {
                         const auto ix = x0 + static_cast<std::ptrdiff_t>(kx);
                         if (ix < 0 || ix >= iw) continue;
                         const std::size_t xi = xoff + iy * iw + ix;
                         const std::size_t ki = koff + ky * kw + kx;
                         if (gin) gx[xi] += g * k[ki];
                         if (gk) gw[ki] += g * x[xi];
                       }
                     }
                   }
                 }
               }
             }
           });
  }
  return y;
}

Tensor Graph::MaxPool2d(const Tensor& input, std::size_t window,
                        std::size_t stride) {
  RequireRank(input, 3, "max_pool2d");
  if (window == 0 || stride == 0) {
    throw ArgumentError("max_pool2d: window and stride must be positive");
  }
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (window > h || window > w) {
    throw ShapeError("max_pool2d: window " + std::to_string(window) +
                     " exceeds spatial dims of " +
                     ShapeToString(input.shape()));
  }
  const std::size_t oh = (h - window) / stride + 1;
  const std::size_t ow = (w - window) / stride + 1;
  auto x = input.values();
  std::vector<double> out(c * oh * ow);
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = ch * h * w + oy * stride * w + ox * stride;
        for (std::size_t ky = 0; ky < window; ++ky) {
          for (std::size_t kx = 0; kx < window; ++kx) {
            const std::size_t idx =
                ch * h * w + (oy * stride + ky) * w + ox * stride + kx;
            if (x[idx] > x[best]) best = idx;
          }
        }
        const std::size_t o = (ch * oh + oy) * ow + ox;
        out[o] = x[best];
        argmax[o] = best;
      }
    }
  }
  const bool record = ShouldRecord({&input});
  Tensor y = MakeOutput({c, oh, ow}, std::move(out), record);
  if (record) {
    Record("max_pool2d", {input}, y,
           [input, y, argmax = std::move(argmax)]() mutable {
             auto gy = y.grad();
             auto gx = input.mutable_grad();
             for (std::size_t o = 0; o < gy.size(); ++o) gx[argmax[o]] += gy[o];
           });
  }
  return y;
}

Tensor Graph::Relu(const Tensor& x) {
  auto xv = x.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  const bool record = ShouldRecord({&x});
  Tensor y = MakeOutput(x.shape(), std::move(out), record);
  if (record) {
    Record("relu", {x}, y, [x, y]() mutable {
      auto gy = y.grad();
      auto xv = x.values();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < gy.size(); ++i) {
        if (xv[i] > 0.0) gx[i] += gy[i];
      }
    });
  }
  return y;
}

Tensor Graph::Softmax(const Tensor& x) {
  if (x.rank() < 1) throw ShapeError("softmax: needs rank >= 1");
  const std::size_t cols = x.shape().back();
  const std::size_t rows = x.size() / cols;
  auto xv = x.values();
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * cols;
    double* o = out.data() + r * cols;
    double m = in[0];
    for (std::size_t j = 1; j < cols; ++j) m = std::max(m, in[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      o[j] = std::exp(in[j] - m);
      sum += o[j];
    }
    for (std::size_t j = 0; j < cols; ++j) o[j] /= sum;
  }
  const bool record = ShouldRecord({&x});
  Tensor y = MakeOutput(x.shape(), std::move(out), record);
  if (record) {
    Record("softmax", {x}, y, [x, y, rows, cols]() mutable {
      auto gy = y.grad();
      auto yv = y.values();
      auto gx = x.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
          dot += gy[r * cols + j] * yv[r * cols + j];
        }
        for (std::size_t j = 0; j < cols; ++j) {
          const std::size_t i = r * cols + j;
          gx[i] += yv[i] * (gy[i] - dot);
        }
      }
    });
  }
  return y;
}

Tensor Graph::Log(const Tensor& x) {
  auto xv = x.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::log(std::max(xv[i], kLogFloor));
  }
  const bool record = ShouldRecord({&x});
  Tensor y = MakeOutput(x.shape(), std::move(out), record);
  if (record) {
    Record("log", {x}, y, [x, y]() mutable {
      auto gy = y.grad();
      auto xv = x.values();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < gy.size(); ++i) {
        if (xv[i] > kLogFloor) gx[i] += gy[i] / xv[i];
      }
    });
  }
  return y;
}

Tensor Graph::LayerNorm(const Tensor& x, const Tensor& gamma,
                        const Tensor& beta, double eps) {
  RequireRank(x, 2, "layer_norm");
  const std::size_t rows = x.dim(0), d = x.dim(1);
  if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
    throw ShapeError("layer_norm: input " + ShapeToString(x.shape()) +
                     " with gamma " + ShapeToString(gamma.shape()) +
                     " and beta " + ShapeToString(beta.shape()));
  }
  auto xv = x.values();
  auto gv = gamma.values();
  auto bv = beta.values();
  std::vector<double> out(x.size());
  std::vector<double> xhat(x.size());
  std::vector<double> rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += in[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<double>(d);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t i = r * d + j;
      xhat[i] = (in[j] - mean) * rstd[r];
      out[i] = xhat[i] * gv[j] + bv[j];
    }
  }
  const bool record = ShouldRecord({&x, &gamma, &beta});
  Tensor y = MakeOutput(x.shape(), std::move(out), record);
  if (record) {
    Record("layer_norm", {x, gamma, beta}, y,
           [x, gamma, beta, y, rows, d, xhat = std::move(xhat),
            rstd = std::move(rstd)]() mutable {
             auto gy = y.grad();
             auto gv = gamma.values();
             if (gamma.requires_grad()) {
               auto gg = gamma.mutable_grad();
               for (std::size_t i = 0; i < gy.size(); ++i) {
                 gg[i % d] += gy[i] * xhat[i];
               }
             }
             if (beta.requires_grad()) {
               auto gb = beta.mutable_grad();
               for (std::size_t i = 0; i < gy.size(); ++i) gb[i % d] += gy[i];
             }
             if (!x.requires_grad()) return;
             auto gx = x.mutable_grad();
             const double inv_d = 1.0 / static_cast<double>(d);
             for (std::size_t r = 0; r < rows; ++r) {
               double mean_dxhat = 0.0;
               double mean_dxhat_xhat = 0.0;
               for (std::size_t j = 0; j < d; ++j) {
                 const std::size_t i = r * d + j;
                 const double dxhat = gy[i] * gv[j];
                 mean_dxhat += dxhat;
                 mean_dxhat_xhat += dxhat * xhat[i];
               }
               mean_dxhat *= inv_d;
               mean_dxhat_xhat *= inv_d;
               for (std::size_t j = 0; j < d; ++j) {
                 const std::size_t i = r * d + j;
                 const double dxhat = gy[i] * gv[j];
                 gx[i] += rstd[r] *
                          (dxhat - mean_dxhat - xhat[i] * mean_dxhat_xhat);
               }
             }
           });
  }
  return y;
}

Tensor Graph::Sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  const bool record = ShouldRecord({&x});
  Tensor y = MakeOutput({}, {acc}, record);
  if (record) {
    Record("sum", {x}, y, [x, y]() mutable {
      const double g = y.grad()[0];
      for (double& gx : x.mutable_grad()) gx += g;
    });
  }
  return y;
}

Tensor Graph::Mean(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  const double n = static_cast<double>(x.size());
  const bool record = ShouldRecord({&x});
  Tensor y = MakeOutput({}, {acc / n}, record);
  if (record) {
    Record("mean", {x}, y, [x, y, n]() mutable {
      const double g = y.grad()[0] / n;
      for (double& gx : x.mutable_grad()) gx += g;
    });
  }
  return y;
}

Tensor Graph::MeanRows(const Tensor& x) {
  RequireRank(x, 2, "mean_rows");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  auto xv = x.values();
  std::vector<double> out(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) out[j] += xv[r * cols + j];
  }
  const double n = static_cast<double>(rows);
  for (double& v : out) v /= n;
  const bool record = ShouldRecord({&x});
  Tensor y = MakeOutput({1, cols}, std::move(out), record);
  if (record) {
    Record("mean_rows", {x}, y, [x, y, rows, cols, n]() mutable {
      auto gy = y.grad();
      auto gx = x.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < cols; ++j) gx[r * cols + j] += gy[j] / n;
      }
    });
  }
  return y;
}

Tensor Graph::Reshape(const Tensor& x, Shape shape) {
  if (ShapeNumel(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + ShapeToString(x.shape()) +
                     " as " + ShapeToString(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  const bool record = ShouldRecord({&x});
  Tensor y = MakeOutput(std::move(shape), std::move(out), record);
  if (record) {
    Record("reshape", {x}, y, [x, y]() mutable {
      auto gy = y.grad();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    });
  }
  return y;
}

Tensor Graph::Select(const Tensor& x, std::size_t index) {
  if (x.rank() < 1 || index >= x.dim(0)) {
    throw ShapeError("select: index " + std::to_string(index) +
                     " out of range for " + ShapeToString(x.shape()));
  }
  Shape shape(x.shape().begin() + 1, x.shape().end());
  const std::size_t n = ShapeNumel(shape);
  auto xv = x.values().subspan(index * n, n);
  std::vector<double> out(xv.begin(), xv.end());
  const bool record = ShouldRecord({&x});
  Tensor y = MakeOutput(std::move(shape), std::move(out), record);
  if (record) {
    Record("select", {x}, y, [x, y, index, n]() mutable {
      auto gy = y.grad();
      auto gx = x.mutable_grad().subspan(index * n, n);
      for (std::size_t i = 0; i < n; ++i) gx[i] += gy[i];
    });
  }
  return y;
}

Tensor Graph::Stack(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("stack: no tensors");
  const Shape& inner = parts[0].shape();
  std::vector<double> out;
  out.reserve(parts.size() * parts[0].size());
  bool record = false;
  for (const Tensor& p : parts) {
    if (p.shape() != inner) {
      throw ShapeError("stack: shapes " + Pair(parts[0], p) + " differ");
    }
    out.insert(out.end(), p.values().begin(), p.values().end());
    record = record || ShouldRecord({&p});
  }
  Shape shape{parts.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  Tensor y = MakeOutput(std::move(shape), std::move(out), record);
  if (record) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    Record("stack", inputs, y, [inputs, y]() mutable {
      auto gy = y.grad();
      std::size_t offset = 0;
      for (Tensor& p : inputs) {
        if (p.requires_grad()) {
          auto gp = p.mutable_grad();
          for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += gy[offset + i];
        }
        offset += p.size();
      }
    });
  }
  return y;
}

Tensor Graph::ConcatRows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no tensors");
  const std::size_t cols = parts[0].rank() == 2 ? parts[0].dim(1) : 0;
  std::size_t rows = 0;
  std::vector<double> out;
  bool record = false;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.dim(1) != cols) {
      throw ShapeError("concat_rows: shapes " + Pair(parts[0], p) +
                       " do not conform");
    }
    rows += p.dim(0);
    out.insert(out.end(), p.values().begin(), p.values().end());
    record = record || ShouldRecord({&p});
  }
  Tensor y = MakeOutput({rows, cols}, std::move(out), record);
  if (record) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    Record("concat_rows", inputs, y, [inputs, y]() mutable {
      auto gy = y.grad();
      std::size_t offset = 0;
      for (Tensor& p : inputs) {
        if (p.requires_grad()) {
          auto gp = p.mutable_grad();
          for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += gy[offset + i];
        }
        offset += p.size();
      }
    });
  }
  return y;
}

Tensor Graph::ConcatCols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no tensors");
  const std::size_t rows = parts[0].rank() == 2 ? parts[0].dim(0) : 0;
  std::size_t cols = 0;
  bool record = false;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.dim(0) != rows) {
      throw ShapeError("concat_cols: shapes " + Pair(parts[0], p) +
                       " do not conform");
    }
    cols += p.dim(1);
    record = record || ShouldRecord({&p});
  }
  std::vector<double> out(rows * cols);
  std::size_t col0 = 0;
  for (const Tensor& p : parts) {
    const std::size_t pc = p.dim(1);
    auto pv = p.values();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < pc; ++j) {
        out[r * cols + col0 + j] = pv[r * pc + j];
      }
    }
    col0 += pc;
  }
  Tensor y = MakeOutput({rows, cols}, std::move(out), record);
  if (record) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    Record("concat_cols", inputs, y, [inputs, y, rows, cols]() mutable {
      auto gy = y.grad();
      std::size_t col0 = 0;
      for (Tensor& p : inputs) {
        const std::size_t pc = p.dim(1);
        if (p.requires_grad()) {
          auto gp = p.mutable_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < pc; ++j) {
              gp[r * pc + j] += gy[r * cols + col0 + j];
            }
          }
        }
        col0 += pc;
      }
    });
  }
  return y;
}

Tensor Graph::SliceCols(const Tensor& x, std::size_t begin,
                        std::size_t count) {
  RequireRank(x, 2, "slice_cols");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (count == 0 || begin + count > cols) {
    throw ShapeError("slice_cols: columns [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " +
                     ShapeToString(x.shape()));
  }
  auto xv = x.values();
  std::vector<double> out(rows * count);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < count; ++j) {
      out[r * count + j] = xv[r * cols + begin + j];
    }
  }
  const bool record = ShouldRecord({&x});
  Tensor y = MakeOutput({rows, count}, std::move(out), record);
  if (record) {
    Record("slice_cols", {x}, y, [x, y, rows, cols, begin, count]() mutable {
      auto gy = y.grad();
      auto gx = x.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < count; ++j) {
          gx[r * cols + begin + j] += gy[r * count + j];
        }
      }
    });
  }
  return y;
}

Tensor Graph::Gather(const Tensor& x, std::vector<std::size_t> index,
                      Shape shape) {
  if (ShapeNumel(shape) != index.size()) {
    throw ShapeError("gather: " + std::to_string(index.size()) +
                     " indices for shape " + ShapeToString(shape));
  }
  auto xv = x.values();
  std::vector<double> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= xv.size()) {
      throw ShapeError("gather: index " + std::to_string(index[i]) +
                       " out of range for " + ShapeToString(x.shape()));
    }
    out[i] = xv[index[i]];
  }
  const bool record = ShouldRecord({&x});
  Tensor y = MakeOutput(std::move(shape), std::move(out), record);
  if (record) {
    Record("gather", {x}, y, [x, y, index = std::move(index)]() mutable {
      auto gy = y.grad();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < gy.size(); ++i) gx[index[i]] += gy[i];
    });
  }
  return y;
}

Tensor Graph::CrossEntropy(const Tensor& logits,
                           std::span<const int> labels) {
  RequireRank(logits, 2, "cross_entropy");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (labels.size() != n) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) +
                     " labels for logits " + ShapeToString(logits.shape()));
  }
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= c) {
      throw ArgumentError("cross_entropy: label " + std::to_string(label) +
                          " out of range [0, " + std::to_string(c) + ")");
    }
  }
  auto z = logits.values();
  std::vector<double> probs(n * c);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = z.data() + r * c;
    double m = row[0];
    for (std::size_t j = 1; j < c; ++j) m = std::max(m, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[r * c + j] = std::exp(row[j] - m);
      sum += probs[r * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[r * c + j] /= sum;
    const double lse = m + std::log(sum);
    total += lse - row[labels[r]];
  }
  const double nn = static_cast<double>(n);
  const bool record = ShouldRecord({&logits});
  Tensor y = MakeOutput({}, {total / nn}, record);
  if (record) {
    std::vector<int> owned(labels.begin(), labels.end());
    Record("cross_entropy", {logits}, y,
           [logits, y, n, c, nn, probs = std::move(probs),
            owned = std::move(owned)]() mutable {
             const double g = y.grad()[0] / nn;
             auto gz = logits.mutable_grad();
             for (std::size_t r = 0; r < n; ++r) {
               for (std::size_t j = 0; j < c; ++j) {
                 const double onehot =
                     static_cast<int>(j) == owned[r] ? 1.0 : 0.0;
                 gz[r * c + j] += g * (probs[r * c + j] - onehot);
               }
             }
           });
  }
  return y;
}

void Graph::Backward(const Tensor& loss) {
  if (!(loss.rank() == 0 || (loss.rank() == 1 && loss.dim(0) == 1))) {
    throw ArgumentError("backward: loss must be a scalar, got " +
                        ShapeToString(loss.shape()));
  }
  for (Node& node : nodes_) {
    node.output.ZeroGrad();
    for (Tensor& t : node.inputs) {
      if (t.requires_grad()) t.ZeroGrad();
    }
  }
  if (!loss.requires_grad()) return;
  Tensor seed = loss;
  seed.mutable_grad()[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward();
}

}  // namespace lungbench
