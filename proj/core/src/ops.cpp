// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#include "cfwb/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cfwb {

namespace {

bool g_matmul_fault = false;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void accumulate(const std::shared_ptr<TensorData>& d, const std::vector<double>& contrib) {
  if (!d->wants_grad()) return;
  d->ensure_grad();
  for (std::size_t i = 0; i < contrib.size(); ++i) d->grad[i] += contrib[i];
}

// C (+)= A * B, row-major, sizes m x k x n.
void mm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
           std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C += A * B^T where A is m x k and B is n x k.
void mm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
           std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C += A^T * B where A is m x k and B is m x n; C is k x n.
void mm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
           std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

Tensor make_unary(const Tensor& a, std::vector<double> out_data, const char* name,
                  std::function<void(const std::vector<double>&, std::vector<double>&)> df) {
  Tensor out = Tensor::from_data(a.shape(), std::move(out_data));
  detail::maybe_check_finite(out, name);
  if (Tape* tp = Tape::current()) {
    auto ad = a.ptr();
    auto od = out.ptr();
    tp->record(od, [ad, od, df = std::move(df)] {
      if (od->grad.empty() || !ad->wants_grad()) return;
      ad->ensure_grad();
      df(od->grad, ad->grad);
    });
  }
  return out;
}

}  // namespace

namespace testing {
void set_matmul_backward_fault(bool enabled) { g_matmul_fault = enabled; }
}  // namespace testing

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul: operands must be 2-D, got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1];
  const std::size_t k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  std::vector<double> c(m * n, 0.0);
  mm_nn(a.data(), b.data(), c.data(), m, k, n);
  Tensor out = Tensor::from_data({m, n}, std::move(c));
  detail::maybe_check_finite(out, "matmul");
  if (Tape* tp = Tape::current()) {
    auto ad = a.ptr();
    auto bd = b.ptr();
    auto od = out.ptr();
    tp->record(od, [ad, bd, od, m, k, n] {
      if (od->grad.empty()) return;
      const double* g = od->grad.data();
      if (ad->wants_grad()) {
        ad->ensure_grad();
        // dA = dC * B^T
        mm_nt(g, bd->data.data(), ad->grad.data(), m, n, k);
        if (g_matmul_fault) {
          for (double& v : ad->grad) v *= 1.01;
        }
      }
      if (bd->wants_grad()) {
        bd->ensure_grad();
        // dB = A^T * dC
        mm_tn(ad->data.data(), g, bd->grad.data(), m, k, n);
      }
    });
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose: tensor must be 2-D, got " + shape_str(a.shape()));
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  std::vector<double> t(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) t[j * m + i] = a.data()[i * n + j];
  Tensor out = Tensor::from_data({n, m}, std::move(t));
  if (Tape* tp = Tape::current()) {
    auto ad = a.ptr();
    auto od = out.ptr();
    tp->record(od, [ad, od, m, n] {
      if (od->grad.empty() || !ad->wants_grad()) return;
      ad->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ad->grad[i * n + j] += od->grad[j * m + i];
    });
  }
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  Tensor out = Tensor::from_data(std::move(shape), a.values());
  if (Tape* tp = Tape::current()) {
    auto ad = a.ptr();
    auto od = out.ptr();
    tp->record(od, [ad, od] {
      if (od->grad.empty() || !ad->wants_grad()) return;
      accumulate(ad, od->grad);
    });
  }
  return out;
}

Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1) {
  if (a.rank() != 2) throw ShapeError("slice_rows: tensor must be 2-D");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  if (r0 >= r1 || r1 > m) throw UsageError("slice_rows: invalid range");
  std::vector<double> v(a.data() + r0 * n, a.data() + r1 * n);
  Tensor out = Tensor::from_data({r1 - r0, n}, std::move(v));
  if (Tape* tp = Tape::current()) {
    auto ad = a.ptr();
    auto od = out.ptr();
    tp->record(od, [ad, od, r0, n] {
      if (od->grad.empty() || !ad->wants_grad()) return;
      ad->ensure_grad();
      for (std::size_t i = 0; i < od->grad.size(); ++i) ad->grad[r0 * n + i] += od->grad[i];
    });
  }
  return out;
}

Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1) {
  if (a.rank() != 2) throw ShapeError("slice_cols: tensor must be 2-D");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  if (c0 >= c1 || c1 > n) throw UsageError("slice_cols: invalid range");
  const std::size_t w = c1 - c0;
  std::vector<double> v(m * w);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) v[i * w + j] = a.data()[i * n + c0 + j];
  Tensor out = Tensor::from_data({m, w}, std::move(v));
  if (Tape* tp = Tape::current()) {
    auto ad = a.ptr();
    auto od = out.ptr();
    tp->record(od, [ad, od, m, n, c0, w] {
      if (od->grad.empty() || !ad->wants_grad()) return;
      ad->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) ad->grad[i * n + c0 + j] += od->grad[i * w + j];
    });
  }
  return out;
}

Tensor gather_rows(const Tensor& a, std::vector<std::size_t> idx) {
  if (a.rank() != 2) throw ShapeError("gather_rows: tensor must be 2-D");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  for (std::size_t r : idx) {
    if (r >= m) throw UsageError("gather_rows: row index " + std::to_string(r) + " out of range");
  }
  std::vector<double> v(idx.size() * n);
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy_n(a.data() + idx[i] * n, n, v.data() + i * n);
  Tensor out = Tensor::from_data({idx.size(), n}, std::move(v));
  if (Tape* tp = Tape::current()) {
    auto ad = a.ptr();
    auto od = out.ptr();
    tp->record(od, [ad, od, idx = std::move(idx), n] {
      if (od->grad.empty() || !ad->wants_grad()) return;
      ad->ensure_grad();
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < n; ++j) ad->grad[idx[i] * n + j] += od->grad[i * n + j];
    });
  }
  return out;
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw UsageError("concat_rows: no parts");
  const std::size_t n = parts[0].shape().back();
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.shape()[1] != n) {
      throw ShapeError("concat_rows: column mismatch " + shape_str(p.shape()));
    }
    total += p.shape()[0];
  }
  std::vector<double> v;
  v.reserve(total * n);
  for (const Tensor& p : parts) v.insert(v.end(), p.values().begin(), p.values().end());
  Tensor out = Tensor::from_data({total, n}, std::move(v));
  if (Tape* tp = Tape::current()) {
    std::vector<std::shared_ptr<TensorData>> pds;
    pds.reserve(parts.size());
    for (const Tensor& p : parts) pds.push_back(p.ptr());
    auto od = out.ptr();
    tp->record(od, [pds = std::move(pds), od] {
      if (od->grad.empty()) return;
      std::size_t off = 0;
      for (auto& pd : pds) {
        const std::size_t len = pd->data.size();
        if (pd->wants_grad()) {
          pd->ensure_grad();
          for (std::size_t i = 0; i < len; ++i) pd->grad[i] += od->grad[off + i];
        }
        off += len;
      }
    });
  }
  return out;
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw UsageError("concat_cols: no parts");
  const std::size_t m = parts[0].shape()[0];
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.shape()[0] != m) {
      throw ShapeError("concat_cols: row mismatch " + shape_str(p.shape()));
    }
    total += p.shape()[1];
  }
  std::vector<double> v(m * total);
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    const std::size_t w = p.shape()[1];
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(p.data() + i * w, w, v.data() + i * total + off);
    off += w;
  }
  Tensor out = Tensor::from_data({m, total}, std::move(v));
  if (Tape* tp = Tape::current()) {
    std::vector<std::shared_ptr<TensorData>> pds;
    std::vector<std::size_t> widths;
    for (const Tensor& p : parts) {
      pds.push_back(p.ptr());
      widths.push_back(p.shape()[1]);
    }
    auto od = out.ptr();
    tp->record(od, [pds = std::move(pds), widths = std::move(widths), od, m, total] {
      if (od->grad.empty()) return;
      std::size_t off = 0;
      for (std::size_t pi = 0; pi < pds.size(); ++pi) {
        const std::size_t w = widths[pi];
        if (pds[pi]->wants_grad()) {
          pds[pi]->ensure_grad();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < w; ++j)
              pds[pi]->grad[i * w + j] += od->grad[i * total + off + j];
        }
        off += w;
      }
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] + b.data()[i];
  Tensor out = Tensor::from_data(a.shape(), std::move(v));
  detail::maybe_check_finite(out, "add");
  if (Tape* tp = Tape::current()) {
    auto ad = a.ptr();
    auto bd = b.ptr();
    auto od = out.ptr();
    tp->record(od, [ad, bd, od] {
      if (od->grad.empty()) return;
      accumulate(ad, od->grad);
      accumulate(bd, od->grad);
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] - b.data()[i];
  Tensor out = Tensor::from_data(a.shape(), std::move(v));
  detail::maybe_check_finite(out, "sub");
  if (Tape* tp = Tape::current()) {
    auto ad = a.ptr();
    auto bd = b.ptr();
    auto od = out.ptr();
    tp->record(od, [ad, bd, od] {
      if (od->grad.empty()) return;
      accumulate(ad, od->grad);
      if (bd->wants_grad()) {
        bd->ensure_grad();
        for (std::size_t i = 0; i < od->grad.size(); ++i) bd->grad[i] -= od->grad[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] * b.data()[i];
  Tensor out = Tensor::from_data(a.shape(), std::move(v));
  detail::maybe_check_finite(out, "mul");
  if (Tape* tp = Tape::current()) {
    auto ad = a.ptr();
    auto bd = b.ptr();
    auto od = out.ptr();
    tp->record(od, [ad, bd, od] {
      if (od->grad.empty()) return;
      if (ad->wants_grad()) {
        ad->ensure_grad();
        for (std::size_t i = 0; i < od->grad.size(); ++i)
          ad->grad[i] += od->grad[i] * bd->data[i];
      }
      if (bd->wants_grad()) {
        bd->ensure_grad();
        for (std::size_t i = 0; i < od->grad.size(); ++i)
          bd->grad[i] += od->grad[i] * ad->data[i];
      }
    });
  }
  return out;
}

Tensor add_scalar(const Tensor& a, double c) {
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] + c;
  return make_unary(a, std::move(v), "add_scalar", [](const std::vector<double>& g, std::vector<double>& da) {
    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
  });
}

Tensor mul_scalar(const Tensor& a, double c) {
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] * c;
  return make_unary(a, std::move(v), "mul_scalar", [c](const std::vector<double>& g, std::vector<double>& da) {
    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * c;
  });
}

Tensor add_bias_rows(const Tensor& x, const Tensor& bias) {
  if (x.rank() != 2 || bias.rank() != 1 || bias.shape()[0] != x.shape()[1]) {
    throw ShapeError("add_bias_rows: shape mismatch " + shape_str(x.shape()) + " vs " +
                     shape_str(bias.shape()));
  }
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  std::vector<double> v(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) v[i * n + j] = x.data()[i * n + j] + bias.data()[j];
  Tensor out = Tensor::from_data(x.shape(), std::move(v));
  detail::maybe_check_finite(out, "add_bias_rows");
  if (Tape* tp = Tape::current()) {
    auto xd = x.ptr();
    auto bd = bias.ptr();
    auto od = out.ptr();
    tp->record(od, [xd, bd, od, m, n] {
      if (od->grad.empty()) return;
      accumulate(xd, od->grad);
      if (bd->wants_grad()) {
        bd->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) bd->grad[j] += od->grad[i * n + j];
      }
    });
  }
  return out;
}

Tensor relu(const Tensor& a) {
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
  auto ad = a.ptr();
  return make_unary(a, std::move(v), "relu", [ad](const std::vector<double>& g, std::vector<double>& da) {
    for (std::size_t i = 0; i < g.size(); ++i)
      if (ad->data[i] > 0.0) da[i] += g[i];
  });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Tensor gelu(const Tensor& a) {
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = a.data()[i];
    v[i] = 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
  }
  auto ad = a.ptr();
  return make_unary(a, std::move(v), "gelu", [ad](const std::vector<double>& g, std::vector<double>& da) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = ad->data[i];
      const double u = kGeluC * (x + kGeluA * x * x * x);
      const double t = std::tanh(u);
      const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
      da[i] += g[i] * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du);
    }
  });
}

Tensor tanh_t(const Tensor& a) {
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::tanh(a.data()[i]);
  Tensor out = Tensor::from_data(a.shape(), std::move(v));
  detail::maybe_check_finite(out, "tanh");
  if (Tape* tp = Tape::current()) {
    auto ad = a.ptr();
    auto od = out.ptr();
    tp->record(od, [ad, od] {
      if (od->grad.empty() || !ad->wants_grad()) return;
      ad->ensure_grad();
      for (std::size_t i = 0; i < od->grad.size(); ++i) {
        const double y = od->data[i];
        ad->grad[i] += od->grad[i] * (1.0 - y * y);
      }
    });
  }
  return out;
}

Tensor sigmoid_t(const Tensor& a) {
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 / (1.0 + std::exp(-a.data()[i]));
  Tensor out = Tensor::from_data(a.shape(), std::move(v));
  detail::maybe_check_finite(out, "sigmoid");
  if (Tape* tp = Tape::current()) {
    auto ad = a.ptr();
    auto od = out.ptr();
    tp->record(od, [ad, od] {
      if (od->grad.empty() || !ad->wants_grad()) return;
      ad->ensure_grad();
      for (std::size_t i = 0; i < od->grad.size(); ++i) {
        const double y = od->data[i];
        ad->grad[i] += od->grad[i] * y * (1.0 - y);
      }
    });
  }
  return out;
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  constexpr double kEps = 1e-5;
  if (x.rank() != 2) throw ShapeError("layer_norm: input must be 2-D, got " + shape_str(x.shape()));
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  if (gain.rank() != 1 || gain.shape()[0] != n || bias.rank() != 1 || bias.shape()[0] != n) {
    throw ShapeError("layer_norm: gain/bias must be length " + std::to_string(n));
  }
  std::vector<double> v(m * n);
  auto xhat = std::make_shared<std::vector<double>>(m * n);
  auto inv_sigma = std::make_shared<std::vector<double>>(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = x.data() + i * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += row[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + kEps);
    (*inv_sigma)[i] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const double xh = (row[j] - mean) * is;
      (*xhat)[i * n + j] = xh;
      v[i * n + j] = xh * gain.data()[j] + bias.data()[j];
    }
  }
  Tensor out = Tensor::from_data(x.shape(), std::move(v));
  detail::maybe_check_finite(out, "layer_norm");
  if (Tape* tp = Tape::current()) {
    auto xd = x.ptr();
    auto gd = gain.ptr();
    auto bd = bias.ptr();
    auto od = out.ptr();
    tp->record(od, [xd, gd, bd, od, xhat, inv_sigma, m, n] {
      if (od->grad.empty()) return;
      const double* g = od->grad.data();
      if (gd->wants_grad()) {
        gd->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) gd->grad[j] += g[i * n + j] * (*xhat)[i * n + j];
      }
      if (bd->wants_grad()) {
        bd->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) bd->grad[j] += g[i * n + j];
      }
      if (xd->wants_grad()) {
        xd->ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
          double mean_dxh = 0.0, mean_dxh_xh = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            const double dxh = g[i * n + j] * gd->data[j];
            mean_dxh += dxh;
            mean_dxh_xh += dxh * (*xhat)[i * n + j];
          }
          mean_dxh /= static_cast<double>(n);
          mean_dxh_xh /= static_cast<double>(n);
          const double is = (*inv_sigma)[i];
          for (std::size_t j = 0; j < n; ++j) {
            const double dxh = g[i * n + j] * gd->data[j];
            xd->grad[i * n + j] += is * (dxh - mean_dxh - (*xhat)[i * n + j] * mean_dxh_xh);
          }
        }
      }
    });
  }
  return out;
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw ShapeError("softmax: axis " + std::to_string(axis) + " out of range for " +
                     shape_str(x.shape()));
  }
  if (x.rank() > 2) throw ShapeError("softmax: rank > 2 not supported");
  // Normalize to the 2-D row-softmax case.
  const bool was_1d = x.rank() == 1;
  std::size_t m, n;
  bool along_cols;  // true: softmax within each row
  if (was_1d) {
    m = 1;
    n = x.shape()[0];
    along_cols = true;
  } else {
    m = x.shape()[0];
    n = x.shape()[1];
    along_cols = (axis == 1);
  }
  std::vector<double> v(x.size());
  const std::size_t outer = along_cols ? m : n;
  const std::size_t inner = along_cols ? n : m;
  auto idx = [along_cols, n](std::size_t o, std::size_t i) {
    return along_cols ? o * n + i : i * n + o;
  };
  for (std::size_t o = 0; o < outer; ++o) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < inner; ++i) mx = std::max(mx, x.data()[idx(o, i)]);
    double sum = 0.0;
    for (std::size_t i = 0; i < inner; ++i) {
      const double e = std::exp(x.data()[idx(o, i)] - mx);
      v[idx(o, i)] = e;
      sum += e;
    }
    for (std::size_t i = 0; i < inner; ++i) v[idx(o, i)] /= sum;
  }
  Tensor out = Tensor::from_data(x.shape(), std::move(v));
  detail::maybe_check_finite(out, "softmax");
  if (Tape* tp = Tape::current()) {
    auto xd = x.ptr();
    auto od = out.ptr();
    tp->record(od, [xd, od, outer, inner, idx] {
      if (od->grad.empty() || !xd->wants_grad()) return;
      xd->ensure_grad();
      for (std::size_t o = 0; o < outer; ++o) {
        double dot = 0.0;
        for (std::size_t i = 0; i < inner; ++i)
          dot += od->grad[idx(o, i)] * od->data[idx(o, i)];
        for (std::size_t i = 0; i < inner; ++i) {
          const std::size_t p = idx(o, i);
          xd->grad[p] += od->data[p] * (od->grad[p] - dot);
        }
      }
    });
  }
  return out;
}

Tensor causal_conv1d(const Tensor& x, const Tensor& kernel) {
  if (x.rank() != 2) throw ShapeError("causal_conv1d: input must be 2-D, got " + shape_str(x.shape()));
  if (kernel.rank() != 3) {
    throw ShapeError("causal_conv1d: kernel must be (k x D_in x D_out), got " +
                     shape_str(kernel.shape()));
  }
  const std::size_t T = x.shape()[0], din = x.shape()[1];
  const std::size_t k = kernel.shape()[0], kd_in = kernel.shape()[1], dout = kernel.shape()[2];
  if (k < 1) throw ConfigError("causal_conv1d: kernel width must be >= 1");
  if (kd_in != din) {
    throw ShapeError("causal_conv1d: kernel D_in " + std::to_string(kd_in) +
                     " does not match input " + std::to_string(din));
  }
  std::vector<double> v(T * dout, 0.0);
  // out[t] = sum_j x[t - j] * kernel[j], zero-padded on the left.
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < k && j <= t; ++j) {
      const double* xrow = x.data() + (t - j) * din;
      const double* kmat = kernel.data() + j * din * dout;
      double* orow = v.data() + t * dout;
      for (std::size_t a = 0; a < din; ++a) {
        const double xv = xrow[a];
        if (xv == 0.0) continue;
        const double* krow = kmat + a * dout;
        for (std::size_t b = 0; b < dout; ++b) orow[b] += xv * krow[b];
      }
    }
  }
  Tensor out = Tensor::from_data({T, dout}, std::move(v));
  detail::maybe_check_finite(out, "causal_conv1d");
  if (Tape* tp = Tape::current()) {
    auto xd = x.ptr();
    auto kd = kernel.ptr();
    auto od = out.ptr();
    tp->record(od, [xd, kd, od, T, din, k, dout] {
      if (od->grad.empty()) return;
      const double* g = od->grad.data();
      if (xd->wants_grad()) xd->ensure_grad();
      if (kd->wants_grad()) kd->ensure_grad();
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < k && j <= t; ++j) {
          const double* kmat = kd->data.data() + j * din * dout;
          const double* xrow = xd->data.data() + (t - j) * din;
          const double* grow = g + t * dout;
          if (xd->wants_grad()) {
            double* dxrow = xd->grad.data() + (t - j) * din;
            for (std::size_t a = 0; a < din; ++a) {
              double acc = 0.0;
              const double* krow = kmat + a * dout;
              for (std::size_t b = 0; b < dout; ++b) acc += grow[b] * krow[b];
              dxrow[a] += acc;
            }
          }
          if (kd->wants_grad()) {
            double* dkmat = kd->grad.data() + j * din * dout;
            for (std::size_t a = 0; a < din; ++a) {
              const double xv = xrow[a];
              if (xv == 0.0) continue;
              double* dkrow = dkmat + a * dout;
              for (std::size_t b = 0; b < dout; ++b) dkrow[b] += xv * grow[b];
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor embedding(const std::vector<int>& ids, const Tensor& table) {
  if (table.rank() != 2) throw ShapeError("embedding: table must be 2-D");
  const std::size_t v = table.shape()[0], d = table.shape()[1];
  if (ids.empty()) throw UsageError("embedding: empty id sequence");
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= v) {
      throw DataError("embedding: token id " + std::to_string(id) + " out of range [0, " +
                      std::to_string(v) + ")");
    }
  }
  std::vector<double> out_data(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy_n(table.data() + static_cast<std::size_t>(ids[i]) * d, d, out_data.data() + i * d);
  Tensor out = Tensor::from_data({ids.size(), d}, std::move(out_data));
  if (Tape* tp = Tape::current()) {
    auto td = table.ptr();
    auto od = out.ptr();
    tp->record(od, [td, od, ids, d] {
      if (od->grad.empty() || !td->wants_grad()) return;
      td->ensure_grad();
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = 0; j < d; ++j)
          td->grad[static_cast<std::size_t>(ids[i]) * d + j] += od->grad[i * d + j];
    });
  }
  return out;
}

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  Tensor out = Tensor::scalar(s);
  detail::maybe_check_finite(out, "sum");
  if (Tape* tp = Tape::current()) {
    auto ad = a.ptr();
    auto od = out.ptr();
    tp->record(od, [ad, od] {
      if (od->grad.empty() || !ad->wants_grad()) return;
      ad->ensure_grad();
      for (double& g : ad->grad) g += od->grad[0];
    });
  }
  return out;
}

Tensor mean_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  const double inv = 1.0 / static_cast<double>(a.size());
  Tensor out = Tensor::scalar(s * inv);
  detail::maybe_check_finite(out, "mean");
  if (Tape* tp = Tape::current()) {
    auto ad = a.ptr();
    auto od = out.ptr();
    tp->record(od, [ad, od, inv] {
      if (od->grad.empty() || !ad->wants_grad()) return;
      ad->ensure_grad();
      for (double& g : ad->grad) g += od->grad[0] * inv;
    });
  }
  return out;
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  check_same_shape(pred, target, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.data()[i] - target.data()[i];
    s += d * d;
  }
  const double inv = 1.0 / static_cast<double>(pred.size());
  Tensor out = Tensor::scalar(s * inv);
  detail::maybe_check_finite(out, "mse");
  if (Tape* tp = Tape::current()) {
    auto pd = pred.ptr();
    auto td = target.ptr();
    auto od = out.ptr();
    tp->record(od, [pd, td, od, inv] {
      if (od->grad.empty()) return;
      const double g = od->grad[0];
      if (pd->wants_grad()) {
        pd->ensure_grad();
        for (std::size_t i = 0; i < pd->data.size(); ++i)
          pd->grad[i] += 2.0 * (pd->data[i] - td->data[i]) * inv * g;
      }
      if (td->wants_grad()) {
        td->ensure_grad();
        for (std::size_t i = 0; i < td->data.size(); ++i)
          td->grad[i] -= 2.0 * (pd->data[i] - td->data[i]) * inv * g;
      }
    });
  }
  return out;
}

Tensor cross_entropy_loss(const Tensor& logits, const std::vector<int>& targets) {
  if (logits.rank() != 2) throw ShapeError("cross_entropy: logits must be (T x V)");
  const std::size_t T = logits.shape()[0], V = logits.shape()[1];
  if (targets.size() != T) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(T) + " rows");
  }
  for (int y : targets) {
    if (y < 0 || static_cast<std::size_t>(y) >= V) {
      throw DataError("cross_entropy: class index " + std::to_string(y) + " out of range [0, " +
                      std::to_string(V) + ")");
    }
  }
  // Stable log-softmax.
  auto probs = std::make_shared<std::vector<double>>(T * V);
  double loss = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const double* row = logits.data() + t * V;
    double mx = row[0];
    for (std::size_t v = 1; v < V; ++v) mx = std::max(mx, row[v]);
    double sum = 0.0;
    for (std::size_t v = 0; v < V; ++v) {
      const double e = std::exp(row[v] - mx);
      (*probs)[t * V + v] = e;
      sum += e;
    }
    for (std::size_t v = 0; v < V; ++v) (*probs)[t * V + v] /= sum;
    loss -= std::log((*probs)[t * V + static_cast<std::size_t>(targets[t])]);
  }
  const double inv = 1.0 / static_cast<double>(T);
  Tensor out = Tensor::scalar(loss * inv);
  detail::maybe_check_finite(out, "cross_entropy");
  if (Tape* tp = Tape::current()) {
    auto ld = logits.ptr();
    auto od = out.ptr();
    tp->record(od, [ld, od, probs, targets, T, V, inv] {
      if (od->grad.empty() || !ld->wants_grad()) return;
      ld->ensure_grad();
      const double g = od->grad[0] * inv;
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t v = 0; v < V; ++v) {
          double p = (*probs)[t * V + v];
          if (v == static_cast<std::size_t>(targets[t])) p -= 1.0;
          ld->grad[t * V + v] += p * g;
        }
      }
    });
  }
  return out;
}

}  // namespace cfwb
