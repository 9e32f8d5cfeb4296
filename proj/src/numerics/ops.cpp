#include "gacg/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gacg/numerics/errors.hpp"

namespace gacg::num {
namespace {

using detail::Node;

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": shape mismatch " +
                       shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) mismatch(op, a, b);
}

void require_rank(const char* op, const Tensor& a, std::size_t rank) {
  if (a.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + ", got shape " +
                         shape_str(a.shape()));
  }
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

// Unary elementwise op whose derivative is a function of (input, output).
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  const auto in = a.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return Tensor::make_result(a.shape(), std::move(out), {a}, [deriv](Node& self) {
    Node& p = parent(self, 0);
    auto& pg = p.grad_buffer();
    for (std::size_t i = 0; i < pg.size(); ++i) {
      pg[i] += self.grad[i] * deriv(p.value[i], self.value[i]);
    }
  });
}

// c[r,c] += a[r,k] * b[k,c], skipping zero entries of a.
void gemm_acc(const double* a, const double* b, double* c, std::size_t rows,
              std::size_t inner, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    double* crow = c + i * cols;
    const double* arow = a + i * inner;
    for (std::size_t p = 0; p < inner; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * cols;
      for (std::size_t j = 0; j < cols; ++j) crow[j] += av * brow[j];
    }
  }
}

// ga[r,k] += g[r,c] * b[k,c]^T
void gemm_grad_a(const double* g, const double* b, double* ga, std::size_t rows,
                 std::size_t inner, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* grow = g + i * cols;
    double* garow = ga + i * inner;
    for (std::size_t p = 0; p < inner; ++p) {
      const double* brow = b + p * cols;
      double acc = 0.0;
      for (std::size_t j = 0; j < cols; ++j) acc += grow[j] * brow[j];
      garow[p] += acc;
    }
  }
}

// gb[k,c] += a[r,k]^T * g[r,c]
void gemm_grad_b(const double* a, const double* g, double* gb, std::size_t rows,
                 std::size_t inner, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* arow = a + i * inner;
    const double* grow = g + i * cols;
    for (std::size_t p = 0; p < inner; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* gbrow = gb + p * cols;
      for (std::size_t j = 0; j < cols; ++j) gbrow[j] += av * grow[j];
    }
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      Node& p = parent(self, k);
      if (!p.requires_grad) continue;
      auto& pg = p.grad_buffer();
      for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      Node& p = parent(self, k);
      if (!p.requires_grad) continue;
      const double sign = k == 0 ? 1.0 : -1.0;
      auto& pg = p.grad_buffer();
      for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += sign * self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      Node& p = parent(self, k);
      if (!p.requires_grad) continue;
      const auto& other = parent(self, 1 - k).value;
      auto& pg = p.grad_buffer();
      for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += self.grad[i] * other[i];
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same("div", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] / b.values()[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / pb.value[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] -= self.grad[i] * self.value[i] / pb.value[i];
      }
    }
  });
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
  if (a.rank() == 0 || bias.rank() != 1 || bias.dim(0) != a.shape().back()) {
    mismatch("add_bias", a, bias);
  }
  const std::size_t d = bias.numel();
  std::vector<double> out(a.values().begin(), a.values().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bias.values()[i % d];
  return Tensor::make_result(a.shape(), std::move(out), {a, bias}, [d](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % d] += self.grad[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double x) { return x * factor; },
               [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) mismatch("matmul", a, b);
  const std::size_t rows = a.dim(0), inner = a.dim(1), cols = b.dim(1);
  std::vector<double> out(rows * cols, 0.0);
  gemm_acc(a.values().data(), b.values().data(), out.data(), rows, inner, cols);
  return Tensor::make_result(
      Shape{rows, cols}, std::move(out), {a, b}, [rows, inner, cols](Node& self) {
        Node& pa = parent(self, 0);
        Node& pb = parent(self, 1);
        if (pa.requires_grad) {
          gemm_grad_a(self.grad.data(), pb.value.data(), pa.grad_buffer().data(),
                      rows, inner, cols);
        }
        if (pb.requires_grad) {
          gemm_grad_b(pa.value.data(), self.grad.data(), pb.grad_buffer().data(),
                      rows, inner, cols);
        }
      });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1)) {
    mismatch("bmm", a, b);
  }
  const std::size_t batch = a.dim(0), rows = a.dim(1), inner = a.dim(2), cols = b.dim(2);
  std::vector<double> out(batch * rows * cols, 0.0);
  for (std::size_t k = 0; k < batch; ++k) {
    gemm_acc(a.values().data() + k * rows * inner, b.values().data() + k * inner * cols,
             out.data() + k * rows * cols, rows, inner, cols);
  }
  return Tensor::make_result(
      Shape{batch, rows, cols}, std::move(out), {a, b},
      [batch, rows, inner, cols](Node& self) {
        Node& pa = parent(self, 0);
        Node& pb = parent(self, 1);
        for (std::size_t k = 0; k < batch; ++k) {
          const double* g = self.grad.data() + k * rows * cols;
          if (pa.requires_grad) {
            gemm_grad_a(g, pb.value.data() + k * inner * cols,
                        pa.grad_buffer().data() + k * rows * inner, rows, inner, cols);
          }
          if (pb.requires_grad) {
            gemm_grad_b(pa.value.data() + k * rows * inner, g,
                        pb.grad_buffer().data() + k * inner * cols, rows, inner, cols);
          }
        }
      });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2 && a.rank() != 3) {
    throw DimensionError("transpose: expected rank 2 or 3, got shape " +
                         shape_str(a.shape()));
  }
  const bool batched = a.rank() == 3;
  const std::size_t batch = batched ? a.dim(0) : 1;
  const std::size_t rows = a.dim(a.rank() - 2), cols = a.dim(a.rank() - 1);
  auto permute = [batch, rows, cols](const double* src, double* dst, bool accumulate) {
    for (std::size_t k = 0; k < batch; ++k) {
      const double* s = src + k * rows * cols;
      double* d = dst + k * rows * cols;
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
          if (accumulate) {
            d[i * cols + j] += s[j * rows + i];
          } else {
            d[j * rows + i] = s[i * cols + j];
          }
        }
      }
    }
  };
  Shape shape = a.shape();
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  std::vector<double> out(a.numel());
  permute(a.values().data(), out.data(), false);
  return Tensor::make_result(std::move(shape), std::move(out), {a},
                             [permute](Node& self) {
                               permute(self.grad.data(),
                                       parent(self, 0).grad_buffer().data(), true);
                             });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                         shape_str(shape));
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  return Tensor::make_result(std::move(shape), std::move(out), {a}, [](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0)) mismatch("concat", a, b);
  const std::size_t rows = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  std::vector<double> out(rows * (ca + cb));
  for (std::size_t i = 0; i < rows; ++i) {
    std::copy_n(a.values().data() + i * ca, ca, out.data() + i * (ca + cb));
    std::copy_n(b.values().data() + i * cb, cb, out.data() + i * (ca + cb) + ca);
  }
  return Tensor::make_result(
      Shape{rows, ca + cb}, std::move(out), {a, b}, [rows, ca, cb](Node& self) {
        Node& pa = parent(self, 0);
        Node& pb = parent(self, 1);
        for (std::size_t i = 0; i < rows; ++i) {
          const double* g = self.grad.data() + i * (ca + cb);
          if (pa.requires_grad) {
            double* d = pa.grad_buffer().data() + i * ca;
            for (std::size_t j = 0; j < ca; ++j) d[j] += g[j];
          }
          if (pb.requires_grad) {
            double* d = pb.grad_buffer().data() + i * cb;
            for (std::size_t j = 0; j < cb; ++j) d[j] += g[ca + j];
          }
        }
      });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor elu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : std::expm1(x); },
               [](double x, double y) { return x > 0.0 ? 1.0 : y + 1.0; });
}

Tensor abs(const Tensor& a) {
  return unary(a, [](double x) { return std::fabs(x); },
               [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& a) {
  return unary(a, [](double x) { return x * x; },
               [](double x, double) { return 2.0 * x; });
}

Tensor pow(const Tensor& a, double p) {
  for (double x : a.values()) {
    if (!(x > 0.0)) throw NumericalError("pow: input must be strictly positive");
  }
  return unary(a, [p](double x) { return std::pow(x, p); },
               [p](double x, double y) { return p * y / x; });
}

Tensor clamp01(const Tensor& a) {
  return unary(a, [](double x) { return std::clamp(x, 0.0, 1.0); },
               [](double x, double) { return (x >= 0.0 && x <= 1.0) ? 1.0 : 0.0; });
}

Tensor floor_at(const Tensor& a, double floor) {
  return unary(a, [floor](double x) { return x >= floor ? x : floor; },
               [floor](double x, double) { return x >= floor ? 1.0 : 0.0; });
}

Tensor softmax_rows(const Tensor& a) {
  if (a.rank() == 0) throw DimensionError("softmax_rows: scalar input");
  const std::size_t cols = a.shape().back();
  const std::size_t rows = a.numel() / cols;
  std::vector<double> out(a.numel());
  const auto in = a.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in.data() + r * cols;
    double* y = out.data() + r * cols;
    const double mx = *std::max_element(x, x + cols);
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) total += (y[j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < cols; ++j) y[j] /= total;
  }
  return Tensor::make_result(a.shape(), std::move(out), {a}, [rows, cols](Node& self) {
    auto& pg = parent(self, 0).grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * cols;
      const double* g = self.grad.data() + r * cols;
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += g[j] * y[j];
      for (std::size_t j = 0; j < cols; ++j) pg[r * cols + j] += y[j] * (g[j] - dot);
    }
  });
}

Tensor l2_norm(const Tensor& a) {
  double ss = 0.0;
  for (double x : a.values()) ss += x * x;
  return Tensor::make_result(Shape{}, {std::sqrt(ss)}, {a}, [](Node& self) {
    const double n = self.value[0];
    if (n == 0.0) return;
    Node& p = parent(self, 0);
    auto& pg = p.grad_buffer();
    for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += self.grad[0] * p.value[i] / n;
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.values()) s += x;
  return Tensor::make_result(Shape{}, {s}, {a}, [](Node& self) {
    auto& pg = parent(self, 0).grad_buffer();
    for (auto& g : pg) g += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw DimensionError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor sum_last(const Tensor& a) {
  if (a.rank() == 0) throw DimensionError("sum_last: scalar input");
  const std::size_t cols = a.shape().back();
  const std::size_t rows = a.numel() / cols;
  Shape shape(a.shape().begin(), a.shape().end() - 1);
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) out[r] += a.values()[r * cols + j];
  }
  return Tensor::make_result(std::move(shape), std::move(out), {a}, [cols](Node& self) {
    auto& pg = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += self.grad[i / cols];
  });
}

Tensor gather_cols(const Tensor& a, std::span<const std::size_t> index) {
  require_rank("gather_cols", a, 2);
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  if (index.size() != rows) {
    throw DimensionError("gather_cols: " + std::to_string(index.size()) +
                         " indices for shape " + shape_str(a.shape()));
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    if (idx[r] >= cols) throw DimensionError("gather_cols: index out of range");
    out[r] = a.values()[r * cols + idx[r]];
  }
  return Tensor::make_result(Shape{rows}, std::move(out), {a},
                             [idx = std::move(idx), cols](Node& self) {
                               auto& pg = parent(self, 0).grad_buffer();
                               for (std::size_t r = 0; r < idx.size(); ++r) {
                                 pg[r * cols + idx[r]] += self.grad[r];
                               }
                             });
}

Tensor pairwise_l2(const Tensor& a) {
  require_rank("pairwise_l2", a, 3);
  const std::size_t batch = a.dim(0), n = a.dim(1), d = a.dim(2);
  std::vector<double> out(batch * n * n, 0.0);
  const auto x = a.values();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* base = x.data() + b * n * d;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        double ss = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          const double diff = base[i * d + k] - base[j * d + k];
          ss += diff * diff;
        }
        out[(b * n + i) * n + j] = out[(b * n + j) * n + i] = std::sqrt(ss);
      }
    }
  }
  return Tensor::make_result(
      Shape{batch, n, n}, std::move(out), {a}, [batch, n, d](Node& self) {
        Node& p = parent(self, 0);
        auto& pg = p.grad_buffer();
        for (std::size_t b = 0; b < batch; ++b) {
          const double* base = p.value.data() + b * n * d;
          double* gbase = pg.data() + b * n * d;
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
              const std::size_t o = (b * n + i) * n + j;
              if (i == j || self.value[o] == 0.0) continue;
              const double c = self.grad[o] / self.value[o];
              for (std::size_t k = 0; k < d; ++k) {
                const double diff = base[i * d + k] - base[j * d + k];
                gbase[i * d + k] += c * diff;
                gbase[j * d + k] -= c * diff;
              }
            }
          }
        }
      });
}

Tensor scale_sym(const Tensor& c, const Tensor& d) {
  if (c.rank() != 3 || d.rank() != 2 || c.dim(0) != d.dim(0) || c.dim(1) != c.dim(2) ||
      c.dim(1) != d.dim(1)) {
    mismatch("scale_sym", c, d);
  }
  const std::size_t batch = c.dim(0), n = c.dim(1);
  std::vector<double> out(c.numel());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        out[(b * n + i) * n + j] =
            c.values()[(b * n + i) * n + j] * (d.values()[b * n + i] * d.values()[b * n + j]);
      }
    }
  }
  return Tensor::make_result(c.shape(), std::move(out), {c, d}, [batch, n](Node& self) {
    Node& pc = parent(self, 0);
    Node& pd = parent(self, 1);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t o = (b * n + i) * n + j;
          const double g = self.grad[o];
          const double di = pd.value[b * n + i], dj = pd.value[b * n + j];
          if (pc.requires_grad) pc.grad_buffer()[o] += g * di * dj;
          if (pd.requires_grad) {
            auto& gd = pd.grad_buffer();
            gd[b * n + i] += g * pc.value[o] * dj;
            gd[b * n + j] += g * di * pc.value[o];
          }
        }
      }
    }
  });
}

Tensor with_unit_diagonal(const Tensor& c) {
  if (c.rank() != 3 || c.dim(1) != c.dim(2)) {
    throw DimensionError("with_unit_diagonal: expected [B,n,n], got " +
                         shape_str(c.shape()));
  }
  const std::size_t batch = c.dim(0), n = c.dim(1);
  std::vector<double> out(c.values().begin(), c.values().end());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < n; ++i) out[(b * n + i) * n + i] = 1.0;
  }
  return Tensor::make_result(c.shape(), std::move(out), {c}, [n](Node& self) {
    auto& pg = parent(self, 0).grad_buffer();
    for (std::size_t o = 0; o < pg.size(); ++o) {
      const std::size_t i = (o / n) % n, j = o % n;
      if (i != j) pg[o] += self.grad[o];
    }
  });
}

Tensor tensor_arith(ArithKind kind, const Tensor& a, const Tensor* b, double factor) {
  auto need_b = [&](const char* op) -> const Tensor& {
    if (b == nullptr) throw DimensionError(std::string(op) + ": missing second operand");
    return *b;
  };
  switch (kind) {
    case ArithKind::kAdd: return add(a, need_b("add"));
    case ArithKind::kSub: return sub(a, need_b("sub"));
    case ArithKind::kMul: return mul(a, need_b("mul"));
    case ArithKind::kMatmul: return matmul(a, need_b("matmul"));
    case ArithKind::kRelu: return relu(a);
    case ArithKind::kSigmoid: return sigmoid(a);
    case ArithKind::kSoftmaxRows: return softmax_rows(a);
    case ArithKind::kL2Norm: return l2_norm(a);
    case ArithKind::kConcat: return concat(a, need_b("concat"));
    case ArithKind::kScale: return scale(a, factor);
    case ArithKind::kClamp01: return clamp01(a);
  }
  throw ParameterError("tensor_arith: unknown kind");
}

}  // namespace gacg::num
