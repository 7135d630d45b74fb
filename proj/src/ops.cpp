#include "hanet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hanet/error.hpp"

namespace hanet::ops {

namespace {

template <typename Dtype>
using Node = detail::Node<Dtype>;

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) +
                   " and " + shape_str(b));
}

// Splits a shape around `axis` into (outer, axis length, inner) extents.
struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for shape " + shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t ea = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t eb = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (ea != eb && ea != 1 && eb != 1) shape_fail(op, a, b);
    out[i] = std::max(ea, eb);
  }
  return out;
}

// For every flat index of `out`, the flat index of the broadcast input.
std::vector<std::size_t> broadcast_index(const Shape& in, const Shape& out) {
  const std::size_t rank = out.size();
  std::vector<std::size_t> in_stride(rank, 0);
  std::size_t stride = 1;
  for (std::size_t i = in.size(); i-- > 0;) {
    const std::size_t axis = i + (rank - in.size());
    in_stride[axis] = in[i] == 1 ? 0 : stride;
    stride *= in[i];
  }
  const std::size_t n = shape_numel(out);
  std::vector<std::size_t> map(n);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t offset = 0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    map[flat] = offset;
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      offset += in_stride[d];
      if (idx[d] < out[d]) break;
      offset -= in_stride[d] * idx[d];
      idx[d] = 0;
    }
  }
  return map;
}

template <typename Dtype, typename F, typename DA, typename DB>
Tensor<Dtype> binary_op(const Tensor<Dtype>& a, const Tensor<Dtype>& b,
                        const char* name, F f, DA da, DB db) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape(), name);
  const std::size_t n = shape_numel(out_shape);
  const bool same_a = a.shape() == out_shape;
  const bool same_b = b.shape() == out_shape;
  std::vector<std::size_t> ia, ib;
  if (!same_a) ia = broadcast_index(a.shape(), out_shape);
  if (!same_b) ib = broadcast_index(b.shape(), out_shape);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<Dtype> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = f(av[same_a ? i : ia[i]], bv[same_b ? i : ib[i]]);
  }
  Node<Dtype>* pa = a.raw();
  Node<Dtype>* pb = b.raw();
  return Tensor<Dtype>::make_result(
      out_shape, std::move(out), {a, b},
      [pa, pb, same_a, same_b, ia = std::move(ia), ib = std::move(ib), da,
       db](Node<Dtype>& self) {
        for (std::size_t i = 0; i < self.data.size(); ++i) {
          const Dtype g = self.grad[i];
          if (g == Dtype(0)) continue;
          const std::size_t ja = same_a ? i : ia[i];
          const std::size_t jb = same_b ? i : ib[i];
          const Dtype x = pa->data[ja];
          const Dtype y = pb->data[jb];
          if (pa->requires_grad) pa->grad[ja] += g * da(x, y, self.data[i]);
          if (pb->requires_grad) pb->grad[jb] += g * db(x, y, self.data[i]);
        }
      },
      name);
}

template <typename Dtype, typename F, typename D>
Tensor<Dtype> unary_op(const Tensor<Dtype>& x, const char* name, F f, D d) {
  const auto xv = x.values();
  std::vector<Dtype> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  Node<Dtype>* px = x.raw();
  return Tensor<Dtype>::make_result(
      x.shape(), std::move(out), {x},
      [px, d](Node<Dtype>& self) {
        for (std::size_t i = 0; i < self.data.size(); ++i) {
          px->grad[i] += self.grad[i] * d(px->data[i], self.data[i]);
        }
      },
      name);
}

void require_rank2(const Shape& s, const char* op) {
  if (s.size() != 2) {
    throw ShapeError(std::string(op) + ": expected a 2-D tensor, got " +
                     shape_str(s));
  }
}

}  // namespace

template <typename Dtype>
Tensor<Dtype> add(const Tensor<Dtype>& a, const Tensor<Dtype>& b) {
  return binary_op(
      a, b, "add", [](Dtype x, Dtype y) { return x + y; },
      [](Dtype, Dtype, Dtype) { return Dtype(1); },
      [](Dtype, Dtype, Dtype) { return Dtype(1); });
}

template <typename Dtype>
Tensor<Dtype> sub(const Tensor<Dtype>& a, const Tensor<Dtype>& b) {
  return binary_op(
      a, b, "sub", [](Dtype x, Dtype y) { return x - y; },
      [](Dtype, Dtype, Dtype) { return Dtype(1); },
      [](Dtype, Dtype, Dtype) { return Dtype(-1); });
}

template <typename Dtype>
Tensor<Dtype> mul(const Tensor<Dtype>& a, const Tensor<Dtype>& b) {
  return binary_op(
      a, b, "mul", [](Dtype x, Dtype y) { return x * y; },
      [](Dtype, Dtype y, Dtype) { return y; },
      [](Dtype x, Dtype, Dtype) { return x; });
}

template <typename Dtype>
Tensor<Dtype> div(const Tensor<Dtype>& a, const Tensor<Dtype>& b) {
  return binary_op(
      a, b, "div", [](Dtype x, Dtype y) { return x / y; },
      [](Dtype, Dtype y, Dtype) { return Dtype(1) / y; },
      [](Dtype x, Dtype y, Dtype) { return -x / (y * y); });
}

template <typename Dtype>
Tensor<Dtype> minimum(const Tensor<Dtype>& a, const Tensor<Dtype>& b) {
  return binary_op(
      a, b, "minimum", [](Dtype x, Dtype y) { return x <= y ? x : y; },
      [](Dtype x, Dtype y, Dtype) { return x <= y ? Dtype(1) : Dtype(0); },
      [](Dtype x, Dtype y, Dtype) { return x <= y ? Dtype(0) : Dtype(1); });
}

template <typename Dtype>
Tensor<Dtype> maximum(const Tensor<Dtype>& a, const Tensor<Dtype>& b) {
  return binary_op(
      a, b, "maximum", [](Dtype x, Dtype y) { return x >= y ? x : y; },
      [](Dtype x, Dtype y, Dtype) { return x >= y ? Dtype(1) : Dtype(0); },
      [](Dtype x, Dtype y, Dtype) { return x >= y ? Dtype(0) : Dtype(1); });
}

template <typename Dtype>
Tensor<Dtype> add_scalar(const Tensor<Dtype>& x, Dtype value) {
  return unary_op(
      x, "add_scalar", [value](Dtype v) { return v + value; },
      [](Dtype, Dtype) { return Dtype(1); });
}

template <typename Dtype>
Tensor<Dtype> scale(const Tensor<Dtype>& x, Dtype factor) {
  return unary_op(
      x, "scale", [factor](Dtype v) { return v * factor; },
      [factor](Dtype, Dtype) { return factor; });
}

template <typename Dtype>
Tensor<Dtype> relu(const Tensor<Dtype>& x) {
  return unary_op(
      x, "relu", [](Dtype v) { return v > Dtype(0) ? v : Dtype(0); },
      [](Dtype v, Dtype) { return v > Dtype(0) ? Dtype(1) : Dtype(0); });
}

template <typename Dtype>
Tensor<Dtype> sigmoid(const Tensor<Dtype>& x) {
  return unary_op(
      x, "sigmoid",
      [](Dtype v) {
        if (v >= Dtype(0)) return Dtype(1) / (Dtype(1) + std::exp(-v));
        const Dtype e = std::exp(v);
        return e / (Dtype(1) + e);
      },
      [](Dtype, Dtype y) { return y * (Dtype(1) - y); });
}

template <typename Dtype>
Tensor<Dtype> tanh(const Tensor<Dtype>& x) {
  return unary_op(
      x, "tanh", [](Dtype v) { return std::tanh(v); },
      [](Dtype, Dtype y) { return Dtype(1) - y * y; });
}

template <typename Dtype>
Tensor<Dtype> exp(const Tensor<Dtype>& x) {
  return unary_op(
      x, "exp", [](Dtype v) { return std::exp(v); },
      [](Dtype, Dtype y) { return y; });
}

template <typename Dtype>
Tensor<Dtype> log(const Tensor<Dtype>& x) {
  return unary_op(
      x, "log", [](Dtype v) { return std::log(v); },
      [](Dtype v, Dtype) { return Dtype(1) / v; });
}

template <typename Dtype>
Tensor<Dtype> sqrt(const Tensor<Dtype>& x) {
  return unary_op(
      x, "sqrt", [](Dtype v) { return std::sqrt(v); },
      [](Dtype, Dtype y) { return Dtype(0.5) / y; });
}

template <typename Dtype>
Tensor<Dtype> clamp(const Tensor<Dtype>& x, Dtype lo, Dtype hi) {
  return unary_op(
      x, "clamp", [lo, hi](Dtype v) { return std::clamp(v, lo, hi); },
      [lo, hi](Dtype v, Dtype) {
        return (v > lo && v < hi) ? Dtype(1) : Dtype(0);
      });
}

template <typename Dtype>
Tensor<Dtype> matmul(const Tensor<Dtype>& a, const Tensor<Dtype>& b) {
  require_rank2(a.shape(), "matmul");
  require_rank2(b.shape(), "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) shape_fail("matmul", a.shape(), b.shape());
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<Dtype> out(m * n);
  std::vector<double> acc(n);
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double x = av[i * k + p];
      if (x == 0.0) continue;
      const Dtype* brow = &bv[p * n];
      for (std::size_t j = 0; j < n; ++j) acc[j] += x * brow[j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = static_cast<Dtype>(acc[j]);
  }
  Node<Dtype>* pa = a.raw();
  Node<Dtype>* pb = b.raw();
  return Tensor<Dtype>::make_result(
      {m, n}, std::move(out), {a, b},
      [pa, pb, m, k, n](Node<Dtype>& self) {
        const auto& g = self.grad;
        if (pa->requires_grad) {
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              double s = 0.0;
              for (std::size_t j = 0; j < n; ++j) {
                s += static_cast<double>(g[i * n + j]) * pb->data[p * n + j];
              }
              pa->grad[i * k + p] += static_cast<Dtype>(s);
            }
          }
        }
        if (pb->requires_grad) {
          std::vector<double> acc(n);
          for (std::size_t p = 0; p < k; ++p) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t i = 0; i < m; ++i) {
              const double x = pa->data[i * k + p];
              if (x == 0.0) continue;
              for (std::size_t j = 0; j < n; ++j) acc[j] += x * g[i * n + j];
            }
            for (std::size_t j = 0; j < n; ++j) {
              pb->grad[p * n + j] += static_cast<Dtype>(acc[j]);
            }
          }
        }
      },
      "matmul");
}

template <typename Dtype>
Tensor<Dtype> transpose(const Tensor<Dtype>& x) {
  require_rank2(x.shape(), "transpose");
  const std::size_t r = x.dim(0), c = x.dim(1);
  const auto xv = x.values();
  std::vector<Dtype> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xv[i * c + j];
  }
  Node<Dtype>* px = x.raw();
  return Tensor<Dtype>::make_result(
      {c, r}, std::move(out), {x},
      [px, r, c](Node<Dtype>& self) {
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            px->grad[i * c + j] += self.grad[j * r + i];
          }
        }
      },
      "transpose");
}

template <typename Dtype>
Tensor<Dtype> reshape(const Tensor<Dtype>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) shape_fail("reshape", x.shape(), shape);
  std::vector<Dtype> out(x.values().begin(), x.values().end());
  Node<Dtype>* px = x.raw();
  return Tensor<Dtype>::make_result(
      std::move(shape), std::move(out), {x},
      [px](Node<Dtype>& self) {
        for (std::size_t i = 0; i < self.data.size(); ++i) {
          px->grad[i] += self.grad[i];
        }
      },
      "reshape");
}

template <typename Dtype>
Tensor<Dtype> sum(const Tensor<Dtype>& x) {
  double s = 0.0;
  for (Dtype v : x.values()) s += v;
  Node<Dtype>* px = x.raw();
  return Tensor<Dtype>::make_result(
      {1}, {static_cast<Dtype>(s)}, {x},
      [px](Node<Dtype>& self) {
        const Dtype g = self.grad[0];
        for (Dtype& gx : px->grad) gx += g;
      },
      "sum");
}

template <typename Dtype>
Tensor<Dtype> sum(const Tensor<Dtype>& x, std::size_t axis, bool keepdim) {
  const AxisSplit s = split_axis(x.shape(), axis, "sum");
  Shape out_shape = x.shape();
  if (keepdim || out_shape.size() == 1) {
    out_shape[axis] = 1;
  } else {
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  const auto xv = x.values();
  std::vector<Dtype> out(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      double acc = 0.0;
      for (std::size_t l = 0; l < s.len; ++l) {
        acc += xv[(o * s.len + l) * s.inner + in];
      }
      out[o * s.inner + in] = static_cast<Dtype>(acc);
    }
  }
  Node<Dtype>* px = x.raw();
  return Tensor<Dtype>::make_result(
      std::move(out_shape), std::move(out), {x},
      [px, s](Node<Dtype>& self) {
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t in = 0; in < s.inner; ++in) {
            const Dtype g = self.grad[o * s.inner + in];
            for (std::size_t l = 0; l < s.len; ++l) {
              px->grad[(o * s.len + l) * s.inner + in] += g;
            }
          }
        }
      },
      "sum_axis");
}

template <typename Dtype>
Tensor<Dtype> mean(const Tensor<Dtype>& x) {
  return scale(sum(x), Dtype(1) / static_cast<Dtype>(x.numel()));
}

template <typename Dtype>
Tensor<Dtype> mean(const Tensor<Dtype>& x, std::size_t axis, bool keepdim) {
  const std::size_t len = x.dim(axis);
  return scale(sum(x, axis, keepdim), Dtype(1) / static_cast<Dtype>(len));
}

template <typename Dtype>
Tensor<Dtype> softmax(const Tensor<Dtype>& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "softmax");
  const auto xv = x.values();
  std::vector<Dtype> out(xv.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      auto at = [&](std::size_t l) { return (o * s.len + l) * s.inner + in; };
      Dtype mx = xv[at(0)];
      for (std::size_t l = 1; l < s.len; ++l) mx = std::max(mx, xv[at(l)]);
      double z = 0.0;
      for (std::size_t l = 0; l < s.len; ++l) {
        const double e = std::exp(static_cast<double>(xv[at(l)] - mx));
        out[at(l)] = static_cast<Dtype>(e);
        z += e;
      }
      for (std::size_t l = 0; l < s.len; ++l) {
        out[at(l)] = static_cast<Dtype>(out[at(l)] / z);
      }
    }
  }
  Node<Dtype>* px = x.raw();
  return Tensor<Dtype>::make_result(
      x.shape(), std::move(out), {x},
      [px, s](Node<Dtype>& self) {
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t in = 0; in < s.inner; ++in) {
            auto at = [&](std::size_t l) {
              return (o * s.len + l) * s.inner + in;
            };
            double dot = 0.0;
            for (std::size_t l = 0; l < s.len; ++l) {
              dot += static_cast<double>(self.grad[at(l)]) * self.data[at(l)];
            }
            for (std::size_t l = 0; l < s.len; ++l) {
              px->grad[at(l)] += static_cast<Dtype>(
                  self.data[at(l)] * (self.grad[at(l)] - dot));
            }
          }
        }
      },
      "softmax");
}

template <typename Dtype>
Tensor<Dtype> masked_softmax(const Tensor<Dtype>& x,
                             const std::vector<std::uint8_t>& mask) {
  require_rank2(x.shape(), "masked_softmax");
  if (mask.size() != x.numel()) {
    throw ShapeError("masked_softmax: mask has " + std::to_string(mask.size()) +
                     " entries for shape " + shape_str(x.shape()));
  }
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  const auto xv = x.values();
  std::vector<Dtype> out(xv.size(), Dtype(0));
  for (std::size_t i = 0; i < rows; ++i) {
    bool any = false;
    Dtype mx = 0;
    for (std::size_t j = 0; j < cols; ++j) {
      if (!mask[i * cols + j]) continue;
      mx = any ? std::max(mx, xv[i * cols + j]) : xv[i * cols + j];
      any = true;
    }
    if (!any) continue;
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      if (!mask[i * cols + j]) continue;
      const double e = std::exp(static_cast<double>(xv[i * cols + j] - mx));
      out[i * cols + j] = static_cast<Dtype>(e);
      z += e;
    }
    for (std::size_t j = 0; j < cols; ++j) {
      if (mask[i * cols + j]) out[i * cols + j] = static_cast<Dtype>(out[i * cols + j] / z);
    }
  }
  Node<Dtype>* px = x.raw();
  return Tensor<Dtype>::make_result(
      x.shape(), std::move(out), {x},
      [px, rows, cols](Node<Dtype>& self) {
        for (std::size_t i = 0; i < rows; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < cols; ++j) {
            dot += static_cast<double>(self.grad[i * cols + j]) *
                   self.data[i * cols + j];
          }
          for (std::size_t j = 0; j < cols; ++j) {
            const std::size_t e = i * cols + j;
            px->grad[e] += static_cast<Dtype>(self.data[e] * (self.grad[e] - dot));
          }
        }
      },
      "masked_softmax");
}

template <typename Dtype>
std::vector<std::size_t> topk_indices(std::span<const Dtype> values,
                                      std::size_t k) {
  k = std::min(k, values.size());
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k),
                    idx.end(), [&](std::size_t a, std::size_t b) {
                      if (values[a] != values[b]) return values[a] > values[b];
                      return a < b;
                    });
  idx.resize(k);
  return idx;
}

template <typename Dtype>
Tensor<Dtype> topk(const Tensor<Dtype>& x, std::size_t k, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "topk");
  if (k == 0 || k > s.len) {
    throw ShapeError("topk: k=" + std::to_string(k) + " invalid for axis of length " +
                     std::to_string(s.len) + " in shape " + shape_str(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = k;
  const auto xv = x.values();
  std::vector<Dtype> out(s.outer * k * s.inner);
  std::vector<std::size_t> source(out.size());
  std::vector<Dtype> lane(s.len);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      for (std::size_t l = 0; l < s.len; ++l) lane[l] = xv[(o * s.len + l) * s.inner + in];
      const auto picked = topk_indices<Dtype>(lane, k);
      for (std::size_t r = 0; r < k; ++r) {
        const std::size_t dst = (o * k + r) * s.inner + in;
        source[dst] = (o * s.len + picked[r]) * s.inner + in;
        out[dst] = xv[source[dst]];
      }
    }
  }
  Node<Dtype>* px = x.raw();
  return Tensor<Dtype>::make_result(
      std::move(out_shape), std::move(out), {x},
      [px, source = std::move(source)](Node<Dtype>& self) {
        for (std::size_t i = 0; i < source.size(); ++i) {
          px->grad[source[i]] += self.grad[i];
        }
      },
      "topk");
}

template <typename Dtype>
Tensor<Dtype> concat(const std::vector<Tensor<Dtype>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts[0].shape();
  Shape out_shape = first;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size() || axis >= s.size()) shape_fail("concat", first, s);
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != first[d]) shape_fail("concat", first, s);
    }
    total += s[axis];
  }
  out_shape[axis] = total;
  const AxisSplit os = split_axis(out_shape, axis, "concat");
  std::vector<Dtype> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const AxisSplit ps = split_axis(p.shape(), axis, "concat");
    const auto pv = p.values();
    for (std::size_t o = 0; o < ps.outer; ++o) {
      for (std::size_t l = 0; l < ps.len; ++l) {
        std::copy_n(&pv[(o * ps.len + l) * ps.inner], ps.inner,
                    &out[(o * os.len + offset + l) * os.inner]);
      }
    }
    offset += ps.len;
  }
  std::vector<Node<Dtype>*> nodes;
  for (const auto& p : parts) nodes.push_back(p.raw());
  return Tensor<Dtype>::make_result(
      std::move(out_shape), std::move(out), parts,
      [nodes, offsets, os](Node<Dtype>& self) {
        for (std::size_t k = 0; k < nodes.size(); ++k) {
          Node<Dtype>* p = nodes[k];
          if (!p->requires_grad) continue;
          const std::size_t len = p->data.size() / (os.outer * os.inner);
          for (std::size_t o = 0; o < os.outer; ++o) {
            for (std::size_t l = 0; l < len; ++l) {
              for (std::size_t in = 0; in < os.inner; ++in) {
                p->grad[(o * len + l) * os.inner + in] +=
                    self.grad[(o * os.len + offsets[k] + l) * os.inner + in];
              }
            }
          }
        }
      },
      "concat");
}

template <typename Dtype>
Tensor<Dtype> slice(const Tensor<Dtype>& x, std::size_t axis, std::size_t start,
                    std::size_t length) {
  const AxisSplit s = split_axis(x.shape(), axis, "slice");
  if (length == 0 || start + length > s.len) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") invalid for shape " +
                     shape_str(x.shape()) + " along axis " + std::to_string(axis));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  const auto xv = x.values();
  std::vector<Dtype> out(s.outer * length * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(&xv[(o * s.len + start) * s.inner], length * s.inner,
                &out[o * length * s.inner]);
  }
  Node<Dtype>* px = x.raw();
  return Tensor<Dtype>::make_result(
      std::move(out_shape), std::move(out), {x},
      [px, s, start, length](Node<Dtype>& self) {
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t i = 0; i < length * s.inner; ++i) {
            px->grad[(o * s.len + start) * s.inner + i] +=
                self.grad[o * length * s.inner + i];
          }
        }
      },
      "slice");
}

template <typename Dtype>
Tensor<Dtype> gather_rows(const Tensor<Dtype>& x,
                          const std::vector<std::size_t>& rows) {
  require_rank2(x.shape(), "gather_rows");
  if (rows.empty()) throw ShapeError("gather_rows: empty row list");
  const std::size_t n = x.dim(0), c = x.dim(1);
  const auto xv = x.values();
  std::vector<Dtype> out(rows.size() * c);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n) {
      throw ShapeError("gather_rows: row " + std::to_string(rows[i]) +
                       " out of range for shape " + shape_str(x.shape()));
    }
    std::copy_n(&xv[rows[i] * c], c, &out[i * c]);
  }
  Node<Dtype>* px = x.raw();
  return Tensor<Dtype>::make_result(
      {rows.size(), c}, std::move(out), {x},
      [px, rows, c](Node<Dtype>& self) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            px->grad[rows[i] * c + j] += self.grad[i * c + j];
          }
        }
      },
      "gather_rows");
}

template <typename Dtype>
Tensor<Dtype> stack_scalars(const std::vector<Tensor<Dtype>>& scalars) {
  if (scalars.empty()) throw ShapeError("stack_scalars: no inputs");
  std::vector<Dtype> out;
  out.reserve(scalars.size());
  std::vector<Node<Dtype>*> nodes;
  for (const auto& s : scalars) {
    if (s.numel() != 1) {
      throw ShapeError("stack_scalars: input of shape " + shape_str(s.shape()) +
                       " is not a scalar");
    }
    out.push_back(s.values()[0]);
    nodes.push_back(s.raw());
  }
  return Tensor<Dtype>::make_result(
      {scalars.size()}, std::move(out), scalars,
      [nodes](Node<Dtype>& self) {
        for (std::size_t i = 0; i < nodes.size(); ++i) {
          if (nodes[i]->requires_grad) nodes[i]->grad[0] += self.grad[i];
        }
      },
      "stack_scalars");
}

template <typename Dtype>
Tensor<Dtype> conv1d(const Tensor<Dtype>& x, const Tensor<Dtype>& weight,
                     const Tensor<Dtype>& bias) {
  require_rank2(x.shape(), "conv1d");
  if (weight.rank() != 3) {
    throw ShapeError("conv1d: weight must be [kernel, in, out], got " +
                     shape_str(weight.shape()));
  }
  const std::size_t kernel = weight.dim(0), cin = weight.dim(1), cout = weight.dim(2);
  if (kernel % 2 == 0) {
    throw ShapeError("conv1d: kernel size must be odd, got " + std::to_string(kernel));
  }
  if (x.dim(1) != cin) shape_fail("conv1d", x.shape(), weight.shape());
  if (bias.numel() != cout) shape_fail("conv1d", weight.shape(), bias.shape());
  const std::size_t steps = x.dim(0);
  const long pad = static_cast<long>(kernel / 2);
  const auto xv = x.values();
  const auto wv = weight.values();
  const auto bv = bias.values();
  std::vector<Dtype> out(steps * cout);
  std::vector<double> acc(cout);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t o = 0; o < cout; ++o) acc[o] = bv[o];
    for (std::size_t d = 0; d < kernel; ++d) {
      const long src = static_cast<long>(t) + static_cast<long>(d) - pad;
      if (src < 0 || src >= static_cast<long>(steps)) continue;
      for (std::size_t c = 0; c < cin; ++c) {
        const double xval = xv[static_cast<std::size_t>(src) * cin + c];
        if (xval == 0.0) continue;
        const Dtype* wrow = &wv[(d * cin + c) * cout];
        for (std::size_t o = 0; o < cout; ++o) acc[o] += xval * wrow[o];
      }
    }
    for (std::size_t o = 0; o < cout; ++o) out[t * cout + o] = static_cast<Dtype>(acc[o]);
  }
  Node<Dtype>* px = x.raw();
  Node<Dtype>* pw = weight.raw();
  Node<Dtype>* pb = bias.raw();
  return Tensor<Dtype>::make_result(
      {steps, cout}, std::move(out), {x, weight, bias},
      [px, pw, pb, steps, kernel, cin, cout, pad](Node<Dtype>& self) {
        const auto& g = self.grad;
        if (pb->requires_grad) {
          for (std::size_t t = 0; t < steps; ++t) {
            for (std::size_t o = 0; o < cout; ++o) pb->grad[o] += g[t * cout + o];
          }
        }
        for (std::size_t t = 0; t < steps; ++t) {
          for (std::size_t d = 0; d < kernel; ++d) {
            const long src = static_cast<long>(t) + static_cast<long>(d) - pad;
            if (src < 0 || src >= static_cast<long>(steps)) continue;
            const std::size_t s = static_cast<std::size_t>(src);
            for (std::size_t c = 0; c < cin; ++c) {
              double gx = 0.0;
              const double xval = px->data[s * cin + c];
              for (std::size_t o = 0; o < cout; ++o) {
                const double go = g[t * cout + o];
                gx += go * pw->data[(d * cin + c) * cout + o];
                if (pw->requires_grad) {
                  pw->grad[(d * cin + c) * cout + o] += static_cast<Dtype>(go * xval);
                }
              }
              if (px->requires_grad) px->grad[s * cin + c] += static_cast<Dtype>(gx);
            }
          }
        }
      },
      "conv1d");
}

template <typename Dtype>
Tensor<Dtype> batch_norm(const Tensor<Dtype>& x, const Tensor<Dtype>& gamma,
                         const Tensor<Dtype>& beta, Tensor<Dtype>& running_mean,
                         Tensor<Dtype>& running_var,
                         const BatchNormOptions& options) {
  require_rank2(x.shape(), "batch_norm");
  const std::size_t rows = x.dim(0), ch = x.dim(1);
  for (const Tensor<Dtype>* t : std::initializer_list<const Tensor<Dtype>*>{&gamma, &beta, &running_mean, &running_var}) {
    if (t->numel() != ch) shape_fail("batch_norm", x.shape(), t->shape());
  }
  const auto xv = x.values();
  std::vector<Dtype> mean_c(ch), inv_std(ch);
  if (options.training) {
    auto rm = running_mean.mutable_values();
    auto rv = running_var.mutable_values();
    for (std::size_t c = 0; c < ch; ++c) {
      double m = 0.0;
      for (std::size_t r = 0; r < rows; ++r) m += xv[r * ch + c];
      m /= static_cast<double>(rows);
      double v = 0.0;
      for (std::size_t r = 0; r < rows; ++r) {
        const double d = xv[r * ch + c] - m;
        v += d * d;
      }
      const double biased = v / static_cast<double>(rows);
      const double unbiased = rows > 1 ? v / static_cast<double>(rows - 1) : biased;
      mean_c[c] = static_cast<Dtype>(m);
      inv_std[c] = static_cast<Dtype>(1.0 / std::sqrt(biased + options.eps));
      rm[c] = static_cast<Dtype>(options.momentum * rm[c] + (1.0 - options.momentum) * m);
      rv[c] = static_cast<Dtype>(options.momentum * rv[c] +
                                 (1.0 - options.momentum) * unbiased);
    }
  } else {
    const auto rm = running_mean.values();
    const auto rv = running_var.values();
    for (std::size_t c = 0; c < ch; ++c) {
      mean_c[c] = rm[c];
      inv_std[c] = static_cast<Dtype>(1.0 / std::sqrt(static_cast<double>(rv[c]) + options.eps));
    }
  }
  const auto gv = gamma.values();
  const auto bv = beta.values();
  std::vector<Dtype> xhat(xv.size()), out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < ch; ++c) {
      const std::size_t e = r * ch + c;
      xhat[e] = (xv[e] - mean_c[c]) * inv_std[c];
      out[e] = gv[c] * xhat[e] + bv[c];
    }
  }
  Node<Dtype>* px = x.raw();
  Node<Dtype>* pg = gamma.raw();
  Node<Dtype>* pb = beta.raw();
  const bool training = options.training;
  return Tensor<Dtype>::make_result(
      {rows, ch}, std::move(out), {x, gamma, beta},
      [px, pg, pb, rows, ch, training, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](Node<Dtype>& self) {
        const auto& g = self.grad;
        for (std::size_t c = 0; c < ch; ++c) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t r = 0; r < rows; ++r) {
            sum_g += g[r * ch + c];
            sum_gx += static_cast<double>(g[r * ch + c]) * xhat[r * ch + c];
          }
          if (pb->requires_grad) pb->grad[c] += static_cast<Dtype>(sum_g);
          if (pg->requires_grad) pg->grad[c] += static_cast<Dtype>(sum_gx);
          if (!px->requires_grad) continue;
          const double gam = pg->data[c];
          if (!training) {
            for (std::size_t r = 0; r < rows; ++r) {
              px->grad[r * ch + c] += static_cast<Dtype>(g[r * ch + c] * gam * inv_std[c]);
            }
            continue;
          }
          // dx = gamma * inv_std / R * (R*g - sum(g) - xhat * sum(g * xhat))
          const double n = static_cast<double>(rows);
          for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t e = r * ch + c;
            px->grad[e] += static_cast<Dtype>(gam * inv_std[c] / n *
                                              (n * g[e] - sum_g - xhat[e] * sum_gx));
          }
        }
      },
      "batch_norm");
}

template <typename Dtype>
Tensor<Dtype> l2_normalize_rows(const Tensor<Dtype>& x, Dtype eps) {
  require_rank2(x.shape(), "l2_normalize_rows");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  const auto xv = x.values();
  std::vector<Dtype> out(xv.size());
  std::vector<Dtype> norms(rows);
  std::vector<std::uint8_t> clipped(rows, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += static_cast<double>(xv[r * cols + c]) * xv[r * cols + c];
    double n = std::sqrt(s);
    if (n < eps) {
      n = eps;
      clipped[r] = 1;
    }
    norms[r] = static_cast<Dtype>(n);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = static_cast<Dtype>(xv[r * cols + c] / n);
  }
  Node<Dtype>* px = x.raw();
  return Tensor<Dtype>::make_result(
      x.shape(), std::move(out), {x},
      [px, rows, cols, norms = std::move(norms),
       clipped = std::move(clipped)](Node<Dtype>& self) {
        for (std::size_t r = 0; r < rows; ++r) {
          const Dtype* y = &self.data[r * cols];
          const Dtype* g = &self.grad[r * cols];
          if (clipped[r]) {
            for (std::size_t c = 0; c < cols; ++c) px->grad[r * cols + c] += g[c] / norms[r];
            continue;
          }
          double dot = 0.0;
          for (std::size_t c = 0; c < cols; ++c) dot += static_cast<double>(y[c]) * g[c];
          for (std::size_t c = 0; c < cols; ++c) {
            px->grad[r * cols + c] += static_cast<Dtype>((g[c] - y[c] * dot) / norms[r]);
          }
        }
      },
      "l2_normalize_rows");
}

#define HANET_INSTANTIATE_OPS(T)                                                     \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> minimum(const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> maximum(const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                \
  template Tensor<T> scale(const Tensor<T>&, T);                                     \
  template Tensor<T> relu(const Tensor<T>&);                                         \
  template Tensor<T> sigmoid(const Tensor<T>&);                                      \
  template Tensor<T> tanh(const Tensor<T>&);                                         \
  template Tensor<T> exp(const Tensor<T>&);                                          \
  template Tensor<T> log(const Tensor<T>&);                                          \
  template Tensor<T> sqrt(const Tensor<T>&);                                         \
  template Tensor<T> clamp(const Tensor<T>&, T, T);                                  \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> transpose(const Tensor<T>&);                                    \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                               \
  template Tensor<T> sum(const Tensor<T>&);                                          \
  template Tensor<T> sum(const Tensor<T>&, std::size_t, bool);                       \
  template Tensor<T> mean(const Tensor<T>&);                                         \
  template Tensor<T> mean(const Tensor<T>&, std::size_t, bool);                      \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                         \
  template Tensor<T> masked_softmax(const Tensor<T>&,                                \
                                    const std::vector<std::uint8_t>&);               \
  template Tensor<T> topk(const Tensor<T>&, std::size_t, std::size_t);               \
  template std::vector<std::size_t> topk_indices(std::span<const T>, std::size_t);   \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);             \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t); \
  template Tensor<T> gather_rows(const Tensor<T>&, const std::vector<std::size_t>&); \
  template Tensor<T> stack_scalars(const std::vector<Tensor<T>>&);                   \
  template Tensor<T> conv1d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);   \
  template Tensor<T> batch_norm(const Tensor<T>&, const Tensor<T>&,                  \
                                const Tensor<T>&, Tensor<T>&, Tensor<T>&,            \
                                const BatchNormOptions&);                            \
  template Tensor<T> l2_normalize_rows(const Tensor<T>&, T);

HANET_FOR_EACH_DTYPE(HANET_INSTANTIATE_OPS)

}  // namespace hanet::ops
