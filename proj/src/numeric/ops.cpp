#include "cdn/numeric/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cdn/error.hpp"

namespace cdn::nn {

namespace {

template <typename T>
void require_rank2(const Tensor<T>& t, const char* what) {
  if (!t.defined() || t.rank() != 2) {
    throw DimensionError(std::string(what) + ": expected a rank-2 tensor, got " +
                         (t.defined() ? shape_str(t.shape()) : "<undefined>"));
  }
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.begin(), small.end(), big.end() - small.size());
}

// Elementwise binary op with suffix broadcasting. `da`/`db` give the local
// partial derivatives at (x, y).
template <typename T, typename F, typename DA, typename DB>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, F f, DA da, DB db, const char* name) {
  const bool a_big = a.rank() >= b.rank();
  const Tensor<T>& big = a_big ? a : b;
  const Tensor<T>& small = a_big ? b : a;
  if (!is_suffix(small.shape(), big.shape())) {
    throw DimensionError(std::string(name) + ": cannot broadcast " + shape_str(a.shape()) +
                         " with " + shape_str(b.shape()));
  }
  const std::size_t n = big.size();
  const std::size_t m = small.size();
  auto av = a.data();
  auto bv = b.data();
  std::vector<T> out(n);
  if (a_big) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(av[i], bv[i % m]);
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(av[i % m], bv[i]);
  }
  return make_result<T>(big.shape(), std::move(out), {a, b}, [=](Node<T>& self) {
    Node<T>& pa = *self.parents[0];
    Node<T>& pb = *self.parents[1];
    const auto& x = pa.value;
    const auto& y = pb.value;
    const std::size_t na = x.size();
    const std::size_t nb = y.size();
    for (std::size_t i = 0; i < n; ++i) {
      const T g = self.grad[i];
      const std::size_t ia = na == n ? i : i % na;
      const std::size_t ib = nb == n ? i : i % nb;
      if (pa.requires_grad) pa.ensure_grad()[ia] += g * da(x[ia], y[ib]);
      if (pb.requires_grad) pb.ensure_grad()[ib] += g * db(x[ia], y[ib]);
    }
  });
}

template <typename T, typename F, typename D>
Tensor<T> unary(const Tensor<T>& a, F f, D d) {
  auto av = a.data();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  return make_result<T>(a.shape(), std::move(out), {a}, [=](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * d(p.value[i], self.value[i]);
  });
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  auto av = a.data();
  auto bv = b.data();
  std::vector<T> out(m * n, T(0));
  for (std::size_t i = 0; i < m; ++i) {
    T* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T s = av[i * k + p];
      if (s == T(0)) continue;
      const T* brow = bv.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += s * brow[j];
    }
  }
  return make_result<T>({m, n}, std::move(out), {a, b}, [m, k, n](Node<T>& self) {
    Node<T>& pa = *self.parents[0];
    Node<T>& pb = *self.parents[1];
    const T* g = self.grad.data();
    if (pa.requires_grad) {
      T* ga = pa.ensure_grad().data();
      const T* bv = pb.value.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          T acc = T(0);
          const T* brow = bv + p * n;
          const T* grow = g + i * n;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (pb.requires_grad) {
      T* gb = pb.ensure_grad().data();
      const T* av = pa.value.data();
      for (std::size_t i = 0; i < m; ++i) {
        const T* grow = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const T s = av[i * k + p];
          if (s == T(0)) continue;
          T* gbrow = gb + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += s * grow[j];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_rank2(a, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  auto av = a.data();
  std::vector<T> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return make_result<T>({n, m}, std::move(out), {a}, [m, n](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j * m + i];
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      a, b, [](T x, T y) { return x + y; }, [](T, T) { return T(1); }, [](T, T) { return T(1); },
      "add");
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      a, b, [](T x, T y) { return x - y; }, [](T, T) { return T(1); }, [](T, T) { return T(-1); },
      "sub");
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; }, [](T x, T) { return x; },
      "mul");
}

template <typename T>
Tensor<T> affine(const Tensor<T>& a, T scale, T shift) {
  return unary(
      a, [=](T x) { return scale * x + shift; }, [=](T, T) { return scale; });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  return unary(
      a, [](T x) { return x > T(0) ? x : T(0); }, [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  return unary(
      a,
      [](T x) {
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& a) {
  return unary(
      a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> masked_softmax(const Tensor<T>& logits, std::span<const std::uint8_t> allowed) {
  if (allowed.size() != logits.size()) {
    throw DimensionError("masked_softmax: mask has " + std::to_string(allowed.size()) +
                         " entries for logits " + shape_str(logits.shape()));
  }
  const std::size_t l = logits.cols();
  const std::size_t rows = logits.rows();
  auto x = logits.data();
  std::vector<T> out(x.size(), T(0));
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = r * l;
    T hi = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < l; ++j)
      if (allowed[base + j]) hi = std::max(hi, x[base + j]);
    if (hi == -std::numeric_limits<T>::infinity()) continue;
    T total = T(0);
    for (std::size_t j = 0; j < l; ++j) {
      if (allowed[base + j]) {
        out[base + j] = std::exp(x[base + j] - hi);
        total += out[base + j];
      }
    }
    for (std::size_t j = 0; j < l; ++j) out[base + j] /= total;
  }
  return make_result<T>(logits.shape(), std::move(out), {logits}, [rows, l](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    const auto& y = self.value;
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t base = r * l;
      T dot = T(0);
      for (std::size_t j = 0; j < l; ++j) dot += self.grad[base + j] * y[base + j];
      for (std::size_t j = 0; j < l; ++j) g[base + j] += y[base + j] * (self.grad[base + j] - dot);
    }
  });
}

template <typename T>
Tensor<T> concat_last(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_last: no parts");
  const std::size_t rows = parts[0].rows();
  const Shape lead(parts[0].shape().begin(), parts[0].shape().end() - 1);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape pl(p.shape().begin(), p.shape().end() - 1);
    if (pl != lead) {
      throw DimensionError("concat_last: leading dims differ: " + shape_str(parts[0].shape()) +
                           " vs " + shape_str(p.shape()));
    }
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<T> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto v = parts[k].data();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(v.data() + r * widths[k], widths[k], out.data() + r * total + offset);
    offset += widths[k];
  }
  Shape shape = lead;
  shape.push_back(total);
  return make_result<T>(std::move(shape), std::move(out), parts,
                        [rows, total, widths](Node<T>& self) {
                          std::size_t offset = 0;
                          for (std::size_t k = 0; k < widths.size(); ++k) {
                            Node<T>& p = *self.parents[k];
                            if (p.requires_grad) {
                              auto& g = p.ensure_grad();
                              for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t c = 0; c < widths[k]; ++c)
                                  g[r * widths[k] + c] += self.grad[r * total + offset + c];
                            }
                            offset += widths[k];
                          }
                        });
}

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no parts");
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  std::vector<T> out;
  for (const auto& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.cols() != cols) throw DimensionError("concat_rows: column counts differ");
    rows += p.rows();
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  return make_result<T>({rows, cols}, std::move(out), parts, [](Node<T>& self) {
    std::size_t offset = 0;
    for (auto& parent : self.parents) {
      const std::size_t n = parent->value.size();
      if (parent->requires_grad) {
        auto& g = parent->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[offset + i];
      }
      offset += n;
    }
  });
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t count) {
  require_rank2(x, "slice_rows");
  if (begin + count > x.dim(0)) throw DimensionError("slice_rows: range out of bounds");
  const std::size_t cols = x.cols();
  auto v = x.data();
  std::vector<T> out(v.begin() + begin * cols, v.begin() + (begin + count) * cols);
  return make_result<T>({count, cols}, std::move(out), {x}, [begin, cols](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * cols + i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const int> ids) {
  require_rank2(table, "gather_rows");
  const std::size_t n_rows = table.dim(0), cols = table.cols();
  std::vector<int> idx(ids.begin(), ids.end());
  auto v = table.data();
  std::vector<T> out(idx.size() * cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= n_rows) {
      throw DimensionError("gather_rows: id " + std::to_string(idx[i]) + " out of range");
    }
    std::copy_n(v.data() + idx[i] * cols, cols, out.data() + i * cols);
  }
  const std::size_t n = idx.size();
  return make_result<T>({n, cols}, std::move(out), {table},
                        [idx = std::move(idx), cols](Node<T>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          for (std::size_t i = 0; i < idx.size(); ++i)
                            for (std::size_t c = 0; c < cols; ++c)
                              g[idx[i] * cols + c] += self.grad[i * cols + c];
                        });
}

template <typename T>
Tensor<T> zero_rows(const Tensor<T>& x, std::span<const std::uint8_t> keep) {
  const std::size_t rows = x.rows(), cols = x.cols();
  if (keep.size() != rows) throw DimensionError("zero_rows: flag count != row count");
  std::vector<std::uint8_t> k(keep.begin(), keep.end());
  std::vector<T> out(x.data().begin(), x.data().end());
  for (std::size_t r = 0; r < rows; ++r)
    if (!k[r]) std::fill_n(out.begin() + r * cols, cols, T(0));
  return make_result<T>(x.shape(), std::move(out), {x}, [k = std::move(k), cols](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t r = 0; r < k.size(); ++r)
      if (k[r])
        for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[r * cols + c];
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  return make_result<T>(std::move(shape), std::move(out), {x}, [](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> segment_max_pool(const Tensor<T>& x, std::span<const int> segment_id,
                           std::span<const std::uint8_t> valid, std::size_t n_segments) {
  require_rank2(x, "segment_max_pool");
  const std::size_t l = x.dim(0), d = x.cols();
  if (segment_id.size() != l || valid.size() != l) {
    throw DimensionError("segment_max_pool: per-row metadata length mismatch");
  }
  auto v = x.data();
  // argmax[s * d + c] = source row, or l when the segment is empty.
  std::vector<std::size_t> argmax(n_segments * d, l);
  for (std::size_t i = 0; i < l; ++i) {
    if (!valid[i]) continue;
    const int s = segment_id[i];
    if (s < 0 || static_cast<std::size_t>(s) >= n_segments) {
      throw DimensionError("segment_max_pool: segment id " + std::to_string(s) +
                           " out of range [0, " + std::to_string(n_segments) + ")");
    }
    for (std::size_t c = 0; c < d; ++c) {
      auto& best = argmax[s * d + c];
      if (best == l || v[i * d + c] > v[best * d + c]) best = i;
    }
  }
  std::vector<T> out(n_segments * d, T(0));
  for (std::size_t k = 0; k < argmax.size(); ++k)
    if (argmax[k] != l) out[k] = v[argmax[k] * d + k % d];
  return make_result<T>({n_segments, d}, std::move(out), {x},
                        [argmax = std::move(argmax), l, d](Node<T>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          for (std::size_t k = 0; k < argmax.size(); ++k)
                            if (argmax[k] != l) g[argmax[k] * d + k % d] += self.grad[k];
                        });
}

template <typename T>
Tensor<T> segment_mean_pool(const Tensor<T>& x, std::span<const int> segment_id,
                            std::span<const std::uint8_t> valid, std::size_t n_segments) {
  require_rank2(x, "segment_mean_pool");
  const std::size_t l = x.dim(0), d = x.cols();
  if (segment_id.size() != l || valid.size() != l) {
    throw DimensionError("segment_mean_pool: per-row metadata length mismatch");
  }
  std::vector<int> seg(l, -1);
  std::vector<std::size_t> counts(n_segments, 0);
  for (std::size_t i = 0; i < l; ++i) {
    if (!valid[i]) continue;
    const int s = segment_id[i];
    if (s < 0 || static_cast<std::size_t>(s) >= n_segments) {
      throw DimensionError("segment_mean_pool: segment id out of range");
    }
    seg[i] = s;
    ++counts[s];
  }
  auto v = x.data();
  std::vector<T> out(n_segments * d, T(0));
  for (std::size_t i = 0; i < l; ++i) {
    if (seg[i] < 0) continue;
    const T w = T(1) / static_cast<T>(counts[seg[i]]);
    for (std::size_t c = 0; c < d; ++c) out[seg[i] * d + c] += w * v[i * d + c];
  }
  return make_result<T>({n_segments, d}, std::move(out), {x},
                        [seg = std::move(seg), counts = std::move(counts), d](Node<T>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          for (std::size_t i = 0; i < seg.size(); ++i) {
                            if (seg[i] < 0) continue;
                            const T w = T(1) / static_cast<T>(counts[seg[i]]);
                            for (std::size_t c = 0; c < d; ++c)
                              g[i * d + c] += w * self.grad[seg[i] * d + c];
                          }
                        });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  const std::size_t rows = x.rows(), d = x.cols();
  if (gain.size() != d || bias.size() != d) throw DimensionError("layer_norm: gain/bias width");
  auto v = x.data();
  auto gv = gain.data();
  auto bv = bias.data();
  std::vector<T> out(v.size());
  std::vector<T> xhat(v.size());
  std::vector<T> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = v.data() + r * d;
    T mu = T(0);
    for (std::size_t c = 0; c < d; ++c) mu += row[c];
    mu /= static_cast<T>(d);
    T var = T(0);
    for (std::size_t c = 0; c < d; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<T>(d);
    inv_std[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) {
      xhat[r * d + c] = (row[c] - mu) * inv_std[r];
      out[r * d + c] = xhat[r * d + c] * gv[c] + bv[c];
    }
  }
  return make_result<T>(
      x.shape(), std::move(out), {x, gain, bias},
      [xhat = std::move(xhat), inv_std = std::move(inv_std), rows, d](Node<T>& self) {
        Node<T>& px = *self.parents[0];
        Node<T>& pg = *self.parents[1];
        Node<T>& pb = *self.parents[2];
        const auto& dy = self.grad;
        if (pg.requires_grad) {
          auto& gg = pg.ensure_grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < d; ++c) gg[c] += dy[r * d + c] * xhat[r * d + c];
        }
        if (pb.requires_grad) {
          auto& gb = pb.ensure_grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < d; ++c) gb[c] += dy[r * d + c];
        }
        if (px.requires_grad) {
          auto& gx = px.ensure_grad();
          const auto& gain = pg.value;
          for (std::size_t r = 0; r < rows; ++r) {
            T mean_dxhat = T(0), mean_dxhat_xhat = T(0);
            for (std::size_t c = 0; c < d; ++c) {
              const T dxh = dy[r * d + c] * gain[c];
              mean_dxhat += dxh;
              mean_dxhat_xhat += dxh * xhat[r * d + c];
            }
            mean_dxhat /= static_cast<T>(d);
            mean_dxhat_xhat /= static_cast<T>(d);
            for (std::size_t c = 0; c < d; ++c) {
              const T dxh = dy[r * d + c] * gain[c];
              gx[r * d + c] +=
                  inv_std[r] * (dxh - mean_dxhat - xhat[r * d + c] * mean_dxhat_xhat);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, Rng& rng) {
  if (p <= 0.0) return x;
  if (p >= 1.0) throw ContractError("dropout probability must be < 1");
  const T keep_scale = T(1) / static_cast<T>(1.0 - p);
  std::vector<T> factor(x.size());
  for (auto& f : factor) f = rng.bernoulli(p) ? T(0) : keep_scale;
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * factor[i];
  return make_result<T>(x.shape(), std::move(out), {x},
                        [factor = std::move(factor)](Node<T>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          for (std::size_t i = 0; i < g.size(); ++i)
                            g[i] += self.grad[i] * factor[i];
                        });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T total = T(0);
  for (T v : x.data()) total += v;
  return make_result<T>({1}, {total}, {x}, [](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (auto& gi : g) gi += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return affine(sum(x), T(1) / static_cast<T>(x.size()), T(0));
}

template <typename T>
Tensor<T> cross_entropy_binary(const Tensor<T>& p, std::span<const int> labels) {
  if (labels.size() != p.size()) throw DimensionError("cross_entropy_binary: label count");
  std::vector<int> y(labels.begin(), labels.end());
  for (int v : y)
    if (v != 0 && v != 1) throw ContractError("cross_entropy_binary: label must be 0 or 1");
  const T eps = static_cast<T>(kProbabilityEps);
  const T n = static_cast<T>(y.size());
  T total = T(0);
  auto pv = p.data();
  for (std::size_t i = 0; i < y.size(); ++i) {
    const T q = std::clamp(pv[i], eps, T(1) - eps);
    total -= y[i] ? std::log(q) : std::log(T(1) - q);
  }
  return make_result<T>({1}, {total / n}, {p}, [y = std::move(y), eps, n](Node<T>& self) {
    Node<T>& pp = *self.parents[0];
    auto& g = pp.ensure_grad();
    for (std::size_t i = 0; i < y.size(); ++i) {
      const T q = std::clamp(pp.value[i], eps, T(1) - eps);
      const T d = y[i] ? -T(1) / q : T(1) / (T(1) - q);
      g[i] += self.grad[0] * d / n;
    }
  });
}

template <typename T>
Tensor<T> cross_entropy_categorical(const Tensor<T>& logits, std::span<const int> gold) {
  const std::size_t rows = logits.rows(), c = logits.cols();
  if (gold.size() != rows) throw DimensionError("cross_entropy_categorical: gold count");
  std::vector<int> y(gold.begin(), gold.end());
  std::vector<T> probs(logits.size());
  auto x = logits.data();
  T total = T(0);
  for (std::size_t r = 0; r < rows; ++r) {
    if (y[r] < 0 || static_cast<std::size_t>(y[r]) >= c) {
      throw ContractError("cross_entropy_categorical: gold index " + std::to_string(y[r]) +
                          " out of range for " + std::to_string(c) + " classes");
    }
    const T* row = x.data() + r * c;
    const T hi = *std::max_element(row, row + c);
    T z = T(0);
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - hi);
    const T log_z = std::log(z) + hi;
    for (std::size_t j = 0; j < c; ++j) probs[r * c + j] = std::exp(row[j] - log_z);
    total += log_z - row[y[r]];
  }
  const T n = static_cast<T>(rows);
  return make_result<T>({1}, {total / n}, {logits},
                        [probs = std::move(probs), y = std::move(y), c, n](Node<T>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          const T scale = self.grad[0] / n;
                          for (std::size_t r = 0; r < y.size(); ++r)
                            for (std::size_t j = 0; j < c; ++j) {
                              const T onehot = static_cast<std::size_t>(y[r]) == j ? T(1) : T(0);
                              g[r * c + j] += scale * (probs[r * c + j] - onehot);
                            }
                        });
}

#define CDN_INSTANTIATE_OPS(T)                                                                   \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> transpose(const Tensor<T>&);                                                \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> affine(const Tensor<T>&, T, T);                                             \
  template Tensor<T> relu(const Tensor<T>&);                                                     \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                  \
  template Tensor<T> tanh(const Tensor<T>&);                                                     \
  template Tensor<T> masked_softmax(const Tensor<T>&, std::span<const std::uint8_t>);            \
  template Tensor<T> concat_last(const std::vector<Tensor<T>>&);                                 \
  template Tensor<T> concat_rows(const std::vector<Tensor<T>>&);                                 \
  template Tensor<T> slice_rows(const Tensor<T>&, std::size_t, std::size_t);                     \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const int>);                        \
  template Tensor<T> zero_rows(const Tensor<T>&, std::span<const std::uint8_t>);                 \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                           \
  template Tensor<T> segment_max_pool(const Tensor<T>&, std::span<const int>,                    \
                                      std::span<const std::uint8_t>, std::size_t);               \
  template Tensor<T> segment_mean_pool(const Tensor<T>&, std::span<const int>,                   \
                                       std::span<const std::uint8_t>, std::size_t);              \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);        \
  template Tensor<T> dropout(const Tensor<T>&, double, Rng&);                                    \
  template Tensor<T> sum(const Tensor<T>&);                                                      \
  template Tensor<T> mean(const Tensor<T>&);                                                     \
  template Tensor<T> cross_entropy_binary(const Tensor<T>&, std::span<const int>);               \
  template Tensor<T> cross_entropy_categorical(const Tensor<T>&, std::span<const int>);

CDN_INSTANTIATE_OPS(float)
CDN_INSTANTIATE_OPS(double)

}  // namespace cdn::nn
