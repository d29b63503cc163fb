#include "lottery/numerics/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <numbers>

namespace lottery::ad {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using MutMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using MutStridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;

template <typename T>
ConstMap<T> as_matrix(const Tensor<T>& t) {
  return ConstMap<T>(t.raw(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}
template <typename T>
MutMap<T> as_matrix(Tensor<T>& t) {
  return MutMap<T>(t.raw(), static_cast<Eigen::Index>(t.rows()),
                   static_cast<Eigen::Index>(t.cols()));
}

template <typename T>
void require_matrix(const Tensor<T>& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + " expects a matrix, got " + shape_string(t.shape()));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

template <typename T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
  T* d = dst.raw();
  const T* s = src.raw();
  for (std::size_t i = 0, n = dst.size(); i < n; ++i) {
    d[i] += s[i];
  }
}

}  // namespace

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  require_matrix(av, "matmul");
  require_matrix(bv, "matmul");
  if (av.dim(1) != bv.dim(0)) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_string(av.shape()) +
                         " x " + shape_string(bv.shape()));
  }
  Tensor<T> out(Shape{av.dim(0), bv.dim(1)});
  as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv);
  return a.tape().push(std::move(out), {a, b}, [a, b](const Tensor<T>& g, Tape<T>& tape) {
    if (tape.requires_grad(a)) {
      as_matrix(tape.grad_buffer(a.id())).noalias() +=
          as_matrix(g) * as_matrix(b.value()).transpose();
    }
    if (tape.requires_grad(b)) {
      as_matrix(tape.grad_buffer(b.id())).noalias() +=
          as_matrix(a.value()).transpose() * as_matrix(g);
    }
  });
}

template <typename T>
Var<T> matmul_transposed(Var<T> a, Var<T> b) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  require_matrix(av, "matmul_transposed");
  require_matrix(bv, "matmul_transposed");
  if (av.dim(1) != bv.dim(1)) {
    throw DimensionError("matmul_transposed: inner dimensions disagree, " +
                         shape_string(av.shape()) + " x " + shape_string(bv.shape()) + "^T");
  }
  Tensor<T> out(Shape{av.dim(0), bv.dim(0)});
  as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv).transpose();
  return a.tape().push(std::move(out), {a, b}, [a, b](const Tensor<T>& g, Tape<T>& tape) {
    if (tape.requires_grad(a)) {
      as_matrix(tape.grad_buffer(a.id())).noalias() += as_matrix(g) * as_matrix(b.value());
    }
    if (tape.requires_grad(b)) {
      as_matrix(tape.grad_buffer(b.id())).noalias() +=
          as_matrix(g).transpose() * as_matrix(a.value());
    }
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  require_same_shape(av, bv, "add");
  Tensor<T> out = av;
  accumulate(out, bv);
  return a.tape().push(std::move(out), {a, b}, [a, b](const Tensor<T>& g, Tape<T>& tape) {
    if (tape.requires_grad(a)) {
      accumulate(tape.grad_buffer(a.id()), g);
    }
    if (tape.requires_grad(b)) {
      accumulate(tape.grad_buffer(b.id()), g);
    }
  });
}

template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias) {
  const Tensor<T>& xv = x.value();
  const Tensor<T>& bv = bias.value();
  require_matrix(xv, "add_bias");
  const std::size_t rows = xv.dim(0);
  const std::size_t cols = xv.dim(1);
  if (bv.size() != cols) {
    throw DimensionError("add_bias: bias " + shape_string(bv.shape()) + " does not match " +
                         shape_string(xv.shape()));
  }
  Tensor<T> out = xv;
  for (std::size_t r = 0; r < rows; ++r) {
    T* row = out.raw() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] += bv[c];
    }
  }
  return x.tape().push(std::move(out), {x, bias},
                       [x, bias, rows, cols](const Tensor<T>& g, Tape<T>& tape) {
                         if (tape.requires_grad(x)) {
                           accumulate(tape.grad_buffer(x.id()), g);
                         }
                         if (tape.requires_grad(bias)) {
                           Tensor<T>& gb = tape.grad_buffer(bias.id());
                           for (std::size_t r = 0; r < rows; ++r) {
                             const T* row = g.raw() + r * cols;
                             for (std::size_t c = 0; c < cols; ++c) {
                               gb[c] += row[c];
                             }
                           }
                         }
                       });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  require_same_shape(av, bv, "mul");
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = av[i] * bv[i];
  }
  return a.tape().push(std::move(out), {a, b}, [a, b](const Tensor<T>& g, Tape<T>& tape) {
    if (tape.requires_grad(a)) {
      Tensor<T>& ga = tape.grad_buffer(a.id());
      const Tensor<T>& bv = b.value();
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i] * bv[i];
      }
    }
    if (tape.requires_grad(b)) {
      Tensor<T>& gb = tape.grad_buffer(b.id());
      const Tensor<T>& av = a.value();
      for (std::size_t i = 0; i < g.size(); ++i) {
        gb[i] += g[i] * av[i];
      }
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  Tensor<T> out = a.value();
  for (auto& v : out.data()) {
    v *= factor;
  }
  return a.tape().push(std::move(out), {a}, [a, factor](const Tensor<T>& g, Tape<T>& tape) {
    Tensor<T>& ga = tape.grad_buffer(a.id());
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i] * factor;
    }
  });
}

template <typename T>
Var<T> sum(Var<T> a) {
  T total{0};
  for (T v : a.value().data()) {
    total += v;
  }
  return a.tape().push(Tensor<T>::scalar(total), {a}, [a](const Tensor<T>& g, Tape<T>& tape) {
    Tensor<T>& ga = tape.grad_buffer(a.id());
    const T s = g[0];
    for (auto& v : ga.data()) {
      v += s;
    }
  });
}

template <typename T>
Var<T> apply_mask(Var<T> w, std::span<const std::uint8_t> keep) {
  const Tensor<T>& wv = w.value();
  if (keep.size() != wv.size()) {
    throw DimensionError("apply_mask: mask length " + std::to_string(keep.size()) +
                         " does not match tensor " + shape_string(wv.shape()));
  }
  Tensor<T> out(wv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = keep[i] != 0 ? wv[i] : T{0};
  }
  return w.tape().push(std::move(out), {w}, [w, keep](const Tensor<T>& g, Tape<T>& tape) {
    Tensor<T>& gw = tape.grad_buffer(w.id());
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (keep[i] != 0) {
        gw[i] += g[i];
      }
    }
  });
}

template <typename T>
T gelu_value(T x) {
  const T c = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
  const T k = static_cast<T>(0.044715);
  return T{0.5} * x * (T{1} + std::tanh(c * (x + k * x * x * x)));
}

template <typename T>
Var<T> gelu(Var<T> x) {
  const Tensor<T>& xv = x.value();
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = gelu_value(xv[i]);
  }
  return x.tape().push(std::move(out), {x}, [x](const Tensor<T>& g, Tape<T>& tape) {
    const T c = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
    const T k = static_cast<T>(0.044715);
    const Tensor<T>& xv = x.value();
    Tensor<T>& gx = tape.grad_buffer(x.id());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T v = xv[i];
      const T t = std::tanh(c * (v + k * v * v * v));
      const T d = T{0.5} * (T{1} + t) + T{0.5} * v * (T{1} - t * t) * c * (T{1} + T{3} * k * v * v);
      gx[i] += g[i] * d;
    }
  });
}

template <typename T>
Var<T> softmax(Var<T> x, std::size_t axis) {
  const Tensor<T>& xv = x.value();
  if (axis >= xv.rank()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for shape " +
                         shape_string(xv.shape()));
  }
  std::size_t outer = 1;
  std::size_t inner = 1;
  for (std::size_t i = 0; i < axis; ++i) {
    outer *= xv.dim(i);
  }
  for (std::size_t i = axis + 1; i < xv.rank(); ++i) {
    inner *= xv.dim(i);
  }
  const std::size_t n = xv.dim(axis);
  Tensor<T> out(xv.shape());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      T mx = xv[base];
      for (std::size_t j = 1; j < n; ++j) {
        mx = std::max(mx, xv[base + j * inner]);
      }
      T total{0};
      for (std::size_t j = 0; j < n; ++j) {
        const T e = std::exp(xv[base + j * inner] - mx);
        out[base + j * inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < n; ++j) {
        out[base + j * inner] /= total;
      }
    }
  }
  const std::uint32_t self = static_cast<std::uint32_t>(x.tape().size());
  return x.tape().push(
      std::move(out), {x}, [x, self, outer, inner, n](const Tensor<T>& g, Tape<T>& tape) {
        const Tensor<T>& y = tape.value(self);
        Tensor<T>& gx = tape.grad_buffer(x.id());
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * n * inner + in;
            T dot{0};
            for (std::size_t j = 0; j < n; ++j) {
              dot += g[base + j * inner] * y[base + j * inner];
            }
            for (std::size_t j = 0; j < n; ++j) {
              const std::size_t idx = base + j * inner;
              gx[idx] += y[idx] * (g[idx] - dot);
            }
          }
        }
      });
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps) {
  const Tensor<T>& xv = x.value();
  require_matrix(xv, "layer_norm");
  const std::size_t rows = xv.dim(0);
  const std::size_t cols = xv.dim(1);
  if (gain.value().size() != cols || bias.value().size() != cols) {
    throw DimensionError("layer_norm: gain/bias do not match " + shape_string(xv.shape()));
  }
  const Tensor<T>& gv = gain.value();
  const Tensor<T>& bv = bias.value();
  Tensor<T> out(xv.shape());
  Tensor<T> normalized(xv.shape());
  std::vector<T> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv.raw() + r * cols;
    T mean{0};
    for (std::size_t c = 0; c < cols; ++c) {
      mean += row[c];
    }
    mean /= static_cast<T>(cols);
    T var{0};
    for (std::size_t c = 0; c < cols; ++c) {
      const T d = row[c] - mean;
      var += d * d;
    }
    var /= static_cast<T>(cols);
    const T is = T{1} / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t c = 0; c < cols; ++c) {
      const T nh = (row[c] - mean) * is;
      normalized.at(r, c) = nh;
      out.at(r, c) = nh * gv[c] + bv[c];
    }
  }
  return x.tape().push(
      std::move(out), {x, gain, bias},
      [x, gain, bias, rows, cols, normalized = std::move(normalized),
       inv_std = std::move(inv_std)](const Tensor<T>& g, Tape<T>& tape) {
        const Tensor<T>& gv = gain.value();
        if (tape.requires_grad(gain) || tape.requires_grad(bias)) {
          const bool want_gain = tape.requires_grad(gain);
          const bool want_bias = tape.requires_grad(bias);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
              if (want_gain) {
                tape.grad_buffer(gain.id())[c] += g.at(r, c) * normalized.at(r, c);
              }
              if (want_bias) {
                tape.grad_buffer(bias.id())[c] += g.at(r, c);
              }
            }
          }
        }
        if (tape.requires_grad(x)) {
          Tensor<T>& gx = tape.grad_buffer(x.id());
          const T inv_n = T{1} / static_cast<T>(cols);
          for (std::size_t r = 0; r < rows; ++r) {
            T mean_d{0};
            T mean_dx{0};
            for (std::size_t c = 0; c < cols; ++c) {
              const T d = g.at(r, c) * gv[c];
              mean_d += d;
              mean_dx += d * normalized.at(r, c);
            }
            mean_d *= inv_n;
            mean_dx *= inv_n;
            for (std::size_t c = 0; c < cols; ++c) {
              const T d = g.at(r, c) * gv[c];
              gx.at(r, c) += inv_std[r] * (d - mean_d - normalized.at(r, c) * mean_dx);
            }
          }
        }
      });
}

template <typename T>
Var<T> embedding_lookup(Var<T> table, std::span<const std::uint32_t> ids) {
  const Tensor<T>& tv = table.value();
  require_matrix(tv, "embedding_lookup");
  const std::size_t vocab = tv.dim(0);
  const std::size_t width = tv.dim(1);
  if (ids.empty()) {
    throw DimensionError("embedding_lookup: empty id list");
  }
  Tensor<T> out(Shape{ids.size(), width});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= vocab) {
      throw IndexError("embedding_lookup: id " + std::to_string(ids[i]) +
                       " out of range for table of " + std::to_string(vocab) + " rows");
    }
    std::copy_n(tv.raw() + ids[i] * width, width, out.raw() + i * width);
  }
  std::vector<std::uint32_t> saved(ids.begin(), ids.end());
  return table.tape().push(std::move(out), {table},
                           [table, width, saved = std::move(saved)](const Tensor<T>& g,
                                                                    Tape<T>& tape) {
                             Tensor<T>& gt = tape.grad_buffer(table.id());
                             for (std::size_t i = 0; i < saved.size(); ++i) {
                               T* dst = gt.raw() + saved[i] * width;
                               const T* src = g.raw() + i * width;
                               for (std::size_t c = 0; c < width; ++c) {
                                 dst[c] += src[c];
                               }
                             }
                           });
}

template <typename T>
Var<T> gather_rows(Var<T> x, std::span<const std::size_t> rows) {
  const Tensor<T>& xv = x.value();
  require_matrix(xv, "gather_rows");
  const std::size_t width = xv.dim(1);
  if (rows.empty()) {
    throw DimensionError("gather_rows: empty row list");
  }
  Tensor<T> out(Shape{rows.size(), width});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= xv.dim(0)) {
      throw IndexError("gather_rows: row " + std::to_string(rows[i]) + " out of range for " +
                       shape_string(xv.shape()));
    }
    std::copy_n(xv.raw() + rows[i] * width, width, out.raw() + i * width);
  }
  std::vector<std::size_t> saved(rows.begin(), rows.end());
  return x.tape().push(std::move(out), {x},
                       [x, width, saved = std::move(saved)](const Tensor<T>& g, Tape<T>& tape) {
                         Tensor<T>& gx = tape.grad_buffer(x.id());
                         for (std::size_t i = 0; i < saved.size(); ++i) {
                           T* dst = gx.raw() + saved[i] * width;
                           const T* src = g.raw() + i * width;
                           for (std::size_t c = 0; c < width; ++c) {
                             dst[c] += src[c];
                           }
                         }
                       });
}

template <typename T>
Var<T> self_attention(Var<T> q, Var<T> k, Var<T> v, std::span<const Segment> segments,
                      std::size_t heads) {
  const Tensor<T>& qv = q.value();
  const Tensor<T>& kv = k.value();
  const Tensor<T>& vv = v.value();
  require_matrix(qv, "self_attention");
  require_same_shape(qv, kv, "self_attention");
  require_same_shape(qv, vv, "self_attention");
  const std::size_t width = qv.dim(1);
  if (heads == 0 || width % heads != 0) {
    throw DimensionError("self_attention: width " + std::to_string(width) +
                         " not divisible by heads " + std::to_string(heads));
  }
  const std::size_t head_dim = width / heads;
  const T scale_factor = T{1} / std::sqrt(static_cast<T>(head_dim));
  const auto stride = Eigen::OuterStride<>(static_cast<Eigen::Index>(width));
  const auto hd = static_cast<Eigen::Index>(head_dim);

  std::size_t covered = 0;
  for (const Segment& s : segments) {
    if (s.length == 0 || s.offset != covered) {
      throw DimensionError("self_attention: segments must tile the rows contiguously");
    }
    covered += s.length;
  }
  if (covered != qv.dim(0)) {
    throw DimensionError("self_attention: segments cover " + std::to_string(covered) +
                         " rows of " + std::to_string(qv.dim(0)));
  }

  Tensor<T> out(qv.shape());
  std::vector<RowMat<T>> probs;
  probs.reserve(segments.size() * heads);
  for (const Segment& s : segments) {
    const auto len = static_cast<Eigen::Index>(s.length);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t base = s.offset * width + h * head_dim;
      ConstStridedMap<T> qh(qv.raw() + base, len, hd, stride);
      ConstStridedMap<T> kh(kv.raw() + base, len, hd, stride);
      ConstStridedMap<T> vh(vv.raw() + base, len, hd, stride);
      RowMat<T> p = (qh * kh.transpose()) * scale_factor;
      for (Eigen::Index r = 0; r < len; ++r) {
        T mx = p(r, 0);
        for (Eigen::Index c = 1; c < len; ++c) {
          mx = std::max(mx, p(r, c));
        }
        T total{0};
        for (Eigen::Index c = 0; c < len; ++c) {
          p(r, c) = std::exp(p(r, c) - mx);
          total += p(r, c);
        }
        for (Eigen::Index c = 0; c < len; ++c) {
          p(r, c) /= total;
        }
      }
      MutStridedMap<T> oh(out.raw() + base, len, hd, stride);
      oh.noalias() = p * vh;
      probs.push_back(std::move(p));
    }
  }

  std::vector<Segment> segs(segments.begin(), segments.end());
  return q.tape().push(
      std::move(out), {q, k, v},
      [q, k, v, heads, width, head_dim, scale_factor, segs = std::move(segs),
       probs = std::move(probs)](const Tensor<T>& g, Tape<T>& tape) {
        const auto stride = Eigen::OuterStride<>(static_cast<Eigen::Index>(width));
        const auto hd = static_cast<Eigen::Index>(head_dim);
        const Tensor<T>& qv = q.value();
        const Tensor<T>& kv = k.value();
        const Tensor<T>& vv = v.value();
        const bool want_q = tape.requires_grad(q);
        const bool want_k = tape.requires_grad(k);
        const bool want_v = tape.requires_grad(v);
        T* gq = want_q ? tape.grad_buffer(q.id()).raw() : nullptr;
        T* gk = want_k ? tape.grad_buffer(k.id()).raw() : nullptr;
        T* gv = want_v ? tape.grad_buffer(v.id()).raw() : nullptr;
        std::size_t idx = 0;
        for (const Segment& s : segs) {
          const auto len = static_cast<Eigen::Index>(s.length);
          for (std::size_t h = 0; h < heads; ++h, ++idx) {
            const std::size_t base = s.offset * width + h * head_dim;
            const RowMat<T>& p = probs[idx];
            ConstStridedMap<T> goh(g.raw() + base, len, hd, stride);
            ConstStridedMap<T> qh(qv.raw() + base, len, hd, stride);
            ConstStridedMap<T> kh(kv.raw() + base, len, hd, stride);
            ConstStridedMap<T> vh(vv.raw() + base, len, hd, stride);
            if (want_v) {
              MutStridedMap<T>(gv + base, len, hd, stride).noalias() += p.transpose() * goh;
            }
            if (!want_q && !want_k) {
              continue;
            }
            RowMat<T> dp = goh * vh.transpose();
            for (Eigen::Index r = 0; r < len; ++r) {
              T dot{0};
              for (Eigen::Index c = 0; c < len; ++c) {
                dot += dp(r, c) * p(r, c);
              }
              for (Eigen::Index c = 0; c < len; ++c) {
                dp(r, c) = p(r, c) * (dp(r, c) - dot) * scale_factor;
              }
            }
            if (want_q) {
              MutStridedMap<T>(gq + base, len, hd, stride).noalias() += dp * kh;
            }
            if (want_k) {
              MutStridedMap<T>(gk + base, len, hd, stride).noalias() += dp.transpose() * qh;
            }
          }
        }
      });
}

template <typename T>
Var<T> cross_entropy(Var<T> logits, std::span<const std::uint32_t> targets) {
  const Tensor<T>& lv = logits.value();
  require_matrix(lv, "cross_entropy");
  const std::size_t rows = lv.dim(0);
  const std::size_t classes = lv.dim(1);
  if (targets.size() != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for logits " + shape_string(lv.shape()));
  }
  Tensor<T> probs(lv.shape());
  T loss{0};
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] >= classes) {
      throw IndexError("cross_entropy: target " + std::to_string(targets[r]) + " >= " +
                       std::to_string(classes) + " classes");
    }
    const T* row = lv.raw() + r * classes;
    T mx = row[0];
    for (std::size_t c = 1; c < classes; ++c) {
      mx = std::max(mx, row[c]);
    }
    T total{0};
    for (std::size_t c = 0; c < classes; ++c) {
      const T e = std::exp(row[c] - mx);
      probs.at(r, c) = e;
      total += e;
    }
    for (std::size_t c = 0; c < classes; ++c) {
      probs.at(r, c) /= total;
    }
    loss += std::log(total) - (row[targets[r]] - mx);
  }
  loss /= static_cast<T>(rows);
  std::vector<std::uint32_t> saved(targets.begin(), targets.end());
  return logits.tape().push(
      Tensor<T>::scalar(loss), {logits},
      [logits, rows, classes, probs = std::move(probs), saved = std::move(saved)](
          const Tensor<T>& g, Tape<T>& tape) {
        Tensor<T>& gl = tape.grad_buffer(logits.id());
        const T s = g[0] / static_cast<T>(rows);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < classes; ++c) {
            const T indicator = c == saved[r] ? T{1} : T{0};
            gl.at(r, c) += s * (probs.at(r, c) - indicator);
          }
        }
      });
}

template <typename T>
Var<T> mse(Var<T> pred, std::span<const T> target) {
  const Tensor<T>& pv = pred.value();
  if (pv.size() != target.size()) {
    throw DimensionError("mse: " + std::to_string(target.size()) + " targets for prediction " +
                         shape_string(pv.shape()));
  }
  T loss{0};
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const T d = pv[i] - target[i];
    loss += d * d;
  }
  const std::size_t n = pv.size();
  loss /= static_cast<T>(n);
  std::vector<T> saved(target.begin(), target.end());
  return pred.tape().push(Tensor<T>::scalar(loss), {pred},
                          [pred, n, saved = std::move(saved)](const Tensor<T>& g, Tape<T>& tape) {
                            Tensor<T>& gp = tape.grad_buffer(pred.id());
                            const Tensor<T>& pv = pred.value();
                            const T s = T{2} * g[0] / static_cast<T>(n);
                            for (std::size_t i = 0; i < n; ++i) {
                              gp[i] += s * (pv[i] - saved[i]);
                            }
                          });
}

#define LOTTERY_INSTANTIATE_OPS(T)                                                          \
  template Var<T> matmul(Var<T>, Var<T>);                                                   \
  template Var<T> matmul_transposed(Var<T>, Var<T>);                                        \
  template Var<T> add(Var<T>, Var<T>);                                                      \
  template Var<T> add_bias(Var<T>, Var<T>);                                                 \
  template Var<T> mul(Var<T>, Var<T>);                                                      \
  template Var<T> scale(Var<T>, T);                                                         \
  template Var<T> sum(Var<T>);                                                              \
  template Var<T> apply_mask(Var<T>, std::span<const std::uint8_t>);                        \
  template Var<T> gelu(Var<T>);                                                             \
  template T gelu_value(T);                                                                 \
  template Var<T> softmax(Var<T>, std::size_t);                                             \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, T);                                    \
  template Var<T> embedding_lookup(Var<T>, std::span<const std::uint32_t>);                 \
  template Var<T> gather_rows(Var<T>, std::span<const std::size_t>);                        \
  template Var<T> self_attention(Var<T>, Var<T>, Var<T>, std::span<const Segment>,          \
                                 std::size_t);                                              \
  template Var<T> cross_entropy(Var<T>, std::span<const std::uint32_t>);                    \
  template Var<T> mse(Var<T>, std::span<const T>);

LOTTERY_INSTANTIATE_OPS(float)
LOTTERY_INSTANTIATE_OPS(double)

#undef LOTTERY_INSTANTIATE_OPS

}  // namespace lottery::ad
