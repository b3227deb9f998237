#include "qrnn/ops.h"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace qrnn {

template <>
void gemm<float>(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
                 std::size_t k, float alpha, const float* a, const float* b,
                 float beta, float* c) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, int(m), int(n), int(k),
              alpha, a, trans_a ? int(m) : int(k), b,
              trans_b ? int(k) : int(n), beta, c, int(n));
}

template <>
void gemm<double>(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
                  std::size_t k, double alpha, const double* a,
                  const double* b, double beta, double* c) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, int(m), int(n), int(k),
              alpha, a, trans_a ? int(m) : int(k), b,
              trans_b ? int(k) : int(n), beta, c, int(n));
}

namespace {

template <Real T>
Graph<T>& graph_of(Var<T> a) {
  if (!a.valid()) throw StateError("op applied to an unset Var");
  return *a.graph();
}

template <Real T>
void require_same_shape(const char* op, Var<T> a, Var<T> b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

template <Real T>
bool wants_grad(Graph<T>& g, Var<T> v) {
  return v.valid() && g.requires_grad(v.id());
}

template <Real T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src, T factor = T(1)) {
  T* d = dst.raw();
  const T* s = src.raw();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += factor * s[i];
}

std::size_t product(const Shape& s, std::size_t from, std::size_t to) {
  std::size_t n = 1;
  for (std::size_t i = from; i < to; ++i) n *= s[i];
  return n;
}

template <Real T>
constexpr T below_one() {
  return T(1) - std::numeric_limits<T>::epsilon() / 2;
}

}  // namespace

template <Real T>
Var<T> matmul(Var<T> a, Var<T> b) {
  Graph<T>& g = graph_of(a);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw ShapeError("matmul: incompatible shapes " + shape_string(sa) +
                     " and " + shape_string(sb));
  }
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  Tensor<T> out({m, n});
  gemm<T>(false, false, m, n, k, T(1), a.value().raw(), b.value().raw(), T(0),
          out.raw());
  return g.record(std::move(out), {a, b},
                  [a, b, m, n, k](Graph<T>& g, std::uint32_t self) {
                    const T* dc = g.grad(self).raw();
                    if (wants_grad(g, a)) {
                      gemm<T>(false, true, m, k, n, T(1), dc,
                              g.value(b.id()).raw(), T(1),
                              g.grad_buffer(a.id()).raw());
                    }
                    if (wants_grad(g, b)) {
                      gemm<T>(true, false, k, n, m, T(1),
                              g.value(a.id()).raw(), dc, T(1),
                              g.grad_buffer(b.id()).raw());
                    }
                  });
}

template <Real T>
Var<T> add(Var<T> a, Var<T> b) {
  Graph<T>& g = graph_of(a);
  require_same_shape("add", a, b);
  Tensor<T> out = a.value();
  accumulate(out, b.value());
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& g, std::uint32_t self) {
    const Tensor<T>& d = g.grad(self);
    if (wants_grad(g, a)) accumulate(g.grad_buffer(a.id()), d);
    if (wants_grad(g, b)) accumulate(g.grad_buffer(b.id()), d);
  });
}

template <Real T>
Var<T> sub(Var<T> a, Var<T> b) {
  Graph<T>& g = graph_of(a);
  require_same_shape("sub", a, b);
  Tensor<T> out = a.value();
  accumulate(out, b.value(), T(-1));
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& g, std::uint32_t self) {
    const Tensor<T>& d = g.grad(self);
    if (wants_grad(g, a)) accumulate(g.grad_buffer(a.id()), d);
    if (wants_grad(g, b)) accumulate(g.grad_buffer(b.id()), d, T(-1));
  });
}

template <Real T>
Var<T> hadamard(Var<T> a, Var<T> b) {
  Graph<T>& g = graph_of(a);
  require_same_shape("hadamard", a, b);
  Tensor<T> out = a.value();
  const T* pb = b.value().raw();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= pb[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& g, std::uint32_t self) {
    const Tensor<T>& d = g.grad(self);
    const Tensor<T>& va = g.value(a.id());
    const Tensor<T>& vb = g.value(b.id());
    if (wants_grad(g, a)) {
      Tensor<T>& ga = g.grad_buffer(a.id());
      for (std::size_t i = 0; i < d.size(); ++i) ga[i] += d[i] * vb[i];
    }
    if (wants_grad(g, b)) {
      Tensor<T>& gb = g.grad_buffer(b.id());
      for (std::size_t i = 0; i < d.size(); ++i) gb[i] += d[i] * va[i];
    }
  });
}

template <Real T>
Var<T> affine(Var<T> a, T alpha, T beta) {
  Graph<T>& g = graph_of(a);
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v = alpha * v + beta;
  return g.record(std::move(out), {a}, [a, alpha](Graph<T>& g, std::uint32_t self) {
    accumulate(g.grad_buffer(a.id()), g.grad(self), alpha);
  });
}

template <Real T>
Var<T> scale(Var<T> a, T s) {
  return affine(a, s, T(0));
}

template <Real T>
Var<T> add_bias(Var<T> x, Var<T> b) {
  Graph<T>& g = graph_of(x);
  const Shape& sx = x.shape();
  if (b.shape().size() != 1 || b.shape()[0] != sx.back()) {
    throw ShapeError("add_bias: bias " + shape_string(b.shape()) +
                     " does not match last axis of " + shape_string(sx));
  }
  const std::size_t n = sx.back();
  const std::size_t rows = x.value().size() / n;
  Tensor<T> out = x.value();
  const T* pb = b.value().raw();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] += pb[j];
  return g.record(std::move(out), {x, b},
                  [x, b, rows, n](Graph<T>& g, std::uint32_t self) {
                    const Tensor<T>& d = g.grad(self);
                    if (wants_grad(g, x)) accumulate(g.grad_buffer(x.id()), d);
                    if (wants_grad(g, b)) {
                      Tensor<T>& gb = g.grad_buffer(b.id());
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t j = 0; j < n; ++j)
                          gb[j] += d[r * n + j];
                    }
                  });
}

template <Real T>
Var<T> mul_broadcast(Var<T> x, Var<T> w) {
  Graph<T>& g = graph_of(x);
  const Shape& sx = x.shape();
  const Shape trailing(sx.begin() + 1, sx.end());
  if (w.shape() != trailing) {
    throw ShapeError("mul_broadcast: weight " + shape_string(w.shape()) +
                     " does not match trailing dims of " + shape_string(sx));
  }
  const std::size_t inner = w.value().size();
  const std::size_t outer = sx[0];
  Tensor<T> out = x.value();
  const T* pw = w.value().raw();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] *= pw[i];
  return g.record(std::move(out), {x, w},
                  [x, w, outer, inner](Graph<T>& g, std::uint32_t self) {
                    const Tensor<T>& d = g.grad(self);
                    const Tensor<T>& vx = g.value(x.id());
                    const Tensor<T>& vw = g.value(w.id());
                    if (wants_grad(g, x)) {
                      Tensor<T>& gx = g.grad_buffer(x.id());
                      for (std::size_t o = 0; o < outer; ++o)
                        for (std::size_t i = 0; i < inner; ++i)
                          gx[o * inner + i] += d[o * inner + i] * vw[i];
                    }
                    if (wants_grad(g, w)) {
                      Tensor<T>& gw = g.grad_buffer(w.id());
                      for (std::size_t o = 0; o < outer; ++o)
                        for (std::size_t i = 0; i < inner; ++i)
                          gw[i] += d[o * inner + i] * vx[o * inner + i];
                    }
                  });
}

template <Real T>
Var<T> sigmoid(Var<T> x) {
  Graph<T>& g = graph_of(x);
  Tensor<T> out = x.value();
  constexpr T hi = below_one<T>();
  constexpr T lo = std::numeric_limits<T>::min();
  for (auto& v : out.data()) {
    T s;
    if (v >= 0) {
      s = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      s = e / (T(1) + e);
    }
    v = std::clamp(s, lo, hi);
  }
  return g.record(std::move(out), {x}, [x](Graph<T>& g, std::uint32_t self) {
    const Tensor<T>& d = g.grad(self);
    const Tensor<T>& y = g.value(self);
    Tensor<T>& gx = g.grad_buffer(x.id());
    for (std::size_t i = 0; i < d.size(); ++i)
      gx[i] += d[i] * y[i] * (T(1) - y[i]);
  });
}

template <Real T>
Var<T> tanh_op(Var<T> x) {
  Graph<T>& g = graph_of(x);
  Tensor<T> out = x.value();
  constexpr T hi = below_one<T>();
  for (auto& v : out.data()) v = std::clamp(std::tanh(v), -hi, hi);
  return g.record(std::move(out), {x}, [x](Graph<T>& g, std::uint32_t self) {
    const Tensor<T>& d = g.grad(self);
    const Tensor<T>& y = g.value(self);
    Tensor<T>& gx = g.grad_buffer(x.id());
    for (std::size_t i = 0; i < d.size(); ++i)
      gx[i] += d[i] * (T(1) - y[i] * y[i]);
  });
}

template <Real T>
Var<T> softmax_last(Var<T> x) {
  Graph<T>& g = graph_of(x);
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.value().size() / n;
  Tensor<T> out = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    T* row = out.raw() + r * n;
    const T peak = *std::max_element(row, row + n);
    T total = 0;
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - peak);
      total += row[j];
    }
    for (std::size_t j = 0; j < n; ++j) row[j] /= total;
  }
  return g.record(std::move(out), {x}, [x, rows, n](Graph<T>& g, std::uint32_t self) {
    const Tensor<T>& d = g.grad(self);
    const Tensor<T>& y = g.value(self);
    Tensor<T>& gx = g.grad_buffer(x.id());
    for (std::size_t r = 0; r < rows; ++r) {
      T dot = 0;
      for (std::size_t j = 0; j < n; ++j) dot += d[r * n + j] * y[r * n + j];
      for (std::size_t j = 0; j < n; ++j)
        gx[r * n + j] += y[r * n + j] * (d[r * n + j] - dot);
    }
  });
}

template <Real T>
Var<T> sum(Var<T> x) {
  Graph<T>& g = graph_of(x);
  T total = 0;
  for (T v : x.value().data()) total += v;
  return g.record(Tensor<T>({1}, total), {x}, [x](Graph<T>& g, std::uint32_t self) {
    const T d = g.grad(self)[0];
    for (auto& v : g.grad_buffer(x.id()).data()) v += d;
  });
}

template <Real T>
Var<T> mean(Var<T> x) {
  return scale(sum(x), T(1) / static_cast<T>(x.value().size()));
}

template <Real T>
Var<T> concat(std::span<const Var<T>> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  Graph<T>& g = graph_of(parts[0]);
  const Shape& s0 = parts[0].shape();
  if (axis >= s0.size()) throw ShapeError("concat: axis out of range");
  Shape out_shape = s0;
  out_shape[axis] = 0;
  std::vector<std::size_t> inner;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i)
      ok = i == axis || s[i] == s0[i];
    if (!ok) {
      throw ShapeError("concat: incompatible shapes " + shape_string(s0) +
                       " and " + shape_string(s));
    }
    out_shape[axis] += s[axis];
    inner.push_back(product(s, axis, s.size()));
  }
  const std::size_t outer = product(s0, 0, axis);
  std::size_t row = 0;
  for (auto v : inner) row += v;
  Tensor<T> out(out_shape);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const T* src = parts[p].value().raw();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(src + o * inner[p], inner[p], out.raw() + o * row + offset);
    offset += inner[p];
  }
  std::vector<Var<T>> keep(parts.begin(), parts.end());
  return g.record(std::move(out), parts,
                  [keep, inner, outer, row](Graph<T>& g, std::uint32_t self) {
                    const T* d = g.grad(self).raw();
                    std::size_t offset = 0;
                    for (std::size_t p = 0; p < keep.size(); ++p) {
                      if (wants_grad(g, keep[p])) {
                        T* dst = g.grad_buffer(keep[p].id()).raw();
                        for (std::size_t o = 0; o < outer; ++o)
                          for (std::size_t i = 0; i < inner[p]; ++i)
                            dst[o * inner[p] + i] += d[o * row + offset + i];
                      }
                      offset += inner[p];
                    }
                  });
}

template <Real T>
Var<T> slice(Var<T> x, std::size_t axis, std::size_t start, std::size_t length) {
  Graph<T>& g = graph_of(x);
  const Shape& s = x.shape();
  if (axis >= s.size() || length == 0 || start + length > s[axis]) {
    throw ShapeError("slice [" + std::to_string(start) + ", +" +
                     std::to_string(length) + ") on axis " +
                     std::to_string(axis) + " of " + shape_string(s));
  }
  const std::size_t outer = product(s, 0, axis);
  const std::size_t stride = product(s, axis + 1, s.size());
  const std::size_t row = s[axis] * stride;
  const std::size_t block = length * stride;
  const std::size_t offset = start * stride;
  Shape out_shape = s;
  out_shape[axis] = length;
  Tensor<T> out(out_shape);
  const T* src = x.value().raw();
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(src + o * row + offset, block, out.raw() + o * block);
  return g.record(std::move(out), {x},
                  [x, outer, row, block, offset](Graph<T>& g, std::uint32_t self) {
                    const T* d = g.grad(self).raw();
                    T* dst = g.grad_buffer(x.id()).raw();
                    for (std::size_t o = 0; o < outer; ++o)
                      for (std::size_t i = 0; i < block; ++i)
                        dst[o * row + offset + i] += d[o * block + i];
                  });
}

template <Real T>
Var<T> stack(std::span<const Var<T>> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("stack of zero tensors");
  Graph<T>& g = graph_of(parts[0]);
  const Shape& s0 = parts[0].shape();
  if (axis > s0.size()) throw ShapeError("stack: axis out of range");
  for (const auto& p : parts) {
    if (p.shape() != s0) {
      throw ShapeError("stack: shape mismatch " + shape_string(s0) + " vs " +
                       shape_string(p.shape()));
    }
  }
  const std::size_t outer = product(s0, 0, axis);
  const std::size_t inner = product(s0, axis, s0.size());
  const std::size_t count = parts.size();
  Shape out_shape = s0;
  out_shape.insert(out_shape.begin() + axis, count);
  Tensor<T> out(out_shape);
  for (std::size_t p = 0; p < count; ++p) {
    const T* src = parts[p].value().raw();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(src + o * inner, inner, out.raw() + (o * count + p) * inner);
  }
  std::vector<Var<T>> keep(parts.begin(), parts.end());
  return g.record(std::move(out), parts,
                  [keep, outer, inner](Graph<T>& g, std::uint32_t self) {
                    const T* d = g.grad(self).raw();
                    const std::size_t count = keep.size();
                    for (std::size_t p = 0; p < count; ++p) {
                      if (!wants_grad(g, keep[p])) continue;
                      T* dst = g.grad_buffer(keep[p].id()).raw();
                      for (std::size_t o = 0; o < outer; ++o)
                        for (std::size_t i = 0; i < inner; ++i)
                          dst[o * inner + i] += d[(o * count + p) * inner + i];
                    }
                  });
}

template <Real T>
Var<T> select(Var<T> x, std::size_t axis, std::size_t index) {
  const Shape& s = x.shape();
  if (axis >= s.size() || s.size() < 2) {
    throw ShapeError("select: axis " + std::to_string(axis) + " invalid for " +
                     shape_string(s));
  }
  Var<T> one = slice(x, axis, index, 1);
  Graph<T>& g = graph_of(x);
  Shape out_shape = s;
  out_shape.erase(out_shape.begin() + axis);
  return g.record(one.value().reshaped(out_shape), {one},
                  [one](Graph<T>& g, std::uint32_t self) {
                    accumulate(g.grad_buffer(one.id()), g.grad(self));
                  });
}

namespace {

struct ConvGeometry {
  std::size_t batch = 1, c_in = 0, c_out = 0;
  std::size_t t = 1, h = 0, w = 0;
  std::size_t kt = 1, kh = 0, kw = 0;
  bool causal = false;
  bool batched = false;

  std::size_t volume() const { return t * h * w; }
  std::size_t patch() const { return c_in * kt * kh * kw; }
};

// col[(c, dt, dy, dx), (tt, y, x)] = in[c, tt + dt - pt, y + dy - ph, x + dx - pw]
template <Real T>
void im2col(const ConvGeometry& g, const T* in, T* col) {
  const long pt = long(g.kt / 2), ph = long(g.kh / 2), pw = long(g.kw / 2);
  const std::size_t vol = g.volume();
  std::size_t r = 0;
  for (std::size_t c = 0; c < g.c_in; ++c)
    for (std::size_t dt = 0; dt < g.kt; ++dt)
      for (std::size_t dy = 0; dy < g.kh; ++dy)
        for (std::size_t dx = 0; dx < g.kw; ++dx, ++r) {
          T* dst = col + r * vol;
          const long ot = long(dt) - pt;
          if (g.causal && ot > 0) {
            std::fill_n(dst, vol, T(0));
            continue;
          }
          const long oy = long(dy) - ph, ox = long(dx) - pw;
          for (std::size_t tt = 0; tt < g.t; ++tt) {
            const long st = long(tt) + ot;
            for (std::size_t y = 0; y < g.h; ++y) {
              const long sy = long(y) + oy;
              T* row = dst + (tt * g.h + y) * g.w;
              if (st < 0 || st >= long(g.t) || sy < 0 || sy >= long(g.h)) {
                std::fill_n(row, g.w, T(0));
                continue;
              }
              const T* src = in + ((c * g.t + st) * g.h + sy) * g.w;
              for (std::size_t x = 0; x < g.w; ++x) {
                const long sx = long(x) + ox;
                row[x] = (sx < 0 || sx >= long(g.w)) ? T(0) : src[sx];
              }
            }
          }
        }
}

template <Real T>
void col2im_add(const ConvGeometry& g, const T* col, T* in) {
  const long pt = long(g.kt / 2), ph = long(g.kh / 2), pw = long(g.kw / 2);
  const std::size_t vol = g.volume();
  std::size_t r = 0;
  for (std::size_t c = 0; c < g.c_in; ++c)
    for (std::size_t dt = 0; dt < g.kt; ++dt)
      for (std::size_t dy = 0; dy < g.kh; ++dy)
        for (std::size_t dx = 0; dx < g.kw; ++dx, ++r) {
          const long ot = long(dt) - pt;
          if (g.causal && ot > 0) continue;
          const T* src_col = col + r * vol;
          const long oy = long(dy) - ph, ox = long(dx) - pw;
          for (std::size_t tt = 0; tt < g.t; ++tt) {
            const long st = long(tt) + ot;
            if (st < 0 || st >= long(g.t)) continue;
            for (std::size_t y = 0; y < g.h; ++y) {
              const long sy = long(y) + oy;
              if (sy < 0 || sy >= long(g.h)) continue;
              const T* row = src_col + (tt * g.h + y) * g.w;
              T* dst = in + ((c * g.t + st) * g.h + sy) * g.w;
              for (std::size_t x = 0; x < g.w; ++x) {
                const long sx = long(x) + ox;
                if (sx >= 0 && sx < long(g.w)) dst[sx] += row[x];
              }
            }
          }
        }
}

template <Real T>
Var<T> conv_same(Var<T> x, Var<T> k, Var<T> b, ConvGeometry geo) {
  Graph<T>& g = graph_of(x);
  Shape out_shape = x.shape();
  out_shape[geo.batched ? 1 : 0] = geo.c_out;
  Tensor<T> out(out_shape);
  const std::size_t vol = geo.volume();
  const std::size_t in_stride = geo.c_in * vol;
  const std::size_t out_stride = geo.c_out * vol;
  std::vector<T> col(geo.patch() * vol);
  const T* px = x.value().raw();
  const T* pk = k.value().raw();
  for (std::size_t n = 0; n < geo.batch; ++n) {
    im2col(geo, px + n * in_stride, col.data());
    T* po = out.raw() + n * out_stride;
    gemm<T>(false, false, geo.c_out, vol, geo.patch(), T(1), pk, col.data(),
            T(0), po);
    if (b.valid()) {
      const T* pb = b.value().raw();
      for (std::size_t o = 0; o < geo.c_out; ++o)
        for (std::size_t i = 0; i < vol; ++i) po[o * vol + i] += pb[o];
    }
  }
  return g.record(
      std::move(out), {x, k, b},
      [x, k, b, geo, vol, in_stride, out_stride](Graph<T>& g, std::uint32_t self) {
        const T* d = g.grad(self).raw();
        const T* px = g.value(x.id()).raw();
        const T* pk = g.value(k.id()).raw();
        const bool gx = wants_grad(g, x), gk = wants_grad(g, k),
                   gb = wants_grad(g, b);
        std::vector<T> col(geo.patch() * vol);
        for (std::size_t n = 0; n < geo.batch; ++n) {
          const T* dn = d + n * out_stride;
          if (gk) {
            im2col(geo, px + n * in_stride, col.data());
            gemm<T>(false, true, geo.c_out, geo.patch(), vol, T(1), dn,
                    col.data(), T(1), g.grad_buffer(k.id()).raw());
          }
          if (gb) {
            T* db = g.grad_buffer(b.id()).raw();
            for (std::size_t o = 0; o < geo.c_out; ++o)
              for (std::size_t i = 0; i < vol; ++i) db[o] += dn[o * vol + i];
          }
          if (gx) {
            gemm<T>(true, false, geo.patch(), vol, geo.c_out, T(1), pk, dn,
                    T(0), col.data());
            col2im_add(geo, col.data(), g.grad_buffer(x.id()).raw() + n * in_stride);
          }
        }
      });
}

void check_odd(const Shape& k, std::size_t from) {
  for (std::size_t i = from; i < k.size(); ++i) {
    if (k[i] % 2 == 0) {
      throw ConfigError("convolution kernel " + shape_string(k) +
                        " has an even spatial size; same padding needs odd sizes");
    }
  }
}

template <Real T>
void check_bias(Var<T> b, std::size_t c_out) {
  if (b.valid() && (b.shape().size() != 1 || b.shape()[0] != c_out)) {
    throw ShapeError("convolution bias " + shape_string(b.shape()) +
                     " does not match " + std::to_string(c_out) +
                     " output channels");
  }
}

}  // namespace

template <Real T>
Var<T> conv2d_same(Var<T> x, Var<T> k, Var<T> b) {
  const Shape& sx = x.shape();
  const Shape& sk = k.shape();
  if ((sx.size() != 3 && sx.size() != 4) || sk.size() != 4) {
    throw ShapeError("conv2d_same: expected x [N,]C,H,W and k O,C,kh,kw; got " +
                     shape_string(sx) + " and " + shape_string(sk));
  }
  check_odd(sk, 2);
  ConvGeometry geo;
  geo.batched = sx.size() == 4;
  const std::size_t base = geo.batched ? 1 : 0;
  geo.batch = geo.batched ? sx[0] : 1;
  geo.c_in = sx[base];
  geo.h = sx[base + 1];
  geo.w = sx[base + 2];
  geo.c_out = sk[0];
  geo.kh = sk[2];
  geo.kw = sk[3];
  if (sk[1] != geo.c_in) {
    throw ShapeError("conv2d_same: kernel " + shape_string(sk) +
                     " expects " + std::to_string(sk[1]) +
                     " input channels, input " + shape_string(sx));
  }
  check_bias(b, geo.c_out);
  return conv_same(x, k, b, geo);
}

template <Real T>
Var<T> conv3d_same(Var<T> x, Var<T> k, Var<T> b, TemporalPadding temporal) {
  const Shape& sx = x.shape();
  const Shape& sk = k.shape();
  if ((sx.size() != 4 && sx.size() != 5) || sk.size() != 5) {
    throw ShapeError(
        "conv3d_same: expected x [N,]C,T,H,W and k O,C,kt,kh,kw; got " +
        shape_string(sx) + " and " + shape_string(sk));
  }
  check_odd(sk, 2);
  ConvGeometry geo;
  geo.batched = sx.size() == 5;
  const std::size_t base = geo.batched ? 1 : 0;
  geo.batch = geo.batched ? sx[0] : 1;
  geo.c_in = sx[base];
  geo.t = sx[base + 1];
  geo.h = sx[base + 2];
  geo.w = sx[base + 3];
  geo.c_out = sk[0];
  geo.kt = sk[2];
  geo.kh = sk[3];
  geo.kw = sk[4];
  geo.causal = temporal == TemporalPadding::kCausal;
  if (sk[1] != geo.c_in) {
    throw ShapeError("conv3d_same: kernel " + shape_string(sk) +
                     " expects " + std::to_string(sk[1]) +
                     " input channels, input " + shape_string(sx));
  }
  check_bias(b, geo.c_out);
  return conv_same(x, k, b, geo);
}

template <Real T>
Var<T> embedding_lookup(Var<T> table, std::span<const std::int32_t> ids) {
  Graph<T>& g = graph_of(table);
  const Shape& st = table.shape();
  if (st.size() != 2) throw ShapeError("embedding table must be [V, E]");
  if (ids.empty()) throw ShapeError("embedding_lookup with no ids");
  const std::size_t vocab = st[0], width = st[1];
  Tensor<T> out({ids.size(), width});
  const T* src = table.value().raw();
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || std::size_t(ids[r]) >= vocab) {
      throw DataError("token id " + std::to_string(ids[r]) +
                      " outside vocabulary of size " + std::to_string(vocab));
    }
    std::copy_n(src + std::size_t(ids[r]) * width, width, out.raw() + r * width);
  }
  std::vector<std::int32_t> keep(ids.begin(), ids.end());
  return g.record(std::move(out), {table},
                  [table, keep, width](Graph<T>& g, std::uint32_t self) {
                    const T* d = g.grad(self).raw();
                    T* dst = g.grad_buffer(table.id()).raw();
                    for (std::size_t r = 0; r < keep.size(); ++r) {
                      T* row = dst + std::size_t(keep[r]) * width;
                      for (std::size_t j = 0; j < width; ++j)
                        row[j] += d[r * width + j];
                    }
                  });
}

namespace {

struct ChannelLayout {
  std::size_t outer, channels, inner;
};

template <Real T>
ChannelLayout channel_layout(Var<T> x, Var<T> gamma, Var<T> beta) {
  const Shape& s = x.shape();
  if (s.size() < 2) throw ShapeError("batch norm needs rank >= 2 input");
  const Shape param{s[1]};
  if (gamma.shape() != param || beta.shape() != param) {
    throw ShapeError("batch norm parameters must be " + shape_string(param));
  }
  return {s[0], s[1], product(s, 2, s.size())};
}

// y = gamma * (x - mean) * inv_std + beta, with gradients for gamma/beta and,
// when `batch_stats` holds, the full gradient through the batch statistics.
template <Real T>
Var<T> normalize(Var<T> x, Var<T> gamma, Var<T> beta, std::vector<T> mean,
                 std::vector<T> inv_std, bool batch_stats) {
  Graph<T>& g = graph_of(x);
  const ChannelLayout L = channel_layout(x, gamma, beta);
  Tensor<T> out(x.shape());
  const T* px = x.value().raw();
  const T* pg = gamma.value().raw();
  const T* pb = beta.value().raw();
  for (std::size_t o = 0; o < L.outer; ++o)
    for (std::size_t c = 0; c < L.channels; ++c) {
      const std::size_t base = (o * L.channels + c) * L.inner;
      for (std::size_t i = 0; i < L.inner; ++i)
        out[base + i] = pg[c] * (px[base + i] - mean[c]) * inv_std[c] + pb[c];
    }
  return g.record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, L, mean, inv_std, batch_stats](Graph<T>& g,
                                                       std::uint32_t self) {
        const T* d = g.grad(self).raw();
        const T* px = g.value(x.id()).raw();
        const T* pg = g.value(gamma.id()).raw();
        const T count = T(L.outer * L.inner);
        std::vector<T> sum_d(L.channels, 0), sum_dxhat(L.channels, 0);
        for (std::size_t o = 0; o < L.outer; ++o)
          for (std::size_t c = 0; c < L.channels; ++c) {
            const std::size_t base = (o * L.channels + c) * L.inner;
            for (std::size_t i = 0; i < L.inner; ++i) {
              const T xhat = (px[base + i] - mean[c]) * inv_std[c];
              sum_d[c] += d[base + i];
              sum_dxhat[c] += d[base + i] * xhat;
            }
          }
        if (wants_grad(g, gamma)) {
          T* dg = g.grad_buffer(gamma.id()).raw();
          for (std::size_t c = 0; c < L.channels; ++c) dg[c] += sum_dxhat[c];
        }
        if (wants_grad(g, beta)) {
          T* db = g.grad_buffer(beta.id()).raw();
          for (std::size_t c = 0; c < L.channels; ++c) db[c] += sum_d[c];
        }
        if (!wants_grad(g, x)) return;
        T* dx = g.grad_buffer(x.id()).raw();
        for (std::size_t o = 0; o < L.outer; ++o)
          for (std::size_t c = 0; c < L.channels; ++c) {
            const std::size_t base = (o * L.channels + c) * L.inner;
            const T k = pg[c] * inv_std[c];
            for (std::size_t i = 0; i < L.inner; ++i) {
              if (!batch_stats) {
                dx[base + i] += k * d[base + i];
                continue;
              }
              const T xhat = (px[base + i] - mean[c]) * inv_std[c];
              dx[base + i] += k * (d[base + i] - sum_d[c] / count -
                                   xhat * sum_dxhat[c] / count);
            }
          }
      });
}

}  // namespace

template <Real T>
Var<T> batch_norm_train(Var<T> x, Var<T> gamma, Var<T> beta, T eps,
                        Tensor<T>* mean_out, Tensor<T>* var_out) {
  const ChannelLayout L = channel_layout(x, gamma, beta);
  const T* px = x.value().raw();
  const double count = double(L.outer * L.inner);
  std::vector<T> mean(L.channels), inv_std(L.channels);
  Tensor<T> var_t({L.channels});
  for (std::size_t c = 0; c < L.channels; ++c) {
    double s = 0;
    for (std::size_t o = 0; o < L.outer; ++o) {
      const T* p = px + (o * L.channels + c) * L.inner;
      for (std::size_t i = 0; i < L.inner; ++i) s += p[i];
    }
    const double m = s / count;
    double sq = 0;
    for (std::size_t o = 0; o < L.outer; ++o) {
      const T* p = px + (o * L.channels + c) * L.inner;
      for (std::size_t i = 0; i < L.inner; ++i) sq += (p[i] - m) * (p[i] - m);
    }
    mean[c] = T(m);
    var_t[c] = T(sq / count);
    inv_std[c] = T(1.0 / std::sqrt(sq / count + double(eps)));
  }
  if (mean_out) *mean_out = Tensor<T>({L.channels}, mean);
  if (var_out) *var_out = std::move(var_t);
  return normalize(x, gamma, beta, std::move(mean), std::move(inv_std), true);
}

template <Real T>
Var<T> batch_norm_fixed(Var<T> x, Var<T> gamma, Var<T> beta,
                        const Tensor<T>& mean, const Tensor<T>& var, T eps) {
  const ChannelLayout L = channel_layout(x, gamma, beta);
  if (mean.size() != L.channels || var.size() != L.channels) {
    throw ShapeError("batch norm running statistics do not match channels");
  }
  std::vector<T> m(mean.data().begin(), mean.data().end());
  std::vector<T> inv_std(L.channels);
  for (std::size_t c = 0; c < L.channels; ++c)
    inv_std[c] = T(1.0 / std::sqrt(double(var[c]) + double(eps)));
  return normalize(x, gamma, beta, std::move(m), std::move(inv_std), false);
}

#define QRNN_INSTANTIATE_OPS(T)                                                 \
  template Var<T> matmul(Var<T>, Var<T>);                                       \
  template Var<T> add(Var<T>, Var<T>);                                          \
  template Var<T> sub(Var<T>, Var<T>);                                          \
  template Var<T> hadamard(Var<T>, Var<T>);                                     \
  template Var<T> scale(Var<T>, T);                                             \
  template Var<T> affine(Var<T>, T, T);                                         \
  template Var<T> add_bias(Var<T>, Var<T>);                                     \
  template Var<T> mul_broadcast(Var<T>, Var<T>);                                \
  template Var<T> sigmoid(Var<T>);                                              \
  template Var<T> tanh_op(Var<T>);                                              \
  template Var<T> softmax_last(Var<T>);                                         \
  template Var<T> sum(Var<T>);                                                  \
  template Var<T> mean(Var<T>);                                                 \
  template Var<T> concat(std::span<const Var<T>>, std::size_t);                 \
  template Var<T> slice(Var<T>, std::size_t, std::size_t, std::size_t);         \
  template Var<T> stack(std::span<const Var<T>>, std::size_t);                  \
  template Var<T> select(Var<T>, std::size_t, std::size_t);                     \
  template Var<T> conv2d_same(Var<T>, Var<T>, Var<T>);                          \
  template Var<T> conv3d_same(Var<T>, Var<T>, Var<T>, TemporalPadding);         \
  template Var<T> embedding_lookup(Var<T>, std::span<const std::int32_t>);      \
  template Var<T> batch_norm_train(Var<T>, Var<T>, Var<T>, T, Tensor<T>*,       \
                                   Tensor<T>*);                                 \
  template Var<T> batch_norm_fixed(Var<T>, Var<T>, Var<T>, const Tensor<T>&,    \
                                   const Tensor<T>&, T);

QRNN_INSTANTIATE_OPS(float)
QRNN_INSTANTIATE_OPS(double)

#undef QRNN_INSTANTIATE_OPS

}  // namespace qrnn
