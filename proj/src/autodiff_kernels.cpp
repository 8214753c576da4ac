#include <algorithm>
#include <cmath>

#include "autodiff_internal.hpp"

namespace gplab::ad::detail {
namespace {

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
  return s;
}

// Visits every element of `shape` in row-major order, passing the output
// position and the matching offset into a source laid out with `src_strides`.
template <class F>
void for_each_strided(const Shape& shape, const std::vector<std::size_t>& src_strides, F&& f) {
  const std::size_t n = shape_size(shape);
  const std::size_t r = shape.size();
  if (n == 0) return;
  std::vector<std::size_t> idx(r, 0);
  std::size_t off = 0;
  for (std::size_t k = 0; k < n; ++k) {
    f(k, off);
    for (std::size_t ax = r; ax-- > 0;) {
      ++idx[ax];
      off += src_strides[ax];
      if (idx[ax] < shape[ax]) break;
      off -= src_strides[ax] * shape[ax];
      idx[ax] = 0;
    }
  }
}

// Strides into `small` for iterating over `big` with broadcasting.
std::vector<std::size_t> broadcast_strides(const Shape& big, const Shape& small) {
  const std::size_t r = big.size();
  const std::size_t lead = r - small.size();
  const auto ss = strides_of(small);
  std::vector<std::size_t> out(r, 0);
  for (std::size_t i = lead; i < r; ++i) {
    if (small[i - lead] != 1) out[i] = ss[i - lead];
  }
  return out;
}

Tensor broadcast(const Tensor& x, const Shape& target) {
  Tensor out(target);
  if (x.size() == out.size()) {
    std::copy(x.values().begin(), x.values().end(), out.values().begin());
    return out;
  }
  if (x.size() == 1) {
    std::fill(out.values().begin(), out.values().end(), x[0]);
    return out;
  }
  const double* src = x.data().data();
  double* dst = out.data().data();
  for_each_strided(target, broadcast_strides(target, x.shape()),
                   [&](std::size_t k, std::size_t off) { dst[k] = src[off]; });
  return out;
}

Tensor reduce_to(const Tensor& x, const Shape& target) {
  Tensor out(target);
  if (x.size() == out.size()) {
    std::copy(x.values().begin(), x.values().end(), out.values().begin());
    return out;
  }
  double* dst = out.data().data();
  const double* src = x.data().data();
  if (out.size() == 1) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += src[i];
    dst[0] = s;
    return out;
  }
  for_each_strided(x.shape(), broadcast_strides(x.shape(), target),
                   [&](std::size_t k, std::size_t off) { dst[off] += src[k]; });
  return out;
}

Tensor permuted(const Tensor& x, const Shape& perm) {
  Shape out_shape(perm.size());
  const auto in_strides = strides_of(x.shape());
  std::vector<std::size_t> src(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    out_shape[i] = x.dim(perm[i]);
    src[i] = in_strides[perm[i]];
  }
  Tensor out(out_shape);
  const double* s = x.data().data();
  double* d = out.data().data();
  for_each_strided(out_shape, src, [&](std::size_t k, std::size_t off) { d[k] = s[off]; });
  return out;
}

Tensor matmul_kernel(const Tensor& A, const Tensor& B, bool ta, bool tb) {
  const std::size_t M = ta ? A.dim(1) : A.dim(0);
  const std::size_t K = ta ? A.dim(0) : A.dim(1);
  const std::size_t N = tb ? B.dim(0) : B.dim(1);
  Tensor C(Shape{M, N});
  const double* a = A.data().data();
  const double* b = B.data().data();
  double* c = C.data().data();
  if (!ta && !tb) {
    for (std::size_t i = 0; i < M; ++i) {
      double* ci = c + i * N;
      for (std::size_t k = 0; k < K; ++k) {
        const double aik = a[i * K + k];
        const double* bk = b + k * N;
        for (std::size_t j = 0; j < N; ++j) ci[j] += aik * bk[j];
      }
    }
  } else if (!ta && tb) {
    std::vector<double> bt(K * N);
    for (std::size_t j = 0; j < N; ++j)
      for (std::size_t k = 0; k < K; ++k) bt[k * N + j] = b[j * K + k];
    for (std::size_t i = 0; i < M; ++i) {
      double* ci = c + i * N;
      for (std::size_t k = 0; k < K; ++k) {
        const double aik = a[i * K + k];
        const double* bk = bt.data() + k * N;
        for (std::size_t j = 0; j < N; ++j) ci[j] += aik * bk[j];
      }
    }
  } else if (ta && !tb) {
    for (std::size_t k = 0; k < K; ++k) {
      const double* ak = a + k * M;
      const double* bk = b + k * N;
      for (std::size_t i = 0; i < M; ++i) {
        const double aki = ak[i];
        double* ci = c + i * N;
        for (std::size_t j = 0; j < N; ++j) ci[j] += aki * bk[j];
      }
    }
  } else {
    for (std::size_t i = 0; i < M; ++i)
      for (std::size_t j = 0; j < N; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < K; ++k) s += a[k * M + i] * b[j * K + k];
        c[i * N + j] = s;
      }
  }
  return C;
}

template <class F>
Tensor map(const Tensor& x, F&& f) {
  Tensor out(x.shape());
  const double* s = x.data().data();
  double* d = out.data().data();
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = f(s[i]);
  return out;
}

template <class F>
Tensor zip(const Tensor& x, const Tensor& y, F&& f) {
  Tensor out(x.shape());
  const double* a = x.data().data();
  const double* b = y.data().data();
  double* d = out.data().data();
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = f(a[i], b[i]);
  return out;
}

double stable_softplus(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }

double stable_sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

// Splits a shape around `axis` into (outer, extent, inner) element counts.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

Tensor softmax_kernel(const Tensor& x) {
  Tensor out(x.shape());
  const std::size_t V = x.shape().back();
  const std::size_t rows = V ? x.size() / V : 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* s = x.data().data() + r * V;
    double* d = out.data().data() + r * V;
    const double mx = *std::max_element(s, s + V);
    double z = 0.0;
    for (std::size_t v = 0; v < V; ++v) z += (d[v] = std::exp(s[v] - mx));
    for (std::size_t v = 0; v < V; ++v) d[v] /= z;
  }
  return out;
}

Tensor conv1d_kernel(const Tensor& x, const Tensor& w) {
  const std::size_t B = x.dim(0), C = x.dim(1), L = x.dim(2);
  const std::size_t O = w.dim(0), K = w.dim(2);
  const std::size_t T = L - K + 1;
  Tensor y(Shape{B, O, T});
  const double* xs = x.data().data();
  const double* ws = w.data().data();
  double* ys = y.data().data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < O; ++o) {
      double* yrow = ys + (b * O + o) * T;
      for (std::size_t c = 0; c < C; ++c) {
        const double* xrow = xs + (b * C + c) * L;
        const double* wk = ws + (o * C + c) * K;
        for (std::size_t k = 0; k < K; ++k) {
          const double wv = wk[k];
          const double* xk = xrow + k;
          for (std::size_t t = 0; t < T; ++t) yrow[t] += wv * xk[t];
        }
      }
    }
  return y;
}

Tensor conv1d_input_grad_kernel(const Tensor& g, const Tensor& w, std::size_t L) {
  const std::size_t B = g.dim(0), O = g.dim(1), T = g.dim(2);
  const std::size_t C = w.dim(1), K = w.dim(2);
  Tensor dx(Shape{B, C, L});
  const double* gs = g.data().data();
  const double* ws = w.data().data();
  double* ds = dx.data().data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < O; ++o) {
      const double* grow = gs + (b * O + o) * T;
      for (std::size_t c = 0; c < C; ++c) {
        double* drow = ds + (b * C + c) * L;
        const double* wk = ws + (o * C + c) * K;
        for (std::size_t k = 0; k < K; ++k) {
          const double wv = wk[k];
          double* dk = drow + k;
          for (std::size_t t = 0; t < T; ++t) dk[t] += wv * grow[t];
        }
      }
    }
  return dx;
}

Tensor conv1d_weight_grad_kernel(const Tensor& x, const Tensor& g, std::size_t K) {
  const std::size_t B = x.dim(0), C = x.dim(1), L = x.dim(2);
  const std::size_t O = g.dim(1), T = g.dim(2);
  Tensor dw(Shape{O, C, K});
  const double* xs = x.data().data();
  const double* gs = g.data().data();
  double* ds = dw.data().data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < O; ++o) {
      const double* grow = gs + (b * O + o) * T;
      for (std::size_t c = 0; c < C; ++c) {
        const double* xrow = xs + (b * C + c) * L;
        double* dk = ds + (o * C + c) * K;
        for (std::size_t k = 0; k < K; ++k) {
          const double* xk = xrow + k;
          double s = 0.0;
          for (std::size_t t = 0; t < T; ++t) s += grow[t] * xk[t];
          dk[k] += s;
        }
      }
    }
  return dw;
}

Tensor concat_kernel(const Node& n, const std::vector<Node>& nodes) {
  const std::size_t axis = n.attr[0];
  Shape out_shape = nodes[n.inputs[0]].value.shape();
  out_shape[axis] = 0;
  for (auto i : n.inputs) out_shape[axis] += nodes[i].value.dim(axis);
  Tensor out(out_shape);
  const AxisSplit os = split_at(out_shape, axis);
  double* d = out.data().data();
  std::size_t at = 0;
  for (auto i : n.inputs) {
    const Tensor& p = nodes[i].value;
    const std::size_t chunk = p.dim(axis) * os.inner;
    for (std::size_t o = 0; o < os.outer; ++o) {
      std::copy_n(p.data().data() + o * chunk, chunk, d + o * os.extent * os.inner + at);
    }
    at += chunk;
  }
  return out;
}

Tensor slice_kernel(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  Shape s = x.shape();
  s[axis] = end - begin;
  Tensor out(s);
  const AxisSplit xs = split_at(x.shape(), axis);
  const std::size_t chunk = (end - begin) * xs.inner;
  for (std::size_t o = 0; o < xs.outer; ++o) {
    std::copy_n(x.data().data() + o * xs.extent * xs.inner + begin * xs.inner, chunk,
                out.data().data() + o * chunk);
  }
  return out;
}

Tensor pad_kernel(const Tensor& x, std::size_t axis, std::size_t before, std::size_t after) {
  Shape s = x.shape();
  s[axis] += before + after;
  Tensor out(s);
  const AxisSplit xs = split_at(x.shape(), axis);
  const std::size_t chunk = xs.extent * xs.inner;
  const std::size_t out_extent = s[axis];
  for (std::size_t o = 0; o < xs.outer; ++o) {
    std::copy_n(x.data().data() + o * chunk, chunk,
                out.data().data() + o * out_extent * xs.inner + before * xs.inner);
  }
  return out;
}

Tensor row_norm_kernel(const Tensor& x, double eps) {
  Shape s = x.shape();
  const std::size_t D = s.back();
  s.pop_back();
  Tensor out(s);
  for (std::size_t r = 0; r < out.size(); ++r) {
    const double* row = x.data().data() + r * D;
    double acc = 0.0;
    for (std::size_t j = 0; j < D; ++j) acc += row[j] * row[j];
    out[r] = std::sqrt(acc + eps);
  }
  return out;
}

}  // namespace

Tensor compute(const Node& n, const std::vector<Node>& nodes) {
  auto in = [&](std::size_t i) -> const Tensor& { return nodes[n.inputs[i]].value; };
  switch (n.op) {
    case Op::Leaf:
    case Op::Constant:
      return n.value;
    case Op::StopGradient:
      return in(0);
    case Op::Add:
      return zip(in(0), in(1), [](double a, double b) { return a + b; });
    case Op::Sub:
      return zip(in(0), in(1), [](double a, double b) { return a - b; });
    case Op::Mul:
      return zip(in(0), in(1), [](double a, double b) { return a * b; });
    case Op::Scale: {
      const double c = n.a;
      return map(in(0), [c](double v) { return v * c; });
    }
    case Op::AddScalar: {
      const double c = n.a;
      return map(in(0), [c](double v) { return v + c; });
    }
    case Op::MatMul:
      return matmul_kernel(in(0), in(1), n.a != 0.0, n.b != 0.0);
    case Op::Permute:
      return permuted(in(0), n.attr);
    case Op::Reshape:
      return in(0).reshaped(n.attr);
    case Op::BroadcastTo:
      return broadcast(in(0), n.attr);
    case Op::SumTo:
      return reduce_to(in(0), n.attr);
    case Op::Pow: {
      const double p = n.a;
      if (p == 2.0) return map(in(0), [](double v) { return v * v; });
      if (p == 1.0) return in(0);
      if (p == -1.0) return map(in(0), [](double v) { return 1.0 / v; });
      return map(in(0), [p](double v) { return std::pow(v, p); });
    }
    case Op::Sqrt:
      return map(in(0), [](double v) { return std::sqrt(v); });
    case Op::Exp:
      return map(in(0), [](double v) { return std::exp(v); });
    case Op::Log:
      return map(in(0), [](double v) { return std::log(v); });
    case Op::MaxScalar: {
      const double c = n.a;
      return map(in(0), [c](double v) { return v > c ? v : c; });
    }
    case Op::Relu:
      return map(in(0), [](double v) { return v > 0.0 ? v : 0.0; });
    case Op::LeakyRelu: {
      const double s = n.a;
      return map(in(0), [s](double v) { return v > 0.0 ? v : s * v; });
    }
    case Op::Tanh:
      return map(in(0), [](double v) { return std::tanh(v); });
    case Op::Softplus:
      return map(in(0), stable_softplus);
    case Op::Sigmoid:
      return map(in(0), stable_sigmoid);
    case Op::Softmax:
      return softmax_kernel(in(0));
    case Op::StepMask: {
      const double t = n.a, below = n.b;
      return map(in(0), [t, below](double v) { return v > t ? 1.0 : below; });
    }
    case Op::Conv1d:
      return conv1d_kernel(in(0), in(1));
    case Op::Conv1dInputGrad:
      return conv1d_input_grad_kernel(in(0), in(1), n.attr[0]);
    case Op::Conv1dWeightGrad:
      return conv1d_weight_grad_kernel(in(0), in(1), n.attr[0]);
    case Op::Concat:
      return concat_kernel(n, nodes);
    case Op::Slice:
      return slice_kernel(in(0), n.attr[0], n.attr[1], n.attr[2]);
    case Op::Pad:
      return pad_kernel(in(0), n.attr[0], n.attr[1], n.attr[2]);
    case Op::RowNorm:
      return row_norm_kernel(in(0), n.a);
  }
  throw Error("unknown op");
}

}  // namespace gplab::ad::detail
