#include "omgpt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include <Eigen/Core>

#include "omgpt/error.hpp"

namespace omgpt::tc {

namespace {

thread_local bool g_grad_enabled = true;

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

int normalize_axis(int axis, int rank) {
  const int a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) {
    fail(ErrorCode::InvalidAxis, "axis " + std::to_string(axis) + " for rank " + std::to_string(rank));
  }
  return a;
}

struct AxisSplit {
  std::int64_t outer = 1;
  std::int64_t n = 1;
  std::int64_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, int axis) {
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= shape[static_cast<std::size_t>(i)];
  s.n = shape[static_cast<std::size_t>(axis)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  fail(ErrorCode::ShapeMismatch, std::string(op) + ": " + to_string(a) + " vs " + to_string(b));
}

template <typename T>
Tensor<T> make_result(Shape shape, Buffer<T> value, const char* op, std::vector<NodePtr<T>> inputs,
                      std::function<void(Node<T>&)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  const bool needs = g_grad_enabled &&
                     std::any_of(inputs.begin(), inputs.end(), [](const NodePtr<T>& n) { return n->requires_grad; });
  if (needs) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
  }
  return Tensor<T>(std::move(node));
}

// Gradient buffer of an input, or nullptr when the input takes no gradient.
template <typename T>
T* grad_of(Node<T>& out, std::size_t i) {
  Node<T>& in = *out.inputs[i];
  if (!in.requires_grad) return nullptr;
  return in.grad_buffer().data();
}

// b broadcasts over a when b.shape is a suffix of a.shape.
bool is_suffix(const Shape& a, const Shape& b) {
  if (b.size() > a.size()) return false;
  return std::equal(b.rbegin(), b.rend(), a.rbegin());
}

}  // namespace

std::int64_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
Tensor<T> Tensor<T>::constant(Shape shape, std::vector<T> values) {
  if (static_cast<std::int64_t>(values.size()) != tc::numel(shape)) {
    fail(ErrorCode::ShapeMismatch, "constant: " + std::to_string(values.size()) + " values for shape " +
                                       to_string(shape));
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value.assign(values.begin(), values.end());
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape) {
  return full(std::move(shape), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value) {
  const auto n = static_cast<std::size_t>(tc::numel(shape));
  return constant(std::move(shape), std::vector<T>(n, value));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value) {
  return constant({}, {value});
}

template <typename T>
Tensor<T> Tensor<T>::parameter(Shape shape, std::vector<T> values) {
  Tensor t = constant(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  t.node_->op = "parameter";
  return t;
}

template <typename T>
std::int64_t Tensor<T>::dim(int axis) const {
  return node_->shape[static_cast<std::size_t>(normalize_axis(axis, rank()))];
}

template <typename T>
T Tensor<T>::item() const {
  if (node_->value.size() != 1) fail(ErrorCode::NotScalar, "item() on shape " + to_string(node_->shape));
  return node_->value[0];
}

template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    fail(ErrorCode::NotScalar, "backward needs a scalar, got " + (loss.defined() ? to_string(loss.shape()) : "undefined"));
  }
  Node<T>* root = loss.node().get();
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order (inputs before users).
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node<T>* n : order) {
    if (n->backward) n->grad.assign(n->value.size(), T(0));
  }
  root->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward) n->backward(*n);
  }
}

// ---------------------------------------------------------------------------
// elementwise

namespace {

template <typename T, typename Fwd, typename GradA, typename GradB>
Tensor<T> binary_op(const char* op, const Tensor<T>& a, const Tensor<T>& b, Fwd fwd, GradA ga, GradB gb) {
  if (!is_suffix(a.shape(), b.shape())) shape_error(op, a.shape(), b.shape());
  const auto& av = a.values();
  const auto& bv = b.values();
  const std::size_t na = av.size();
  const std::size_t nb = bv.size();
  Buffer<T> out(na);
  for (std::size_t i = 0; i < na; ++i) out[i] = fwd(av[i], bv[i % nb]);
  return make_result<T>(a.shape(), std::move(out), op, {a.node(), b.node()}, [na, nb, ga, gb](Node<T>& o) {
    const auto& x = o.inputs[0]->value;
    const auto& y = o.inputs[1]->value;
    if (T* gx = grad_of(o, 0)) {
      for (std::size_t i = 0; i < na; ++i) gx[i] += ga(x[i], y[i % nb], o.grad[i]);
    }
    if (T* gy = grad_of(o, 1)) {
      for (std::size_t i = 0; i < na; ++i) gy[i % nb] += gb(x[i], y[i % nb], o.grad[i]);
    }
  });
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>(
      "add", a, b, [](T x, T y) { return x + y; }, [](T, T, T g) { return g; }, [](T, T, T g) { return g; });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T, T, T g) { return g; }, [](T, T, T g) { return -g; });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y, T g) { return g * y; },
      [](T x, T, T g) { return g * x; });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  Buffer<T> out(a.values().begin(), a.values().end());
  for (auto& v : out) v *= factor;
  return make_result<T>(a.shape(), std::move(out), "scale", {a.node()}, [factor](Node<T>& o) {
    if (T* g = grad_of(o, 0)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += factor * o.grad[i];
    }
  });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T value) {
  Buffer<T> out(a.values().begin(), a.values().end());
  for (auto& v : out) v += value;
  return make_result<T>(a.shape(), std::move(out), "add_scalar", {a.node()}, [](Node<T>& o) {
    if (T* g = grad_of(o, 0)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
  });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
  // tanh approximation; Eigen's array tanh is vectorized
  using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
  constexpr T c = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T k = T(0.044715);
  const auto n = static_cast<Eigen::Index>(a.numel());
  Eigen::Map<const Arr> x(a.values().data(), n);
  Buffer<T> out(static_cast<std::size_t>(n));
  Eigen::Map<Arr>(out.data(), n) = T(0.5) * x * (T(1) + (c * (x + k * x * x * x)).tanh());
  return make_result<T>(a.shape(), std::move(out), "gelu", {a.node()}, [c, k, n](Node<T>& o) {
    T* g = grad_of(o, 0);
    if (!g) return;
    Eigen::Map<const Arr> xi(o.inputs[0]->value.data(), n);
    const Arr t = (c * (xi + k * xi * xi * xi)).tanh();
    Eigen::Map<Arr>(g, n) += (T(0.5) * (T(1) + t) + T(0.5) * xi * (T(1) - t * t) * c * (T(1) + T(3) * k * xi * xi)) *
                             Eigen::Map<const Arr>(o.grad.data(), n);
  });
}

// ---------------------------------------------------------------------------
// linear algebra

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() < 2 || b.rank() < 2) shape_error("matmul", a.shape(), b.shape());
  const std::int64_t M = a.dim(-2);
  const std::int64_t K = a.dim(-1);
  const std::int64_t N = b.dim(-1);
  if (b.dim(-2) != K) shape_error("matmul", a.shape(), b.shape());
  const bool shared = b.rank() == 2;
  if (!shared && (b.rank() != a.rank() || !std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin()))) {
    shape_error("matmul", a.shape(), b.shape());
  }
  const std::int64_t batch = a.numel() / (M * K);
  Shape out_shape = a.shape();
  out_shape.back() = N;
  Buffer<T> out(static_cast<std::size_t>(batch * M * N));

  if (shared) {
    MatMap<T>(out.data(), batch * M, N).noalias() =
        ConstMatMap<T>(a.values().data(), batch * M, K) * ConstMatMap<T>(b.values().data(), K, N);
  } else {
    for (std::int64_t i = 0; i < batch; ++i) {
      MatMap<T>(out.data() + i * M * N, M, N).noalias() =
          ConstMatMap<T>(a.values().data() + i * M * K, M, K) * ConstMatMap<T>(b.values().data() + i * K * N, K, N);
    }
  }

  return make_result<T>(std::move(out_shape), std::move(out), "matmul", {a.node(), b.node()},
                        [shared, batch, M, K, N](Node<T>& o) {
                          const T* av = o.inputs[0]->value.data();
                          const T* bv = o.inputs[1]->value.data();
                          T* ga = grad_of(o, 0);
                          T* gb = grad_of(o, 1);
                          if (shared) {
                            ConstMatMap<T> G(o.grad.data(), batch * M, N);
                            if (ga) MatMap<T>(ga, batch * M, K).noalias() += G * ConstMatMap<T>(bv, K, N).transpose();
                            if (gb) MatMap<T>(gb, K, N).noalias() += ConstMatMap<T>(av, batch * M, K).transpose() * G;
                            return;
                          }
                          for (std::int64_t i = 0; i < batch; ++i) {
                            ConstMatMap<T> G(o.grad.data() + i * M * N, M, N);
                            if (ga) {
                              MatMap<T>(ga + i * M * K, M, K).noalias() +=
                                  G * ConstMatMap<T>(bv + i * K * N, K, N).transpose();
                            }
                            if (gb) {
                              MatMap<T>(gb + i * K * N, K, N).noalias() +=
                                  ConstMatMap<T>(av + i * M * K, M, K).transpose() * G;
                            }
                          }
                        });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  if (a.rank() < 2) fail(ErrorCode::InvalidAxis, "transpose needs rank >= 2");
  const std::int64_t M = a.dim(-2);
  const std::int64_t N = a.dim(-1);
  const std::int64_t batch = a.numel() / std::max<std::int64_t>(1, M * N);
  Shape shape = a.shape();
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  Buffer<T> out(a.values().size());
  for (std::int64_t i = 0; i < batch; ++i) {
    MatMap<T>(out.data() + i * M * N, N, M) = ConstMatMap<T>(a.values().data() + i * M * N, M, N).transpose();
  }
  return make_result<T>(std::move(shape), std::move(out), "transpose", {a.node()}, [batch, M, N](Node<T>& o) {
    T* g = grad_of(o, 0);
    if (!g) return;
    for (std::int64_t i = 0; i < batch; ++i) {
      MatMap<T>(g + i * M * N, M, N) += ConstMatMap<T>(o.grad.data() + i * M * N, N, M).transpose();
    }
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (weight.rank() != 2 || x.rank() < 1 || x.dim(-1) != weight.dim(0)) {
    shape_error("linear", x.shape(), weight.shape());
  }
  const std::int64_t in = weight.dim(0);
  const std::int64_t outw = weight.dim(1);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != outw)) shape_error("linear", weight.shape(), bias.shape());
  const std::int64_t rows = x.numel() / in;
  Shape shape = x.shape();
  shape.back() = outw;
  Buffer<T> out(static_cast<std::size_t>(rows * outw));
  MatMap<T> Y(out.data(), rows, outw);
  Y.noalias() = ConstMatMap<T>(x.values().data(), rows, in) * ConstMatMap<T>(weight.values().data(), in, outw);
  if (bias.defined()) {
    Y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.values().data(), outw);
  }
  std::vector<NodePtr<T>> inputs{x.node(), weight.node()};
  if (bias.defined()) inputs.push_back(bias.node());
  return make_result<T>(std::move(shape), std::move(out), "linear", std::move(inputs), [rows, in, outw](Node<T>& o) {
    ConstMatMap<T> G(o.grad.data(), rows, outw);
    if (T* gx = grad_of(o, 0)) {
      MatMap<T>(gx, rows, in).noalias() += G * ConstMatMap<T>(o.inputs[1]->value.data(), in, outw).transpose();
    }
    if (T* gw = grad_of(o, 1)) {
      MatMap<T>(gw, in, outw).noalias() += ConstMatMap<T>(o.inputs[0]->value.data(), rows, in).transpose() * G;
    }
    if (o.inputs.size() > 2) {
      if (T* gb = grad_of(o, 2)) {
        Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(gb, outw) += G.colwise().sum();
      }
    }
  });
}

// ---------------------------------------------------------------------------
// shape

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  std::int64_t known = 1;
  int infer = -1;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == -1) {
      if (infer >= 0) fail(ErrorCode::ShapeMismatch, "reshape: more than one -1");
      infer = static_cast<int>(i);
    } else {
      known *= shape[i];
    }
  }
  if (infer >= 0 && known > 0) shape[static_cast<std::size_t>(infer)] = a.numel() / known;
  if (numel(shape) != a.numel()) shape_error("reshape", a.shape(), shape);
  Buffer<T> out(a.values().begin(), a.values().end());
  return make_result<T>(std::move(shape), std::move(out), "reshape", {a.node()}, [](Node<T>& o) {
    if (T* g = grad_of(o, 0)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
  });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) fail(ErrorCode::ShapeMismatch, "concat of nothing");
  const int rank = parts[0].rank();
  const int ax = normalize_axis(axis, rank);
  Shape shape = parts[0].shape();
  std::vector<std::int64_t> widths;
  std::int64_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != rank) shape_error("concat", shape, p.shape());
    for (int d = 0; d < rank; ++d) {
      if (d != ax && p.shape()[static_cast<std::size_t>(d)] != shape[static_cast<std::size_t>(d)]) {
        shape_error("concat", shape, p.shape());
      }
    }
    widths.push_back(p.dim(ax));
    total += p.dim(ax);
  }
  shape[static_cast<std::size_t>(ax)] = total;
  const AxisSplit s = split_axis(shape, ax);
  Buffer<T> out(static_cast<std::size_t>(numel(shape)));
  std::int64_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const T* src = parts[p].values().data();
    const std::int64_t chunk = widths[p] * s.inner;
    for (std::int64_t o = 0; o < s.outer; ++o) {
      std::copy_n(src + o * chunk, chunk, out.data() + o * total * s.inner + offset * s.inner);
    }
    offset += widths[p];
  }
  std::vector<NodePtr<T>> inputs;
  for (const auto& p : parts) inputs.push_back(p.node());
  return make_result<T>(std::move(shape), std::move(out), "concat", std::move(inputs), [s, widths, total](Node<T>& o) {
    std::int64_t offset = 0;
    for (std::size_t p = 0; p < widths.size(); ++p) {
      const std::int64_t chunk = widths[p] * s.inner;
      if (T* g = grad_of(o, p)) {
        for (std::int64_t i = 0; i < s.outer; ++i) {
          const T* src = o.grad.data() + i * total * s.inner + offset * s.inner;
          for (std::int64_t c = 0; c < chunk; ++c) g[i * chunk + c] += src[c];
        }
      }
      offset += widths[p];
    }
  });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, int axis, std::int64_t start, std::int64_t length) {
  const int ax = normalize_axis(axis, a.rank());
  const AxisSplit s = split_axis(a.shape(), ax);
  if (start < 0 || length < 0 || start + length > s.n) {
    fail(ErrorCode::ShapeMismatch, "slice [" + std::to_string(start) + ", +" + std::to_string(length) +
                                       ") out of extent " + std::to_string(s.n));
  }
  Shape shape = a.shape();
  shape[static_cast<std::size_t>(ax)] = length;
  Buffer<T> out(static_cast<std::size_t>(s.outer * length * s.inner));
  const T* src = a.values().data();
  for (std::int64_t o = 0; o < s.outer; ++o) {
    std::copy_n(src + (o * s.n + start) * s.inner, length * s.inner, out.data() + o * length * s.inner);
  }
  return make_result<T>(std::move(shape), std::move(out), "slice", {a.node()}, [s, start, length](Node<T>& o) {
    T* g = grad_of(o, 0);
    if (!g) return;
    for (std::int64_t i = 0; i < s.outer; ++i) {
      T* dst = g + (i * s.n + start) * s.inner;
      const T* src = o.grad.data() + i * length * s.inner;
      for (std::int64_t c = 0; c < length * s.inner; ++c) dst[c] += src[c];
    }
  });
}

template <typename T>
Tensor<T> gather(const Tensor<T>& a, int axis, std::span<const int> indices) {
  const int ax = normalize_axis(axis, a.rank());
  const AxisSplit s = split_axis(a.shape(), ax);
  std::vector<int> idx(indices.begin(), indices.end());
  for (int i : idx) {
    if (i < 0 || i >= s.n) fail(ErrorCode::ShapeMismatch, "gather index " + std::to_string(i) + " out of range");
  }
  const auto m = static_cast<std::int64_t>(idx.size());
  Shape shape = a.shape();
  shape[static_cast<std::size_t>(ax)] = m;
  Buffer<T> out(static_cast<std::size_t>(s.outer * m * s.inner));
  const T* src = a.values().data();
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t k = 0; k < m; ++k) {
      std::copy_n(src + (o * s.n + idx[static_cast<std::size_t>(k)]) * s.inner, s.inner,
                  out.data() + (o * m + k) * s.inner);
    }
  }
  return make_result<T>(std::move(shape), std::move(out), "gather", {a.node()}, [s, idx, m](Node<T>& o) {
    T* g = grad_of(o, 0);
    if (!g) return;
    for (std::int64_t i = 0; i < s.outer; ++i) {
      for (std::int64_t k = 0; k < m; ++k) {
        T* dst = g + (i * s.n + idx[static_cast<std::size_t>(k)]) * s.inner;
        const T* src = o.grad.data() + (i * m + k) * s.inner;
        for (std::int64_t c = 0; c < s.inner; ++c) dst[c] += src[c];
      }
    }
  });
}

template <typename T>
Tensor<T> scatter_zeros(const Tensor<T>& a, int axis, std::span<const int> indices, std::int64_t size) {
  const int ax = normalize_axis(axis, a.rank());
  const AxisSplit s = split_axis(a.shape(), ax);
  std::vector<int> idx(indices.begin(), indices.end());
  if (static_cast<std::int64_t>(idx.size()) != s.n) {
    fail(ErrorCode::ShapeMismatch, "scatter_zeros: " + std::to_string(idx.size()) + " indices for extent " +
                                       std::to_string(s.n));
  }
  std::vector<std::uint8_t> used(static_cast<std::size_t>(std::max<std::int64_t>(size, 0)), 0);
  for (int i : idx) {
    if (i < 0 || i >= size || used[static_cast<std::size_t>(i)]++) {
      fail(ErrorCode::ShapeMismatch, "scatter_zeros: bad or repeated index " + std::to_string(i));
    }
  }
  Shape shape = a.shape();
  shape[static_cast<std::size_t>(ax)] = size;
  Buffer<T> out(static_cast<std::size_t>(s.outer * size * s.inner), T(0));
  const T* src = a.values().data();
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t k = 0; k < s.n; ++k) {
      std::copy_n(src + (o * s.n + k) * s.inner, s.inner,
                  out.data() + (o * size + idx[static_cast<std::size_t>(k)]) * s.inner);
    }
  }
  return make_result<T>(std::move(shape), std::move(out), "scatter_zeros", {a.node()}, [s, idx, size](Node<T>& o) {
    T* g = grad_of(o, 0);
    if (!g) return;
    for (std::int64_t i = 0; i < s.outer; ++i) {
      for (std::int64_t k = 0; k < s.n; ++k) {
        const T* src = o.grad.data() + (i * size + idx[static_cast<std::size_t>(k)]) * s.inner;
        T* dst = g + (i * s.n + k) * s.inner;
        for (std::int64_t c = 0; c < s.inner; ++c) dst[c] += src[c];
      }
    }
  });
}

template <typename T>
Tensor<T> replicate(const Tensor<T>& a, int axis, std::int64_t factor) {
  if (factor < 1) fail(ErrorCode::ShapeMismatch, "replicate factor must be positive");
  const int ax = normalize_axis(axis, a.rank());
  const AxisSplit s = split_axis(a.shape(), ax);
  Shape shape = a.shape();
  shape[static_cast<std::size_t>(ax)] *= factor;
  Buffer<T> out(static_cast<std::size_t>(a.numel() * factor));
  const T* src = a.values().data();
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t k = 0; k < s.n; ++k) {
      for (std::int64_t r = 0; r < factor; ++r) {
        std::copy_n(src + (o * s.n + k) * s.inner, s.inner, out.data() + ((o * s.n + k) * factor + r) * s.inner);
      }
    }
  }
  return make_result<T>(std::move(shape), std::move(out), "replicate", {a.node()}, [s, factor](Node<T>& o) {
    T* g = grad_of(o, 0);
    if (!g) return;
    for (std::int64_t i = 0; i < s.outer * s.n; ++i) {
      for (std::int64_t r = 0; r < factor; ++r) {
        const T* src = o.grad.data() + (i * factor + r) * s.inner;
        for (std::int64_t c = 0; c < s.inner; ++c) g[i * s.inner + c] += src[c];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// reductions

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = T(0);
  for (T v : a.values()) total += v;
  return make_result<T>({}, {total}, "sum", {a.node()}, [](Node<T>& o) {
    T* g = grad_of(o, 0);
    if (!g) return;
    const std::size_t n = o.inputs[0]->value.size();
    for (std::size_t i = 0; i < n; ++i) g[i] += o.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  const auto n = static_cast<T>(std::max<std::int64_t>(a.numel(), 1));
  return scale(sum(a), T(1) / n);
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a, int axis) {
  const int ax = normalize_axis(axis, a.rank());
  const AxisSplit s = split_axis(a.shape(), ax);
  Shape shape = a.shape();
  shape.erase(shape.begin() + ax);
  Buffer<T> out(static_cast<std::size_t>(s.outer * s.inner), T(0));
  const T* src = a.values().data();
  const T inv = T(1) / static_cast<T>(std::max<std::int64_t>(s.n, 1));
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t k = 0; k < s.n; ++k) {
      for (std::int64_t c = 0; c < s.inner; ++c) out[static_cast<std::size_t>(o * s.inner + c)] += src[(o * s.n + k) * s.inner + c];
    }
  }
  for (auto& v : out) v *= inv;
  return make_result<T>(std::move(shape), std::move(out), "mean_axis", {a.node()}, [s, inv](Node<T>& o) {
    T* g = grad_of(o, 0);
    if (!g) return;
    for (std::int64_t i = 0; i < s.outer; ++i) {
      for (std::int64_t k = 0; k < s.n; ++k) {
        for (std::int64_t c = 0; c < s.inner; ++c) g[(i * s.n + k) * s.inner + c] += inv * o.grad[static_cast<std::size_t>(i * s.inner + c)];
      }
    }
  });
}

template <typename T>
Tensor<T> window_mean(const Tensor<T>& a, int axis, std::int64_t window, std::span<const std::uint8_t> mask) {
  const int ax = normalize_axis(axis, a.rank());
  const AxisSplit s = split_axis(a.shape(), ax);
  if (window < 1 || s.n % window != 0) {
    fail(ErrorCode::ShapeMismatch, "window " + std::to_string(window) + " does not divide extent " + std::to_string(s.n));
  }
  if (!mask.empty() && static_cast<std::int64_t>(mask.size()) != s.outer * s.n) {
    fail(ErrorCode::ShapeMismatch, "window_mean mask has " + std::to_string(mask.size()) + " entries, expected " +
                                       std::to_string(s.outer * s.n));
  }
  const std::int64_t windows = s.n / window;
  // Per-(outer, window) weight applied to each contributing position.
  Buffer<T> weight(static_cast<std::size_t>(s.outer * s.n), T(0));
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t w = 0; w < windows; ++w) {
      std::int64_t count = 0;
      for (std::int64_t r = 0; r < window; ++r) count += mask.empty() ? 1 : (mask[static_cast<std::size_t>(o * s.n + w * window + r)] != 0);
      for (std::int64_t r = 0; r < window; ++r) {
        const auto pos = static_cast<std::size_t>(o * s.n + w * window + r);
        const bool real = mask.empty() || mask[pos] != 0;
        weight[pos] = (real && count > 0) ? T(1) / static_cast<T>(count) : T(0);
      }
    }
  }
  Shape shape = a.shape();
  shape[static_cast<std::size_t>(ax)] = windows;
  Buffer<T> out(static_cast<std::size_t>(s.outer * windows * s.inner), T(0));
  const T* src = a.values().data();
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t k = 0; k < s.n; ++k) {
      const T w = weight[static_cast<std::size_t>(o * s.n + k)];
      if (w == T(0)) continue;
      T* dst = out.data() + (o * windows + k / window) * s.inner;
      for (std::int64_t c = 0; c < s.inner; ++c) dst[c] += w * src[(o * s.n + k) * s.inner + c];
    }
  }
  return make_result<T>(std::move(shape), std::move(out), "window_mean", {a.node()},
                        [s, window, windows, weight](Node<T>& o) {
                          T* g = grad_of(o, 0);
                          if (!g) return;
                          for (std::int64_t i = 0; i < s.outer; ++i) {
                            for (std::int64_t k = 0; k < s.n; ++k) {
                              const T w = weight[static_cast<std::size_t>(i * s.n + k)];
                              if (w == T(0)) continue;
                              const T* src = o.grad.data() + (i * windows + k / window) * s.inner;
                              for (std::int64_t c = 0; c < s.inner; ++c) g[(i * s.n + k) * s.inner + c] += w * src[c];
                            }
                          }
                        });
}

// ---------------------------------------------------------------------------
// normalization / attention

template <typename T>
Tensor<T> softmax(const Tensor<T>& a, int axis) {
  const int ax = normalize_axis(axis, a.rank());
  const AxisSplit s = split_axis(a.shape(), ax);
  Buffer<T> out(a.values().size());
  const T* src = a.values().data();
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t c = 0; c < s.inner; ++c) {
      const std::int64_t base = o * s.n * s.inner + c;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::int64_t k = 0; k < s.n; ++k) mx = std::max(mx, src[base + k * s.inner]);
      T z = T(0);
      for (std::int64_t k = 0; k < s.n; ++k) {
        const T e = std::exp(src[base + k * s.inner] - mx);
        out[static_cast<std::size_t>(base + k * s.inner)] = e;
        z += e;
      }
      for (std::int64_t k = 0; k < s.n; ++k) out[static_cast<std::size_t>(base + k * s.inner)] /= z;
    }
  }
  return make_result<T>(a.shape(), std::move(out), "softmax", {a.node()}, [s](Node<T>& o) {
      T* g = grad_of(o, 0);
      if (!g) return;
      const auto& y = o.value;
      for (std::int64_t i = 0; i < s.outer; ++i) {
        for (std::int64_t c = 0; c < s.inner; ++c) {
          const std::int64_t base = i * s.n * s.inner + c;
          T dot = T(0);
          for (std::int64_t k = 0; k < s.n; ++k) {
            const auto p = static_cast<std::size_t>(base + k * s.inner);
            dot += y[p] * o.grad[p];
          }
          for (std::int64_t k = 0; k < s.n; ++k) {
            const auto p = static_cast<std::size_t>(base + k * s.inner);
            g[p] += y[p] * (o.grad[p] - dot);
          }
        }
      }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  const std::int64_t D = x.dim(-1);
  if (gamma.numel() != D || beta.numel() != D) shape_error("layer_norm", x.shape(), gamma.shape());
  const std::int64_t rows = x.numel() / D;
  Buffer<T> out(x.values().size());
  Buffer<T> xhat(x.values().size());
  Buffer<T> inv_std(static_cast<std::size_t>(rows));
  const T* src = x.values().data();
  const T* gm = gamma.values().data();
  const T* bt = beta.values().data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* row = src + r * D;
    T mu = T(0);
    for (std::int64_t c = 0; c < D; ++c) mu += row[c];
    mu /= static_cast<T>(D);
    T var = T(0);
    for (std::int64_t c = 0; c < D; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<T>(D);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(r)] = is;
    for (std::int64_t c = 0; c < D; ++c) {
      const auto p = static_cast<std::size_t>(r * D + c);
      xhat[p] = (row[c] - mu) * is;
      out[p] = xhat[p] * gm[c] + bt[c];
    }
  }
  return make_result<T>(x.shape(), std::move(out), "layer_norm", {x.node(), gamma.node(), beta.node()},
                        [rows, D, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& o) {
                          const T* gm = o.inputs[1]->value.data();
                          T* gx = grad_of(o, 0);
                          T* gg = grad_of(o, 1);
                          T* gb = grad_of(o, 2);
                          for (std::int64_t r = 0; r < rows; ++r) {
                            const T* go = o.grad.data() + r * D;
                            const T* xh = xhat.data() + r * D;
                            if (gg || gb) {
                              for (std::int64_t c = 0; c < D; ++c) {
                                if (gg) gg[c] += go[c] * xh[c];
                                if (gb) gb[c] += go[c];
                              }
                            }
                            if (!gx) continue;
                            T m1 = T(0);
                            T m2 = T(0);
                            for (std::int64_t c = 0; c < D; ++c) {
                              const T d = go[c] * gm[c];
                              m1 += d;
                              m2 += d * xh[c];
                            }
                            m1 /= static_cast<T>(D);
                            m2 /= static_cast<T>(D);
                            const T is = inv_std[static_cast<std::size_t>(r)];
                            for (std::int64_t c = 0; c < D; ++c) {
                              gx[r * D + c] += is * (go[c] * gm[c] - m1 - xh[c] * m2);
                            }
                          }
                        });
}

namespace {

// Fills `probs` (Nq x Nk) with masked attention weights for one (batch, head).
template <typename T>
void softmax_row(T* scores, std::int64_t nk, std::int64_t i, bool causal, const std::uint8_t* key_mask) {
  using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
  Eigen::Map<Arr> row(scores, nk);
  constexpr T kHidden = -std::numeric_limits<T>::infinity();
  const bool masked = causal || key_mask != nullptr;
  auto hidden = [&](std::int64_t j) { return (causal && j > i) || (key_mask != nullptr && key_mask[j] == 0); };
  if (masked) {
    for (std::int64_t j = 0; j < nk; ++j) {
      if (hidden(j)) row(j) = kHidden;
    }
  }
  const T mx = row.maxCoeff();
  if (mx == kHidden) {
    row.setZero();
    return;
  }
  row = (row - mx).exp();
  if (masked) {
    for (std::int64_t j = 0; j < nk; ++j) {
      if (hidden(j)) row(j) = T(0);
    }
  }
  row /= row.sum();
}

template <typename T>
void attention_probs(const T* q, const T* k, std::int64_t nq, std::int64_t nk, std::int64_t width, std::int64_t dh,
                     T scale_factor, bool causal, const std::uint8_t* key_mask, RowMat<T>& probs) {
  ConstStridedMap<T> Q(q, nq, dh, Eigen::OuterStride<>(width));
  ConstStridedMap<T> K(k, nk, dh, Eigen::OuterStride<>(width));
  probs.noalias() = Q * K.transpose();
  probs *= scale_factor;
  for (std::int64_t i = 0; i < nq; ++i) softmax_row(probs.data() + i * nk, nk, i, causal, key_mask);
}

// Copies one head's channels of an [n, width] block into a [dh, n] buffer so
// the short-sequence kernels below run their inner loops over contiguous tokens.
template <typename T>
void load_head(const T* src, std::int64_t n, std::int64_t width, std::int64_t dh, T* dst) {
  for (std::int64_t j = 0; j < n; ++j) {
    for (std::int64_t c = 0; c < dh; ++c) dst[c * n + j] = src[j * width + c];
  }
}

// Attention over few tokens (the per-frame joint sets): Eigen's GEMM packing
// dominates at these sizes, so scores and outputs are built from token-length
// axpy and dot loops instead.
constexpr std::int64_t kShortSequence = 64;

template <typename T>
void short_attention_forward(const T* q, const T* k, const T* v, std::int64_t nq, std::int64_t nk, std::int64_t width,
                             std::int64_t dh, T scale_factor, bool causal, const std::uint8_t* key_mask, T* out,
                             T* probs, Buffer<T>& kt, Buffer<T>& vt) {
  load_head(k, nk, width, dh, kt.data());
  load_head(v, nk, width, dh, vt.data());
  for (std::int64_t i = 0; i < nq; ++i) {
    T* row = probs + i * nk;
    std::fill(row, row + nk, T(0));
    for (std::int64_t c = 0; c < dh; ++c) {
      const T qi = q[i * width + c];
      const T* kr = kt.data() + c * nk;
      for (std::int64_t j = 0; j < nk; ++j) row[j] += qi * kr[j];
    }
    for (std::int64_t j = 0; j < nk; ++j) row[j] *= scale_factor;
    softmax_row(row, nk, i, causal, key_mask);
    for (std::int64_t c = 0; c < dh; ++c) {
      const T* vr = vt.data() + c * nk;
      T acc = T(0);
      for (std::int64_t j = 0; j < nk; ++j) acc += row[j] * vr[j];
      out[i * width + c] = acc;
    }
  }
}

// Accumulates dq, dk, dv (any may be null) for one head from saved probabilities.
template <typename T>
void short_attention_backward(const T* q, const T* k, const T* v, const T* dout, const T* probs, std::int64_t nq,
                              std::int64_t nk, std::int64_t width, std::int64_t dh, T scale_factor, T* gq, T* gk,
                              T* gv, Buffer<T>& scratch) {
  // scratch: qt [dh, nq] | kt, vt, gkt, gvt [dh, nk] | dout_t [dh, nq] | dp [nk]
  T* qt = scratch.data();
  T* kt = qt + dh * nq;
  T* vt = kt + dh * nk;
  T* gkt = vt + dh * nk;
  T* gvt = gkt + dh * nk;
  T* dt = gvt + dh * nk;
  T* dp = dt + dh * nq;
  load_head(q, nq, width, dh, qt);
  load_head(k, nk, width, dh, kt);
  load_head(v, nk, width, dh, vt);
  load_head(dout, nq, width, dh, dt);
  std::fill(gkt, gkt + 2 * dh * nk, T(0));
  for (std::int64_t i = 0; i < nq; ++i) {
    const T* pr = probs + i * nk;
    std::fill(dp, dp + nk, T(0));
    for (std::int64_t c = 0; c < dh; ++c) {
      const T d = dt[c * nq + i];
      const T* vr = vt + c * nk;
      T* gvr = gvt + c * nk;
      for (std::int64_t j = 0; j < nk; ++j) {
        dp[j] += d * vr[j];
        gvr[j] += d * pr[j];
      }
    }
    if (!gq && !gk) continue;
    // dS = P * (dP - rowsum(P * dP))
    T dot = T(0);
    for (std::int64_t j = 0; j < nk; ++j) dot += pr[j] * dp[j];
    for (std::int64_t j = 0; j < nk; ++j) dp[j] = pr[j] * (dp[j] - dot) * scale_factor;
    for (std::int64_t c = 0; c < dh; ++c) {
      const T qi = qt[c * nq + i];
      const T* kr = kt + c * nk;
      T* gkr = gkt + c * nk;
      T acc = T(0);
      for (std::int64_t j = 0; j < nk; ++j) {
        acc += dp[j] * kr[j];
        gkr[j] += qi * dp[j];
      }
      if (gq) gq[i * width + c] += acc;
    }
  }
  for (std::int64_t j = 0; j < nk; ++j) {
    for (std::int64_t c = 0; c < dh; ++c) {
      if (gk) gk[j * width + c] += gkt[c * nk + j];
      if (gv) gv[j * width + c] += gvt[c * nk + j];
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, int heads, bool causal,
                               std::span<const std::uint8_t> key_mask) {
  if (q.rank() < 2 || k.rank() != q.rank() || v.shape() != k.shape()) shape_error("attention", q.shape(), k.shape());
  const std::int64_t width = q.dim(-1);
  const std::int64_t nq = q.dim(-2);
  const std::int64_t nk = k.dim(-2);
  if (k.dim(-1) != width || heads < 1 || width % heads != 0) shape_error("attention", q.shape(), k.shape());
  const std::int64_t batch = q.numel() / (nq * width);
  if (k.numel() / (nk * width) != batch) shape_error("attention", q.shape(), k.shape());
  if (causal && nq != nk) shape_error("causal attention", q.shape(), k.shape());
  if (!key_mask.empty() && static_cast<std::int64_t>(key_mask.size()) != batch * nk) {
    fail(ErrorCode::ShapeMismatch, "attention key mask has " + std::to_string(key_mask.size()) + " entries, expected " +
                                       std::to_string(batch * nk));
  }
  const std::int64_t dh = width / heads;
  const T scale_factor = T(1) / std::sqrt(static_cast<T>(dh));
  const bool short_seq = nk <= kShortSequence;

  Buffer<T> out(static_cast<std::size_t>(batch * nq * width), T(0));
  // probabilities [batch, heads, nq, nk]; kept for backward when recording
  const bool recording = grad_enabled() && (q.requires_grad() || k.requires_grad() || v.requires_grad());
  Buffer<T> probs(static_cast<std::size_t>((recording ? batch * heads : 1) * nq * nk));
  Buffer<T> kt(static_cast<std::size_t>(dh * nk)), vt(static_cast<std::size_t>(dh * nk));
  RowMat<T> block(nq, nk);
  for (std::int64_t b = 0; b < batch; ++b) {
    const std::uint8_t* km = key_mask.empty() ? nullptr : key_mask.data() + b * nk;
    for (int h = 0; h < heads; ++h) {
      const std::int64_t qoff = b * nq * width + h * dh;
      const std::int64_t koff = b * nk * width + h * dh;
      T* p = probs.data() + (recording ? (b * heads + h) * nq * nk : 0);
      if (short_seq) {
        short_attention_forward(q.values().data() + qoff, k.values().data() + koff, v.values().data() + koff, nq, nk,
                                width, dh, scale_factor, causal, km, out.data() + qoff, p, kt, vt);
        continue;
      }
      attention_probs(q.values().data() + qoff, k.values().data() + koff, nq, nk, width, dh, scale_factor, causal, km,
                      block);
      StridedMap<T>(out.data() + qoff, nq, dh, Eigen::OuterStride<>(width)).noalias() =
          block * ConstStridedMap<T>(v.values().data() + koff, nk, dh, Eigen::OuterStride<>(width));
      MatMap<T>(p, nq, nk) = block;
    }
  }
  if (!recording) probs.clear();

  return make_result<T>(
      q.shape(), std::move(out), "attention", {q.node(), k.node(), v.node()},
      [batch, nq, nk, width, dh, heads, scale_factor, short_seq, probs = std::move(probs)](Node<T>& o) {
        T* gq = grad_of(o, 0);
        T* gk = grad_of(o, 1);
        T* gv = grad_of(o, 2);
        const T* qv = o.inputs[0]->value.data();
        const T* kv = o.inputs[1]->value.data();
        const T* vv = o.inputs[2]->value.data();
        Buffer<T> scratch(short_seq ? static_cast<std::size_t>(dh * (2 * nq + 4 * nk) + nk) : 0);
        RowMat<T> dP(nq, nk);
        for (std::int64_t b = 0; b < batch; ++b) {
          for (int h = 0; h < heads; ++h) {
            const std::int64_t qoff = b * nq * width + h * dh;
            const std::int64_t koff = b * nk * width + h * dh;
            const T* p = probs.data() + (b * heads + h) * nq * nk;
            if (short_seq) {
              short_attention_backward(qv + qoff, kv + koff, vv + koff, o.grad.data() + qoff, p, nq, nk, width, dh,
                                       scale_factor, gq ? gq + qoff : nullptr, gk ? gk + koff : nullptr,
                                       gv ? gv + koff : nullptr, scratch);
              continue;
            }
            ConstMatMap<T> P(p, nq, nk);
            ConstStridedMap<T> dO(o.grad.data() + qoff, nq, dh, Eigen::OuterStride<>(width));
            ConstStridedMap<T> V(vv + koff, nk, dh, Eigen::OuterStride<>(width));
            if (gv) StridedMap<T>(gv + koff, nk, dh, Eigen::OuterStride<>(width)).noalias() += P.transpose() * dO;
            if (!gq && !gk) continue;
            dP.noalias() = dO * V.transpose();
            // dS = P * (dP - rowsum(P * dP))
            for (std::int64_t i = 0; i < nq; ++i) {
              const T dot = P.row(i).dot(dP.row(i));
              dP.row(i) = (P.row(i).array() * (dP.row(i).array() - dot)).matrix() * scale_factor;
            }
            if (gq) {
              StridedMap<T>(gq + qoff, nq, dh, Eigen::OuterStride<>(width)).noalias() +=
                  dP * ConstStridedMap<T>(kv + koff, nk, dh, Eigen::OuterStride<>(width));
            }
            if (gk) {
              StridedMap<T>(gk + koff, nk, dh, Eigen::OuterStride<>(width)).noalias() +=
                  dP.transpose() * ConstStridedMap<T>(qv + qoff, nq, dh, Eigen::OuterStride<>(width));
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// geometry / losses

template <typename T>
Tensor<T> cosine_similarity(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape() || a.rank() < 1) shape_error("cosine_similarity", a.shape(), b.shape());
  const std::int64_t D = a.dim(-1);
  const std::int64_t rows = a.numel() / D;
  constexpr T eps = T(1e-12);
  Shape shape(a.shape().begin(), a.shape().end() - 1);
  Buffer<T> out(static_cast<std::size_t>(rows));
  const T* av = a.values().data();
  const T* bv = b.values().data();
  for (std::int64_t r = 0; r < rows; ++r) {
    T ab = T(0), aa = T(0), bb = T(0);
    for (std::int64_t c = 0; c < D; ++c) {
      ab += av[r * D + c] * bv[r * D + c];
      aa += av[r * D + c] * av[r * D + c];
      bb += bv[r * D + c] * bv[r * D + c];
    }
    out[static_cast<std::size_t>(r)] = ab / (std::max(std::sqrt(aa), eps) * std::max(std::sqrt(bb), eps));
  }
  return make_result<T>(std::move(shape), std::move(out), "cosine_similarity", {a.node(), b.node()}, [rows, D, eps](Node<T>& o) {
    const T* av = o.inputs[0]->value.data();
    const T* bv = o.inputs[1]->value.data();
    T* ga = grad_of(o, 0);
    T* gb = grad_of(o, 1);
    for (std::int64_t r = 0; r < rows; ++r) {
      T ab = T(0), aa = T(0), bb = T(0);
      for (std::int64_t c = 0; c < D; ++c) {
        ab += av[r * D + c] * bv[r * D + c];
        aa += av[r * D + c] * av[r * D + c];
        bb += bv[r * D + c] * bv[r * D + c];
      }
      const T na = std::max(std::sqrt(aa), eps);
      const T nb = std::max(std::sqrt(bb), eps);
      const T cosv = ab / (na * nb);
      const T g = o.grad[static_cast<std::size_t>(r)];
      for (std::int64_t c = 0; c < D; ++c) {
        if (ga) ga[r * D + c] += g * (bv[r * D + c] / (na * nb) - cosv * av[r * D + c] / (na * na));
        if (gb) gb[r * D + c] += g * (av[r * D + c] / (na * nb) - cosv * bv[r * D + c] / (nb * nb));
      }
    }
  });
}

template <typename T>
Tensor<T> l2_norm(const Tensor<T>& a) {
  if (a.rank() < 1) fail(ErrorCode::InvalidAxis, "l2_norm of a scalar");
  const std::int64_t D = a.dim(-1);
  const std::int64_t rows = a.numel() / D;
  Shape shape(a.shape().begin(), a.shape().end() - 1);
  Buffer<T> out(static_cast<std::size_t>(rows));
  const T* av = a.values().data();
  for (std::int64_t r = 0; r < rows; ++r) {
    T ss = T(0);
    for (std::int64_t c = 0; c < D; ++c) ss += av[r * D + c] * av[r * D + c];
    out[static_cast<std::size_t>(r)] = std::sqrt(ss);
  }
  return make_result<T>(std::move(shape), std::move(out), "l2_norm", {a.node()}, [rows, D](Node<T>& o) {
      T* g = grad_of(o, 0);
      if (!g) return;
      const T* av = o.inputs[0]->value.data();
      for (std::int64_t r = 0; r < rows; ++r) {
        const T n = o.value[static_cast<std::size_t>(r)];
        if (n == T(0)) continue;  // subgradient 0 at the origin
        for (std::int64_t c = 0; c < D; ++c) g[r * D + c] += o.grad[static_cast<std::size_t>(r)] * av[r * D + c] / n;
      }
  });
}

template <typename T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b, std::span<const T> weights) {
  if (a.shape() != b.shape()) shape_error("mse", a.shape(), b.shape());
  if (!weights.empty() && static_cast<std::int64_t>(weights.size()) != a.numel()) {
    fail(ErrorCode::ShapeMismatch, "mse weights have " + std::to_string(weights.size()) + " entries for shape " +
                                       to_string(a.shape()));
  }
  const std::size_t n = a.values().size();
  Buffer<T> w(weights.begin(), weights.end());
  T total_w = weights.empty() ? static_cast<T>(n) : T(0);
  for (T x : w) total_w += x;
  const T inv = total_w > T(0) ? T(1) / total_w : T(0);
  T acc = T(0);
  const T* av = a.values().data();
  const T* bv = b.values().data();
  for (std::size_t i = 0; i < n; ++i) {
    const T d = av[i] - bv[i];
    acc += (w.empty() ? T(1) : w[i]) * d * d;
  }
  return make_result<T>({}, {acc * inv}, "mse", {a.node(), b.node()}, [n, inv, w = std::move(w)](Node<T>& o) {
    const T* av = o.inputs[0]->value.data();
    const T* bv = o.inputs[1]->value.data();
    T* ga = grad_of(o, 0);
    T* gb = grad_of(o, 1);
    const T g = o.grad[0] * T(2) * inv;
    for (std::size_t i = 0; i < n; ++i) {
      const T d = (w.empty() ? T(1) : w[i]) * g * (av[i] - bv[i]);
      if (ga) ga[i] += d;
      if (gb) gb[i] -= d;
    }
  });
}

namespace {

template <typename T>
struct Vec3 {
  T x, y, z;
  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(T s) const { return {x * s, y * s, z * s}; }
  T dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const { return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x}; }
  T norm() const { return std::sqrt(dot(*this)); }
};

// Norms below this are clamped so degenerate decoder outputs stay finite.
template <typename T>
constexpr T kRotEps = T(1e-8);

}  // namespace

template <typename T>
Tensor<T> rot6d_to_matrix(const Tensor<T>& a) {
  if (a.rank() < 1 || a.dim(-1) != 6) fail(ErrorCode::ShapeMismatch, "rot6d_to_matrix expects [..., 6], got " + to_string(a.shape()));
  const std::int64_t count = a.numel() / 6;
  Shape shape(a.shape().begin(), a.shape().end() - 1);
  shape.push_back(3);
  shape.push_back(3);
  Buffer<T> out(static_cast<std::size_t>(count * 9));
  const T* av = a.values().data();
  for (std::int64_t r = 0; r < count; ++r) {
    const T* s = av + r * 6;
    const Vec3<T> a1{s[0], s[1], s[2]};
    const Vec3<T> a2{s[3], s[4], s[5]};
    const Vec3<T> b1 = a1 * (T(1) / std::max(a1.norm(), kRotEps<T>));
    const Vec3<T> u = a2 - b1 * b1.dot(a2);
    const Vec3<T> b2 = u * (T(1) / std::max(u.norm(), kRotEps<T>));
    const Vec3<T> b3 = b1.cross(b2);
    T* m = out.data() + r * 9;
    // row-major 3x3 with columns b1, b2, b3
    m[0] = b1.x; m[1] = b2.x; m[2] = b3.x;
    m[3] = b1.y; m[4] = b2.y; m[5] = b3.y;
    m[6] = b1.z; m[7] = b2.z; m[8] = b3.z;
  }
  return make_result<T>(std::move(shape), std::move(out), "rot6d_to_matrix", {a.node()}, [count](Node<T>& o) {
    T* g = grad_of(o, 0);
    if (!g) return;
    const T* av = o.inputs[0]->value.data();
    for (std::int64_t r = 0; r < count; ++r) {
      const T* s = av + r * 6;
      const Vec3<T> a1{s[0], s[1], s[2]};
      const Vec3<T> a2{s[3], s[4], s[5]};
      const T n1 = std::max(a1.norm(), kRotEps<T>);
      const Vec3<T> b1 = a1 * (T(1) / n1);
      const Vec3<T> u = a2 - b1 * b1.dot(a2);
      const T n2 = std::max(u.norm(), kRotEps<T>);
      const Vec3<T> b2 = u * (T(1) / n2);
      const T* gm = o.grad.data() + r * 9;
      Vec3<T> gb1{gm[0], gm[3], gm[6]};
      Vec3<T> gb2{gm[1], gm[4], gm[7]};
      const Vec3<T> gb3{gm[2], gm[5], gm[8]};
      // b3 = b1 x b2
      gb1 = gb1 + b2.cross(gb3);
      gb2 = gb2 + gb3.cross(b1);
      // b2 = u / |u|
      const Vec3<T> gu = (gb2 - b2 * b2.dot(gb2)) * (T(1) / n2);
      // u = a2 - (b1 . a2) b1
      const Vec3<T> ga2 = gu - b1 * b1.dot(gu);
      gb1 = gb1 - gu * b1.dot(a2) - a2 * b1.dot(gu);
      // b1 = a1 / |a1|
      const Vec3<T> ga1 = (gb1 - b1 * b1.dot(gb1)) * (T(1) / n1);
      T* d = g + r * 6;
      d[0] += ga1.x; d[1] += ga1.y; d[2] += ga1.z;
      d[3] += ga2.x; d[4] += ga2.y; d[5] += ga2.z;
    }
  });
}

// ---------------------------------------------------------------------------
// explicit instantiations

#define OMGPT_INSTANTIATE(T)                                                                               \
  template class Tensor<T>;                                                                                \
  template void backward<T>(const Tensor<T>&);                                                             \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                                           \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                                           \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                                           \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                                        \
  template Tensor<T> add_scalar<T>(const Tensor<T>&, T);                                                   \
  template Tensor<T> gelu<T>(const Tensor<T>&);                                                            \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> transpose<T>(const Tensor<T>&);                                                       \
  template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                                                  \
  template Tensor<T> concat<T>(const std::vector<Tensor<T>>&, int);                                        \
  template Tensor<T> slice<T>(const Tensor<T>&, int, std::int64_t, std::int64_t);                          \
  template Tensor<T> gather<T>(const Tensor<T>&, int, std::span<const int>);                               \
  template Tensor<T> scatter_zeros<T>(const Tensor<T>&, int, std::span<const int>, std::int64_t);          \
  template Tensor<T> replicate<T>(const Tensor<T>&, int, std::int64_t);                                    \
  template Tensor<T> sum<T>(const Tensor<T>&);                                                             \
  template Tensor<T> mean<T>(const Tensor<T>&);                                                            \
  template Tensor<T> mean<T>(const Tensor<T>&, int);                                                       \
  template Tensor<T> window_mean<T>(const Tensor<T>&, int, std::int64_t, std::span<const std::uint8_t>);   \
  template Tensor<T> softmax<T>(const Tensor<T>&, int);                                                    \
  template Tensor<T> layer_norm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);               \
  template Tensor<T> multi_head_attention<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int,    \
                                             bool, std::span<const std::uint8_t>);                         \
  template Tensor<T> cosine_similarity<T>(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> l2_norm<T>(const Tensor<T>&);                                                         \
  template Tensor<T> mse<T>(const Tensor<T>&, const Tensor<T>&, std::span<const T>);                       \
  template Tensor<T> rot6d_to_matrix<T>(const Tensor<T>&);

OMGPT_INSTANTIATE(float)
OMGPT_INSTANTIATE(double)

#undef OMGPT_INSTANTIATE

}  // namespace omgpt::tc
