#pragma once

// Minimal reverse-mode differentiable tensor engine.
//
// A Tensor is a shared handle to a graph node. Operations record their inputs
// and a backward closure when grad mode is on and any input requires a
// gradient; backward() walks the recorded graph in reverse topological order.
// Storage is dense row-major. Only float and double are instantiated.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace omgpt::tc {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// 64-byte aligned storage. Vectorized kernels split a buffer into an
/// unaligned head and an aligned body; a fixed base alignment keeps that split,
/// and therefore every rounding, identical from one allocation to the next.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t alignment{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <typename T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

template <typename T>
struct Node {
  Shape shape;
  Buffer<T> value;
  Buffer<T> grad;  // empty means "all zero, not yet touched"
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  Buffer<T>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad;
  }
};

/// Whether newly created op results record a backward closure.
bool grad_enabled();

/// Disables graph recording for its lifetime (inference, evaluation).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor constant(Shape shape, std::vector<T> values);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, T value);
  static Tensor scalar(T value);
  /// Leaf that accumulates gradients.
  static Tensor parameter(Shape shape, std::vector<T> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  std::int64_t dim(int axis) const;
  std::int64_t numel() const { return static_cast<std::int64_t>(node_->value.size()); }

  std::span<const T> values() const { return node_->value; }
  std::span<T> mutable_values() { return node_->value; }
  /// Empty span until a backward pass reaches this tensor.
  std::span<const T> grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad() { node_->grad.clear(); }
  T item() const;

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Reverse-mode accumulation from a scalar. Leaf gradients accumulate across
/// calls; intermediate gradients are reset at the start of each call.
/// Throws NotScalar.
template <typename T>
void backward(const Tensor<T>& loss);

// --- elementwise -----------------------------------------------------------
// Binary ops broadcast `b` over `a` when b's shape is a trailing suffix of a's.

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T value);
template <typename T> Tensor<T> gelu(const Tensor<T>& a);

// --- linear algebra --------------------------------------------------------

/// a: [..., M, K]; b: [K, N] (shared across the batch) or [..., K, N].
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// Swaps the two trailing axes.
template <typename T> Tensor<T> transpose(const Tensor<T>& a);
/// x: [..., in], weight: [in, out], bias: [out] or undefined.
template <typename T> Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

// --- shape -----------------------------------------------------------------

/// One dimension may be -1 and is inferred.
template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);
template <typename T> Tensor<T> slice(const Tensor<T>& a, int axis, std::int64_t start, std::int64_t length);
template <typename T> Tensor<T> gather(const Tensor<T>& a, int axis, std::span<const int> indices);
/// Writes slices of `a` along `axis` to positions `indices` of a zero tensor of extent `size`.
template <typename T>
Tensor<T> scatter_zeros(const Tensor<T>& a, int axis, std::span<const int> indices, std::int64_t size);
/// Repeats each slice along `axis` `factor` times consecutively.
template <typename T> Tensor<T> replicate(const Tensor<T>& a, int axis, std::int64_t factor);

// --- reductions ------------------------------------------------------------

template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);
/// Mean over one axis; the axis is removed.
template <typename T> Tensor<T> mean(const Tensor<T>& a, int axis);
/// Mean over non-overlapping windows along `axis`, skipping entries whose
/// `mask` (indexed by [outer, position]) is zero. Empty windows yield zero.
template <typename T>
Tensor<T> window_mean(const Tensor<T>& a, int axis, std::int64_t window, std::span<const std::uint8_t> mask);

// --- normalization / attention --------------------------------------------

template <typename T> Tensor<T> softmax(const Tensor<T>& a, int axis);
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps = T(1e-5));

/// Scaled dot-product attention over [batch, tokens, width] inputs with
/// `heads` equal channel groups. `key_mask` (size batch*keys, 1 = visible) is
/// optional; `causal` hides keys after the query position.
template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, int heads,
                               bool causal, std::span<const std::uint8_t> key_mask = {});

// --- geometry / losses -----------------------------------------------------

/// Cosine similarity along the last axis; the axis is removed.
template <typename T> Tensor<T> cosine_similarity(const Tensor<T>& a, const Tensor<T>& b);
/// Euclidean norm along the last axis; the axis is removed.
template <typename T> Tensor<T> l2_norm(const Tensor<T>& a);
/// Weighted mean squared error; `weights` (same size as a) are typically 0/1
/// masks. Returns zero when all weights vanish.
template <typename T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b, std::span<const T> weights = {});
/// Gram-Schmidt map [..., 6] -> [..., 3, 3] with columns (b1, b2, b1 x b2).
template <typename T> Tensor<T> rot6d_to_matrix(const Tensor<T>& a);

}  // namespace omgpt::tc
