#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "lungbench/tensor.h"

namespace lungbench {

enum class GradMode { kEnabled, kDisabled };

// Define-by-run reverse-mode differentiation tape.
//
// Every operation is a member of Graph. When grad mode is enabled and at
// least one input requires grad, the operation appends a node to the tape
// and its output requires grad. Backward() walks the tape in strict reverse
// append order. A Graph and the tensors it produces belong to one thread.
//
// All reductions accumulate sequentially in row-major order so that results
// are bitwise reproducible.
class Graph {
 public:
  explicit Graph(GradMode mode = GradMode::kEnabled) : mode_(mode) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  // Elementwise a + b. b must have a's shape, or a's shape with the last axis
  // replaced by 1 (broadcast along the trailing axis).
  Tensor Add(const Tensor& a, const Tensor& b);
  // a[..., n] + row[n], the row repeated over every leading index.
  Tensor AddRow(const Tensor& a, const Tensor& row);
  Tensor Mul(const Tensor& a, const Tensor& b);
  Tensor MulScalar(const Tensor& a, double s);
  Tensor MatMul(const Tensor& a, const Tensor& b);
  Tensor Transpose(const Tensor& a);

  // Cross-correlation (no kernel flip). input [Cin x H x W], kernels
  // [Cout x Cin x Kh x Kw], bias [Cout]. Each output element is accumulated
  // as acc = 0; for ci, ky, kx: acc += in * w; out = acc + bias. Taps that
  // fall on padding are skipped.
  Tensor Conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                std::size_t stride, std::size_t padding);
  // Backward routes the gradient to the first (row-major) maximal element.
  Tensor MaxPool2d(const Tensor& input, std::size_t window, std::size_t stride);

  Tensor Relu(const Tensor& x);
  // Softmax over the last axis, max-subtracted.
  Tensor Softmax(const Tensor& x);
  // Natural log with inputs floored at kLogFloor so outputs stay finite.
  Tensor Log(const Tensor& x);
  static constexpr double kLogFloor = 1e-300;

  // Per-row layer normalization of x [T x D] with affine gamma/beta [D].
  Tensor LayerNorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   double eps);

  // Reductions to a rank-0 tensor.
  Tensor Sum(const Tensor& x);
  Tensor Mean(const Tensor& x);
  // [T x D] -> [1 x D], the mean over rows.
  Tensor MeanRows(const Tensor& x);

  Tensor Reshape(const Tensor& x, Shape shape);
  // x [N x ...] -> x[index] with the leading axis dropped.
  Tensor Select(const Tensor& x, std::size_t index);
  // Stacks tensors of shape S into [N x S].
  Tensor Stack(std::span<const Tensor> parts);
  // Concatenates [R_i x n] matrices along rows.
  Tensor ConcatRows(std::span<const Tensor> parts);
  // Concatenates [m x C_i] matrices along columns.
  Tensor ConcatCols(std::span<const Tensor> parts);
  // Columns [begin, begin + count) of an [m x n] matrix.
  Tensor SliceCols(const Tensor& x, std::size_t begin, std::size_t count);

  // out[i] = x[index[i]] (flat indices), reshaped to shape. Backward
  // scatter-adds.
  Tensor Gather(const Tensor& x, std::vector<std::size_t> index, Shape shape);

  // Mean over the batch of -log softmax(logits)[label], via log-sum-exp.
  // logits [N x C]; returns a rank-0 tensor.
  Tensor CrossEntropy(const Tensor& logits, std::span<const int> labels);

  // Populates grad of every requires-grad tensor reachable on the tape.
  // Gradients of tensors referenced by the tape are reset first, so after
  // the call each grad slot holds exactly d loss / d tensor. loss must have
  // shape [] or [1].
  void Backward(const Tensor& loss);

  GradMode mode() const { return mode_; }
  std::size_t num_nodes() const { return nodes_.size(); }
  std::string_view op_name(std::size_t node) const { return nodes_[node].op; }

 private:
  struct Node {
    std::string_view op;
    std::vector<Tensor> inputs;
    Tensor output;
    std::function<void()> backward;
  };

  bool ShouldRecord(std::initializer_list<const Tensor*> inputs) const;
  Tensor MakeOutput(Shape shape, std::vector<double> values, bool record) const;
  void Record(std::string_view op, std::vector<Tensor> inputs, Tensor output,
              std::function<void()> backward);

  GradMode mode_;
  std::vector<Node> nodes_;
};

}  // namespace lungbench
