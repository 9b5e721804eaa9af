#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace lungbench {

using Shape = std::vector<std::size_t>;

std::size_t ShapeNumel(const Shape& shape);
std::string ShapeToString(const Shape& shape);

// Dense row-major array of doubles with an optional gradient slot.
//
// Tensor is a handle: copies share the same storage, so a parameter held by
// a model and the same parameter referenced by a graph node are one object.
// Use Clone() for an independent deep copy. Values are treated as immutable
// by every graph operation; only optimizers and initializers write through
// mutable_values().
class Tensor {
 public:
  // An undefined tensor (no storage). defined() returns false.
  Tensor() = default;

  static Tensor Zeros(Shape shape, bool requires_grad = false);
  static Tensor Full(Shape shape, double value, bool requires_grad = false);
  static Tensor FromValues(Shape shape, std::vector<double> values,
                           bool requires_grad = false);
  // Rank-0 tensor holding one value.
  static Tensor Scalar(double value, bool requires_grad = false);

  bool defined() const { return storage_ != nullptr; }

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> values() const;
  std::span<double> mutable_values() const;

  bool requires_grad() const;
  void set_requires_grad(bool requires_grad);

  // Empty span when the tensor does not require grad. Otherwise the slot is
  // always materialized (zeros until a backward pass writes it).
  std::span<const double> grad() const;
  std::span<double> mutable_grad() const;
  void ZeroGrad();

  // The single value of a size-1 tensor.
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  Tensor Clone() const;
  bool SameStorage(const Tensor& other) const {
    return storage_ == other.storage_;
  }

 private:
  struct Storage {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
  };

  explicit Tensor(std::shared_ptr<Storage> storage)
      : storage_(std::move(storage)) {}

  std::shared_ptr<Storage> storage_;
};

}  // namespace lungbench
