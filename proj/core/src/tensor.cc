#include "lungbench/tensor.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lungbench/error.h"

namespace lungbench {

std::size_t ShapeNumel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::Zeros(Shape shape, bool requires_grad) {
  return Full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::Full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = ShapeNumel(shape);
  return FromValues(std::move(shape), std::vector<double>(n, value),
                    requires_grad);
}

Tensor Tensor::FromValues(Shape shape, std::vector<double> values,
                          bool requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) {
      throw ShapeError("tensor dimensions must be positive, got " +
                       ShapeToString(shape));
    }
  }
  if (ShapeNumel(shape) != values.size()) {
    throw ShapeError("shape " + ShapeToString(shape) + " needs " +
                     std::to_string(ShapeNumel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  auto storage = std::make_shared<Storage>();
  storage->shape = std::move(shape);
  storage->values = std::move(values);
  storage->requires_grad = requires_grad;
  if (requires_grad) storage->grad.assign(storage->values.size(), 0.0);
  return Tensor(std::move(storage));
}

Tensor Tensor::Scalar(double value, bool requires_grad) {
  return FromValues({}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return storage_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     ShapeToString(shape()));
  }
  return storage_->shape[axis];
}

std::size_t Tensor::size() const { return storage_->values.size(); }

std::span<const double> Tensor::values() const { return storage_->values; }
std::span<double> Tensor::mutable_values() const { return storage_->values; }

bool Tensor::requires_grad() const { return storage_->requires_grad; }

void Tensor::set_requires_grad(bool requires_grad) {
  storage_->requires_grad = requires_grad;
  if (requires_grad) {
    storage_->grad.assign(storage_->values.size(), 0.0);
  } else {
    storage_->grad.clear();
  }
}

std::span<const double> Tensor::grad() const { return storage_->grad; }
std::span<double> Tensor::mutable_grad() const { return storage_->grad; }

void Tensor::ZeroGrad() {
  std::fill(storage_->grad.begin(), storage_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("item() needs a single-element tensor, got " +
                     ShapeToString(shape()));
  }
  return storage_->values[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  if (index.size() != rank()) {
    throw ShapeError("index rank " + std::to_string(index.size()) +
                     " does not match " + ShapeToString(shape()));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= storage_->shape[axis]) {
      throw ShapeError("index out of range for " + ShapeToString(shape()));
    }
    flat = flat * storage_->shape[axis] + i;
    ++axis;
  }
  return storage_->values[flat];
}

Tensor Tensor::Clone() const {
  auto storage = std::make_shared<Storage>(*storage_);
  return Tensor(std::move(storage));
}

}  // namespace lungbench
