#pragma once

#include <functional>
#include <span>

#include "lungbench/graph.h"
#include "lungbench/tensor.h"

namespace lungbench {

// A deterministic tensor-to-scalar function built on a graph.
using ScalarFn = std::function<Tensor(Graph&, const Tensor&)>;

// Compares backward() gradients of f at x with central differences
// (f(x + eps e_i) - f(x - eps e_i)) / (2 eps) over every coordinate of x.
// Returns the max over coordinates of |analytic - numeric| divided by
// max(1, |analytic|, |numeric|). x is perturbed in place and restored.
double GradCheck(const ScalarFn& f, Tensor x, double eps);

// Same comparison for a closure over several tensors (for example the
// parameters of a model); checks every coordinate of every tensor in wrt.
double GradCheck(const std::function<Tensor(Graph&)>& f,
                 std::span<Tensor> wrt, double eps);

}  // namespace lungbench
