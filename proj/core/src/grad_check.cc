#include "lungbench/grad_check.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "lungbench/error.h"

namespace lungbench {

double GradCheck(const ScalarFn& f, Tensor x, double eps) {
  std::vector<Tensor> wrt{x};
  return GradCheck([&](Graph& g) { return f(g, x); }, wrt, eps);
}

double GradCheck(const std::function<Tensor(Graph&)>& f,
                 std::span<Tensor> wrt, double eps) {
  if (!(eps > 0.0)) throw ArgumentError("grad_check: eps must be positive");
  std::vector<bool> restore_flag;
  restore_flag.reserve(wrt.size());
  for (Tensor& t : wrt) {
    restore_flag.push_back(t.requires_grad());
    if (!t.requires_grad()) t.set_requires_grad(true);
    t.ZeroGrad();
  }

  std::vector<std::vector<double>> analytic;
  {
    Graph graph;
    Tensor loss = f(graph);
    graph.Backward(loss);
    for (const Tensor& t : wrt) {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    }
  }

  auto evaluate = [&]() {
    Graph graph(GradMode::kDisabled);
    return f(graph).item();
  };

  double worst = 0.0;
  for (std::size_t ti = 0; ti < wrt.size(); ++ti) {
    auto values = wrt[ti].mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double plus = evaluate();
      values[i] = saved - eps;
      const double minus = evaluate();
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic[ti][i];
      const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }

  for (std::size_t ti = 0; ti < wrt.size(); ++ti) {
    if (!restore_flag[ti]) wrt[ti].set_requires_grad(false);
  }
  return worst;
}

}  // namespace lungbench
