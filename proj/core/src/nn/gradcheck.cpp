#include "holofuse/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace holofuse::nn {
namespace {

double evaluate(ParamStore& store, const LossBuilder& loss) {
  Graph g;
  return loss(g, store).value()[0];
}

}  // namespace

GradCheckResult check_gradients(ParamStore& store, const LossBuilder& loss, const GradCheckOptions& options) {
  store.zero_grad();
  {
    Graph g;
    Var l = loss(g, store);
    g.backward(l);
  }
  std::vector<std::string> names = options.names.empty() ? store.names() : options.names;

  GradCheckResult result;
  for (const auto& name : names) {
    Param& p = store.at(name);
    const std::size_t n = p.value.size();
    std::size_t stride = 1;
    if (options.max_entries_per_param > 0 && n > options.max_entries_per_param) {
      stride = (n + options.max_entries_per_param - 1) / options.max_entries_per_param;
    }
    for (std::size_t i = 0; i < n; i += stride) {
      const double original = p.value[i];
      p.value[i] = original + options.step;
      const double plus = evaluate(store, loss);
      p.value[i] = original - options.step;
      const double minus = evaluate(store, loss);
      p.value[i] = original;

      const double numeric = (plus - minus) / (2.0 * options.step);
      const double analytic = p.grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
      const double rel = std::abs(analytic - numeric) / denom;
      ++result.entries_checked;
      if (rel > result.max_rel_error || result.worst_param.empty()) {
        result.max_rel_error = std::max(rel, result.max_rel_error);
        result.worst_param = name;
        result.worst_index = i;
        result.worst_analytic = analytic;
        result.worst_numeric = numeric;
      }
    }
  }
  store.zero_grad();
  return result;
}

}  // namespace holofuse::nn
