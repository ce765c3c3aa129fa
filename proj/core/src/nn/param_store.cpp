#include "holofuse/nn/param_store.hpp"

#include <cmath>

#include "holofuse/errors.hpp"

namespace holofuse::nn {

Param& ParamStore::add(const std::string& name, Tensor init) {
  if (!init.all_finite()) throw NumericError("parameter '" + name + "' initialized with non-finite values");
  Param p;
  p.grad = Tensor(init.shape());
  p.m = Tensor(init.shape());
  p.v = Tensor(init.shape());
  p.value = std::move(init);
  auto [it, inserted] = params_.insert_or_assign(name, std::move(p));
  return it->second;
}

Param& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [name, p] : params_) {
    p.grad.fill(0.0);
    p.touched = false;
  }
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += p.value.size();
  return n;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, p] : params_) out.push_back(name);
  return out;
}

void adam_step(ParamStore& store, double learning_rate, const AdamOptions& options) {
  for (const auto& [name, p] : store) {
    if (p.touched && !p.grad.all_finite()) {
      throw NumericError("non-finite gradient in parameter '" + name + "'");
    }
  }
  for (auto& [name, p] : store) {
    if (!p.touched || p.frozen) continue;
    ++p.step;
    const double lr = learning_rate * p.lr_scale;
    const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(p.step));
    const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(p.step));
    auto value = p.value.data();
    auto grad = p.grad.data();
    auto m = p.m.data();
    auto v = p.v.data();
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = options.beta1 * m[i] + (1.0 - options.beta1) * grad[i];
      v[i] = options.beta2 * v[i] + (1.0 - options.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      value[i] -= lr * m_hat / (std::sqrt(v_hat) + options.epsilon);
    }
  }
}

}  // namespace holofuse::nn
