#include "dmt/adam.hpp"

#include <cmath>
#include <string>

#include "dmt/errors.hpp"

namespace dmt {

void AdamConfig::validate() const {
  if (!(lr > 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) ||
      !(eps > 0.0)) {
    throw ValidationError("Adam needs lr > 0, betas in [0,1), eps > 0");
  }
}

nlohmann::json AdamConfig::to_json() const {
  return {{"lr", lr}, {"beta1", beta1}, {"beta2", beta2}, {"eps", eps}};
}

AdamConfig AdamConfig::from_json(const nlohmann::json& j) {
  AdamConfig c;
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.validate();
  return c;
}

Adam::Adam(std::vector<Tensor*> params, AdamConfig config)
    : params_(std::move(params)), cfg_(config) {
  cfg_.validate();
  for (Tensor* p : params_) {
    if (!p) throw ContractError("Adam given a null parameter");
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

void Adam::set_lr(double lr) {
  if (!(lr > 0.0)) throw ValidationError("learning rate must be > 0");
  cfg_.lr = lr;
}

void Adam::step() {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    if (!params_[k]->has_grad()) {
      throw ContractError("Adam step: parameter " + std::to_string(k) + " has no gradient");
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = *params_[k];
    std::span<const double> g = p.grad();
    std::vector<double>& m = m_[k];
    std::vector<double>& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
    p.clear_grad();
  }
}

}  // namespace dmt
