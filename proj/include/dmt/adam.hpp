#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "dmt/tensor.hpp"

namespace dmt {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
  nlohmann::json to_json() const;
  static AdamConfig from_json(const nlohmann::json& j);
};

/// Adam with bias correction over a fixed list of parameter tensors. The
/// tensors must outlive the optimizer.
class Adam {
 public:
  Adam(std::vector<Tensor*> params, AdamConfig config);

  /// Applies one update from the params' gradient buffers, then clears them.
  /// Every parameter must carry a gradient.
  void step();

  std::int64_t steps() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return cfg_; }
  void set_lr(double lr);

 private:
  std::vector<Tensor*> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamConfig cfg_;
  std::int64_t t_ = 0;
};

}  // namespace dmt
