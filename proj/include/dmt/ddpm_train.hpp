#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "dmt/adam.hpp"
#include "dmt/autodiff.hpp"
#include "dmt/models.hpp"
#include "dmt/rng.hpp"
#include "dmt/schedule.hpp"

namespace dmt {

struct TrainConfig {
  int epochs = 30;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  AdamConfig adam{};
  /// Cosine decay from adam.lr to this value over the epochs; <= 0 keeps lr fixed.
  double final_lr = 0.0;
  /// Only the unweighted simple objective is implemented.
  bool loss_weighting = false;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Per-epoch callback: (1-based epoch, mean batch loss).
using EpochHook = std::function<void(int, double)>;

struct DdpmBatch {
  Tensor x_t;
  std::vector<int> t;
  Tensor eps;
};

/// For each row of y0_batch: t ~ U{1..T}, eps ~ N(0, I), x_t = diffuse(y0, t, eps).
/// Draws t for all rows first, then eps row by row.
DdpmBatch draw_ddpm_batch(const Tensor& y0_batch, const NoiseSchedule& sched, CounterRng& rng);

/// Batch mean of ||eps - eps_theta(x_t, t)||^2 as a scalar on `tape`.
Var ddpm_loss(Tape& tape, Model& model, const Tensor& y0_batch, const NoiseSchedule& sched,
              CounterRng& rng);

using BatchPredictor = std::function<Tensor(const Tensor& x_t, std::span<const int> ts)>;
/// Same objective for an arbitrary predictor, without gradients.
double ddpm_loss_value(const BatchPredictor& model, const Tensor& y0_batch,
                       const NoiseSchedule& sched, CounterRng& rng);

/// Trains `model` (a denoiser) on the rows of y0 [n, sample...]. Returns the
/// per-epoch mean loss. Throws TrainingDivergedError on a non-finite loss.
std::vector<double> train_ddpm(const Tensor& y0, Model& model, const TrainConfig& cfg,
                               const NoiseSchedule& sched, const EpochHook& hook = {});

/// Learning rate for a 1-based epoch under cfg's schedule.
double epoch_lr(const TrainConfig& cfg, int epoch);

/// Copies the listed rows of `data` into one batch tensor.
Tensor gather_rows(const Tensor& data, std::span<const std::size_t> rows);
std::vector<std::size_t> shuffled_indices(std::size_t n, CounterRng& rng);

/// `epoch,loss` CSV, epochs numbered from 1.
void write_curve_csv(const std::filesystem::path& path, std::span<const double> curve);

}  // namespace dmt
