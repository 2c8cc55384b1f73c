#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmt/adam.hpp"
#include "dmt/data.hpp"
#include "dmt/ddpm_train.hpp"
#include "dmt/diffusion.hpp"
#include "dmt/models.hpp"
#include "dmt/schedule.hpp"

namespace dmt {

/// plain: ||f(x) - y_t||^2. inverse_variance: the same divided by 2(1 - ab_t).
enum class LossWeighting { plain, inverse_variance };

std::string to_string(LossWeighting w);
LossWeighting parse_weighting(const std::string& s);

struct DmtConfig {
  /// Source timestep; negative means "same as t" (the symmetric pipeline).
  int s = -1;
  int t = 1;
  LossWeighting weighting = LossWeighting::plain;
  int epochs = 30;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  AdamConfig adam{};
  SamplerSpec sampler{};

  int source_step() const noexcept { return s < 0 ? t : s; }
  bool symmetric() const noexcept { return s < 0 || s == t; }
  /// Training needs 0 <= s, t <= T (t = 0 is plain regression on clean pairs).
  void validate_for_training(const NoiseSchedule& sched) const;
  nlohmann::json to_json() const;
  static DmtConfig from_json(const nlohmann::json& j);
};

/// Symmetric training (s unset or equal to t) on the train split.
std::vector<double> dmt_train(const PairedDataset& pairs, Model& translator, const DmtConfig& cfg,
                              const NoiseSchedule& sched, const EpochHook& hook = {});
/// Asymmetric training: x0 diffused to s, y0 to t, shared noise.
std::vector<double> dmt_train_asym(const PairedDataset& pairs, Model& translator,
                                   const DmtConfig& cfg, const NoiseSchedule& sched,
                                   const EpochHook& hook = {});
/// Core loop on raw stacked tensors [n, sample...] (no value-range checks).
/// Rejects elementwise identical x0/y0 before any step.
std::vector<double> dmt_train_tensors(const Tensor& x0, const Tensor& y0, Model& translator,
                                      const DmtConfig& cfg, const NoiseSchedule& sched,
                                      const EpochHook& hook = {});

/// Batch mean of the (weighted) translation loss for a fixed noise draw.
double dmt_loss_value(const Model& translator, const Tensor& x0, const Tensor& y0,
                      const DmtConfig& cfg, const NoiseSchedule& sched, std::uint64_t seed);

struct TranslateResult {
  Tensor y;
  int nfe = 0;
  /// The noise used to diffuse the source (z_1) and the fresh noise (z_2).
  Tensor source_noise;
  Tensor fresh_noise;
};

/// x_s = diffuse(x0, s, z1); y_t = f(x_s) - sqrt(1-ab_t) z1 + sqrt(1-ab_t) z2;
/// then denoise from t with cfg.sampler. Noise comes from `streams` as in
/// sample_from (one stream, or one per row of a batch).
TranslateResult dmt_translate_asym(const Tensor& x0, const Model& translator,
                                   const NoisePredictor& eps, const DmtConfig& cfg,
                                   const NoiseSchedule& sched, std::span<CounterRng> streams);
TranslateResult dmt_translate_asym(const Tensor& x0, const Model& translator,
                                   const NoisePredictor& eps, const DmtConfig& cfg,
                                   const NoiseSchedule& sched, std::uint64_t seed);
/// Symmetric form; cfg.s must be unset or equal to cfg.t.
TranslateResult dmt_translate(const Tensor& x0, const Model& translator, const NoisePredictor& eps,
                              const DmtConfig& cfg, const NoiseSchedule& sched, std::uint64_t seed);

/// Translates every row of x0 [n, sample...]; row i uses stream
/// CounterRng(seed).derive(i), so the result does not depend on chunking or
/// thread count. Rows are processed in parallel chunks.
TranslateResult translate_rows(const Tensor& x0, const Model& translator, const Model& denoiser,
                               const DmtConfig& cfg, const NoiseSchedule& sched,
                               std::uint64_t seed);

NoisePredictor as_predictor(const Model& denoiser);

}  // namespace dmt
