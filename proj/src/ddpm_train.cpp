#include "dmt/ddpm_train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include "dmt/binary_io.hpp"
#include "dmt/diffusion.hpp"
#include "dmt/errors.hpp"

namespace dmt {

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (final_lr > adam.lr) throw ValidationError("final_lr must not exceed the initial lr");
  if (loss_weighting) throw UnsupportedError("weighted denoising loss is not implemented");
  adam.validate();
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"seed", seed},
          {"adam", adam.to_json()},
          {"final_lr", final_lr},
          {"loss_weighting", loss_weighting}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    if (j.contains("adam")) c.adam = AdamConfig::from_json(j.at("adam"));
    c.final_lr = j.value("final_lr", c.final_lr);
    c.loss_weighting = j.value("loss_weighting", c.loss_weighting);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed training config: ") + e.what());
  }
  c.validate();
  return c;
}

DdpmBatch draw_ddpm_batch(const Tensor& y0_batch, const NoiseSchedule& sched, CounterRng& rng) {
  if (y0_batch.rank() < 2 || y0_batch.dim(0) == 0) {
    throw ContractError("denoising loss needs a non-empty batch");
  }
  const std::size_t n = y0_batch.dim(0);
  const std::size_t per = y0_batch.size() / n;
  DdpmBatch b{Tensor(y0_batch.shape()), std::vector<int>(n), Tensor(y0_batch.shape())};
  for (std::size_t r = 0; r < n; ++r) {
    b.t[r] = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(sched.T())));
  }
  rng.fill_normal(b.eps.data());
  for (std::size_t r = 0; r < n; ++r) {
    const auto [a, s] = marginal_coeffs(sched, b.t[r]);
    for (std::size_t k = r * per; k < (r + 1) * per; ++k) {
      b.x_t[k] = a * y0_batch[k] + s * b.eps[k];
    }
  }
  return b;
}

Var ddpm_loss(Tape& tape, Model& model, const Tensor& y0_batch, const NoiseSchedule& sched,
              CounterRng& rng) {
  DdpmBatch b = draw_ddpm_batch(y0_batch, sched, rng);
  const double n = static_cast<double>(y0_batch.dim(0));
  Var pred = model.forward(tape, tape.constant(std::move(b.x_t)), b.t);
  return ops::scale(ops::squared_error(pred, tape.constant(std::move(b.eps))), 1.0 / n);
}

double ddpm_loss_value(const BatchPredictor& model, const Tensor& y0_batch,
                       const NoiseSchedule& sched, CounterRng& rng) {
  const DdpmBatch b = draw_ddpm_batch(y0_batch, sched, rng);
  const Tensor pred = model(b.x_t, b.t);
  require_same_shape(pred, b.eps, "denoising loss");
  return squared_norm(pred - b.eps) / static_cast<double>(y0_batch.dim(0));
}

double epoch_lr(const TrainConfig& cfg, int epoch) {
  if (cfg.final_lr <= 0.0 || cfg.epochs == 1) return cfg.adam.lr;
  const double phase = static_cast<double>(epoch - 1) / static_cast<double>(cfg.epochs - 1);
  return cfg.final_lr + 0.5 * (cfg.adam.lr - cfg.final_lr) * (1.0 + std::cos(std::numbers::pi * phase));
}

Tensor gather_rows(const Tensor& data, std::span<const std::size_t> rows) {
  Shape shape = data.shape();
  const std::size_t per = data.size() / data.dim(0);
  shape[0] = rows.size();
  Tensor out(shape);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t src = rows[r];
    if (src >= data.dim(0)) throw IndexError("row index out of range");
    std::copy_n(data.data().begin() + static_cast<std::ptrdiff_t>(src * per), per,
                out.data().begin() + static_cast<std::ptrdiff_t>(r * per));
  }
  return out;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, CounterRng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

std::vector<double> train_ddpm(const Tensor& y0, Model& model, const TrainConfig& cfg,
                               const NoiseSchedule& sched, const EpochHook& hook) {
  cfg.validate();
  if (model.descriptor().role != ModelRole::denoiser) {
    throw ContractError("train_ddpm needs a denoiser model");
  }
  if (y0.rank() < 2 || y0.dim(0) == 0) throw ContractError("train_ddpm needs a non-empty dataset");
  model.set_requires_grad(true);
  std::vector<Tensor*> params;
  for (Tensor& p : model.parameters()) params.push_back(&p);
  Adam opt(params, cfg.adam);
  const CounterRng root(cfg.seed);
  CounterRng order_rng = root.derive(1);
  CounterRng noise_rng = root.derive(2);

  std::vector<double> curve;
  const std::size_t n = y0.dim(0);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    opt.set_lr(epoch_lr(cfg, epoch));
    const std::vector<std::size_t> order = shuffled_indices(n, order_rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n - start);
      const Tensor batch = gather_rows(y0, std::span(order).subspan(start, count));
      Tape tape;
      Var loss = ddpm_loss(tape, model, batch, sched, noise_rng);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) throw TrainingDivergedError(epoch);
      tape.backward(loss);
      opt.step();
      total += value;
      ++batches;
    }
    curve.push_back(total / static_cast<double>(batches));
    if (hook) hook(epoch, curve.back());
  }
  return curve;
}

void write_curve_csv(const std::filesystem::path& path, std::span<const double> curve) {
  std::string out = "epoch,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < curve.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1, curve[i]);
    out += buf;
  }
  io::write_file(path, out);
}

}  // namespace dmt
