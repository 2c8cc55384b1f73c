#include "dmt/dmt.hpp"

#include <cmath>

#include "dmt/errors.hpp"
#include "dmt/parallel.hpp"

namespace dmt {

std::string to_string(LossWeighting w) {
  return w == LossWeighting::plain ? "plain" : "inverse_variance";
}

LossWeighting parse_weighting(const std::string& s) {
  if (s == "plain") return LossWeighting::plain;
  if (s == "inverse_variance") return LossWeighting::inverse_variance;
  throw ValidationError("loss weighting must be 'plain' or 'inverse_variance', got '" + s + "'");
}

void DmtConfig::validate_for_training(const NoiseSchedule& sched) const {
  if (t < 0 || t > sched.T()) {
    throw ValidationError("translation timestep t=" + std::to_string(t) + " outside [0, " +
                          std::to_string(sched.T()) + "]");
  }
  if (s >= 0 && s > sched.T()) {
    throw ValidationError("source timestep s=" + std::to_string(s) + " outside [0, " +
                          std::to_string(sched.T()) + "]");
  }
  if (t == 0 && weighting == LossWeighting::inverse_variance) {
    throw ValidationError("inverse_variance weighting is undefined at t=0");
  }
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  adam.validate();
}

nlohmann::json DmtConfig::to_json() const {
  nlohmann::json j{{"t", t},
                   {"weighting", to_string(weighting)},
                   {"epochs", epochs},
                   {"batch_size", batch_size},
                   {"seed", seed},
                   {"adam", adam.to_json()},
                   {"sampler", sampler.to_string()}};
  if (s >= 0) j["s"] = s;
  return j;
}

DmtConfig DmtConfig::from_json(const nlohmann::json& j) {
  DmtConfig c;
  try {
    c.s = j.value("s", c.s);
    c.t = j.value("t", c.t);
    c.weighting = parse_weighting(j.value("weighting", to_string(c.weighting)));
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    if (j.contains("adam")) c.adam = AdamConfig::from_json(j.at("adam"));
    c.sampler = SamplerSpec::parse(j.value("sampler", c.sampler.to_string()));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed translator config: ") + e.what());
  }
  return c;
}

namespace {

double loss_weight(const DmtConfig& cfg, const NoiseSchedule& sched) {
  if (cfg.weighting == LossWeighting::plain) return 1.0;
  return 1.0 / (2.0 * (1.0 - sched.alpha_bar(cfg.t)));
}

struct TranslatorBatch {
  Tensor x_s;
  Tensor y_t;
};

TranslatorBatch draw_translator_batch(const Tensor& x0, const Tensor& y0, const DmtConfig& cfg,
                                      const NoiseSchedule& sched, CounterRng& rng) {
  Tensor z(x0.shape());
  rng.fill_normal(z.data());
  AsymmetricPair p = diffuse_pair_asym(x0, y0, cfg.source_step(), cfg.t, z, sched);
  return {std::move(p.x_s), std::move(p.y_t)};
}

}  // namespace

std::vector<double> dmt_train_tensors(const Tensor& x0, const Tensor& y0, Model& translator,
                                      const DmtConfig& cfg, const NoiseSchedule& sched,
                                      const EpochHook& hook) {
  require_same_shape(x0, y0, "translator training data");
  if (x0.rank() < 2 || x0.dim(0) == 0) throw ContractError("translator training needs data");
  check_not_dirac(x0, y0);
  cfg.validate_for_training(sched);
  if (translator.descriptor().role != ModelRole::translator) {
    throw ContractError("dmt training needs a translator model");
  }
  translator.set_requires_grad(true);
  std::vector<Tensor*> params;
  for (Tensor& p : translator.parameters()) params.push_back(&p);
  Adam opt(params, cfg.adam);
  const CounterRng root(cfg.seed);
  CounterRng order_rng = root.derive(1);
  CounterRng noise_rng = root.derive(2);
  const double weight = loss_weight(cfg, sched);

  std::vector<double> curve;
  const std::size_t n = x0.dim(0);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const std::vector<std::size_t> order = shuffled_indices(n, order_rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n - start);
      const auto rows = std::span(order).subspan(start, count);
      TranslatorBatch b =
          draw_translator_batch(gather_rows(x0, rows), gather_rows(y0, rows), cfg, sched, noise_rng);
      Tape tape;
      Var pred = translator.forward(tape, tape.constant(std::move(b.x_s)));
      Var loss = ops::scale(ops::squared_error(pred, tape.constant(std::move(b.y_t))),
                            weight / static_cast<double>(count));
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

std::vector<double> dmt_train(const PairedDataset& pairs, Model& translator, const DmtConfig& cfg,
                              const NoiseSchedule& sched, const EpochHook& hook) {
  if (!cfg.symmetric()) {
    throw ContractError("dmt_train is the symmetric pipeline; use dmt_train_asym for s != t");
  }
  return dmt_train_tensors(pairs.train_x0(), pairs.train_y0(), translator, cfg, sched, hook);
}

std::vector<double> dmt_train_asym(const PairedDataset& pairs, Model& translator,
                                   const DmtConfig& cfg, const NoiseSchedule& sched,
                                   const EpochHook& hook) {
  if (cfg.s < 0) throw ContractError("dmt_train_asym needs an explicit source timestep s");
  return dmt_train_tensors(pairs.train_x0(), pairs.train_y0(), translator, cfg, sched, hook);
}

double dmt_loss_value(const Model& translator, const Tensor& x0, const Tensor& y0,
                      const DmtConfig& cfg, const NoiseSchedule& sched, std::uint64_t seed) {
  require_same_shape(x0, y0, "translator loss");
  CounterRng rng(seed);
  const TranslatorBatch b = draw_translator_batch(x0, y0, cfg, sched, rng);
  const Tensor pred = translator.translate(b.x_s);
  return loss_weight(cfg, sched) * squared_norm(pred - b.y_t) / static_cast<double>(x0.dim(0));
}

TranslateResult dmt_translate_asym(const Tensor& x0, const Model& translator,
                                   const NoisePredictor& eps, const DmtConfig& cfg,
                                   const NoiseSchedule& sched, std::span<CounterRng> streams) {
  const int s = cfg.source_step();
  const int t = cfg.t;
  if (t < 0 || t > sched.T() || s < 0 || s > sched.T()) {
    throw IndexError("translation timesteps (s=" + std::to_string(s) + ", t=" + std::to_string(t) +
                     ") outside [0, " + std::to_string(sched.T()) + "]");
  }
  TranslateResult r;
  r.source_noise = draw_normal(x0.shape(), streams);
  r.fresh_noise = draw_normal(x0.shape(), streams);
  const Tensor x_s = diffuse(x0, s, r.source_noise, sched);
  const double sd = marginal_coeffs(sched, t).sqrt_one_minus_ab;
  Tensor y_t = translator.translate(x_s);
  require_same_shape(y_t, x0, "translator output");
  for (std::size_t k = 0; k < y_t.size(); ++k) {
    y_t[k] += sd * (r.fresh_noise[k] - r.source_noise[k]);
  }
  SampleResult sampled = sample_from(y_t, t, eps, cfg.sampler, sched, streams);
  r.y = std::move(sampled.y);
  r.nfe = sampled.nfe;
  return r;
}

TranslateResult dmt_translate_asym(const Tensor& x0, const Model& translator,
                                   const NoisePredictor& eps, const DmtConfig& cfg,
                                   const NoiseSchedule& sched, std::uint64_t seed) {
  CounterRng rng(seed);
  return dmt_translate_asym(x0, translator, eps, cfg, sched, std::span<CounterRng>(&rng, 1));
}

TranslateResult dmt_translate(const Tensor& x0, const Model& translator, const NoisePredictor& eps,
                              const DmtConfig& cfg, const NoiseSchedule& sched,
                              std::uint64_t seed) {
  if (!cfg.symmetric()) throw ContractError("dmt_translate is the symmetric pipeline");
  return dmt_translate_asym(x0, translator, eps, cfg, sched, seed);
}

NoisePredictor as_predictor(const Model& denoiser) {
  return [&denoiser](const Tensor& y, int t) { return denoiser.predict(y, t); };
}

TranslateResult translate_rows(const Tensor& x0, const Model& translator, const Model& denoiser,
                               const DmtConfig& cfg, const NoiseSchedule& sched,
                               std::uint64_t seed) {
  if (x0.rank() < 2 || x0.dim(0) == 0) throw ContractError("translate_rows needs a batch");
  constexpr std::size_t kChunk = 16;
  const std::size_t n = x0.dim(0);
  const std::size_t per = x0.size() / n;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  const CounterRng root(seed);
  TranslateResult out{Tensor(x0.shape()), 0, Tensor(x0.shape()), Tensor(x0.shape())};
  std::vector<int> nfe(chunks, 0);
  const NoisePredictor eps = as_predictor(denoiser);
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t begin = c * kChunk;
    const std::size_t count = std::min(kChunk, n - begin);
    std::vector<CounterRng> streams;
    for (std::size_t i = begin; i < begin + count; ++i) streams.push_back(root.derive(i));
    const TranslateResult part =
        dmt_translate_asym(x0.slice_leading(begin, count), translator, eps, cfg, sched, streams);
    std::copy(part.y.data().begin(), part.y.data().end(),
              out.y.data().begin() + static_cast<std::ptrdiff_t>(begin * per));
    std::copy(part.source_noise.data().begin(), part.source_noise.data().end(),
              out.source_noise.data().begin() + static_cast<std::ptrdiff_t>(begin * per));
    std::copy(part.fresh_noise.data().begin(), part.fresh_noise.data().end(),
              out.fresh_noise.data().begin() + static_cast<std::ptrdiff_t>(begin * per));
    nfe[c] = part.nfe;
  });
  out.nfe = nfe.front();
  return out;
}

}  // namespace dmt
