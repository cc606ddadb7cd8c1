#include "trajgan/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "trajgan/error.hpp"
#include "trajgan/eval.hpp"

namespace trajgan {

namespace {

constexpr double kLogClamp = 1e-7;

std::string optional_cell(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os.precision(17);
  os << *v;
  return os.str();
}

std::string cell(double v) { return optional_cell(v); }

void check_finite(double loss, const char* what, double gn_g, std::optional<double> gn_d) {
  if (std::isfinite(loss)) return;
  std::string msg = std::string("non-finite ") + what + " loss; grad norms: generator=" + cell(gn_g);
  if (gn_d) msg += " discriminator=" + cell(*gn_d);
  throw NumericError(msg);
}

}  // namespace

std::string to_string(TrainMode mode) { return mode == TrainMode::gan ? "gan" : "nogan"; }

TrainMode train_mode_from_string(const std::string& name) {
  if (name == "gan") return TrainMode::gan;
  if (name == "nogan") return TrainMode::nogan;
  throw ConfigError("unknown training mode '" + name + "' (gan, nogan)");
}

void TrainConfig::validate_config() const {
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (d_steps == 0 || g_steps == 0) throw ConfigError("train.d_steps and train.g_steps must be positive");
  if (clip_norm < 0.0) throw ConfigError("train.clip_norm must be >= 0");
  if (adv_weight < 0.0 || variety_weight < 0.0) throw ConfigError("loss weights must be >= 0");
}

void TrainLog::write_steps_csv(std::ostream& out, bool header) const {
  if (header) out << "step,epoch,d_loss,g_adv,variety,grad_norm_g,grad_norm_d,seconds\n";
  for (const auto& r : steps) {
    out << r.step << ',' << r.epoch << ',' << optional_cell(r.d_loss) << ',' << optional_cell(r.g_adv) << ','
        << cell(r.variety) << ',' << cell(r.grad_norm_g) << ',' << optional_cell(r.grad_norm_d) << ','
        << cell(r.seconds) << '\n';
  }
}

void TrainLog::write_epochs_csv(std::ostream& out, bool header) const {
  if (header) out << "epoch,val_ade,val_fde\n";
  for (const auto& r : epochs) out << r.epoch << ',' << cell(r.val_ade) << ',' << cell(r.val_fde) << '\n';
}

// ---- losses ----------------------------------------------------------------

Tensor d_loss(const Tensor& real_scores, const Tensor& fake_scores) {
  const Tensor real_term = mean(log(clamp_min(real_scores, kLogClamp)));
  const Tensor fake_term = mean(log(clamp_min(add_scalar(scale(fake_scores, -1.0), 1.0), kLogClamp)));
  return scale(add(real_term, fake_term), -1.0);
}

Tensor g_adv_loss(const Tensor& fake_scores) {
  return scale(mean(log(clamp_min(fake_scores, kLogClamp))), -1.0);
}

VarietyLoss variety_loss(const Tensor& truth_flat, const PredictionSet& predictions) {
  const std::size_t n = predictions.n_agents;
  const std::size_t k = predictions.k;
  if (truth_flat.rows() != n || truth_flat.cols() != predictions.flat.cols()) {
    throw DimensionError("variety_loss: truth " + truth_flat.shape_string() + " does not match predictions " +
                         predictions.flat.shape_string());
  }
  std::vector<std::size_t> rep(n * k);
  for (std::size_t s = 0; s < k; ++s)
    for (std::size_t i = 0; i < n; ++i) rep[s * n + i] = i;
  const Tensor diff = sub(predictions.flat, gather_rows(truth_flat, rep));
  VarietyLoss out;
  out.per_sample = sqrt(row_sum(mul(diff, diff)));
  out.loss = mean(sample_min(out.per_sample, k, &out.argmin));
  return out;
}

// ---- session ---------------------------------------------------------------

TrainingSession::TrainingSession(const ModelConfig& model, const TrainConfig& train)
    : train_(train),
      generator_(model),
      discriminator_(model),
      g_opt_(generator_.params().tensors(), AdamOptions{train.lr}),
      d_opt_(discriminator_.params().tensors(), AdamOptions{train.lr}) {
  train_.validate_config();
  generator_.params().zero_grad();
  discriminator_.params().zero_grad();
}

void TrainingSession::set_progress(std::size_t epochs_done, std::size_t steps_done, double best_val_ade) {
  epochs_done_ = epochs_done;
  steps_done_ = steps_done;
  best_val_ade_ = best_val_ade;
}

double TrainingSession::generator_update(const Batch& batch, Rng& rng, double adv_weight, StepRecord& rec) {
  auto& gp = generator_.params();
  auto& dp = discriminator_.params();
  dp.set_requires_grad(false);
  gp.zero_grad();

  const std::size_t k = generator_.config().k_samples;
  const PredictionSet preds = generator_.forward(batch, k, rng);
  const VarietyLoss variety = variety_loss(batch.future_flat, preds);
  Tensor loss = scale(variety.loss, train_.variety_weight);
  rec.variety = variety.loss.item();
  if (adv_weight > 0.0) {
    const auto fake = join_trajectory(batch.observed, first_rows(preds.steps, batch.n_agents));
    const Tensor adv = g_adv_loss(discriminator_.score(fake, batch.one_hot).prob);
    rec.g_adv = adv.item();
    loss = add(loss, scale(adv, adv_weight));
  }
  backward(loss);
  dp.set_requires_grad(true);
  rec.frozen_grad_norm = std::max(rec.frozen_grad_norm, grad_norm(dp.tensors()));

  auto params = gp.tensors();
  rec.grad_norm_g = grad_norm(params);
  check_finite(loss.item(), "generator", rec.grad_norm_g, rec.grad_norm_d);
  if (train_.clip_norm > 0.0) clip_grad_norm(params, train_.clip_norm);
  g_opt_.step();
  return loss.item();
}

StepRecord TrainingSession::train_step_gan(const Batch& batch, Rng& rng) {
  const auto start = std::chrono::steady_clock::now();
  StepRecord rec;
  rec.step = steps_done_;
  rec.epoch = epochs_done_;
  auto& gp = generator_.params();
  auto& dp = discriminator_.params();

  for (std::size_t d = 0; d < train_.d_steps; ++d) {
    std::vector<Tensor> fake_future;
    {
      NoGradGuard no_grad;
      fake_future = generator_.forward(batch, 1, rng).steps;
    }
    gp.set_requires_grad(false);
    dp.zero_grad();
    const Tensor real = discriminator_.score(join_trajectory(batch.observed, batch.future), batch.one_hot).prob;
    const Tensor fake = discriminator_.score(join_trajectory(batch.observed, fake_future), batch.one_hot).prob;
    const Tensor loss = d_loss(real, fake);
    backward(loss);
    gp.set_requires_grad(true);
    rec.frozen_grad_norm = std::max(rec.frozen_grad_norm, grad_norm(gp.tensors()));
    auto params = dp.tensors();
    rec.d_loss = loss.item();
    rec.grad_norm_d = grad_norm(params);
    check_finite(loss.item(), "discriminator", 0.0, rec.grad_norm_d);
    if (train_.clip_norm > 0.0) clip_grad_norm(params, train_.clip_norm);
    d_opt_.step();
  }
  for (std::size_t g = 0; g < train_.g_steps; ++g) generator_update(batch, rng, train_.adv_weight, rec);

  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ++steps_done_;
  return rec;
}

StepRecord TrainingSession::train_step_nogan(const Batch& batch, Rng& rng) {
  const auto start = std::chrono::steady_clock::now();
  StepRecord rec;
  rec.step = steps_done_;
  rec.epoch = epochs_done_;
  generator_update(batch, rng, 0.0, rec);
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ++steps_done_;
  return rec;
}

StepRecord TrainingSession::train_step(const Batch& batch, Rng& rng) {
  return train_.mode == TrainMode::gan ? train_step_gan(batch, rng) : train_step_nogan(batch, rng);
}

Rng epoch_rng(std::uint64_t seed, std::size_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x7a11u};
  return Rng(seq);
}

TrainLog run_training(TrainingSession& session, const DatasetSplit& split, const TrainingHooks& hooks) {
  const auto& cfg = session.train_config();
  const auto& mcfg = session.model_config();
  TrainLog log;
  if (session.epochs_done() >= cfg.epochs) return log;
  if (split.train.empty()) throw ConfigError("training split is empty");

  std::vector<std::size_t> order(split.train.size());
  for (std::size_t epoch = session.epochs_done(); epoch < cfg.epochs; ++epoch) {
    Rng rng = epoch_rng(cfg.seed, epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::vector<SceneWindow> windows;
      for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i) {
        windows.push_back(split.train[order[i]]);
      }
      const Batch batch = make_batch(windows, mcfg.t_obs, mcfg.t_pred);
      log.steps.push_back(session.train_step(batch, rng));
      if (hooks.on_step) hooks.on_step(log.steps.back());
    }

    EpochRecord rec{epoch + 1, 0.0, 0.0};
    double best = session.best_val_ade();
    bool improved = false;
    if (cfg.validate && !split.val.empty()) {
      MinOfKOptions opts;
      opts.k = mcfg.k_samples;
      opts.seed = cfg.seed ^ (0xe7a1ULL << 32);
      const EvalReport report = eval_min_of_k(session.generator(), split.val, opts, "validation");
      rec.val_ade = report.ade;
      rec.val_fde = report.fde;
      improved = report.ade < best;
      if (improved) best = report.ade;
    } else {
      improved = true;
    }
    log.epochs.push_back(rec);
    session.set_progress(epoch + 1, session.steps_done(), best);
    if (improved && hooks.on_best) hooks.on_best(session, rec);
    if (hooks.on_epoch) hooks.on_epoch(session, rec);
  }
  return log;
}

}  // namespace trajgan
