#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trajgan/data.hpp"
#include "trajgan/model.hpp"
#include "trajgan/optim.hpp"

namespace trajgan {

enum class TrainMode { gan, nogan };

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& name);

struct TrainConfig {
  std::size_t batch_size = 48;  // windows per step
  double lr = 1e-3;
  std::size_t epochs = 200;
  TrainMode mode = TrainMode::gan;
  std::size_t d_steps = 1;
  std::size_t g_steps = 1;
  std::uint64_t seed = 0;
  double clip_norm = 0.0;  // 0 disables clipping
  double adv_weight = 1.0;
  double variety_weight = 1.0;
  bool validate = true;  // min-of-k validation after every epoch

  void validate_config() const;
  bool operator==(const TrainConfig&) const = default;
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  std::optional<double> d_loss;
  std::optional<double> g_adv;
  double variety = 0.0;
  double grad_norm_g = 0.0;
  std::optional<double> grad_norm_d;
  // Largest gradient norm seen on the frozen network after either backward
  // pass; zero when the updates are isolated.
  double frozen_grad_norm = 0.0;
  double seconds = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double val_ade = 0.0;
  double val_fde = 0.0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;

  // step,epoch,d_loss,g_adv,variety,grad_norm_g,grad_norm_d,seconds
  void write_steps_csv(std::ostream& out, bool header = true) const;
  void write_epochs_csv(std::ostream& out, bool header = true) const;
};

// -mean(log real) - mean(log(1 - fake)), log arguments clamped at 1e-7.
Tensor d_loss(const Tensor& real_scores, const Tensor& fake_scores);
// -mean(log fake), non-saturating generator loss.
Tensor g_adv_loss(const Tensor& fake_scores);

struct VarietyLoss {
  Tensor loss;                      // scalar
  Tensor per_sample;                // [k*N x 1] L2 error of every sample
  std::vector<std::size_t> argmin;  // best sample per agent
};

// Per agent: minimum over samples of the L2 norm of the flattened error;
// averaged over agents. Only argmin samples receive gradient.
VarietyLoss variety_loss(const Tensor& truth_flat, const PredictionSet& predictions);

// Generator, discriminator and both optimizers.
class TrainingSession {
 public:
  TrainingSession(const ModelConfig& model, const TrainConfig& train);

  Generator& generator() noexcept { return generator_; }
  const Generator& generator() const noexcept { return generator_; }
  Discriminator& discriminator() noexcept { return discriminator_; }
  const Discriminator& discriminator() const noexcept { return discriminator_; }
  Adam& generator_optimizer() noexcept { return g_opt_; }
  const Adam& generator_optimizer() const noexcept { return g_opt_; }
  Adam& discriminator_optimizer() noexcept { return d_opt_; }
  const Adam& discriminator_optimizer() const noexcept { return d_opt_; }
  const TrainConfig& train_config() const noexcept { return train_; }
  const ModelConfig& model_config() const noexcept { return generator_.config(); }

  StepRecord train_step_gan(const Batch& batch, Rng& rng);
  StepRecord train_step_nogan(const Batch& batch, Rng& rng);
  StepRecord train_step(const Batch& batch, Rng& rng);

  std::size_t epochs_done() const noexcept { return epochs_done_; }
  std::size_t steps_done() const noexcept { return steps_done_; }
  double best_val_ade() const noexcept { return best_val_ade_; }
  void set_progress(std::size_t epochs_done, std::size_t steps_done, double best_val_ade);

 private:
  double generator_update(const Batch& batch, Rng& rng, double adv_weight, StepRecord& rec);

  TrainConfig train_;
  Generator generator_;
  Discriminator discriminator_;
  Adam g_opt_;
  Adam d_opt_;
  std::size_t epochs_done_ = 0;
  std::size_t steps_done_ = 0;
  double best_val_ade_ = std::numeric_limits<double>::infinity();
};

// Seeded per-epoch stream, so resuming at epoch e replays the same draws.
Rng epoch_rng(std::uint64_t seed, std::size_t epoch);

struct TrainingHooks {
  // Called after validation when the validation ADE improves.
  std::function<void(const TrainingSession&, const EpochRecord&)> on_best;
  std::function<void(const TrainingSession&, const EpochRecord&)> on_epoch;
  std::function<void(const StepRecord&)> on_step;
};

// Runs the remaining epochs of `session` up to train_config().epochs.
TrainLog run_training(TrainingSession& session, const DatasetSplit& split, const TrainingHooks& hooks = {});

}  // namespace trajgan
