#pragma once

#include <cstdint>
#include <vector>

#include "trajgan/tensor.hpp"

namespace trajgan {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
};

// Adam with bias correction. Gradients are zeroed after every step.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions options = {});

  void step();
  void zero_grad();

  const AdamOptions& options() const noexcept { return options_; }
  const std::vector<AdamState>& state() const noexcept { return state_; }
  // Replaces the moment estimates, e.g. when resuming from a checkpoint.
  void load_state(std::vector<AdamState> state);
  std::uint64_t steps() const noexcept { return state_.empty() ? 0 : state_.front().t; }

 private:
  std::vector<Tensor> params_;
  std::vector<AdamState> state_;
  AdamOptions options_;
};

// Global L2 norm over the gradients of `params` (missing gradients count as 0).
double grad_norm(const std::vector<Tensor>& params);
// Rescales gradients so their global norm is at most `max_norm`.
void clip_grad_norm(std::vector<Tensor>& params, double max_norm);

}  // namespace trajgan
