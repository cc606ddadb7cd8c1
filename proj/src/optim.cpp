#include "trajgan/optim.hpp"

#include <cmath>

#include "trajgan/error.hpp"

namespace trajgan {

Adam::Adam(std::vector<Tensor> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  state_.reserve(params_.size());
  for (const auto& p : params_) {
    state_.push_back(AdamState{std::vector<double>(p.size(), 0.0), std::vector<double>(p.size(), 0.0), 0});
  }
}

void Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].has_grad()) {
      throw ContractError("adam_step: parameter " + std::to_string(i) + " " +
                          params_[i].shape_string() + " has no gradient");
    }
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& st = state_[i];
    auto w = params_[i].mutable_values();
    auto g = params_[i].mutable_grad();
    st.t += 1;
    const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(st.t));
    const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(st.t));
    for (std::size_t j = 0; j < w.size(); ++j) {
      st.m[j] = options_.beta1 * st.m[j] + (1.0 - options_.beta1) * g[j];
      st.v[j] = options_.beta2 * st.v[j] + (1.0 - options_.beta2) * g[j] * g[j];
      const double mhat = st.m[j] / c1;
      const double vhat = st.v[j] / c2;
      w[j] -= options_.lr * mhat / (std::sqrt(vhat) + options_.epsilon);
      g[j] = 0.0;
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Adam::load_state(std::vector<AdamState> state) {
  if (state.size() != params_.size()) {
    throw ContractError("adam state for " + std::to_string(state.size()) + " parameters, expected " +
                        std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (state[i].m.size() != params_[i].size() || state[i].v.size() != params_[i].size()) {
      throw ContractError("adam state size mismatch for parameter " + std::to_string(i));
    }
  }
  state_ = std::move(state);
}

double grad_norm(const std::vector<Tensor>& params) {
  double total = 0.0;
  for (const auto& p : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) total += g * g;
  }
  return std::sqrt(total);
}

void clip_grad_norm(std::vector<Tensor>& params, double max_norm) {
  const double norm = grad_norm(params);
  if (max_norm <= 0.0 || norm <= max_norm) return;
  const double factor = max_norm / norm;
  for (auto& p : params) {
    if (!p.has_grad()) continue;
    for (double& g : p.mutable_grad()) g *= factor;
  }
}

}  // namespace trajgan
