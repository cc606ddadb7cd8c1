#pragma once

// Class-conditioned sequence-to-sequence generator (embedding, encoder,
// social pooling, noise-conditioned decoder) and the trajectory
// discriminator. Encoders are LSTM or transformer behind one contract.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trajgan/data.hpp"
#include "trajgan/tensor.hpp"

namespace trajgan {

enum class EncoderKind { lstm, transformer };

std::string to_string(EncoderKind kind);
EncoderKind encoder_kind_from_string(const std::string& name);

struct ModelConfig {
  EncoderKind encoder = EncoderKind::lstm;
  bool use_labels = true;
  // Feed the one-hot into the spatial embedding as well as the class embedding.
  bool class_in_spatial = true;
  std::size_t embed_dim = 16;
  std::size_t class_embed_dim = 16;
  std::size_t hidden_dim = 32;
  std::size_t noise_dim = 8;
  std::size_t mlp_dim = 64;
  std::size_t pool_dim = 32;
  std::size_t ff_dim = 64;
  std::size_t transformer_heads = 4;
  std::size_t transformer_layers = 4;
  // Use mean over positions instead of the last position as the transformer summary.
  bool transformer_mean_pool = false;
  Activation activation{ActivationKind::leaky_relu, 0.2};
  std::size_t k_samples = 20;
  std::size_t t_obs = 8;
  std::size_t t_pred = 12;
  // Displacements are divided by this before entering the networks.
  double coord_scale = 1.0;
  // Decoder head predicts the offset from constant-velocity extrapolation
  // instead of the raw next displacement.
  bool cv_residual = true;
  std::uint64_t init_seed = 0;

  // Throws ConfigError.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Ordered, named parameter collection.
class ParamSet {
 public:
  Tensor add(std::string name, std::size_t rows, std::size_t cols);
  const std::vector<std::pair<std::string, Tensor>>& entries() const noexcept { return entries_; }
  std::vector<Tensor> tensors() const;
  Tensor find(const std::string& name) const;
  std::size_t scalar_count() const;
  void set_requires_grad(bool on);
  void zero_grad();

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

using Rng = std::mt19937_64;

struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [1 x out]

  Linear() = default;
  Linear(ParamSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const;
};

// Linear layers with the activation after every layer except (optionally) the last.
struct Mlp {
  std::vector<Linear> layers;
  Activation act;
  bool activate_last = false;

  Mlp() = default;
  Mlp(ParamSet& params, const std::string& name, const std::vector<std::size_t>& dims, Activation act,
      bool activate_last, Rng& rng);
  Tensor operator()(const Tensor& x) const;
};

struct LstmState {
  Tensor h;
  Tensor c;
};

// Gate order in the packed weights: input, forget, cell, output.
struct LstmCell {
  Tensor w_input;   // [in x 4H]
  Tensor w_hidden;  // [H x 4H]
  Tensor bias;      // [1 x 4H]
  std::size_t hidden = 0;

  LstmCell() = default;
  LstmCell(ParamSet& params, const std::string& name, std::size_t in, std::size_t hidden, Rng& rng);
  LstmState step(const Tensor& x, const LstmState& state) const;
  LstmState zero_state(std::size_t rows) const;
};

// Multi-head self-attention over `rows / seq_len` independent sequences laid
// out sequence-major (row = seq * seq_len + position).
struct MultiHeadAttention {
  Linear query, key, value, output;
  std::size_t heads = 1;

  MultiHeadAttention() = default;
  MultiHeadAttention(ParamSet& params, const std::string& name, std::size_t dim, std::size_t heads, Rng& rng);
  // When `weights` is given it receives one [rows x seq_len] matrix per head.
  Tensor operator()(const Tensor& x, std::size_t seq_len, std::vector<Tensor>* weights = nullptr) const;
};

struct TransformerLayer {
  MultiHeadAttention attention;
  Tensor norm1_gain, norm1_bias;
  Linear ff1, ff2;
  Tensor norm2_gain, norm2_bias;
  Activation act;

  TransformerLayer() = default;
  TransformerLayer(ParamSet& params, const std::string& name, std::size_t dim, std::size_t heads,
                   std::size_t ff_dim, Activation act, Rng& rng);
  Tensor operator()(const Tensor& x, std::size_t seq_len) const;
};

// Fixed sinusoidal encoding, [seq_len x dim].
Tensor positional_encoding(std::size_t seq_len, std::size_t dim);

// Embedding plus LSTM or transformer; one weight set shared by every class.
class SequenceEncoder {
 public:
  SequenceEncoder() = default;
  SequenceEncoder(ParamSet& params, const std::string& name, const ModelConfig& config, Rng& rng);

  std::size_t embedding_dim() const;
  // coords: [rows x 2] scaled displacement, one_hot: [rows x 6].
  Tensor embed(const Tensor& coords, const Tensor& one_hot) const;
  // steps: time-major list of [N x 2] displacements. Returns [N x hidden].
  Tensor encode(const std::vector<Tensor>& steps, const Tensor& one_hot) const;
  Tensor lstm_encode(const std::vector<Tensor>& embedded) const;
  // embedded: [N*T x E] sequence-major.
  Tensor transformer_encode(const Tensor& embedded, std::size_t seq_len) const;

  const Linear& spatial() const { return spatial_; }
  const Linear& class_embedding() const { return class_embed_; }
  const LstmCell& lstm() const { return lstm_; }
  const std::vector<TransformerLayer>& transformer_layers() const { return layers_; }

 private:
  ModelConfig config_;
  Linear spatial_;
  Linear class_embed_;
  LstmCell lstm_;
  Linear input_proj_;
  std::vector<TransformerLayer> layers_;
};

// A batch of windows flattened into agent rows.
struct Batch {
  std::size_t n_agents = 0;
  std::size_t t_obs = 0;
  std::size_t t_pred = 0;
  std::vector<Tensor> observed;  // t_obs x [N x 2] absolute
  std::vector<Tensor> future;    // t_pred x [N x 2] absolute
  Tensor one_hot;                // [N x 6]
  Tensor future_flat;            // [N x 2*t_pred], (x, y) per step
  std::vector<int> labels;
  std::vector<std::vector<std::size_t>> groups;  // agent rows per window
};

Batch make_batch(std::span<const SceneWindow> windows, std::size_t t_obs, std::size_t t_pred);

// Per-step displacement of an absolute trajectory, divided by `scale`.
// The first entry is zero.
std::vector<Tensor> displacements(const std::vector<Tensor>& steps, double scale);

class PoolingModule {
 public:
  PoolingModule() = default;
  PoolingModule(ParamSet& params, const std::string& name, const ModelConfig& config, Rng& rng);
  // hidden: [N x H]; positions: [N x 2] (scaled); groups: co-present agents.
  // Agents without neighbours get a zero row.
  Tensor operator()(const Tensor& hidden, const Tensor& positions,
                    const std::vector<std::vector<std::size_t>>& groups) const;

 private:
  std::size_t out_dim_ = 0;
  Linear rel_embed_;
  Mlp mlp_;
};

struct PredictionSet {
  std::size_t k = 0;
  std::size_t n_agents = 0;
  std::size_t t_pred = 0;
  std::vector<Tensor> steps;  // t_pred x [k*N x 2] absolute, row s*N + i
  Tensor flat;                // [k*N x 2*t_pred]
  Tensor noise;               // [k*N x noise_dim]

  std::vector<Point> trajectory(std::size_t agent, std::size_t sample) const;
};

// Standard-normal noise for k samples, sample-major so the first N rows of a
// larger draw equal a k=1 draw from the same generator state.
Tensor draw_noise(std::size_t k, std::size_t n_agents, std::size_t noise_dim, Rng& rng);

class Generator {
 public:
  explicit Generator(const ModelConfig& config);

  const ModelConfig& config() const noexcept { return config_; }
  ParamSet& params() noexcept { return params_; }
  const ParamSet& params() const noexcept { return params_; }

  Tensor encode(const Batch& batch) const;
  Tensor pool(const Batch& batch, const Tensor& hidden) const;
  // Rows of hidden/pooled/last_pos/last_step are agents; noise has k*N rows.
  std::vector<Tensor> decode(const Tensor& hidden, const Tensor& pooled, const Tensor& noise,
                             const Tensor& last_pos, const Tensor& last_step, std::size_t k) const;
  PredictionSet forward(const Batch& batch, std::size_t k, Rng& rng) const;
  PredictionSet forward_with_noise(const Batch& batch, const Tensor& noise, std::size_t k) const;

  const SequenceEncoder& encoder() const { return encoder_; }

 private:
  ModelConfig config_;
  ParamSet params_;
  SequenceEncoder encoder_;
  PoolingModule pooling_;
  Mlp context_;
  Linear decoder_embed_;
  LstmCell decoder_;
  Linear head_;
};

struct DiscriminatorOutput {
  Tensor prob;        // [N x 1] in (0, 1)
  Tensor logit;       // [N x 1]
  Tensor hidden_pre;  // classifier hidden layer before activation
};

class Discriminator {
 public:
  explicit Discriminator(const ModelConfig& config);

  const ModelConfig& config() const noexcept { return config_; }
  ParamSet& params() noexcept { return params_; }
  const ParamSet& params() const noexcept { return params_; }

  // trajectory: t_obs + t_pred absolute steps of [N x 2].
  DiscriminatorOutput score(const std::vector<Tensor>& trajectory, const Tensor& one_hot) const;

  const Linear& classifier_hidden() const { return hidden_; }
  const Linear& classifier_output() const { return out_; }

 private:
  ModelConfig config_;
  ParamSet params_;
  SequenceEncoder encoder_;
  Linear hidden_;
  Linear out_;
};

// Observed steps followed by the given future steps.
std::vector<Tensor> join_trajectory(const std::vector<Tensor>& observed, const std::vector<Tensor>& future);
// The first `n` rows of every step.
std::vector<Tensor> first_rows(const std::vector<Tensor>& steps, std::size_t n);

// Row c is the class embedding of one-hot c: W_ce row c plus bias.
// Throws UnavailableError for models without class embeddings.
std::vector<std::vector<double>> class_embedding_matrix(const Generator& generator);

}  // namespace trajgan
