#include "trajgan/model.hpp"

#include <cmath>

#include "trajgan/error.hpp"

namespace trajgan {

std::string to_string(EncoderKind kind) {
  return kind == EncoderKind::lstm ? "lstm" : "transformer";
}

EncoderKind encoder_kind_from_string(const std::string& name) {
  if (name == "lstm") return EncoderKind::lstm;
  if (name == "transformer") return EncoderKind::transformer;
  throw ConfigError("unknown encoder '" + name + "' (lstm, transformer)");
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("model.") + name + " must be positive");
  };
  positive(embed_dim, "embed_dim");
  positive(hidden_dim, "hidden_dim");
  positive(noise_dim, "noise_dim");
  positive(mlp_dim, "mlp_dim");
  positive(pool_dim, "pool_dim");
  positive(k_samples, "k_samples");
  positive(t_obs, "t_obs");
  positive(t_pred, "t_pred");
  if (use_labels) positive(class_embed_dim, "class_embed_dim");
  if (encoder == EncoderKind::transformer) {
    positive(transformer_heads, "transformer_heads");
    positive(transformer_layers, "transformer_layers");
    positive(ff_dim, "ff_dim");
    if (hidden_dim % transformer_heads != 0) {
      throw ConfigError("model.hidden_dim (" + std::to_string(hidden_dim) +
                        ") must be divisible by model.transformer_heads (" + std::to_string(transformer_heads) + ")");
    }
  }
  if (activation.kind != ActivationKind::relu && activation.kind != ActivationKind::leaky_relu &&
      activation.kind != ActivationKind::tanh) {
    throw ConfigError("model.activation must be relu, leaky_relu or tanh");
  }
  if (activation.kind == ActivationKind::leaky_relu && !(activation.slope > 0.0 && activation.slope < 1.0)) {
    throw ConfigError("model.leaky_slope must lie in (0, 1)");
  }
  if (!(coord_scale > 0.0) || !std::isfinite(coord_scale)) throw ConfigError("model.coord_scale must be positive");
}

// ---- ParamSet --------------------------------------------------------------

Tensor ParamSet::add(std::string name, std::size_t rows, std::size_t cols) {
  for (const auto& [n, t] : entries_) {
    if (n == name) throw ContractError("duplicate parameter name '" + name + "'");
  }
  Tensor t = Tensor::zeros(rows, cols, true);
  entries_.emplace_back(std::move(name), t);
  return t;
}

std::vector<Tensor> ParamSet::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& [n, t] : entries_) out.push_back(t);
  return out;
}

Tensor ParamSet::find(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw ContractError("no parameter named '" + name + "'");
}

std::size_t ParamSet::scalar_count() const {
  std::size_t total = 0;
  for (const auto& [n, t] : entries_) total += t.size();
  return total;
}

void ParamSet::set_requires_grad(bool on) {
  for (auto& [n, t] : entries_) t.set_requires_grad(on);
}

void ParamSet::zero_grad() {
  for (auto& [n, t] : entries_) t.zero_grad();
}

// ---- layers ----------------------------------------------------------------

namespace {

void init_uniform(Tensor& t, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.mutable_values()) v = dist(rng);
}

std::vector<std::size_t> repeat_index(std::size_t n, std::size_t k) {
  std::vector<std::size_t> idx(n * k);
  for (std::size_t s = 0; s < k; ++s)
    for (std::size_t i = 0; i < n; ++i) idx[s * n + i] = i;
  return idx;
}

}  // namespace

Linear::Linear(ParamSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  weight = params.add(name + ".weight", in, out);
  bias = params.add(name + ".bias", 1, out);
  init_uniform(weight, 1.0 / std::sqrt(static_cast<double>(in)), rng);
}

Tensor Linear::operator()(const Tensor& x) const { return add_row(matmul(x, weight), bias); }

Mlp::Mlp(ParamSet& params, const std::string& name, const std::vector<std::size_t>& dims, Activation activation,
         bool activate_last_layer, Rng& rng)
    : act(activation), activate_last(activate_last_layer) {
  if (dims.size() < 2) throw ConfigError("mlp '" + name + "' needs at least two dimensions");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    layers.emplace_back(params, name + "." + std::to_string(i), dims[i], dims[i + 1], rng);
  }
}

Tensor Mlp::operator()(const Tensor& x) const {
  Tensor y = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    y = layers[i](y);
    if (i + 1 < layers.size() || activate_last) y = activate(y, act);
  }
  return y;
}

LstmCell::LstmCell(ParamSet& params, const std::string& name, std::size_t in, std::size_t hidden_size, Rng& rng)
    : hidden(hidden_size) {
  w_input = params.add(name + ".w_input", in, 4 * hidden);
  w_hidden = params.add(name + ".w_hidden", hidden, 4 * hidden);
  bias = params.add(name + ".bias", 1, 4 * hidden);
  init_uniform(w_input, 1.0 / std::sqrt(static_cast<double>(in)), rng);
  init_uniform(w_hidden, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
  auto b = bias.mutable_values();
  for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;  // forget gate
}

LstmState LstmCell::zero_state(std::size_t rows) const {
  return {Tensor::zeros(rows, hidden), Tensor::zeros(rows, hidden)};
}

LstmState LstmCell::step(const Tensor& x, const LstmState& state) const {
  const Tensor gates = add_row(add(matmul(x, w_input), matmul(state.h, w_hidden)), bias);
  const Tensor i = sigmoid(slice_cols(gates, 0, hidden));
  const Tensor f = sigmoid(slice_cols(gates, hidden, hidden));
  const Tensor g = tanh(slice_cols(gates, 2 * hidden, hidden));
  const Tensor o = sigmoid(slice_cols(gates, 3 * hidden, hidden));
  const Tensor c = add(mul(f, state.c), mul(i, g));
  return {mul(o, tanh(c)), c};
}

MultiHeadAttention::MultiHeadAttention(ParamSet& params, const std::string& name, std::size_t dim,
                                       std::size_t n_heads, Rng& rng)
    : query(params, name + ".query", dim, dim, rng),
      key(params, name + ".key", dim, dim, rng),
      value(params, name + ".value", dim, dim, rng),
      output(params, name + ".output", dim, dim, rng),
      heads(n_heads) {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("attention dim " + std::to_string(dim) + " not divisible by " + std::to_string(heads) + " heads");
  }
}

Tensor MultiHeadAttention::operator()(const Tensor& x, std::size_t seq_len, std::vector<Tensor>* weights) const {
  if (seq_len == 0 || x.rows() % seq_len != 0) {
    throw DimensionError("attention: " + std::to_string(x.rows()) + " rows is not a multiple of sequence length " +
                         std::to_string(seq_len));
  }
  const std::size_t dim = x.cols();
  const std::size_t head_dim = dim / heads;
  const std::size_t n_seq = x.rows() / seq_len;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  const Tensor q = query(x), k = key(x), v = value(x);
  std::vector<Tensor> outs;
  outs.reserve(heads);
  if (weights) weights->clear();
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = slice_cols(q, h * head_dim, head_dim);
    const Tensor kh = slice_cols(k, h * head_dim, head_dim);
    const Tensor vh = slice_cols(v, h * head_dim, head_dim);
    const Tensor p = softmax_rows(scale(batched_matmul(qh, kh, n_seq, true), inv_sqrt));
    if (weights) weights->push_back(p);
    outs.push_back(batched_matmul(p, vh, n_seq, false));
  }
  return output(heads == 1 ? outs.front() : concat(outs, 1));
}

TransformerLayer::TransformerLayer(ParamSet& params, const std::string& name, std::size_t dim, std::size_t heads,
                                   std::size_t ff_dim, Activation activation, Rng& rng)
    : attention(params, name + ".attention", dim, heads, rng), act(activation) {
  norm1_gain = params.add(name + ".norm1.gain", 1, dim);
  norm1_bias = params.add(name + ".norm1.bias", 1, dim);
  ff1 = Linear(params, name + ".ff1", dim, ff_dim, rng);
  ff2 = Linear(params, name + ".ff2", ff_dim, dim, rng);
  norm2_gain = params.add(name + ".norm2.gain", 1, dim);
  norm2_bias = params.add(name + ".norm2.bias", 1, dim);
  for (double& g : norm1_gain.mutable_values()) g = 1.0;
  for (double& g : norm2_gain.mutable_values()) g = 1.0;
}

Tensor TransformerLayer::operator()(const Tensor& x, std::size_t seq_len) const {
  const Tensor a = add(x, attention(x, seq_len));
  const Tensor x1 = add_row(mul_row(layer_norm_rows(a), norm1_gain), norm1_bias);
  const Tensor f = add(x1, ff2(activate(ff1(x1), act)));
  return add_row(mul_row(layer_norm_rows(f), norm2_gain), norm2_bias);
}

Tensor positional_encoding(std::size_t seq_len, std::size_t dim) {
  std::vector<double> pe(seq_len * dim);
  for (std::size_t t = 0; t < seq_len; ++t) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(dim));
      pe[t * dim + i] = i % 2 == 0 ? std::sin(static_cast<double>(t) * freq) : std::cos(static_cast<double>(t) * freq);
    }
  }
  return Tensor::from(seq_len, dim, std::move(pe));
}

// ---- encoder ---------------------------------------------------------------

SequenceEncoder::SequenceEncoder(ParamSet& params, const std::string& name, const ModelConfig& config, Rng& rng)
    : config_(config) {
  const bool class_in_spatial = config.use_labels && config.class_in_spatial;
  spatial_ = Linear(params, name + ".spatial", 2 + (class_in_spatial ? kNumClasses : 0), config.embed_dim, rng);
  if (config.use_labels) {
    class_embed_ = Linear(params, name + ".class_embedding", kNumClasses, config.class_embed_dim, rng);
  }
  if (config.encoder == EncoderKind::lstm) {
    lstm_ = LstmCell(params, name + ".lstm", embedding_dim(), config.hidden_dim, rng);
  } else {
    input_proj_ = Linear(params, name + ".input_proj", embedding_dim(), config.hidden_dim, rng);
    for (std::size_t l = 0; l < config.transformer_layers; ++l) {
      layers_.emplace_back(params, name + ".layer" + std::to_string(l), config.hidden_dim, config.transformer_heads,
                           config.ff_dim, config.activation, rng);
    }
  }
}

std::size_t SequenceEncoder::embedding_dim() const {
  return config_.embed_dim + (config_.use_labels ? config_.class_embed_dim : 0);
}

Tensor SequenceEncoder::embed(const Tensor& coords, const Tensor& one_hot) const {
  if (coords.cols() != 2) throw ConfigError("embed: coordinates must have 2 columns, got " + coords.shape_string());
  if (!config_.use_labels) return spatial_(coords);
  if (one_hot.rows() != coords.rows() || one_hot.cols() != kNumClasses) {
    throw ConfigError("embed: class one-hot " + one_hot.shape_string() + " does not match coordinates " +
                      coords.shape_string());
  }
  const Tensor s = spatial_(config_.class_in_spatial ? concat({coords, one_hot}, 1) : coords);
  return concat({s, class_embed_(one_hot)}, 1);
}

Tensor SequenceEncoder::lstm_encode(const std::vector<Tensor>& embedded) const {
  if (embedded.empty()) throw ContractError("lstm_encode: empty sequence");
  LstmState state = lstm_.zero_state(embedded.front().rows());
  for (const auto& e : embedded) state = lstm_.step(e, state);
  return state.h;
}

Tensor SequenceEncoder::transformer_encode(const Tensor& embedded, std::size_t seq_len) const {
  if (seq_len == 0 || embedded.rows() % seq_len != 0) {
    throw ContractError("transformer_encode: rows not a multiple of the sequence length");
  }
  const std::size_t n = embedded.rows() / seq_len;
  const Tensor pe = positional_encoding(seq_len, config_.hidden_dim);
  std::vector<std::size_t> tile(n * seq_len);
  for (std::size_t i = 0; i < tile.size(); ++i) tile[i] = i % seq_len;
  Tensor x = add(input_proj_(embedded), gather_rows(pe, tile));
  for (const auto& layer : layers_) x = layer(x, seq_len);

  std::vector<std::size_t> pick(n);
  if (!config_.transformer_mean_pool) {
    for (std::size_t i = 0; i < n; ++i) pick[i] = i * seq_len + seq_len - 1;
    return gather_rows(x, pick);
  }
  Tensor total;
  for (std::size_t t = 0; t < seq_len; ++t) {
    for (std::size_t i = 0; i < n; ++i) pick[i] = i * seq_len + t;
    total = t == 0 ? gather_rows(x, pick) : add(total, gather_rows(x, pick));
  }
  return scale(total, 1.0 / static_cast<double>(seq_len));
}

Tensor SequenceEncoder::encode(const std::vector<Tensor>& steps, const Tensor& one_hot) const {
  if (steps.empty()) throw ContractError("encode: empty sequence");
  if (config_.encoder == EncoderKind::lstm) {
    std::vector<Tensor> embedded;
    embedded.reserve(steps.size());
    for (const auto& s : steps) embedded.push_back(embed(s, one_hot));
    return lstm_encode(embedded);
  }
  const std::size_t n = steps.front().rows();
  const std::size_t t_len = steps.size();
  std::vector<std::size_t> to_seq(n * t_len), agent(n * t_len);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < t_len; ++t) {
      to_seq[i * t_len + t] = t * n + i;
      agent[i * t_len + t] = i;
    }
  }
  const Tensor coords = gather_rows(concat(steps, 0), to_seq);
  const Tensor labels = config_.use_labels ? gather_rows(one_hot, agent) : Tensor{};
  return transformer_encode(embed(coords, labels), t_len);
}

// ---- batches ---------------------------------------------------------------

Batch make_batch(std::span<const SceneWindow> windows, std::size_t t_obs, std::size_t t_pred) {
  Batch b;
  b.t_obs = t_obs;
  b.t_pred = t_pred;
  std::vector<const WindowAgent*> agents;
  for (const auto& w : windows) {
    std::vector<std::size_t> group;
    for (const auto& a : w.agents) {
      if (a.observed.size() != t_obs || a.future.size() != t_pred) {
        throw ContractError("window '" + w.scene_id + "' agent " + std::to_string(a.agent_id) + " has " +
                            std::to_string(a.observed.size()) + "+" + std::to_string(a.future.size()) +
                            " points, model expects " + std::to_string(t_obs) + "+" + std::to_string(t_pred));
      }
      group.push_back(agents.size());
      agents.push_back(&a);
    }
    b.groups.push_back(std::move(group));
  }
  const std::size_t n = agents.size();
  if (n == 0) throw ContractError("make_batch: no agents");
  b.n_agents = n;
  auto step_tensor = [&](bool future, std::size_t t) {
    std::vector<double> v(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
      const Point& p = future ? agents[i]->future[t] : agents[i]->observed[t];
      v[2 * i] = p.x;
      v[2 * i + 1] = p.y;
    }
    return Tensor::from(n, 2, std::move(v));
  };
  for (std::size_t t = 0; t < t_obs; ++t) b.observed.push_back(step_tensor(false, t));
  for (std::size_t t = 0; t < t_pred; ++t) b.future.push_back(step_tensor(true, t));
  std::vector<double> oh(n * kNumClasses, 0.0), flat(n * 2 * t_pred);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = agents[i]->label;
    class_name(label);
    oh[i * kNumClasses + static_cast<std::size_t>(label)] = 1.0;
    b.labels.push_back(label);
    for (std::size_t t = 0; t < t_pred; ++t) {
      flat[i * 2 * t_pred + 2 * t] = agents[i]->future[t].x;
      flat[i * 2 * t_pred + 2 * t + 1] = agents[i]->future[t].y;
    }
  }
  b.one_hot = Tensor::from(n, kNumClasses, std::move(oh));
  b.future_flat = Tensor::from(n, 2 * t_pred, std::move(flat));
  return b;
}

std::vector<Tensor> displacements(const std::vector<Tensor>& steps, double scale_by) {
  std::vector<Tensor> out;
  if (steps.empty()) return out;
  out.reserve(steps.size());
  out.push_back(Tensor::zeros(steps.front().rows(), steps.front().cols()));
  for (std::size_t t = 1; t < steps.size(); ++t) {
    out.push_back(scale(sub(steps[t], steps[t - 1]), 1.0 / scale_by));
  }
  return out;
}

std::vector<Tensor> join_trajectory(const std::vector<Tensor>& observed, const std::vector<Tensor>& future) {
  std::vector<Tensor> out = observed;
  out.insert(out.end(), future.begin(), future.end());
  return out;
}

std::vector<Tensor> first_rows(const std::vector<Tensor>& steps, std::size_t n) {
  std::vector<Tensor> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.rows() == n ? s : slice_rows(s, 0, n));
  return out;
}

// ---- pooling ---------------------------------------------------------------

PoolingModule::PoolingModule(ParamSet& params, const std::string& name, const ModelConfig& config, Rng& rng)
    : out_dim_(config.pool_dim),
      rel_embed_(params, name + ".rel_embedding", 2, config.embed_dim, rng),
      mlp_(params, name + ".mlp", {config.embed_dim + config.hidden_dim, config.mlp_dim, config.pool_dim},
           config.activation, true, rng) {}

Tensor PoolingModule::operator()(const Tensor& hidden, const Tensor& positions,
                                 const std::vector<std::vector<std::size_t>>& groups) const {
  const std::size_t n = hidden.rows();
  if (positions.rows() != n || positions.cols() != 2) {
    throw DimensionError("pool: positions " + positions.shape_string() + " do not match hidden " + hidden.shape_string());
  }
  std::vector<std::vector<std::size_t>> neighbours(n);
  for (const auto& g : groups) {
    for (std::size_t i : g) {
      if (i >= n) throw DimensionError("pool: agent index out of range");
      for (std::size_t j : g) {
        if (j != i) neighbours[i].push_back(j);
      }
    }
  }
  std::vector<std::size_t> offsets{0}, others;
  std::vector<double> rel;
  const auto pos = positions.values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : neighbours[i]) {
      others.push_back(j);
      rel.push_back(pos[2 * j] - pos[2 * i]);
      rel.push_back(pos[2 * j + 1] - pos[2 * i + 1]);
    }
    offsets.push_back(others.size());
  }
  if (others.empty()) return Tensor::zeros(n, out_dim_);
  const Tensor rel_t = Tensor::from(others.size(), 2, std::move(rel));
  const Tensor features = concat({rel_embed_(rel_t), gather_rows(hidden, others)}, 1);
  return group_max(mlp_(features), offsets);
}

// ---- generator -------------------------------------------------------------

std::vector<Point> PredictionSet::trajectory(std::size_t agent, std::size_t sample) const {
  if (agent >= n_agents || sample >= k) throw ContractError("trajectory: index out of range");
  std::vector<Point> out;
  out.reserve(t_pred);
  const std::size_t row = sample * n_agents + agent;
  for (const auto& s : steps) out.push_back({s.at(row, 0), s.at(row, 1)});
  return out;
}

Tensor draw_noise(std::size_t k, std::size_t n_agents, std::size_t noise_dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> z(k * n_agents * noise_dim);
  for (double& v : z) v = normal(rng);
  return Tensor::from(k * n_agents, noise_dim, std::move(z));
}

Generator::Generator(const ModelConfig& config) : config_(config) {
  config_.validate();
  Rng rng(config_.init_seed);
  encoder_ = SequenceEncoder(params_, "generator.encoder", config_, rng);
  pooling_ = PoolingModule(params_, "generator.pool", config_, rng);
  context_ = Mlp(params_, "generator.context",
                 {config_.hidden_dim + config_.pool_dim + config_.noise_dim, config_.mlp_dim, config_.hidden_dim},
                 config_.activation, false, rng);
  decoder_embed_ = Linear(params_, "generator.decoder_embedding", 2, config_.embed_dim, rng);
  decoder_ = LstmCell(params_, "generator.decoder", config_.embed_dim, config_.hidden_dim, rng);
  head_ = Linear(params_, "generator.head", config_.hidden_dim, 2, rng);
}

Tensor Generator::encode(const Batch& batch) const {
  return encoder_.encode(displacements(batch.observed, config_.coord_scale), batch.one_hot);
}

Tensor Generator::pool(const Batch& batch, const Tensor& hidden) const {
  return pooling_(hidden, scale(batch.observed.back(), 1.0 / config_.coord_scale), batch.groups);
}

std::vector<Tensor> Generator::decode(const Tensor& hidden, const Tensor& pooled, const Tensor& noise,
                                      const Tensor& last_pos, const Tensor& last_step, std::size_t k) const {
  const std::size_t n = hidden.rows();
  if (noise.rows() != k * n || noise.cols() != config_.noise_dim) {
    throw DimensionError("decode: noise " + noise.shape_string() + " does not match k=" + std::to_string(k) +
                         " x " + std::to_string(n) + " agents x noise_dim " + std::to_string(config_.noise_dim));
  }
  const auto rep = repeat_index(n, k);
  LstmState state{context_(concat({gather_rows(hidden, rep), gather_rows(pooled, rep), noise}, 1)),
                  Tensor::zeros(n * k, config_.hidden_dim)};
  Tensor pos = gather_rows(last_pos, rep);
  Tensor prev = gather_rows(last_step, rep);
  std::vector<Tensor> steps;
  steps.reserve(config_.t_pred);
  const Tensor origin = pos;
  const Tensor velocity = prev;
  for (std::size_t t = 0; t < config_.t_pred; ++t) {
    state = decoder_.step(decoder_embed_(prev), state);
    if (config_.cv_residual) {
      // Offset from the constant-velocity extrapolation of the last observed step.
      const Tensor cv = add(origin, scale(velocity, config_.coord_scale * static_cast<double>(t + 1)));
      const Tensor next = add(cv, scale(head_(state.h), config_.coord_scale));
      prev = scale(sub(next, pos), 1.0 / config_.coord_scale);
      pos = next;
    } else {
      prev = head_(state.h);
      pos = add(pos, scale(prev, config_.coord_scale));
    }
    steps.push_back(pos);
  }
  return steps;
}

PredictionSet Generator::forward(const Batch& batch, std::size_t k, Rng& rng) const {
  return forward_with_noise(batch, draw_noise(k, batch.n_agents, config_.noise_dim, rng), k);
}

PredictionSet Generator::forward_with_noise(const Batch& batch, const Tensor& noise, std::size_t k) const {
  if (k == 0) throw ContractError("generator: k must be >= 1");
  if (batch.t_obs != config_.t_obs || batch.t_pred != config_.t_pred) {
    throw ContractError("generator: batch horizon " + std::to_string(batch.t_obs) + "+" + std::to_string(batch.t_pred) +
                        " does not match model " + std::to_string(config_.t_obs) + "+" + std::to_string(config_.t_pred));
  }
  const Tensor hidden = encode(batch);
  const Tensor pooled = pool(batch, hidden);
  const auto& obs = batch.observed;
  const Tensor last_step = obs.size() >= 2 ? scale(sub(obs.back(), obs[obs.size() - 2]), 1.0 / config_.coord_scale)
                                           : Tensor::zeros(batch.n_agents, 2);
  PredictionSet out;
  out.k = k;
  out.n_agents = batch.n_agents;
  out.t_pred = config_.t_pred;
  out.noise = noise;
  out.steps = decode(hidden, pooled, noise, obs.back(), last_step, k);
  out.flat = concat(out.steps, 1);
  return out;
}

// ---- discriminator ---------------------------------------------------------

Discriminator::Discriminator(const ModelConfig& config) : config_(config) {
  config_.validate();
  Rng rng(config_.init_seed ^ 0x9e3779b97f4a7c15ULL);
  encoder_ = SequenceEncoder(params_, "discriminator.encoder", config_, rng);
  hidden_ = Linear(params_, "discriminator.classifier.0", config_.hidden_dim, config_.mlp_dim, rng);
  out_ = Linear(params_, "discriminator.classifier.1", config_.mlp_dim, 1, rng);
}

DiscriminatorOutput Discriminator::score(const std::vector<Tensor>& trajectory, const Tensor& one_hot) const {
  const std::size_t expected = config_.t_obs + config_.t_pred;
  if (trajectory.size() != expected) {
    throw ContractError("discriminator: trajectory has " + std::to_string(trajectory.size()) + " steps, expected " +
                        std::to_string(expected));
  }
  DiscriminatorOutput out;
  const Tensor h = encoder_.encode(displacements(trajectory, config_.coord_scale), one_hot);
  out.hidden_pre = hidden_(h);
  out.logit = out_(activate(out.hidden_pre, config_.activation));
  out.prob = sigmoid(out.logit);
  return out;
}

std::vector<std::vector<double>> class_embedding_matrix(const Generator& generator) {
  if (!generator.config().use_labels) throw UnavailableError("model trained without class embeddings");
  const Linear& ce = generator.encoder().class_embedding();
  const std::size_t d = ce.weight.cols();
  std::vector<std::vector<double>> rows(kNumClasses, std::vector<double>(d));
  for (std::size_t c = 0; c < kNumClasses; ++c)
    for (std::size_t j = 0; j < d; ++j) rows[c][j] = ce.weight.at(c, j) + ce.bias.at(0, j);
  return rows;
}

}  // namespace trajgan
