#include "trajgan/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "trajgan/error.hpp"

namespace trajgan {

using nlohmann::json;

namespace {

// Reads known keys from one object and rejects everything else.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(label() + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + full(key) + "' has the wrong type: " + it->dump());
    }
  }

  void get_size(const char* key, std::size_t& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!it->is_number_integer() || (it->is_number_integer() && it->get<std::int64_t>() < 0)) {
      throw ConfigError("config key '" + full(key) + "' must be a non-negative integer, got " + it->dump());
    }
    out = it->get<std::size_t>();
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string full(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown config key '" + full(it.key()) + "'");
    }
  }

 private:
  std::string label() const { return path_.empty() ? "config" : "config section '" + path_ + "'"; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class Enum, class Parse>
void get_enum(Section& s, const char* key, Enum& out, Parse parse) {
  std::string name;
  bool present = false;
  if (const json* v = s.child(key)) {
    if (!v->is_string()) throw ConfigError("config key '" + s.full(key) + "' must be a string");
    name = v->get<std::string>();
    present = true;
  }
  if (present) out = parse(name);
}

json model_json(const ModelConfig& m) {
  return {{"encoder", to_string(m.encoder)},
          {"use_labels", m.use_labels},
          {"class_in_spatial", m.class_in_spatial},
          {"embed_dim", m.embed_dim},
          {"class_embed_dim", m.class_embed_dim},
          {"hidden_dim", m.hidden_dim},
          {"noise_dim", m.noise_dim},
          {"mlp_dim", m.mlp_dim},
          {"pool_dim", m.pool_dim},
          {"ff_dim", m.ff_dim},
          {"transformer_heads", m.transformer_heads},
          {"transformer_layers", m.transformer_layers},
          {"transformer_mean_pool", m.transformer_mean_pool},
          {"activation", to_string(m.activation.kind)},
          {"leaky_slope", m.activation.slope},
          {"k_samples", m.k_samples},
          {"t_obs", m.t_obs},
          {"t_pred", m.t_pred},
          {"coord_scale", m.coord_scale},
          {"cv_residual", m.cv_residual}};
}

void read_model(const json& j, ModelConfig& m) {
  Section s(j, "model");
  get_enum(s, "encoder", m.encoder, encoder_kind_from_string);
  s.get("use_labels", m.use_labels);
  s.get("class_in_spatial", m.class_in_spatial);
  s.get_size("embed_dim", m.embed_dim);
  s.get_size("class_embed_dim", m.class_embed_dim);
  s.get_size("hidden_dim", m.hidden_dim);
  s.get_size("noise_dim", m.noise_dim);
  s.get_size("mlp_dim", m.mlp_dim);
  s.get_size("pool_dim", m.pool_dim);
  s.get_size("ff_dim", m.ff_dim);
  s.get_size("transformer_heads", m.transformer_heads);
  s.get_size("transformer_layers", m.transformer_layers);
  s.get("transformer_mean_pool", m.transformer_mean_pool);
  get_enum(s, "activation", m.activation.kind, activation_from_string);
  s.get("leaky_slope", m.activation.slope);
  s.get_size("k_samples", m.k_samples);
  s.get_size("t_obs", m.t_obs);
  s.get_size("t_pred", m.t_pred);
  s.get("coord_scale", m.coord_scale);
  s.get("cv_residual", m.cv_residual);
  s.finish();
}

json train_json(const TrainConfig& t) {
  return {{"batch_size", t.batch_size}, {"lr", t.lr},
          {"epochs", t.epochs},         {"mode", to_string(t.mode)},
          {"d_steps", t.d_steps},       {"g_steps", t.g_steps},
          {"clip_norm", t.clip_norm},   {"adv_weight", t.adv_weight},
          {"variety_weight", t.variety_weight}, {"validate", t.validate}};
}

void read_train(const json& j, TrainConfig& t) {
  Section s(j, "train");
  s.get_size("batch_size", t.batch_size);
  s.get("lr", t.lr);
  s.get_size("epochs", t.epochs);
  get_enum(s, "mode", t.mode, train_mode_from_string);
  s.get_size("d_steps", t.d_steps);
  s.get_size("g_steps", t.g_steps);
  s.get("clip_norm", t.clip_norm);
  s.get("adv_weight", t.adv_weight);
  s.get("variety_weight", t.variety_weight);
  s.get("validate", t.validate);
  s.finish();
}

json data_json(const DataConfig& d) {
  json classes = json::array();
  for (int c : d.synthetic.classes) classes.push_back(std::string(class_name(c)));
  return {{"source", to_string(d.source)},
          {"root", d.root},
          {"frame_stride", d.frame_stride},
          {"window_stride", d.window_stride},
          {"synthetic",
           {{"kinds", d.synthetic.kinds},
            {"scenes", d.synthetic.scenes},
            {"agents_per_scene", d.synthetic.agents_per_scene},
            {"classes", classes},
            {"jitter", d.synthetic.jitter},
            {"base_speed", d.synthetic.base_speed},
            {"frames", d.synthetic.frames}}}};
}

void read_data(const json& j, DataConfig& d) {
  Section s(j, "data");
  get_enum(s, "source", d.source, data_source_from_string);
  s.get("root", d.root);
  s.get("frame_stride", d.frame_stride);
  s.get_size("window_stride", d.window_stride);
  if (const json* syn = s.child("synthetic")) {
    Section y(*syn, "data.synthetic");
    y.get("kinds", d.synthetic.kinds);
    y.get_size("scenes", d.synthetic.scenes);
    y.get_size("agents_per_scene", d.synthetic.agents_per_scene);
    std::vector<std::string> names;
    bool have_classes = y.child("classes") != nullptr;
    y.get("classes", names);
    if (have_classes) {
      d.synthetic.classes.clear();
      for (const auto& n : names) {
        auto label = normalize_label(n);
        if (!label) throw ConfigError("config key 'data.synthetic.classes' has unknown class '" + n + "'");
        d.synthetic.classes.push_back(*label);
      }
    }
    y.get("jitter", d.synthetic.jitter);
    y.get("base_speed", d.synthetic.base_speed);
    y.get_size("frames", d.synthetic.frames);
    y.finish();
  }
  s.finish();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::string to_string(DataSource source) {
  switch (source) {
    case DataSource::synthetic: return "synthetic";
    case DataSource::sdd: return "sdd";
    case DataSource::windows_csv: return "windows_csv";
  }
  return "synthetic";
}

DataSource data_source_from_string(const std::string& name) {
  if (name == "synthetic") return DataSource::synthetic;
  if (name == "sdd") return DataSource::sdd;
  if (name == "windows_csv") return DataSource::windows_csv;
  throw ConfigError("unknown data source '" + name + "' (synthetic, sdd, windows_csv)");
}

void ExperimentConfig::resolve() {
  model.init_seed = seed;
  train.seed = seed;
  model.validate();
  train.validate_config();
  if (data.frame_stride < 1) throw ConfigError("data.frame_stride must be >= 1");
  if (data.window_stride < 1) throw ConfigError("data.window_stride must be >= 1");
  if (data.source == DataSource::synthetic) {
    if (data.synthetic.kinds.empty()) throw ConfigError("data.synthetic.kinds must not be empty");
    for (const auto& k : data.synthetic.kinds) {
      try {
        synth_kind_from_string(k);
      } catch (const Error& e) {
        throw ConfigError(std::string("data.synthetic.kinds: ") + e.what());
      }
    }
    if (data.synthetic.scenes == 0 || data.synthetic.agents_per_scene == 0) {
      throw ConfigError("data.synthetic.scenes and agents_per_scene must be positive");
    }
  }
}

json to_json(const ExperimentConfig& c) {
  return {{"name", c.name},
          {"seed", c.seed},
          {"output_dir", c.output_dir},
          {"model", model_json(c.model)},
          {"train", train_json(c.train)},
          {"data", data_json(c.data)}};
}

ExperimentConfig experiment_from_json(const json& j) {
  ExperimentConfig c;
  Section s(j, "");
  s.get("name", c.name);
  if (const json* seed = s.child("seed")) {
    if (!seed->is_number_unsigned() && !(seed->is_number_integer() && seed->get<std::int64_t>() >= 0)) {
      throw ConfigError("config key 'seed' must be a non-negative integer, got " + seed->dump());
    }
    c.seed = seed->get<std::uint64_t>();
  }
  s.get("output_dir", c.output_dir);
  if (const json* m = s.child("model")) read_model(*m, c.model);
  if (const json* t = s.child("train")) read_train(*t, c.train);
  if (const json* d = s.child("data")) read_data(*d, c.data);
  s.finish();
  c.resolve();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return experiment_from_json(j);
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(config).dump(2) << '\n';
}

void apply_override(ExperimentConfig& config, const std::string& key, const std::string& value) {
  if (key.empty()) throw ConfigError("empty override key");
  json j = to_json(config);
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown config key '" + key + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;
  }
  if (node->is_string() && !parsed.is_string()) parsed = value;
  *node = parsed;
  config = experiment_from_json(j);
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
  return out;
}

std::string config_hash(const ExperimentConfig& config) {
  nlohmann::json j = to_json(config);
  j.erase("output_dir");
  return fnv1a_hex(j.dump());
}

std::string resolved_data_root(const ExperimentConfig& config) {
  if (const char* env = std::getenv(kDataRootEnv); env && *env) return env;
  return config.data.root;
}

std::vector<SceneWindow> load_windows(const ExperimentConfig& config) {
  const auto& d = config.data;
  const std::string root = resolved_data_root(config);

  switch (d.source) {
    case DataSource::synthetic: {
      SynthOptions so;
      so.t_obs = config.model.t_obs;
      so.t_pred = config.model.t_pred;
      so.frames = d.synthetic.frames;
      so.jitter = d.synthetic.jitter;
      so.base_speed = d.synthetic.base_speed;
      std::vector<SceneWindow> out;
      for (std::size_t s = 0; s < d.synthetic.scenes; ++s) {
        const SynthKind kind = synth_kind_from_string(d.synthetic.kinds[s % d.synthetic.kinds.size()]);
        // Rotate the class cycle per scene so every class appears even when
        // scenes hold fewer agents than there are classes.
        std::vector<int> classes = d.synthetic.classes;
        if (classes.empty())
          for (int c = 0; c < static_cast<int>(kNumClasses); ++c) classes.push_back(c);
        std::rotate(classes.begin(), classes.begin() + static_cast<std::ptrdiff_t>(
                                                           (s * d.synthetic.agents_per_scene) % classes.size()),
                    classes.end());
        auto w = synth_scene(kind, d.synthetic.agents_per_scene, classes, mix(config.seed, s), so);
        out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
      }
      return out;
    }
    case DataSource::sdd: {
      if (root.empty()) throw ConfigError("data.root is empty; set it or TRAJGAN_DATA_ROOT");
      SddOptions so;
      so.frame_stride = d.frame_stride;
      so.windows.t_obs = config.model.t_obs;
      so.windows.t_pred = config.model.t_pred;
      so.windows.window_stride = d.window_stride;
      return load_sdd_directory(root, so).windows;
    }
    case DataSource::windows_csv: {
      if (root.empty()) throw ConfigError("data.root is empty; set it or TRAJGAN_DATA_ROOT");
      std::ifstream in(root, std::ios::binary);
      if (!in) throw DataError("cannot open windows file " + root);
      return read_windows_csv(in, config.model.t_obs);
    }
  }
  return {};
}

DatasetSplit load_split(const ExperimentConfig& config) { return split_dataset(load_windows(config), config.seed); }

}  // namespace trajgan
