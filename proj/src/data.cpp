#include "trajgan/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "trajgan/error.hpp"

namespace trajgan {

namespace fs = std::filesystem;

std::string_view class_name(int index) {
  if (index < 0 || index >= static_cast<int>(kNumClasses)) {
    throw VocabularyError("class index " + std::to_string(index) + " outside [0, 6)");
  }
  return kClassNames[static_cast<std::size_t>(index)];
}

std::optional<int> normalize_label(std::string_view raw) {
  std::string s;
  for (char c : raw) {
    if (c == '"') continue;
    s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  std::replace(s.begin(), s.end(), '_', ' ');
  static const std::map<std::string, int, std::less<>> aliases = {
      {"pedestrian", cls::pedestrian}, {"biker", cls::bicyclist},     {"bicyclist", cls::bicyclist},
      {"bicycle", cls::bicyclist},     {"skater", cls::skateboarder}, {"skateboarder", cls::skateboarder},
      {"car", cls::car},               {"bus", cls::bus},             {"cart", cls::golf_cart},
      {"golf cart", cls::golf_cart},   {"golfcart", cls::golf_cart}};
  auto it = aliases.find(s);
  if (it == aliases.end()) return std::nullopt;
  return it->second;
}

std::array<double, kNumClasses> one_hot(int index) {
  std::array<double, kNumClasses> v{};
  class_name(index);
  v[static_cast<std::size_t>(index)] = 1.0;
  return v;
}

Point bbox_center(const BBox& box) {
  return {(box.xmin + box.xmax) / 2.0, (box.ymin + box.ymax) / 2.0};
}

// ---- annotation parsing ----------------------------------------------------

namespace {

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename T>
bool parse_field(std::string_view tok, T& out) {
  const char* end = tok.data() + tok.size();
  auto res = std::from_chars(tok.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

bool parse_flag(std::string_view tok, bool& out) {
  int v = 0;
  if (!parse_field(tok, v) || (v != 0 && v != 1)) return false;
  out = v == 1;
  return true;
}

}  // namespace

std::vector<RawAnnotation> parse_annotations(std::istream& in) {
  static constexpr const char* kFields[] = {"track_id", "xmin",     "ymin",     "xmax",     "ymax",
                                            "frame",    "lost",     "occluded", "generated"};
  std::vector<RawAnnotation> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    const auto quote = line.find('"');
    if (quote == std::string::npos) throw ParseError("missing quoted label", line_no);
    const auto quote_end = line.find('"', quote + 1);
    if (quote_end == std::string::npos) throw ParseError("unterminated label quote", line_no);
    if (line.find_first_not_of(" \t", quote_end + 1) != std::string::npos) {
      throw ParseError("unexpected text after label", line_no);
    }
    const std::string label = line.substr(quote + 1, quote_end - quote - 1);

    std::istringstream head(line.substr(0, quote));
    std::vector<std::string> tokens;
    for (std::string tok; head >> tok;) tokens.push_back(tok);
    if (tokens.size() != 9) {
      throw ParseError("expected 9 numeric fields before the label, found " + std::to_string(tokens.size()),
                       line_no);
    }
    RawAnnotation a;
    double bbox[4];
    bool ok = parse_field(tokens[0], a.track_id);
    if (!ok) throw ParseError(std::string("bad ") + kFields[0] + " '" + tokens[0] + "'", line_no);
    for (int i = 0; i < 4; ++i) {
      if (!parse_field(tokens[static_cast<std::size_t>(i) + 1], bbox[i])) {
        throw ParseError(std::string("bad ") + kFields[i + 1] + " '" + tokens[static_cast<std::size_t>(i) + 1] + "'",
                         line_no);
      }
    }
    if (!parse_field(tokens[5], a.frame)) throw ParseError("bad frame '" + tokens[5] + "'", line_no);
    if (!parse_flag(tokens[6], a.lost)) throw ParseError("bad lost flag '" + tokens[6] + "'", line_no);
    if (!parse_flag(tokens[7], a.occluded)) throw ParseError("bad occluded flag '" + tokens[7] + "'", line_no);
    if (!parse_flag(tokens[8], a.generated)) throw ParseError("bad generated flag '" + tokens[8] + "'", line_no);
    a.bbox = {bbox[0], bbox[1], bbox[2], bbox[3]};
    if (a.bbox.xmin > a.bbox.xmax || a.bbox.ymin > a.bbox.ymax) {
      throw ParseError("bounding box has min greater than max", line_no);
    }
    auto cls_index = normalize_label(label);
    if (!cls_index) {
      throw VocabularyError("line " + std::to_string(line_no) + ": unknown label '" + label +
                            "' (expected one of pedestrian, biker/bicyclist, skater/skateboarder, car, bus, "
                            "cart/golf cart)");
    }
    a.label = *cls_index;
    if (a.lost) continue;
    out.push_back(a);
  }
  return out;
}

std::string format_annotation(const RawAnnotation& a) {
  std::string s = std::to_string(a.track_id) + " " + format_number(a.bbox.xmin) + " " +
                  format_number(a.bbox.ymin) + " " + format_number(a.bbox.xmax) + " " +
                  format_number(a.bbox.ymax) + " " + std::to_string(a.frame) + " " +
                  (a.lost ? "1" : "0") + " " + (a.occluded ? "1" : "0") + " " + (a.generated ? "1" : "0") +
                  " \"" + std::string(class_name(a.label)) + "\"";
  return s;
}

// ---- tracks and windows ----------------------------------------------------

std::vector<AgentTrack> tracks_from_annotations(std::span<const RawAnnotation> annotations) {
  std::map<std::int64_t, AgentTrack> by_id;
  for (const auto& a : annotations) {
    auto [it, inserted] = by_id.try_emplace(a.track_id);
    if (inserted) {
      it->second.track_id = a.track_id;
      it->second.label = a.label;
    }
    const Point c = bbox_center(a.bbox);
    it->second.points.push_back({a.frame, c.x, c.y});
  }
  std::vector<AgentTrack> out;
  out.reserve(by_id.size());
  for (auto& [id, track] : by_id) {
    auto& pts = track.points;
    std::stable_sort(pts.begin(), pts.end(), [](const TrackPoint& l, const TrackPoint& r) { return l.frame < r.frame; });
    // Keep the first record of any duplicated frame.
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const TrackPoint& l, const TrackPoint& r) { return l.frame == r.frame; }),
              pts.end());
    out.push_back(std::move(track));
  }
  return out;
}

std::vector<AgentTrack> subsample(const AgentTrack& track, std::int64_t stride) {
  if (stride < 1) throw ContractError("subsample: stride must be >= 1, got " + std::to_string(stride));
  std::vector<AgentTrack> out;
  for (const auto& p : track.points) {
    if (p.frame % stride != 0) continue;
    if (out.empty() || p.frame - out.back().points.back().frame != stride) {
      out.push_back(AgentTrack{track.track_id, track.label, {}});
    }
    out.back().points.push_back(p);
  }
  return out;
}

std::vector<SceneWindow> build_windows(std::span<const AgentTrack> tracks, const std::string& scene_id,
                                       const WindowOptions& options) {
  if (options.t_obs < 1 || options.t_pred < 1) throw ContractError("build_windows: t_obs and t_pred must be >= 1");
  if (options.frame_step < 1 || options.window_stride < 1) {
    throw ContractError("build_windows: frame_step and window_stride must be >= 1");
  }
  std::vector<SceneWindow> out;
  if (tracks.empty()) return out;
  const std::int64_t total = static_cast<std::int64_t>(options.t_obs + options.t_pred);
  const std::int64_t step = options.frame_step;

  std::int64_t first = 0, last = 0;
  bool any = false;
  for (const auto& t : tracks) {
    if (t.points.empty()) continue;
    for (std::size_t i = 1; i < t.points.size(); ++i) {
      if (t.points[i].frame - t.points[i - 1].frame != step) {
        throw ContractError("build_windows: track " + std::to_string(t.track_id) +
                            " is not contiguous at frame step " + std::to_string(step));
      }
    }
    if (!any) {
      first = t.points.front().frame;
      last = t.points.back().frame;
      any = true;
    }
    first = std::min(first, t.points.front().frame);
    last = std::max(last, t.points.back().frame);
  }
  if (!any) return out;

  const std::int64_t stride = static_cast<std::int64_t>(options.window_stride) * step;
  for (std::int64_t start = first; start + (total - 1) * step <= last; start += stride) {
    const std::int64_t end = start + (total - 1) * step;
    SceneWindow w;
    w.scene_id = scene_id;
    w.start_frame = start;
    for (const auto& t : tracks) {
      if (t.points.empty() || t.points.front().frame > start || t.points.back().frame < end) continue;
      if ((start - t.points.front().frame) % step != 0) continue;
      const auto offset = static_cast<std::size_t>((start - t.points.front().frame) / step);
      WindowAgent a;
      a.agent_id = t.track_id;
      a.label = t.label;
      for (std::size_t i = 0; i < static_cast<std::size_t>(total); ++i) {
        const auto& p = t.points[offset + i];
        (i < options.t_obs ? a.observed : a.future).push_back({p.x, p.y});
      }
      w.agents.push_back(std::move(a));
    }
    if (!w.agents.empty()) out.push_back(std::move(w));
  }
  return out;
}

DatasetSplit split_dataset(std::vector<SceneWindow> windows, std::uint64_t seed) {
  const std::size_t n = windows.size();
  if (n < 3) throw SplitError("split needs at least 3 windows, got " + std::to_string(n));
  std::mt19937_64 rng(seed);
  std::shuffle(windows.begin(), windows.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
  DatasetSplit split;
  auto it = std::make_move_iterator(windows.begin());
  split.train.assign(it, it + static_cast<std::ptrdiff_t>(n_train));
  split.val.assign(it + static_cast<std::ptrdiff_t>(n_train), it + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(it + static_cast<std::ptrdiff_t>(n_train + n_val), std::make_move_iterator(windows.end()));
  return split;
}

RelativeTrack to_relative(std::span<const Point> points) {
  RelativeTrack rel;
  if (points.empty()) return rel;
  rel.origin = points.front();
  for (std::size_t i = 1; i < points.size(); ++i) {
    rel.deltas.push_back({points[i].x - points[i - 1].x, points[i].y - points[i - 1].y});
  }
  return rel;
}

std::vector<Point> from_relative(const RelativeTrack& rel) {
  std::vector<Point> out{rel.origin};
  for (const auto& d : rel.deltas) out.push_back({out.back().x + d.x, out.back().y + d.y});
  return out;
}

std::vector<RelativeTrack> to_relative(const SceneWindow& window) {
  std::vector<RelativeTrack> out;
  out.reserve(window.agents.size());
  for (const auto& a : window.agents) {
    std::vector<Point> full = a.observed;
    full.insert(full.end(), a.future.begin(), a.future.end());
    out.push_back(to_relative(full));
  }
  return out;
}

// ---- synthetic scenes ------------------------------------------------------

SynthKind synth_kind_from_string(const std::string& name) {
  if (name == "linear") return SynthKind::linear;
  if (name == "turn") return SynthKind::turn;
  if (name == "roundabout") return SynthKind::roundabout;
  throw ConfigError("unknown synthetic scene kind '" + name + "' (linear, turn, roundabout)");
}

std::string to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::linear: return "linear";
    case SynthKind::turn: return "turn";
    case SynthKind::roundabout: return "roundabout";
  }
  return "unknown";
}

double class_speed(int label) {
  static constexpr std::array<double, kNumClasses> speed = {2.5, 3.5, 4.0, 3.0, 1.0, 1.6};
  class_name(label);
  return speed[static_cast<std::size_t>(label)];
}

double class_turn_rate(int label) {
  static constexpr std::array<double, kNumClasses> rate = {0.08, 0.04, 0.05, 0.06, 0.12, 0.10};
  class_name(label);
  return rate[static_cast<std::size_t>(label)];
}

std::vector<SceneWindow> synth_scene(SynthKind kind, std::size_t n_agents, std::span<const int> classes,
                                     std::uint64_t seed, const SynthOptions& options) {
  if (n_agents < 1) throw ContractError("synth_scene: n_agents must be >= 1");
  static constexpr double kPi = 3.14159265358979323846;
  const std::size_t total = options.t_obs + options.t_pred;
  const std::size_t frames = options.frames == 0 ? total : options.frames;
  if (frames < total) throw ContractError("synth_scene: frames shorter than one window");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<AgentTrack> tracks;
  for (std::size_t a = 0; a < n_agents; ++a) {
    const int label = classes.empty() ? static_cast<int>(a % kNumClasses) : classes[a % classes.size()];
    class_name(label);
    const double speed = options.base_speed * class_speed(label);
    AgentTrack track{static_cast<std::int64_t>(a), label, {}};

    const double heading0 = 2.0 * kPi * unit(rng);
    const double x0 = 100.0 * unit(rng) - 50.0;
    const double y0 = 100.0 * unit(rng) - 50.0;
    const double turn_sign = unit(rng) < 0.5 ? -1.0 : 1.0;

    const bool on_ring = kind == SynthKind::roundabout && label != cls::pedestrian && label != cls::skateboarder;
    double px = x0, py = y0, heading = heading0;
    for (std::size_t t = 0; t < frames; ++t) {
      const double ft = static_cast<double>(t);
      Point p;
      if (kind == SynthKind::linear || (kind == SynthKind::roundabout && !on_ring)) {
        // Roundabout crossers start closer in so their paths cut through the ring.
        const double shrink = kind == SynthKind::linear ? 1.0 : 0.3;
        p = {shrink * x0 + speed * ft * std::cos(heading0), shrink * y0 + speed * ft * std::sin(heading0)};
      } else if (kind == SynthKind::turn) {
        p = {px, py};
        px += speed * std::cos(heading);
        py += speed * std::sin(heading);
        heading += turn_sign * class_turn_rate(label);
      } else {
        // Counter-clockwise ring traffic at constant angular velocity.
        const double omega = speed / options.roundabout_radius;
        const double phase = heading0 + omega * ft;
        p = {options.roundabout_radius * std::cos(phase), options.roundabout_radius * std::sin(phase)};
      }
      if (options.jitter > 0.0) {
        p.x += options.jitter * noise(rng);
        p.y += options.jitter * noise(rng);
      }
      track.points.push_back({static_cast<std::int64_t>(t), p.x, p.y});
    }
    tracks.push_back(std::move(track));
  }
  WindowOptions wo;
  wo.t_obs = options.t_obs;
  wo.t_pred = options.t_pred;
  return build_windows(tracks, "synth-" + to_string(kind) + "-" + std::to_string(seed), wo);
}

// ---- files -----------------------------------------------------------------

std::size_t ClassHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

double ClassHistogram::percent(int label) const {
  const std::size_t t = total();
  return t == 0 ? 0.0 : 100.0 * static_cast<double>(counts[static_cast<std::size_t>(label)]) / static_cast<double>(t);
}

LoadedDataset load_sdd_directory(const fs::path& root, const SddOptions& options) {
  static const std::string kLayout =
      "expected layout: <root>/<scene_name>/<video_id>/annotations.txt";
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw DataError("input directory '" + root.string() + "' does not exist; " + kLayout);
  }
  std::vector<std::pair<std::string, fs::path>> files;
  std::vector<fs::path> scenes;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) scenes.push_back(e.path());
  }
  std::sort(scenes.begin(), scenes.end());
  for (const auto& scene : scenes) {
    std::vector<fs::path> videos;
    for (const auto& e : fs::directory_iterator(scene)) {
      if (e.is_directory()) videos.push_back(e.path());
    }
    std::sort(videos.begin(), videos.end());
    for (const auto& video : videos) {
      const fs::path file = video / "annotations.txt";
      if (fs::is_regular_file(file)) {
        files.emplace_back(scene.filename().string() + "/" + video.filename().string(), file);
      }
    }
  }
  if (files.empty()) throw DataError("no annotation files found under '" + root.string() + "'; " + kLayout);

  LoadedDataset out;
  std::vector<std::string> failures;
  for (const auto& [scene_id, file] : files) {
    std::ifstream in(file);
    if (!in) {
      failures.push_back(file.string() + ": cannot open");
      continue;
    }
    try {
      const auto annotations = parse_annotations(in);
      const auto tracks = tracks_from_annotations(annotations);
      std::vector<AgentTrack> pieces;
      for (const auto& t : tracks) {
        out.tracks_per_class.counts[static_cast<std::size_t>(t.label)] += 1;
        for (auto& piece : subsample(t, options.frame_stride)) pieces.push_back(std::move(piece));
      }
      WindowOptions wo = options.windows;
      wo.frame_step = options.frame_stride;
      auto windows = build_windows(pieces, scene_id, wo);
      out.windows.insert(out.windows.end(), std::make_move_iterator(windows.begin()),
                         std::make_move_iterator(windows.end()));
      out.scene_ids.push_back(scene_id);
    } catch (const DataError& e) {
      failures.push_back(file.string() + ": " + e.what());
    }
  }
  if (!failures.empty()) {
    std::string msg = std::to_string(failures.size()) + " annotation file(s) failed:";
    for (const auto& f : failures) msg += "\n  " + f;
    throw DataError(msg);
  }
  return out;
}

void write_windows_csv(std::ostream& out, std::span<const SceneWindow> windows) {
  out << "scene_id,window_id,agent_id,class_index,t,x,y,is_future\n";
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto& win = windows[w];
    if (win.scene_id.find(',') != std::string::npos) {
      throw DataError("scene id '" + win.scene_id + "' contains a comma");
    }
    for (const auto& a : win.agents) {
      std::size_t t = 0;
      for (const auto* part : {&a.observed, &a.future}) {
        const bool future = part == &a.future;
        for (const auto& p : *part) {
          out << win.scene_id << ',' << w << ',' << a.agent_id << ',' << a.label << ',' << t++ << ','
              << format_number(p.x) << ',' << format_number(p.y) << ',' << (future ? 1 : 0) << '\n';
        }
      }
    }
  }
}

std::vector<SceneWindow> read_windows_csv(std::istream& in, std::size_t t_obs) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) return {};
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "scene_id,window_id,agent_id,class_index,t,x,y,is_future") {
    throw ParseError("unexpected window CSV header '" + line + "'", line_no);
  }
  std::vector<SceneWindow> out;
  std::int64_t current_window = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 8) throw ParseError("expected 8 columns, found " + std::to_string(f.size()), line_no);
    std::int64_t window_id = 0, agent_id = 0;
    int label = 0, is_future = 0;
    std::size_t t = 0;
    Point p;
    if (!parse_field(f[1], window_id) || !parse_field(f[2], agent_id) || !parse_field(f[3], label) ||
        !parse_field(f[4], t) || !parse_field(f[5], p.x) || !parse_field(f[6], p.y) ||
        !parse_field(f[7], is_future)) {
      throw ParseError("malformed numeric column", line_no);
    }
    if (label < 0 || label >= static_cast<int>(kNumClasses)) {
      throw VocabularyError("line " + std::to_string(line_no) + ": class index " + f[3] + " out of range");
    }
    if (window_id != current_window) {
      out.push_back(SceneWindow{f[0], 0, {}});
      current_window = window_id;
    }
    auto& win = out.back();
    if (win.agents.empty() || win.agents.back().agent_id != agent_id || t == 0) {
      win.agents.push_back(WindowAgent{agent_id, label, {}, {}});
    }
    auto& a = win.agents.back();
    const std::size_t expected_t = a.observed.size() + a.future.size();
    if (t != expected_t || (is_future == 1) != (t >= t_obs)) {
      throw ParseError("time index " + std::to_string(t) + " out of sequence", line_no);
    }
    (is_future ? a.future : a.observed).push_back(p);
  }
  return out;
}

}  // namespace trajgan
