#pragma once

// Stanford-Drone-format annotation parsing, windowing and splitting, plus
// synthetic multi-class scene generation.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace trajgan {

inline constexpr std::size_t kNumClasses = 6;

// Canonical alphabetical order; one-hot index == position in this list.
inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "bicyclist", "bus", "car", "golf cart", "pedestrian", "skateboarder"};

namespace cls {
inline constexpr int bicyclist = 0;
inline constexpr int bus = 1;
inline constexpr int car = 2;
inline constexpr int golf_cart = 3;
inline constexpr int pedestrian = 4;
inline constexpr int skateboarder = 5;
}  // namespace cls

std::string_view class_name(int index);
// Case-insensitive; accepts dataset spellings such as "Biker", "Skater", "Cart".
std::optional<int> normalize_label(std::string_view raw);
std::array<double, kNumClasses> one_hot(int index);

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

struct BBox {
  double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;
  bool operator==(const BBox&) const = default;
};

Point bbox_center(const BBox& box);

struct RawAnnotation {
  std::int64_t track_id = 0;
  std::int64_t frame = 0;
  BBox bbox;
  bool lost = false;
  bool occluded = false;
  bool generated = false;
  int label = 0;
  bool operator==(const RawAnnotation&) const = default;
};

// One record per line: track_id xmin ymin xmax ymax frame lost occluded
// generated "label". Lost records are dropped; occluded ones are kept.
std::vector<RawAnnotation> parse_annotations(std::istream& in);
std::string format_annotation(const RawAnnotation& a);

struct TrackPoint {
  std::int64_t frame = 0;
  double x = 0.0;
  double y = 0.0;
  bool operator==(const TrackPoint&) const = default;
};

struct AgentTrack {
  std::int64_t track_id = 0;
  int label = 0;
  std::vector<TrackPoint> points;  // strictly increasing frames
};

// Groups annotations by track id (bbox centers, frames sorted). A track's
// class is the label of its first record.
std::vector<AgentTrack> tracks_from_annotations(std::span<const RawAnnotation> annotations);

// Keeps frames with frame % stride == 0 and splits the result at gaps so that
// each returned track has consecutive frames exactly `stride` apart.
std::vector<AgentTrack> subsample(const AgentTrack& track, std::int64_t stride);

struct WindowAgent {
  std::int64_t agent_id = 0;
  int label = 0;
  std::vector<Point> observed;
  std::vector<Point> future;
};

struct SceneWindow {
  std::string scene_id;
  std::int64_t start_frame = 0;
  std::vector<WindowAgent> agents;
};

struct WindowOptions {
  std::size_t t_obs = 8;
  std::size_t t_pred = 12;
  std::int64_t frame_step = 1;      // frame spacing of the (subsampled) tracks
  std::size_t window_stride = 1;    // in subsampled frames
};

// Sliding windows over the scene timeline; each window holds exactly the
// agents present at all t_obs + t_pred frames. Empty windows are skipped.
std::vector<SceneWindow> build_windows(std::span<const AgentTrack> tracks, const std::string& scene_id,
                                       const WindowOptions& options = {});

struct DatasetSplit {
  std::vector<SceneWindow> train;
  std::vector<SceneWindow> val;
  std::vector<SceneWindow> test;
};

// Seeded shuffle, then 8:1:1 by count.
DatasetSplit split_dataset(std::vector<SceneWindow> windows, std::uint64_t seed);

struct RelativeTrack {
  Point origin;
  std::vector<Point> deltas;
};

RelativeTrack to_relative(std::span<const Point> points);
std::vector<Point> from_relative(const RelativeTrack& rel);
// Observed followed by future points of every agent.
std::vector<RelativeTrack> to_relative(const SceneWindow& window);

// ---- synthetic scenes ------------------------------------------------------

enum class SynthKind { linear, turn, roundabout };

SynthKind synth_kind_from_string(const std::string& name);
std::string to_string(SynthKind kind);

struct SynthOptions {
  std::size_t t_obs = 8;
  std::size_t t_pred = 12;
  std::size_t frames = 0;   // timeline length; 0 means exactly t_obs + t_pred
  double jitter = 0.0;      // std-dev of Gaussian position noise
  double base_speed = 1.0;  // pedestrian speed per frame
  double roundabout_radius = 12.0;
};

// Per-class speed multiplier used by the generator (pedestrian == 1).
double class_speed(int label);
// Per-class angular velocity magnitude (rad/frame) used by turn scenes.
double class_turn_rate(int label);

// Deterministic scene of `n_agents` agents. Agent classes cycle through
// `classes` (all six when empty). The timeline is cut into windows.
std::vector<SceneWindow> synth_scene(SynthKind kind, std::size_t n_agents, std::span<const int> classes,
                                     std::uint64_t seed, const SynthOptions& options = {});

// ---- files -----------------------------------------------------------------

struct ClassHistogram {
  std::array<std::size_t, kNumClasses> counts{};
  std::size_t total() const;
  double percent(int label) const;
};

struct LoadedDataset {
  std::vector<SceneWindow> windows;
  ClassHistogram tracks_per_class;
  std::vector<std::string> scene_ids;
};

struct SddOptions {
  std::int64_t frame_stride = 12;  // 30 fps -> 2.5 Hz
  WindowOptions windows;
};

// Walks root/<scene>/<video>/annotations.txt. Throws DataError listing every
// failing file, or the expected layout when nothing is found.
LoadedDataset load_sdd_directory(const std::filesystem::path& root, const SddOptions& options = {});

// Columns: scene_id,window_id,agent_id,class_index,t,x,y,is_future
void write_windows_csv(std::ostream& out, std::span<const SceneWindow> windows);
std::vector<SceneWindow> read_windows_csv(std::istream& in, std::size_t t_obs);

}  // namespace trajgan
