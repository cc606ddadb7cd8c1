#pragma once

// Output writers: CSV tables, a fixed-width text table, SVG charts and run
// manifests.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trajgan/data.hpp"
#include "trajgan/eval.hpp"

namespace trajgan {

// name,k,n_trajectories,ade,fde,fde_mean_abs,source ("measured" rows first,
// then the reported reference rows marked "reported, not reproduced").
void write_eval_csv(std::ostream& out, std::span<const EvalReport> reports);
// name,k,class,n,ade,fde
void write_per_class_csv(std::ostream& out, std::span<const EvalReport> reports);
std::string format_eval_table(std::span<const EvalReport> reports);

// class,tracks,percent
void write_histogram_csv(std::ostream& out, const ClassHistogram& histogram);
std::string format_histogram(const ClassHistogram& histogram);

// class,pc1,pc2
void write_pca_csv(std::ostream& out, const PcaResult& pca);
// class followed by one column per class.
void write_matrix_csv(std::ostream& out, const std::vector<std::vector<double>>& matrix);

struct SvgPoint {
  std::string label;
  double x = 0.0;
  double y = 0.0;
};

std::string svg_scatter(const std::string& title, std::span<const SvgPoint> points);
std::string svg_bars(const std::string& title, std::span<const std::pair<std::string, double>> bars);

// Checksums of the files a run read, keyed by path.
nlohmann::json file_checksums(std::span<const std::filesystem::path> files);
std::string file_checksum(const std::filesystem::path& file);

// Writes text to `path`, replacing it atomically. Throws IoError.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace trajgan
