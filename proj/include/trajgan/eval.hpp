#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trajgan/data.hpp"

namespace trajgan {

class Generator;

// sqrt(mean over points of squared Euclidean error).
double rmse_trajectory(std::span<const Point> pred, std::span<const Point> truth);

struct TrajectoryPair {
  std::vector<Point> pred;
  std::vector<Point> truth;
};

// Mean of per-trajectory RMSE.
double ade(std::span<const TrajectoryPair> data);
// Root of the mean squared final-point error over trajectories.
double fde(std::span<const TrajectoryPair> data);
// Mean of absolute final-point errors, for comparison with other literature.
double fde_mean_abs(std::span<const TrajectoryPair> data);

struct ClassMetrics {
  std::size_t n = 0;
  double ade = 0.0;
  double fde = 0.0;
};

struct EvalReport {
  std::string name;
  std::size_t k = 1;
  std::size_t n_trajectories = 0;
  double ade = 0.0;
  double fde = 0.0;
  double fde_mean_abs = 0.0;
  std::array<ClassMetrics, kNumClasses> per_class{};
};

EvalReport summarize(std::string name, std::size_t k, std::span<const TrajectoryPair> pairs,
                     std::span<const int> labels);

// Extrapolates the last observed velocity. Requires t_obs >= 2.
std::vector<std::vector<Point>> constant_velocity_baseline(const SceneWindow& window, std::size_t t_pred);
EvalReport eval_constant_velocity(std::span<const SceneWindow> windows);

struct MinOfKOptions {
  std::size_t k = 20;
  std::uint64_t seed = 0;
  std::size_t windows_per_batch = 64;
};

// Samples k futures per agent and scores the one with the smallest
// full-trajectory L2 error. Noise for batch b comes from (seed, b) so a
// larger k always contains the draws of a smaller k.
EvalReport eval_min_of_k(const Generator& generator, std::span<const SceneWindow> windows,
                         const MinOfKOptions& options, std::string name = "model");

struct PcaResult {
  std::vector<std::array<double, 2>> coords;
  std::array<double, 2> variance{};  // eigenvalues of the centred Gram matrix
  std::vector<std::vector<double>> directions;  // two unit loading vectors in input space
  bool zero_variance = false;
};

// Exact projection onto the top two principal directions. Each direction's
// first non-negligible loading is positive.
PcaResult pca_project(const std::vector<std::vector<double>>& rows);

std::vector<std::vector<double>> embedding_distances(const std::vector<std::vector<double>>& rows);

// Symmetric eigen-decomposition by cyclic Jacobi rotations. Eigenvalues are
// returned in descending order with matching unit eigenvectors as columns of
// `vectors` (row-major n x n).
void symmetric_eigen(std::vector<double> matrix, std::size_t n, std::vector<double>& values,
                     std::vector<double>& vectors);

struct ReportedResult {
  const char* model;
  double ade;
  double fde;
};

// Reported values on the full Stanford Drone dataset; shipped for reference
// only, never reproduced here.
inline constexpr std::array<ReportedResult, 7> kReportedResults = {{
    {"original SGAN (ReLU activation)", 23.56, 46.86},
    {"GAN (LeakyReLU activation)", 21.98, 43.53},
    {"GAN with label", 23.05, 45.73},
    {"GAN with transformer", 23.06, 45.77},
    {"noGAN", 23.02, 46.83},
    {"noGAN with label", 23.00, 47.19},
    {"noGAN with transformer", 22.73, 46.90},
}};

}  // namespace trajgan
