#pragma once

// Brute-force PCA through Eigen's dense covariance eigensolver.

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace trajgan::testing {

inline std::vector<std::array<double, 2>> eigen_pca(const std::vector<std::vector<double>>& rows) {
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index d = static_cast<Eigen::Index>(rows.front().size());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = c.transpose() * c;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  std::vector<std::array<double, 2>> out(static_cast<std::size_t>(n));
  for (int comp = 0; comp < 2; ++comp) {
    Eigen::VectorXd u = solver.eigenvectors().col(d - 1 - comp);  // ascending order
    const double umax = u.cwiseAbs().maxCoeff();
    for (Eigen::Index j = 0; j < d; ++j) {
      if (std::abs(u(j)) > 1e-9 * umax) {
        if (u(j) < 0) u = -u;
        break;
      }
    }
    const Eigen::VectorXd proj = c * u;
    for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(comp)] = proj(i);
  }
  return out;
}

}  // namespace trajgan::testing
