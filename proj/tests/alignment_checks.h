#pragma once

#include "mdt/evaluation.h"
#include "mdt/random.h"

#include <cmath>
#include <numbers>

namespace testing {

inline Eigen::Matrix2d rotation2d(double angle) {
  Eigen::Matrix2d r;
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return r;
}

inline Eigen::MatrixXd randomPoints(int count, int dims, mdt::Rng& rng) {
  return mdt::gaussianMatrix(count, dims, rng);
}

inline mdt::SimilarityTransform randomSimilarity2d(mdt::Rng& rng) {
  mdt::SimilarityTransform s;
  s.scale = std::exp(mdt::uniformReal(rng, -1.0, 1.0));
  s.rotation = rotation2d(mdt::uniformReal(rng, -std::numbers::pi, std::numbers::pi));
  s.translation = Eigen::Vector2d(mdt::uniformReal(rng, -3.0, 3.0), mdt::uniformReal(rng, -3.0, 3.0));
  return s;
}

// Sum of squared point distances after mapping source by the transform.
inline double residual(const mdt::SimilarityTransform& s, const Eigen::MatrixXd& source, const Eigen::MatrixXd& target) {
  return (s.apply(source) - target).squaredNorm();
}

// Best 2-D similarity by ordinary least squares in (a, b, tx, ty), where
// x' = a·x − b·y + tx and y' = b·x + a·y + ty. Independent of the SVD route.
inline mdt::SimilarityTransform leastSquaresSimilarity2d(const Eigen::MatrixXd& source, const Eigen::MatrixXd& target) {
  const auto n = source.rows();
  Eigen::MatrixXd a(2 * n, 4);
  Eigen::VectorXd b(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a.row(2 * i) << source(i, 0), -source(i, 1), 1.0, 0.0;
    a.row(2 * i + 1) << source(i, 1), source(i, 0), 0.0, 1.0;
    b[2 * i] = target(i, 0);
    b[2 * i + 1] = target(i, 1);
  }
  const Eigen::Vector4d p = a.colPivHouseholderQr().solve(b);
  mdt::SimilarityTransform s;
  s.scale = std::hypot(p[0], p[1]);
  s.rotation = rotation2d(std::atan2(p[1], p[0]));
  s.translation = Eigen::Vector2d(p[2], p[3]);
  return s;
}

// Best residual over proper rotations on an angle grid, with the optimal
// scale and translation for each angle.
inline double angleScanResidual(const Eigen::MatrixXd& source, const Eigen::MatrixXd& target, double step) {
  const Eigen::RowVectorXd ms = source.colwise().mean();
  const Eigen::RowVectorXd mt = target.colwise().mean();
  const Eigen::MatrixXd p = source.rowwise() - ms;
  const Eigen::MatrixXd q = target.rowwise() - mt;
  double best = std::numeric_limits<double>::infinity();
  for (double angle = -std::numbers::pi; angle < std::numbers::pi; angle += step) {
    const Eigen::MatrixXd rotated = p * rotation2d(angle).transpose();
    const double s = (rotated.array() * q.array()).sum() / p.squaredNorm();
    best = std::min(best, (s * rotated - q).squaredNorm());
  }
  return best;
}

} // namespace testing
