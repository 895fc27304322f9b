#include "d2rnn/numerics.hpp"

#include <algorithm>
#include <numeric>

namespace d2rnn {

PcaTransform pca_fit(const std::vector<Vector>& samples, double energy) {
  if (samples.size() < 2) throw_data("pca_fit: need at least 2 samples");
  if (!(energy > 0.0 && energy <= 1.0)) throw_data("pca_fit: energy must lie in (0, 1]");
  const Eigen::Index dim = samples.front().size();
  if (dim == 0) throw_data("pca_fit: zero-dimensional samples");

  Matrix data(static_cast<Eigen::Index>(samples.size()), dim);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].size() != dim) {
      throw_data("pca_fit: sample " + std::to_string(i) + " has dim " +
                 std::to_string(samples[i].size()) + ", expected " + std::to_string(dim));
    }
    data.row(static_cast<Eigen::Index>(i)) = samples[i].transpose();
  }

  PcaTransform t;
  t.mean = data.colwise().mean().transpose();
  const Matrix centered = data.rowwise() - t.mean.transpose();
  const Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(samples.size() - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw_numerical("pca_fit: eigen-decomposition failed");

  // Ascending from the solver; walk it in descending order.
  const Eigen::VectorXd values = solver.eigenvalues().cwiseMax(0.0);
  const double total = values.sum();
  const double scale = std::max(1.0, cov.diagonal().cwiseAbs().maxCoeff());
  if (!(total > 1e-12 * scale)) throw_data("pca_fit: degenerate covariance (no variance)");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(dim));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::reverse(order.begin(), order.end());

  double kept = 0.0;
  std::size_t count = 0;
  for (Eigen::Index idx : order) {
    kept += values(idx);
    ++count;
    // Relative slack absorbs rounding when energy == 1.
    if (kept >= energy * total - 1e-12 * total) break;
  }

  t.basis.resize(static_cast<Eigen::Index>(count), dim);
  for (std::size_t r = 0; r < count; ++r) {
    Eigen::VectorXd v = solver.eigenvectors().col(order[r]);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    t.basis.row(static_cast<Eigen::Index>(r)) = v.transpose();
  }
  t.energy_retained = kept / total;
  return t;
}

Vector pca_apply(const PcaTransform& t, const Vector& v) {
  if (v.size() != t.input_dim()) {
    throw_data("pca_apply: vector length " + std::to_string(v.size()) +
               " does not match transform input dim " + std::to_string(t.input_dim()));
  }
  return t.basis * (v - t.mean);
}

Vector pca_reconstruct(const PcaTransform& t, const Vector& projected) {
  if (projected.size() != t.components()) {
    throw_data("pca_reconstruct: expected " + std::to_string(t.components()) +
               " components, got " + std::to_string(projected.size()));
  }
  return t.mean + t.basis.transpose() * projected;
}

}  // namespace d2rnn
