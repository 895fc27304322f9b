#ifndef D2RNN_NUMERICS_HPP
#define D2RNN_NUMERICS_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "d2rnn/error.hpp"

namespace d2rnn {

// Dense storage is row-major so that serialized matrices read row by row.
template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixT<double>;
using Vector = VectorT<double>;

template <typename Derived>
std::string shape_string(const Eigen::EigenBase<Derived>& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

/// Checked matrix-vector product.
template <typename DerivedM, typename DerivedV>
VectorT<typename DerivedM::Scalar> matvec(const Eigen::MatrixBase<DerivedM>& m,
                                          const Eigen::MatrixBase<DerivedV>& v) {
  if (m.cols() != v.size()) {
    throw_data("matvec: dimension mismatch, matrix " + shape_string(m) + " vs vector " +
               std::to_string(v.size()));
  }
  return m * v;
}

template <typename Scalar>
inline Scalar sigmoid_scalar(Scalar x) {
  using std::exp;
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-x));
  const Scalar e = exp(x);
  return e / (Scalar(1) + e);
}

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  return v.unaryExpr([](Scalar x) { return sigmoid_scalar(x); });
}

template <typename Derived>
auto tanh(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  return v.unaryExpr([](Scalar x) {
    using std::tanh;
    return tanh(x);
  });
}

template <typename DerivedA, typename DerivedB>
VectorT<typename DerivedA::Scalar> elementwise_mul(const Eigen::MatrixBase<DerivedA>& a,
                                                   const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) {
    throw_data("elementwise_mul: length mismatch " + std::to_string(a.size()) + " vs " +
               std::to_string(b.size()));
  }
  return a.cwiseProduct(b);
}

/// Numerically stable softmax (max-subtracted).
template <typename Derived>
VectorT<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& y) {
  using Scalar = typename Derived::Scalar;
  if (y.size() == 0) throw_data("softmax: empty input");
  const Scalar peak = y.maxCoeff();
  VectorT<Scalar> e = (y.array() - peak).exp().matrix();
  return e / e.sum();
}

/// Projection onto the leading principal components of a sample set.
struct PcaTransform {
  Vector mean;
  Matrix basis;  // components x input_dim, orthonormal rows
  double energy_retained = 0.0;

  Eigen::Index input_dim() const { return mean.size(); }
  Eigen::Index components() const { return basis.rows(); }
};

/// Fits PCA by exact eigen-decomposition of the sample covariance and keeps the
/// smallest number of components whose eigenvalue mass reaches `energy`. Each
/// basis row is sign-normalized so that its largest-magnitude entry is positive.
PcaTransform pca_fit(const std::vector<Vector>& samples, double energy);

Vector pca_apply(const PcaTransform& t, const Vector& v);

/// Maps a projected vector back into input space.
Vector pca_reconstruct(const PcaTransform& t, const Vector& projected);

/// Seeded generator. The engine is the standard MT19937-64 (Matsumoto and
/// Nishimura, 64-bit variant, as specified by std::mt19937_64). Derived draws
/// use fixed formulas rather than the implementation-defined std distributions:
///   uniform01 = (next() >> 11) * 2^-53
///   uniform(lo, hi) = lo + (hi - lo) * uniform01
///   index(n) = floor(uniform01 * n)
///   normal = Box-Muller on two uniform01 draws (cosine branch only)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  std::size_t index(std::size_t n) {
    auto i = static_cast<std::size_t>(uniform01() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform01();
    const double u2 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * M_PI * u2);
  }

  /// Fisher-Yates, highest index first.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

  Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = uniform(lo, hi);
    return m;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace d2rnn

#endif  // D2RNN_NUMERICS_HPP
