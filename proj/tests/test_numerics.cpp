#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "d2rnn/error.hpp"
#include "d2rnn/numerics.hpp"

using namespace d2rnn;

TEST(Matvec, IdentityLeavesVectorUnchanged) {
  Vector v(3);
  v << 1, 2, 3;
  EXPECT_EQ(matvec(Matrix::Identity(3, 3), v), v);
}

TEST(Matvec, ZeroMatrixAnnihilates) {
  Vector v(3);
  v << 4, -5, 6;
  EXPECT_EQ(matvec(Matrix::Zero(2, 3), v), Vector::Zero(2));
}

TEST(Matvec, HandMultiplication) {
  Matrix m(2, 2);
  m << 1, 2, 3, 4;
  Vector v = Vector::Ones(2);
  Vector expected(2);
  expected << 3, 7;
  EXPECT_EQ(matvec(m, v), expected);
}

TEST(Matvec, MismatchNamesBothShapes) {
  try {
    matvec(Matrix::Zero(2, 3), Vector::Zero(4));
    FAIL() << "expected a shape error";
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos);
    EXPECT_NE(msg.find("4"), std::string::npos);
  }
}

TEST(Softmax, UniformLogits) {
  const Vector p = softmax(Vector::Zero(3));
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(p(i), 1.0 / 3.0);
}

TEST(Softmax, LargeLogitDoesNotOverflow) {
  Vector y(2);
  y << 1000, 0;
  const Vector p = softmax(y);
  EXPECT_TRUE(p.allFinite());
  EXPECT_NEAR(p(0), 1.0, 1e-15);
  EXPECT_NEAR(p(1), 0.0, 1e-15);
}

TEST(Softmax, MatchesExtendedPrecisionEvaluation) {
  Vector y(3);
  y << 1, 2, 3;
  const Vector p = softmax(y);
  long double sum = 0.0L;
  for (int i = 1; i <= 3; ++i) sum += std::exp(static_cast<long double>(i));
  for (int i = 0; i < 3; ++i) {
    const long double ref = std::exp(static_cast<long double>(i + 1)) / sum;
    EXPECT_NEAR(p(i), static_cast<double>(ref), 1e-16);
  }
}

TEST(Softmax, SumsToOneAndIsShiftInvariant) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    Vector y(1 + static_cast<Eigen::Index>(rng.index(8)));
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = rng.uniform(-50, 50);
    const Vector p = softmax(y);
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
    const double shift = rng.uniform(-100, 100);
    const Vector q = softmax(Vector(y.array() + shift));
    EXPECT_LT((p - q).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Softmax, EmptyInputIsAnError) {
  EXPECT_THROW(softmax(Vector(0)), Error);
}

TEST(Activations, FixedValues) {
  EXPECT_EQ(sigmoid_scalar(0.0), 0.5);
  EXPECT_EQ(Vector(d2rnn::tanh(Vector::Zero(2))), Vector::Zero(2));
  Vector a(2), b(2), ab(2);
  a << 1, 2;
  b << 3, 4;
  ab << 3, 8;
  EXPECT_EQ(elementwise_mul(a, b), ab);
  EXPECT_THROW(elementwise_mul(a, Vector::Zero(3)), Error);
}

TEST(Activations, SigmoidIsStableAtExtremes) {
  EXPECT_EQ(sigmoid_scalar(-1000.0), 0.0);
  EXPECT_EQ(sigmoid_scalar(1000.0), 1.0);
  EXPECT_NEAR(sigmoid_scalar(-30.0), std::exp(-30.0) / (1 + std::exp(-30.0)), 1e-25);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<Vector> line_in_3d(int n) {
  Vector dir(3);
  dir << 1, -2, 0.5;
  Vector offset(3);
  offset << 0.3, 0.1, -0.7;
  std::vector<Vector> pts;
  for (int i = 0; i < n; ++i) pts.push_back(offset + (i - n / 2.0) * 0.37 * dir);
  return pts;
}

}  // namespace

TEST(Pca, RankOneDataNeedsOneComponent) {
  const PcaTransform t = pca_fit(line_in_3d(20), 0.9);
  EXPECT_EQ(t.components(), 1);
  EXPECT_NEAR(t.energy_retained, 1.0, 1e-12);
}

TEST(Pca, IsotropicCloudNeedsBothComponents) {
  Rng rng(5);
  std::vector<Vector> pts;
  for (int i = 0; i < 4000; ++i) {
    Vector v(2);
    v << rng.normal(), rng.normal();
    pts.push_back(v);
  }
  const PcaTransform t = pca_fit(pts, 0.9);
  EXPECT_EQ(t.components(), 2);
}

TEST(Pca, FullEnergyKeepsEveryDimension) {
  Rng rng(6);
  std::vector<Vector> pts;
  for (int i = 0; i < 50; ++i) {
    Vector v(4);
    for (int k = 0; k < 4; ++k) v(k) = rng.normal() * (k + 1);
    pts.push_back(v);
  }
  EXPECT_EQ(pca_fit(pts, 1.0).components(), 4);
}

TEST(Pca, BasisIsOrthonormalAndSignNormalized) {
  Rng rng(8);
  std::vector<Vector> pts;
  for (int i = 0; i < 80; ++i) {
    Vector v(3);
    v << rng.normal() * 3, rng.normal(), rng.normal() * 0.2;
    pts.push_back(v);
  }
  const PcaTransform t = pca_fit(pts, 1.0);
  EXPECT_LT((t.basis * t.basis.transpose() - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
  for (Eigen::Index r = 0; r < t.basis.rows(); ++r) {
    Eigen::Index at = 0;
    t.basis.row(r).cwiseAbs().maxCoeff(&at);
    EXPECT_GT(t.basis(r, at), 0.0);
  }
}

TEST(Pca, MeanMapsToZero) {
  const PcaTransform t = pca_fit(line_in_3d(11), 0.9);
  EXPECT_LT(pca_apply(t, t.mean).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Pca, IdentityBasisWithZeroMeanIsNoOp) {
  PcaTransform t;
  t.mean = Vector::Zero(3);
  t.basis = Matrix::Identity(3, 3);
  Vector v(3);
  v << 1.5, -2, 7;
  EXPECT_EQ(pca_apply(t, v), v);
}

TEST(Pca, RankOneRoundTripIsLossless) {
  const auto pts = line_in_3d(15);
  const PcaTransform t = pca_fit(pts, 0.9);
  for (const auto& p : pts)
    EXPECT_LT((pca_reconstruct(t, pca_apply(t, p)) - p).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Pca, RejectsBadInput) {
  EXPECT_THROW(pca_fit({Vector::Zero(2)}, 0.9), Error);
  EXPECT_THROW(pca_fit(line_in_3d(5), 0.0), Error);
  EXPECT_THROW(pca_fit(line_in_3d(5), 1.5), Error);
  EXPECT_THROW(pca_fit({Vector::Zero(2), Vector::Zero(3)}, 0.9), Error);
  const PcaTransform t = pca_fit(line_in_3d(5), 0.9);
  EXPECT_THROW(pca_apply(t, Vector::Zero(2)), Error);
}

// ---------------------------------------------------------------------------

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next(), b.next());
}

TEST(Rng, DifferentSeedsDifferEarly) {
  Rng a(1), b(2);
  bool differ = false;
  for (int i = 0; i < 10; ++i) differ = differ || a.next() != b.next();
  EXPECT_TRUE(differ);
}

TEST(Rng, UniformMeanIsNearHalf) {
  Rng rng(3);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform(0.0, 1.0);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_GE(sum / n, 0.49);
  EXPECT_LE(sum / n, 0.51);
}

TEST(Rng, EngineMatchesStandardMt19937_64) {
  // The standard requires the 10000th draw of a default-seeded engine.
  Rng rng(5489u);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = rng.next();
  EXPECT_EQ(v, 9981545732273789042ULL);
}

TEST(Rng, DocumentedConversions) {
  Rng a(77), b(77);
  const std::uint64_t raw = a.next();
  EXPECT_EQ(b.uniform01(), static_cast<double>(raw >> 11) / 9007199254740992.0);
  Rng c(78), d(78);
  const double u = c.uniform01();
  EXPECT_EQ(d.index(10), static_cast<std::size_t>(std::floor(u * 10)));
}

TEST(Rng, NormalMoments) {
  Rng rng(9);
  double s = 0.0, s2 = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.02);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, ShuffleIsAPermutation) {
  Rng rng(10);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  rng.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
  std::vector<int> identity(50);
  std::iota(identity.begin(), identity.end(), 0);
  EXPECT_NE(v, identity);
}
