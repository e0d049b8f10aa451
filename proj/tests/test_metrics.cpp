#include <gtest/gtest.h>

#include "r2n2/metrics.hpp"
#include "test_util.hpp"

using namespace r2n2;

TEST(Mrse, PerfectPredictionIsZero) {
  std::mt19937_64 rng(1);
  Matrix x = r2n2::testing::random_matrix(rng, 20, 3);
  EXPECT_EQ(metrics::mrse(x, x), 0.0);
  EXPECT_EQ(metrics::re(x, x), 0.0);
}

TEST(Mrse, FeatureMeanPredictionIsExactlyOne) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix x = r2n2::testing::random_matrix(rng, 7 + trial, 1 + trial % 4, 3.0);
    Matrix pred = x.colwise().mean().replicate(x.rows(), 1);
    EXPECT_EQ(metrics::mrse(x, pred), 1.0);
  }
}

TEST(Mrse, HandExample) {
  // one feature over three steps: truth 1,2,3 and prediction 1,2,4
  Matrix truth(3, 1), pred(3, 1);
  truth << 1, 2, 3;
  pred << 1, 2, 4;
  const double expected = r2n2::testing::oracle()["mrse_hand"].get<double>();
  EXPECT_NEAR(metrics::mrse(truth, pred), expected, 1e-15);
  EXPECT_NEAR(metrics::mrse(truth, pred), 0.7071068, 1e-7);
}

TEST(Re, ZeroPredictionIsExactlyOne) {
  std::mt19937_64 rng(3);
  Matrix x = r2n2::testing::random_matrix(rng, 15, 2);
  EXPECT_EQ(metrics::re(x, Matrix::Zero(15, 2)), 1.0);
}

TEST(Re, EqualsMrseOnZeroMeanTruth) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix x = r2n2::testing::random_matrix(rng, 40, 3);
    x.rowwise() -= x.colwise().mean();
    Matrix pred = x + 0.3 * r2n2::testing::random_matrix(rng, 40, 3);
    EXPECT_NEAR(metrics::re(x, pred), metrics::mrse(x, pred), 1e-12);
  }
}

TEST(Metrics, ShapeAndDegenerateErrors) {
  Matrix a = Matrix::Ones(3, 2);
  EXPECT_THROW(metrics::mrse(a, Matrix::Ones(3, 1)), DataError);
  EXPECT_THROW(metrics::mrse(a, a), DataError);  // constant truth: no deviation
  EXPECT_THROW(metrics::re(Matrix::Zero(3, 2), a), DataError);
  Matrix bad = a;
  bad(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(metrics::re(a, bad), DataError);
}

TEST(Metrics, ScaleInvarianceOfMrse) {
  std::mt19937_64 rng(6);
  Matrix x = r2n2::testing::random_matrix(rng, 30, 2);
  Matrix p = x + 0.1 * r2n2::testing::random_matrix(rng, 30, 2);
  EXPECT_NEAR(metrics::mrse(x, p), metrics::mrse(5.0 * x, 5.0 * p), 1e-14);
  EXPECT_NEAR(metrics::mrse(x, p), metrics::mrse(x.array() + 7.0, p.array() + 7.0), 1e-12);
}

TEST(Metrics, PerFeatureDiagnostic) {
  Matrix truth(3, 2), pred(3, 2);
  truth << 1, 0, 2, 1, 3, 2;
  pred << 1, 1, 2, 1, 4, 1;
  auto per = metrics::mrse_per_feature(metrics::EvalPair{truth, pred});
  ASSERT_EQ(per.size(), 2u);
  EXPECT_NEAR(per[0], std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(per[1], 1.0, 1e-15);
}
