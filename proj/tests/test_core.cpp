#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "lingermort/core/errors.hpp"
#include "lingermort/core/parallel.hpp"
#include "lingermort/core/rng.hpp"
#include "lingermort/core/spline.hpp"
#include "test_util.hpp"

using namespace lingermort;

TEST(Errors, MessageCarriesCode) {
  Error e(ErrorCode::MissingCell, "age 0-1");
  EXPECT_EQ(e.code(), ErrorCode::MissingCell);
  EXPECT_NE(std::string(e.what()).find("MissingCell"), std::string::npos);
  EXPECT_TRUE(is_numerical(ErrorCode::SingularCovariance));
  EXPECT_FALSE(is_numerical(ErrorCode::MissingCell));
}

TEST(CounterRng, SameKeySameStream) {
  CounterRng a(7, 3, 2024, 1), b(7, 3, 2024, 1), c(7, 4, 2024, 1);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto va = a(), vb = b(), vc = c();
    EXPECT_EQ(va, vb);
    differs |= (va != vc);
  }
  EXPECT_TRUE(differs);
}

TEST(CounterRng, NormalMoments) {
  CounterRng rng(1, 0, 0, 0);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    EXPECT_GT(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(ParallelFor, CoversEveryIndexOnce) {
  for (int threads : {1, 3, 8}) {
    std::vector<int> hits(1001, 0);
    parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i] += 1; });
    EXPECT_EQ(std::accumulate(hits.begin(), hits.end(), 0), 1001);
    for (int h : hits) EXPECT_EQ(h, 1);
  }
}

TEST(ParallelFor, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(10, 4,
                            [](std::size_t i) {
                              if (i == 7) throw Error(ErrorCode::InvalidArgument, "boom");
                            }),
               Error);
}

TEST(NaturalCubicSpline, InterpolatesKnotsAndLines) {
  std::vector<double> x{0, 1, 3, 4, 7}, y(5);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = 2.0 * x[i] - 1.0;
  NaturalCubicSpline s(x, y);
  for (double t : {-2.0, 0.0, 0.5, 2.0, 3.7, 7.0, 9.0}) EXPECT_NEAR(s(t), 2.0 * t - 1.0, 1e-12);

  std::vector<double> yq{0, 1, -1, 2, 0.5};
  NaturalCubicSpline q(x, yq);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(q(x[i]), yq[i], 1e-12);
  // continuity of the first derivative at an interior knot
  const double h = 1e-6;
  EXPECT_NEAR((q(3.0) - q(3.0 - h)) / h, (q(3.0 + h) - q(3.0)) / h, 1e-4);
}

TEST(NaturalCubicSpline, RejectsBadKnots) {
  std::vector<double> x{0, 0}, y{1, 2};
  EXPECT_ERROR_CODE(NaturalCubicSpline(x, y), ErrorCode::InvalidArgument);
}
