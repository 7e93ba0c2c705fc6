#include <gtest/gtest.h>

#include <algorithm>

#include "e2edet/error.hpp"
#include "e2edet/pyramid.hpp"
#include "support/oracles.hpp"

namespace e2edet {
namespace {

FeaturePyramid single(Grid g) {
  FeaturePyramid p;
  p.levels.push_back(std::move(g));
  p.strides.push_back(8.0);
  return p;
}

Grid grid_from(int h, int w, std::vector<double> v) {
  Grid g(1, h, w);
  g.values = std::move(v);
  return g;
}

TEST(Bilinear, ConstantStaysConstant) {
  const Grid src(1, 4, 4, 0.7);
  for (auto [h, w] : {std::pair{2, 2}, {4, 4}, {7, 3}, {16, 9}}) {
    const Grid out = bilinear_resize(src, h, w);
    for (double v : out.values) EXPECT_DOUBLE_EQ(v, 0.7);
  }
}

TEST(Bilinear, SingleValueBroadcasts) {
  const Grid out = bilinear_resize(grid_from(1, 1, {0.3}), 5, 5);
  EXPECT_EQ(out.values, std::vector<double>(25, 0.3));
}

TEST(Bilinear, TwoByTwoRampAgainstFormula) {
  const Grid src = grid_from(2, 2, {0, 1, 0, 1});
  const Grid out = bilinear_resize(src, 4, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      EXPECT_DOUBLE_EQ(out.at(0, y, x), testing::bilinear_sample(src, 0, 4, 4, y, x));
    }
  }
  const std::vector<double> row = {0.0, 0.25, 0.75, 1.0};
  for (int x = 0; x < 4; ++x) EXPECT_DOUBLE_EQ(out.at(0, 2, x), row[static_cast<std::size_t>(x)]);
}

TEST(Bilinear, RandomAgainstFormula) {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const int sh = static_cast<int>(rng.uniform_int(1, 9));
    const int sw = static_cast<int>(rng.uniform_int(1, 9));
    const int dh = static_cast<int>(rng.uniform_int(1, 17));
    const int dw = static_cast<int>(rng.uniform_int(1, 17));
    const Grid src = testing::random_grid(rng, 2, sh, sw);
    const Grid out = bilinear_resize(src, dh, dw);
    for (int c = 0; c < 2; ++c) {
      for (int y = 0; y < dh; ++y) {
        for (int x = 0; x < dw; ++x) {
          EXPECT_NEAR(out.at(c, y, x), testing::bilinear_sample(src, c, dh, dw, y, x), 1e-15);
        }
      }
    }
  }
}

TEST(Bilinear, BackwardIsAdjoint) {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const Grid src = testing::random_grid(rng, 1, 3 + t % 4, 5);
    const Grid up = testing::random_grid(rng, 1, 7, 2 + t % 5);
    const Grid fwd = bilinear_resize(src, up.height, up.width);
    const Grid back = bilinear_resize_backward(up, src.height, src.width);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < fwd.size(); ++i) lhs += fwd.values[i] * up.values[i];
    for (std::size_t i = 0; i < src.size(); ++i) rhs += src.values[i] * back.values[i];
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(FilterParams, Validation) {
  EXPECT_THROW((FilterParams{2, 2}.validate()), ValidationError);
  EXPECT_THROW((FilterParams{-2, 3}.validate()), ValidationError);
  EXPECT_NO_THROW((FilterParams{0, 1}.validate()));
}

TEST(MaxFilter, SingletonTubeIsIdentity) {
  Rng rng(3);
  const FeaturePyramid p = testing::random_pyramid(rng, 3, 2, 8, 8);
  EXPECT_EQ(max_filter_3d(p, {0, 1}), p);
}

TEST(MaxFilter, CentrePeakFillsWindow) {
  const FeaturePyramid p = single(grid_from(3, 3, {0, 0, 0, 0, 1, 0, 0, 0, 0}));
  const FeaturePyramid out = max_filter_3d(p, {0, 3});
  EXPECT_EQ(out.levels[0].values, std::vector<double>(9, 1.0));
}

TEST(MaxFilter, CoarsePeakReachesFineLevel) {
  FeaturePyramid p;
  p.levels = {Grid(1, 4, 4, 0.0), Grid(1, 2, 2, 0.0)};
  p.strides = {8, 16};
  p.levels[0].at(0, 1, 1) = 0.2;
  p.levels[1].at(0, 0, 0) = 1.0;
  const FeaturePyramid out = max_filter_3d(p, {2, 1});
  EXPECT_EQ(out, testing::brute_max_filter(p, {2, 1}));
  EXPECT_GT(out.levels[0].at(0, 1, 1), 0.2);
  EXPECT_DOUBLE_EQ(out.levels[0].at(0, 1, 1), bilinear_resize(p.levels[1], 4, 4).at(0, 1, 1));
}

TEST(MaxFilter, RandomPyramidsEqualBruteForce) {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const int levels = static_cast<int>(rng.uniform_int(1, 3));
    const int h = static_cast<int>(rng.uniform_int(1, 16));
    const int w = static_cast<int>(rng.uniform_int(1, 16));
    const FilterParams f{2 * static_cast<int>(rng.uniform_int(0, 1)),
                         2 * static_cast<int>(rng.uniform_int(0, 2)) + 1};
    const FeaturePyramid p = testing::random_pyramid(rng, levels, 2, h, w, -0.5, 1.0);
    EXPECT_EQ(max_filter_3d(p, f), testing::brute_max_filter(p, f)) << "instance " << t;
  }
}

TEST(MaxFilter, BackwardMatchesFiniteDifferences) {
  Rng rng(5);
  const FilterParams f{2, 3};
  for (int t = 0; t < 5; ++t) {
    FeaturePyramid p = testing::random_pyramid(rng, 3, 1, 6, 5);
    FeaturePyramid up = p.zeros_like();
    for (auto& g : up.levels) for (double& v : g.values) v = rng.uniform(-1, 1);
    auto objective = [&](const FeaturePyramid& x) {
      const FeaturePyramid y = max_filter_3d(x, f);
      double s = 0.0;
      for (std::size_t l = 0; l < y.levels.size(); ++l) {
        for (std::size_t i = 0; i < y.levels[l].size(); ++i) s += y.levels[l].values[i] * up.levels[l].values[i];
      }
      return s;
    };
    const FeaturePyramid grad = max_filter_3d_backward(p, f, up);
    const double eps = 1e-7;
    for (std::size_t l = 0; l < p.levels.size(); ++l) {
      for (std::size_t i = 0; i < p.levels[l].size(); ++i) {
        const double keep = p.levels[l].values[i];
        p.levels[l].values[i] = keep + eps;
        const double hi = objective(p);
        p.levels[l].values[i] = keep - eps;
        const double lo = objective(p);
        p.levels[l].values[i] = keep;
        EXPECT_NEAR(grad.levels[l].values[i], (hi - lo) / (2 * eps), 1e-6);
      }
    }
  }
}

TEST(MaxFilter, TiedMaximaRouteToFirstInScan) {
  const FeaturePyramid p = single(grid_from(1, 3, {0.5, 0.5, 0.1}));
  FeaturePyramid up = p.zeros_like();
  up.levels[0].values = {0.0, 1.0, 0.0};  // output at the middle sees both 0.5s
  const FeaturePyramid g = max_filter_3d_backward(p, {0, 3}, up);
  EXPECT_EQ(g.levels[0].values, (std::vector<double>{1.0, 0.0, 0.0}));
}

TEST(Hard3dmf, DecreasingRampKeepsCorner) {
  Grid g(1, 5, 6);
  for (int y = 0; y < 5; ++y) for (int x = 0; x < 6; ++x) g.at(0, y, x) = 20.0 - y - 1.5 * x;
  const FeaturePyramid p = single(g);
  const FeaturePyramid out = hard_3dmf(p, {0, 3});
  const FeaturePyramid mf = testing::brute_max_filter(p, {0, 3});
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double want = g.values[i] == mf.levels[0].values[i] ? g.values[i] : 0.0;
    EXPECT_EQ(out.levels[0].values[i], want);
    EXPECT_EQ(out.levels[0].values[i] != 0.0, i == 0);
  }
}

TEST(Hard3dmf, SingletonTubeIsIdentity) {
  Rng rng(6);
  const FeaturePyramid p = testing::random_pyramid(rng, 2, 3, 5, 5);
  EXPECT_EQ(hard_3dmf(p, {0, 1}), p);
}

TEST(Hard3dmf, DistantEqualPeaksBothSurvive) {
  Grid g(1, 7, 7, 0.1);
  g.at(0, 1, 1) = 0.9;
  g.at(0, 5, 5) = 0.9;
  const FeaturePyramid out = hard_3dmf(single(g), {0, 3});
  EXPECT_DOUBLE_EQ(out.levels[0].at(0, 1, 1), 0.9);
  EXPECT_DOUBLE_EQ(out.levels[0].at(0, 5, 5), 0.9);
}

// ---- properties -------------------------------------------------------------

TEST(MaxFilterProperty, DominatesInput) {
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    const FeaturePyramid p = testing::random_pyramid(rng, 3, 2, 9, 7, -1.0, 1.0);
    const FeaturePyramid y = max_filter_3d(p, {2, 3});
    for (std::size_t l = 0; l < p.levels.size(); ++l) {
      for (std::size_t i = 0; i < p.levels[l].size(); ++i) {
        EXPECT_GE(y.levels[l].values[i], p.levels[l].values[i]);
      }
    }
  }
}

TEST(MaxFilterProperty, Monotone) {
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    const FeaturePyramid p = testing::random_pyramid(rng, 3, 1, 8, 8);
    FeaturePyramid q = p;
    for (auto& g : q.levels) for (double& v : g.values) v += rng.uniform(0.0, 0.3);
    const FeaturePyramid yp = max_filter_3d(p, {2, 3});
    const FeaturePyramid yq = max_filter_3d(q, {2, 3});
    for (std::size_t l = 0; l < p.levels.size(); ++l) {
      for (std::size_t i = 0; i < p.levels[l].size(); ++i) {
        EXPECT_LE(yp.levels[l].values[i], yq.levels[l].values[i]);
      }
    }
  }
}

TEST(MaxFilterProperty, RepeatedSpatialFilterConverges) {
  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    const int h = static_cast<int>(rng.uniform_int(1, 10));
    const int w = static_cast<int>(rng.uniform_int(1, 10));
    FeaturePyramid cur = testing::random_pyramid(rng, 1, 1, h, w);
    for (int it = 0; it < std::max(h, w); ++it) {
      const FeaturePyramid next = max_filter_3d(cur, {0, 3});
      for (std::size_t i = 0; i < cur.levels[0].size(); ++i) {
        EXPECT_GE(next.levels[0].values[i], cur.levels[0].values[i]);
      }
      cur = next;
    }
    EXPECT_EQ(max_filter_3d(cur, {0, 3}), cur);
  }
}

TEST(Hard3dmfProperty, SurvivorsAreTubeMaximaAndIsolated) {
  Rng rng(10);
  for (int t = 0; t < 50; ++t) {
    const FeaturePyramid p = testing::random_pyramid(rng, 1, 1, 12, 12);
    const FeaturePyramid out = hard_3dmf(p, {0, 3});
    const FeaturePyramid mf = testing::brute_max_filter(p, {0, 3});
    std::vector<std::pair<int, int>> survivors;
    for (int y = 0; y < 12; ++y) {
      for (int x = 0; x < 12; ++x) {
        const double v = out.levels[0].at(0, y, x);
        if (v == 0.0) continue;
        EXPECT_EQ(v, p.levels[0].at(0, y, x));
        EXPECT_EQ(v, mf.levels[0].at(0, y, x));
        survivors.emplace_back(y, x);
      }
    }
    for (std::size_t a = 0; a < survivors.size(); ++a) {
      for (std::size_t b = a + 1; b < survivors.size(); ++b) {
        const int dy = std::abs(survivors[a].first - survivors[b].first);
        const int dx = std::abs(survivors[a].second - survivors[b].second);
        EXPECT_GT(std::max(dy, dx), 1);
      }
    }
  }
}

// Resizing a sharp fine peak down averages it, so a weaker coarse value can be the
// maximum of its own tube while the fine peak also survives: both lie in each
// other's tube. Isolation therefore only holds within a level.
TEST(Hard3dmfProperty, CrossLevelSurvivorsCanShareATube) {
  FeaturePyramid p;
  p.levels = {grid_from(2, 2, {1.0, 0.0, 0.0, 0.0}), grid_from(1, 1, {0.3})};
  p.strides = {8, 16};
  const FeaturePyramid out = hard_3dmf(p, {2, 1});
  EXPECT_EQ(out.levels[0].at(0, 0, 0), 1.0);
  EXPECT_EQ(out.levels[1].at(0, 0, 0), 0.3);
}

}  // namespace
}  // namespace e2edet
