#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "support.hpp"

using namespace maxout;
using namespace testing_support;

TEST(Forward, AbsoluteValueUnit) {
  const Network net = line_unit({{1.0, 0.0}, {-1.0, 0.0}});
  EXPECT_DOUBLE_EQ(forward(net, vec({2.0}))(0), 2.0);
  EXPECT_DOUBLE_EQ(forward(net, vec({-3.5}))(0), 3.5);
}

TEST(Forward, UpperEnvelopeOfThreeLines) {
  const Network net = line_unit({{0.0, 0.0}, {1.0, 0.0}, {2.0, -1.0}});
  EXPECT_DOUBLE_EQ(forward(net, vec({-1.0}))(0), 0.0);
  EXPECT_DOUBLE_EQ(forward(net, vec({0.5}))(0), 0.5);
  EXPECT_DOUBLE_EQ(forward(net, vec({2.0}))(0), 3.0);
  EXPECT_EQ(activation_pattern(net, vec({2.0})).feature, std::vector<int>{2});
}

TEST(Forward, RankOneNetworkIsAffine) {
  const Architecture arch{3, {4, 5}, 1, 2};
  const Network net = random_network(arch, 11);
  const AffineMap f = region_affine_map(net, ActivationPattern{std::vector<int>(9, 0)});
  std::mt19937_64 eng(1);
  for (int i = 0; i < 10; ++i) {
    const Eigen::VectorXd x = random_point(3, eng, 3.0);
    EXPECT_LE((forward(net, x) - f(x)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(activation_pattern(net, x).feature, std::vector<int>(9, 0));
  }
}

TEST(Forward, ShapeErrorsNameTheLocation) {
  const Architecture arch{2, {3}, 2, 1};
  Parameters p = Parameters::zeros(arch);
  p.hidden[0].weights.resize(6, 3);
  try {
    Network(arch, p);
    FAIL() << "expected a shape error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Shape);
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos) << e.what();
  }
  const Network net(arch, Parameters::zeros(arch));
  EXPECT_THROW(forward(net, vec({1.0})), Error);
  EXPECT_THROW(forward(net, vec({1.0, std::numeric_limits<double>::quiet_NaN()})), Error);
}

TEST(Forward, NonFiniteParametersRejected) {
  const Architecture arch{2, {3}, 2, 1};
  Parameters p = Parameters::zeros(arch);
  p.hidden[0].biases(4) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(Network(arch, p), Error);
}

TEST(Pattern, TieTakesSmallestIndex) {
  const Network net = line_unit({{1.0, 0.0}, {-1.0, 0.0}});
  EXPECT_EQ(activation_pattern(net, vec({0.0})).feature, std::vector<int>{0});
  const Network same = line_unit({{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}});
  EXPECT_EQ(activation_pattern(same, vec({5.0})).feature, std::vector<int>{0});
}

TEST(RegionAffineMap, SelectsFeature) {
  const Network net = line_unit({{0.0, 0.0}, {1.0, 0.0}, {2.0, -1.0}});
  const AffineMap f = region_affine_map(net, ActivationPattern{{1}});
  EXPECT_DOUBLE_EQ(f.A(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(f.c(0), 0.0);
  EXPECT_THROW(region_affine_map(net, ActivationPattern{{3}}), Error);
  EXPECT_THROW(region_affine_map(net, ActivationPattern{{0, 0}}), Error);
}

TEST(RegionAffineMap, MatchesForwardOnRandomNets) {
  std::mt19937_64 eng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Architecture arch{3, {5, 4}, 2 + trial % 3, 3};
    const Network net = random_network(arch, 100 + trial);
    for (int i = 0; i < 25; ++i) {
      const Eigen::VectorXd x = random_point(3, eng, 2.0);
      const AffineMap f = region_affine_map(net, activation_pattern(net, x));
      EXPECT_LE((forward(net, x) - f(x)).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
}

TEST(Gradient, AbsoluteValue) {
  const Network net = line_unit({{1.0, 0.0}, {-1.0, 0.0}});
  EXPECT_DOUBLE_EQ(gradient(net, vec({2.0}))(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(gradient(net, vec({-2.0}))(0, 0), -1.0);
}

TEST(Gradient, ConstantForRankOne) {
  const Network net = random_network({2, {6, 6}, 1, 2}, 3);
  const Eigen::MatrixXd g0 = gradient(net, vec({0.0, 0.0}));
  std::mt19937_64 eng(2);
  for (int i = 0; i < 10; ++i) EXPECT_LE((gradient(net, random_point(2, eng, 10.0)) - g0).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Gradient, AgreesWithCentralDifferences) {
  std::mt19937_64 eng(5);
  const double h = 1e-5;
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Architecture arch{3, {6, 5}, 2 + trial % 4, 2};
    const Network net = random_network(arch, 900 + trial);
    for (int i = 0; i < 40 && checked < (trial + 1) * 20; ++i) {
      const Eigen::VectorXd x = random_point(3, eng);
      // The stencil must stay inside one region.
      if (min_margin(net, x) < 1e-3) continue;
      const Eigen::MatrixXd g = gradient(net, x);
      Eigen::MatrixXd fd(g.rows(), g.cols());
      for (int j = 0; j < 3; ++j) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(3);
        e(j) = h;
        fd.col(j) = (forward(net, x + e) - forward(net, x - e)) / (2 * h);
      }
      EXPECT_LE((fd - g).norm(), 1e-5 * std::max(1.0, g.norm()));
      ++checked;
    }
  }
  EXPECT_EQ(checked, 400);
}

TEST(Properties, ZeroBiasHomogeneity) {
  std::mt19937_64 eng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const Network net = random_network({2, {4, 3}, 3, 2}, 40 + trial, true);
    for (int i = 0; i < 20; ++i) {
      const Eigen::VectorXd x = random_point(2, eng);
      const Eigen::VectorXd y = forward(net, x);
      for (double c : {0.0, 0.5, 2.0, 10.0}) {
        const Eigen::VectorXd yc = forward(net, c * x);
        EXPECT_LE((yc - c * y).norm(), 1e-9 * std::max(1.0, c * y.norm()));
        if (c > 0) EXPECT_EQ(activation_pattern(net, c * x), activation_pattern(net, x));
      }
    }
  }
}

TEST(Properties, RankTwoWithZeroFeatureIsRelu) {
  std::mt19937_64 eng(4);
  std::normal_distribution<double> nd;
  const Architecture arch{3, {1}, 2, 1};
  for (int trial = 0; trial < 10; ++trial) {
    Parameters p = Parameters::zeros(arch);
    for (int j = 0; j < 3; ++j) p.hidden[0].weights(0, j) = nd(eng);
    p.hidden[0].biases(0) = nd(eng);
    p.out_weights(0, 0) = 1.0;
    const Network net(arch, p);
    for (int i = 0; i < 20; ++i) {
      const Eigen::VectorXd x = random_point(3, eng);
      const double relu = std::max(0.0, p.hidden[0].weights.row(0).dot(x) + p.hidden[0].biases(0));
      EXPECT_EQ(forward(net, x)(0), relu);
    }
  }
}

TEST(Properties, ComposeIsAssociative) {
  std::mt19937_64 eng(8);
  std::normal_distribution<double> nd;
  auto rnd = [&](int r, int c) {
    AffineMap m{Eigen::MatrixXd(r, c), Eigen::VectorXd(r)};
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) m.A(i, j) = nd(eng);
      m.c(i) = nd(eng);
    }
    return m;
  };
  const AffineMap f = rnd(2, 3), g = rnd(3, 4), h = rnd(4, 2);
  const AffineMap a = compose(f, compose(g, h));
  const AffineMap b = compose(compose(f, g), h);
  EXPECT_LE((a.A - b.A).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((a.c - b.c).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(compose(f, h), Error);
}

TEST(Slice, UnitSimplexBasis) {
  const SliceBasis b = slice_basis(vec({1, 0, 0}), vec({0, 1, 0}), vec({0, 0, 1}));
  EXPECT_LE((b.origin - vec({1.0 / 3, 1.0 / 3, 1.0 / 3})).norm(), 1e-15);
  EXPECT_LE((b.e1 - vec({-1, 1, 0}) / std::sqrt(2.0)).norm(), 1e-15);
  EXPECT_LE((b.e2 - vec({-1, -1, 2}) / std::sqrt(6.0)).norm(), 1e-15);
}

TEST(Slice, PlaneBasisIsIdentity) {
  const SliceBasis b = slice_basis(vec({0, 0}), vec({1, 0}), vec({0, 1}));
  EXPECT_LE((b.origin - vec({1.0 / 3, 1.0 / 3})).norm(), 1e-15);
  EXPECT_LE((b.e1 - vec({1, 0})).norm(), 1e-15);
  EXPECT_LE((b.e2 - vec({0, 1})).norm(), 1e-15);
}

TEST(Slice, CollinearPointsRejected) {
  try {
    slice_basis(vec({0, 0, 0}), vec({1, 1, 1}), vec({2, 2, 2}));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Precondition);
  }
  EXPECT_THROW(slice_basis(vec({1, 2}), vec({1, 2}), vec({0, 1})), Error);
}

TEST(Slice, ForwardConsistency) {
  std::mt19937_64 eng(12);
  for (const auto& widths : {std::vector<int>{}, std::vector<int>{5, 4}}) {
    const Network net = random_network({4, widths, 3, 2}, 77);
    const Eigen::VectorXd p1 = random_point(4, eng), p2 = random_point(4, eng), p3 = random_point(4, eng);
    const SlicedNetwork s = slice_network(net, p1, p2, p3);
    EXPECT_EQ(s.net.arch().n0, 2);
    for (int i = 0; i < 10; ++i) {
      const Eigen::VectorXd y = random_point(2, eng, 2.0);
      const Eigen::VectorXd lifted = s.basis.lift(y(0), y(1));
      EXPECT_LE((forward(s.net, y) - forward(net, lifted)).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Json, RoundTripIsBitStable) {
  const Network net = random_network({3, {4, 2}, 3, 2}, 5);
  const Network back = network_from_json(json::parse(network_to_json(net).dump()));
  EXPECT_EQ(back.arch(), net.arch());
  for (int l = 0; l < 2; ++l) {
    EXPECT_TRUE((back.params().hidden[l].weights.array() == net.params().hidden[l].weights.array()).all());
    EXPECT_TRUE((back.params().hidden[l].biases.array() == net.params().hidden[l].biases.array()).all());
  }
  EXPECT_TRUE((back.params().out_weights.array() == net.params().out_weights.array()).all());
  EXPECT_TRUE((back.params().out_biases.array() == net.params().out_biases.array()).all());
}

TEST(Json, SchemaErrorsCarryPath) {
  json doc = network_to_json(random_network({2, {2}, 2, 1}, 1));
  doc["hidden"][0][1][0]["w"] = json::array({1.0});
  try {
    network_from_json(doc);
    FAIL() << "expected a schema error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
    EXPECT_NE(std::string(e.what()).find("$.hidden[0][1][0].w"), std::string::npos) << e.what();
  }
  doc.erase("output");
  EXPECT_THROW(network_from_json(doc), Error);
}

TEST(Json, BareLinearMap) {
  Architecture arch{2, {}, 1, 2};
  Parameters p = Parameters::zeros(arch);
  p.out_weights << 1, 2, 3, 4;
  p.out_biases << 5, 6;
  const Network back = network_from_json(network_to_json(Network(arch, p)));
  EXPECT_TRUE(back.params().hidden.empty());
  EXPECT_DOUBLE_EQ(forward(back, vec({1, 1}))(1), 13.0);
}
