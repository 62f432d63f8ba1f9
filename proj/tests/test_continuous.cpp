// Copyright 2026 The povmlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>

#include "povmlab/continuous.hpp"

namespace povmlab {
namespace {

TEST(ConfidenceFunction, MergesAndValidates) {
  const ConfidenceFunction c({1.0, 0.0, 1.0}, {0.25, 0.5, 0.25});
  ASSERT_EQ(c.size(), 2u);
  EXPECT_DOUBLE_EQ(c.weights()[1], 0.5);
  EXPECT_DOUBLE_EQ(c.mean(), 0.5);
  EXPECT_DOUBLE_EQ(c.variance(), 0.25);
  EXPECT_DOUBLE_EQ(c.cumulative(0.0), 0.5);
  EXPECT_DOUBLE_EQ(c.shifted(2.0).mean(), 2.5);
  EXPECT_THROW(ConfidenceFunction({0.0}, {0.5}), InvalidArgument);
  EXPECT_THROW(ConfidenceFunction({0.0, 1.0}, {1.5, -0.5}), InvalidArgument);
  EXPECT_THROW(ConfidenceFunction({}, {}), InvalidArgument);
}

TEST(ConfidenceFunction, ConvolutionAddsMeansAndVariances) {
  const ConfidenceFunction a({-1.0, 1.0}, {0.5, 0.5});
  const ConfidenceFunction b({0.0, 3.0}, {0.75, 0.25});
  const ConfidenceFunction c = convolve(a, b);
  EXPECT_EQ(c.size(), 4u);
  EXPECT_NEAR(c.mean(), a.mean() + b.mean(), 1e-15);
  EXPECT_NEAR(c.variance(), a.variance() + b.variance(), 1e-14);
  EXPECT_EQ(convolve(a, ConfidenceFunction::delta(0.0)).size(), 2u);
  EXPECT_NEAR(scaled(b, -2.0).variance(), 4.0 * b.variance(), 1e-14);
  EXPECT_EQ(scaled(b, 0.0).size(), 1u);
}

TEST(ConfidenceFunction, GaussianProbeVarianceScalesWithCoupling) {
  const GridSpace ps = make_grid(512, 32.0);
  const WaveFunction probe = gaussian_state(ps, 0.0, 0.0, 1.0);
  EXPECT_NEAR(confidence_function(probe, 1.0).variance(), 1.0, 1e-10);
  EXPECT_NEAR(confidence_function(probe, 2.0).variance(), 0.25, 1e-10);
  EXPECT_THROW(confidence_function(probe, 0.0), InvalidArgument);
}

TEST(ConfidenceFunction, SymmetricAndShiftedProbes) {
  const GridSpace ps = make_grid(512, 32.0);
  EXPECT_NEAR(confidence_function(bump_state(ps, 0.0, 2.0), 1.5).mean(), 0.0, 1e-14);
  // the reading is -Q1 / lambda, so a probe centred at +1 biases it by -1/lambda
  EXPECT_NEAR(confidence_function(gaussian_state(ps, 1.0, 0.0, 0.5), 2.0).mean(), -0.5, 1e-10);
}

TEST(SmearedPovm, FullLineIsIdentity) {
  const GridSpace obj = make_grid(64, 16.0);
  const GridSpace ps = make_grid(256, 32.0);
  const Povm e = smeared_position_povm(confidence_function(gaussian_state(ps, 0.0, 0.0, 1.0), 1.0),
                                       Partition::full_line(), obj);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_LT((e[0].diagonal_values().array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(SmearedPovm, HalfLineFollowsErfc) {
  // Object and reading lattices coincide and the cut sits between points, so
  // the effect is a midpoint-rule Gaussian tail.
  const GridSpace ps = make_grid(1024, 64.0);
  const double lambda = 1.0;
  const GridSpace obj = make_grid(256, 16.0);
  ASSERT_DOUBLE_EQ(obj.spacing(), ps.spacing() / lambda);
  const ConfidenceFunction e = confidence_function(gaussian_state(ps, 0.0, 0.0, 1.0), lambda);
  const double cut = -0.5 * obj.spacing();
  const Povm povm = smeared_position_povm(e, Partition::from_cuts({cut}), obj);
  double worst = 0.0;
  for (std::size_t k = 0; k < obj.n_points(); ++k) {
    const double q = obj.coordinate(k);
    const double expect = 0.5 * std::erfc((q - cut) / std::sqrt(2.0));
    worst = std::max(worst, std::abs(povm[0].diagonal_values()[static_cast<Eigen::Index>(k)] - expect));
  }
  EXPECT_LT(worst, 1e-3);
  EXPECT_LT(povm.completeness_deviation(), 1e-12);
}

TEST(SmearedPovm, UncoveredValuesRaiseCoverageError) {
  const GridSpace obj = make_grid(64, 16.0);
  const GridSpace ps = make_grid(256, 32.0);
  const ConfidenceFunction e = confidence_function(gaussian_state(ps, 0.0, 0.0, 0.25), 1.0);
  const Partition island(std::vector<Cell>{Cell{-1.0, 1.0, "mid", true}});
  EXPECT_THROW(smeared_position_povm(e, island, obj), CoverageError);
  EXPECT_NO_THROW(smeared_position_povm(e, island.completed(), obj));
}

TEST(UnsharpScheme, SimulationMatchesClosedForm) {
  const GridSpace obj = make_grid(32, 8.0);
  const GridSpace ps = make_grid(256, 32.0);
  const WaveFunction probe = gaussian_state(ps, 0.0, 0.0, 1.0);
  for (double lambda : {0.5, 1.0, 1.5}) {
    const MeasurementScheme s = unsharp_position_scheme(obj, probe, lambda, Partition::from_cuts({-1.0, 0.0, 2.0}));
    const Povm closed = smeared_position_povm(confidence_function(probe, lambda), s.cells(), obj);
    const Povm sim = extract_povm(s, 32);
    EXPECT_LT(max_deviation(closed, sim), 1e-10) << "lambda " << lambda;
    EXPECT_LT(commutativity_check(sim), 1e-10);
  }
}

TEST(UnsharpScheme, CellsSnapToReadingLattice) {
  const GridSpace obj = make_grid(32, 8.0);
  const GridSpace ps = make_grid(256, 32.0);
  const MeasurementScheme s = unsharp_position_scheme(obj, gaussian_state(ps, 0.0, 0.0, 1.0), 2.0,
                                                      Partition::from_cuts({0.0}));
  EXPECT_DOUBLE_EQ(s.cells()[0].hi, 0.5 * ps.spacing() / 2.0);
  EXPECT_THROW(unsharp_position_scheme(obj, gaussian_state(ps, 0.0, 0.0, 1.0), 0.0, Partition()), InvalidArgument);
}

TEST(UnsharpScheme, FirstKindButNotRepeatable) {
  const GridSpace obj = make_grid(64, 16.0);
  const GridSpace ps = make_grid(256, 32.0);
  const WaveFunction probe = gaussian_state(ps, 0.0, 0.0, 0.25);
  const MeasurementScheme s = unsharp_position_scheme(obj, probe, 1.0, Partition::from_cuts({0.0}));
  const WaveFunction psi = gaussian_state(obj, 0.0, 0.0, 1.0);
  const Povm e = smeared_position_povm(confidence_function(probe, 1.0), s.cells(), obj);
  EXPECT_LT(first_kind_check(s, psi, e), 1e-10);
  EXPECT_GT(repeatability_check(s, psi).max_deficit, 0.01);
}

TEST(VarianceRelation, GaussianDecomposition) {
  const GridSpace obj = make_grid(128, 16.0);
  const WaveFunction psi = gaussian_state(obj, 0.5, 0.0, 0.7);
  const GridSpace ps = make_grid(512, 64.0);
  const WaveFunction probe = gaussian_state(ps, 0.0, 0.0, 2.0);
  const VarianceRelation r = variance_relation_report(psi, probe, 1.0);
  EXPECT_NEAR(r.var_q, 0.7, 1e-10);
  EXPECT_NEAR(r.noise, 2.0, 1e-10);
  EXPECT_LT(std::abs(r.residual()) / r.var_e_measured, 1e-10);
}

TEST(VarianceRelation, NoiseVanishesWithStrongCoupling) {
  const GridSpace obj = make_grid(64, 16.0);
  const WaveFunction psi = gaussian_state(obj, 0.0, 0.0, 0.5);
  double last = kInfinity;
  for (double lambda : {1.0, 2.0, 4.0}) {
    const GridSpace ps = make_grid(static_cast<std::size_t>(256 * lambda), 32.0 * lambda);
    const VarianceRelation r = variance_relation_report(psi, gaussian_state(ps, 0.0, 0.0, 1.0), lambda);
    EXPECT_LT(r.noise, last);
    last = r.noise;
    EXPECT_LT(std::abs(r.residual()), 1e-9);
  }
  EXPECT_NEAR(last, 1.0 / 16.0, 1e-10);
}

TEST(Distributions, PositionAndMomentumOfGaussian) {
  const GridSpace g = make_grid(256, 32.0);
  const WaveFunction psi = gaussian_state(g, 1.0, 0.0, 0.5);
  const ConfidenceFunction q = position_distribution(psi);
  EXPECT_NEAR(q.mean(), 1.0, 1e-10);
  EXPECT_NEAR(q.variance(), 0.5, 1e-10);
  const ConfidenceFunction p = momentum_distribution_of(psi);
  EXPECT_NEAR(p.variance(), 0.5, 1e-10);  // hbar^2 / (4 * 0.5)
}

}  // namespace
}  // namespace povmlab
