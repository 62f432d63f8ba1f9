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
#include <random>

#include "povmlab/discrete.hpp"

namespace povmlab {
namespace {

TEST(DiscreteObservable, SortsAndGroupsDegenerateValues) {
  const GridSpace s = make_index_space(3);
  RVector v(3);
  v << 1.0, -2.0, 1.0;
  const DiscreteObservable a = DiscreteObservable::from_diagonal(s, v);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a.eigenvalues()[0], -2.0);
  EXPECT_NEAR(a.projections()[1].trace().real(), 2.0, 1e-15);
  EXPECT_LT((a.matrix() - CMatrix(v.cast<Complex>().asDiagonal())).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_DOUBLE_EQ(a.min_gap(), 3.0);
}

TEST(DiscreteObservable, RejectsBadProjections) {
  const GridSpace s = make_index_space(2);
  CMatrix p(2, 2);
  p << 0.5, 0.5, 0.5, 0.5;
  const CMatrix q = CMatrix::Identity(2, 2) - p;
  EXPECT_NO_THROW(DiscreteObservable(s, {1.0, -1.0}, {p, q}));
  EXPECT_THROW(DiscreteObservable(s, {1.0, -1.0}, {p, p}), InvalidArgument);
  EXPECT_THROW(DiscreteObservable(s, {1.0}, {p}), InvalidArgument);
  EXPECT_THROW(DiscreteObservable(s, {1.0, 1.0}, {p, q}), InvalidArgument);
  EXPECT_THROW(DiscreteObservable(s, {1.0, 2.0}, {p}), InvalidArgument);
}

TEST(DiscreteScheme, BranchWeightsMatchGaussianTails) {
  // Eigenvalues {0, 1}; midpoint cut at 1/2. With the cut halfway between
  // probe points the cell sums are midpoint-rule integrals of the shifted
  // Gaussian, so they follow erfc up to quadrature error.
  const GridSpace ps = make_grid(512, 32.0);
  const double sigma2 = 0.5;
  const WaveFunction probe = gaussian_state(ps, 0.0, 0.0, sigma2);
  const DiscreteObservable a = DiscreteObservable::on_index_space({0.0, 1.0});
  const double lambda = 21.0 * ps.spacing();
  const MeasurementScheme s = standard_discrete_scheme(a, probe, lambda);
  const auto w = branch_weights(s, a);
  const double tail = 0.5 * std::erfc(0.5 * lambda / std::sqrt(2.0 * sigma2));
  EXPECT_NEAR(w[1][0], tail, 1e-4);
  EXPECT_NEAR(w[0][1], tail, 1e-4);
  EXPECT_NEAR(w[0][0] + w[1][0], 1.0, 1e-12);
}

TEST(DiscreteScheme, ClosedFormMatchesSimulation) {
  const GridSpace ps = make_grid(256, 32.0);
  const WaveFunction probe = gaussian_state(ps, 0.0, 0.0, 1.0);
  const DiscreteObservable a = DiscreteObservable::on_index_space({-1.0, 0.0, 0.5, 2.0});
  for (double lambda : {0.3, 1.0, 2.5}) {
    const MeasurementScheme s = standard_discrete_scheme(a, probe, lambda);
    const Povm closed = measured_effects_discrete(s, a);
    const Povm sim = extract_povm(s, 16);
    EXPECT_LT(max_deviation(closed, sim), 1e-12) << "lambda " << lambda;
    EXPECT_LT(closed.completeness_deviation(), 1e-12);
  }
}

TEST(DiscreteScheme, EffectsCommuteWithProjections) {
  const GridSpace s = make_index_space(3);
  CMatrix u = CMatrix::Zero(3, 3);
  const double r = 1.0 / std::sqrt(2.0);
  u << r, r, 0, r, -r, 0, 0, 0, 1;
  std::vector<CMatrix> proj;
  for (int i = 0; i < 3; ++i) proj.push_back(u.col(i) * u.col(i).adjoint());
  const DiscreteObservable a(s, {0.0, 1.0, 3.0}, proj);
  const GridSpace ps = make_grid(128, 24.0);
  const MeasurementScheme sch = standard_discrete_scheme(a, gaussian_state(ps, 0.0, 0.0, 0.8), 0.9);
  const Povm e = measured_effects_discrete(sch, a);
  EXPECT_LT(commutativity_check(e), 1e-14);
  for (const auto& eff : e.effects()) {
    for (const auto& p : a.projections()) {
      EXPECT_LT((eff.dense() * p - p * eff.dense()).cwiseAbs().maxCoeff(), 1e-14);
    }
  }
}

TEST(DiscreteScheme, ExplicitPartition) {
  const GridSpace ps = make_grid(256, 32.0);
  const WaveFunction probe = gaussian_state(ps, 0.0, 0.0, 1.0);
  const DiscreteObservable a = DiscreteObservable::on_index_space({0.0, 1.0});
  const MeasurementScheme s = standard_discrete_scheme(a, probe, 1.5, Partition::from_cuts({-1.0, 0.0, 1.0}));
  EXPECT_EQ(s.cells().size(), 4u);
  EXPECT_LT(measured_effects_discrete(s, a).completeness_deviation(), 1e-12);
}

class CalibratedTest : public ::testing::Test {
 protected:
  GridSpace ps = make_grid(512, 24.0);
};

TEST_F(CalibratedTest, EffectsEqualProjections) {
  const DiscreteObservable a = DiscreteObservable::on_index_space({-1.0, 0.0, 2.0});
  const CalibratedScheme cal = calibrated_von_neumann_scheme(a, 1.0, 2.0, ps);
  const Povm closed = measured_effects_discrete(cal.scheme, a);
  EXPECT_LT(calibration_deviation(cal, a, closed), 1e-12);
  const Povm sim = extract_povm(cal.scheme, 8);
  EXPECT_LT(calibration_deviation(cal, a, sim), 1e-12);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_DOUBLE_EQ(*cal.pointer_function[cal.eigenvalue_cells[i]], a.eigenvalues()[i]);
  }
}

TEST_F(CalibratedTest, EigenstatesAreReproducedAndRepeatable) {
  const DiscreteObservable a = DiscreteObservable::on_index_space({-1.0, 0.0, 2.0});
  const CalibratedScheme cal = calibrated_von_neumann_scheme(a, 1.0, 2.0, ps);
  for (Eigen::Index j = 0; j < 3; ++j) {
    const WaveFunction e = WaveFunction::from_orthonormal({a.space()}, CVector::Unit(3, j));
    const RVector p = pointer_statistics(cal.scheme, e);
    EXPECT_NEAR(p[static_cast<Eigen::Index>(cal.eigenvalue_cells[static_cast<std::size_t>(j)])], 1.0, 1e-12);
  }
  std::mt19937_64 rng(19);
  std::normal_distribution<double> n(0.0, 1.0);
  CVector c(3);
  for (auto& z : c) z = Complex(n(rng), n(rng));
  c.normalize();
  const WaveFunction psi = WaveFunction::from_orthonormal({a.space()}, c);
  EXPECT_LT(repeatability_check(cal.scheme, psi).max_deficit, 1e-10);
}

TEST_F(CalibratedTest, GapBelowResolutionIsRejected) {
  const DiscreteObservable close = DiscreteObservable::on_index_space({0.0, 0.3});
  EXPECT_THROW(calibrated_von_neumann_scheme(close, 1.0, 1.0, ps), CalibrationError);
  const CalibratedScheme cal = calibrated_von_neumann_scheme(close, 1.0, 4.0, ps);
  EXPECT_LT(calibration_deviation(cal, close, measured_effects_discrete(cal.scheme, close)), 1e-12);
}

TEST_F(CalibratedTest, RejectsBadParameters) {
  const DiscreteObservable a = DiscreteObservable::on_index_space({0.0, 5.0});
  EXPECT_THROW(calibrated_von_neumann_scheme(a, 0.0, 1.0, ps), InvalidArgument);
  EXPECT_THROW(calibrated_von_neumann_scheme(a, 1.0, -1.0, ps), InvalidArgument);
}

TEST(BumpState, CompactSupport) {
  const GridSpace g = make_grid(256, 8.0);
  const WaveFunction b = bump_state(g, 0.5, 0.75);
  for (std::size_t k = 0; k < g.n_points(); ++k) {
    if (std::abs(g.coordinate(k) - 0.5) >= 0.75) {
      EXPECT_EQ(b.amplitudes()[static_cast<Eigen::Index>(k)], Complex(0.0));
    }
  }
  EXPECT_NEAR(b.norm(), 1.0, 1e-12);
}

}  // namespace
}  // namespace povmlab
