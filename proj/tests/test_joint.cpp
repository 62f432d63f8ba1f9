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
#include <vector>

#include "povmlab/continuous.hpp"
#include "povmlab/joint.hpp"

namespace povmlab {
namespace {

class JointTest : public ::testing::Test {
 protected:
  GridSpace s0 = make_grid(64, 16.0);
  GridSpace s1 = make_grid(64, 16.0);
  GridSpace s2 = make_grid(64, 32.0);
  WaveFunction phi1 = gaussian_state(s1, 0.0, 0.0, 0.5);
  WaveFunction phi2 = gaussian_state(s2, 0.0, 0.0, 0.5);

  Partition position_cells() const {
    std::vector<double> e;
    for (int k = 0; k <= 32; ++k) e.push_back(-8.125 + 0.5 * k);
    return Partition::from_edges(e);
  }
  Partition momentum_cells() const {
    const double dp2 = s2.momentum_spacing(PlanckConstant{});
    std::vector<double> e;
    for (int k = -17; k <= 16; ++k) e.push_back((2 * k + 0.5) * dp2);
    return Partition::from_edges(e);
  }
  JointScheme scheme(double lambda = 1.0, double mu = 1.0) const {
    return JointScheme(s0, phi1, phi2, lambda, mu, position_cells(), momentum_cells());
  }
};

TEST_F(JointTest, ZeroCouplingIsIdentity) {
  const WaveFunction psi = gaussian_state(s0, 0.5, 0.0, 0.7);
  const WaveFunction out = evolve_joint(scheme(0.0, 0.0), psi);
  const WaveFunction expect = tensor_state({psi, phi1, phi2});
  EXPECT_LT((out.orthonormal() - expect.orthonormal()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(simulate_joint(scheme(0.0, 1.0), psi), InvalidArgument);
}

TEST_F(JointTest, NoMomentumCouplingReducesToPositionScheme) {
  const WaveFunction psi = gaussian_state(s0, 0.0, 0.0, 0.5);
  const double lambda = 0.5;
  const CVector joint = evolve_joint(scheme(lambda, 0.0), psi).orthonormal();
  const MeasurementScheme two = unsharp_position_scheme(s0, phi1, lambda, Partition::full_line());
  const CVector body = evolve_scheme(two, psi).orthonormal();
  const CVector c2 = phi2.orthonormal();
  const Eigen::Index n2 = c2.size();
  double worst = 0.0;
  for (Eigen::Index a = 0; a < body.size(); ++a) {
    worst = std::max(worst, (joint.segment(a * n2, n2) - body[a] * c2).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-13);
}

TEST_F(JointTest, OutcomesAreNormalizedAndSymmetric) {
  const JointOutcome o = simulate_joint(scheme(), gaussian_state(s0, 0.0, 0.0, 0.5));
  EXPECT_NEAR(o.fine.sum(), 1.0, 1e-12);
  EXPECT_NEAR(o.cells.sum(), 1.0, 1e-9);
  const RVector px = o.position_marginal();
  const RVector pp = o.momentum_marginal();
  EXPECT_NEAR(px.dot(o.position_readings), 0.0, 1e-12);
  // the FFT momentum lattice has one more negative bin than positive ones
  EXPECT_NEAR(pp.dot(o.momentum_readings), 0.0, 1e-7);
  for (Eigen::Index i = 1; i < o.position_readings.size(); ++i) {
    EXPECT_LT(o.position_readings[i - 1], o.position_readings[i]);
  }
}

TEST_F(JointTest, MarginalsAreSmearedSharpDistributions) {
  const MarginalCheck mc = joint_marginal_check(scheme(), gaussian_state(s0, 0.3, 0.0, 0.5));
  EXPECT_LT(mc.position_deviation, 1e-6);
  EXPECT_LT(mc.momentum_deviation, 1e-6);
}

TEST_F(JointTest, PositionMarginalForEveryCoupling) {
  // lambda * dq stays a multiple of the probe-1 spacing and the cell edges sit
  // between reading points.
  const GridSpace wide = make_grid(512, 64.0);
  std::vector<double> edges{-kInfinity};
  for (int k = 0; k <= 32; ++k) edges.push_back(-8.125 + 0.5 * k);
  edges.push_back(kInfinity);
  for (double lambda : {0.5, 1.0, 2.0}) {
    const JointScheme js(s0, gaussian_state(wide, 0.0, 0.0, 0.5), phi2, lambda, 1.0,
                         Partition::from_edges(edges).snapped(wide.spacing() / lambda), momentum_cells());
    const MarginalCheck mc = joint_marginal_check(js, gaussian_state(s0, 0.3, 0.0, 0.5));
    EXPECT_LT(mc.position_deviation, 1e-6) << "lambda " << lambda;
  }
}

TEST_F(JointTest, ReadingVarianceFollowsBudget) {
  const JointScheme js = scheme();
  const WaveFunction psi = gaussian_state(s0, 0.0, 0.0, 0.5);
  const ReadingMoments rm = simulated_reading_moments(js, psi);
  const VarianceBudget b = variance_budget(js);
  const auto ops = canonical_operators(s0);
  const double var_q = moments(ops.position, psi).variance;
  const double var_p = moments(ops.momentum, psi).variance;
  EXPECT_NEAR((rm.position.variance - var_q) / b.var_e, 1.0, 1e-6);
  EXPECT_NEAR((rm.momentum.variance - var_p) / b.var_f, 1.0, 1e-6);
}

TEST_F(JointTest, DroppingCrossTermBreaksTheBudget) {
  // probe 1 needs room: without the cross term its shift does not offset the object's
  const JointScheme js(s0, gaussian_state(make_grid(128, 32.0), 0.0, 0.0, 0.5), phi2, 1.0, 1.0);
  const WaveFunction psi = gaussian_state(s0, 0.0, 0.0, 0.5);
  const double var_q = moments(canonical_operators(s0).position, psi).variance;
  const double with = simulated_reading_moments(js, psi, CrossTerm::kInclude).position.variance - var_q;
  const double without = simulated_reading_moments(js, psi, CrossTerm::kOmit).position.variance - var_q;
  const VarianceBudget b = variance_budget(js);
  EXPECT_NEAR(with, b.var_e, 1e-6 * b.var_e);
  // without it the object spread mu^2 Var(Q2) enters in full instead of a quarter of it
  EXPECT_NEAR(without - b.var_e, 0.75 * 0.5, 1e-6);
}

TEST_F(JointTest, CovarianceUnderDisplacement) {
  const JointScheme js = scheme();
  // momentum cells are two probe-2 bins wide, one object momentum step
  const double p0 = s0.momentum_spacing(PlanckConstant{});
  ASSERT_NEAR(p0, 2.0 * s2.momentum_spacing(PlanckConstant{}), 1e-15);
  // start half a displacement off centre in both q and p
  const WaveFunction psi = gaussian_state(s0, -0.25, -p0, 0.5);
  EXPECT_EQ(covariance_check(js, psi, 0.0, 0.0), 0.0);
  // one position cell and two momentum cells of shift
  EXPECT_LT(covariance_check(js, psi, 0.5, 2.0 * p0), 1e-6);
}

TEST_F(JointTest, CovarianceNeedsAlignedShifts) {
  const JointScheme js = scheme();
  const WaveFunction psi = gaussian_state(s0, 0.0, 0.0, 0.5);
  EXPECT_THROW(covariance_check(js, psi, 0.3, 0.0), AlignmentError);
  EXPECT_THROW(covariance_check(js, psi, 0.25, 0.0), AlignmentError);  // on the grid but not a cell width
  const JointScheme ragged = js.with_cells(Partition::from_cuts({0.0}), momentum_cells());
  EXPECT_THROW(covariance_check(ragged, psi, 0.0, 0.0), AlignmentError);
}

TEST(VarianceBudget, WorkedExamples) {
  const VarianceBudget sat = variance_budget(1.0, 1.0, gaussian_probe_variances(0.25, 1.0));
  EXPECT_NEAR(sat.var_e, 0.5, 1e-15);
  EXPECT_NEAR(sat.var_f, 0.5, 1e-15);
  EXPECT_NEAR(sat.product, 0.25, 1e-15);
  EXPECT_NEAR(sat.x_ratio, 1.0, 1e-15);
  EXPECT_NEAR(sat.q_term, 0.125, 1e-15);
  EXPECT_NEAR(sat.d_term, 0.125, 1e-15);

  const VarianceBudget b = variance_budget(1.0, 1.0, gaussian_probe_variances(0.5, 0.5));
  EXPECT_NEAR(b.var_e, 0.625, 1e-15);
  EXPECT_NEAR(b.var_f, 0.625, 1e-15);
  EXPECT_NEAR(b.product, 0.390625, 1e-15);
  EXPECT_LT(b.decomposition_residual(), 1e-14);
  EXPECT_TRUE(b.product_bound_holds());
  EXPECT_THROW(variance_budget(0.0, 1.0, gaussian_probe_variances(0.5, 0.5)), InvalidArgument);
}

TEST(VarianceBudget, ScalesOppositelyInLambda) {
  const ProbeVariances v = gaussian_probe_variances(0.4, 0.9);
  const double mu = 0.7;
  const VarianceBudget a = variance_budget(1.0, mu, v);
  const VarianceBudget b = variance_budget(2.0, mu, v);
  const double e_fixed = 0.25 * mu * mu * v.var_q2;
  const double f_fixed = v.var_p2 / (mu * mu);
  EXPECT_NEAR(b.var_e - e_fixed, 0.25 * (a.var_e - e_fixed), 1e-14);
  EXPECT_NEAR(b.var_f - f_fixed, 4.0 * (a.var_f - f_fixed), 1e-14);
}

TEST(VarianceBudget, PlanckConstantScaling) {
  const PlanckConstant h{2.0};
  const VarianceBudget b = variance_budget(1.0, 1.0, gaussian_probe_variances(0.5, 2.0, h), h);
  EXPECT_NEAR(b.product, b.bound(), 1e-12);
  EXPECT_NEAR(b.bound(), 1.0, 1e-15);
}

TEST(JointScheme, RejectsNonFiniteCouplings) {
  const GridSpace g = make_grid(64, 16.0);
  const WaveFunction phi = gaussian_state(g, 0.0, 0.0, 0.5);
  EXPECT_THROW(JointScheme(g, phi, phi, kInfinity, 1.0), InvalidArgument);
  EXPECT_THROW(JointScheme(g, phi, phi, 1.0, std::nan("")), InvalidArgument);
}

}  // namespace
}  // namespace povmlab
