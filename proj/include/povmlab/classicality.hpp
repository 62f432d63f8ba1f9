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

// Quasi-classical regime of the joint measurement.
//
//   C1  Var(Q) << Var(e),  Var(P) << Var(f)
//   C2  the cross-noise terms of Var(e), Var(f) are small against the direct ones
//   C3  Var(e) Var(f) >> hbar^2 / 4
//   C4  the object state is barely disturbed
//
// Every "<<" is reported as a ratio and compared with a threshold epsilon.

#ifndef POVMLAB_CLASSICALITY_HPP
#define POVMLAB_CLASSICALITY_HPP

#include <algorithm>
#include <array>
#include <cmath>

#include "povmlab/errors.hpp"
#include "povmlab/hilbert.hpp"
#include "povmlab/joint.hpp"

namespace povmlab {

/// Slack used when asserting the inequality chains below.
inline constexpr double kChainSlack = 1e-9;

struct ClassicalityReport {
  double epsilon = 0.01;
  double q_true = 0.0;  ///< <Q> in the object state
  double p_true = 0.0;  ///< <P> in the object state
  double var_q = 0.0;
  double var_p = 0.0;
  VarianceBudget budget;

  double c1_position = 0.0;  ///< Var(Q) / Var(e)
  double c1_momentum = 0.0;  ///< Var(P) / Var(f)
  double c2_position = 0.0;  ///< (mu^2/4) Var(Q_2) / (Var(Q_1) / lambda^2)
  double c2_momentum = 0.0;  ///< (lambda^2/4) Var(P_1) / (Var(P_2) / mu^2)
  double c3_ratio = 0.0;     ///< hbar^2 / (4 Var(e) Var(f))
  double c4_disturbance = 0.0;

  bool c1 = false;
  bool c2 = false;
  bool c3 = false;

  // C1 => C3: c3_ratio = kappa * c1_position * c1_momentum.
  double kappa = 0.0;  ///< hbar^2 / (4 Var(Q) Var(P)), at most 1
  bool c1_implies_c3 = true;

  // Var(e)Var(f) >= Var(e_o)Var(f_o) >= hbar^2 / (16 sqrt(r1 r2)), hence c3_ratio <= 4 sqrt(r1 r2).
  double var_e_o = 0.0;
  double var_f_o = 0.0;
  double undisturbed_product = 0.0;
  double chain_lower = 0.0;
  double c3_bound_from_c2 = 0.0;
  bool chain_holds = false;

  /// Probability of |q - q_o| <= n sd(e) and |p - p_o| <= n sd(f), n = 1, 2, 3.
  std::array<double, 3> coverage{};

  bool classical() const noexcept { return c1 && c2 && c3; }
};

/// 1 - <psi| T |psi> for the object's unconditional post-measurement state T.
inline double disturbance_metric(const JointScheme& scheme, const WaveFunction& object_state) {
  if (scheme.lambda() == 0.0 && scheme.mu() == 0.0) return 0.0;
  const WaveFunction psi = evolve_joint(scheme, object_state);
  const DensityOperator t = partial_trace(psi, 0);
  return std::clamp(1.0 - t.fidelity_with(object_state), 0.0, 1.0);
}

inline ClassicalityReport classicality_report(const JointScheme& scheme, const WaveFunction& object_state,
                                              double epsilon = 0.01) {
  if (!scheme.is_joint()) {
    throw InvalidArgument("classicality report needs a joint scheme (lambda and mu nonzero)");
  }
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  const auto obj = canonical_operators(scheme.object_space(), scheme.hbar());
  const Moments mq = moments(obj.position, object_state);
  const Moments mp = moments(obj.momentum, object_state);
  const ProbeVariances pv = probe_variances(scheme);
  const double l2 = scheme.lambda() * scheme.lambda();
  const double m2 = scheme.mu() * scheme.mu();
  const double h2 = scheme.hbar().hbar * scheme.hbar().hbar;

  ClassicalityReport r;
  r.epsilon = epsilon;
  r.q_true = mq.expectation;
  r.p_true = mp.expectation;
  r.var_q = mq.variance;
  r.var_p = mp.variance;
  r.budget = variance_budget(scheme.lambda(), scheme.mu(), pv, scheme.hbar());

  r.c1_position = r.var_q / r.budget.var_e;
  r.c1_momentum = r.var_p / r.budget.var_f;
  r.var_e_o = pv.var_q1 / l2;
  r.var_f_o = pv.var_p2 / m2;
  r.c2_position = 0.25 * m2 * pv.var_q2 / r.var_e_o;
  r.c2_momentum = 0.25 * l2 * pv.var_p1 / r.var_f_o;
  r.c3_ratio = h2 / (4.0 * r.budget.product);

  r.c1 = r.c1_position <= epsilon && r.c1_momentum <= epsilon;
  r.c2 = r.c2_position <= epsilon && r.c2_momentum <= epsilon;
  r.c3 = r.c3_ratio <= epsilon;

  r.kappa = h2 / (4.0 * r.var_q * r.var_p);
  if (r.c1) r.c1_implies_c3 = r.c3_ratio <= r.kappa * epsilon * epsilon * (1.0 + kChainSlack);

  r.undisturbed_product = r.var_e_o * r.var_f_o;
  const double rr = std::sqrt(r.c2_position * r.c2_momentum);
  r.chain_lower = rr > 0.0 ? h2 / (16.0 * rr) : kInfinity;
  r.c3_bound_from_c2 = 4.0 * rr;
  const double slack = kChainSlack * std::max(1.0, r.budget.product);
  r.chain_holds = r.budget.product >= r.undisturbed_product - slack &&
                  r.undisturbed_product >= r.chain_lower - slack &&
                  r.c3_ratio <= r.c3_bound_from_c2 + kChainSlack;

  r.c4_disturbance = disturbance_metric(scheme, object_state);

  const JointOutcome o = simulate_joint(scheme.with_cells(Partition::full_line(), Partition::full_line()), object_state);
  const double se = std::sqrt(r.budget.var_e);
  const double sf = std::sqrt(r.budget.var_f);
  for (int n = 1; n <= 3; ++n) {
    double s = 0.0;
    for (Eigen::Index a = 0; a < o.fine.rows(); ++a) {
      if (std::abs(o.position_readings[a] - r.q_true) > n * se) continue;
      for (Eigen::Index b = 0; b < o.fine.cols(); ++b) {
        if (std::abs(o.momentum_readings[b] - r.p_true) <= n * sf) s += o.fine(a, b);
      }
    }
    r.coverage[static_cast<std::size_t>(n - 1)] = s;
  }
  return r;
}

}  // namespace povmlab

#endif  // POVMLAB_CLASSICALITY_HPP
