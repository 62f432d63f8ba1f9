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

// Arthurs-Kelly joint position-momentum measurement.
//
//   U = exp(-(i/hbar)(lambda Q P_1 - mu P Q_2))
//
// acts on object (x) probe 1 (x) probe 2 as the kernel
//
//   Psi(q, xi1, xi2) = psi(q + mu xi2) phi1(xi1 - lambda q - (lambda mu / 2) xi2) phi2(xi2).
//
// Probe 1 is read in position (scaled by 1/lambda), probe 2 in momentum
// (scaled by 1/mu). The readings are q + e-noise and p + f-noise where
// e is the law of -Q_1/lambda + (mu/2) Q_2 and f the law of -P_2/mu + (lambda/2) P_1.

#ifndef POVMLAB_JOINT_HPP
#define POVMLAB_JOINT_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "povmlab/continuous.hpp"
#include "povmlab/errors.hpp"
#include "povmlab/hilbert.hpp"
#include "povmlab/scheme.hpp"

namespace povmlab {

class JointScheme {
 public:
  JointScheme(GridSpace object_space, WaveFunction probe1, WaveFunction probe2, double lambda, double mu,
              Partition position_cells = Partition::full_line(), Partition momentum_cells = Partition::full_line(),
              PlanckConstant hbar = PlanckConstant{})
      : object_space_(object_space),
        probe1_(std::move(probe1)),
        probe2_(std::move(probe2)),
        lambda_(lambda),
        mu_(mu),
        position_cells_(std::move(position_cells)),
        momentum_cells_(std::move(momentum_cells)),
        hbar_(hbar) {
    object_space_.require_line("joint scheme object");
    probe1_.space().require_line("joint scheme probe 1");
    probe2_.space().require_line("joint scheme probe 2");
    if (!std::isfinite(lambda_) || !std::isfinite(mu_)) throw InvalidArgument("coupling constants must be finite");
    require_localized(probe1_, "probe 1");
    require_localized(probe2_, "probe 2");
  }

  const GridSpace& object_space() const noexcept { return object_space_; }
  const GridSpace& probe1_space() const noexcept { return probe1_.space(); }
  const GridSpace& probe2_space() const noexcept { return probe2_.space(); }
  const WaveFunction& probe1() const noexcept { return probe1_; }
  const WaveFunction& probe2() const noexcept { return probe2_; }
  double lambda() const noexcept { return lambda_; }
  double mu() const noexcept { return mu_; }
  const Partition& position_cells() const noexcept { return position_cells_; }
  const Partition& momentum_cells() const noexcept { return momentum_cells_; }
  PlanckConstant hbar() const noexcept { return hbar_; }

  bool is_joint() const noexcept { return lambda_ != 0.0 && mu_ != 0.0; }

  void require_joint(const char* what) const {
    if (!is_joint()) {
      throw InvalidArgument(std::string(what) + " needs nonzero lambda and mu (got lambda=" +
                            detail::format_number(lambda_) + ", mu=" + detail::format_number(mu_) + ")");
    }
  }

  JointScheme with_couplings(double lambda, double mu) const {
    return JointScheme(object_space_, probe1_, probe2_, lambda, mu, position_cells_, momentum_cells_, hbar_);
  }

  JointScheme with_cells(Partition position, Partition momentum) const {
    return JointScheme(object_space_, probe1_, probe2_, lambda_, mu_, std::move(position), std::move(momentum), hbar_);
  }

 private:
  GridSpace object_space_;
  WaveFunction probe1_;
  WaveFunction probe2_;
  double lambda_;
  double mu_;
  Partition position_cells_;
  Partition momentum_cells_;
  PlanckConstant hbar_;
};

/// Whether the -(lambda mu / 2) xi2 term in probe 1's argument is kept. Dropping
/// it is only useful to show that the variance budget depends on it.
enum class CrossTerm { kInclude, kOmit };

namespace detail {

/// Translation that degrades to a zero-weight placeholder when the shift leaves the grid.
struct Shifted {
  CVector amplitudes;
  double leak;
};

inline Shifted shifted_state(const WaveFunction& psi, double shift) {
  if (shift == 0.0) return {psi.amplitudes(), boundary_mass(psi)};
  try {
    WaveFunction t = translate(psi, shift);
    return {t.amplitudes(), boundary_mass(t)};
  } catch (const LocalizationError&) {
    const double cells = std::round(shift / psi.space().spacing());
    return {translate(psi, cells * psi.space().spacing()).amplitudes(), 1.0};
  }
}

}  // namespace detail

/// Three-factor state object (x) probe 1 (x) probe 2 after the coupling.
inline WaveFunction evolve_joint(const JointScheme& scheme, const WaveFunction& object_state,
                                 CrossTerm cross = CrossTerm::kInclude) {
  detail::require_same(scheme.object_space(), object_state.space(), "joint object state");
  const GridSpace& s0 = scheme.object_space();
  const GridSpace& s1 = scheme.probe1_space();
  const GridSpace& s2 = scheme.probe2_space();
  const auto n0 = static_cast<Eigen::Index>(s0.n_points());
  const auto n1 = static_cast<Eigen::Index>(s1.n_points());
  const auto n2 = static_cast<Eigen::Index>(s2.n_points());
  const double lambda = scheme.lambda();
  const double mu = scheme.mu();
  const double cross_coeff = cross == CrossTerm::kInclude ? 0.5 * lambda * mu : 0.0;
  const CVector& phi2 = scheme.probe2().amplitudes();

  CVector out = CVector::Zero(n0 * n1 * n2);
  double object_leak = 0.0;
  double probe_leak = 0.0;
  for (Eigen::Index j = 0; j < n2; ++j) {
    const double xi2 = s2.coordinate(static_cast<std::size_t>(j));
    const double w2 = std::norm(phi2[j]) * s2.spacing();
    if (w2 == 0.0) continue;
    // psi(q + mu xi2) is psi translated by -mu xi2
    const detail::Shifted obj = detail::shifted_state(object_state, -mu * xi2);
    object_leak += w2 * obj.leak;
    for (Eigen::Index k = 0; k < n0; ++k) {
      const Complex a = obj.amplitudes[k] * phi2[j];
      if (a == Complex(0.0, 0.0)) continue;
      const double q = s0.coordinate(static_cast<std::size_t>(k));
      const detail::Shifted p1 = detail::shifted_state(scheme.probe1(), lambda * q + cross_coeff * xi2);
      probe_leak += std::norm(a) * s0.spacing() * s2.spacing() * p1.leak;
      for (Eigen::Index i = 0; i < n1; ++i) out[(k * n1 + i) * n2 + j] = a * p1.amplitudes[i];
    }
  }
  if (object_leak >= kBoundaryMassTolerance) {
    throw LocalizationError("object factor: momentum coupling shifts mass " + detail::format_number(object_leak) +
                            " into the grid boundary");
  }
  if (probe_leak >= kBoundaryMassTolerance) {
    throw LocalizationError("probe 1 factor: position coupling shifts mass " + detail::format_number(probe_leak) +
                            " into the grid boundary");
  }
  return WaveFunction::normalized({s0, s1, s2}, std::move(out));
}

/// Full outcome statistics of a joint run.
struct JointOutcome {
  RVector position_readings;  ///< xi1 / lambda, ascending
  RVector momentum_readings;  ///< p2 / mu, ascending
  Eigen::MatrixXd fine;       ///< fine(i, m): probability of (position_readings[i], momentum_readings[m])
  Eigen::MatrixXd cells;      ///< cells(a, b): probability of position cell a and momentum cell b

  RVector position_marginal() const { return fine.rowwise().sum(); }
  RVector momentum_marginal() const { return fine.colwise().sum().transpose(); }
};

namespace detail {

inline Moments reading_moments(const RVector& x, const RVector& p) {
  const double m = p.dot(x);
  const double v = p.dot((x.array() - m).square().matrix());
  return {m, v};
}

}  // namespace detail

inline JointOutcome simulate_joint(const JointScheme& scheme, const WaveFunction& object_state,
                                   CrossTerm cross = CrossTerm::kInclude) {
  scheme.require_joint("joint distribution");
  const WaveFunction psi = evolve_joint(scheme, object_state, cross);
  const GridSpace& s1 = scheme.probe1_space();
  const GridSpace& s2 = scheme.probe2_space();
  const auto n0 = static_cast<Eigen::Index>(scheme.object_space().n_points());
  const auto n1 = static_cast<Eigen::Index>(s1.n_points());
  const auto n2 = static_cast<Eigen::Index>(s2.n_points());
  const CVector c = psi.orthonormal();

  // fine in native order: probe-1 index i, FFT bin m
  Eigen::MatrixXd native = Eigen::MatrixXd::Zero(n1, n2);
  for (Eigen::Index k = 0; k < n0; ++k) {
    for (Eigen::Index i = 0; i < n1; ++i) {
      const CVector fiber = c.segment((k * n1 + i) * n2, n2);
      if (fiber.squaredNorm() == 0.0) continue;
      native.row(i) += (fft_forward(fiber).cwiseAbs2() / static_cast<double>(n2)).transpose();
    }
  }

  const double lambda = scheme.lambda();
  const double mu = scheme.mu();
  std::vector<std::pair<double, Eigen::Index>> xs;
  std::vector<std::pair<double, Eigen::Index>> ps;
  for (Eigen::Index i = 0; i < n1; ++i) xs.emplace_back(s1.coordinate(static_cast<std::size_t>(i)) / lambda, i);
  for (Eigen::Index m = 0; m < n2; ++m) ps.emplace_back(s2.momentum(static_cast<std::size_t>(m), scheme.hbar()) / mu, m);
  std::sort(xs.begin(), xs.end());
  std::sort(ps.begin(), ps.end());

  JointOutcome out;
  out.position_readings.resize(n1);
  out.momentum_readings.resize(n2);
  out.fine.resize(n1, n2);
  for (Eigen::Index a = 0; a < n1; ++a) {
    out.position_readings[a] = xs[static_cast<std::size_t>(a)].first;
    for (Eigen::Index b = 0; b < n2; ++b) {
      out.fine(a, b) = native(xs[static_cast<std::size_t>(a)].second, ps[static_cast<std::size_t>(b)].second);
    }
  }
  for (Eigen::Index b = 0; b < n2; ++b) out.momentum_readings[b] = ps[static_cast<std::size_t>(b)].first;

  const Partition& px = scheme.position_cells();
  const Partition& py = scheme.momentum_cells();
  out.cells = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(px.size()), static_cast<Eigen::Index>(py.size()));
  double lost = 0.0;
  for (Eigen::Index a = 0; a < n1; ++a) {
    const auto cx = px.locate(out.position_readings[a]);
    for (Eigen::Index b = 0; b < n2; ++b) {
      const auto cy = py.locate(out.momentum_readings[b]);
      if (cx && cy) {
        out.cells(static_cast<Eigen::Index>(*cx), static_cast<Eigen::Index>(*cy)) += out.fine(a, b);
      } else {
        lost += out.fine(a, b);
      }
    }
  }
  if (lost > 1e-8) {
    throw CoverageError("outcome cells miss probability " + detail::format_number(lost) +
                        "; extend the position or momentum partition");
  }
  return out;
}

/// G(X x Y) on the scheme's outcome cells.
inline Eigen::MatrixXd joint_distribution(const JointScheme& scheme, const WaveFunction& object_state) {
  return simulate_joint(scheme, object_state).cells;
}

/// e = e_o * |phi2^(mu/2)|^2: the law of -Q_1/lambda + (mu/2) Q_2. mu may be zero (gives e_o).
inline ConfidenceFunction position_confidence(const JointScheme& scheme) {
  if (scheme.lambda() == 0.0) throw InvalidArgument("position confidence needs lambda != 0");
  return convolve(position_distribution(scheme.probe1(), -1.0 / scheme.lambda()),
                  position_distribution(scheme.probe2(), 0.5 * scheme.mu()));
}

/// f = f_o * |phi1-hat^(lambda/2)|^2: the law of -P_2/mu + (lambda/2) P_1. lambda may be zero (gives f_o).
inline ConfidenceFunction momentum_confidence(const JointScheme& scheme) {
  if (scheme.mu() == 0.0) throw InvalidArgument("momentum confidence needs mu != 0");
  return convolve(momentum_distribution_of(scheme.probe2(), -1.0 / scheme.mu(), scheme.hbar()),
                  momentum_distribution_of(scheme.probe1(), 0.5 * scheme.lambda(), scheme.hbar()));
}

struct ConfidencePair {
  ConfidenceFunction e;
  ConfidenceFunction f;
};

inline ConfidencePair joint_confidence_functions(const JointScheme& scheme) {
  scheme.require_joint("joint confidence functions");
  return {position_confidence(scheme), momentum_confidence(scheme)};
}

namespace detail {

inline RVector labeled_only(const Partition& p, const RVector& values) {
  std::vector<double> out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i].labeled) out.push_back(values[static_cast<Eigen::Index>(i)]);
  }
  return Eigen::Map<RVector>(out.data(), static_cast<Eigen::Index>(out.size()));
}

}  // namespace detail

struct MarginalCheck {
  double position_deviation = 0.0;
  double momentum_deviation = 0.0;
  RVector position_simulated, position_predicted;
  RVector momentum_simulated, momentum_predicted;
};

/// Compares the simulated marginals with (chi_X * e)(Q) and (chi_Y * f)(P).
inline MarginalCheck joint_marginal_check(const JointScheme& scheme, const WaveFunction& object_state) {
  const Eigen::MatrixXd g = joint_distribution(scheme, object_state);
  const ConfidencePair ef = joint_confidence_functions(scheme);
  MarginalCheck r;
  r.position_simulated = g.rowwise().sum();
  r.momentum_simulated = g.colwise().sum().transpose();
  // Predictions use the completed partitions; gap cells are dropped afterwards.
  const Partition px = scheme.position_cells().completed();
  const Partition py = scheme.momentum_cells().completed();
  r.position_predicted = detail::labeled_only(
      px, smeared_position_povm(ef.e, px, scheme.object_space()).probabilities(object_state));
  r.momentum_predicted =
      detail::labeled_only(py, smeared_momentum_probabilities(ef.f, py, object_state, scheme.hbar()));
  r.position_deviation = (r.position_simulated - r.position_predicted).cwiseAbs().maxCoeff();
  r.momentum_deviation = (r.momentum_simulated - r.momentum_predicted).cwiseAbs().maxCoeff();
  return r;
}

namespace detail {

/// Width of uniform finite cells; AlignmentError otherwise.
inline double uniform_width(const Partition& p, const char* axis) {
  const double w = p[0].width();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Cell& c = p[i];
    const bool finite = std::isfinite(c.lo) && std::isfinite(c.hi);
    if (!finite || std::abs(c.width() - w) > 1e-9 * w || (i > 0 && std::abs(p[i - 1].hi - c.lo) > 1e-9 * w)) {
      throw AlignmentError(std::string("covariance check needs contiguous uniform finite ") + axis + " cells");
    }
  }
  return w;
}

inline long whole_multiple(double value, double unit, const std::string& what) {
  const double r = value / unit;
  const double k = std::round(r);
  if (std::abs(r - k) > 1e-9) {
    throw AlignmentError(what + " " + format_number(value) + " is not a multiple of " + format_number(unit));
  }
  return static_cast<long>(k);
}

}  // namespace detail

/// Weyl-displaces the object by (q0, p0) and compares the outcome distribution
/// with the cell-translated original. Cells shifted beyond the partition count
/// with their full probability.
inline double covariance_check(const JointScheme& scheme, const WaveFunction& object_state, double q0, double p0) {
  const GridSpace& s0 = scheme.object_space();
  const double wx = detail::uniform_width(scheme.position_cells(), "position");
  const double wy = detail::uniform_width(scheme.momentum_cells(), "momentum");
  detail::whole_multiple(q0, s0.spacing(), "position displacement");
  detail::whole_multiple(p0, s0.momentum_spacing(scheme.hbar()), "momentum displacement");
  const long sx = detail::whole_multiple(q0, wx, "position displacement");
  const long sy = detail::whole_multiple(p0, wy, "momentum displacement");

  WaveFunction moved = boost(translate(object_state, q0), p0, scheme.hbar());
  require_localized(moved, "displaced object state");
  const Eigen::MatrixXd g0 = joint_distribution(scheme, object_state);
  const Eigen::MatrixXd g1 = joint_distribution(scheme, moved);
  const long nx = static_cast<long>(g0.rows());
  const long ny = static_cast<long>(g0.cols());
  double worst = 0.0;
  for (long a = 0; a < nx; ++a) {
    for (long b = 0; b < ny; ++b) {
      const long ta = a + sx;
      const long tb = b + sy;
      const bool inside = ta >= 0 && ta < nx && tb >= 0 && tb < ny;
      const double target = inside ? g1(ta, tb) : 0.0;
      worst = std::max(worst, std::abs(g0(a, b) - target));
      const long fa = a - sx;
      const long fb = b - sy;
      if (fa < 0 || fa >= nx || fb < 0 || fb >= ny) worst = std::max(worst, std::abs(g1(a, b)));
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Variance budget

struct ProbeVariances {
  double var_q1 = 0.0;
  double var_p1 = 0.0;
  double var_q2 = 0.0;
  double var_p2 = 0.0;
};

struct VarianceBudget {
  double var_e = 0.0;
  double var_f = 0.0;
  double q_term = 0.0;
  double d_term = 0.0;
  double x_ratio = 0.0;
  double product = 0.0;
  double hbar = 1.0;

  double bound() const noexcept { return 0.25 * hbar * hbar; }
  double half_bound() const noexcept { return 0.125 * hbar * hbar; }
  bool q_bound_holds(double slack = 1e-9) const noexcept { return q_term >= half_bound() - slack; }
  bool d_bound_holds(double slack = 1e-9) const noexcept { return d_term >= half_bound() - slack; }
  bool product_bound_holds(double slack = 1e-9) const noexcept { return product >= bound() - slack; }
  /// |product - (q_term + d_term)| / product.
  double decomposition_residual() const noexcept {
    return product == 0.0 ? 0.0 : std::abs(product - (q_term + d_term)) / product;
  }
};

inline VarianceBudget variance_budget(double lambda, double mu, const ProbeVariances& v,
                                      PlanckConstant hbar = PlanckConstant{}) {
  if (lambda == 0.0 || mu == 0.0 || !std::isfinite(lambda) || !std::isfinite(mu)) {
    throw InvalidArgument("variance budget needs finite nonzero lambda and mu");
  }
  const double l2 = lambda * lambda;
  const double m2 = mu * mu;
  VarianceBudget b;
  b.hbar = hbar.hbar;
  b.var_e = v.var_q1 / l2 + 0.25 * m2 * v.var_q2;
  b.var_f = v.var_p2 / m2 + 0.25 * l2 * v.var_p1;
  b.product = b.var_e * b.var_f;
  b.q_term = 0.25 * (v.var_q1 * v.var_p1 + v.var_q2 * v.var_p2);
  b.d_term = v.var_q1 * v.var_p2 / (l2 * m2) + l2 * m2 / 16.0 * v.var_q2 * v.var_p1;
  b.x_ratio = 16.0 * v.var_q1 * v.var_p2 / (l2 * m2 * hbar.hbar * hbar.hbar);
  return b;
}

/// Minimal-uncertainty probe variances for Gaussian probes of the given position variances.
inline ProbeVariances gaussian_probe_variances(double var_q1, double var_q2, PlanckConstant hbar = PlanckConstant{}) {
  const double h2 = hbar.hbar * hbar.hbar;
  return {var_q1, h2 / (4.0 * var_q1), var_q2, h2 / (4.0 * var_q2)};
}

inline ProbeVariances probe_variances(const JointScheme& scheme) {
  const auto c1 = canonical_operators(scheme.probe1_space(), scheme.hbar());
  const auto c2 = canonical_operators(scheme.probe2_space(), scheme.hbar());
  return {moments(c1.position, scheme.probe1()).variance, moments(c1.momentum, scheme.probe1()).variance,
          moments(c2.position, scheme.probe2()).variance, moments(c2.momentum, scheme.probe2()).variance};
}

/// Budget from the probe states' grid moments.
inline VarianceBudget variance_budget(const JointScheme& scheme) {
  return variance_budget(scheme.lambda(), scheme.mu(), probe_variances(scheme), scheme.hbar());
}

struct ReadingMoments {
  Moments position;
  Moments momentum;
};

/// Mean and variance of the simulated position and momentum readings.
inline ReadingMoments simulated_reading_moments(const JointScheme& scheme, const WaveFunction& object_state,
                                                CrossTerm cross = CrossTerm::kInclude) {
  const JointOutcome o = simulate_joint(scheme.with_cells(Partition::full_line(), Partition::full_line()),
                                        object_state, cross);
  return {detail::reading_moments(o.position_readings, o.position_marginal()),
          detail::reading_moments(o.momentum_readings, o.momentum_marginal())};
}

}  // namespace povmlab

#endif  // POVMLAB_JOINT_HPP
