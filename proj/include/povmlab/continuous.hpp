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

// Unsharp position measurement: A = Q coupled to the probe momentum.
//
// The pointer reading divided by lambda equals q + xi/lambda, so the
// measured POVM is the position spectral measure smeared by the
// distribution e of -Q_1/lambda in the probe state. On a grid e is a
// discrete distribution and the smearing is an exact finite sum.

#ifndef POVMLAB_CONTINUOUS_HPP
#define POVMLAB_CONTINUOUS_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "povmlab/errors.hpp"
#include "povmlab/hilbert.hpp"
#include "povmlab/scheme.hpp"

namespace povmlab {

/// Weights below this are dropped from convolutions.
inline constexpr double kConfidencePruneWeight = 1e-22;

/// Discrete probability distribution on sorted points. The density is the
/// weight divided by the width of the point's midpoint cell.
class ConfidenceFunction {
 public:
  ConfidenceFunction(std::vector<double> points, std::vector<double> weights) {
    if (points.empty() || points.size() != weights.size()) {
      throw InvalidArgument("confidence function needs one weight per point");
    }
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return points[a] < points[b]; });
    for (std::size_t i : order) {
      if (!std::isfinite(points[i])) throw InvalidArgument("confidence points must be finite");
      if (weights[i] < -1e-12) throw InvalidArgument("confidence weights must be nonnegative");
      if (!points_.empty() && points_.back() == points[i]) {
        weights_.back() += std::max(0.0, weights[i]);
        continue;
      }
      points_.push_back(points[i]);
      weights_.push_back(std::max(0.0, weights[i]));
    }
    const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-8) {
      throw InvalidArgument("confidence weights sum to " + std::to_string(total) + ", not 1");
    }
    double m = 0.0;
    for (std::size_t i = 0; i < points_.size(); ++i) m += weights_[i] * points_[i];
    double v = 0.0;
    for (std::size_t i = 0; i < points_.size(); ++i) v += weights_[i] * (points_[i] - m) * (points_[i] - m);
    mean_ = m;
    variance_ = v;
  }

  /// A point mass at `x`.
  static ConfidenceFunction delta(double x) { return ConfidenceFunction({x}, {1.0}); }

  const std::vector<double>& points() const noexcept { return points_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return points_.size(); }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept { return variance_; }

  std::vector<double> density() const {
    std::vector<double> d(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) d[i] = weights_[i] / cell_width(i);
    return d;
  }

  /// Total weight at points <= x.
  double cumulative(double x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < points_.size() && points_[i] <= x; ++i) s += weights_[i];
    return s;
  }

  /// Distribution of x -> x + shift.
  ConfidenceFunction shifted(double shift) const {
    std::vector<double> p = points_;
    for (auto& x : p) x += shift;
    return ConfidenceFunction(std::move(p), weights_);
  }

 private:
  double cell_width(std::size_t i) const {
    const std::size_t n = points_.size();
    if (n == 1) return 1.0;
    if (i == 0) return points_[1] - points_[0];
    if (i == n - 1) return points_[n - 1] - points_[n - 2];
    return 0.5 * (points_[i + 1] - points_[i - 1]);
  }

  std::vector<double> points_;
  std::vector<double> weights_;
  double mean_ = 0.0;
  double variance_ = 0.0;
};

/// Distribution of X + Y for independent X ~ a, Y ~ b. Sums that agree
/// to 1e-12 (relative to the spread) are merged; means and variances add.
inline ConfidenceFunction convolve(const ConfidenceFunction& a, const ConfidenceFunction& b) {
  std::vector<std::pair<double, double>> terms;
  terms.reserve(a.size() * b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double w = a.weights()[i] * b.weights()[j];
      if (w > kConfidencePruneWeight) terms.emplace_back(a.points()[i] + b.points()[j], w);
    }
  }
  std::sort(terms.begin(), terms.end());
  double scale = 0.0;
  for (const auto& t : terms) scale = std::max(scale, std::abs(t.first));
  const double tol = 1e-12 * std::max(1.0, scale);
  std::vector<double> p;
  std::vector<double> w;
  double total = 0.0;
  for (const auto& [x, wt] : terms) {
    total += wt;
    if (!p.empty() && x - p.back() <= tol) {
      w.back() += wt;
    } else {
      p.push_back(x);
      w.push_back(wt);
    }
  }
  for (auto& v : w) v /= total;
  return ConfidenceFunction(std::move(p), std::move(w));
}

/// Distribution of scale * X.
inline ConfidenceFunction scaled(const ConfidenceFunction& c, double scale) {
  if (scale == 0.0) return ConfidenceFunction::delta(0.0);
  std::vector<double> p = c.points();
  for (auto& x : p) x *= scale;
  return ConfidenceFunction(std::move(p), c.weights());
}

/// Position distribution of a single-factor state, scaled by `scale`.
inline ConfidenceFunction position_distribution(const WaveFunction& psi, double scale = 1.0) {
  const RVector w = position_probabilities(psi);
  std::vector<double> p(static_cast<std::size_t>(w.size()));
  std::vector<double> wt(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    p[k] = scale * psi.space().coordinate(k);
    wt[k] = w[static_cast<Eigen::Index>(k)];
  }
  if (scale == 0.0) return ConfidenceFunction::delta(0.0);
  return ConfidenceFunction(std::move(p), std::move(wt));
}

/// Momentum distribution of a single-factor state, scaled by `scale`.
inline ConfidenceFunction momentum_distribution_of(const WaveFunction& psi, double scale = 1.0,
                                                   PlanckConstant hbar = PlanckConstant{}) {
  if (scale == 0.0) return ConfidenceFunction::delta(0.0);
  const MomentumDistribution md = momentum_distribution(psi, hbar);
  std::vector<double> p(static_cast<std::size_t>(md.momenta.size()));
  std::vector<double> wt(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    p[k] = scale * md.momenta[static_cast<Eigen::Index>(k)];
    wt[k] = md.probabilities[static_cast<Eigen::Index>(k)];
  }
  return ConfidenceFunction(std::move(p), std::move(wt));
}

/// e(x) = lambda |phi(-lambda x)|^2: the distribution of -Q_1 / lambda.
inline ConfidenceFunction confidence_function(const WaveFunction& probe, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be positive");
  return position_distribution(probe, -1.0 / lambda);
}

/// Matrix S(k, c) = (chi_{cell c} * e)(values[k]) = P(values[k] - Y in cell c), Y ~ e.
///
/// Cells need not cover the line, but every value must be covered up to
/// 1e-8; otherwise a CoverageError names the first uncovered value.
inline Eigen::MatrixXd smeared_indicators(const ConfidenceFunction& e, const Partition& partition,
                                          const RVector& values) {
  const auto& y = e.points();
  std::vector<double> cum(y.size() + 1, 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) cum[i + 1] = cum[i] + e.weights()[i];
  // weight of Y in (lo, hi]
  auto mass = [&](double lo, double hi) {
    const auto a = std::upper_bound(y.begin(), y.end(), lo) - y.begin();
    const auto b = std::upper_bound(y.begin(), y.end(), hi) - y.begin();
    return b > a ? cum[static_cast<std::size_t>(b)] - cum[static_cast<std::size_t>(a)] : 0.0;
  };
  const auto n = values.size();
  const auto m = static_cast<Eigen::Index>(partition.size());
  Eigen::MatrixXd s(n, m);
  for (Eigen::Index k = 0; k < n; ++k) {
    double covered = 0.0;
    for (Eigen::Index c = 0; c < m; ++c) {
      const Cell& cell = partition[static_cast<std::size_t>(c)];
      // lo <= q - y < hi  <=>  q - hi < y <= q - lo
      const double v = std::clamp(mass(values[k] - cell.hi, values[k] - cell.lo), 0.0, 1.0);
      s(k, c) = v;
      covered += v;
    }
    if (covered < 1.0 - 1e-8) {
      throw CoverageError("partition leaves mass " + detail::format_number(1.0 - covered) + " uncovered at value " +
                          detail::format_number(values[k]));
    }
  }
  return s;
}

/// E(X) = (chi_X * e)(Q), one diagonal effect per cell.
inline Povm smeared_position_povm(const ConfidenceFunction& e, const Partition& partition, const GridSpace& object_space) {
  const Eigen::MatrixXd s = smeared_indicators(e, partition, object_space.coordinates());
  std::vector<std::string> labels;
  std::vector<Effect> effects;
  for (std::size_t c = 0; c < partition.size(); ++c) {
    labels.push_back(partition[c].label);
    effects.push_back(Effect::diagonal(object_space, s.col(static_cast<Eigen::Index>(c))));
  }
  return Povm(std::move(labels), std::move(effects));
}

/// Probabilities of (chi_Y * f)(P) on a state, computed from its momentum distribution.
inline RVector smeared_momentum_probabilities(const ConfidenceFunction& f, const Partition& partition,
                                              const WaveFunction& psi, PlanckConstant hbar = PlanckConstant{}) {
  const MomentumDistribution md = momentum_distribution(psi, hbar);
  const Eigen::MatrixXd s = smeared_indicators(f, partition, md.momenta);
  return s.transpose() * md.probabilities;
}

/// Scheme for A = Q with pointer Q_1. Cell edges are moved to the midpoints
/// of the reading lattice (spacing d_xi / lambda) so indicator functions are exact.
inline MeasurementScheme unsharp_position_scheme(const GridSpace& object_space, const WaveFunction& probe, double lambda,
                                                 const Partition& partition, PlanckConstant hbar = PlanckConstant{}) {
  object_space.require_line("unsharp position scheme");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be positive");
  const Partition cells = partition.snapped(probe.space().spacing() / lambda);
  PointerSpec pointer{canonical_operators(probe.space(), hbar).position, cells, lambda, {}};
  return MeasurementScheme(object_space, probe, std::move(pointer), ShiftCoupling{object_space.coordinates(), lambda},
                           hbar);
}

/// Distribution of the pointer reading (in object units) for one object state.
inline ConfidenceFunction reading_distribution(const MeasurementScheme& scheme, const WaveFunction& object_state) {
  const EvolvedRows ev = scheme.evolve_coefficients(object_state.orthonormal());
  const RVector pi = scheme.pointer_point_probabilities(ev.rows);
  std::vector<double> p(static_cast<std::size_t>(pi.size()));
  std::vector<double> w(p.size());
  for (std::size_t l = 0; l < p.size(); ++l) {
    p[l] = scheme.reading(l);
    w[l] = pi[static_cast<Eigen::Index>(l)];
  }
  return ConfidenceFunction(std::move(p), std::move(w));
}

struct VarianceRelation {
  double var_e_measured = 0.0;  ///< variance of the simulated reading distribution
  double var_q = 0.0;           ///< Var(Q) in the object state
  double noise = 0.0;           ///< Var(Q_1) / lambda^2 in the probe state
  double residual() const noexcept { return var_e_measured - var_q - noise; }
};

/// Simulates the unsharp position scheme and decomposes the reading variance.
inline VarianceRelation variance_relation_report(const WaveFunction& object_state, const WaveFunction& probe,
                                                 double lambda, PlanckConstant hbar = PlanckConstant{}) {
  const MeasurementScheme scheme =
      unsharp_position_scheme(object_state.space(), probe, lambda, Partition::full_line(), hbar);
  const ConfidenceFunction readings = reading_distribution(scheme, object_state);
  VarianceRelation r;
  r.var_e_measured = readings.variance();
  r.var_q = moments(canonical_operators(object_state.space(), hbar).position, object_state).variance;
  r.noise = moments(canonical_operators(probe.space(), hbar).position, probe).variance / (lambda * lambda);
  return r;
}

}  // namespace povmlab

#endif  // POVMLAB_CONTINUOUS_HPP
