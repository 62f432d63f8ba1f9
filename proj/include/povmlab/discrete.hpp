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

// Standard model for an observable with a finite spectrum A = sum_i a_i P_i.
//
// The probe is translated by lambda * a_i on the range of P_i, so every
// measured effect is a weighted sum of the spectral projections, with the
// weights given by the pointer statistics of the shifted probe branches.

#ifndef POVMLAB_DISCRETE_HPP
#define POVMLAB_DISCRETE_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "povmlab/errors.hpp"
#include "povmlab/hilbert.hpp"
#include "povmlab/scheme.hpp"

namespace povmlab {

class DiscreteObservable {
 public:
  /// Projectors are given in the orthonormal basis of `space`. Eigenvalues are
  /// reordered ascending together with their projectors.
  DiscreteObservable(GridSpace space, std::vector<double> eigenvalues, std::vector<CMatrix> projections)
      : space_(space) {
    if (eigenvalues.empty() || eigenvalues.size() != projections.size()) {
      throw InvalidArgument("discrete observable needs one projection per eigenvalue");
    }
    std::vector<std::size_t> order(eigenvalues.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return eigenvalues[a] < eigenvalues[b]; });
    for (std::size_t i : order) {
      eigenvalues_.push_back(eigenvalues[i]);
      projections_.push_back(std::move(projections[i]));
    }
    validate();
  }

  /// Spectral projections of the diagonal operator diag(values) on `space`.
  static DiscreteObservable from_diagonal(GridSpace space, const RVector& values) {
    if (static_cast<std::size_t>(values.size()) != space.n_points()) {
      throw InvalidArgument("diagonal values do not match the space");
    }
    std::vector<double> distinct(values.data(), values.data() + values.size());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    const auto n = values.size();
    std::vector<CMatrix> proj;
    for (double a : distinct) {
      CMatrix p = CMatrix::Zero(n, n);
      for (Eigen::Index k = 0; k < n; ++k) {
        if (values[k] == a) p(k, k) = 1.0;
      }
      proj.push_back(std::move(p));
    }
    return DiscreteObservable(space, std::move(distinct), std::move(proj));
  }

  /// Diagonal observable on an m-dimensional index space (m = values.size()).
  static DiscreteObservable on_index_space(const std::vector<double>& values) {
    const GridSpace space = make_index_space(values.size());
    return from_diagonal(space, Eigen::Map<const RVector>(values.data(), static_cast<Eigen::Index>(values.size())));
  }

  const GridSpace& space() const noexcept { return space_; }
  const std::vector<double>& eigenvalues() const noexcept { return eigenvalues_; }
  const std::vector<CMatrix>& projections() const noexcept { return projections_; }
  std::size_t size() const noexcept { return eigenvalues_.size(); }

  CMatrix matrix() const {
    CMatrix a = CMatrix::Zero(projections_.front().rows(), projections_.front().cols());
    for (std::size_t i = 0; i < size(); ++i) a += eigenvalues_[i] * projections_[i];
    return a;
  }

  SpectralObservable spectral() const { return {eigenvalues_, projections_}; }

  /// Smallest gap between consecutive eigenvalues (infinite for one eigenvalue).
  double min_gap() const noexcept {
    double g = kInfinity;
    for (std::size_t i = 1; i < size(); ++i) g = std::min(g, eigenvalues_[i] - eigenvalues_[i - 1]);
    return g;
  }

 private:
  void validate() const {
    const auto n = static_cast<Eigen::Index>(space_.n_points());
    CMatrix sum = CMatrix::Zero(n, n);
    for (std::size_t i = 0; i < size(); ++i) {
      const CMatrix& p = projections_[i];
      if (p.rows() != n || p.cols() != n) throw InvalidArgument("projection does not match the object space");
      if (!std::isfinite(eigenvalues_[i])) throw InvalidArgument("eigenvalues must be finite");
      if (i > 0 && eigenvalues_[i] == eigenvalues_[i - 1]) throw InvalidArgument("eigenvalues must be distinct");
      if ((p * p - p).cwiseAbs().maxCoeff() > 1e-10 || (p - p.adjoint()).cwiseAbs().maxCoeff() > 1e-10) {
        throw InvalidArgument("P_" + std::to_string(i) + " is not an orthogonal projection");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if ((p * projections_[j]).cwiseAbs().maxCoeff() > 1e-10) {
          throw InvalidArgument("P_" + std::to_string(j) + " and P_" + std::to_string(i) + " are not orthogonal");
        }
      }
      sum += p;
    }
    if ((sum - CMatrix::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-10) {
      throw InvalidArgument("projections do not sum to the identity");
    }
  }

  GridSpace space_;
  std::vector<double> eigenvalues_;
  std::vector<CMatrix> projections_;
};

/// Default pointer cells: cuts halfway between consecutive eigenvalues.
inline Partition midpoint_partition(const DiscreteObservable& a) {
  std::vector<double> cuts;
  for (std::size_t i = 1; i < a.size(); ++i) cuts.push_back(0.5 * (a.eigenvalues()[i - 1] + a.eigenvalues()[i]));
  return Partition::from_cuts(cuts);
}

/// U = sum_i P_i (x) exp(-i lambda a_i P_1 / hbar), pointer Q_1.
///
/// Without a partition the cells are the midpoint cells of the spectrum,
/// each reporting its eigenvalue.
inline MeasurementScheme standard_discrete_scheme(const DiscreteObservable& a, const WaveFunction& probe, double lambda,
                                                  std::optional<Partition> partition = std::nullopt,
                                                  PlanckConstant hbar = PlanckConstant{}) {
  PointerSpec pointer{canonical_operators(probe.space(), hbar).position, Partition(), lambda != 0.0 ? lambda : 1.0, {}};
  if (partition) {
    pointer.partition = std::move(*partition);
  } else {
    pointer.partition = midpoint_partition(a);
    for (double v : a.eigenvalues()) pointer.nominal_values.emplace_back(v);
  }
  return MeasurementScheme(a.space(), probe, std::move(pointer), ShiftCoupling{a.spectral(), lambda}, hbar);
}

/// Pointer probabilities p(cell | probe translated by lambda * a_j), indexed [cell][j].
inline std::vector<std::vector<double>> branch_weights(const MeasurementScheme& scheme, const DiscreteObservable& a) {
  const auto* shift = std::get_if<ShiftCoupling>(&scheme.coupling());
  if (shift == nullptr) throw InvalidArgument("measured_effects_discrete needs a shift coupling");
  detail::require_same(scheme.object_space(), a.space(), "discrete observable");
  std::vector<std::vector<double>> w(scheme.cells().size(), std::vector<double>(a.size(), 0.0));
  for (std::size_t j = 0; j < a.size(); ++j) {
    const WaveFunction branch = translate(scheme.probe(), shift->lambda * a.eigenvalues()[j]);
    const CMatrix row = branch.orthonormal().transpose();
    const RVector p = scheme.cell_probabilities(row);
    for (std::size_t c = 0; c < scheme.cells().size(); ++c) w[c][j] = p[static_cast<Eigen::Index>(c)];
  }
  return w;
}

/// Closed-form measured effects E(cell) = sum_j p(cell | branch j) P_j.
inline Povm measured_effects_discrete(const MeasurementScheme& scheme, const DiscreteObservable& a) {
  const auto w = branch_weights(scheme, a);
  const auto n = static_cast<Eigen::Index>(a.space().n_points());
  std::vector<std::string> labels;
  std::vector<Effect> effects;
  for (std::size_t c = 0; c < scheme.cells().size(); ++c) {
    CMatrix e = CMatrix::Zero(n, n);
    for (std::size_t j = 0; j < a.size(); ++j) e += w[c][j] * a.projections()[j];
    labels.push_back(scheme.cells()[c].label);
    effects.emplace_back(a.space(), std::move(e));
  }
  return Povm(std::move(labels), std::move(effects));
}

struct CalibratedScheme {
  MeasurementScheme scheme;
  /// Object value reported by each cell of scheme.cells(); empty for gap cells.
  std::vector<std::optional<double>> pointer_function;
  /// Index into scheme.cells() of the cell for eigenvalue i.
  std::vector<std::size_t> eigenvalue_cells;
};

/// Von Neumann scheme with a bump probe supported in (-delta/2, delta/2) and
/// cells (a_i - delta/(2 lambda), a_i + delta/(2 lambda)). When every eigenvalue
/// gap exceeds delta/lambda the measured effects are the projections P_i.
inline CalibratedScheme calibrated_von_neumann_scheme(const DiscreteObservable& a, double delta, double lambda,
                                                      const GridSpace& probe_space,
                                                      PlanckConstant hbar = PlanckConstant{}) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw InvalidArgument("delta must be positive");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be positive");
  const double need = delta / lambda;
  for (std::size_t i = 1; i < a.size(); ++i) {
    const double gap = a.eigenvalues()[i] - a.eigenvalues()[i - 1];
    if (!(gap > need)) {
      throw CalibrationError("eigenvalues " + detail::format_number(a.eigenvalues()[i - 1]) + " and " +
                             detail::format_number(a.eigenvalues()[i]) + " are " + detail::format_number(gap) +
                             " apart; calibration needs a gap above delta/lambda = " + detail::format_number(need));
    }
  }
  const WaveFunction probe = bump_state(probe_space, 0.0, 0.5 * delta);
  std::vector<Cell> cells;
  std::vector<std::optional<double>> nominal;
  const double half = 0.5 * delta / lambda;
  for (double v : a.eigenvalues()) {
    cells.push_back(Cell{v - half, v + half, "a=" + detail::format_number(v), true});
    nominal.emplace_back(v);
  }
  PointerSpec pointer{canonical_operators(probe_space, hbar).position, Partition(std::move(cells)), lambda,
                      std::move(nominal)};
  MeasurementScheme scheme(a.space(), probe, std::move(pointer), ShiftCoupling{a.spectral(), lambda}, hbar);
  std::vector<std::size_t> where;
  for (double v : a.eigenvalues()) where.push_back(*scheme.cells().locate(v));
  auto function = scheme.pointer().nominal_values;
  return {std::move(scheme), std::move(function), std::move(where)};
}

/// max_i ||E_i - P_i||_max for the measured effects of a calibrated scheme.
inline double calibration_deviation(const CalibratedScheme& cal, const DiscreteObservable& a, const Povm& povm) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, (povm[cal.eigenvalue_cells[i]].dense() - a.projections()[i]).cwiseAbs().maxCoeff());
  }
  // gap cells must carry no weight at all
  for (std::size_t c = 0; c < povm.size(); ++c) {
    if (!cal.pointer_function[c]) worst = std::max(worst, povm[c].dense().cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace povmlab

#endif  // POVMLAB_DISCRETE_HPP
