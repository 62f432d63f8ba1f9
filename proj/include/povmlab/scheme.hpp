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

// Measurement schemes <probe space, probe state, pointer, coupling>.
//
// A scheme couples an object factor to a single probe factor, evolves the
// product state and reads a pointer observable of the probe against a
// partition of the real line. The measured POVM is whatever reproduces the
// pointer statistics for every object state; extract_povm recovers it by
// polarization over the object's position basis.

#ifndef POVMLAB_SCHEME_HPP
#define POVMLAB_SCHEME_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "povmlab/errors.hpp"
#include "povmlab/hilbert.hpp"

namespace povmlab {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Probabilities at or below this are treated as zero when conditioning.
inline constexpr double kConditioningFloor = 1e-12;

namespace detail {

inline std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Partitions

/// Half-open interval [lo, hi). Unlabeled cells fill gaps of a user partition.
struct Cell {
  double lo = -kInfinity;
  double hi = kInfinity;
  std::string label;
  bool labeled = true;

  bool contains(double v) const noexcept { return v >= lo && v < hi; }
  double width() const noexcept { return hi - lo; }
};

class Partition {
 public:
  Partition() : Partition(std::vector<Cell>{Cell{}}) {}

  explicit Partition(std::vector<Cell> cells) : cells_(std::move(cells)) {
    if (cells_.empty()) throw InvalidArgument("partition needs at least one cell");
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      auto& c = cells_[i];
      if (std::isnan(c.lo) || std::isnan(c.hi) || !(c.lo < c.hi)) {
        throw InvalidArgument("partition cell " + std::to_string(i) + " is empty or malformed");
      }
      if (i > 0 && cells_[i - 1].hi > c.lo) {
        throw InvalidArgument("partition cells " + std::to_string(i - 1) + " and " + std::to_string(i) +
                              " overlap or are out of order");
      }
      if (c.label.empty()) c.label = "[" + detail::format_number(c.lo) + "," + detail::format_number(c.hi) + ")";
    }
  }

  /// Cells (-inf, c0), [c0, c1), ..., [ck, inf).
  static Partition from_cuts(const std::vector<double>& cuts) {
    std::vector<double> edges;
    edges.push_back(-kInfinity);
    edges.insert(edges.end(), cuts.begin(), cuts.end());
    edges.push_back(kInfinity);
    return from_edges(edges);
  }

  /// Consecutive cells between sorted edges (which may include +-inf).
  static Partition from_edges(const std::vector<double>& edges) {
    if (edges.size() < 2) throw InvalidArgument("partition needs at least two edges");
    std::vector<Cell> cells;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) cells.push_back(Cell{edges[i], edges[i + 1], "", true});
    return Partition(std::move(cells));
  }

  static Partition full_line() { return Partition(); }

  const std::vector<Cell>& cells() const noexcept { return cells_; }
  std::size_t size() const noexcept { return cells_.size(); }
  const Cell& operator[](std::size_t i) const { return cells_.at(i); }

  /// True when the cells tile the whole real line.
  bool covers_line() const noexcept {
    if (cells_.front().lo != -kInfinity || cells_.back().hi != kInfinity) return false;
    for (std::size_t i = 1; i < cells_.size(); ++i) {
      if (cells_[i - 1].hi != cells_[i].lo) return false;
    }
    return true;
  }

  /// Same cells plus unlabeled cells for every gap, so the result covers the line.
  Partition completed() const {
    std::vector<Cell> out;
    double cursor = -kInfinity;
    for (const auto& c : cells_) {
      if (c.lo > cursor) out.push_back(Cell{cursor, c.lo, "", false});
      out.push_back(c);
      cursor = c.hi;
    }
    if (cursor < kInfinity) out.push_back(Cell{cursor, kInfinity, "", false});
    for (auto& c : out) {
      if (!c.labeled) c.label = "gap[" + detail::format_number(c.lo) + "," + detail::format_number(c.hi) + ")";
    }
    return Partition(std::move(out));
  }

  std::optional<std::size_t> locate(double v) const noexcept {
    auto it = std::upper_bound(cells_.begin(), cells_.end(), v, [](double x, const Cell& c) { return x < c.lo; });
    if (it == cells_.begin()) return std::nullopt;
    const auto idx = static_cast<std::size_t>(std::distance(cells_.begin(), it) - 1);
    if (cells_[idx].contains(v)) return idx;
    return std::nullopt;
  }

  /// Moves every finite edge to the nearest point origin + (k + 1/2) h, i.e.
  /// halfway between the points of a lattice with spacing h.
  Partition snapped(double h, double origin = 0.0) const {
    if (!(h > 0.0)) throw InvalidArgument("snap spacing must be positive");
    auto snap = [&](double e) {
      if (std::isinf(e)) return e;
      return origin + (std::floor((e - origin) / h) + 0.5) * h;
    };
    std::vector<Cell> out;
    for (const auto& c : cells_) {
      Cell s = c;
      s.lo = snap(c.lo);
      s.hi = snap(c.hi);
      if (!(s.lo < s.hi)) {
        throw InvalidArgument("cell " + c.label + " collapses when snapped to lattice spacing " +
                              detail::format_number(h));
      }
      out.push_back(std::move(s));
    }
    return Partition(std::move(out));
  }

 private:
  std::vector<Cell> cells_;
};

// ---------------------------------------------------------------------------
// Effects and POVMs

class Effect {
 public:
  /// Effect diagonal in the position basis.
  static Effect diagonal(GridSpace space, RVector values) {
    if (static_cast<std::size_t>(values.size()) != space.n_points()) {
      throw InvalidArgument("effect diagonal has wrong size");
    }
    if (values.size() > 0 && (values.minCoeff() < -1e-8 || values.maxCoeff() > 1.0 + 1e-8)) {
      throw InvalidArgument("effect values outside [0, 1]");
    }
    Effect e(space);
    e.diagonal_ = std::move(values);
    return e;
  }

  Effect(GridSpace space, CMatrix matrix) : space_(space), matrix_(std::move(matrix)) {
    const auto n = static_cast<Eigen::Index>(space_.n_points());
    if (matrix_.rows() != n || matrix_.cols() != n) throw InvalidArgument("effect matrix has wrong size");
    const double herm = (matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff();
    if (herm > 1e-9) throw InvalidArgument("effect is not Hermitian (" + std::to_string(herm) + ")");
    matrix_ = 0.5 * (matrix_ + matrix_.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(matrix_, Eigen::EigenvaluesOnly);
    const double lo = solver.eigenvalues().minCoeff();
    const double hi = solver.eigenvalues().maxCoeff();
    if (lo < -1e-8 || hi > 1.0 + 1e-8) {
      throw InvalidArgument("effect spectrum [" + std::to_string(lo) + ", " + std::to_string(hi) +
                            "] leaves [0, 1]");
    }
  }

  const GridSpace& space() const noexcept { return space_; }
  bool is_diagonal() const noexcept { return diagonal_.has_value(); }
  const RVector& diagonal_values() const { return diagonal_.value(); }

  CMatrix dense() const {
    if (diagonal_) return diagonal_->cast<Complex>().asDiagonal();
    return matrix_;
  }

  /// <c|E|c> for a unit vector in the orthonormal basis.
  double expectation(const CVector& c) const {
    if (diagonal_) return diagonal_->dot(c.cwiseAbs2());
    return c.dot(matrix_ * c).real();
  }

  double expectation(const WaveFunction& psi) const {
    detail::require_same(space_, psi.space(), "effect expectation");
    return expectation(psi.orthonormal());
  }

  double expectation(const DensityOperator& rho) const {
    detail::require_same(space_, rho.space(), "effect expectation");
    if (diagonal_) return diagonal_->dot(rho.matrix().diagonal().real());
    return (matrix_ * rho.matrix()).trace().real();
  }

 private:
  explicit Effect(GridSpace space) : space_(space) {}

  GridSpace space_;
  CMatrix matrix_;
  std::optional<RVector> diagonal_;
};

class Povm {
 public:
  Povm(std::vector<std::string> labels, std::vector<Effect> effects)
      : labels_(std::move(labels)), effects_(std::move(effects)) {
    if (effects_.empty()) throw InvalidArgument("POVM needs at least one effect");
    if (labels_.size() != effects_.size()) throw InvalidArgument("POVM label and effect counts differ");
    for (const auto& e : effects_) detail::require_same(effects_.front().space(), e.space(), "POVM");
    const double dev = completeness_deviation();
    if (dev > 1e-8) throw InvalidArgument("POVM effects do not sum to identity (deviation " + std::to_string(dev) + ")");
  }

  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::vector<Effect>& effects() const noexcept { return effects_; }
  std::size_t size() const noexcept { return effects_.size(); }
  const Effect& operator[](std::size_t i) const { return effects_.at(i); }
  const GridSpace& space() const noexcept { return effects_.front().space(); }

  bool all_diagonal() const noexcept {
    return std::all_of(effects_.begin(), effects_.end(), [](const Effect& e) { return e.is_diagonal(); });
  }

  double completeness_deviation() const {
    const auto n = static_cast<Eigen::Index>(space().n_points());
    if (all_diagonal()) {
      RVector sum = RVector::Zero(n);
      for (const auto& e : effects_) sum += e.diagonal_values();
      return (sum.array() - 1.0).abs().maxCoeff();
    }
    CMatrix sum = CMatrix::Zero(n, n);
    for (const auto& e : effects_) sum += e.dense();
    return (sum - CMatrix::Identity(n, n)).cwiseAbs().maxCoeff();
  }

  RVector probabilities(const WaveFunction& psi) const {
    RVector p(static_cast<Eigen::Index>(effects_.size()));
    for (std::size_t i = 0; i < effects_.size(); ++i) p[static_cast<Eigen::Index>(i)] = effects_[i].expectation(psi);
    return p;
  }

  RVector probabilities(const DensityOperator& rho) const {
    RVector p(static_cast<Eigen::Index>(effects_.size()));
    for (std::size_t i = 0; i < effects_.size(); ++i) p[static_cast<Eigen::Index>(i)] = effects_[i].expectation(rho);
    return p;
  }

 private:
  std::vector<std::string> labels_;
  std::vector<Effect> effects_;
};

/// Largest max-norm deviation between corresponding effects of two POVMs.
inline double max_deviation(const Povm& a, const Povm& b) {
  if (a.size() != b.size()) throw InvalidArgument("POVMs have different numbers of outcomes");
  double dev = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].is_diagonal() && b[i].is_diagonal()) {
      dev = std::max(dev, (a[i].diagonal_values() - b[i].diagonal_values()).cwiseAbs().maxCoeff());
    } else {
      dev = std::max(dev, (a[i].dense() - b[i].dense()).cwiseAbs().maxCoeff());
    }
  }
  return dev;
}

/// max over pairs of ||E_i E_j - E_j E_i||_max.
inline double commutativity_check(const Povm& povm) {
  if (povm.all_diagonal()) return 0.0;
  std::vector<CMatrix> m;
  m.reserve(povm.size());
  for (const auto& e : povm.effects()) m.push_back(e.dense());
  double worst = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = i + 1; j < m.size(); ++j) {
      worst = std::max(worst, (m[i] * m[j] - m[j] * m[i]).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Scheme description

/// Probe observable read after the interaction, its outcome cells, and the
/// scale that converts readings back to object units (reading / scale).
struct PointerSpec {
  HermitianOperator observable;
  Partition partition;
  double pointer_scale = 1.0;
  /// Object value each cell reports (empty for cells with no nominal value).
  std::vector<std::optional<double>> nominal_values;
};

/// A = sum_i values[i] * projectors[i], projectors in the orthonormal object basis.
struct SpectralObservable {
  std::vector<double> values;
  std::vector<CMatrix> projectors;
};

/// U = exp(-i lambda A (x) P_probe / hbar): the probe is translated by lambda * a.
/// The observable is either diagonal in position (samples of f in A = f(Q)) or spectral.
struct ShiftCoupling {
  std::variant<RVector, SpectralObservable> observable;
  double lambda = 0.0;
};

/// U = exp(-i H t / hbar) for a Hamiltonian on object (x) probe (object index slowest).
struct DenseCoupling {
  CMatrix hamiltonian;
  double time = 1.0;
};

using Coupling = std::variant<ShiftCoupling, DenseCoupling>;

/// Evolved object-probe state as rows: rows.row(r) holds the probe coordinates
/// attached to object basis vector index[r]. Object rows that vanish are omitted.
struct EvolvedRows {
  std::vector<Eigen::Index> index;
  CMatrix rows;
  double leak = 0.0;  ///< probe mass that ended in the boundary band
};

class MeasurementScheme {
 public:
  MeasurementScheme(GridSpace object_space, WaveFunction probe, PointerSpec pointer, Coupling coupling,
                    PlanckConstant hbar = PlanckConstant{})
      : object_space_(object_space),
        probe_(std::move(probe)),
        pointer_(std::move(pointer)),
        coupling_(std::move(coupling)),
        hbar_(hbar) {
    if (probe_.factors() != 1) throw InvalidArgument("probe must be a single-factor state");
    detail::require_same(probe_.space(), pointer_.observable.space(), "pointer observable");
    if (!std::isfinite(pointer_.pointer_scale) || pointer_.pointer_scale == 0.0) {
      throw InvalidArgument("pointer_scale must be finite and nonzero");
    }
    if (pointer_.observable.representation() == HermitianOperator::Representation::kDense) {
      throw InvalidArgument("pointer observable must be diagonal in position or momentum");
    }
    require_localized(probe_, "probe state");
    complete_partition();
    bin_pointer_points();
    build_coupling();
  }

  const GridSpace& object_space() const noexcept { return object_space_; }
  const GridSpace& probe_space() const noexcept { return probe_.space(); }
  const WaveFunction& probe() const noexcept { return probe_; }
  const PointerSpec& pointer() const noexcept { return pointer_; }
  const Partition& cells() const noexcept { return pointer_.partition; }
  const Coupling& coupling() const noexcept { return coupling_; }
  PlanckConstant hbar() const noexcept { return hbar_; }

  bool is_standard() const noexcept { return std::holds_alternative<ShiftCoupling>(coupling_); }

  /// True when U is the identity (shift coupling with lambda = 0).
  /// Throws LocalizationError when `leak` exceeds the boundary tolerance.
  static void check_leak(double leak) { check_leak_impl(leak); }

  bool is_trivial() const noexcept {
    const auto* s = std::get_if<ShiftCoupling>(&coupling_);
    return s != nullptr && s->lambda == 0.0;
  }

  /// Evolves an object state given by orthonormal coordinates. With `guard`
  /// off the boundary leak is only recorded, for callers that weight it.
  EvolvedRows evolve_coefficients(const CVector& c, bool guard = true) const {
    const auto n_obj = static_cast<Eigen::Index>(object_space_.n_points());
    const auto n_probe = static_cast<Eigen::Index>(probe_space().n_points());
    if (c.size() != n_obj) throw InvalidArgument("object state has wrong dimension for this scheme");
    EvolvedRows out;
    if (!branches_.empty() && spectral_projectors_.empty()) {
      // position-diagonal observable: one probe branch per object point
      double leak = 0.0;
      std::vector<Eigen::Index> idx;
      for (Eigen::Index k = 0; k < n_obj; ++k) {
        if (c[k] != Complex(0.0, 0.0)) idx.push_back(k);
      }
      out.rows.resize(static_cast<Eigen::Index>(idx.size()), n_probe);
      for (std::size_t r = 0; r < idx.size(); ++r) {
        const Eigen::Index k = idx[r];
        out.rows.row(static_cast<Eigen::Index>(r)) = c[k] * branches_[static_cast<std::size_t>(k)].transpose();
        leak += std::norm(c[k]) * branch_leak_[static_cast<std::size_t>(k)];
      }
      out.index = std::move(idx);
      out.leak = leak;
      if (guard) check_leak(leak);
      return out;
    }
    if (!spectral_projectors_.empty()) {
      out.rows = CMatrix::Zero(n_obj, n_probe);
      double leak = 0.0;
      for (std::size_t i = 0; i < spectral_projectors_.size(); ++i) {
        const CVector u = spectral_projectors_[i] * c;
        const double w = u.squaredNorm();
        if (w == 0.0) continue;
        out.rows += u * branches_[i].transpose();
        leak += w * branch_leak_[i];
      }
      out.index.resize(static_cast<std::size_t>(n_obj));
      std::iota(out.index.begin(), out.index.end(), Eigen::Index{0});
      out.leak = leak;
      if (guard) check_leak(leak);
      return out;
    }
    // dense coupling
    const CVector probe_c = probe_.orthonormal();
    CVector joint(n_obj * n_probe);
    for (Eigen::Index k = 0; k < n_obj; ++k) joint.segment(k * n_probe, n_probe) = c[k] * probe_c;
    const CVector v = dense_unitary_ * joint;
    out.rows.resize(n_obj, n_probe);
    for (Eigen::Index k = 0; k < n_obj; ++k) out.rows.row(k) = v.segment(k * n_probe, n_probe).transpose();
    out.index.resize(static_cast<std::size_t>(n_obj));
    std::iota(out.index.begin(), out.index.end(), Eigen::Index{0});
    const std::size_t band = probe_space().boundary_band();
    double leak = 0.0;
    for (Eigen::Index l = 0; l < n_probe; ++l) {
      const auto ul = static_cast<std::size_t>(l);
      if (ul < band || ul >= static_cast<std::size_t>(n_probe) - band) leak += out.rows.col(l).squaredNorm();
    }
    out.leak = leak;
    if (guard) check_leak(leak);
    return out;
  }

  /// Probability of the pointer reading at each probe grid point (or momentum bin, FFT order).
  RVector pointer_point_probabilities(const CMatrix& rows) const {
    if (pointer_.observable.representation() == HermitianOperator::Representation::kPositionDiagonal) {
      return rows.cwiseAbs2().colwise().sum().transpose();
    }
    const auto n = rows.cols();
    RVector pi = RVector::Zero(n);
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
      const CVector f = fft_forward(rows.row(r).transpose());
      pi += f.cwiseAbs2() / static_cast<double>(n);
    }
    return pi;
  }

  RVector cell_probabilities(const CMatrix& rows) const {
    const RVector pi = pointer_point_probabilities(rows);
    RVector p = RVector::Zero(static_cast<Eigen::Index>(cells().size()));
    for (Eigen::Index l = 0; l < pi.size(); ++l) p[static_cast<Eigen::Index>(cell_of_point_[static_cast<std::size_t>(l)])] += pi[l];
    return p;
  }

  /// Pointer-point mask for a cell, applied as a Luders projection on the rows.
  CMatrix project_rows(const CMatrix& rows, std::size_t cell) const {
    const auto n = rows.cols();
    if (pointer_.observable.representation() == HermitianOperator::Representation::kPositionDiagonal) {
      CMatrix out = rows;
      for (Eigen::Index l = 0; l < n; ++l) {
        if (cell_of_point_[static_cast<std::size_t>(l)] != cell) out.col(l).setZero();
      }
      return out;
    }
    CMatrix out(rows.rows(), n);
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
      CVector f = fft_forward(rows.row(r).transpose());
      for (Eigen::Index m = 0; m < n; ++m) {
        if (cell_of_point_[static_cast<std::size_t>(m)] != cell) f[m] = 0.0;
      }
      out.row(r) = fft_inverse(f).transpose();
    }
    return out;
  }

  /// Object value of the pointer reading at probe point (or FFT bin) l.
  double reading(std::size_t l) const {
    return pointer_.observable.samples()[static_cast<Eigen::Index>(l)] / pointer_.pointer_scale;
  }

  std::size_t cell_of_point(std::size_t l) const { return cell_of_point_.at(l); }

 private:
  void complete_partition() {
    const Partition& user = pointer_.partition;
    if (!pointer_.nominal_values.empty() && pointer_.nominal_values.size() != user.size()) {
      throw InvalidArgument("nominal_values must have one entry per cell");
    }
    std::vector<std::optional<double>> nominal(user.size());
    if (!pointer_.nominal_values.empty()) nominal = pointer_.nominal_values;
    Partition full = user.completed();
    std::vector<std::optional<double>> full_nominal;
    std::size_t j = 0;
    for (const auto& c : full.cells()) {
      if (c.labeled) {
        full_nominal.push_back(nominal[j++]);
      } else {
        full_nominal.push_back(std::nullopt);
      }
    }
    pointer_.partition = std::move(full);
    pointer_.nominal_values = std::move(full_nominal);
  }

  void bin_pointer_points() {
    const std::size_t n = probe_space().n_points();
    cell_of_point_.resize(n);
    for (std::size_t l = 0; l < n; ++l) {
      const auto c = pointer_.partition.locate(reading(l));
      if (!c) throw CoverageError("pointer reading " + detail::format_number(reading(l)) + " falls in no cell");
      cell_of_point_[l] = *c;
    }
  }

  void add_branch(double shift) {
    try {
      WaveFunction b = translate(probe_, shift);
      branch_leak_.push_back(boundary_mass(b));
      branches_.push_back(b.orthonormal());
    } catch (const LocalizationError&) {
      // The shifted probe left the grid. Keep a rolled copy so the composite
      // stays normalized; the leak of 1 makes any occupied branch fail the guard.
      const double cells = std::round(shift / probe_space().spacing());
      branches_.push_back(translate(probe_, cells * probe_space().spacing()).orthonormal());
      branch_leak_.push_back(1.0);
    }
  }

  void build_coupling() {
    const auto n_obj = static_cast<Eigen::Index>(object_space_.n_points());
    if (const auto* s = std::get_if<ShiftCoupling>(&coupling_)) {
      if (!std::isfinite(s->lambda)) throw InvalidArgument("coupling constant must be finite");
      if (const auto* diag = std::get_if<RVector>(&s->observable)) {
        if (diag->size() != n_obj) throw InvalidArgument("diagonal observable does not match object grid");
        for (Eigen::Index k = 0; k < n_obj; ++k) add_branch(s->lambda * (*diag)[k]);
        return;
      }
      const auto& spec = std::get<SpectralObservable>(s->observable);
      if (spec.values.empty() || spec.values.size() != spec.projectors.size()) {
        throw InvalidArgument("spectral observable needs one projector per eigenvalue");
      }
      CMatrix sum = CMatrix::Zero(n_obj, n_obj);
      for (const auto& p : spec.projectors) {
        if (p.rows() != n_obj || p.cols() != n_obj) throw InvalidArgument("projector does not match object space");
        sum += p;
      }
      if ((sum - CMatrix::Identity(n_obj, n_obj)).cwiseAbs().maxCoeff() > 1e-10) {
        throw InvalidArgument("spectral projectors do not resolve the identity");
      }
      spectral_projectors_ = spec.projectors;
      for (double a : spec.values) add_branch(s->lambda * a);
      return;
    }
    const auto& d = std::get<DenseCoupling>(coupling_);
    const auto n = n_obj * static_cast<Eigen::Index>(probe_space().n_points());
    if (d.hamiltonian.rows() != n || d.hamiltonian.cols() != n) {
      throw InvalidArgument("dense Hamiltonian must act on object (x) probe (dimension " + std::to_string(n) + ")");
    }
    dense_unitary_ = unitary_from_hamiltonian(d.hamiltonian, d.time, hbar_);
  }

  static void check_leak_impl(double leak) {
    if (leak >= kBoundaryMassTolerance) {
      throw LocalizationError("coupling shifts probe mass " + detail::format_number(leak) +
                              " into the grid boundary (enlarge the probe box or reduce lambda)");
    }
  }

  GridSpace object_space_;
  WaveFunction probe_;
  PointerSpec pointer_;
  Coupling coupling_;
  PlanckConstant hbar_;

  std::vector<std::size_t> cell_of_point_;
  std::vector<CVector> branches_;
  std::vector<double> branch_leak_;
  std::vector<CMatrix> spectral_projectors_;
  CMatrix dense_unitary_;
};

// ---------------------------------------------------------------------------
// Scheme operations

namespace detail {

inline CVector object_coefficients(const MeasurementScheme& scheme, const WaveFunction& psi) {
  require_same(scheme.object_space(), psi.space(), "object state");
  return psi.orthonormal();
}

inline CMatrix object_reduced_matrix(const MeasurementScheme& scheme, const EvolvedRows& ev) {
  const auto n = static_cast<Eigen::Index>(scheme.object_space().n_points());
  CMatrix rho = CMatrix::Zero(n, n);
  const CMatrix g = ev.rows * ev.rows.adjoint();
  for (std::size_t a = 0; a < ev.index.size(); ++a) {
    for (std::size_t b = 0; b < ev.index.size(); ++b) {
      rho(ev.index[a], ev.index[b]) = g(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    }
  }
  return rho;
}

/// Weighted pure components of a density operator (eigenvalues below 1e-14 dropped).
inline std::vector<std::pair<double, CVector>> pure_components(const DensityOperator& rho) {
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(rho.matrix());
  std::vector<std::pair<double, CVector>> out;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const double w = solver.eigenvalues()[i];
    if (w > 1e-14) out.emplace_back(w, solver.eigenvectors().col(i));
  }
  return out;
}

}  // namespace detail

/// Composite state object (x) probe after the coupling.
inline WaveFunction evolve_scheme(const MeasurementScheme& scheme, const WaveFunction& object_state) {
  const EvolvedRows ev = scheme.evolve_coefficients(detail::object_coefficients(scheme, object_state));
  const auto n_obj = static_cast<Eigen::Index>(scheme.object_space().n_points());
  const auto n_probe = static_cast<Eigen::Index>(scheme.probe_space().n_points());
  CVector flat = CVector::Zero(n_obj * n_probe);
  for (std::size_t r = 0; r < ev.index.size(); ++r) {
    flat.segment(ev.index[r] * n_probe, n_probe) = ev.rows.row(static_cast<Eigen::Index>(r)).transpose();
  }
  return WaveFunction::from_orthonormal({scheme.object_space(), scheme.probe_space()}, std::move(flat));
}

/// Cell probabilities of the pointer, one per cell of scheme.cells().
inline RVector pointer_statistics(const MeasurementScheme& scheme, const WaveFunction& object_state) {
  const EvolvedRows ev = scheme.evolve_coefficients(detail::object_coefficients(scheme, object_state));
  return scheme.cell_probabilities(ev.rows);
}

inline RVector pointer_statistics(const MeasurementScheme& scheme, const DensityOperator& object_state) {
  detail::require_same(scheme.object_space(), object_state.space(), "object state");
  RVector p = RVector::Zero(static_cast<Eigen::Index>(scheme.cells().size()));
  double leak = 0.0;
  for (const auto& [w, v] : detail::pure_components(object_state)) {
    const EvolvedRows ev = scheme.evolve_coefficients(v, false);
    p += w * scheme.cell_probabilities(ev.rows);
    leak += w * ev.leak;
  }
  MeasurementScheme::check_leak(leak);
  return p;
}

/// Recovers the measured POVM by polarization over the object position basis.
///
/// Uses d^2 evolutions of basis states and their (e_j + e_k)/sqrt2, (e_j + i e_k)/sqrt2
/// superpositions. `basis_size` caps the object dimension the caller is
/// prepared to pay for; anything above it (or above 256) is refused.
inline Povm extract_povm(const MeasurementScheme& scheme, std::size_t basis_size, std::size_t threads = 1) {
  const std::size_t d = scheme.object_space().n_points();
  if (d > basis_size || d > 256) {
    throw SizeGuardError("polarization extraction needs " + std::to_string(d) + "^2 evolutions (limit " +
                         std::to_string(std::min<std::size_t>(basis_size, 256)) +
                         "); use the closed-form POVM of the discrete or smeared-position model");
  }
  const std::size_t n_cells = scheme.cells().size();
  const auto dd = static_cast<Eigen::Index>(d);
  const double r2 = 1.0 / std::sqrt(2.0);

  // Slot t < d: diagonal j = t. Slot d + 2p (+1): real (imaginary) probe of pair p.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = j + 1; k < d; ++k) pairs.emplace_back(j, k);
  }
  const std::size_t n_tasks = d + 2 * pairs.size();
  std::vector<RVector> results(n_tasks);

  auto run = [&](std::size_t t) {
    CVector c = CVector::Zero(dd);
    if (t < d) {
      c[static_cast<Eigen::Index>(t)] = 1.0;
    } else {
      const std::size_t p = (t - d) / 2;
      const bool imag = ((t - d) % 2) == 1;
      c[static_cast<Eigen::Index>(pairs[p].first)] = r2;
      c[static_cast<Eigen::Index>(pairs[p].second)] = imag ? Complex(0.0, r2) : Complex(r2, 0.0);
    }
    results[t] = scheme.cell_probabilities(scheme.evolve_coefficients(c).rows);
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n_tasks));
  if (workers == 1) {
    for (std::size_t t = 0; t < n_tasks; ++t) run(t);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t t = w; t < n_tasks; t += workers) run(t);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::vector<CMatrix> m(n_cells, CMatrix::Zero(dd, dd));
  for (std::size_t c = 0; c < n_cells; ++c) {
    const auto cc = static_cast<Eigen::Index>(c);
    for (std::size_t j = 0; j < d; ++j) m[c](static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = results[j][cc];
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const auto j = static_cast<Eigen::Index>(pairs[p].first);
      const auto k = static_cast<Eigen::Index>(pairs[p].second);
      const double mean = 0.5 * (m[c](j, j).real() + m[c](k, k).real());
      const double re = results[d + 2 * p][cc] - mean;
      const double im = mean - results[d + 2 * p + 1][cc];
      m[c](j, k) = Complex(re, im);
      m[c](k, j) = Complex(re, -im);
    }
  }
  std::vector<std::string> labels;
  std::vector<Effect> effects;
  for (std::size_t c = 0; c < n_cells; ++c) {
    labels.push_back(scheme.cells()[c].label);
    effects.emplace_back(scheme.object_space(), std::move(m[c]));
  }
  return Povm(std::move(labels), std::move(effects));
}

struct ReducedStates {
  DensityOperator apparatus;
  DensityOperator object;
};

inline ReducedStates reduced_states(const MeasurementScheme& scheme, const WaveFunction& object_state) {
  const EvolvedRows ev = scheme.evolve_coefficients(detail::object_coefficients(scheme, object_state));
  CMatrix apparatus = ev.rows.transpose() * ev.rows.conjugate();
  CMatrix object = detail::object_reduced_matrix(scheme, ev);
  apparatus /= apparatus.trace().real();
  object /= object.trace().real();
  return {DensityOperator(scheme.probe_space(), std::move(apparatus)),
          DensityOperator(scheme.object_space(), std::move(object))};
}

struct ConditionalState {
  double probability;
  DensityOperator state;
};

/// Luders conditioning of the object on the pointer landing in `cell`.
inline ConditionalState conditional_object_state(const MeasurementScheme& scheme, const WaveFunction& object_state,
                                                 std::size_t cell) {
  if (cell >= scheme.cells().size()) throw InvalidArgument("cell index out of range");
  EvolvedRows ev = scheme.evolve_coefficients(detail::object_coefficients(scheme, object_state));
  ev.rows = scheme.project_rows(ev.rows, cell);
  const double p = ev.rows.squaredNorm();
  if (!(p > kConditioningFloor)) {
    throw ConditioningError("cannot condition on cell " + scheme.cells()[cell].label + " with probability " +
                            detail::format_number(p));
  }
  CMatrix rho = detail::object_reduced_matrix(scheme, ev) / p;
  return {p, DensityOperator(scheme.object_space(), std::move(rho))};
}

/// max over cells |tr(E rho_in) - tr(E T)| with T the unconditional post-measurement object state.
inline double first_kind_check(const MeasurementScheme& scheme, const WaveFunction& object_state, const Povm& povm) {
  if (scheme.is_trivial()) return 0.0;
  const DensityOperator t = reduced_states(scheme, object_state).object;
  const RVector before = povm.probabilities(object_state);
  const RVector after = povm.probabilities(t);
  return (before - after).cwiseAbs().maxCoeff();
}

struct RepeatabilityReport {
  double max_deficit = 0.0;
  /// Per cell: |p(second in c | first in c) - 1|, or NaN for cells never reached.
  std::vector<double> deficits;
};

inline RepeatabilityReport repeatability_check(const MeasurementScheme& scheme, const WaveFunction& object_state) {
  const RVector p = pointer_statistics(scheme, object_state);
  RepeatabilityReport report;
  report.deficits.assign(scheme.cells().size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t c = 0; c < scheme.cells().size(); ++c) {
    if (!(p[static_cast<Eigen::Index>(c)] > kConditioningFloor)) continue;
    const ConditionalState cond = conditional_object_state(scheme, object_state, c);
    const double again = pointer_statistics(scheme, cond.state)[static_cast<Eigen::Index>(c)];
    report.deficits[c] = std::abs(again - 1.0);
    report.max_deficit = std::max(report.max_deficit, report.deficits[c]);
  }
  return report;
}

}  // namespace povmlab

#endif  // POVMLAB_SCHEME_HPP
