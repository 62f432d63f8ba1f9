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

// Discretized one-dimensional Hilbert spaces.
//
// A GridSpace is a uniform periodic grid of the line. Wave functions store
// continuum-normalized samples psi(x_k), so sum_k |psi_k|^2 dx = 1 and the
// grid spacing plays the role of the integration measure. Operators,
// density matrices and effects are expressed in the orthonormal discrete
// basis e_k = delta_k / sqrt(dx), where traces are plain matrix traces.

#ifndef POVMLAB_HILBERT_HPP
#define POVMLAB_HILBERT_HPP

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "povmlab/errors.hpp"

namespace povmlab {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;

/// Mass allowed in the outer bands of a periodic grid.
inline constexpr double kBoundaryMassTolerance = 1e-10;
/// Largest single dense factor (and dense composite) the library will exponentiate.
inline constexpr std::size_t kMaxDenseDimension = 512;

struct PlanckConstant {
  double hbar = 1.0;

  PlanckConstant() = default;
  explicit PlanckConstant(double value) : hbar(value) {
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw InvalidArgument("hbar must be a positive finite number");
    }
  }
};

class GridSpace {
 public:
  enum class Kind { kLine, kIndex };

  std::size_t n_points() const noexcept { return n_points_; }
  double box_length() const noexcept { return box_length_; }
  double spacing() const noexcept { return box_length_ / static_cast<double>(n_points_); }
  Kind kind() const noexcept { return kind_; }
  bool is_line() const noexcept { return kind_ == Kind::kLine; }

  /// Line grids are centered: x_k = (k - n/2) dx. Index spaces use x_k = k.
  double coordinate(std::size_t k) const noexcept {
    if (kind_ == Kind::kIndex) return static_cast<double>(k);
    return (static_cast<double>(k) - static_cast<double>(n_points_ / 2)) * spacing();
  }

  RVector coordinates() const {
    RVector x(static_cast<Eigen::Index>(n_points_));
    for (std::size_t k = 0; k < n_points_; ++k) x[static_cast<Eigen::Index>(k)] = coordinate(k);
    return x;
  }

  double momentum_spacing(PlanckConstant hbar) const {
    require_line("momentum grid");
    return 2.0 * kPi * hbar.hbar / box_length_;
  }

  /// Signed frequency of FFT bin m: m for m < n/2, m - n otherwise.
  std::ptrdiff_t frequency(std::size_t m) const noexcept {
    const auto n = static_cast<std::ptrdiff_t>(n_points_);
    const auto mm = static_cast<std::ptrdiff_t>(m);
    return mm < n / 2 ? mm : mm - n;
  }

  /// Momentum of FFT bin m, p_j = (2 pi hbar / L) j with j in [-n/2, n/2).
  double momentum(std::size_t m, PlanckConstant hbar) const {
    return momentum_spacing(hbar) * static_cast<double>(frequency(m));
  }

  /// Momenta in FFT order.
  RVector momenta(PlanckConstant hbar) const {
    RVector p(static_cast<Eigen::Index>(n_points_));
    for (std::size_t m = 0; m < n_points_; ++m) p[static_cast<Eigen::Index>(m)] = momentum(m, hbar);
    return p;
  }

  /// Number of grid points in each outer band (5% of the box per side, 10% total).
  std::size_t boundary_band() const noexcept {
    if (kind_ == Kind::kIndex) return 0;
    return std::max<std::size_t>(1, n_points_ / 20);
  }

  void require_line(const char* what) const {
    if (kind_ != Kind::kLine) {
      throw InvalidArgument(std::string(what) + " requires a line grid, not an index space");
    }
  }

  bool operator==(const GridSpace& other) const noexcept {
    return kind_ == other.kind_ && n_points_ == other.n_points_ && box_length_ == other.box_length_;
  }

  std::string describe() const {
    std::ostringstream os;
    if (kind_ == Kind::kIndex) {
      os << "index space (dim " << n_points_ << ")";
    } else {
      os << "grid (n=" << n_points_ << ", L=" << box_length_ << ")";
    }
    return os.str();
  }

 private:
  GridSpace(Kind kind, std::size_t n, double length) : kind_(kind), n_points_(n), box_length_(length) {}

  friend GridSpace make_grid(std::size_t n_points, double box_length);
  friend GridSpace make_index_space(std::size_t dimension);

  Kind kind_;
  std::size_t n_points_;
  double box_length_;
};

inline GridSpace make_grid(std::size_t n_points, double box_length) {
  if (n_points < 4 || n_points % 2 != 0) {
    throw InvalidArgument("n_points must be even and at least 4 (got " + std::to_string(n_points) + ")");
  }
  if (!(box_length > 0.0) || !std::isfinite(box_length)) {
    throw InvalidArgument("box_length must be positive and finite");
  }
  return GridSpace(GridSpace::Kind::kLine, n_points, box_length);
}

/// A finite-dimensional factor (e.g. the m-dimensional space of a discrete
/// observable) embedded as an m-point grid with unit spacing.
inline GridSpace make_index_space(std::size_t dimension) {
  if (dimension == 0) throw InvalidArgument("index space dimension must be positive");
  return GridSpace(GridSpace::Kind::kIndex, dimension, static_cast<double>(dimension));
}

// ---------------------------------------------------------------------------
// Fourier transforms

namespace detail {

inline Eigen::FFT<double>& fft_engine() {
  thread_local Eigen::FFT<double> engine;
  return engine;
}

inline void require_same(const GridSpace& a, const GridSpace& b, const char* what) {
  if (!(a == b)) {
    throw InvalidArgument(std::string("space mismatch in ") + what + ": " + a.describe() + " vs " +
                          b.describe());
  }
}

}  // namespace detail

/// Unnormalized forward DFT, X_m = sum_k x_k exp(-2 pi i m k / n).
inline CVector fft_forward(const CVector& x) {
  CVector out(x.size());
  detail::fft_engine().fwd(out, x);
  return out;
}

/// Inverse of fft_forward (carries the 1/n).
inline CVector fft_inverse(const CVector& x) {
  CVector out(x.size());
  detail::fft_engine().inv(out, x);
  return out;
}

inline CMatrix kron(const CMatrix& a, const CMatrix& b) { return Eigen::kroneckerProduct(a, b).eval(); }

// ---------------------------------------------------------------------------
// States

/// Closed-form wave function a grid state was sampled from.
using Profile = std::function<Complex(double)>;

class WaveFunction {
 public:
  WaveFunction(GridSpace space, CVector amplitudes, std::shared_ptr<const Profile> profile = {})
      : WaveFunction(std::vector<GridSpace>{space}, std::move(amplitudes)) {
    profile_ = std::move(profile);
  }

  WaveFunction(std::vector<GridSpace> spaces, CVector amplitudes)
      : spaces_(std::move(spaces)), amplitudes_(std::move(amplitudes)) {
    if (spaces_.empty()) throw InvalidArgument("wave function needs at least one factor");
    if (static_cast<std::size_t>(amplitudes_.size()) != dimension()) {
      throw InvalidArgument("amplitude count " + std::to_string(amplitudes_.size()) +
                            " does not match product dimension " + std::to_string(dimension()));
    }
    const double n = norm();
    if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-10) {
      throw InvalidArgument("wave function is not normalized (norm " + std::to_string(n) + ")");
    }
  }

  static WaveFunction normalized(GridSpace space, CVector amplitudes,
                                 std::shared_ptr<const Profile> profile = {}) {
    return normalized(std::vector<GridSpace>{space}, std::move(amplitudes), std::move(profile));
  }

  static WaveFunction normalized(std::vector<GridSpace> spaces, CVector amplitudes,
                                 std::shared_ptr<const Profile> profile = {}) {
    double measure = 1.0;
    for (const auto& s : spaces) measure *= s.spacing();
    const double n = std::sqrt(amplitudes.squaredNorm() * measure);
    if (!(n > 0.0) || !std::isfinite(n)) throw InvalidArgument("cannot normalize a zero or non-finite state");
    amplitudes /= n;
    WaveFunction out(std::move(spaces), std::move(amplitudes));
    if (out.factors() == 1) out.profile_ = std::move(profile);
    return out;
  }

  /// Builds a state from coordinates in the orthonormal basis.
  static WaveFunction from_orthonormal(std::vector<GridSpace> spaces, CVector coefficients) {
    double measure = 1.0;
    for (const auto& s : spaces) measure *= s.spacing();
    coefficients /= std::sqrt(measure);
    return normalized(std::move(spaces), std::move(coefficients));
  }

  const std::vector<GridSpace>& spaces() const noexcept { return spaces_; }
  std::size_t factors() const noexcept { return spaces_.size(); }

  const GridSpace& space() const {
    if (spaces_.size() != 1) throw InvalidArgument("composite state has no single space");
    return spaces_.front();
  }

  std::size_t dimension() const noexcept {
    std::size_t d = 1;
    for (const auto& s : spaces_) d *= s.n_points();
    return d;
  }

  std::vector<std::size_t> dims() const {
    std::vector<std::size_t> d;
    d.reserve(spaces_.size());
    for (const auto& s : spaces_) d.push_back(s.n_points());
    return d;
  }

  const CVector& amplitudes() const noexcept { return amplitudes_; }

  double measure() const noexcept {
    double m = 1.0;
    for (const auto& s : spaces_) m *= s.spacing();
    return m;
  }

  double norm() const noexcept { return std::sqrt(amplitudes_.squaredNorm() * measure()); }

  /// Coordinates in the orthonormal discrete basis (unit Euclidean norm).
  CVector orthonormal() const { return amplitudes_ * std::sqrt(measure()); }

  const Profile* profile() const noexcept { return profile_.get(); }
  const std::shared_ptr<const Profile>& profile_ptr() const noexcept { return profile_; }

 private:
  std::vector<GridSpace> spaces_;
  CVector amplitudes_;
  std::shared_ptr<const Profile> profile_;
};

inline Complex inner(const WaveFunction& a, const WaveFunction& b) {
  if (a.spaces().size() != b.spaces().size()) throw InvalidArgument("inner product of mismatched states");
  for (std::size_t i = 0; i < a.spaces().size(); ++i) {
    detail::require_same(a.spaces()[i], b.spaces()[i], "inner");
  }
  return a.amplitudes().dot(b.amplitudes()) * a.measure();
}

/// |psi_k|^2 dx per grid point of a single-factor state.
inline RVector position_probabilities(const WaveFunction& psi) {
  return psi.amplitudes().cwiseAbs2() * psi.space().spacing();
}

class DensityOperator {
 public:
  /// `matrix` is expressed in the orthonormal position basis.
  DensityOperator(GridSpace space, CMatrix matrix) : space_(space), matrix_(std::move(matrix)) {
    const auto n = static_cast<Eigen::Index>(space_.n_points());
    if (matrix_.rows() != n || matrix_.cols() != n) throw InvalidArgument("density matrix has wrong size");
    const double herm = (matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff();
    if (herm > 1e-10) throw InvalidArgument("density matrix is not Hermitian (" + std::to_string(herm) + ")");
    matrix_ = 0.5 * (matrix_ + matrix_.adjoint()).eval();
    const double tr = matrix_.trace().real();
    if (std::abs(tr - 1.0) > 1e-9) throw InvalidArgument("density matrix trace is " + std::to_string(tr));
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(matrix_, Eigen::EigenvaluesOnly);
    if (solver.eigenvalues().minCoeff() < -1e-9) {
      throw InvalidArgument("density matrix has a negative eigenvalue " +
                            std::to_string(solver.eigenvalues().minCoeff()));
    }
  }

  static DensityOperator pure(const WaveFunction& psi) {
    const CVector c = psi.orthonormal();
    return DensityOperator(psi.space(), c * c.adjoint());
  }

  const GridSpace& space() const noexcept { return space_; }
  const CMatrix& matrix() const noexcept { return matrix_; }

  /// Continuum kernel rho(x_k, x_l), for which the trace is sum_k rho(x_k, x_k) dx.
  CMatrix kernel() const { return matrix_ / space_.spacing(); }

  double trace() const { return matrix_.trace().real(); }
  double purity() const { return (matrix_ * matrix_).trace().real(); }

  /// <psi|rho|psi>.
  double fidelity_with(const WaveFunction& psi) const {
    detail::require_same(space_, psi.space(), "fidelity");
    const CVector c = psi.orthonormal();
    return c.dot(matrix_ * c).real();
  }

 private:
  GridSpace space_;
  CMatrix matrix_;
};

// ---------------------------------------------------------------------------
// Operators

class HermitianOperator {
 public:
  enum class Representation { kPositionDiagonal, kMomentumDiagonal, kDense };

  static HermitianOperator position_diagonal(GridSpace space, RVector samples) {
    if (static_cast<std::size_t>(samples.size()) != space.n_points()) {
      throw InvalidArgument("position samples do not match grid size");
    }
    return HermitianOperator(space, Representation::kPositionDiagonal, std::move(samples), {});
  }

  /// `samples` are indexed in FFT order (see GridSpace::momentum).
  static HermitianOperator momentum_diagonal(GridSpace space, RVector samples) {
    space.require_line("momentum-diagonal operator");
    if (static_cast<std::size_t>(samples.size()) != space.n_points()) {
      throw InvalidArgument("momentum samples do not match grid size");
    }
    return HermitianOperator(space, Representation::kMomentumDiagonal, std::move(samples), {});
  }

  static HermitianOperator dense(GridSpace space, CMatrix matrix) {
    const auto n = static_cast<Eigen::Index>(space.n_points());
    if (matrix.rows() != n || matrix.cols() != n) throw InvalidArgument("dense operator has wrong size");
    const double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
    if ((matrix - matrix.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
      throw InvalidArgument("dense operator is not Hermitian");
    }
    return HermitianOperator(space, Representation::kDense, {}, std::move(matrix));
  }

  Representation representation() const noexcept { return representation_; }
  const GridSpace& space() const noexcept { return space_; }
  const RVector& samples() const noexcept { return samples_; }

  CVector apply(const CVector& v) const {
    switch (representation_) {
      case Representation::kPositionDiagonal:
        return samples_.cast<Complex>().cwiseProduct(v);
      case Representation::kMomentumDiagonal:
        return fft_inverse(samples_.cast<Complex>().cwiseProduct(fft_forward(v)));
      case Representation::kDense:
        return matrix_ * v;
    }
    return v;
  }

  CMatrix dense_matrix() const {
    switch (representation_) {
      case Representation::kPositionDiagonal:
        return samples_.cast<Complex>().asDiagonal();
      case Representation::kMomentumDiagonal: {
        const auto n = static_cast<Eigen::Index>(space_.n_points());
        CMatrix m(n, n);
        for (Eigen::Index k = 0; k < n; ++k) m.col(k) = apply(CVector::Unit(n, k));
        return 0.5 * (m + m.adjoint());
      }
      case Representation::kDense:
        return matrix_;
    }
    return matrix_;
  }

 private:
  HermitianOperator(GridSpace space, Representation rep, RVector samples, CMatrix matrix)
      : space_(space), representation_(rep), samples_(std::move(samples)), matrix_(std::move(matrix)) {}

  GridSpace space_;
  Representation representation_;
  RVector samples_;
  CMatrix matrix_;
};

struct CanonicalPair {
  HermitianOperator position;
  HermitianOperator momentum;
};

inline CanonicalPair canonical_operators(const GridSpace& space, PlanckConstant hbar = PlanckConstant{}) {
  space.require_line("canonical operators");
  return {HermitianOperator::position_diagonal(space, space.coordinates()),
          HermitianOperator::momentum_diagonal(space, space.momenta(hbar))};
}

struct Moments {
  double expectation = 0.0;
  double variance = 0.0;
};

namespace detail {

inline double clip_variance(double v) { return (v < 0.0 && v >= -1e-12) ? 0.0 : v; }

}  // namespace detail

inline Moments moments(const HermitianOperator& op, const WaveFunction& state) {
  detail::require_same(op.space(), state.space(), "moments");
  const CVector c = state.orthonormal();
  const CVector ac = op.apply(c);
  const double mean = c.dot(ac).real();
  return {mean, detail::clip_variance(ac.squaredNorm() - mean * mean)};
}

inline Moments moments(const HermitianOperator& op, const DensityOperator& state) {
  detail::require_same(op.space(), state.space(), "moments");
  const CMatrix a = op.dense_matrix();
  const CMatrix ra = state.matrix() * a;
  const double mean = ra.trace().real();
  const double second = (ra * a).trace().real();
  return {mean, detail::clip_variance(second - mean * mean)};
}

/// Momentum distribution of a single-factor state, sorted by momentum.
struct MomentumDistribution {
  RVector momenta;
  RVector probabilities;
};

inline MomentumDistribution momentum_distribution(const WaveFunction& psi, PlanckConstant hbar = PlanckConstant{}) {
  const GridSpace& s = psi.space();
  s.require_line("momentum distribution");
  const auto n = static_cast<Eigen::Index>(s.n_points());
  const CVector c = fft_forward(psi.orthonormal());
  MomentumDistribution out{RVector(n), RVector(n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto m = static_cast<std::size_t>((j + n / 2) % n);  // sorted position j -> FFT bin m
    out.momenta[j] = s.momentum(m, hbar);
    out.probabilities[j] = std::norm(c[static_cast<Eigen::Index>(m)]) / static_cast<double>(n);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Localization guard

/// Probability mass of factor `factor` lying in the outer bands of its grid.
inline double boundary_mass(const WaveFunction& psi, std::size_t factor = 0) {
  if (factor >= psi.factors()) throw InvalidArgument("factor index out of range");
  const GridSpace& s = psi.spaces()[factor];
  const std::size_t band = s.boundary_band();
  if (band == 0) return 0.0;
  std::size_t inner = 1;
  for (std::size_t f = factor + 1; f < psi.factors(); ++f) inner *= psi.spaces()[f].n_points();
  const std::size_t n = s.n_points();
  const CVector& a = psi.amplitudes();
  double mass = 0.0;
  for (std::size_t idx = 0; idx < static_cast<std::size_t>(a.size()); ++idx) {
    const std::size_t k = (idx / inner) % n;
    if (k < band || k >= n - band) mass += std::norm(a[static_cast<Eigen::Index>(idx)]);
  }
  return mass * psi.measure();
}

inline void require_localized(const WaveFunction& psi, const std::string& label, std::size_t factor = 0) {
  const double mass = boundary_mass(psi, factor);
  if (mass >= kBoundaryMassTolerance) {
    std::ostringstream os;
    os << label << ": boundary mass " << mass << " exceeds " << kBoundaryMassTolerance
       << " (enlarge the box or reduce the spread)";
    throw LocalizationError(os.str());
  }
}

// ---------------------------------------------------------------------------
// State preparations

/// Minimal-uncertainty Gaussian with Var(Q) = position_variance.
inline WaveFunction gaussian_state(const GridSpace& space, double center, double mean_momentum,
                                   double position_variance, PlanckConstant hbar = PlanckConstant{}) {
  space.require_line("gaussian_state");
  if (!(position_variance > 0.0) || !std::isfinite(position_variance)) {
    throw InvalidArgument("position_variance must be positive");
  }
  const double sigma = std::sqrt(position_variance);
  if (!(6.0 * sigma < 0.5 * space.box_length() - std::abs(center))) {
    std::ostringstream os;
    os << "gaussian_state: 6 sigma = " << 6.0 * sigma << " does not fit inside the box around center "
       << center << " (half box " << 0.5 * space.box_length() << ")";
    throw LocalizationError(os.str());
  }
  const double h = hbar.hbar;
  auto profile = std::make_shared<const Profile>([=](double x) {
    const double d = x - center;
    return std::exp(Complex(-d * d / (4.0 * position_variance), mean_momentum * x / h));
  });
  const auto n = static_cast<Eigen::Index>(space.n_points());
  CVector amps(n);
  for (Eigen::Index k = 0; k < n; ++k) amps[k] = (*profile)(space.coordinate(static_cast<std::size_t>(k)));
  WaveFunction psi = WaveFunction::normalized(space, std::move(amps), std::move(profile));
  require_localized(psi, "gaussian_state");
  return psi;
}

/// Smooth compactly supported bump exp(-1 / (1 - ((x - c)/w)^2)) on (c - w, c + w).
inline WaveFunction bump_state(const GridSpace& space, double center, double half_width) {
  space.require_line("bump_state");
  if (!(half_width > 0.0)) throw InvalidArgument("bump half_width must be positive");
  auto profile = std::make_shared<const Profile>([=](double x) {
    const double u = (x - center) / half_width;
    if (std::abs(u) >= 1.0) return Complex(0.0, 0.0);
    return Complex(std::exp(-1.0 / (1.0 - u * u)), 0.0);
  });
  const auto n = static_cast<Eigen::Index>(space.n_points());
  CVector amps(n);
  for (Eigen::Index k = 0; k < n; ++k) amps[k] = (*profile)(space.coordinate(static_cast<std::size_t>(k)));
  if (amps.squaredNorm() == 0.0) {
    throw LocalizationError("bump_state: support (" + std::to_string(center - half_width) + ", " +
                            std::to_string(center + half_width) + ") contains no grid point");
  }
  WaveFunction psi = WaveFunction::normalized(space, std::move(amps), std::move(profile));
  require_localized(psi, "bump_state");
  return psi;
}

/// The normalized grid state concentrated on point k.
inline WaveFunction point_state(const GridSpace& space, std::size_t k) {
  if (k >= space.n_points()) throw InvalidArgument("point index out of range");
  const auto n = static_cast<Eigen::Index>(space.n_points());
  return WaveFunction::normalized(space, CVector::Unit(n, static_cast<Eigen::Index>(k)));
}

/// Multiplies by exp(i p0 x / hbar). For p0 on the momentum grid this is an exact boost.
inline WaveFunction boost(const WaveFunction& psi, double p0, PlanckConstant hbar = PlanckConstant{}) {
  const GridSpace& s = psi.space();
  CVector amps = psi.amplitudes();
  for (Eigen::Index k = 0; k < amps.size(); ++k) {
    amps[k] *= std::exp(Complex(0.0, p0 * s.coordinate(static_cast<std::size_t>(k)) / hbar.hbar));
  }
  std::shared_ptr<const Profile> profile;
  if (psi.profile() != nullptr) {
    profile = std::make_shared<const Profile>([p = psi.profile_ptr(), p0, h = hbar.hbar](double x) {
      return (*p)(x)*std::exp(Complex(0.0, p0 * x / h));
    });
  }
  return WaveFunction::normalized(s, std::move(amps), std::move(profile));
}

/// psi(x - shift). Grid-aligned shifts are exact index rolls; otherwise the
/// closed-form profile is resampled when available, and the band-limited
/// (spectral) translate is used as a last resort.
inline WaveFunction translate(const WaveFunction& psi, double shift) {
  const GridSpace& s = psi.space();
  s.require_line("translate");
  const auto n = static_cast<Eigen::Index>(s.n_points());
  const double cells = shift / s.spacing();
  const double rounded = std::round(cells);
  if (std::abs(cells - rounded) < 1e-9) {
    const auto m = static_cast<Eigen::Index>(rounded);
    CVector out(n);
    const CVector& a = psi.amplitudes();
    for (Eigen::Index k = 0; k < n; ++k) out[((k + m) % n + n) % n] = a[k];
    std::shared_ptr<const Profile> profile;
    if (psi.profile() != nullptr) {
      profile = std::make_shared<const Profile>([p = psi.profile_ptr(), shift](double x) { return (*p)(x - shift); });
    }
    return WaveFunction(s, std::move(out), std::move(profile));
  }
  if (psi.profile() != nullptr) {
    auto profile =
        std::make_shared<const Profile>([p = psi.profile_ptr(), shift](double x) { return (*p)(x - shift); });
    CVector out(n);
    for (Eigen::Index k = 0; k < n; ++k) out[k] = (*profile)(s.coordinate(static_cast<std::size_t>(k)));
    if (out.squaredNorm() * s.spacing() < 1e-12) {
      throw LocalizationError("translate: shift " + std::to_string(shift) + " moves the state off the grid");
    }
    return WaveFunction::normalized(s, std::move(out), std::move(profile));
  }
  CVector spec = fft_forward(psi.amplitudes());
  const double k0 = 2.0 * kPi / s.box_length();
  for (Eigen::Index m = 0; m < n; ++m) {
    const double k = k0 * static_cast<double>(s.frequency(static_cast<std::size_t>(m)));
    spec[m] *= std::exp(Complex(0.0, -k * shift));
  }
  return WaveFunction::normalized(s, fft_inverse(spec));
}

// ---------------------------------------------------------------------------
// Composite systems

/// Product state; the first factor is the slowest-varying index.
inline WaveFunction tensor_state(const std::vector<WaveFunction>& parts) {
  if (parts.empty()) throw InvalidArgument("tensor_state needs at least one part");
  std::vector<GridSpace> spaces;
  CVector amps = CVector::Ones(1);
  for (const auto& part : parts) {
    spaces.insert(spaces.end(), part.spaces().begin(), part.spaces().end());
    CVector next(amps.size() * part.amplitudes().size());
    for (Eigen::Index i = 0; i < amps.size(); ++i) {
      next.segment(i * part.amplitudes().size(), part.amplitudes().size()) = amps[i] * part.amplitudes();
    }
    amps = std::move(next);
  }
  return WaveFunction::normalized(std::move(spaces), std::move(amps));
}

/// Reduced state of factor `keep`, tracing out all other factors.
inline DensityOperator partial_trace(const WaveFunction& psi, std::size_t keep) {
  if (psi.factors() < 2) throw InvalidArgument("partial_trace needs a composite state");
  if (keep >= psi.factors()) {
    throw InvalidArgument("partial_trace: subsystem index " + std::to_string(keep) + " out of range");
  }
  const auto dims = psi.dims();
  std::size_t before = 1;
  std::size_t after = 1;
  for (std::size_t f = 0; f < keep; ++f) before *= dims[f];
  for (std::size_t f = keep + 1; f < dims.size(); ++f) after *= dims[f];
  const std::size_t d = dims[keep];
  const CVector c = psi.orthonormal();
  CMatrix m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(before * after));
  for (std::size_t b = 0; b < before; ++b) {
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t r = 0; r < after; ++r) {
        m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b * after + r)) =
            c[static_cast<Eigen::Index>((b * d + a) * after + r)];
      }
    }
  }
  CMatrix rho = m * m.adjoint();
  rho /= rho.trace().real();
  return DensityOperator(psi.spaces()[keep], std::move(rho));
}

/// exp(-i h t / hbar) by eigendecomposition.
inline CMatrix unitary_from_hamiltonian(const CMatrix& h, double time, PlanckConstant hbar = PlanckConstant{}) {
  if (h.rows() != h.cols()) throw InvalidArgument("Hamiltonian must be square");
  if (static_cast<std::size_t>(h.rows()) > kMaxDenseDimension) {
    throw SizeGuardError("dense exponentiation limited to dimension " + std::to_string(kMaxDenseDimension) +
                         " (got " + std::to_string(h.rows()) + "); use a matrix-free shift coupling");
  }
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw InvalidArgument("Hamiltonian is not Hermitian");
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(0.5 * (h + h.adjoint()));
  const RVector& w = solver.eigenvalues();
  CVector phases(w.size());
  for (Eigen::Index k = 0; k < w.size(); ++k) phases[k] = std::exp(Complex(0.0, -w[k] * time / hbar.hbar));
  return solver.eigenvectors() * phases.asDiagonal() * solver.eigenvectors().adjoint();
}

inline CMatrix unitary_from_hamiltonian(const HermitianOperator& h, double time,
                                        PlanckConstant hbar = PlanckConstant{}) {
  if (h.space().n_points() > kMaxDenseDimension) {
    throw SizeGuardError("dense exponentiation limited to " + std::to_string(kMaxDenseDimension) +
                         " points; use a matrix-free shift coupling");
  }
  return unitary_from_hamiltonian(h.dense_matrix(), time, hbar);
}

}  // namespace povmlab

#endif  // POVMLAB_HILBERT_HPP
