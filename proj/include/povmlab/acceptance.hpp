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

// Acceptance suite: eight end-to-end criteria, each with pinned tolerances
// and a wall-clock budget. Used by the acceptance test binary and by
// `povmlab selftest`.

#ifndef POVMLAB_ACCEPTANCE_HPP
#define POVMLAB_ACCEPTANCE_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "povmlab/classicality.hpp"
#include "povmlab/continuous.hpp"
#include "povmlab/discrete.hpp"
#include "povmlab/experiment.hpp"
#include "povmlab/export.hpp"
#include "povmlab/hilbert.hpp"
#include "povmlab/joint.hpp"
#include "povmlab/scheme.hpp"

namespace povmlab::acceptance {

struct Result {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
  double budget_s = 0.0;
};

inline std::string line(const Result& r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, " (%.2f s, budget %.0f s)", r.seconds, r.budget_s);
  return std::string(r.pass ? "PASS" : "FAIL") + " [" + std::to_string(r.id) + "] " + r.name + ": " + r.detail + buf;
}

namespace detail {

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

class Detail {
 public:
  bool ok = true;

  void at_most(const std::string& what, double value, double tol) {
    add(what + "=" + sci(value) + (value <= tol ? " <= " : " > ") + sci(tol));
    ok = ok && value <= tol;
  }

  void at_least(const std::string& what, double value, double threshold) {
    add(what + "=" + sci(value) + (value >= threshold ? " >= " : " < ") + sci(threshold));
    ok = ok && value >= threshold;
  }

  void expect(const std::string& what, bool cond) {
    add(what + (cond ? " ok" : " FAILED"));
    ok = ok && cond;
  }

  std::string str() const { return os_.str(); }

 private:
  void add(const std::string& s) {
    if (!first_) os_ << "; ";
    first_ = false;
    os_ << s;
  }
  std::ostringstream os_;
  bool first_ = true;
};

inline Result timed(int id, const std::string& name, double budget_s, const std::function<void(Detail&)>& body) {
  Result r{id, name, false, "", 0.0, budget_s};
  Detail d;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(d);
    r.detail = d.str();
    r.pass = d.ok;
  } catch (const std::exception& e) {
    r.detail = d.str() + (d.str().empty() ? "" : "; ") + "error: " + e.what();
    r.pass = false;
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (r.seconds > budget_s) {
    r.pass = false;
    r.detail += "; over time budget";
  }
  return r;
}

inline Json grid_json(std::size_t n, double l) { return {{"n_points", n}, {"box_length", l}}; }

inline Json gaussian_json(double center, double momentum, double variance) {
  return {{"kind", "gaussian"}, {"center", center}, {"momentum", momentum}, {"variance", variance}};
}

}  // namespace detail

// Tolerances pinned for the suite.
inline constexpr double kCalibrationTol = 1e-8;
inline constexpr double kRepeatabilityTol = 1e-6;
inline constexpr double kVarianceRelTol = 1e-6;
inline constexpr double kFirstKindTol = 1e-7;
inline constexpr double kRepeatabilityFloor = 0.01;
inline constexpr double kStructureTol = 1e-8;
inline constexpr double kBudgetTol = 1e-9;
inline constexpr double kSaturationTol = 1e-12;
inline constexpr double kMarginalTol = 1e-6;
inline constexpr double kNearPointRelTol = 1e-4;
inline constexpr double kCovarianceTol = 1e-6;
inline constexpr double kEpsilon = 0.01;

/// Calibrated sharp measurement of eigenvalues -1, +1.
inline Result calibrated_sharp() {
  return detail::timed(1, "calibrated sharp measurement", 1.0, [](detail::Detail& d) {
    const auto a = DiscreteObservable::on_index_space({-1.0, 1.0});
    const auto cal = calibrated_von_neumann_scheme(a, 0.5, 1.0, make_grid(256, 40.0));
    const Povm povm = extract_povm(cal.scheme, 256);
    d.at_most("max|E_i-P_i|", calibration_deviation(cal, a, povm), kCalibrationTol);
    const CVector c = (CVector(2) << Complex(0.6, 0.0), Complex(0.0, 0.8)).finished();
    const auto psi = WaveFunction::from_orthonormal({a.space()}, c);
    d.at_most("repeatability deficit", repeatability_check(cal.scheme, psi).max_deficit, kRepeatabilityTol);
  });
}

/// Var(E) = Var(Q) + Var(e) with Var(e) = Var(Q_1)/lambda^2.
inline Result variance_decomposition() {
  return detail::timed(2, "variance decomposition", 2.0, [](detail::Detail& d) {
    const GridSpace obj = make_grid(256, 16.0);
    const WaveFunction psi = gaussian_state(obj, 0.0, 0.0, 1.0);
    {
      const WaveFunction probe = gaussian_state(make_grid(512, 48.0), 0.0, 0.0, 0.25);
      const auto r = variance_relation_report(psi, probe, 1.0);
      d.at_most("lambda=1 |Var(E)-1.25|/1.25", std::abs(r.var_e_measured - 1.25) / 1.25, kVarianceRelTol);
    }
    {
      const WaveFunction probe = gaussian_state(make_grid(2048, 192.0), 0.0, 0.0, 0.25);
      const auto r = variance_relation_report(psi, probe, 10.0);
      const double noise = r.var_e_measured - r.var_q;
      d.at_most("lambda=10 |noise-0.0025|/0.0025", std::abs(noise - 0.0025) / 0.0025, kVarianceRelTol);
    }
  });
}

/// Unsharp position with a Gaussian probe: first kind, yet not repeatable.
inline Result first_kind_not_repeatable() {
  return detail::timed(3, "first kind without repeatability", 2.0, [](detail::Detail& d) {
    const GridSpace obj = make_grid(128, 16.0);
    const WaveFunction psi = gaussian_state(obj, 0.3, 0.0, 1.0);
    const WaveFunction probe = gaussian_state(make_grid(256, 48.0), 0.0, 0.0, 0.25);
    const MeasurementScheme s = unsharp_position_scheme(obj, probe, 1.0, Partition::from_cuts({0.0}));
    const Povm e = smeared_position_povm(confidence_function(probe, 1.0), s.cells(), obj);
    d.at_most("first-kind deviation", first_kind_check(s, psi, e), kFirstKindTol);
    d.at_least("repeatability deficit", repeatability_check(s, psi).max_deficit, kRepeatabilityFloor);
  });
}

/// Positivity, completeness, commutativity and closed forms for random schemes.
inline Result povm_structure(std::uint64_t seed = 20260401) {
  return detail::timed(4, "POVM structure suite", 30.0, [seed](detail::Detail& d) {
    std::mt19937_64 rng(seed);
    auto u = [&](double lo, double hi) { return lo + (hi - lo) * unit_uniform(rng); };
    double pos = 0.0, comp = 0.0, comm = 0.0, closed = 0.0;
    int count = 0;
    for (int t = 0; t < 10; ++t) {
      const std::size_t m = 2 + static_cast<std::size_t>(rng() % 4);
      std::vector<double> values;
      while (values.size() < m) {
        const double v = u(-2.0, 2.0);
        if (std::all_of(values.begin(), values.end(), [&](double w) { return std::abs(v - w) > 0.05; })) {
          values.push_back(v);
        }
      }
      const auto a = DiscreteObservable::on_index_space(values);
      const WaveFunction probe = gaussian_state(make_grid(128, 24.0), 0.0, 0.0, u(0.1, 0.5));
      const MeasurementScheme s = standard_discrete_scheme(a, probe, u(0.2, 1.5));
      const Povm ex = extract_povm(s, m);
      pos = std::max(pos, -povmlab::detail::min_effect_eigenvalue(ex));
      comp = std::max(comp, ex.completeness_deviation());
      comm = std::max(comm, commutativity_check(ex));
      closed = std::max(closed, max_deviation(ex, measured_effects_discrete(s, a)));
      ++count;
    }
    for (int t = 0; t < 10; ++t) {
      const GridSpace obj = make_grid(32, 8.0);
      const double lambda = 0.5 * static_cast<double>(1 + rng() % 4);  // shifts stay on the probe grid
      const WaveFunction probe = gaussian_state(make_grid(256, 32.0), 0.0, 0.0, u(0.1, 0.7));
      std::vector<double> cuts;
      const std::size_t ncut = 1 + static_cast<std::size_t>(rng() % 3);
      for (std::size_t k = 0; k < ncut; ++k) cuts.push_back(u(-3.0, 3.0));
      std::sort(cuts.begin(), cuts.end());
      cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
      const MeasurementScheme s = unsharp_position_scheme(obj, probe, lambda, Partition::from_cuts(cuts));
      const Povm ex = extract_povm(s, obj.n_points());
      const Povm cf = smeared_position_povm(confidence_function(probe, lambda), s.cells(), obj);
      pos = std::max(pos, -povmlab::detail::min_effect_eigenvalue(ex));
      comp = std::max(comp, ex.completeness_deviation());
      comm = std::max(comm, commutativity_check(ex));
      closed = std::max(closed, max_deviation(ex, cf));
      ++count;
    }
    d.expect(std::to_string(count) + " schemes", count == 20);
    d.at_most("max negativity", pos, kStructureTol);
    d.at_most("completeness", comp, kStructureTol);
    d.at_most("commutativity", comm, kStructureTol);
    d.at_most("closed form vs extraction", closed, kStructureTol);
  });
}

/// Closed-form variance budget over a random parameter sweep, plus saturation.
inline Result joint_algebra(std::uint64_t seed = 20260402) {
  return detail::timed(5, "joint-model algebra", 1.0, [seed](detail::Detail& d) {
    std::mt19937_64 rng(seed);
    auto log_u = [&](double lo, double hi) { return lo * std::pow(hi / lo, unit_uniform(rng)); };
    double worst_residual = 0.0;
    double min_product = kInfinity;
    for (int k = 0; k < 100; ++k) {
      const double lambda = log_u(0.05, 20.0);
      const double mu = log_u(0.05, 20.0);
      const auto b = variance_budget(lambda, mu, gaussian_probe_variances(log_u(0.01, 10.0), log_u(0.01, 10.0)));
      worst_residual = std::max(worst_residual, b.decomposition_residual());
      min_product = std::min(min_product, b.product);
    }
    d.at_most("max |product-(Q+D)|/product", worst_residual, kBudgetTol);
    d.at_least("min product", min_product, 0.25 - kBudgetTol);
    const auto sat = variance_budget(1.0, 1.0, gaussian_probe_variances(0.25, 1.0));
    d.at_most("|saturated product-0.25|", std::abs(sat.product - 0.25), kSaturationTol);
  });
}

/// Simulated three-factor dynamics on 64-point grids.
inline Result joint_dynamics() {
  return detail::timed(6, "joint-model dynamics", 60.0, [](detail::Detail& d) {
    const GridSpace s0 = make_grid(64, 16.0);
    const GridSpace s1 = make_grid(64, 16.0);
    const GridSpace s2 = make_grid(64, 32.0);
    std::vector<double> qe;
    for (int k = 0; k <= 32; ++k) qe.push_back(-8.125 + 0.5 * k);
    const double dp2 = s2.momentum_spacing(PlanckConstant{});
    std::vector<double> pe;
    for (int k = -17; k <= 16; ++k) pe.push_back((2 * k + 0.5) * dp2);
    const JointScheme js(s0, gaussian_state(s1, 0.0, 0.0, 0.5), gaussian_state(s2, 0.0, 0.0, 0.5), 1.0, 1.0,
                         Partition::from_edges(qe), Partition::from_edges(pe));

    const MarginalCheck mc = joint_marginal_check(js, gaussian_state(s0, 0.3, 0.0, 0.5));
    d.at_most("position marginal", mc.position_deviation, kMarginalTol);
    d.at_most("momentum marginal", mc.momentum_deviation, kMarginalTol);

    const ReadingMoments rm = simulated_reading_moments(js, point_state(s0, 32));
    const double var_e = variance_budget(js).var_e;
    d.at_most("near-point Var(e) rel", std::abs(rm.position.variance - var_e) / var_e, kNearPointRelTol);

    const double dp0 = s0.momentum_spacing(PlanckConstant{});
    const double p0 = 2.0 * dp0;
    const double cov = covariance_check(js, gaussian_state(s0, -0.25, -0.5 * p0, 0.5), 0.5, p0);
    d.at_most("covariance deviation", cov, kCovarianceTol);
  });
}

inline Json classicality_config(double lambda, double mu, double var1, double var2, Json object_state) {
  return Json{{"kind", "classicality-sweep"},
              {"hbar", 1.0},
              {"object", {{"grid", detail::grid_json(64, 24.0)}}},
              {"object_state", std::move(object_state)},
              {"probe1", {{"grid", detail::grid_json(64, 24.0)}, {"state", detail::gaussian_json(0, 0, var1)}}},
              {"probe2", {{"grid", detail::grid_json(64, 24.0)}, {"state", detail::gaussian_json(0, 0, var2)}}},
              {"lambda", lambda},
              {"mu", mu},
              {"epsilon", kEpsilon}};
}

/// Microscope and precision regimes, then a 9-point regime map.
inline Result classicality_regimes() {
  return detail::timed(7, "classicality regimes", 120.0, [](detail::Detail& d) {
    const Json object = detail::gaussian_json(0.0, 0.0, 0.5);
    const ResultRecord micro = run_experiment(classicality_config(0.1, 0.05, 1.0, 1.0, object));
    d.expect("microscope C1-C3", *micro.metric("classical") == 1.0);
    d.at_most("microscope disturbance", *micro.metric("c4_disturbance"), 0.01);
    const ResultRecord precise = run_experiment(classicality_config(1.0, 1.0, 0.25, 1.0, object));
    d.expect("precision C3 fails", *precise.metric("c3") == 0.0);
    d.at_most("|precision c3 ratio-1|", std::abs(*precise.metric("c3_ratio") - 1.0), 1e-6);

    Json map = classicality_config(0.1, 0.05, 1.0, 1.0, object);
    map["axes"] = Json::array({Json{{"parameter", "lambda"}, {"values", {0.1, 0.3, 1.0}}},
                               Json{{"parameter", "mu"}, {"values", {0.05, 0.3, 1.0}}}});
    const auto rows = sweep(map, 0);
    std::size_t holds = 0;
    for (const auto& r : rows) {
      if (*r.metric("c3_ratio") <= *r.metric("c3_bound_from_c2") + kChainSlack &&
          r.checks.front().name == "inequality_chain" && r.checks.front().pass) {
        ++holds;
      }
    }
    d.expect("chain holds on " + std::to_string(holds) + "/" + std::to_string(rows.size()) + " rows",
             rows.size() == 9 && holds == rows.size());
  });
}

inline Json determinism_config() {
  return Json{{"kind", "joint"},
              {"hbar", 1.0},
              {"seed", 7},
              {"object", {{"grid", detail::grid_json(64, 16.0)}}},
              {"object_state", detail::gaussian_json(0.1, 0.2, 0.5)},
              {"probe1", {{"grid", detail::grid_json(64, 24.0)}, {"state", detail::gaussian_json(0, 0, 0.5)}}},
              {"probe2", {{"grid", detail::grid_json(64, 32.0)}, {"state", detail::gaussian_json(0, 0, 0.5)}}},
              {"lambda", 1.0},
              {"mu", 1.0},
              {"position_cells", {{"cuts", {-1.0, 0.0, 1.0}}}},
              {"momentum_cells", {{"cuts", {0.0}}}},
              {"axes", Json::array({Json{{"parameter", "lambda"}, {"random", {{"min", 0.5}, {"max", 1.0}, {"count", 3}}}}})}};
}

/// Byte-identical JSON for equal config and seed; exact CSV and plotdata round trips.
inline Result determinism_io(const std::filesystem::path& scratch) {
  return detail::timed(8, "determinism and I/O", 30.0, [&](detail::Detail& d) {
    const Json cfg = determinism_config();
    const auto a = sweep(cfg, 7, 1);
    const auto b = sweep(cfg, 7, 1);
    const auto c = sweep(cfg, 7, 3);
    const std::string ja = records_to_json(a, false).dump(2);
    d.expect("same seed, byte-identical JSON", ja == records_to_json(b, false).dump(2));
    d.expect("thread count does not change JSON", ja == records_to_json(c, false).dump(2));
    d.expect("new seed changes rows", ja != records_to_json(sweep(cfg, 8, 1), false).dump(2));

    const auto back = records_from_json(Json::parse(ja));
    d.expect("JSON re-parse", records_to_json(back, false).dump(2) == ja);

    const auto dir = scratch / "povmlab_acceptance_io";
    export_records(a, ExportFormat::kCsv, dir);
    const auto table = parse_csv(povmlab::detail::read_file(dir / "records.csv"));
    std::size_t mismatches = 0, compared = 0;
    for (std::size_t r = 0; r < a.size(); ++r) {
      for (const auto& [name, value] : a[r].metrics) {
        const auto col = std::find(table[0].begin(), table[0].end(), name) - table[0].begin();
        const double parsed = std::strtod(table[r + 1][static_cast<std::size_t>(col)].c_str(), nullptr);
        ++compared;
        if (!(parsed == value || (std::isnan(parsed) && std::isnan(value)))) ++mismatches;
      }
    }
    d.expect("CSV round trip of " + std::to_string(compared) + " values", mismatches == 0 && compared > 0);

    const auto files = export_records(a, ExportFormat::kPlotData, dir);
    mismatches = 0;
    compared = 0;
    std::size_t f = 0;
    for (const auto& rec : a) {
      for (const auto& dist : rec.distributions) {
        std::istringstream in(povmlab::detail::read_file(files[f++]));
        std::string header;
        std::getline(in, header);
        for (const auto& row : dist.rows) {
          for (double v : row) {
            std::string tok;
            in >> tok;
            ++compared;
            if (std::strtod(tok.c_str(), nullptr) != v) ++mismatches;
          }
        }
      }
    }
    d.expect("plotdata round trip of " + std::to_string(compared) + " values", mismatches == 0 && compared > 0);
    std::filesystem::remove_all(dir);
  });
}

inline std::vector<Result> run_all(const std::filesystem::path& scratch = std::filesystem::temp_directory_path()) {
  return {calibrated_sharp(), variance_decomposition(), first_kind_not_repeatable(), povm_structure(),
          joint_algebra(),    joint_dynamics(),         classicality_regimes(),      determinism_io(scratch)};
}

}  // namespace povmlab::acceptance

#endif  // POVMLAB_ACCEPTANCE_HPP
