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

// JSON-configured experiments and parameter sweeps.
//
// A config is one JSON object whose "kind" selects the experiment. Every
// run produces a ResultRecord holding the config echo, ordered scalar
// metrics, tolerance checks and named distributions. See configs/README.md
// for the schema.

#ifndef POVMLAB_EXPERIMENT_HPP
#define POVMLAB_EXPERIMENT_HPP

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "povmlab/classicality.hpp"
#include "povmlab/continuous.hpp"
#include "povmlab/discrete.hpp"
#include "povmlab/errors.hpp"
#include "povmlab/hilbert.hpp"
#include "povmlab/joint.hpp"
#include "povmlab/scheme.hpp"

namespace povmlab {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "povmlab 1.0.0";
inline constexpr std::size_t kMaxSweepRows = 10000;

struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  std::string relation;  ///< "<=" or ">="
  bool pass = false;
};

struct Distribution {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct ResultRecord {
  std::string version = kVersion;
  std::string kind;
  Json config;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<Check> checks;
  std::vector<Distribution> distributions;
  double wall_time_s = 0.0;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }

  std::optional<double> metric(const std::string& name) const {
    for (const auto& [k, v] : metrics) {
      if (k == name) return v;
    }
    return std::nullopt;
  }

  const Distribution* distribution(const std::string& name) const {
    for (const auto& d : distributions) {
      if (d.name == name) return &d;
    }
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// JSON encoding of records

namespace detail {

inline Json encode_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double decode_number(const Json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInfinity;
    if (s == "-inf") return -kInfinity;
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  if (j.is_boolean()) return j.get<bool>() ? 1.0 : 0.0;
  throw ValidationError(path, "expected a number");
}

}  // namespace detail

inline Json to_json(const ResultRecord& r, bool include_timing = false) {
  Json j;
  j["version"] = r.version;
  j["kind"] = r.kind;
  j["config"] = r.config;
  Json metrics = Json::object();
  for (const auto& [k, v] : r.metrics) metrics[k] = detail::encode_number(v);
  j["metrics"] = std::move(metrics);
  Json checks = Json::array();
  for (const auto& c : r.checks) {
    checks.push_back({{"name", c.name},
                      {"value", detail::encode_number(c.value)},
                      {"tolerance", detail::encode_number(c.tolerance)},
                      {"relation", c.relation},
                      {"pass", c.pass}});
  }
  j["checks"] = std::move(checks);
  Json dists = Json::object();
  for (const auto& d : r.distributions) {
    Json rows = Json::array();
    for (const auto& row : d.rows) {
      Json jr = Json::array();
      for (double v : row) jr.push_back(detail::encode_number(v));
      rows.push_back(std::move(jr));
    }
    dists[d.name] = {{"columns", d.columns}, {"rows", std::move(rows)}};
  }
  j["distributions"] = std::move(dists);
  if (include_timing) j["wall_time_s"] = r.wall_time_s;
  return j;
}

inline ResultRecord record_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("", "record must be a JSON object");
  ResultRecord r;
  r.version = j.at("version").get<std::string>();
  r.kind = j.at("kind").get<std::string>();
  r.config = j.at("config");
  for (const auto& [k, v] : j.at("metrics").items()) r.metrics.emplace_back(k, detail::decode_number(v, "/metrics/" + k));
  for (const auto& c : j.at("checks")) {
    r.checks.push_back(Check{c.at("name").get<std::string>(), detail::decode_number(c.at("value"), "/checks/value"),
                             detail::decode_number(c.at("tolerance"), "/checks/tolerance"),
                             c.at("relation").get<std::string>(), c.at("pass").get<bool>()});
  }
  for (const auto& [name, d] : j.at("distributions").items()) {
    Distribution dist{name, d.at("columns").get<std::vector<std::string>>(), {}};
    for (const auto& row : d.at("rows")) {
      std::vector<double> values;
      for (const auto& v : row) values.push_back(detail::decode_number(v, "/distributions/" + name));
      dist.rows.push_back(std::move(values));
    }
    r.distributions.push_back(std::move(dist));
  }
  if (j.contains("wall_time_s")) r.wall_time_s = j.at("wall_time_s").get<double>();
  return r;
}

// ---------------------------------------------------------------------------
// Config reading

namespace config {

inline std::string child(const std::string& path, const std::string& key) { return path + "/" + key; }

inline const Json& require(const Json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ValidationError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(child(path, key), "required field is missing");
  return *it;
}

inline const Json* find(const Json& obj, const std::string& key) {
  if (!obj.is_object()) return nullptr;
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

inline double number(const Json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInfinity;
    if (s == "-inf") return -kInfinity;
  }
  throw ValidationError(path, "expected a number");
}

inline double number(const Json& obj, const std::string& key, const std::string& path) {
  return number(require(obj, key, path), child(path, key));
}

inline double number_or(const Json& obj, const std::string& key, const std::string& path, double fallback) {
  const Json* j = find(obj, key);
  return j ? number(*j, child(path, key)) : fallback;
}

inline double positive(const Json& obj, const std::string& key, const std::string& path) {
  const double v = number(obj, key, path);
  if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(child(path, key), "must be a positive finite number");
  return v;
}

inline double finite(const Json& obj, const std::string& key, const std::string& path) {
  const double v = number(obj, key, path);
  if (!std::isfinite(v)) throw ValidationError(child(path, key), "must be finite");
  return v;
}

inline std::size_t count(const Json& obj, const std::string& key, const std::string& path) {
  const Json& j = require(obj, key, path);
  if (!j.is_number_integer() && !j.is_number_unsigned()) {
    throw ValidationError(child(path, key), "expected a nonnegative integer");
  }
  const auto v = j.get<long long>();
  if (v < 0) throw ValidationError(child(path, key), "expected a nonnegative integer");
  return static_cast<std::size_t>(v);
}

inline bool flag_or(const Json& obj, const std::string& key, const std::string& path, bool fallback) {
  const Json* j = find(obj, key);
  if (!j) return fallback;
  if (!j->is_boolean()) throw ValidationError(child(path, key), "expected true or false");
  return j->get<bool>();
}

inline std::string text(const Json& obj, const std::string& key, const std::string& path) {
  const Json& j = require(obj, key, path);
  if (!j.is_string()) throw ValidationError(child(path, key), "expected a string");
  return j.get<std::string>();
}

inline std::vector<double> numbers(const Json& obj, const std::string& key, const std::string& path) {
  const Json& j = require(obj, key, path);
  if (!j.is_array()) throw ValidationError(child(path, key), "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], child(child(path, key), std::to_string(i))));
  return out;
}

inline GridSpace grid(const Json& obj, const std::string& path) {
  const std::size_t n = count(obj, "n_points", path);
  const double l = positive(obj, "box_length", path);
  if (n < 4 || n % 2 != 0) throw ValidationError(child(path, "n_points"), "must be even and at least 4");
  return make_grid(n, l);
}

inline WaveFunction state(const GridSpace& space, const Json& obj, const std::string& path, PlanckConstant hbar);

inline WaveFunction state(const GridSpace& space, const Json& obj, const std::string& path, PlanckConstant hbar) {
  const std::string kind = text(obj, "kind", path);
  try {
    if (kind == "gaussian") {
      return gaussian_state(space, number_or(obj, "center", path, 0.0), number_or(obj, "momentum", path, 0.0),
                            positive(obj, "variance", path), hbar);
    }
    if (kind == "bump") {
      return bump_state(space, number_or(obj, "center", path, 0.0), positive(obj, "half_width", path));
    }
    if (kind == "point") {
      if (find(obj, "index")) {
        const std::size_t k = count(obj, "index", path);
        if (k >= space.n_points()) throw ValidationError(child(path, "index"), "outside the grid");
        return point_state(space, k);
      }
      const double x = finite(obj, "position", path);
      const double k = std::round(x / space.spacing() + static_cast<double>(space.n_points() / 2));
      if (k < 0 || k >= static_cast<double>(space.n_points())) {
        throw ValidationError(child(path, "position"), "outside the grid");
      }
      return point_state(space, static_cast<std::size_t>(k));
    }
    if (kind == "uniform") {
      return WaveFunction::normalized(space, CVector::Ones(static_cast<Eigen::Index>(space.n_points())));
    }
    if (kind == "amplitudes") {
      const auto re = numbers(obj, "re", path);
      std::vector<double> im(re.size(), 0.0);
      if (find(obj, "im")) im = numbers(obj, "im", path);
      if (re.size() != space.n_points() || im.size() != re.size()) {
        throw ValidationError(child(path, "re"), "needs one amplitude per grid point (" +
                                                     std::to_string(space.n_points()) + ")");
      }
      CVector a(static_cast<Eigen::Index>(re.size()));
      for (std::size_t k = 0; k < re.size(); ++k) a[static_cast<Eigen::Index>(k)] = Complex(re[k], im[k]);
      return WaveFunction::from_orthonormal({space}, std::move(a));
    }
    if (kind == "superposition") {
      const Json& terms = require(obj, "terms", path);
      if (!terms.is_array() || terms.empty()) throw ValidationError(child(path, "terms"), "expected a nonempty array");
      CVector sum = CVector::Zero(static_cast<Eigen::Index>(space.n_points()));
      for (std::size_t i = 0; i < terms.size(); ++i) {
        const std::string tp = child(child(path, "terms"), std::to_string(i));
        const WaveFunction part = state(space, require(terms[i], "state", tp), child(tp, "state"), hbar);
        Complex c(number_or(terms[i], "re", tp, 1.0), number_or(terms[i], "im", tp, 0.0));
        sum += c * part.amplitudes();
      }
      WaveFunction psi = WaveFunction::normalized(space, std::move(sum));
      require_localized(psi, path);
      return psi;
    }
  } catch (const InvalidArgument& e) {
    throw ValidationError(path, e.what());
  }
  throw ValidationError(child(path, "kind"), "unknown state kind '" + kind + "'");
}

inline Partition partition(const Json* obj, const std::string& path, Partition fallback) {
  if (obj == nullptr) return fallback;
  try {
    if (find(*obj, "cuts")) return Partition::from_cuts(numbers(*obj, "cuts", path));
    if (find(*obj, "edges")) return Partition::from_edges(numbers(*obj, "edges", path));
    if (const Json* u = find(*obj, "uniform")) {
      const std::string up = child(path, "uniform");
      const double lo = finite(*u, "lo", up);
      const double width = positive(*u, "width", up);
      const std::size_t n = count(*u, "count", up);
      if (n == 0) throw ValidationError(child(up, "count"), "must be positive");
      std::vector<double> edges;
      for (std::size_t i = 0; i <= n; ++i) edges.push_back(lo + width * static_cast<double>(i));
      return Partition::from_edges(edges);
    }
    if (flag_or(*obj, "full", path, false)) return Partition::full_line();
  } catch (const InvalidArgument& e) {
    throw ValidationError(path, e.what());
  }
  throw ValidationError(path, "partition needs 'cuts', 'edges', 'uniform' or 'full'");
}

/// Default tolerances per check name, overridable through "tolerances".
class Tolerances {
 public:
  Tolerances(std::map<std::string, double> defaults, const Json& cfg) : values_(std::move(defaults)) {
    const Json* t = find(cfg, "tolerances");
    if (t == nullptr) return;
    if (!t->is_object()) throw ValidationError("/tolerances", "expected an object");
    for (const auto& [k, v] : t->items()) {
      if (values_.find(k) == values_.end()) throw ValidationError("/tolerances/" + k, "unknown tolerance");
      values_[k] = number(v, "/tolerances/" + k);
    }
  }

  double operator[](const std::string& name) const { return values_.at(name); }

 private:
  std::map<std::string, double> values_;
};

}  // namespace config

// ---------------------------------------------------------------------------
// Experiments

namespace detail {

class RecordBuilder {
 public:
  explicit RecordBuilder(ResultRecord& r) : r_(r) {}

  void metric(const std::string& name, double v) { r_.metrics.emplace_back(name, v); }

  void at_most(const std::string& name, double value, double tol) {
    r_.checks.push_back(Check{name, value, tol, "<=", value <= tol});
  }

  void at_least(const std::string& name, double value, double threshold) {
    r_.checks.push_back(Check{name, value, threshold, ">=", value >= threshold});
  }

  void distribution(Distribution d) { r_.distributions.push_back(std::move(d)); }

 private:
  ResultRecord& r_;
};

inline PlanckConstant read_hbar(const Json& cfg) {
  const double h = config::number_or(cfg, "hbar", "", 1.0);
  if (!(h > 0.0) || !std::isfinite(h)) throw ValidationError("/hbar", "must be a positive finite number");
  return PlanckConstant(h);
}

inline Distribution confidence_table(const std::string& name, const ConfidenceFunction& c) {
  Distribution d{name, {"x", "weight"}, {}};
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c.weights()[i] > 0.0) d.rows.push_back({c.points()[i], c.weights()[i]});
  }
  return d;
}

inline double min_effect_eigenvalue(const Povm& povm) {
  double lo = kInfinity;
  for (const auto& e : povm.effects()) {
    if (e.is_diagonal()) {
      lo = std::min(lo, e.diagonal_values().minCoeff());
    } else {
      Eigen::SelfAdjointEigenSolver<CMatrix> s(e.dense(), Eigen::EigenvaluesOnly);
      lo = std::min(lo, s.eigenvalues().minCoeff());
    }
  }
  return lo;
}

inline void run_discrete(const Json& cfg, ResultRecord& rec) {
  RecordBuilder out(rec);
  const PlanckConstant hbar = read_hbar(cfg);
  const config::Tolerances tol({{"closed_form", 1e-8},
                                {"completeness", 1e-8},
                                {"commutativity", 1e-8},
                                {"first_kind", 1e-7},
                                {"calibration", 1e-8},
                                {"repeatability", 1e-6}},
                               cfg);
  const Json& obj = config::require(cfg, "object", "");
  const auto values = config::numbers(obj, "eigenvalues", "/object");
  if (values.empty()) throw ValidationError("/object/eigenvalues", "needs at least one value");
  const DiscreteObservable a = DiscreteObservable::on_index_space(values);
  const Json& probe_cfg = config::require(cfg, "probe", "");
  const GridSpace probe_space = config::grid(config::require(probe_cfg, "grid", "/probe"), "/probe/grid");
  const double lambda = config::finite(cfg, "lambda", "");
  const Json* part = config::find(cfg, "partition");
  const Json* calib = config::find(cfg, "calibration");

  WaveFunction psi = WaveFunction::normalized(a.space(), CVector::Ones(static_cast<Eigen::Index>(a.space().n_points())));
  if (const Json* s = config::find(cfg, "object_state")) psi = config::state(a.space(), *s, "/object_state", hbar);

  std::optional<CalibratedScheme> cal;
  std::optional<MeasurementScheme> built;
  if (calib != nullptr) {
    if (part != nullptr) throw ValidationError("/partition", "calibrated schemes define their own cells");
    const double delta = config::positive(*calib, "delta", "/calibration");
    if (!(lambda > 0.0)) throw ValidationError("/lambda", "calibrated schemes need lambda > 0");
    cal.emplace(calibrated_von_neumann_scheme(a, delta, lambda, probe_space, hbar));
  } else {
    const WaveFunction probe = config::state(probe_space, config::require(probe_cfg, "state", "/probe"), "/probe/state", hbar);
    std::optional<Partition> p;
    if (part != nullptr) p = config::partition(part, "/partition", Partition::full_line());
    built.emplace(standard_discrete_scheme(a, probe, lambda, p, hbar));
  }
  const MeasurementScheme& scheme = cal ? cal->scheme : *built;

  const Povm extracted = extract_povm(scheme, 256);
  const Povm closed = measured_effects_discrete(scheme, a);
  const RVector p = pointer_statistics(scheme, psi);

  double overlap = 0.0;
  const auto* shift = std::get_if<ShiftCoupling>(&scheme.coupling());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const WaveFunction bi = translate(scheme.probe(), shift->lambda * a.eigenvalues()[i]);
      const WaveFunction bj = translate(scheme.probe(), shift->lambda * a.eigenvalues()[j]);
      overlap = std::max(overlap, std::abs(inner(bi, bj)));
    }
  }

  out.metric("lambda", lambda);
  out.metric("n_cells", static_cast<double>(scheme.cells().size()));
  out.metric("closed_form_deviation", max_deviation(extracted, closed));
  out.metric("completeness_deviation", extracted.completeness_deviation());
  out.metric("min_effect_eigenvalue", min_effect_eigenvalue(extracted));
  out.metric("commutativity", commutativity_check(extracted));
  out.metric("first_kind_deviation", first_kind_check(scheme, psi, extracted));
  out.metric("repeatability_deficit", repeatability_check(scheme, psi).max_deficit);
  out.metric("max_branch_overlap", overlap);
  if (cal) out.metric("calibration_deviation", calibration_deviation(*cal, a, extracted));

  out.at_most("closed_form", *rec.metric("closed_form_deviation"), tol["closed_form"]);
  out.at_most("completeness", *rec.metric("completeness_deviation"), tol["completeness"]);
  out.at_most("commutativity", *rec.metric("commutativity"), tol["commutativity"]);
  out.at_most("first_kind", *rec.metric("first_kind_deviation"), tol["first_kind"]);
  if (cal) {
    out.at_most("calibration", *rec.metric("calibration_deviation"), tol["calibration"]);
    out.at_most("repeatability", *rec.metric("repeatability_deficit"), tol["repeatability"]);
  }

  Distribution cells{"cells", {"cell", "lo", "hi", "probability", "nominal"}, {}};
  for (std::size_t c = 0; c < scheme.cells().size(); ++c) {
    const auto& nominal = scheme.pointer().nominal_values[c];
    cells.rows.push_back({static_cast<double>(c), scheme.cells()[c].lo, scheme.cells()[c].hi,
                          p[static_cast<Eigen::Index>(c)],
                          nominal ? *nominal : std::numeric_limits<double>::quiet_NaN()});
  }
  out.distribution(std::move(cells));
}

inline void run_unsharp(const Json& cfg, ResultRecord& rec) {
  RecordBuilder out(rec);
  const PlanckConstant hbar = read_hbar(cfg);
  const config::Tolerances tol({{"variance_identity", 1e-6},
                                {"first_kind", 1e-7},
                                {"reproducibility", 1e-8},
                                {"closed_form", 1e-8},
                                {"commutativity", 1e-8}},
                               cfg);
  const Json& obj = config::require(cfg, "object", "");
  const GridSpace object_space = config::grid(config::require(obj, "grid", "/object"), "/object/grid");
  const WaveFunction psi = config::state(object_space, config::require(cfg, "object_state", ""), "/object_state", hbar);
  const Json& probe_cfg = config::require(cfg, "probe", "");
  const GridSpace probe_space = config::grid(config::require(probe_cfg, "grid", "/probe"), "/probe/grid");
  const WaveFunction probe = config::state(probe_space, config::require(probe_cfg, "state", "/probe"), "/probe/state", hbar);
  const double lambda = config::positive(cfg, "lambda", "");
  const Partition part = config::partition(config::find(cfg, "partition"), "/partition", Partition::from_cuts({0.0}));
  const bool extract = config::flag_or(cfg, "extract", "", object_space.n_points() <= 256);

  const MeasurementScheme scheme = unsharp_position_scheme(object_space, probe, lambda, part, hbar);
  const ConfidenceFunction e = confidence_function(probe, lambda);
  const Povm smeared = smeared_position_povm(e, scheme.cells(), object_space);
  const RVector p = pointer_statistics(scheme, psi);
  const RVector predicted = smeared.probabilities(psi);
  const VarianceRelation vr = variance_relation_report(psi, probe, lambda, hbar);

  out.metric("lambda", lambda);
  out.metric("n_cells", static_cast<double>(scheme.cells().size()));
  out.metric("var_E", vr.var_e_measured);
  out.metric("var_Q", vr.var_q);
  out.metric("noise", vr.noise);
  out.metric("variance_residual_rel", std::abs(vr.residual()) / vr.var_e_measured);
  out.metric("reproducibility_deviation", (p - predicted).cwiseAbs().maxCoeff());
  out.metric("first_kind_deviation", first_kind_check(scheme, psi, smeared));
  out.metric("repeatability_deficit", repeatability_check(scheme, psi).max_deficit);
  out.metric("confidence_variance", e.variance());
  if (extract) {
    const Povm extracted = extract_povm(scheme, 256);
    out.metric("closed_form_deviation", max_deviation(extracted, smeared));
    out.metric("commutativity", commutativity_check(extracted));
    out.metric("completeness_deviation", extracted.completeness_deviation());
  }

  out.at_most("variance_identity", *rec.metric("variance_residual_rel"), tol["variance_identity"]);
  out.at_most("reproducibility", *rec.metric("reproducibility_deviation"), tol["reproducibility"]);
  out.at_most("first_kind", *rec.metric("first_kind_deviation"), tol["first_kind"]);
  if (extract) {
    out.at_most("closed_form", *rec.metric("closed_form_deviation"), tol["closed_form"]);
    out.at_most("commutativity", *rec.metric("commutativity"), tol["commutativity"]);
  }

  Distribution cells{"cells", {"cell", "lo", "hi", "probability", "closed_form"}, {}};
  for (std::size_t c = 0; c < scheme.cells().size(); ++c) {
    const auto ci = static_cast<Eigen::Index>(c);
    cells.rows.push_back({static_cast<double>(c), scheme.cells()[c].lo, scheme.cells()[c].hi, p[ci], predicted[ci]});
  }
  out.distribution(std::move(cells));
  out.distribution(confidence_table("confidence", e));
}

struct JointSetup {
  PlanckConstant hbar;
  GridSpace object_space;
  WaveFunction psi;
  JointScheme scheme;
};

inline JointSetup read_joint(const Json& cfg) {
  const PlanckConstant hbar = read_hbar(cfg);
  const Json& obj = config::require(cfg, "object", "");
  const GridSpace object_space = config::grid(config::require(obj, "grid", "/object"), "/object/grid");
  WaveFunction psi = config::state(object_space, config::require(cfg, "object_state", ""), "/object_state", hbar);
  const Json& p1 = config::require(cfg, "probe1", "");
  const Json& p2 = config::require(cfg, "probe2", "");
  const GridSpace s1 = config::grid(config::require(p1, "grid", "/probe1"), "/probe1/grid");
  const GridSpace s2 = config::grid(config::require(p2, "grid", "/probe2"), "/probe2/grid");
  WaveFunction phi1 = config::state(s1, config::require(p1, "state", "/probe1"), "/probe1/state", hbar);
  WaveFunction phi2 = config::state(s2, config::require(p2, "state", "/probe2"), "/probe2/state", hbar);
  const double lambda = config::finite(cfg, "lambda", "");
  const double mu = config::finite(cfg, "mu", "");
  Partition px = config::partition(config::find(cfg, "position_cells"), "/position_cells", Partition::from_cuts({0.0}));
  Partition py = config::partition(config::find(cfg, "momentum_cells"), "/momentum_cells", Partition::from_cuts({0.0}));
  JointScheme scheme(object_space, std::move(phi1), std::move(phi2), lambda, mu, std::move(px), std::move(py), hbar);
  return {hbar, object_space, std::move(psi), std::move(scheme)};
}

inline void budget_metrics(RecordBuilder& out, const VarianceBudget& b) {
  out.metric("var_e", b.var_e);
  out.metric("var_f", b.var_f);
  out.metric("q_term", b.q_term);
  out.metric("d_term", b.d_term);
  out.metric("x_ratio", b.x_ratio);
  out.metric("product", b.product);
  out.metric("budget_residual_rel", b.decomposition_residual());
}

inline void run_joint(const Json& cfg, ResultRecord& rec) {
  RecordBuilder out(rec);
  const config::Tolerances tol({{"budget_decomposition", 1e-9},
                                {"bound_slack", 1e-9},
                                {"marginals", 1e-6},
                                {"numeric_variance", 1e-4},
                                {"covariance", 1e-6}},
                               cfg);
  const JointSetup setup = read_joint(cfg);
  const JointScheme& scheme = setup.scheme;
  if (!scheme.is_joint()) throw ValidationError("/lambda", "joint experiments need nonzero lambda and mu");
  const bool simulate = config::flag_or(cfg, "simulate", "", true);
  const VarianceBudget b = variance_budget(scheme);
  const double h2 = setup.hbar.hbar * setup.hbar.hbar;

  out.metric("lambda", scheme.lambda());
  out.metric("mu", scheme.mu());
  budget_metrics(out, b);
  out.at_most("budget_decomposition", b.decomposition_residual(), tol["budget_decomposition"]);
  out.at_least("product_bound", b.product, 0.25 * h2 - tol["bound_slack"]);
  out.at_least("q_bound", b.q_term, 0.125 * h2 - tol["bound_slack"]);
  out.at_least("d_bound", b.d_term, 0.125 * h2 - tol["bound_slack"]);
  if (!simulate) return;

  const MarginalCheck mc = joint_marginal_check(scheme, setup.psi);
  const ReadingMoments rm = simulated_reading_moments(scheme, setup.psi);
  const auto obj = canonical_operators(setup.object_space, setup.hbar);
  const double vq = moments(obj.position, setup.psi).variance;
  const double vp = moments(obj.momentum, setup.psi).variance;
  out.metric("position_marginal_deviation", mc.position_deviation);
  out.metric("momentum_marginal_deviation", mc.momentum_deviation);
  out.metric("reading_variance_position", rm.position.variance);
  out.metric("reading_variance_momentum", rm.momentum.variance);
  // readings are object value plus independent noise, so the noise variance is the difference
  const double ve_num = rm.position.variance - vq;
  const double vf_num = rm.momentum.variance - vp;
  out.metric("numeric_var_e", ve_num);
  out.metric("numeric_var_f", vf_num);
  out.metric("numeric_var_e_rel", std::abs(ve_num - b.var_e) / b.var_e);
  out.metric("numeric_var_f_rel", std::abs(vf_num - b.var_f) / b.var_f);
  out.at_most("position_marginal", mc.position_deviation, tol["marginals"]);
  out.at_most("momentum_marginal", mc.momentum_deviation, tol["marginals"]);
  out.at_most("numeric_var_e", *rec.metric("numeric_var_e_rel"), tol["numeric_variance"]);

  if (const Json* cov = config::find(cfg, "covariance")) {
    const double q0 = config::finite(*cov, "q0", "/covariance");
    const double p0 = config::finite(*cov, "p0", "/covariance");
    const double dev = covariance_check(scheme, setup.psi, q0, p0);
    out.metric("covariance_deviation", dev);
    out.at_most("covariance", dev, tol["covariance"]);
  }

  const Eigen::MatrixXd g = joint_distribution(scheme, setup.psi);
  Distribution cells{"cells", {"position_cell", "momentum_cell", "q_lo", "q_hi", "p_lo", "p_hi", "probability"}, {}};
  for (Eigen::Index a = 0; a < g.rows(); ++a) {
    for (Eigen::Index c = 0; c < g.cols(); ++c) {
      const Cell& x = scheme.position_cells()[static_cast<std::size_t>(a)];
      const Cell& y = scheme.momentum_cells()[static_cast<std::size_t>(c)];
      cells.rows.push_back({static_cast<double>(a), static_cast<double>(c), x.lo, x.hi, y.lo, y.hi, g(a, c)});
    }
  }
  out.distribution(std::move(cells));
  const ConfidencePair ef = joint_confidence_functions(scheme);
  out.distribution(confidence_table("e", ef.e));
  out.distribution(confidence_table("f", ef.f));
}

inline void run_classicality(const Json& cfg, ResultRecord& rec) {
  RecordBuilder out(rec);
  const JointSetup setup = read_joint(cfg);
  if (!setup.scheme.is_joint()) {
    throw ValidationError("/lambda", "classicality needs a joint scheme with nonzero lambda and mu");
  }
  const double epsilon = config::number_or(cfg, "epsilon", "", 0.01);
  if (!(epsilon > 0.0)) throw ValidationError("/epsilon", "must be positive");
  const ClassicalityReport r = classicality_report(setup.scheme, setup.psi, epsilon);
  out.metric("lambda", setup.scheme.lambda());
  out.metric("mu", setup.scheme.mu());
  out.metric("epsilon", epsilon);
  out.metric("q_true", r.q_true);
  out.metric("p_true", r.p_true);
  out.metric("var_q", r.var_q);
  out.metric("var_p", r.var_p);
  budget_metrics(out, r.budget);
  out.metric("c1_position", r.c1_position);
  out.metric("c1_momentum", r.c1_momentum);
  out.metric("c2_position", r.c2_position);
  out.metric("c2_momentum", r.c2_momentum);
  out.metric("c3_ratio", r.c3_ratio);
  out.metric("c4_disturbance", r.c4_disturbance);
  out.metric("c1", r.c1 ? 1.0 : 0.0);
  out.metric("c2", r.c2 ? 1.0 : 0.0);
  out.metric("c3", r.c3 ? 1.0 : 0.0);
  out.metric("classical", r.classical() ? 1.0 : 0.0);
  out.metric("kappa", r.kappa);
  out.metric("var_e_o", r.var_e_o);
  out.metric("var_f_o", r.var_f_o);
  out.metric("undisturbed_product", r.undisturbed_product);
  out.metric("chain_lower", r.chain_lower);
  out.metric("c3_bound_from_c2", r.c3_bound_from_c2);
  out.metric("coverage_1", r.coverage[0]);
  out.metric("coverage_2", r.coverage[1]);
  out.metric("coverage_3", r.coverage[2]);
  out.at_least("inequality_chain", r.chain_holds ? 1.0 : 0.0, 1.0);
  out.at_least("c1_implies_c3", r.c1_implies_c3 ? 1.0 : 0.0, 1.0);
}

inline void apply_expectations(const Json& cfg, ResultRecord& rec) {
  const Json* expect = config::find(cfg, "expect");
  if (expect == nullptr) return;
  if (!expect->is_object()) throw ValidationError("/expect", "expected an object");
  for (const auto& [name, spec] : expect->items()) {
    const std::string path = "/expect/" + name;
    const auto value = rec.metric(name);
    if (!value) throw ValidationError(path, "no such metric for kind '" + rec.kind + "'");
    const double target = config::number(spec, "value", path);
    double tol = 0.0;
    if (config::find(spec, "abs_tol")) {
      tol = config::number(spec, "abs_tol", path);
    } else if (config::find(spec, "rel_tol")) {
      tol = config::number(spec, "rel_tol", path) * std::abs(target);
    } else {
      throw ValidationError(path, "needs abs_tol or rel_tol");
    }
    const double dev = std::abs(*value - target);
    rec.checks.push_back(Check{"expect:" + name, dev, tol, "<=", dev <= tol});
  }
}

}  // namespace detail

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds = {"discrete", "unsharp-position", "joint", "classicality-sweep"};
  return kinds;
}

/// Runs one experiment. Axes and samples (if any) are ignored; see sweep().
inline ResultRecord run_experiment(const Json& cfg) {
  if (!cfg.is_object()) throw ValidationError("", "config must be a JSON object");
  const std::string kind = config::text(cfg, "kind", "");
  const auto start = std::chrono::steady_clock::now();
  ResultRecord rec;
  rec.kind = kind;
  rec.config = cfg;
  if (kind == "discrete") {
    detail::run_discrete(cfg, rec);
  } else if (kind == "unsharp-position") {
    detail::run_unsharp(cfg, rec);
  } else if (kind == "joint") {
    detail::run_joint(cfg, rec);
  } else if (kind == "classicality-sweep") {
    detail::run_classicality(cfg, rec);
  } else {
    throw ValidationError("/kind", "unknown experiment kind '" + kind + "'");
  }
  detail::apply_expectations(cfg, rec);
  rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

// ---------------------------------------------------------------------------
// Sweeps

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// "probe1.state.variance" -> "/probe1/state/variance".
inline Json::json_pointer parameter_pointer(const std::string& dotted, const std::string& path) {
  if (dotted.empty()) throw ValidationError(path, "parameter name is empty");
  std::string p;
  std::size_t start = 0;
  while (start <= dotted.size()) {
    const auto dot = dotted.find('.', start);
    const std::string part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ValidationError(path, "malformed parameter name '" + dotted + "'");
    p += "/" + part;
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return Json::json_pointer(p);
}

struct SweepAxis {
  Json::json_pointer pointer;
  std::string name;
  std::vector<double> values;
};

struct SweepPlan {
  Json base;
  std::vector<SweepAxis> axes;
  std::vector<Json> rows;  ///< fully expanded row configs, in axis order
};

/// Expands "axes" (cartesian) and "samples" (jointly drawn random rows) of a config.
inline SweepPlan plan_sweep(const Json& cfg, std::uint64_t seed) {
  if (!cfg.is_object()) throw ValidationError("", "config must be a JSON object");
  SweepPlan plan;
  plan.base = cfg;
  plan.base.erase("axes");
  plan.base.erase("samples");
  std::mt19937_64 rng(seed);

  auto check_target = [&](const Json::json_pointer& ptr, const std::string& path) {
    if (!plan.base.contains(ptr.parent_pointer())) {
      throw ValidationError(path, "parameter '" + ptr.to_string() + "' has no parent object in the config");
    }
  };

  if (const Json* axes = config::find(cfg, "axes")) {
    if (!axes->is_array()) throw ValidationError("/axes", "expected an array");
    for (std::size_t i = 0; i < axes->size(); ++i) {
      const std::string path = "/axes/" + std::to_string(i);
      const Json& ax = (*axes)[i];
      SweepAxis axis;
      axis.name = config::text(ax, "parameter", path);
      axis.pointer = parameter_pointer(axis.name, path + "/parameter");
      check_target(axis.pointer, path + "/parameter");
      if (config::find(ax, "values")) {
        axis.values = config::numbers(ax, "values", path);
      } else if (const Json* r = config::find(ax, "random")) {
        const double lo = config::finite(*r, "min", path + "/random");
        const double hi = config::finite(*r, "max", path + "/random");
        const std::size_t n = config::count(*r, "count", path + "/random");
        if (!(hi >= lo)) throw ValidationError(path + "/random", "max must not be below min");
        if (n > kMaxSweepRows) throw SizeGuardError("axis " + axis.name + " asks for " + std::to_string(n) + " values");
        for (std::size_t k = 0; k < n; ++k) axis.values.push_back(lo + (hi - lo) * unit_uniform(rng));
      } else {
        throw ValidationError(path, "axis needs 'values' or 'random'");
      }
      if (axis.values.empty()) throw ValidationError(path, "axis has no values");
      plan.axes.push_back(std::move(axis));
    }
  }

  // joint random draws as one extra pseudo-axis of whole rows
  std::vector<std::vector<std::pair<Json::json_pointer, double>>> draws;
  if (const Json* s = config::find(cfg, "samples")) {
    const std::size_t n = config::count(*s, "count", "/samples");
    if (n > kMaxSweepRows) throw SizeGuardError("sample count " + std::to_string(n) + " exceeds " + std::to_string(kMaxSweepRows));
    const Json& params = config::require(*s, "parameters", "/samples");
    if (!params.is_object() || params.empty()) throw ValidationError("/samples/parameters", "expected a nonempty object");
    std::vector<std::tuple<Json::json_pointer, double, double>> ranges;
    for (const auto& [name, range] : params.items()) {
      const std::string path = "/samples/parameters/" + name;
      if (!range.is_array() || range.size() != 2) throw ValidationError(path, "expected [min, max]");
      const double lo = config::number(range[0], path + "/0");
      const double hi = config::number(range[1], path + "/1");
      if (!(hi >= lo)) throw ValidationError(path, "max must not be below min");
      auto ptr = parameter_pointer(name, path);
      check_target(ptr, path);
      ranges.emplace_back(std::move(ptr), lo, hi);
    }
    for (std::size_t k = 0; k < n; ++k) {
      std::vector<std::pair<Json::json_pointer, double>> row;
      for (const auto& [ptr, lo, hi] : ranges) row.emplace_back(ptr, lo + (hi - lo) * unit_uniform(rng));
      draws.push_back(std::move(row));
    }
  }

  std::size_t total = draws.empty() ? 1 : draws.size();
  for (const auto& ax : plan.axes) {
    if (total > kMaxSweepRows / ax.values.size() + 1) {
      total = kMaxSweepRows + 1;
      break;
    }
    total *= ax.values.size();
  }
  if (total > kMaxSweepRows) {
    throw SizeGuardError("sweep grid has more than " + std::to_string(kMaxSweepRows) + " points");
  }

  std::vector<std::size_t> idx(plan.axes.size(), 0);
  for (std::size_t r = 0; r < total; ++r) {
    // last axis fastest, sample rows slowest
    std::size_t rem = r;
    for (std::size_t a = plan.axes.size(); a-- > 0;) {
      idx[a] = rem % plan.axes[a].values.size();
      rem /= plan.axes[a].values.size();
    }
    Json row = plan.base;
    if (!draws.empty()) {
      for (const auto& [ptr, v] : draws[rem]) row[ptr] = v;
    }
    for (std::size_t a = 0; a < plan.axes.size(); ++a) row[plan.axes[a].pointer] = plan.axes[a].values[idx[a]];
    plan.rows.push_back(std::move(row));
  }
  return plan;
}

/// Runs every row of the sweep. Results are ordered by row index whatever the thread count.
inline std::vector<ResultRecord> sweep(const Json& cfg, std::uint64_t seed, std::size_t threads = 1) {
  if (config::text(cfg, "kind", "") == "classicality-sweep") {
    const Json* axes = config::find(cfg, "axes");
    const Json* samples = config::find(cfg, "samples");
    if ((axes == nullptr || !axes->is_array() || axes->empty()) && samples == nullptr) {
      throw ValidationError("/axes", "classicality-sweep needs at least one axis");
    }
  }
  const SweepPlan plan = plan_sweep(cfg, seed);
  std::vector<ResultRecord> out(plan.rows.size());
  std::vector<std::exception_ptr> errors(plan.rows.size());
  auto work = [&](std::size_t w, std::size_t stride) {
    for (std::size_t r = w; r < plan.rows.size(); r += stride) {
      try {
        out[r] = run_experiment(plan.rows[r]);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, plan.rows.size()));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace povmlab

#endif  // POVMLAB_EXPERIMENT_HPP
