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

#include <algorithm>
#include <string>

#include "povmlab/povmlab.hpp"

namespace povmlab {
namespace {

Json load(const std::string& name) {
  return Json::parse(detail::read_file(std::string(POVMLAB_CONFIG_DIR) + "/" + name));
}

std::string validation_field(const Json& cfg) {
  try {
    run_experiment(cfg);
  } catch (const ValidationError& e) {
    return e.field();
  }
  return "<none>";
}

TEST(Experiment, ShippedConfigsPass) {
  for (const char* name : {"calibrated_discrete.json", "discrete_unsharp.json", "first_kind_unsharp.json",
                           "joint_saturation.json", "classicality_microscope.json"}) {
    const ResultRecord r = run_experiment(load(name));
    EXPECT_TRUE(r.passed()) << name;
    EXPECT_FALSE(r.metrics.empty()) << name;
  }
}

TEST(Experiment, SaturationMetrics) {
  const ResultRecord r = run_experiment(load("joint_saturation.json"));
  EXPECT_EQ(r.kind, "joint");
  EXPECT_NEAR(*r.metric("product"), 0.25, 1e-9);
  EXPECT_NEAR(*r.metric("x_ratio"), 1.0, 1e-9);
  EXPECT_FALSE(r.metric("no_such_metric").has_value());
  const auto it = std::find_if(r.checks.begin(), r.checks.end(), [](const Check& c) { return c.name == "expect:product"; });
  ASSERT_NE(it, r.checks.end());
  EXPECT_TRUE(it->pass);
}

TEST(Experiment, ValidationPaths) {
  Json cfg = load("joint_saturation.json");
  cfg["object"]["grid"]["n_points"] = 63;
  EXPECT_EQ(validation_field(cfg), "/object/grid/n_points");

  cfg = load("joint_saturation.json");
  cfg["kind"] = "teleport";
  EXPECT_EQ(validation_field(cfg), "/kind");

  cfg = load("joint_saturation.json");
  cfg["probe1"]["state"]["variance"] = -1.0;
  EXPECT_EQ(validation_field(cfg), "/probe1/state/variance");

  cfg = load("joint_saturation.json");
  cfg.erase("lambda");
  EXPECT_EQ(validation_field(cfg), "/lambda");

  cfg = load("joint_saturation.json");
  cfg["expect"]["not_a_metric"] = Json{{"value", 1.0}, {"abs_tol", 1.0}};
  EXPECT_EQ(validation_field(cfg), "/expect/not_a_metric");
}

TEST(Experiment, FailingExpectationFailsRecord) {
  Json cfg = load("joint_saturation.json");
  cfg["expect"]["product"]["value"] = 0.3;
  EXPECT_FALSE(run_experiment(cfg).passed());
}

TEST(Sweep, SinglePointMatchesRun) {
  Json cfg = load("joint_saturation.json");
  cfg["axes"] = Json::array({Json{{"parameter", "lambda"}, {"values", {1.0}}}});
  const auto rows = sweep(cfg, 0);
  ASSERT_EQ(rows.size(), 1u);
  const ResultRecord direct = run_experiment(load("joint_saturation.json"));
  ASSERT_EQ(rows[0].metrics.size(), direct.metrics.size());
  for (std::size_t i = 0; i < direct.metrics.size(); ++i) {
    EXPECT_EQ(rows[0].metrics[i], direct.metrics[i]);
  }
}

TEST(Sweep, CartesianGridOrderAndMinimum) {
  const auto rows = sweep(load("lambda_variance_grid.json"), 0);
  ASSERT_EQ(rows.size(), 9u);
  // last axis fastest
  EXPECT_EQ(rows[1].config["lambda"].get<double>(), 0.5);
  EXPECT_EQ(rows[1].config["probe1"]["state"]["variance"].get<double>(), 0.5);
  EXPECT_EQ(rows[3].config["lambda"].get<double>(), 1.0);
  double best = kInfinity;
  for (const auto& r : rows) {
    best = std::min(best, *r.metric("product"));
    EXPECT_GE(*r.metric("product"), 0.25 - 1e-12);
  }
  EXPECT_NEAR(best, 0.25, 1e-12);  // lambda 1, Var(Q1) 0.25
}

TEST(Sweep, SizeGuard) {
  Json cfg = load("joint_saturation.json");
  std::vector<double> many(400, 1.0);
  cfg["axes"] = Json::array({Json{{"parameter", "lambda"}, {"values", many}}, Json{{"parameter", "mu"}, {"values", many}}});
  EXPECT_THROW(plan_sweep(cfg, 0), SizeGuardError);
  Json samples = load("joint_saturation.json");
  samples["samples"] = Json{{"count", 100000}, {"parameters", {{"lambda", {0.5, 1.0}}}}};
  EXPECT_THROW(plan_sweep(samples, 0), SizeGuardError);
}

TEST(Sweep, BadAxes) {
  Json cfg = load("joint_saturation.json");
  cfg["axes"] = Json::array({Json{{"parameter", "nowhere.lambda"}, {"values", {1.0}}}});
  EXPECT_THROW(plan_sweep(cfg, 0), ValidationError);
  cfg["axes"] = Json::array({Json{{"parameter", "lambda"}}});
  EXPECT_THROW(plan_sweep(cfg, 0), ValidationError);
  Json classic = load("classicality_microscope.json");
  classic.erase("axes");
  EXPECT_THROW(sweep(classic, 0), ValidationError);
}

TEST(Sweep, SeededRowsAreReproducible) {
  Json cfg = load("joint_saturation.json");
  cfg["samples"] = Json{{"count", 5}, {"parameters", {{"lambda", {0.5, 1.5}}, {"mu", {0.5, 1.5}}}}};
  const SweepPlan a = plan_sweep(cfg, 42);
  const SweepPlan b = plan_sweep(cfg, 42);
  const SweepPlan c = plan_sweep(cfg, 43);
  ASSERT_EQ(a.rows.size(), 5u);
  EXPECT_EQ(a.rows, b.rows);
  EXPECT_NE(a.rows, c.rows);
  for (const auto& r : a.rows) {
    EXPECT_GE(r["lambda"].get<double>(), 0.5);
    EXPECT_LT(r["lambda"].get<double>(), 1.5);
  }
}

TEST(Sweep, ThreadCountDoesNotChangeResults) {
  Json cfg = load("lambda_variance_grid.json");
  const auto one = sweep(cfg, 7, 1);
  const auto three = sweep(cfg, 7, 3);
  ASSERT_EQ(one.size(), three.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(to_json(one[i]).dump(), to_json(three[i]).dump()) << "row " << i;
  }
}

TEST(Sweep, UniformDrawRange) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = unit_uniform(rng);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

}  // namespace
}  // namespace povmlab
