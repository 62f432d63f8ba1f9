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

// povmlab command line: run, sweep, report, selftest.
//
// Exit codes: 0 all checks pass, 1 other error, 2 validation error,
// 3 physical guard, 4 tolerance failure.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "povmlab/acceptance.hpp"
#include "povmlab/povmlab.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitValidation = 2;
constexpr int kExitGuard = 3;
constexpr int kExitTolerance = 4;

povmlab::Json load_config(const std::string& path) {
  std::string text;
  try {
    text = povmlab::detail::read_file(path);
  } catch (const povmlab::Error& e) {
    throw povmlab::ValidationError("--config", e.what());
  }
  try {
    return povmlab::Json::parse(text);
  } catch (const povmlab::Json::parse_error& e) {
    throw povmlab::ValidationError("--config", std::string("not valid JSON: ") + e.what());
  }
}

std::uint64_t config_seed(const povmlab::Json& cfg, const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const auto* s = povmlab::config::find(cfg, "seed")) {
    if (!s->is_number_unsigned() && !s->is_number_integer()) throw povmlab::ValidationError("/seed", "expected an integer");
    if (s->get<long long>() < 0) throw povmlab::ValidationError("/seed", "expected a nonnegative integer");
    return s->get<std::uint64_t>();
  }
  return 0;
}

int finish(const std::vector<povmlab::ResultRecord>& records, const std::string& out, const std::string& format,
           bool timing) {
  std::cout << povmlab::format_report(records);
  if (!out.empty()) {
    for (const auto& p : povmlab::export_records(records, povmlab::parse_format(format), out, timing)) {
      std::cerr << "wrote " << p.string() << '\n';
    }
  }
  for (const auto& r : records) {
    if (!r.passed()) return kExitTolerance;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"povmlab: simulate quantum measurement schemes and their POVMs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", povmlab::kVersion);

  std::string config_path, out_dir, format = "json", input_path;
  std::size_t threads = 1;
  std::optional<std::uint64_t> seed;
  bool timing = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--format", format, "json, csv or plotdata")->check(CLI::IsMember({"json", "csv", "plotdata"}));
    sub->add_option("--seed", seed, "random seed (overrides the config)");
    sub->add_flag("--timing", timing, "record wall time in JSON output");
  };

  CLI::App* run = app.add_subcommand("run", "run one experiment");
  add_common(run);
  CLI::App* sw = app.add_subcommand("sweep", "expand the config's axes and run every row");
  add_common(sw);
  sw->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  CLI::App* report = app.add_subcommand("report", "summarize stored JSON records");
  report->add_option("--input", input_path, "records.json written by run or sweep")->required()->check(CLI::ExistingFile);
  CLI::App* selftest = app.add_subcommand("selftest", "run the acceptance suite");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const povmlab::Json cfg = load_config(config_path);
      config_seed(cfg, seed);
      return finish({povmlab::run_experiment(cfg)}, out_dir, format, timing);
    }
    if (sw->parsed()) {
      const povmlab::Json cfg = load_config(config_path);
      return finish(povmlab::sweep(cfg, config_seed(cfg, seed), threads), out_dir, format, timing);
    }
    if (report->parsed()) {
      povmlab::Json j;
      try {
        j = povmlab::Json::parse(povmlab::detail::read_file(input_path));
      } catch (const povmlab::Json::parse_error& e) {
        throw povmlab::ValidationError("--input", std::string("not valid JSON: ") + e.what());
      }
      const auto records = povmlab::records_from_json(j);
      std::cout << povmlab::format_report(records);
      return kExitOk;
    }
    if (selftest->parsed()) {
      bool ok = true;
      for (const auto& r : povmlab::acceptance::run_all()) {
        std::cout << povmlab::acceptance::line(r) << '\n';
        ok = ok && r.pass;
      }
      return ok ? kExitOk : kExitTolerance;
    }
  } catch (const povmlab::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const povmlab::GuardError& e) {
    std::cerr << "guard: " << e.what() << '\n';
    return kExitGuard;
  } catch (const povmlab::Json::exception& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
  return kExitOther;
}
