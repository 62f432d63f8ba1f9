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

#include <cmath>
#include <filesystem>
#include <limits>
#include <string>

#include "povmlab/povmlab.hpp"

namespace povmlab {
namespace {

ResultRecord sample_record() {
  ResultRecord r;
  r.kind = "joint";
  r.config = Json{{"kind", "joint"}, {"label", "a, \"quoted\" name"}, {"lambda", 0.1}, {"grid", {{"n_points", 64}}}};
  r.metrics = {{"var_e", 0.1 + 0.2}, {"tiny", 1e-300}, {"big", std::numeric_limits<double>::infinity()}};
  r.checks = {Check{"bound", 0.3, 0.25, ">=", true}};
  r.distributions = {Distribution{"cells", {"x", "p"}, {{-1.0, 0.25}, {0.0, 0.5}, {1.0, 0.25}}}};
  return r;
}

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("povmlab_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

TEST(Export, ExactNumberText) {
  for (double v : {0.1 + 0.2, 1e-300, -2.5e17, 1.0 / 3.0}) EXPECT_EQ(std::stod(format_exact(v)), v);
  EXPECT_EQ(format_exact(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_exact(std::nan("")), "nan");
}

TEST(Export, CsvColumnsAreConfigLeavesThenMetrics) {
  const ResultRecord r = sample_record();
  const auto rows = parse_csv(to_csv({r}));
  ASSERT_EQ(rows.size(), 2u);
  const std::size_t config_leaves = 4;
  EXPECT_EQ(rows[0].size(), config_leaves + r.metrics.size());
  EXPECT_EQ(rows[0][0], "config.kind");
  EXPECT_EQ(rows[0][3], "config.grid.n_points");
  EXPECT_EQ(rows[0][4], "var_e");
  EXPECT_EQ(rows[1][1], "a, \"quoted\" name");
  EXPECT_EQ(std::stod(rows[1][4]), 0.1 + 0.2);
  EXPECT_EQ(rows[1][6], "inf");
}

TEST(Export, CsvQuotingRoundTrip) {
  for (const std::string s : {"plain", "com,ma", "quo\"te", "line\r\nbreak", ""}) {
    const auto rows = parse_csv(csv_field(s) + "," + csv_field("x") + "\r\n");
    ASSERT_EQ(rows.size(), 1u);
    ASSERT_EQ(rows[0].size(), 2u);
    EXPECT_EQ(rows[0][0], s);
  }
}

TEST(Export, CsvUnionOfColumns) {
  ResultRecord a = sample_record();
  ResultRecord b = sample_record();
  b.metrics.emplace_back("extra", 2.0);
  const auto rows = parse_csv(to_csv({a, b}));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].back(), "extra");
  EXPECT_EQ(rows[1].back(), "");
  EXPECT_EQ(rows[2].back(), "2");
}

TEST(Export, JsonRoundTrip) {
  const ResultRecord r = sample_record();
  const ResultRecord back = record_from_json(Json::parse(to_json(r).dump()));
  EXPECT_EQ(back.version, r.version);
  EXPECT_EQ(back.kind, r.kind);
  EXPECT_EQ(back.config, r.config);
  EXPECT_EQ(back.metrics, r.metrics);
  ASSERT_EQ(back.checks.size(), 1u);
  EXPECT_EQ(back.checks[0].name, "bound");
  EXPECT_EQ(back.checks[0].value, 0.3);
  EXPECT_EQ(back.checks[0].relation, ">=");
  ASSERT_EQ(back.distributions.size(), 1u);
  EXPECT_EQ(back.distributions[0].rows, r.distributions[0].rows);
  EXPECT_EQ(to_json(back).dump(), to_json(r).dump());
  EXPECT_FALSE(to_json(r).contains("wall_time_s"));
  EXPECT_TRUE(to_json(r, true).contains("wall_time_s"));
}

TEST(Export, PlotTableHasHeaderPlusRows) {
  const std::string t = plot_table(sample_record().distributions[0]);
  EXPECT_EQ(std::count(t.begin(), t.end(), '\n'), 4);
  EXPECT_EQ(t.substr(0, 6), "# x p\n");
}

TEST(Export, WritesAllFormats) {
  const auto dir = scratch("formats");
  const std::vector<ResultRecord> recs{sample_record(), sample_record()};
  const auto json = export_records(recs, ExportFormat::kJson, dir);
  ASSERT_EQ(json.size(), 1u);
  EXPECT_EQ(records_from_json(Json::parse(detail::read_file(json[0]))).size(), 2u);
  const auto csv = export_records(recs, ExportFormat::kCsv, dir);
  EXPECT_EQ(parse_csv(detail::read_file(csv[0])).size(), 3u);
  const auto dat = export_records(recs, ExportFormat::kPlotData, dir);
  ASSERT_EQ(dat.size(), 2u);
  EXPECT_EQ(dat[1].filename(), "r1_cells.dat");
  std::filesystem::remove_all(dir);
}

TEST(Export, UnknownFormat) {
  EXPECT_EQ(parse_format("csv"), ExportFormat::kCsv);
  EXPECT_THROW(parse_format("xml"), ValidationError);
}

TEST(Export, ReportMarksFailures) {
  ResultRecord r = sample_record();
  r.checks.push_back(Check{"broken", 1.0, 0.5, "<=", false});
  const std::string text = format_report({r});
  EXPECT_NE(text.find("FAIL"), std::string::npos);
  EXPECT_NE(text.find("broken"), std::string::npos);
}

}  // namespace
}  // namespace povmlab
