/*
 * Copyright 2026 The cfhrm Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfhrm/config.hpp"
#include "cfhrm/generate.hpp"
#include "cfhrm/model.hpp"
#include "cfhrm/tokenizer.hpp"

namespace cfhrm {

inline constexpr const char* kOverallGroup = "overall";

struct ReportRow {
  std::string group;
  double mean_steps = 0.0;
  double std_steps = 0.0;  // population
  std::int64_t n = 0;
  std::vector<std::int64_t> hist;  // hist[i] counts steps == i + 1
  std::optional<double> reference_mean_steps;

  bool operator==(const ReportRow&) const = default;
};

struct RunReport {
  std::int64_t s_max = 16;
  std::vector<ReportRow> rows;  // groups in first-seen order, then the overall row
  std::vector<std::string> warnings;

  const ReportRow& overall() const { return rows.back(); }
  const ReportRow* find(const std::string& group) const;
};

struct StepSample {
  std::string group;
  std::int64_t steps = 0;
};

// Mean, population std and histogram per group plus an overall row. Groups listed in
// `expected_groups` that receive no samples are left out with a warning.
RunReport step_stats(const std::vector<StepSample>& samples, std::int64_t s_max,
                     const std::vector<std::string>& expected_groups = {});

enum class ReportFormat { kCsv, kJsonl };
ReportFormat parse_report_format(const std::string& name);

// Four-decimal fixed rendering.
std::string format_4dp(double v);

std::string render_report(const RunReport& report, ReportFormat format);
void emit_report(const RunReport& report, ReportFormat format, const std::string& path);
RunReport parse_report(const std::string& text, ReportFormat format);
RunReport read_report(const std::string& path, ReportFormat format);

// One telemetry row as written to disk: the token record plus where it came from.
struct TelemetryRecord {
  std::string prompt_id;
  std::int64_t repeat = 0;
  std::int64_t s_max = 0;  // depth cap of the model that produced the row
  TokenTelemetry token;

  nlohmann::json to_json() const;
  static TelemetryRecord from_json(const nlohmann::json& j);
};

void write_telemetry(const std::vector<TelemetryRecord>& rows, const std::string& path);
// Raw JSON objects, one per line.
std::vector<nlohmann::json> read_telemetry(const std::string& path);

// Groups raw telemetry rows by `key` (any field of the row, or "all").
std::vector<StepSample> samples_by_key(const std::vector<nlohmann::json>& rows, const std::string& key);

// Published depth for the known reference prompts; comparison only.
std::optional<double> reference_depth(const std::string& prompt);

struct PromptRun {
  RunReport report;
  std::vector<TelemetryRecord> telemetry;
};

struct PromptRunOptions {
  std::int64_t repeats = 1;
  std::uint64_t seed = 0;
  std::int64_t max_new_tokens = 32;
  double temperature = 1.0;
  std::optional<std::int64_t> top_k;
  std::optional<double> halt_bias_delta;
};

// One prompt per non-empty line; each prompt row's mean is the mean over all its
// generated tokens across the repeats.
std::vector<std::string> read_prompt_file(const std::string& path);
PromptRun prompt_depth_run(const std::vector<std::string>& prompts, const ModelWeights& w, const ModelConfig& config,
                           const Tokenizer& tokenizer, const PromptRunOptions& options);

}  // namespace cfhrm
