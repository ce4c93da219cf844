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

#include "cfhrm/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cfhrm/errors.hpp"
#include "cfhrm/rng.hpp"

namespace cfhrm {

namespace {

// Token text from byte-level models need not be valid UTF-8.
std::string compact(const nlohmann::json& j) { return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace); }

constexpr const char* kConventions =
    "std_steps uses the population convention; each sample is the steps_used of the forward pass that emitted one "
    "token; hist_k counts samples with steps_used == k";

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Splits one logical CSV record starting at `pos`; quoted fields may span lines.
std::vector<std::string> csv_record(const std::string& text, std::size_t& pos) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  while (pos < text.size()) {
    const char c = text[pos++];
    if (quoted) {
      if (c == '"') {
        if (pos < text.size() && text[pos] == '"') {
          fields.back() += '"';
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c == '\n') {
      break;
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  if (quoted) throw DataError("report: unterminated quoted field");
  return fields;
}

double parse_number(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("report: cannot parse " + what + " '" + s + "'");
  }
}

std::int64_t parse_count(const std::string& s, const std::string& what) {
  const double v = parse_number(s, what);
  if (v < 0 || v != std::floor(v)) throw DataError("report: " + what + " is not a count: '" + s + "'");
  return static_cast<std::int64_t>(v);
}

ReportRow row_from(const std::string& group, const std::vector<std::int64_t>& steps, std::int64_t s_max) {
  ReportRow r;
  r.group = group;
  r.n = static_cast<std::int64_t>(steps.size());
  r.hist.assign(static_cast<std::size_t>(s_max), 0);
  double sum = 0.0;
  for (auto s : steps) {
    if (s < 1 || s > s_max) {
      throw DataError("steps_used " + std::to_string(s) + " outside [1, " + std::to_string(s_max) + "]");
    }
    sum += static_cast<double>(s);
    ++r.hist[static_cast<std::size_t>(s - 1)];
  }
  r.mean_steps = sum / static_cast<double>(r.n);
  double sq = 0.0;
  for (auto s : steps) sq += (static_cast<double>(s) - r.mean_steps) * (static_cast<double>(s) - r.mean_steps);
  r.std_steps = std::sqrt(sq / static_cast<double>(r.n));
  return r;
}

std::string json_row(const ReportRow& r) {
  std::string s = "{\"group\":" + compact(nlohmann::json(r.group)) + ",\"mean_steps\":" + format_4dp(r.mean_steps) +
                  ",\"std_steps\":" + format_4dp(r.std_steps) + ",\"n\":" + std::to_string(r.n);
  for (std::size_t i = 0; i < r.hist.size(); ++i) {
    s += ",\"hist_" + std::to_string(i + 1) + "\":" + std::to_string(r.hist[i]);
  }
  if (r.reference_mean_steps) s += ",\"reference_mean_steps\":" + format_4dp(*r.reference_mean_steps);
  return s + "}";
}

}  // namespace

const ReportRow* RunReport::find(const std::string& group) const {
  for (const auto& r : rows) {
    if (r.group == group) return &r;
  }
  return nullptr;
}

RunReport step_stats(const std::vector<StepSample>& samples, std::int64_t s_max,
                     const std::vector<std::string>& expected_groups) {
  if (samples.empty()) throw DataError("step_stats: no samples");
  if (s_max < 1) throw ConfigError("step_stats: s_max must be >= 1");
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::int64_t>> groups;
  std::vector<std::int64_t> all;
  for (const auto& g : expected_groups) {
    if (groups.emplace(g, std::vector<std::int64_t>{}).second) order.push_back(g);
  }
  for (const auto& s : samples) {
    auto [it, inserted] = groups.try_emplace(s.group);
    if (inserted) order.push_back(s.group);
    it->second.push_back(s.steps);
    all.push_back(s.steps);
  }
  RunReport report;
  report.s_max = s_max;
  for (const auto& g : order) {
    const auto& steps = groups.at(g);
    if (steps.empty()) {
      report.warnings.push_back("group '" + g + "' has no samples and was excluded");
      continue;
    }
    report.rows.push_back(row_from(g, steps, s_max));
  }
  report.rows.push_back(row_from(kOverallGroup, all, s_max));
  return report;
}

ReportFormat parse_report_format(const std::string& name) {
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "jsonl") return ReportFormat::kJsonl;
  throw UsageError("unknown report format '" + name + "' (expected csv or jsonl)");
}

std::string format_4dp(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string render_report(const RunReport& report, ReportFormat format) {
  bool with_reference = false;
  for (const auto& r : report.rows) with_reference = with_reference || r.reference_mean_steps.has_value();
  std::ostringstream os;
  if (format == ReportFormat::kCsv) {
    os << "# " << kConventions << "; s_max " << report.s_max << '\n';
    for (const auto& w : report.warnings) os << "# warning: " << w << '\n';
    os << "group,mean_steps,std_steps,n";
    for (std::int64_t i = 1; i <= report.s_max; ++i) os << ",hist_" << i;
    if (with_reference) os << ",reference_mean_steps";
    os << '\n';
    for (const auto& r : report.rows) {
      os << csv_field(r.group) << ',' << format_4dp(r.mean_steps) << ',' << format_4dp(r.std_steps) << ',' << r.n;
      for (auto h : r.hist) os << ',' << h;
      if (with_reference) os << ',' << (r.reference_mean_steps ? format_4dp(*r.reference_mean_steps) : "");
      os << '\n';
    }
  } else {
    nlohmann::json meta{{"conventions", kConventions}, {"s_max", report.s_max}, {"warnings", report.warnings}};
    os << compact(nlohmann::json{{"_meta", meta}}) << '\n';
    for (const auto& r : report.rows) os << json_row(r) << '\n';
  }
  return os.str();
}

void emit_report(const RunReport& report, ReportFormat format, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot open report " + path + " for writing");
  out << render_report(report, format);
  out.flush();
  if (!out) throw FileError("failed writing report " + path);
}

RunReport parse_report(const std::string& text, ReportFormat format) {
  RunReport report;
  report.rows.clear();
  if (format == ReportFormat::kCsv) {
    std::size_t pos = 0;
    std::vector<std::string> header;
    const std::string warning_prefix = "# warning: ";
    while (pos < text.size()) {
      if (text[pos] == '#') {
        const auto eol = text.find('\n', pos);
        const std::string line = text.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
        if (line.rfind(warning_prefix, 0) == 0) report.warnings.push_back(line.substr(warning_prefix.size()));
        pos = eol == std::string::npos ? text.size() : eol + 1;
        continue;
      }
      auto fields = csv_record(text, pos);
      if (fields.size() == 1 && fields[0].empty()) continue;
      if (header.empty()) {
        header = fields;
        if (header.size() < 5 || header[0] != "group" || header[1] != "mean_steps" || header[2] != "std_steps" ||
            header[3] != "n") {
          throw DataError("report: unexpected CSV header");
        }
        report.s_max = 0;
        while (4 + report.s_max < static_cast<std::int64_t>(header.size()) &&
               header[4 + report.s_max] == "hist_" + std::to_string(report.s_max + 1)) {
          ++report.s_max;
        }
        continue;
      }
      if (fields.size() != header.size()) throw DataError("report: row has " + std::to_string(fields.size()) +
                                                          " fields, header has " + std::to_string(header.size()));
      ReportRow r;
      r.group = fields[0];
      r.mean_steps = parse_number(fields[1], "mean_steps");
      r.std_steps = parse_number(fields[2], "std_steps");
      r.n = parse_count(fields[3], "n");
      for (std::int64_t i = 0; i < report.s_max; ++i) r.hist.push_back(parse_count(fields[4 + i], "histogram count"));
      if (static_cast<std::int64_t>(header.size()) > 4 + report.s_max && !fields.back().empty()) {
        r.reference_mean_steps = parse_number(fields.back(), "reference_mean_steps");
      }
      report.rows.push_back(std::move(r));
    }
    if (header.empty()) throw DataError("report: missing CSV header");
  } else {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("report: invalid JSON line: ") + e.what());
      }
      if (j.contains("_meta")) {
        report.s_max = j["_meta"].value("s_max", report.s_max);
        report.warnings = j["_meta"].value("warnings", std::vector<std::string>{});
        continue;
      }
      ReportRow r;
      r.group = j.at("group").get<std::string>();
      r.mean_steps = j.at("mean_steps").get<double>();
      r.std_steps = j.at("std_steps").get<double>();
      r.n = j.at("n").get<std::int64_t>();
      for (std::int64_t i = 1; j.contains("hist_" + std::to_string(i)); ++i) {
        r.hist.push_back(j.at("hist_" + std::to_string(i)).get<std::int64_t>());
      }
      if (j.contains("reference_mean_steps")) r.reference_mean_steps = j["reference_mean_steps"].get<double>();
      report.rows.push_back(std::move(r));
    }
  }
  if (report.rows.empty()) throw DataError("report: no rows");
  return report;
}

RunReport read_report(const std::string& path, ReportFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot read report " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse_report(os.str(), format);
}

nlohmann::json TelemetryRecord::to_json() const {
  nlohmann::json j = token.to_json();
  j["prompt_id"] = prompt_id;
  j["repeat"] = repeat;
  j["s_max"] = s_max;
  return j;
}

TelemetryRecord TelemetryRecord::from_json(const nlohmann::json& j) {
  TelemetryRecord r;
  r.prompt_id = j.value("prompt_id", "");
  r.repeat = j.value("repeat", std::int64_t{0});
  r.s_max = j.value("s_max", std::int64_t{0});
  r.token = TokenTelemetry::from_json(j);
  return r;
}

void write_telemetry(const std::vector<TelemetryRecord>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot open telemetry file " + path + " for writing");
  for (const auto& r : rows) out << compact(r.to_json()) << '\n';
  out.flush();
  if (!out) throw FileError("failed writing telemetry file " + path);
}

std::vector<nlohmann::json> read_telemetry(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot read telemetry file " + path);
  std::vector<nlohmann::json> rows;
  std::string line;
  std::int64_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      rows.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(n) + ": invalid JSON: " + e.what());
    }
    if (!rows.back().is_object() || !rows.back().contains("steps_used")) {
      throw DataError(path + ":" + std::to_string(n) + ": row has no steps_used");
    }
  }
  return rows;
}

std::vector<StepSample> samples_by_key(const std::vector<nlohmann::json>& rows, const std::string& key) {
  std::vector<StepSample> out;
  out.reserve(rows.size());
  for (const auto& j : rows) {
    StepSample s;
    if (key == "all") {
      s.group = "all";
    } else {
      if (!j.contains(key)) throw DataError("telemetry row has no field '" + key + "'");
      const auto& v = j.at(key);
      s.group = v.is_string() ? v.get<std::string>() : v.dump();
    }
    if (!j.at("steps_used").is_number_integer()) throw DataError("telemetry steps_used is not an integer");
    s.steps = j.at("steps_used").get<std::int64_t>();
    out.push_back(std::move(s));
  }
  return out;
}

std::optional<double> reference_depth(const std::string& prompt) {
  static const std::map<std::string, double> table{
      {"The capital of France is", 2.7805},
      {"Photosynthesis is the process by which plants", 4.7722},
      {"If all roses are flowers and some flowers fade quickly, what can we conclude about roses?", 7.0303},
      {"A bat and a ball cost $1.10 in total. The bat costs $1.00 more than the ball. How much does the ball cost?",
       8.4000},
  };
  auto it = table.find(prompt);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> read_prompt_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot read prompt file " + path);
  std::vector<std::string> prompts;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) prompts.push_back(line);
  }
  if (prompts.empty()) throw InputError("prompt file " + path + " contains no prompts");
  return prompts;
}

PromptRun prompt_depth_run(const std::vector<std::string>& prompts, const ModelWeights& w, const ModelConfig& config,
                           const Tokenizer& tokenizer, const PromptRunOptions& options) {
  if (prompts.empty()) throw InputError("no prompts given");
  if (options.repeats < 1) throw UsageError("repeats must be >= 1");
  PromptRun run;
  std::vector<StepSample> samples;
  for (std::size_t p = 0; p < prompts.size(); ++p) {
    for (std::int64_t r = 0; r < options.repeats; ++r) {
      GenerationRequest req;
      req.prompt = prompts[p];
      req.max_new_tokens = options.max_new_tokens;
      req.temperature = options.temperature;
      req.top_k = options.top_k;
      req.seed = mix_seed(options.seed, p, static_cast<std::uint64_t>(r));
      req.halt_bias_delta = options.halt_bias_delta;
      GenerationResult g = generate(req, w, config, tokenizer);
      for (auto& t : g.telemetry) {
        samples.push_back({prompts[p], t.steps_used});
        run.telemetry.push_back({prompts[p], r, config.s_max, std::move(t)});
      }
    }
  }
  run.report = step_stats(samples, config.s_max, prompts);
  for (auto& row : run.report.rows) {
    if (row.group != kOverallGroup) row.reference_mean_steps = reference_depth(row.group);
  }
  return run;
}

}  // namespace cfhrm
