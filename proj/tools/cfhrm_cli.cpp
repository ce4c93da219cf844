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

// Command-line front end: train, generate, analyze, prompts, selftest.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cfhrm/checkpoint.hpp"
#include "cfhrm/config.hpp"
#include "cfhrm/data.hpp"
#include "cfhrm/errors.hpp"
#include "cfhrm/generate.hpp"
#include "cfhrm/report.hpp"
#include "cfhrm/trainer.hpp"
#include "checks.hpp"

namespace {

using namespace cfhrm;

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct TrainArgs {
  std::string config;
  std::vector<std::string> data;
  std::string out;
  std::string resume;
};

struct GenerateArgs {
  std::string ckpt;
  std::string prompt;
  std::int64_t max_new = 64;
  double temperature = 1.0;
  std::optional<std::int64_t> top_k;
  std::optional<double> delta;
  std::uint64_t seed = 0;
  std::string telemetry;
};

struct AnalyzeArgs {
  std::vector<std::string> telemetry;
  std::string group_by = "prompt_id";
  std::string format = "csv";
  std::string out;
  std::optional<std::int64_t> s_max;
};

struct PromptsArgs {
  std::string ckpt;
  std::string file;
  std::int64_t repeats = 1;
  std::uint64_t seed = 0;
  std::string out;
  std::string format;
  std::int64_t max_new = 32;
  double temperature = 1.0;
  std::optional<std::int64_t> top_k;
  std::optional<double> delta;
  std::string telemetry;
};

int run_train(const TrainArgs& a) {
  const ModelConfig config = ModelConfig::load(a.config);
  const auto files = list_corpus_files(a.data);
  if (files.empty()) throw DataError("no corpus files found under the --data paths");
  Tokenizer tokenizer = Tokenizer::byte_level();
  if (!a.resume.empty()) {
    tokenizer = load_checkpoint(a.resume).tokenizer;
  } else if (config.tokenizer == "char") {
    std::string text;
    for (const auto& f : files) text += read_text_file(f);
    tokenizer = Tokenizer::char_vocab(text);
  }
  const auto stream = ingest_corpus(files, tokenizer);
  std::cerr << "corpus: " << files.size() << " files, " << stream.size() << " tokens, vocabulary "
            << tokenizer.size() << '\n';
  TrainLoopOptions opts;
  opts.out_dir = a.out;
  if (!a.resume.empty()) opts.resume = a.resume;
  opts.on_metrics = [](const TrainMetrics& m) { std::cout << m.to_json().dump() << '\n' << std::flush; };
  const auto result = train_loop(config, stream, tokenizer, opts);
  std::cerr << "wrote " << result.last_checkpoint << '\n';
  return kOk;
}

std::string read_stdin() {
  return std::string(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
}

int run_generate(const GenerateArgs& a) {
  const LoadedModel model = load_checkpoint(a.ckpt);
  GenerationRequest req;
  req.prompt = a.prompt == "-" ? read_stdin() : a.prompt;
  req.max_new_tokens = a.max_new;
  req.temperature = a.temperature;
  req.top_k = a.top_k;
  req.seed = a.seed;
  req.halt_bias_delta = a.delta;
  const GenerationResult g = generate(req, model.weights, model.config, model.tokenizer);
  std::cout << req.prompt << g.text << '\n';
  if (!a.telemetry.empty()) {
    std::vector<TelemetryRecord> rows;
    for (const auto& t : g.telemetry) rows.push_back({"prompt", 0, model.config.s_max, t});
    write_telemetry(rows, a.telemetry);
  }
  double steps = 0.0;
  for (const auto& t : g.telemetry) steps += static_cast<double>(t.steps_used);
  std::cerr << g.telemetry.size() << " tokens, mean steps/token " << format_4dp(steps / static_cast<double>(g.telemetry.size()))
            << '\n';
  return kOk;
}

int run_analyze(const AnalyzeArgs& a) {
  std::vector<nlohmann::json> rows;
  std::int64_t s_max = 0;
  for (const auto& path : a.telemetry) {
    for (auto& row : read_telemetry(path)) {
      s_max = std::max(s_max, row.value("s_max", std::int64_t{0}));
      rows.push_back(std::move(row));
    }
  }
  if (rows.empty()) throw DataError("telemetry files contain no rows");
  if (a.s_max) s_max = *a.s_max;
  if (s_max < 1) s_max = 16;
  const RunReport report = step_stats(samples_by_key(rows, a.group_by), s_max);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  emit_report(report, parse_report_format(a.format), a.out);
  return kOk;
}

int run_prompts(const PromptsArgs& a) {
  const LoadedModel model = load_checkpoint(a.ckpt);
  const auto prompts = read_prompt_file(a.file);
  PromptRunOptions opts;
  opts.repeats = a.repeats;
  opts.seed = a.seed;
  opts.max_new_tokens = a.max_new;
  opts.temperature = a.temperature;
  opts.top_k = a.top_k;
  opts.halt_bias_delta = a.delta;
  const PromptRun run = prompt_depth_run(prompts, model.weights, model.config, model.tokenizer, opts);
  std::string format = a.format;
  if (format.empty()) format = a.out.size() >= 6 && a.out.substr(a.out.size() - 6) == ".jsonl" ? "jsonl" : "csv";
  emit_report(run.report, parse_report_format(format), a.out);
  if (!a.telemetry.empty()) write_telemetry(run.telemetry, a.telemetry);
  return kOk;
}

int run_selftest() {
  using checks::CheckResult;
  bool ok = true;
  auto report = [&](const char* suite, const std::vector<CheckResult>& results) {
    for (const auto& r : results) {
      std::cout << (r.passed ? "PASS" : "FAIL") << "  [" << suite << "] " << r.name << ": " << r.detail << '\n';
      ok = ok && r.passed;
    }
    std::cout << std::flush;
  };
  report("params", checks::parameter_count_checks());
  report("gradients", checks::gradient_checks());
  report("architecture", checks::architecture_checks());
  report("halting", checks::halting_checks());
  std::cout << (ok ? "selftest passed" : "selftest FAILED") << '\n';
  return ok ? kOk : kNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cfhrm: hierarchical reasoning language model toolkit"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a model on a text corpus");
  t->add_option("--config", train.config, "Config JSON")->required()->check(CLI::ExistingFile);
  t->add_option("--data", train.data, "Corpus files or directories of .txt files")->required();
  t->add_option("--out", train.out, "Output directory")->required();
  t->add_option("--resume", train.resume, "Checkpoint to resume from");

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Generate text with per-token depth telemetry");
  g->add_option("--ckpt", gen.ckpt, "Checkpoint")->required();
  g->add_option("--prompt", gen.prompt, "Prompt text, or - for stdin")->required();
  g->add_option("--max-new", gen.max_new, "Tokens to generate")->required();
  g->add_option("--temperature", gen.temperature, "Sampling temperature")->required();
  g->add_option("--top-k", gen.top_k, "Keep the k most likely tokens (1 = greedy)");
  g->add_option("--delta", gen.delta, "Halting bias override");
  g->add_option("--seed", gen.seed, "Sampling seed")->required();
  g->add_option("--telemetry", gen.telemetry, "Write JSON-lines telemetry here");

  AnalyzeArgs an;
  auto* a = app.add_subcommand("analyze", "Aggregate telemetry into a depth report");
  a->add_option("--telemetry", an.telemetry, "Telemetry JSON-lines files")->required();
  a->add_option("--group-by", an.group_by, "Telemetry field to group by, or 'all'")->required();
  a->add_option("--format", an.format, "csv or jsonl")->required();
  a->add_option("--out", an.out, "Report path")->required();
  a->add_option("--s-max", an.s_max, "Histogram width (default: from telemetry)");

  PromptsArgs pr;
  auto* p = app.add_subcommand("prompts", "Average reasoning depth per prompt");
  p->add_option("--ckpt", pr.ckpt, "Checkpoint")->required();
  p->add_option("--file", pr.file, "One prompt per line")->required();
  p->add_option("--repeats", pr.repeats, "Generations per prompt")->required();
  p->add_option("--seed", pr.seed, "Base seed")->required();
  p->add_option("--out", pr.out, "Report path")->required();
  p->add_option("--format", pr.format, "csv or jsonl (default: from the --out extension)");
  p->add_option("--max-new", pr.max_new, "Tokens per generation");
  p->add_option("--temperature", pr.temperature, "Sampling temperature");
  p->add_option("--top-k", pr.top_k, "Top-k truncation");
  p->add_option("--delta", pr.delta, "Halting bias override");
  p->add_option("--telemetry", pr.telemetry, "Write per-token telemetry here");

  app.add_subcommand("selftest", "Run the oracle suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (t->parsed()) return run_train(train);
    if (g->parsed()) return run_generate(gen);
    if (a->parsed()) return run_analyze(an);
    if (p->parsed()) return run_prompts(pr);
    return run_selftest();
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kData;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  }
}
