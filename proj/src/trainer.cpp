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

#include "cfhrm/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cfhrm/checkpoint.hpp"
#include "cfhrm/objective.hpp"
#include "cfhrm/ops.hpp"

namespace cfhrm {

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kForwardStream = 0x46575244ULL;  // "FWRD"
constexpr std::uint64_t kBatchStream = 0x42415443ULL;    // "BATC"
constexpr std::uint64_t kEvalStream = 0x4556414cULL;     // "EVAL"

void put_optional(nlohmann::json& j, const char* key, const std::optional<double>& v) {
  if (v) j[key] = *v;
}

struct Split {
  std::span<const std::int32_t> train;
  std::span<const std::int32_t> val;
};

Split split_stream(std::span<const std::int32_t> stream, double val_fraction) {
  const auto n = stream.size();
  const auto n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(n)));
  return {stream.first(n - n_val), stream.last(n_val)};
}

}  // namespace

nlohmann::json TrainMetrics::to_json() const {
  nlohmann::json j{{"iteration", iteration},
                   {"lm_loss", lm_loss},
                   {"step_penalty", step_penalty},
                   {"total_loss", total_loss},
                   {"surrogate_penalty", surrogate_penalty},
                   {"mean_steps", mean_steps},
                   {"steps_std", steps_std},
                   {"explore_fraction", explore_fraction},
                   {"learning_rate", learning_rate},
                   {"grad_norm", grad_norm},
                   {"tokens_seen", tokens_seen}};
  put_optional(j, "val_loss", val_loss);
  put_optional(j, "val_mean_steps", val_mean_steps);
  return j;
}

TrainMetrics TrainMetrics::from_json(const nlohmann::json& j) {
  TrainMetrics m;
  m.iteration = j.at("iteration").get<std::int64_t>();
  m.lm_loss = j.at("lm_loss").get<double>();
  m.step_penalty = j.at("step_penalty").get<double>();
  m.total_loss = j.at("total_loss").get<double>();
  m.surrogate_penalty = j.value("surrogate_penalty", 0.0);
  m.mean_steps = j.at("mean_steps").get<double>();
  m.steps_std = j.at("steps_std").get<double>();
  m.explore_fraction = j.value("explore_fraction", 0.0);
  m.learning_rate = j.at("learning_rate").get<double>();
  m.grad_norm = j.value("grad_norm", 0.0);
  m.tokens_seen = j.at("tokens_seen").get<std::int64_t>();
  if (j.contains("val_loss")) m.val_loss = j.at("val_loss").get<double>();
  if (j.contains("val_mean_steps")) m.val_mean_steps = j.at("val_mean_steps").get<double>();
  return m;
}

std::uint64_t forward_seed(std::uint64_t seed, std::int64_t iteration, std::int64_t micro) {
  return mix_seed(mix_seed(seed, kForwardStream), static_cast<std::uint64_t>(iteration),
                  static_cast<std::uint64_t>(micro));
}

std::uint64_t batch_seed(std::uint64_t seed, std::int64_t iteration) {
  return mix_seed(seed, kBatchStream, static_cast<std::uint64_t>(iteration));
}

std::vector<TrainBatch> draw_update_batches(std::span<const std::int32_t> stream, const ModelConfig& config,
                                            std::int64_t iteration) {
  Rng rng(batch_seed(config.seed, iteration));
  std::vector<TrainBatch> out;
  for (std::int64_t k = 0; k < config.grad_accum; ++k) {
    out.push_back(sample_batch(stream, config.batch_size, config.seq_len, rng));
  }
  return out;
}

TrainMetrics train_step(ModelWeights& w, AdamW& optimizer, const std::vector<TrainBatch>& micro_batches,
                        const ModelConfig& config, std::int64_t iteration) {
  if (micro_batches.empty()) throw UsageError("train_step: no batches");
  const auto n_micro = static_cast<double>(micro_batches.size());
  w.zero_grad();
  TrainMetrics m;
  m.iteration = iteration + 1;
  std::int64_t samples = 0, exploratory = 0;
  std::vector<std::int64_t> steps;
  for (std::size_t k = 0; k < micro_batches.size(); ++k) {
    const TrainBatch& batch = micro_batches[k];
    ForwardOptions opts;
    opts.mode = ForwardMode::kTraining;
    opts.seed = forward_seed(config.seed, iteration, static_cast<std::int64_t>(k));
    opts.sample_offset = static_cast<std::int64_t>(k) * batch.inputs.batch;
    auto fail = [&](const std::string& reason, double lm) {
      nlohmann::json dump{{"iteration", iteration},
                          {"micro_batch", k},
                          {"batch_seed", batch_seed(config.seed, iteration)},
                          {"forward_seed", opts.seed},
                          {"reason", reason},
                          {"lm_loss", lm},
                          {"inputs", batch.inputs.ids}};
      throw NonFiniteLossError("non-finite loss at iteration " + std::to_string(iteration + 1) + ", micro-batch " +
                                   std::to_string(k) + " (batch seed " +
                                   std::to_string(batch_seed(config.seed, iteration)) + "): " + reason,
                               std::move(dump));
    };
    ForwardResult fwd;
    JointLoss loss;
    try {
      fwd = model_forward(batch.inputs, w, config, opts);
      loss = joint_loss(fwd.logits, batch.targets, fwd.hrm, config.lambda_step);
    } catch (const NonFiniteLossError&) {
      throw;
    } catch (const NumericError& e) {
      // Divergence usually surfaces inside the forward pass first.
      fail(e.what(), std::nan(""));
    }
    if (!std::isfinite(loss.lm_loss) || !std::isfinite(loss.penalty_surrogate)) fail("loss is not finite", loss.lm_loss);
    backward(n_micro == 1.0 ? loss.objective : scale(loss.objective, static_cast<float>(1.0 / n_micro)));
    m.lm_loss += loss.lm_loss / n_micro;
    m.surrogate_penalty += loss.penalty_surrogate / n_micro;
    for (const auto& s : fwd.hrm.trace.samples) {
      steps.push_back(s.steps_used);
      exploratory += s.exploratory ? 1 : 0;
      ++samples;
    }
  }
  double mean = 0.0;
  for (auto s : steps) mean += static_cast<double>(s);
  mean /= static_cast<double>(steps.size());
  double var = 0.0;
  for (auto s : steps) var += (static_cast<double>(s) - mean) * (static_cast<double>(s) - mean);
  m.mean_steps = mean;
  m.steps_std = std::sqrt(var / static_cast<double>(steps.size()));
  m.step_penalty = config.lambda_step * m.mean_steps;
  m.total_loss = m.lm_loss + m.step_penalty;
  m.explore_fraction = static_cast<double>(exploratory) / static_cast<double>(samples);

  m.grad_norm = clip_grad_norm(optimizer.params(), config.grad_clip);
  m.learning_rate = lr_schedule(iteration, config.iterations, config.learning_rate, config.warmup_frac,
                                config.min_lr_frac);
  optimizer.step(m.learning_rate);
  m.tokens_seen = (iteration + 1) * config.grad_accum * config.batch_size * config.seq_len;
  return m;
}

EvalResult evaluate(const ModelWeights& w, const ModelConfig& config, std::span<const std::int32_t> stream) {
  const auto window = config.seq_len + 1;
  const auto fit = static_cast<std::int64_t>(stream.size()) / window;
  const auto batch = std::min(config.batch_size, fit);
  if (batch < 1) throw DataError("held-out split is shorter than one sequence");
  NoGradGuard no_grad;
  Rng rng(mix_seed(config.seed, kEvalStream));
  EvalResult r;
  for (std::int64_t k = 0; k < config.eval_batches; ++k) {
    TrainBatch b = sample_batch(stream, batch, config.seq_len, rng);
    ForwardOptions opts;
    opts.mode = ForwardMode::kInference;
    opts.halt_bias_delta = 0.0;
    ForwardResult fwd = model_forward(b.inputs, w, config, opts);
    r.loss += cross_entropy_next_token(fwd.logits, b.targets).item();
    r.mean_steps += fwd.hrm.trace.mean_steps();
  }
  r.loss /= static_cast<double>(config.eval_batches);
  r.mean_steps /= static_cast<double>(config.eval_batches);
  return r;
}

std::string checkpoint_name(std::int64_t iteration) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ckpt_%06lld.bin", static_cast<long long>(iteration));
  return buf;
}

TrainLoopResult train_loop(const ModelConfig& config, std::span<const std::int32_t> stream, const Tokenizer& tokenizer,
                           const TrainLoopOptions& options) {
  config.validate();
  if (stream.empty()) throw DataError("training corpus is empty; nothing to train on");
  if (tokenizer.size() > config.vocab_size) {
    throw ConfigError("tokenizer emits " + std::to_string(tokenizer.size()) + " ids but vocab_size is " +
                      std::to_string(config.vocab_size));
  }
  const Split split = split_stream(stream, config.val_fraction);
  const auto window = config.batch_size * (config.seq_len + 1);
  if (static_cast<std::int64_t>(split.train.size()) < window) {
    throw DataError("training split has " + std::to_string(split.train.size()) + " tokens; one batch needs " +
                    std::to_string(window));
  }
  const bool validate = config.eval_interval > 0 && config.eval_batches > 0 && !split.val.empty();
  if (validate && static_cast<std::int64_t>(split.val.size()) < config.seq_len + 1) {
    throw DataError("held-out split has " + std::to_string(split.val.size()) + " tokens; one sequence needs " +
                    std::to_string(config.seq_len + 1));
  }

  fs::create_directories(options.out_dir);
  const fs::path dir(options.out_dir);

  TrainLoopResult result;
  std::int64_t start = 0;
  if (options.resume) {
    LoadedModel loaded = load_checkpoint(*options.resume);
    if (!(loaded.config == config)) {
      std::string msg = "resume checkpoint " + *options.resume + " was written with a different config:";
      for (const auto& line : config_diff(loaded.config, config)) msg += "\n  " + line;
      throw ConfigError(msg);
    }
    result.weights = std::move(loaded.weights);
  } else {
    result.weights = build_model(config);
  }
  AdamW optimizer(result.weights.named_parameters(),
                  {config.beta1, config.beta2, config.adam_eps, config.weight_decay});
  if (options.resume) {
    optimizer.load(*options.resume + ".optim");
    start = optimizer.steps_taken();
  }

  std::ofstream metrics_out(dir / "metrics.jsonl", options.resume ? std::ios::app : std::ios::trunc);
  if (!metrics_out) throw FileError("cannot open " + (dir / "metrics.jsonl").string());

  auto save = [&](const std::string& name) {
    const auto path = (dir / name).string();
    save_checkpoint(result.weights, config, path, tokenizer);
    optimizer.save(path + ".optim");
    result.last_checkpoint = path;
  };

  const std::int64_t end =
      options.stop_after ? std::min(config.iterations, *options.stop_after) : config.iterations;
  for (std::int64_t it = start; it < end; ++it) {
    auto batches = draw_update_batches(split.train, config, it);
    TrainMetrics m;
    try {
      m = train_step(result.weights, optimizer, batches, config, it);
    } catch (const NonFiniteLossError& e) {
      std::ofstream(dir / "nonfinite_dump.json") << e.dump().dump(2) << '\n';
      throw;
    }
    const bool last = it + 1 == config.iterations;
    if (validate && ((it + 1) % config.eval_interval == 0 || last)) {
      EvalResult ev = evaluate(result.weights, config, split.val);
      m.val_loss = ev.loss;
      m.val_mean_steps = ev.mean_steps;
    }
    if (config.log_interval > 0 && ((it + 1) % config.log_interval == 0 || last || m.val_loss)) {
      metrics_out << m.to_json().dump() << '\n';
      metrics_out.flush();
    }
    result.history.push_back(m);
    if (options.on_metrics) options.on_metrics(m);
    if (config.checkpoint_interval > 0 && (it + 1) % config.checkpoint_interval == 0) save(checkpoint_name(it + 1));
  }
  if (end == config.iterations) {
    save("final.bin");
  } else if (end > start && !(config.checkpoint_interval > 0 && end % config.checkpoint_interval == 0)) {
    save(checkpoint_name(end));
  }
  return result;
}

}  // namespace cfhrm
