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
#include <span>
#include <string>
#include <vector>

#include "cfhrm/model.hpp"
#include "cfhrm/rng.hpp"
#include "cfhrm/tokenizer.hpp"

namespace cfhrm {

// Expands directories to the `.txt` files beneath them and sorts the result.
std::vector<std::string> list_corpus_files(const std::vector<std::string>& paths);

std::string read_text_file(const std::string& path);

// Concatenates the files in sorted path order with the end-of-document id
// between consecutive files.
std::vector<std::int32_t> ingest_corpus(const std::vector<std::string>& files, const Tokenizer& tokenizer);

struct TrainBatch {
  TokenGrid inputs;                   // [B, T]
  std::vector<std::int32_t> targets;  // [B, T]; kIgnoreIndex where masked out
  std::vector<std::uint8_t> mask;     // [B, T]
};

// B random windows of length T + 1; inputs are the first T ids, targets the last T.
TrainBatch sample_batch(std::span<const std::int32_t> stream, std::int64_t batch, std::int64_t length, Rng& rng);

// Seeded, reproducible sequence of batches over a stream.
class BatchSampler {
 public:
  BatchSampler(std::span<const std::int32_t> stream, std::int64_t batch, std::int64_t length, std::uint64_t seed);
  TrainBatch next();

 private:
  std::span<const std::int32_t> stream_;
  std::int64_t batch_;
  std::int64_t length_;
  Rng rng_;
};

}  // namespace cfhrm
