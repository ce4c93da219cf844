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

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfhrm/config.hpp"
#include "cfhrm/errors.hpp"
#include "cfhrm/model.hpp"
#include "cfhrm/tokenizer.hpp"

namespace cfhrm {

// Binary layout (all integers and floats little-endian):
//
//   "CFHRM1"
//   u64 header length, header bytes (UTF-8 JSON)
//   u32 tensor count
//   per tensor: u32 name length, name, u32 rank, u64 dims[rank], f32 values[numel]
//   u64 FNV-1a checksum of every byte between the magic and the checksum
inline constexpr char kCheckpointMagic[] = "CFHRM1";

class CheckpointError : public DataError {
 public:
  enum class Kind { kBadMagic, kVersionMismatch, kTruncated, kChecksumMismatch, kTensorCountMismatch, kTensorMismatch, kMalformed };

  CheckpointError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct TensorFile {
  nlohmann::json header;
  std::vector<NamedTensor> tensors;
};

void write_tensor_file(const std::string& path, const nlohmann::json& header, const std::vector<NamedTensor>& tensors);
TensorFile read_tensor_file(const std::string& path);

// The header is the config JSON, plus the vocabulary when the tokenizer is not byte-level.
void save_checkpoint(const ModelWeights& w, const ModelConfig& config, const std::string& path,
                     const Tokenizer& tokenizer = Tokenizer::byte_level());

struct LoadedModel {
  ModelWeights weights;
  ModelConfig config;
  Tokenizer tokenizer;
};
// Rebuilds the parameter set described by the stored config, fills it, and
// restores embedding/LM-head tying.
LoadedModel load_checkpoint(const std::string& path);

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t hash = 0xcbf29ce484222325ULL);

}  // namespace cfhrm
