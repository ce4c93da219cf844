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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace cfhrm {

// Byte-level: ids 0..255 are raw bytes, then pad/begin/end.
// Char-vocab: pad/begin/end/unknown, then the corpus code points in sorted order.
class Tokenizer {
 public:
  enum class Mode { kByte, kCharVocab };

  static Tokenizer byte_level();
  static Tokenizer char_vocab(std::string_view corpus);
  static Tokenizer from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  Mode mode() const { return mode_; }
  std::int32_t pad_id() const { return pad_; }
  std::int32_t bos_id() const { return bos_; }
  std::int32_t eos_id() const { return eos_; }
  // Number of ids the tokenizer can emit.
  std::int64_t size() const;

  std::vector<std::int32_t> encode(std::string_view text) const;
  // Special ids decode to nothing.
  std::string decode(std::span<const std::int32_t> ids) const;
  std::string token_text(std::int32_t id) const;
  bool is_special(std::int32_t id) const;

 private:
  Mode mode_ = Mode::kByte;
  std::int32_t pad_ = 256;
  std::int32_t bos_ = 257;
  std::int32_t eos_ = 258;
  std::int32_t unk_ = -1;
  std::vector<std::string> pieces_;            // char-vocab: id -> UTF-8 piece
  std::map<std::string, std::int32_t> index_;  // char-vocab: piece -> id
};

// Splits UTF-8 into code-point pieces; stray bytes become single-byte pieces.
std::vector<std::string> utf8_pieces(std::string_view text);

}  // namespace cfhrm
