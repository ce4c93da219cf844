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

#include "cfhrm/tokenizer.hpp"

#include <set>

#include "cfhrm/errors.hpp"

namespace cfhrm {

namespace {

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

}  // namespace

std::vector<std::string> utf8_pieces(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t n = utf8_length(static_cast<unsigned char>(text[i]));
    bool valid = i + n <= text.size();
    for (std::size_t k = 1; valid && k < n; ++k) valid = (static_cast<unsigned char>(text[i + k]) >> 6) == 0x2;
    if (!valid) n = 1;
    out.emplace_back(text.substr(i, n));
    i += n;
  }
  return out;
}

Tokenizer Tokenizer::byte_level() { return Tokenizer{}; }

Tokenizer Tokenizer::char_vocab(std::string_view corpus) {
  Tokenizer t;
  t.mode_ = Mode::kCharVocab;
  t.pad_ = 0;
  t.bos_ = 1;
  t.eos_ = 2;
  t.unk_ = 3;
  t.pieces_ = {"", "", "", ""};
  std::set<std::string> unique;
  for (auto& p : utf8_pieces(corpus)) unique.insert(std::move(p));
  for (const auto& p : unique) {
    t.index_[p] = static_cast<std::int32_t>(t.pieces_.size());
    t.pieces_.push_back(p);
  }
  return t;
}

nlohmann::json Tokenizer::to_json() const {
  nlohmann::json j;
  j["mode"] = mode_ == Mode::kByte ? "byte" : "char";
  if (mode_ == Mode::kCharVocab) {
    j["pieces"] = std::vector<std::string>(pieces_.begin() + 4, pieces_.end());
  }
  return j;
}

Tokenizer Tokenizer::from_json(const nlohmann::json& j) {
  const auto mode = j.at("mode").get<std::string>();
  if (mode == "byte") return byte_level();
  if (mode != "char") throw ConfigError("unknown tokenizer mode '" + mode + "'");
  std::string joined;
  for (const auto& p : j.at("pieces")) joined += p.get<std::string>();
  return char_vocab(joined);
}

std::int64_t Tokenizer::size() const {
  return mode_ == Mode::kByte ? 259 : static_cast<std::int64_t>(pieces_.size());
}

std::vector<std::int32_t> Tokenizer::encode(std::string_view text) const {
  std::vector<std::int32_t> ids;
  if (mode_ == Mode::kByte) {
    ids.reserve(text.size());
    for (unsigned char c : text) ids.push_back(static_cast<std::int32_t>(c));
    return ids;
  }
  for (const auto& p : utf8_pieces(text)) {
    auto it = index_.find(p);
    ids.push_back(it == index_.end() ? unk_ : it->second);
  }
  return ids;
}

bool Tokenizer::is_special(std::int32_t id) const {
  if (mode_ == Mode::kByte) return id >= 256;
  return id >= 0 && id < 4;
}

std::string Tokenizer::token_text(std::int32_t id) const {
  if (id < 0 || id >= size()) throw IndexError("token id " + std::to_string(id) + " outside tokenizer range");
  if (is_special(id)) return "";
  if (mode_ == Mode::kByte) return std::string(1, static_cast<char>(id));
  return pieces_[static_cast<std::size_t>(id)];
}

std::string Tokenizer::decode(std::span<const std::int32_t> ids) const {
  std::string out;
  for (auto id : ids) out += token_text(id);
  return out;
}

}  // namespace cfhrm
