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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "cfhrm/data.hpp"
#include "cfhrm/errors.hpp"
#include "oracles.hpp"

namespace cfhrm {
namespace {

namespace fs = std::filesystem;

class CorpusDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("cfhrm_data_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_ / "sub");
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string put(const std::string& rel, const std::string& text) {
    const auto p = dir_ / rel;
    std::ofstream(p, std::ios::binary) << text;
    return p.string();
  }
  fs::path dir_;
};

TEST_F(CorpusDir, FilesJoinInSortedOrder) {
  const auto b = put("b.txt", "BB");
  const auto a = put("a.txt", "A");
  put("sub/c.txt", "C");
  put("ignored.md", "x");
  const Tokenizer tok = Tokenizer::byte_level();
  const auto files = list_corpus_files({dir_.string()});
  ASSERT_EQ(files.size(), 3u);
  const auto stream = ingest_corpus(files, tok);
  const std::vector<std::int32_t> want{'A', 258, 'B', 'B', 258, 'C'};
  EXPECT_EQ(stream, want);
  EXPECT_EQ(ingest_corpus({b, a}, tok), ingest_corpus({a, b}, tok));
}

TEST_F(CorpusDir, EmptyListGivesEmptyStream) {
  EXPECT_TRUE(ingest_corpus({}, Tokenizer::byte_level()).empty());
  EXPECT_TRUE(list_corpus_files({dir_.string()}).empty());
}

TEST_F(CorpusDir, MissingFileNamesThePath) {
  const auto p = (dir_ / "nope.txt").string();
  try {
    ingest_corpus({p}, Tokenizer::byte_level());
    FAIL();
  } catch (const FileError& e) {
    EXPECT_NE(std::string(e.what()).find("nope.txt"), std::string::npos);
  }
}

TEST_F(CorpusDir, MegabyteRoundTrip) {
  Rng rng(1);
  std::string text(1 << 20, '\0');
  for (auto& c : text) c = static_cast<char>(rng.uniform_int(0, 255));
  const auto p = put("big.txt", text);
  const Tokenizer tok = Tokenizer::byte_level();
  const auto ids = ingest_corpus({p}, tok);
  ASSERT_EQ(ids.size(), text.size());
  EXPECT_EQ(tok.decode(ids), text);
}

TEST(Tokenizer, CharVocabRoundTripAndRange) {
  const std::string corpus = "abc ñ 日本 abc";
  const Tokenizer tok = Tokenizer::char_vocab(corpus);
  const auto ids = tok.encode(corpus);
  EXPECT_EQ(tok.decode(ids), corpus);
  for (auto id : ids) {
    EXPECT_GE(id, 0);
    EXPECT_LT(id, tok.size());
    EXPECT_FALSE(tok.is_special(id));
  }
  const auto unknown = tok.encode("z");
  ASSERT_EQ(unknown.size(), 1u);
  EXPECT_TRUE(tok.is_special(unknown[0]));
  EXPECT_EQ(Tokenizer::from_json(tok.to_json()).encode(corpus), ids);
}

TEST(Tokenizer, ByteIdsBelowSize) {
  const Tokenizer tok = Tokenizer::byte_level();
  EXPECT_EQ(tok.size(), 259);
  for (auto id : tok.encode("\xff\x00 x")) EXPECT_LT(id, tok.size());
  EXPECT_TRUE(tok.is_special(tok.eos_id()));
}

std::vector<std::int32_t> iota_stream(std::int32_t n) {
  std::vector<std::int32_t> s(static_cast<std::size_t>(n));
  for (std::int32_t i = 0; i < n; ++i) s[i] = i;
  return s;
}

TEST(SampleBatch, TargetsAreShiftedInputs) {
  const auto s = iota_stream(1000);
  Rng rng(2);
  const TrainBatch b = sample_batch(s, 4, 16, rng);
  EXPECT_EQ(b.inputs.batch, 4);
  EXPECT_EQ(b.inputs.length, 16);
  for (std::size_t i = 0; i < b.targets.size(); ++i) {
    EXPECT_EQ(b.targets[i], b.inputs.ids[i] + 1);
    EXPECT_EQ(b.mask[i], 1);
  }
  for (std::int64_t r = 0; r < 4; ++r) {
    for (std::int64_t t = 1; t < 16; ++t) EXPECT_EQ(b.inputs.ids[r * 16 + t], b.inputs.ids[r * 16 + t - 1] + 1);
  }
}

TEST(SampleBatch, SameSeedSameBatches) {
  const auto s = iota_stream(5000);
  BatchSampler a(s, 3, 8, 42), b(s, 3, 8, 42), c(s, 3, 8, 43);
  for (int i = 0; i < 5; ++i) {
    const auto x = a.next(), y = b.next(), z = c.next();
    EXPECT_EQ(x.inputs.ids, y.inputs.ids);
    EXPECT_EQ(x.targets, y.targets);
    if (i == 0) EXPECT_NE(x.inputs.ids, z.inputs.ids);
  }
}

TEST(SampleBatch, StartsAreUniform) {
  const std::int32_t n = 2000, T = 8;
  const auto s = iota_stream(n);
  Rng rng(3);
  std::vector<double> u;
  for (int i = 0; i < 10000; ++i) {
    const auto b = sample_batch(s, 1, T, rng);
    const double start = b.inputs.ids[0];
    EXPECT_LE(start + T, n - 1);
    u.push_back((start + rng.uniform()) / static_cast<double>(n - T));
  }
  EXPECT_GT(oracle::ks_uniform_p(u), 0.01);
}

TEST(SampleBatch, ShortStreamIsDataError) {
  const auto s = iota_stream(10);
  Rng rng(4);
  EXPECT_THROW(sample_batch(s, 2, 8, rng), DataError);
  EXPECT_NO_THROW(sample_batch(s, 1, 9, rng));
}

}  // namespace
}  // namespace cfhrm
