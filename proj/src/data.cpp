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

#include "cfhrm/data.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cfhrm/errors.hpp"
#include "cfhrm/ops.hpp"

namespace cfhrm {

namespace fs = std::filesystem;

std::vector<std::string> list_corpus_files(const std::vector<std::string>& paths) {
  std::vector<std::string> files;
  for (const auto& p : paths) {
    std::error_code ec;
    if (fs::is_directory(p, ec)) {
      for (const auto& entry : fs::recursive_directory_iterator(p)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path().string());
      }
    } else {
      files.push_back(p);
    }
  }
  std::sort(files.begin(), files.end());
  files.erase(std::unique(files.begin(), files.end()), files.end());
  return files;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot read corpus file " + path);
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) throw FileError("error while reading corpus file " + path);
  return os.str();
}

std::vector<std::int32_t> ingest_corpus(const std::vector<std::string>& files, const Tokenizer& tokenizer) {
  std::vector<std::string> sorted = files;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::int32_t> stream;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i > 0) stream.push_back(tokenizer.eos_id());
    auto ids = tokenizer.encode(read_text_file(sorted[i]));
    stream.insert(stream.end(), ids.begin(), ids.end());
  }
  return stream;
}

TrainBatch sample_batch(std::span<const std::int32_t> stream, std::int64_t batch, std::int64_t length, Rng& rng) {
  const auto window = length + 1;
  if (batch < 1 || length < 1) throw ConfigError("sample_batch: batch and length must be >= 1");
  if (static_cast<std::int64_t>(stream.size()) < batch * window) {
    throw DataError("token stream of " + std::to_string(stream.size()) + " ids is shorter than one batch (" +
                    std::to_string(batch) + " x " + std::to_string(window) + ")");
  }
  const auto max_start = static_cast<std::int64_t>(stream.size()) - window;
  TrainBatch b;
  b.inputs.batch = batch;
  b.inputs.length = length;
  b.inputs.ids.resize(static_cast<std::size_t>(batch * length));
  b.targets.resize(b.inputs.ids.size());
  b.mask.assign(b.inputs.ids.size(), 1);
  for (std::int64_t r = 0; r < batch; ++r) {
    const auto start = rng.uniform_int(0, max_start);
    for (std::int64_t t = 0; t < length; ++t) {
      b.inputs.ids[r * length + t] = stream[start + t];
      b.targets[r * length + t] = stream[start + t + 1];
    }
  }
  return b;
}

BatchSampler::BatchSampler(std::span<const std::int32_t> stream, std::int64_t batch, std::int64_t length,
                           std::uint64_t seed)
    : stream_(stream), batch_(batch), length_(length), rng_(seed) {}

TrainBatch BatchSampler::next() { return sample_batch(stream_, batch_, length_, rng_); }

}  // namespace cfhrm
