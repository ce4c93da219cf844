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

#include "cfhrm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace cfhrm {

namespace {

using Kind = CheckpointError::Kind;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  std::vector<char>& bytes() { return bytes_; }

 private:
  std::vector<char> bytes_;
};

// Bounds-checked cursor over the payload region.
class Reader {
 public:
  Reader(const char* data, std::size_t size, std::string path) : data_(data), size_(size), path_(std::move(path)) {}

  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const char* take(std::size_t n) {
    if (n > size_ - pos_) throw CheckpointError(Kind::kTruncated, path_ + ": truncated checkpoint");
    const char* p = data_ + pos_;
    pos_ += n;
    return p;
  }
  std::size_t remaining() const { return size_ - pos_; }

 private:
  const char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  std::string path_;
};

constexpr std::size_t kMagicLen = sizeof(kCheckpointMagic) - 1;

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t hash) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= p[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

void write_tensor_file(const std::string& path, const nlohmann::json& header, const std::vector<NamedTensor>& tensors) {
  Writer w;
  const std::string text = header.dump();
  w.put<std::uint64_t>(text.size());
  w.put_bytes(text.data(), text.size());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.put_bytes(name.data(), name.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) w.put<std::uint64_t>(static_cast<std::uint64_t>(d));
    w.put_bytes(t.data(), static_cast<std::size_t>(t.numel()) * sizeof(float));
  }
  const std::uint64_t checksum = fnv1a64(w.bytes().data(), w.bytes().size());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot open " + path + " for writing");
  out.write(kCheckpointMagic, kMagicLen);
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  out.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
  if (!out) throw FileError("failed writing " + path);
}

TensorFile read_tensor_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open checkpoint " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < kMagicLen || std::memcmp(bytes.data(), kCheckpointMagic, kMagicLen - 1) != 0) {
    if (bytes.size() < kMagicLen && std::memcmp(bytes.data(), kCheckpointMagic, bytes.size()) == 0) {
      throw CheckpointError(Kind::kTruncated, path + ": truncated before the magic bytes");
    }
    throw CheckpointError(Kind::kBadMagic, path + ": not a checkpoint file");
  }
  if (bytes[kMagicLen - 1] != kCheckpointMagic[kMagicLen - 1]) {
    throw CheckpointError(Kind::kVersionMismatch, path + ": unsupported checkpoint version '" +
                                                      std::string(bytes.data(), kMagicLen) + "'");
  }

  Reader r(bytes.data() + kMagicLen, bytes.size() - kMagicLen, path);
  TensorFile file;
  const auto header_len = r.get<std::uint64_t>();
  if (header_len > r.remaining()) throw CheckpointError(Kind::kTruncated, path + ": header length exceeds file size");
  const char* header = r.take(static_cast<std::size_t>(header_len));
  try {
    file.header = nlohmann::json::parse(header, header + header_len);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(Kind::kMalformed, path + ": header is not valid JSON: " + e.what());
  }
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint32_t>();
    std::string name(r.take(name_len), name_len);
    const auto rank = r.get<std::uint32_t>();
    if (rank == 0 || rank > 8) throw CheckpointError(Kind::kMalformed, path + ": tensor '" + name + "' has invalid rank");
    Shape shape;
    std::uint64_t numel = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const auto d = r.get<std::uint64_t>();
      if (d == 0 || d > (std::uint64_t{1} << 40)) {
        throw CheckpointError(Kind::kMalformed, path + ": tensor '" + name + "' has invalid dimension");
      }
      shape.push_back(static_cast<std::int64_t>(d));
      numel *= d;
    }
    if (numel > r.remaining() / sizeof(float)) throw CheckpointError(Kind::kTruncated, path + ": truncated tensor '" + name + "'");
    std::vector<float> values(static_cast<std::size_t>(numel));
    std::memcpy(values.data(), r.take(values.size() * sizeof(float)), values.size() * sizeof(float));
    file.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (r.remaining() < sizeof(std::uint64_t)) throw CheckpointError(Kind::kTruncated, path + ": missing checksum");
  if (r.remaining() > sizeof(std::uint64_t)) throw CheckpointError(Kind::kMalformed, path + ": trailing bytes after tensors");
  const std::size_t payload = bytes.size() - kMagicLen - sizeof(std::uint64_t);
  const auto stored = r.get<std::uint64_t>();
  if (stored != fnv1a64(bytes.data() + kMagicLen, payload)) {
    throw CheckpointError(Kind::kChecksumMismatch, path + ": checksum mismatch");
  }
  return file;
}

void save_checkpoint(const ModelWeights& w, const ModelConfig& config, const std::string& path,
                     const Tokenizer& tokenizer) {
  nlohmann::json header = config.to_json();
  if (tokenizer.mode() != Tokenizer::Mode::kByte) header["vocabulary"] = tokenizer.to_json();
  write_tensor_file(path, header, w.named_parameters());
}

LoadedModel load_checkpoint(const std::string& path) {
  TensorFile file = read_tensor_file(path);
  LoadedModel loaded;
  try {
    nlohmann::json config = file.header;
    if (config.contains("vocabulary")) {
      loaded.tokenizer = Tokenizer::from_json(config.at("vocabulary"));
      config.erase("vocabulary");
    }
    loaded.config = ModelConfig::from_json(config);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(Kind::kMalformed, path + ": bad config header: " + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(Kind::kMalformed, path + ": bad config header: " + e.what());
  }
  // Shapes come from the config; values are overwritten below.
  Rng rng(0);
  loaded.weights = build_model(loaded.config, rng);
  auto params = loaded.weights.named_parameters();
  if (params.size() != file.tensors.size()) {
    throw CheckpointError(Kind::kTensorCountMismatch, path + ": expected " + std::to_string(params.size()) +
                                                          " tensors, found " + std::to_string(file.tensors.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& [name, target] = params[i];
    const auto& [stored_name, stored] = file.tensors[i];
    if (name != stored_name || target.shape() != stored.shape()) {
      throw CheckpointError(Kind::kTensorMismatch, path + ": tensor " + std::to_string(i) + " is '" + stored_name +
                                                       "' " + shape_string(stored.shape()) + ", expected '" + name +
                                                       "' " + shape_string(target.shape()));
    }
    std::copy(stored.values().begin(), stored.values().end(), target.values().begin());
  }
  return loaded;
}

}  // namespace cfhrm
