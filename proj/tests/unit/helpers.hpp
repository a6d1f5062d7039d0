#pragma once

#include <cstdint>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "mlock/crypto.hpp"
#include "mlock/param_store.hpp"
#include "mlock/tinynet.hpp"

namespace testutil {

inline mlock::Bytes read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return mlock::Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline mlock::Key256 key_from_hex(const std::string& hex) {
  const mlock::Bytes b = mlock::from_hex(hex);
  mlock::Key256 k{};
  std::copy(b.begin(), b.end(), k.begin());
  return k;
}

inline mlock::Key256 random_key(std::mt19937_64& rng) {
  mlock::Key256 k{};
  for (auto& b : k) b = static_cast<std::uint8_t>(rng());
  return k;
}

// FP32 tensors with Gaussian values; shapes vary with the seed.
inline mlock::ParamStore gaussian_store(std::uint64_t seed, std::size_t tensors = 3, std::size_t max_dim = 24) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 0.05f);
  std::uniform_int_distribution<std::size_t> dim(1, max_dim);
  mlock::ParamStore s;
  for (std::size_t t = 0; t < tensors; ++t) {
    const std::size_t r = dim(rng);
    const std::size_t c = dim(rng);
    std::vector<float> v(r * c);
    for (auto& x : v) x = normal(rng);
    s.add_fp32("t" + std::to_string(t) + ".weight", {r, c}, v);
  }
  s.meta()["arch"] = "test";
  return s;
}

// Store whose tensors use the given dtype, encoded from Gaussian values.
inline mlock::ParamStore gaussian_store_dtype(std::uint64_t seed, mlock::Dtype d, std::size_t count) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.05);
  mlock::ParamTensor t;
  t.name = "w";
  t.shape = {count};
  t.dtype = d;
  t.data.assign(count * mlock::byte_width(d), 0);
  for (std::size_t i = 0; i < count; ++i) t.set_code(i, mlock::encode_value(normal(rng), d));
  mlock::ParamStore s;
  s.add(std::move(t));
  return s;
}

// Trained reference net shared by several suites.
struct Trained {
  mlock::BlobTask task;
  mlock::TinyNet net;
};

inline const Trained& trained_net() {
  static const Trained t = [] {
    Trained out{mlock::make_blobs({}), mlock::TinyNet(mlock::kDefaultWidths, 1)};
    mlock::TrainConfig cfg;
    cfg.seed = 2;
    mlock::train(out.net, out.task.train, cfg);
    return out;
  }();
  return t;
}

}  // namespace testutil
