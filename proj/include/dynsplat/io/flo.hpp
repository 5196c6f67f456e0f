// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>

#include "dynsplat/core/error.hpp"
#include "dynsplat/image/rasters.hpp"
#include "dynsplat/io/pfm.hpp"

namespace dynsplat {

// Middlebury .flo: float magic 202021.25, int32 width, int32 height,
// then interleaved float (du, dv) in row-major top-down order.
constexpr float kFloMagic = 202021.25f;

inline void write_flo(const std::string& path, const FlowMap& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingFile("cannot write: " + path);
  const float magic = kFloMagic;
  const std::int32_t w = f.width, h = f.height;
  out.write(reinterpret_cast<const char*>(&magic), 4);
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  std::vector<float> buf(f.data.size());
  for (std::size_t i = 0; i < f.data.size(); ++i) {
    buf[i] = static_cast<float>(f.data[i]);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), 4 * buf.size());
}

inline FlowMap read_flo(const std::string& path) {
  std::ifstream in = detail::open_binary(path);
  float magic = 0.0f;
  std::int32_t w = 0, h = 0;
  in.read(reinterpret_cast<char*>(&magic), 4);
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  if (!in || magic != kFloMagic) {
    throw CorruptHeader("not a .flo file: " + path);
  }
  if (w <= 0 || h <= 0) {
    throw CorruptHeader("bad .flo dimensions: " + path);
  }
  const auto expected = static_cast<std::uintmax_t>(w) * h * 8 + 12;
  if (std::filesystem::file_size(path) != expected) {
    throw CorruptHeader(".flo payload size does not match header dims: " + path);
  }
  FlowMap f(w, h);
  std::vector<float> buf(f.data.size());
  in.read(reinterpret_cast<char*>(buf.data()), 4 * buf.size());
  if (!in) throw CorruptHeader(".flo payload truncated: " + path);
  for (std::size_t i = 0; i < buf.size(); ++i) f.data[i] = buf[i];
  return f;
}

}  // namespace dynsplat
