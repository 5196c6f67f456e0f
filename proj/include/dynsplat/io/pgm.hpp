// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <fstream>

#include "dynsplat/core/error.hpp"
#include "dynsplat/image/rasters.hpp"
#include "dynsplat/io/pfm.hpp"

namespace dynsplat {

/// Binary PGM (P5) with maxval 65535, big-endian 16-bit samples.
inline void write_pgm16(const std::string& path, const LabelMap& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingFile("cannot write: " + path);
  out << "P5\n" << m.width << " " << m.height << "\n65535\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(m.width) * 2);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      const int v = m.at(x, y);
      const auto u = static_cast<std::uint16_t>(v < 0 ? 0 : (v > 65535 ? 65535 : v));
      row[2 * x] = static_cast<unsigned char>(u >> 8);
      row[2 * x + 1] = static_cast<unsigned char>(u & 0xff);
    }
    out.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
}

inline LabelMap read_pgm16(const std::string& path) {
  std::ifstream in = detail::open_binary(path);
  const std::string magic = detail::read_pnm_token(in);
  if (magic != "P5") throw CorruptHeader("not a binary PGM (P5): " + path);
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(detail::read_pnm_token(in));
    h = std::stoi(detail::read_pnm_token(in));
    maxval = std::stoi(detail::read_pnm_token(in));
  } catch (const std::exception&) {
    throw CorruptHeader("bad PGM header: " + path);
  }
  if (w <= 0 || h <= 0) throw CorruptHeader("bad PGM dimensions: " + path);
  if (maxval != 255 && maxval != 65535) {
    throw UnsupportedFormat("PGM maxval must be 255 or 65535: " + path);
  }
  LabelMap m(w, h);
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * bytes);
  for (int y = 0; y < h; ++y) {
    in.read(reinterpret_cast<char*>(row.data()), row.size());
    if (!in) throw CorruptHeader("PGM payload truncated: " + path);
    for (int x = 0; x < w; ++x) {
      m.at(x, y) = bytes == 2 ? (row[2 * x] << 8) | row[2 * x + 1] : row[x];
    }
  }
  return m;
}

}  // namespace dynsplat
