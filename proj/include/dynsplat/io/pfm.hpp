// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dynsplat/core/error.hpp"
#include "dynsplat/image/rasters.hpp"

namespace dynsplat {

namespace detail {

inline std::string read_pnm_token(std::istream& in) {
  std::string tok;
  char c;
  // skip whitespace and '#' comments
  while (in.get(c)) {
    if (c == '#') {
      while (in.get(c) && c != '\n') {
      }
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      tok.push_back(c);
      break;
    }
  }
  while (in.get(c) && !std::isspace(static_cast<unsigned char>(c))) {
    tok.push_back(c);
  }
  return tok;
}

inline std::ifstream open_binary(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw MissingFile("file not found: " + path);
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFile("cannot open: " + path);
  return in;
}

}  // namespace detail

/// Single-channel PFM ("Pf"), little-endian, bottom-up row order.
inline void write_pfm(const std::string& path, const ScalarMap& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingFile("cannot write: " + path);
  out << "Pf\n" << m.width << " " << m.height << "\n-1.0\n";
  std::vector<float> row(m.width);
  for (int y = m.height - 1; y >= 0; --y) {
    for (int x = 0; x < m.width; ++x) row[x] = static_cast<float>(m.at(x, y));
    out.write(reinterpret_cast<const char*>(row.data()),
              sizeof(float) * row.size());
  }
}

inline ScalarMap read_pfm(const std::string& path) {
  std::ifstream in = detail::open_binary(path);
  const std::string magic = detail::read_pnm_token(in);
  if (magic == "PF") {
    throw UnsupportedFormat("color PFM not supported: " + path);
  }
  if (magic != "Pf") {
    throw CorruptHeader("not a PFM file: " + path);
  }
  int w = 0, h = 0;
  double scale = 0.0;
  try {
    w = std::stoi(detail::read_pnm_token(in));
    h = std::stoi(detail::read_pnm_token(in));
    scale = std::stod(detail::read_pnm_token(in));
  } catch (const std::exception&) {
    throw CorruptHeader("bad PFM header: " + path);
  }
  if (w <= 0 || h <= 0 || scale == 0.0) {
    throw CorruptHeader("bad PFM dimensions/scale: " + path);
  }
  if (scale > 0.0) {
    throw UnsupportedFormat("big-endian PFM not supported: " + path);
  }
  ScalarMap m(w, h);
  std::vector<float> row(w);
  for (int y = h - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()), sizeof(float) * row.size());
    if (!in) throw CorruptHeader("PFM payload truncated: " + path);
    for (int x = 0; x < w; ++x) m.at(x, y) = row[x];
  }
  return m;
}

}  // namespace dynsplat
