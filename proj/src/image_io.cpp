// Copyright 2026 The AGN Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "agn/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "agn/error.hpp"
#include "agn/graph.hpp"
#include "binary_io.hpp"

namespace agn {

std::uint8_t to_gray(Real v) {
  if (!(v > 0)) return 0;
  return static_cast<std::uint8_t>(std::min<Real>(255, std::floor(v * 255 + 0.5)));
}

std::vector<char> encode_pgm(const Tensor& image) {
  const auto [h, w] = map_dims(image);
  const std::string header = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<char> out(header.begin(), header.end());
  out.reserve(header.size() + h * w);
  for (Real v : image.values()) out.push_back(static_cast<char>(to_gray(v)));
  return out;
}

void write_pgm(const Tensor& image, const std::string& path) { detail::write_file(path, encode_pgm(image)); }

GrayImage read_pgm(const std::string& path) {
  const std::vector<char> bytes = detail::read_file(path);
  const std::string what = "read_pgm '" + path + "'";
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) t += bytes[pos++];
    if (t.empty()) fail(ErrorCode::format, what + ": truncated header");
    return t;
  };
  if (token() != "P5") fail(ErrorCode::format, what + ": not a binary graymap (P5)");
  GrayImage img;
  try {
    img.width = std::stoul(token());
    img.height = std::stoul(token());
    if (token() != "255") fail(ErrorCode::format, what + ": maxval must be 255");
  } catch (const std::logic_error&) {
    fail(ErrorCode::format, what + ": malformed header");
  }
  ++pos;  // single whitespace byte after maxval
  if (bytes.size() < pos || bytes.size() - pos != img.width * img.height)
    fail(ErrorCode::format, what + ": pixel payload size mismatch");
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return img;
}

}  // namespace agn
