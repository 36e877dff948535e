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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "agn/tensor.hpp"

namespace agn {

/// Gray level of a value in [0,1]: floor(v * 255 + 0.5), clamped.
std::uint8_t to_gray(Real v);

/// Binary P5 graymap, maxval 255, of an [h,w] or [1,1,h,w] map in [0,1].
std::vector<char> encode_pgm(const Tensor& image);
void write_pgm(const Tensor& image, const std::string& path);

struct GrayImage {
  std::size_t height = 0, width = 0;
  std::vector<std::uint8_t> pixels;
};
GrayImage read_pgm(const std::string& path);

}  // namespace agn
