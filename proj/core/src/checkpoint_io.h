/*
 * Copyright 2026 The CPR Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cpr/error.h"

namespace cpr::internal {

// Shared helpers for the versioned binary checkpoint containers.

inline void WriteDoubles(std::ostream& os, std::span<const double> values) {
  static_assert(std::endian::native == std::endian::little ||
                    std::endian::native == std::endian::big,
                "mixed-endian hosts are not supported");
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size() * sizeof(double)));
  } else {
    for (double d : values) {
      std::uint64_t bits;
      std::memcpy(&bits, &d, sizeof bits);
      bits = __builtin_bswap64(bits);
      os.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
}

inline void ReadDoubles(std::istream& is, std::span<double> values,
                        const std::string& what) {
  is.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!is) throw Error(ErrorCode::kDataLoss, what + ": truncated payload");
  if constexpr (std::endian::native == std::endian::big) {
    for (double& d : values) {
      std::uint64_t bits;
      std::memcpy(&bits, &d, sizeof bits);
      bits = __builtin_bswap64(bits);
      std::memcpy(&d, &bits, sizeof bits);
    }
  }
}

inline void ExpectMagic(std::istream& is, std::string_view magic,
                        const std::string& what) {
  std::string line;
  if (!std::getline(is, line) || line != magic) {
    throw Error(ErrorCode::kDataLoss,
                what + ": missing " + std::string(magic) + " header");
  }
}

}  // namespace cpr::internal
