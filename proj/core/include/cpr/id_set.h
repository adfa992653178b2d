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

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

namespace cpr {

using UserId = std::uint32_t;
using ItemId = std::uint32_t;
using AttributeId = std::uint32_t;

// Sorted, duplicate-free index collections. Every set-valued result in the
// library uses this representation so iteration order is deterministic.
using ItemSet = std::vector<ItemId>;
using AttributeSet = std::vector<AttributeId>;

namespace ids {

inline bool Contains(std::span<const std::uint32_t> set, std::uint32_t id) {
  return std::binary_search(set.begin(), set.end(), id);
}

inline std::vector<std::uint32_t> Intersect(std::span<const std::uint32_t> a,
                                            std::span<const std::uint32_t> b) {
  std::vector<std::uint32_t> out;
  out.reserve(std::min(a.size(), b.size()));
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(out));
  return out;
}

inline std::vector<std::uint32_t> Subtract(std::span<const std::uint32_t> a,
                                           std::span<const std::uint32_t> b) {
  std::vector<std::uint32_t> out;
  out.reserve(a.size());
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(),
                      std::back_inserter(out));
  return out;
}

inline std::vector<std::uint32_t> Union(std::span<const std::uint32_t> a,
                                        std::span<const std::uint32_t> b) {
  std::vector<std::uint32_t> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(),
                 std::back_inserter(out));
  return out;
}

// Returns false if the id was already present.
inline bool Insert(std::vector<std::uint32_t>& set, std::uint32_t id) {
  auto it = std::lower_bound(set.begin(), set.end(), id);
  if (it != set.end() && *it == id) return false;
  set.insert(it, id);
  return true;
}

inline bool Erase(std::vector<std::uint32_t>& set, std::uint32_t id) {
  auto it = std::lower_bound(set.begin(), set.end(), id);
  if (it == set.end() || *it != id) return false;
  set.erase(it);
  return true;
}

inline std::vector<std::uint32_t> Normalize(std::vector<std::uint32_t> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

}  // namespace ids
}  // namespace cpr
