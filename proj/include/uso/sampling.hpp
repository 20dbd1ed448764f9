/*
 * Copyright 2026 The uso Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef USO_SAMPLING_HPP
#define USO_SAMPLING_HPP

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace uso {

/// n stratified samples in [0,1]^d, one per stratum per dimension.
std::vector<std::vector<double>> latin_hypercube(std::size_t n, std::size_t d,
                                                 std::uint64_t seed);

/// Halton points (first d primes) with a seeded Cranley-Patterson shift.
std::vector<std::vector<double>> shifted_halton(std::size_t n, std::size_t d,
                                                std::uint64_t seed);

/// splitmix64 finalizer, used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view text) noexcept;

}  // namespace uso

#endif  // USO_SAMPLING_HPP
