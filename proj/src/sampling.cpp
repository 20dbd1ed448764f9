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

#include "uso/sampling.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <random>

namespace uso {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view text) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<std::vector<double>> latin_hypercube(std::size_t n, std::size_t d,
                                                 std::uint64_t seed) {
    std::vector<std::vector<double>> out(n, std::vector<double>(d, 0.0));
    if (n == 0) return out;
    std::mt19937_64 rng(mix_seed(seed, 0x1a7));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::size_t> perm(n);
    for (std::size_t j = 0; j < d; ++j) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t i = 0; i < n; ++i)
            out[i][j] = (static_cast<double>(perm[i]) + unit(rng)) / static_cast<double>(n);
    }
    return out;
}

namespace {

std::vector<unsigned> first_primes(std::size_t count) {
    std::vector<unsigned> primes;
    for (unsigned c = 2; primes.size() < count; ++c) {
        bool prime = true;
        for (unsigned p : primes) {
            if (p * p > c) break;
            if (c % p == 0) { prime = false; break; }
        }
        if (prime) primes.push_back(c);
    }
    return primes;
}

double radical_inverse(std::uint64_t i, unsigned base) {
    double inv = 1.0 / base, f = inv, r = 0.0;
    while (i > 0) {
        r += f * static_cast<double>(i % base);
        i /= base;
        f *= inv;
    }
    return r;
}

}  // namespace

std::vector<std::vector<double>> shifted_halton(std::size_t n, std::size_t d,
                                                std::uint64_t seed) {
    const auto primes = first_primes(d);
    std::mt19937_64 rng(mix_seed(seed, 0x4a17));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> shift(d);
    for (auto& s : shift) s = unit(rng);
    std::vector<std::vector<double>> out(n, std::vector<double>(d));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            double v = radical_inverse(i + 1, primes[j]) + shift[j];
            out[i][j] = v - static_cast<double>(static_cast<long>(v));
        }
    }
    return out;
}

}  // namespace uso
