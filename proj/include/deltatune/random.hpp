/*
 * Copyright 2026 The deltatune Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DELTATUNE_RANDOM_HPP_
#define DELTATUNE_RANDOM_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace deltatune {

// Engine used by every stochastic component. Its textual state round-trips
// through operator<< / operator>>, which persistence relies on.
using Rng = std::mt19937_64;

// Deterministic child seed for an independent stream named `tag`.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

std::string rng_state(const Rng& rng);
Rng rng_from_state(const std::string& state);

}  // namespace deltatune

#endif  // DELTATUNE_RANDOM_HPP_
