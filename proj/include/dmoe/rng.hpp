/*
 * Copyright 2026 The dmoe Authors.
 *
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

#ifndef DMOE_RNG_HPP_
#define DMOE_RNG_HPP_

#include <cstdint>
#include <random>
#include <string>

namespace dmoe
{
	/// SplitMix64 finalizer; used to derive independent per-sample / per-epoch seeds.
	std::uint64_t mix64(std::uint64_t x) noexcept;
	std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

	/**
	 * Deterministic random source. All draws are computed from the raw engine
	 * output, so the full state is the engine state and can be checkpointed.
	 */
	class Rng
	{
		public:
			explicit Rng(std::uint64_t seed = 0);

			std::uint64_t next_u64();
			/// Uniform in [0, 1) with 53 bits of resolution.
			double uniform();
			double uniform(double lo, double hi);
			/// Standard normal via Box-Muller (no cached second value).
			double normal();
			/// Uniform integer in [0, n).
			std::size_t index(std::size_t n);

			std::string state() const;
			void set_state(const std::string &s);

			friend bool operator==(const Rng &a, const Rng &b)
			{
				return a.m_engine == b.m_engine;
			}
		private:
			std::mt19937_64 m_engine;
	};
}

#endif /* DMOE_RNG_HPP_ */
