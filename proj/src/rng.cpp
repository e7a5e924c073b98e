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

#include <dmoe/rng.hpp>
#include <dmoe/errors.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace dmoe
{
	std::uint64_t mix64(std::uint64_t x) noexcept
	{
		x += 0x9E3779B97F4A7C15ull;
		x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
		x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
		return x ^ (x >> 31);
	}
	std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept
	{
		return mix64(seed ^ mix64(stream));
	}

	Rng::Rng(std::uint64_t seed) :
			m_engine(seed)
	{
	}

	std::uint64_t Rng::next_u64()
	{
		return m_engine();
	}
	double Rng::uniform()
	{
		return static_cast<double>(m_engine() >> 11) * 0x1.0p-53;
	}
	double Rng::uniform(double lo, double hi)
	{
		return lo + (hi - lo) * uniform();
	}
	double Rng::normal()
	{
		// 1 - u keeps the log argument in (0, 1]
		const double u1 = 1.0 - uniform();
		const double u2 = uniform();
		return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
	}
	std::size_t Rng::index(std::size_t n)
	{
		if (n == 0)
			throw ConfigError("Rng::index: empty range");
		const std::uint64_t bound = static_cast<std::uint64_t>(n);
		const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
		std::uint64_t r;
		do
		{
			r = m_engine();
		} while (r >= limit);
		return static_cast<std::size_t>(r % bound);
	}

	std::string Rng::state() const
	{
		std::ostringstream ss;
		ss << m_engine;
		return ss.str();
	}
	void Rng::set_state(const std::string &s)
	{
		std::istringstream ss(s);
		ss >> m_engine;
		if (ss.fail())
			throw FormatError("Rng::set_state: malformed engine state");
	}
}
