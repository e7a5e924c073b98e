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

#ifndef DMOE_MASK_HPP_
#define DMOE_MASK_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

namespace dmoe
{
	/// Row-major binary raster; values are 0 or 1.
	struct BinaryMask
	{
			std::size_t height = 0;
			std::size_t width = 0;
			std::vector<std::uint8_t> values;

			BinaryMask() = default;
			BinaryMask(std::size_t h, std::size_t w) :
					height(h),
					width(w),
					values(h * w, 0)
			{
			}
			std::uint8_t& at(std::size_t y, std::size_t x)
			{
				return values[y * width + x];
			}
			std::uint8_t at(std::size_t y, std::size_t x) const
			{
				return values[y * width + x];
			}
			std::size_t count() const noexcept
			{
				std::size_t n = 0;
				for (auto v : values)
					n += v;
				return n;
			}
			friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
	};
}

#endif /* DMOE_MASK_HPP_ */
