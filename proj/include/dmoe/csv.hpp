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

#ifndef DMOE_CSV_HPP_
#define DMOE_CSV_HPP_

#include <filesystem>
#include <string>
#include <vector>

namespace dmoe::csv
{
	/// Splits on commas; fields are never quoted in the formats used here.
	std::vector<std::string> split(const std::string &line);
	/// Reads LF-terminated lines; a trailing CR is stripped.
	std::vector<std::string> read_lines(const std::filesystem::path &path);
	double parse_double(const std::string &field, const std::string &where);
	std::size_t parse_size(const std::string &field, const std::string &where);
	void write_text(const std::filesystem::path &path, const std::string &content);
}

#endif /* DMOE_CSV_HPP_ */
