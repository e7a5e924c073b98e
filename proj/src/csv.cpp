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

#include <dmoe/csv.hpp>
#include <dmoe/errors.hpp>

#include <charconv>
#include <fstream>
#include <sstream>

namespace dmoe::csv
{
	std::vector<std::string> split(const std::string &line)
	{
		std::vector<std::string> fields;
		std::string current;
		for (char c : line)
		{
			if (c == ',')
			{
				fields.push_back(std::move(current));
				current.clear();
			}
			else
				current.push_back(c);
		}
		fields.push_back(std::move(current));
		return fields;
	}

	std::vector<std::string> read_lines(const std::filesystem::path &path)
	{
		std::ifstream in(path, std::ios::binary);
		if (!in)
			throw FormatError("cannot open " + path.string());
		std::vector<std::string> lines;
		std::string line;
		while (std::getline(in, line))
		{
			if (!line.empty() && line.back() == '\r')
				line.pop_back();
			lines.push_back(std::move(line));
		}
		return lines;
	}

	double parse_double(const std::string &field, const std::string &where)
	{
		double value = 0.0;
		const char *end = field.data() + field.size();
		const auto [ptr, ec] = std::from_chars(field.data(), end, value);
		if (ec != std::errc() || ptr != end || field.empty())
			throw FormatError(where + ": '" + field + "' is not a number");
		return value;
	}

	std::size_t parse_size(const std::string &field, const std::string &where)
	{
		std::size_t value = 0;
		const char *end = field.data() + field.size();
		const auto [ptr, ec] = std::from_chars(field.data(), end, value);
		if (ec != std::errc() || ptr != end || field.empty())
			throw FormatError(where + ": '" + field + "' is not a non-negative integer");
		return value;
	}

	void write_text(const std::filesystem::path &path, const std::string &content)
	{
		if (path.has_parent_path())
			std::filesystem::create_directories(path.parent_path());
		std::ofstream out(path, std::ios::binary);
		if (!out)
			throw FormatError("cannot write " + path.string());
		out << content;
		if (!out)
			throw FormatError("write failed for " + path.string());
	}
}
