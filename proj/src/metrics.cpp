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

#include <dmoe/metrics.hpp>
#include <dmoe/csv.hpp>
#include <dmoe/errors.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace dmoe
{
	namespace
	{
		struct Overlap
		{
				std::size_t intersection = 0;
				std::size_t pred = 0;
				std::size_t truth = 0;
		};
		Overlap overlap(const BinaryMask &pred, const BinaryMask &truth)
		{
			if (pred.height != truth.height || pred.width != truth.width || pred.values.size() != truth.values.size())
				throw ShapeError("mask shapes differ: " + std::to_string(pred.height) + "x" + std::to_string(pred.width) + " vs " + std::to_string(truth.height) + "x"
						+ std::to_string(truth.width));
			Overlap o;
			for (std::size_t i = 0; i < pred.values.size(); i++)
			{
				const bool p = pred.values[i] != 0;
				const bool t = truth.values[i] != 0;
				o.pred += p;
				o.truth += t;
				o.intersection += (p && t);
			}
			return o;
		}
	}

	double dice(const BinaryMask &pred, const BinaryMask &truth)
	{
		const Overlap o = overlap(pred, truth);
		if (o.pred + o.truth == 0)
			return 1.0;
		return 2.0 * static_cast<double>(o.intersection) / static_cast<double>(o.pred + o.truth);
	}

	double iou(const BinaryMask &pred, const BinaryMask &truth)
	{
		const Overlap o = overlap(pred, truth);
		const std::size_t uni = o.pred + o.truth - o.intersection;
		if (uni == 0)
			return 1.0;
		return static_cast<double>(o.intersection) / static_cast<double>(uni);
	}

	EsspResult essp(double overall, std::span<const double> group_scores)
	{
		if (group_scores.empty())
			throw ConfigError("essp: at least one group score is required");
		EsspResult r;
		for (double g : group_scores)
			r.delta += std::abs(overall - g);
		r.es = overall / (1.0 + r.delta);
		return r;
	}
	EsspResult essp(double overall, const std::map<std::string, double> &group_scores)
	{
		std::vector<double> values;
		for (const auto &[label, score] : group_scores)
			values.push_back(score);
		return essp(overall, values);
	}

	const GroupScore& SubgroupReport::group(const std::string &attr) const
	{
		for (const auto &[label, g] : per_attr)
			if (label == attr)
				return g;
		throw RoutingError("report has no group '" + attr + "'");
	}

	SubgroupReport aggregate(std::span<const SampleScore> scores, std::span<const std::string> attrs)
	{
		if (scores.empty())
			throw ConfigError("aggregate: no scores");
		std::vector<GroupScore> sums(attrs.size());
		SubgroupReport report;
		for (const auto &s : scores)
		{
			const auto it = std::find(attrs.begin(), attrs.end(), s.attr);
			if (it == attrs.end())
				throw RoutingError("aggregate: sample '" + s.sample_id + "' has unknown attribute '" + s.attr + "'");
			GroupScore &g = sums[static_cast<std::size_t>(it - attrs.begin())];
			g.n++;
			g.dice += s.dice;
			g.iou += s.iou;
			report.overall.n++;
			report.overall.dice += s.dice;
			report.overall.iou += s.iou;
		}
		report.overall.dice /= static_cast<double>(report.overall.n);
		report.overall.iou /= static_cast<double>(report.overall.n);

		std::vector<double> group_dice, group_iou;
		for (std::size_t i = 0; i < attrs.size(); i++)
		{
			GroupScore g = sums[i];
			if (g.n == 0)
				continue;
			g.dice /= static_cast<double>(g.n);
			g.iou /= static_cast<double>(g.n);
			report.per_attr.emplace_back(attrs[i], g);
			group_dice.push_back(g.dice);
			group_iou.push_back(g.iou);
		}
		const EsspResult d = essp(report.overall.dice, group_dice);
		const EsspResult j = essp(report.overall.iou, group_iou);
		report.delta_dice = d.delta;
		report.es_dice = d.es;
		report.delta_iou = j.delta;
		report.es_iou = j.es;
		return report;
	}

	double quantile(std::vector<double> values, double q)
	{
		if (values.empty())
			throw ConfigError("quantile: empty sample");
		std::sort(values.begin(), values.end());
		const double pos = q * static_cast<double>(values.size() - 1);
		const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
		const std::size_t hi = std::min(lo + 1, values.size() - 1);
		const double frac = pos - static_cast<double>(lo);
		return values[lo] + frac * (values[hi] - values[lo]);
	}

	ViolinSummary violin_summary(const std::string &attr, std::span<const double> values)
	{
		if (values.empty())
			throw ConfigError("violin_summary: group '" + attr + "' is empty");
		ViolinSummary v;
		v.attr = attr;
		v.n = values.size();
		const std::vector<double> copy(values.begin(), values.end());
		for (std::size_t i = 0; i < ViolinSummary::levels.size(); i++)
			v.quantiles[i] = quantile(copy, ViolinSummary::levels[i]);
		for (double x : values)
		{
			const double clamped = std::clamp(x, 0.0, 1.0);
			const std::size_t bin = std::min(static_cast<std::size_t>(clamped * ViolinSummary::bins), ViolinSummary::bins - 1);
			v.histogram[bin]++;
		}
		return v;
	}

	ViolinSet violin_summaries(std::span<const SampleScore> scores, std::span<const std::string> attrs, ScoreKind kind)
	{
		ViolinSet result;
		for (const auto &attr : attrs)
		{
			std::vector<double> values;
			for (const auto &s : scores)
				if (s.attr == attr)
					values.push_back(kind == ScoreKind::dice ? s.dice : s.iou);
			if (values.empty())
				result.warnings.push_back("group '" + attr + "' has no samples; omitted from violin summary");
			else
				result.groups.push_back(violin_summary(attr, values));
		}
		return result;
	}

	std::string format_double(double v)
	{
		char buf[64];
		const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
		return std::string(buf, ptr);
	}

	std::vector<SampleScore> read_scores_csv(const std::filesystem::path &path)
	{
		const std::vector<std::string> lines = csv::read_lines(path);
		if (lines.empty() || lines.front() != "sample_id,attr,dice,iou")
			throw FormatError(path.string() + ":1: expected header 'sample_id,attr,dice,iou'");
		std::vector<SampleScore> scores;
		for (std::size_t i = 1; i < lines.size(); i++)
		{
			if (lines[i].empty())
				continue;
			const std::string where = path.string() + ":" + std::to_string(i + 1);
			const auto f = csv::split(lines[i]);
			if (f.size() != 4)
				throw FormatError(where + ": expected 4 fields, got " + std::to_string(f.size()));
			SampleScore s { f[0], f[1], csv::parse_double(f[2], where), csv::parse_double(f[3], where) };
			if (!(s.dice >= 0.0 && s.dice <= 1.0 && s.iou >= 0.0 && s.iou <= 1.0))
				throw FormatError(where + ": scores must lie in [0, 1]");
			scores.push_back(std::move(s));
		}
		return scores;
	}

	void write_scores_csv(const std::filesystem::path &path, std::span<const SampleScore> scores)
	{
		std::string out = "sample_id,attr,dice,iou\n";
		for (const auto &s : scores)
			out += s.sample_id + "," + s.attr + "," + format_double(s.dice) + "," + format_double(s.iou) + "\n";
		csv::write_text(path, out);
	}

	std::string report_csv(const SubgroupReport &report)
	{
		std::string header = "es_dice,dice,es_iou,iou";
		std::string row = format_double(report.es_dice) + "," + format_double(report.overall.dice) + "," + format_double(report.es_iou) + "," + format_double(report.overall.iou);
		for (const auto &[label, g] : report.per_attr)
		{
			header += ",dice_" + label + ",iou_" + label;
			row += "," + format_double(g.dice) + "," + format_double(g.iou);
		}
		return header + "\n" + row + "\n";
	}

	void write_report_csv(const std::filesystem::path &path, const SubgroupReport &report)
	{
		csv::write_text(path, report_csv(report));
	}

	ParsedReport read_report_csv(const std::filesystem::path &path)
	{
		const std::vector<std::string> lines = csv::read_lines(path);
		if (lines.size() < 2)
			throw FormatError(path.string() + ": expected a header and one row");
		const auto header = csv::split(lines[0]);
		const auto row = csv::split(lines[1]);
		if (header.size() != row.size() || header.size() < 4 || header.size() % 2 != 0)
			throw FormatError(path.string() + ": malformed report");
		const std::string where = path.string() + ":2";
		ParsedReport r;
		r.es_dice = csv::parse_double(row[0], where);
		r.dice = csv::parse_double(row[1], where);
		r.es_iou = csv::parse_double(row[2], where);
		r.iou = csv::parse_double(row[3], where);
		for (std::size_t i = 4; i < header.size(); i += 2)
		{
			if (header[i].rfind("dice_", 0) != 0)
				throw FormatError(path.string() + ": unexpected column '" + header[i] + "'");
			r.groups.push_back(header[i].substr(5));
			r.group_dice.push_back(csv::parse_double(row[i], where));
			r.group_iou.push_back(csv::parse_double(row[i + 1], where));
		}
		return r;
	}

	void write_violin_csv(const std::filesystem::path &path, std::span<const ViolinSummary> groups)
	{
		std::string out = "attr,n,q05,q25,q50,q75,q95";
		for (std::size_t b = 0; b < ViolinSummary::bins; b++)
			out += ",bin" + std::to_string(b);
		out += "\n";
		for (const auto &g : groups)
		{
			out += g.attr + "," + std::to_string(g.n);
			for (double q : g.quantiles)
				out += "," + format_double(q);
			for (std::size_t c : g.histogram)
				out += "," + std::to_string(c);
			out += "\n";
		}
		csv::write_text(path, out);
	}

	void write_violin_svg(const std::filesystem::path &path, std::span<const ViolinSummary> groups)
	{
		const double width = 120.0, height = 320.0, margin = 20.0;
		std::ostringstream svg;
		svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width * static_cast<double>(groups.size()) + 2 * margin << "\" height=\"" << height + 2 * margin + 20
				<< "\">\n";
		for (std::size_t gi = 0; gi < groups.size(); gi++)
		{
			const ViolinSummary &g = groups[gi];
			const std::size_t peak = std::max<std::size_t>(1, *std::max_element(g.histogram.begin(), g.histogram.end()));
			const double cx = margin + width * (static_cast<double>(gi) + 0.5);
			const double half = 0.45 * width;
			std::ostringstream right, left;
			for (std::size_t b = 0; b < ViolinSummary::bins; b++)
			{
				const double y = margin + height * (1.0 - (static_cast<double>(b) + 0.5) / ViolinSummary::bins);
				const double dx = half * static_cast<double>(g.histogram[b]) / static_cast<double>(peak);
				right << (b == 0 ? "M" : " L") << cx + dx << "," << y;
				left << " L" << cx - static_cast<double>(g.histogram[ViolinSummary::bins - 1 - b]) * half / static_cast<double>(peak) << ","
						<< margin + height * (1.0 - (static_cast<double>(ViolinSummary::bins - 1 - b) + 0.5) / ViolinSummary::bins);
			}
			svg << "  <path d=\"" << right.str() << left.str() << " Z\" fill=\"#9ecae1\" stroke=\"#3182bd\"/>\n";
			const double median_y = margin + height * (1.0 - g.quantiles[2]);
			svg << "  <line x1=\"" << cx - 10 << "\" y1=\"" << median_y << "\" x2=\"" << cx + 10 << "\" y2=\"" << median_y << "\" stroke=\"black\"/>\n";
			svg << "  <text x=\"" << cx << "\" y=\"" << height + 2 * margin + 10 << "\" text-anchor=\"middle\" font-size=\"12\">" << g.attr << " (n=" << g.n << ")</text>\n";
		}
		svg << "</svg>\n";
		csv::write_text(path, svg.str());
	}
}
