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

#ifndef DMOE_METRICS_HPP_
#define DMOE_METRICS_HPP_

#include <dmoe/mask.hpp>

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace dmoe
{
	/// 2|P n T| / (|P| + |T|); both empty gives 1, exactly one empty gives 0.
	double dice(const BinaryMask &pred, const BinaryMask &truth);
	/// |P n T| / |P u T|; both empty gives 1.
	double iou(const BinaryMask &pred, const BinaryMask &truth);

	struct SampleScore
	{
			std::string sample_id;
			std::string attr;
			double dice = 0.0;
			double iou = 0.0;
	};

	struct GroupScore
	{
			std::size_t n = 0;
			double dice = 0.0;
			double iou = 0.0;
	};

	struct EsspResult
	{
			double delta = 0.0;
			double es = 0.0;
	};

	/// Equity-scaled score: delta = sum |overall - group|, es = overall / (1 + delta).
	EsspResult essp(double overall, std::span<const double> group_scores);
	EsspResult essp(double overall, const std::map<std::string, double> &group_scores);

	struct SubgroupReport
	{
			GroupScore overall;
			/// In the order of the attribute list passed to aggregate(); groups without samples are left out.
			std::vector<std::pair<std::string, GroupScore>> per_attr;
			double delta_dice = 0.0;
			double delta_iou = 0.0;
			double es_dice = 0.0;
			double es_iou = 0.0;

			const GroupScore& group(const std::string &attr) const;
	};

	/// Per-attribute means, overall mean over all samples, and ESSP for Dice and IoU.
	SubgroupReport aggregate(std::span<const SampleScore> scores, std::span<const std::string> attrs);

	struct ViolinSummary
	{
			static constexpr std::size_t bins = 32;
			static constexpr std::array<double, 5> levels { 0.05, 0.25, 0.50, 0.75, 0.95 };

			std::string attr;
			std::size_t n = 0;
			std::array<double, 5> quantiles { };
			std::array<std::size_t, bins> histogram { };
	};

	/// Linear-interpolation quantile of an unsorted sample, q in [0, 1].
	double quantile(std::vector<double> values, double q);
	ViolinSummary violin_summary(const std::string &attr, std::span<const double> values);

	struct ViolinSet
	{
			std::vector<ViolinSummary> groups;
			std::vector<std::string> warnings;
	};
	enum class ScoreKind
	{
		dice,
		iou
	};
	/// One summary per attribute that has samples; empty groups produce a warning instead.
	ViolinSet violin_summaries(std::span<const SampleScore> scores, std::span<const std::string> attrs, ScoreKind kind);

	// CSV / SVG surfaces

	std::string format_double(double v);

	std::vector<SampleScore> read_scores_csv(const std::filesystem::path &path);
	void write_scores_csv(const std::filesystem::path &path, std::span<const SampleScore> scores);

	std::string report_csv(const SubgroupReport &report);
	void write_report_csv(const std::filesystem::path &path, const SubgroupReport &report);

	struct ParsedReport
	{
			double es_dice = 0.0, dice = 0.0, es_iou = 0.0, iou = 0.0;
			std::vector<std::string> groups;
			std::vector<double> group_dice, group_iou;
	};
	ParsedReport read_report_csv(const std::filesystem::path &path);

	void write_violin_csv(const std::filesystem::path &path, std::span<const ViolinSummary> groups);
	void write_violin_svg(const std::filesystem::path &path, std::span<const ViolinSummary> groups);
}

#endif /* DMOE_METRICS_HPP_ */
