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

#include <dmoe/checkpoint.hpp>
#include <dmoe/control.hpp>
#include <dmoe/data.hpp>
#include <dmoe/errors.hpp>
#include <dmoe/metrics.hpp>
#include <dmoe/run_config.hpp>
#include <dmoe/training.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace dmoe;

namespace
{
	/// Seed precedence: --seed, then the config file, then DMOE_SEED.
	RunConfig load_run_config(const std::string &config_path, std::optional<std::uint64_t> seed_flag)
	{
		RunConfig config;
		if (const char *env = std::getenv("DMOE_SEED"))
			config.set("seed", env);
		if (!config_path.empty())
			apply_config_file(config, config_path);
		if (seed_flag)
			config.set("seed", std::to_string(*seed_flag));
		return config;
	}

	void print_report(const SubgroupReport &r)
	{
		std::printf("%-10s %6s %8s %8s\n", "group", "n", "dice", "iou");
		for (const auto &[label, g] : r.per_attr)
			std::printf("%-10s %6zu %8.4f %8.4f\n", label.c_str(), g.n, g.dice, g.iou);
		std::printf("%-10s %6zu %8.4f %8.4f\n", "overall", r.overall.n, r.overall.dice, r.overall.iou);
		std::printf("ES-Dice %.4f  ES-IoU %.4f\n", r.es_dice, r.es_iou);
	}

	fs::path sibling(const fs::path &path, const std::string &suffix)
	{
		fs::path out = path;
		out.replace_extension();
		out += suffix;
		return out;
	}

	void write_outputs(const fs::path &report_path, const std::vector<SampleScore> &scores, const SubgroupReport &report, const std::vector<std::string> &attrs)
	{
		write_report_csv(report_path, report);
		write_scores_csv(sibling(report_path, ".scores.csv"), scores);
		const ViolinSet violins = violin_summaries(scores, attrs, ScoreKind::dice);
		for (const auto &w : violins.warnings)
			std::fprintf(stderr, "warning: %s\n", w.c_str());
		write_violin_csv(sibling(report_path, ".violin.csv"), violins.groups);
		write_violin_svg(sibling(report_path, ".violin.svg"), violins.groups);
	}

	int gen_data(const std::string &spec_path, const fs::path &out, std::optional<std::uint64_t> seed)
	{
		RunConfig config = load_run_config(spec_path, seed);
		config.finalize();
		const Dataset ds = generate(config.data);
		save(ds, out);
		const auto counts = ds.counts();
		for (std::size_t i = 0; i < ds.attributes.size(); i++)
			std::printf("%s %zu\n", ds.attributes[i].c_str(), counts[i]);
		std::printf("total %zu\n", ds.size());
		return 0;
	}

	int train_cmd(const fs::path &data_dir, const std::string &mode, const fs::path &out, const std::string &config_path, std::optional<std::uint64_t> seed, std::optional<std::size_t> epochs)
	{
		RunConfig config = load_run_config(config_path, seed);
		config.set("model.mode", mode);
		if (epochs)
			config.set("train.epochs", std::to_string(*epochs));
		const Dataset ds = load(data_dir);
		if (ds.size() == 0)
			throw ConfigError("dataset " + data_dir.string() + " is empty");
		config.data.image_h = ds.samples.front().image.dim(0);
		config.data.image_w = ds.samples.front().image.dim(1);
		config.finalize();
		config.model.in_channels = ds.samples.front().image.dim(2);

		auto [train_set, held_out] = split(ds, config.train.train_frac, config.train.seed);
		Backbone model(config.model, ds.attributes, config.train.seed);
		const TrainResult result = train(model, train_set, held_out, config.train);
		save_checkpoint(out, model, config.train, result.best_epoch, result.rng);
		write_train_log_csv(sibling(out, ".log.csv"), result.log, held_out.attributes);
		const auto &last = result.log.empty() ? EpochLog { } : result.log.back();
		std::printf("mode %s epochs %zu best_epoch %zu final_loss %.6f held_out_dice %.4f\n", to_string(config.model.mode).c_str(), result.epochs_run, result.best_epoch, last.loss, last.dice_overall);
		std::printf("checkpoint hash %016llx\n", static_cast<unsigned long long>(parameter_hash(read_checkpoint(out))));
		return 0;
	}

	int eval_cmd(const fs::path &data_dir, const fs::path &ckpt, const fs::path &report_path)
	{
		const Backbone model = restore_model(read_checkpoint(ckpt));
		const Dataset ds = load(data_dir);
		for (const auto &s : ds.samples)
			if (s.image.dim(0) != model.config().image_h || s.image.dim(1) != model.config().image_w)
				throw ConfigError("sample " + s.id + " is " + to_string(s.image.shape()) + " but the model expects " + std::to_string(model.config().image_h) + "x" + std::to_string(model.config().image_w));
		const Evaluation eval = evaluate(model, ds);
		write_outputs(report_path, eval.scores(), eval.report(), ds.attributes);
		print_report(eval.report());
		return 0;
	}

	int metrics_cmd(const fs::path &scores_path, const fs::path &report_path)
	{
		const auto scores = read_scores_csv(scores_path);
		std::vector<std::string> attrs;
		for (const auto &s : scores)
			if (std::find(attrs.begin(), attrs.end(), s.attr) == attrs.end())
				attrs.push_back(s.attr);
		const SubgroupReport report = aggregate(scores, attrs);
		write_outputs(report_path, scores, report, attrs);
		print_report(report);
		return 0;
	}

	int gradcheck_cmd(const std::string &config_path, std::optional<std::uint64_t> seed)
	{
		ModelGradCheck check = ModelGradCheck::tiny();
		if (!config_path.empty() || seed)
		{
			RunConfig config = load_run_config(config_path, seed);
			check.seed = config.train.seed;
			check.model.dmoe.n_experts = config.model.dmoe.n_experts;
			check.model.dmoe.top_k = config.model.dmoe.top_k;
			check.model.dmoe.activation = config.model.dmoe.activation;
		}
		const GradCheckReport report = check_model_gradients(check);
		for (const auto &e : report.per_parameter)
			std::printf("%-28s %.3e\n", e.name.c_str(), e.relative_error);
		std::printf("checked %zu coordinates, max relative error %.3e (tolerance %.0e): %s\n", report.checked, report.max_relative_error, report.tolerance, report.passed() ? "ok" : "FAILED");
		return report.passed() ? 0 : static_cast<int>(ExitCode::numerical);
	}

	int control_demo_cmd(const fs::path &out, std::uint64_t seed)
	{
		const control::CostTable table = control::mode_switch_demo(seed);
		control::write_cost_table_csv(out, table);
		for (const auto &r : table.rows)
			std::printf("%-16s A %.6f  B %.6f  mixed %.6f\n", r.policy.c_str(), r.cost_A, r.cost_B, r.mixed);
		const double tol = 1e-6;
		const bool ordered = table.row("mode_switching").mixed <= table.row("single_feedback").mixed + tol && table.row("single_feedback").mixed <= table.row("open_loop").mixed + tol;
		std::printf("cost ordering %s\n", ordered ? "holds" : "VIOLATED");
		return ordered ? 0 : static_cast<int>(ExitCode::numerical);
	}
}

int main(int argc, char **argv)
{
	CLI::App app { "Distribution-aware mixture of experts for fair segmentation" };
	app.require_subcommand(1);
	std::optional<std::uint64_t> seed;
	app.add_option("--seed", seed, "Global seed (falls back to DMOE_SEED)");

	std::string spec_path, config_path, data_dir, out, mode, ckpt, report, scores;
	std::optional<std::size_t> epochs;

	auto *gen = app.add_subcommand("gen-data", "Generate a synthetic attribute-imbalanced dataset");
	gen->add_option("--spec", spec_path, "Config file with data.* keys")->check(CLI::ExistingFile);
	gen->add_option("--out", out, "Output directory")->required();

	auto *tr = app.add_subcommand("train", "Train a backbone and write a checkpoint");
	tr->add_option("--data", data_dir, "Dataset directory")->required();
	tr->add_option("--mode", mode, "plain, moe or dmoe")->required()->check(CLI::IsMember({ "plain", "moe", "dmoe" }));
	tr->add_option("--out", out, "Checkpoint path")->required();
	tr->add_option("--config", config_path, "Config file")->check(CLI::ExistingFile);
	tr->add_option("--epochs", epochs, "Override train.epochs");

	auto *ev = app.add_subcommand("eval", "Evaluate a checkpoint per subgroup");
	ev->add_option("--data", data_dir, "Dataset directory")->required();
	ev->add_option("--ckpt", ckpt, "Checkpoint path")->required();
	ev->add_option("--report", report, "Report CSV path")->required();

	auto *me = app.add_subcommand("metrics", "Compute a subgroup report from per-sample scores");
	me->add_option("--scores", scores, "Scores CSV (sample_id,attr,dice,iou)")->required();
	me->add_option("--report", report, "Report CSV path")->required();

	auto *gc = app.add_subcommand("gradcheck", "Finite-difference gradient check of a tiny dMoE network");
	gc->add_option("--config", config_path, "Config file")->check(CLI::ExistingFile);

	auto *cd = app.add_subcommand("control-demo", "Mode-switching control cost table");
	cd->add_option("--out", out, "Cost table CSV")->required();

	try
	{
		app.parse(argc, argv);
	}
	catch (const CLI::ParseError &e)
	{
		const int code = app.exit(e);
		return code == 0 ? 0 : static_cast<int>(ExitCode::config);
	}

	try
	{
		if (*gen)
			return gen_data(spec_path, out, seed);
		if (*tr)
			return train_cmd(data_dir, mode, out, config_path, seed, epochs);
		if (*ev)
			return eval_cmd(data_dir, ckpt, report);
		if (*me)
			return metrics_cmd(scores, report);
		if (*gc)
			return gradcheck_cmd(config_path, seed);
		if (*cd)
		{
			std::uint64_t s = seed.value_or(0);
			if (!seed)
				if (const char *env = std::getenv("DMOE_SEED"))
					s = std::strtoull(env, nullptr, 10);
			return control_demo_cmd(out, s);
		}
	}
	catch (const Error &e)
	{
		std::fprintf(stderr, "error: %s\n", e.what());
		return static_cast<int>(e.code());
	}
	catch (const std::exception &e)
	{
		std::fprintf(stderr, "error: %s\n", e.what());
		return static_cast<int>(ExitCode::config);
	}
	return 0;
}
