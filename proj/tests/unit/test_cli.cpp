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
#include <dmoe/metrics.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sys/wait.h>
#include <gtest/gtest.h>

namespace
{
	namespace fs = std::filesystem;

	fs::path work_dir()
	{
		static const fs::path dir = []()
		{
			const fs::path d = fs::temp_directory_path() / "dmoe_cli_test";
			fs::remove_all(d);
			fs::create_directories(d);
			return d;
		}();
		return dir;
	}

	int run(const std::string &args)
	{
		const std::string cmd = "cd '" + work_dir().string() + "' && '" DMOE_CLI_PATH "' " + args + " > /dev/null 2>&1";
		const int status = std::system(cmd.c_str());
		return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
	}

	void write(const std::string &name, const std::string &text)
	{
		std::ofstream(work_dir() / name) << text;
	}

	std::string slurp(const fs::path &p)
	{
		std::ifstream in(p, std::ios::binary);
		return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
	}

	const std::string small_spec = "data.n_samples = 40\ndata.image_h = 16\ndata.image_w = 16\n"
			"model.patch_size = 4\nmodel.d_model = 8\nmodel.mlp_hidden = 8\nmodel.n_blocks = 2\n"
			"dmoe.n_experts = 4\ndmoe.d_hidden = 8\ntrain.epochs = 2\ntrain.batch_size = 8\n";
}

TEST(Cli, GenDataIsDeterministicAndCreatesDirs)
{
	write("small.cfg", small_spec);
	ASSERT_EQ(run("gen-data --spec small.cfg --out nested/a"), 0);
	ASSERT_EQ(run("gen-data --spec small.cfg --out nested/b"), 0);
	EXPECT_EQ(slurp(work_dir() / "nested/a/manifest.csv"), slurp(work_dir() / "nested/b/manifest.csv"));
	EXPECT_EQ(slurp(work_dir() / "nested/a/images/s00007.dseg"), slurp(work_dir() / "nested/b/images/s00007.dseg"));
	write("bad.cfg", "data.n_samples = -3\n");
	EXPECT_EQ(run("gen-data --spec bad.cfg --out nested/c"), 2);
	write("unknown.cfg", "data.samples = 3\n");
	EXPECT_EQ(run("gen-data --spec unknown.cfg --out nested/c"), 2);
	EXPECT_EQ(run("gen-data"), 2);
}

TEST(Cli, TrainEvalRoundTrip)
{
	write("small.cfg", small_spec);
	ASSERT_EQ(run("gen-data --spec small.cfg --out data"), 0);
	ASSERT_EQ(run("train --data data --mode dmoe --out ck/dmoe.ckpt --config small.cfg"), 0);
	ASSERT_EQ(run("train --data data --mode dmoe --out ck/dmoe2.ckpt --config small.cfg"), 0);
	EXPECT_EQ(slurp(work_dir() / "ck/dmoe.ckpt"), slurp(work_dir() / "ck/dmoe2.ckpt"));
	EXPECT_TRUE(fs::exists(work_dir() / "ck/dmoe.log.csv"));

	ASSERT_EQ(run("eval --data data --ckpt ck/dmoe.ckpt --report out/report.csv"), 0);
	const auto p = dmoe::read_report_csv(work_dir() / "out/report.csv");
	EXPECT_NEAR(p.es_dice, dmoe::essp(p.dice, p.group_dice).es, 1e-9);
	EXPECT_TRUE(fs::exists(work_dir() / "out/report.scores.csv"));
	EXPECT_TRUE(fs::exists(work_dir() / "out/report.violin.csv"));
	EXPECT_TRUE(fs::exists(work_dir() / "out/report.violin.svg"));
}

TEST(Cli, AttributeMismatchExitsFour)
{
	write("small.cfg", small_spec);
	write("other.cfg", small_spec + "data.attrs = A,Z\ndata.attr.A.proportion = 0.5\ndata.attr.Z.proportion = 0.5\n");
	ASSERT_EQ(run("gen-data --spec small.cfg --out mm_train"), 0);
	ASSERT_EQ(run("gen-data --spec other.cfg --out mm_eval"), 0);
	ASSERT_EQ(run("train --data mm_train --mode dmoe --out mm.ckpt --config small.cfg"), 0);
	EXPECT_EQ(run("eval --data mm_eval --ckpt mm.ckpt --report mm.csv"), 4);
	ASSERT_EQ(run("train --data mm_train --mode plain --out mm_plain.ckpt --config small.cfg"), 0);
	EXPECT_EQ(run("eval --data mm_eval --ckpt mm_plain.ckpt --report mm_plain.csv"), 0);
}

TEST(Cli, NanAbortExitsThree)
{
	write("small.cfg", small_spec);
	write("explode.cfg", small_spec + "train.lr0 = 1e300\ntrain.epochs = 5\n");
	ASSERT_EQ(run("gen-data --spec small.cfg --out nan_data"), 0);
	EXPECT_EQ(run("train --data nan_data --mode plain --out nan.ckpt --config explode.cfg"), 3);
}

TEST(Cli, MetricsSubcommand)
{
	write("scores.csv", "sample_id,attr,dice,iou\na,A,0.769,0.6\nb,B,0.776,0.6\nc,C,0.825,0.7\n");
	ASSERT_EQ(run("metrics --scores scores.csv --report m.csv"), 0);
	const auto p = dmoe::read_report_csv(work_dir() / "m.csv");
	EXPECT_EQ(p.groups.size(), 3u);

	write("one.csv", "sample_id,attr,dice,iou\na,A,0.5,0.4\nb,A,0.7,0.6\n");
	ASSERT_EQ(run("metrics --scores one.csv --report one_report.csv"), 0);
	const auto q = dmoe::read_report_csv(work_dir() / "one_report.csv");
	EXPECT_DOUBLE_EQ(q.es_dice, q.dice);

	write("broken.csv", "sample_id,attr,dice,iou\na,A,0.5\n");
	EXPECT_EQ(run("metrics --scores broken.csv --report broken_report.csv"), 2);
}

TEST(Cli, GradcheckAndControlDemo)
{
	EXPECT_EQ(run("gradcheck"), 0);
	ASSERT_EQ(run("control-demo --out costs.csv"), 0);
	ASSERT_EQ(run("control-demo --out costs2.csv"), 0);
	EXPECT_EQ(slurp(work_dir() / "costs.csv"), slurp(work_dir() / "costs2.csv"));
	EXPECT_EQ(dmoe::csv::read_lines(work_dir() / "costs.csv").size(), 4u);
}
