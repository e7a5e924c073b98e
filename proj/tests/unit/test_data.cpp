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

#include <dmoe/data.hpp>
#include <dmoe/errors.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <gtest/gtest.h>

namespace
{
	using namespace dmoe;
	namespace fs = std::filesystem;

	fs::path temp_dir(const std::string &name)
	{
		const auto dir = fs::temp_directory_path() / ("dmoe_data_" + name);
		fs::remove_all(dir);
		return dir;
	}

	std::string slurp(const fs::path &p)
	{
		std::ifstream in(p, std::ios::binary);
		return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
	}

	bool same_tree(const fs::path &a, const fs::path &b)
	{
		std::set<fs::path> files;
		for (const auto &e : fs::recursive_directory_iterator(a))
			if (e.is_regular_file())
				files.insert(fs::relative(e.path(), a));
		std::size_t other = 0;
		for (const auto &e : fs::recursive_directory_iterator(b))
			other += e.is_regular_file();
		if (other != files.size())
			return false;
		for (const auto &f : files)
			if (slurp(a / f) != slurp(b / f))
				return false;
		return true;
	}

	bool same_dataset(const Dataset &a, const Dataset &b)
	{
		if (a.attributes != b.attributes || a.size() != b.size())
			return false;
		for (std::size_t i = 0; i < a.size(); i++)
		{
			const Sample &x = a.samples[i], &y = b.samples[i];
			if (x.id != y.id || x.attr != y.attr || !(x.mask == y.mask) || x.image.shape() != y.image.shape())
				return false;
			if (!std::equal(x.image.data().begin(), x.image.data().end(), y.image.data().begin()))
				return false;
		}
		return true;
	}
}

TEST(LargestRemainder, PaperProportions)
{
	const std::vector<double> f { 0.09, 0.15, 0.76 };
	EXPECT_EQ(largest_remainder(f, 100), (std::vector<std::size_t> { 9, 15, 76 }));
	// 67.5 / 112.5 / 570: the tied half goes to the lower index
	EXPECT_EQ(largest_remainder(f, 750), (std::vector<std::size_t> { 68, 112, 570 }));
	const std::vector<double> thirds { 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0 };
	EXPECT_EQ(largest_remainder(thirds, 10), (std::vector<std::size_t> { 4, 3, 3 }));
}

TEST(Generate, DefaultCounts)
{
	DatasetSpec spec;
	const Dataset ds = generate(spec);
	EXPECT_EQ(ds.counts(), (std::vector<std::size_t> { 9, 15, 76 }));
	EXPECT_EQ(ds.attributes, (std::vector<std::string> { "A", "B", "C" }));
	for (const auto &s : ds.samples)
	{
		EXPECT_EQ(s.image.shape(), Shape( { 32, 32, 1 }));
		for (double v : s.image.data())
		{
			EXPECT_GE(v, 0.0);
			EXPECT_LE(v, 1.0);
			EXPECT_EQ(static_cast<double>(static_cast<float>(v)), v);
		}
		for (auto m : s.mask.values)
			EXPECT_LE(m, 1);
	}
}

TEST(Generate, DeterministicPerSeed)
{
	DatasetSpec spec;
	spec.n_samples = 40;
	spec.seed = 5;
	EXPECT_TRUE(same_dataset(generate(spec), generate(spec)));
	DatasetSpec other = spec;
	other.seed = 6;
	EXPECT_FALSE(same_dataset(generate(spec), generate(other)));
}

TEST(Generate, AttributesShiftTargetSize)
{
	DatasetSpec spec;
	spec.n_samples = 300;
	const Dataset ds = generate(spec);
	std::map<std::string, double> area;
	for (const auto &s : ds.samples)
		area[s.attr] += static_cast<double>(s.mask.count());
	const auto counts = ds.counts();
	const double a = area["A"] / static_cast<double>(counts[0]);
	const double c = area["C"] / static_cast<double>(counts[2]);
	// Expected disk areas pi (margin r)^2: about 160 px for A and 30 px for C, before clipping.
	EXPECT_GT(a, 2.0 * c);
}

TEST(Generate, RejectsBadSpecs)
{
	DatasetSpec spec;
	spec.attrs[0].proportion = 0.5;
	EXPECT_THROW(generate(spec), ConfigError);
	spec = DatasetSpec { };
	spec.n_samples = 5;
	EXPECT_THROW(generate(spec), ConfigError); // A gets zero samples
	spec = DatasetSpec { };
	spec.attrs[1].label = "A";
	EXPECT_THROW(generate(spec), ConfigError);
}

TEST(DatasetIo, SaveLoadByteExact)
{
	DatasetSpec spec;
	spec.n_samples = 30;
	spec.seed = 2;
	const Dataset ds = generate(spec);
	const auto d1 = temp_dir("save1"), d2 = temp_dir("save2"), d3 = temp_dir("save3");
	save(ds, d1);
	save(ds, d2);
	EXPECT_TRUE(same_tree(d1, d2));
	const Dataset back = load(d1);
	EXPECT_TRUE(same_dataset(ds, back));
	save(back, d3);
	EXPECT_TRUE(same_tree(d1, d3));
}

TEST(DatasetIo, ImageEncodingLayout)
{
	const Tensor img( { 1, 2, 1 }, { 0.5, 1.0 });
	const auto bytes = encode_image(img);
	ASSERT_EQ(bytes.size(), 6u + 12u + 8u);
	EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 5), "DSEG1");
	EXPECT_EQ(bytes[5], 0);
	EXPECT_EQ(bytes[6], 1);  // height, little-endian
	EXPECT_EQ(bytes[10], 2); // width
	EXPECT_EQ(bytes[14], 1); // channels
	// 0.5f = 0x3F000000
	EXPECT_EQ(bytes[21], 0x3F);
	const Tensor back = decode_image(bytes, "mem");
	EXPECT_EQ(back.data()[1], 1.0);
}

TEST(DatasetIo, CorruptFileNamed)
{
	DatasetSpec spec;
	spec.n_samples = 20;
	const auto dir = temp_dir("corrupt");
	save(generate(spec), dir);
	const fs::path victim = dir / "masks" / "s00003.dmsk";
	{
		std::ofstream out(victim, std::ios::binary);
		out << "DMSK9";
	}
	try
	{
		load(dir);
		FAIL() << "expected FormatError";
	}
	catch (const FormatError &e)
	{
		EXPECT_NE(std::string(e.what()).find("s00003.dmsk"), std::string::npos) << e.what();
	}
	EXPECT_THROW(load(temp_dir("missing")), FormatError);
}

TEST(Split, StratifiedAndOrdered)
{
	DatasetSpec spec;
	spec.n_samples = 750;
	const Dataset ds = generate(spec);
	const auto [train, test] = split(ds, 0.8, 3);
	EXPECT_EQ(train.size(), 600u);
	EXPECT_EQ(test.size(), 150u);
	const auto tc = train.counts(), ec = test.counts();
	const auto all = ds.counts();
	for (std::size_t g = 0; g < 3; g++)
	{
		EXPECT_EQ(tc[g] + ec[g], all[g]);
		EXPECT_NEAR(static_cast<double>(tc[g]), 0.8 * static_cast<double>(all[g]), 1.0);
	}
	std::set<std::string> ids;
	for (const auto &s : train.samples)
		ids.insert(s.id);
	for (const auto &s : test.samples)
		EXPECT_EQ(ids.count(s.id), 0u);
	EXPECT_TRUE(std::is_sorted(train.samples.begin(), train.samples.end(), [](const Sample &a, const Sample &b) { return a.id < b.id; }));
}

TEST(Batches, CoverEveryIndexOnce)
{
	const auto a = batch_indices(10, 3, 1, 0);
	ASSERT_EQ(a.size(), 4u);
	EXPECT_EQ(a.back().size(), 1u);
	std::vector<std::size_t> flat;
	for (const auto &b : a)
		flat.insert(flat.end(), b.begin(), b.end());
	std::sort(flat.begin(), flat.end());
	for (std::size_t i = 0; i < 10; i++)
		EXPECT_EQ(flat[i], i);
	EXPECT_EQ(a, batch_indices(10, 3, 1, 0));
	EXPECT_NE(a, batch_indices(10, 3, 1, 1));
}
