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
#include <dmoe/errors.hpp>

#include <fstream>
#include <iterator>
#include <gtest/gtest.h>

namespace
{
	using namespace dmoe;
	namespace fs = std::filesystem;

	BackboneConfig small_model(ModelMode mode)
	{
		BackboneConfig c;
		c.image_h = 8;
		c.image_w = 8;
		c.patch_size = 4;
		c.d_model = 6;
		c.mlp_hidden = 6;
		c.n_blocks = 2;
		c.placement = { 1 };
		c.mode = mode;
		c.dmoe.n_experts = 3;
		c.dmoe.top_k = 2;
		c.dmoe.d_hidden = 5;
		return c;
	}

	Dataset small_data(std::vector<AttributeProfile> attrs, std::uint64_t seed)
	{
		DatasetSpec spec;
		spec.n_samples = 24;
		spec.image_h = 8;
		spec.image_w = 8;
		spec.seed = seed;
		spec.attrs = std::move(attrs);
		for (auto &a : spec.attrs)
			a.radius_mean = 2.0;
		return generate(spec);
	}

	std::vector<std::uint8_t> bytes_of(const fs::path &p)
	{
		std::ifstream in(p, std::ios::binary);
		return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
	}

	TrainConfig quick()
	{
		TrainConfig t;
		t.epochs = 3;
		t.batch_size = 6;
		t.seed = 9;
		t.lr0 = 1e-2;
		return t;
	}
}

TEST(Checkpoint, SaveLoadSaveIsByteExact)
{
	Backbone model(small_model(ModelMode::dmoe), { "A", "B" }, 3);
	const auto dir = fs::temp_directory_path() / "dmoe_ckpt";
	fs::remove_all(dir);
	const Rng rng(77);
	save_checkpoint(dir / "a.ckpt", model, quick(), 2, rng);
	const CheckpointFile file = read_checkpoint(dir / "a.ckpt");
	EXPECT_EQ(file.epoch, 2u);
	EXPECT_EQ(file.attributes, (std::vector<std::string> { "A", "B" }));
	Rng restored_rng;
	restored_rng.set_state(file.rng_state);
	EXPECT_EQ(restored_rng, rng);
	const Backbone back = restore_model(file);
	save_checkpoint(dir / "b.ckpt", back, file.train, file.epoch, restored_rng);
	EXPECT_EQ(bytes_of(dir / "a.ckpt"), bytes_of(dir / "b.ckpt"));
}

TEST(Checkpoint, RestoredOutputsAreBitwiseEqual)
{
	Backbone model(small_model(ModelMode::dmoe), { "A", "B" }, 5);
	Rng perturb(1);
	for (auto &p : model.parameters())
		for (double &v : p.tensor.mutable_data())
			v += perturb.uniform(-0.3, 0.3);
	const Backbone back = restore_model(parse_checkpoint(serialize_checkpoint(model, quick(), 0, Rng(0))));
	Tensor images = Tensor::zeros( { 3, 8, 8, 1 });
	for (double &v : images.mutable_data())
		v = perturb.uniform();
	const std::vector<std::size_t> route { 0, 1, 1 };
	Rng r1(4), r2(4);
	const Tensor a = model.forward_batch(images, route, true, r1);
	const Tensor b = back.forward_batch(images, route, true, r2);
	EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST(Checkpoint, LayoutIsHeaderNulPayload)
{
	Backbone model(small_model(ModelMode::plain), { "A" }, 0);
	const auto bytes = serialize_checkpoint(model, quick(), 0, Rng(0));
	ASSERT_FALSE(bytes.empty());
	EXPECT_EQ(bytes.front(), '{');
	const auto nul = std::find(bytes.begin(), bytes.end(), 0);
	ASSERT_NE(nul, bytes.end());
	EXPECT_EQ(static_cast<std::size_t>(bytes.end() - nul - 1), model.parameter_count() * 8);
	const CheckpointFile f = parse_checkpoint(bytes);
	EXPECT_EQ(f.index.front().name, "embed.weight");
	EXPECT_EQ(f.index.front().offset, 0u);
	EXPECT_EQ(f.payload[0], model.parameters()[0].tensor.data()[0]);
}

TEST(Checkpoint, CorruptionIsFormatError)
{
	Backbone model(small_model(ModelMode::plain), { "A" }, 0);
	auto bytes = serialize_checkpoint(model, quick(), 0, Rng(0));
	auto truncated = bytes;
	truncated.pop_back();
	EXPECT_THROW(parse_checkpoint(truncated), FormatError);
	const std::vector<std::uint8_t> no_nul { '{', '}' };
	EXPECT_THROW(parse_checkpoint(no_nul), FormatError);
	bytes[2] = '!';
	EXPECT_THROW(parse_checkpoint(bytes), FormatError);
	EXPECT_THROW(read_checkpoint(fs::temp_directory_path() / "dmoe_no_such.ckpt"), FormatError);
}

TEST(Checkpoint, IdenticalRunsHashEqual)
{
	const Dataset data = small_data(DatasetSpec::default_profiles(), 1);
	const auto run = [&]()
	{
		Backbone model(small_model(ModelMode::dmoe), data.attributes, 11);
		const TrainResult r = train(model, data, Dataset { }, quick());
		return parameter_hash(parse_checkpoint(serialize_checkpoint(model, quick(), r.best_epoch, r.rng)));
	};
	const std::uint64_t a = run();
	EXPECT_EQ(a, run());

	Backbone other(small_model(ModelMode::dmoe), data.attributes, 12);
	EXPECT_NE(a, parameter_hash(parse_checkpoint(serialize_checkpoint(other, quick(), 0, Rng(0)))));
}

TEST(Checkpoint, SingleAttributeDmoeMatchesMoe)
{
	std::vector<AttributeProfile> one { DatasetSpec::default_profiles()[2] };
	one[0].proportion = 1.0;
	const Dataset data = small_data(one, 2);
	Backbone moe(small_model(ModelMode::moe), data.attributes, 5);
	Backbone dmoe(small_model(ModelMode::dmoe), data.attributes, 5);
	const TrainResult rm = train(moe, data, Dataset { }, quick());
	const TrainResult rd = train(dmoe, data, Dataset { }, quick());
	const CheckpointFile fm = parse_checkpoint(serialize_checkpoint(moe, quick(), rm.best_epoch, rm.rng));
	const CheckpointFile fd = parse_checkpoint(serialize_checkpoint(dmoe, quick(), rd.best_epoch, rd.rng));
	EXPECT_EQ(parameter_hash(fm), parameter_hash(fd));
	EXPECT_EQ(fm.payload, fd.payload);
	EXPECT_EQ(fm.rng_state, fd.rng_state);
}
