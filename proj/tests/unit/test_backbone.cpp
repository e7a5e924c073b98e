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

#include <dmoe/backbone.hpp>
#include <dmoe/errors.hpp>
#include <dmoe/rng.hpp>

#include <algorithm>
#include <gtest/gtest.h>

namespace
{
	using namespace dmoe;

	BackboneConfig tiny(ModelMode mode)
	{
		BackboneConfig c;
		c.image_h = 4;
		c.image_w = 6;
		c.patch_size = 2;
		c.d_model = 3;
		c.mlp_hidden = 4;
		c.n_blocks = 2;
		c.placement = { 0 };
		c.mode = mode;
		c.dmoe.n_experts = 3;
		c.dmoe.top_k = 2;
		c.dmoe.d_hidden = 4;
		c.dmoe.dropout_p = 0.0;
		return c;
	}

	Tensor random_images(std::size_t B, const BackboneConfig &c, Rng &rng)
	{
		Tensor t = Tensor::zeros( { B, c.image_h, c.image_w, c.in_channels });
		for (double &v : t.mutable_data())
			v = rng.uniform();
		return t;
	}

	const Tensor& param(const ParameterList &params, const std::string &name)
	{
		for (const auto &p : params)
			if (p.name == name)
				return p.tensor;
		throw std::runtime_error("no parameter " + name);
	}

	std::vector<double> affine(const std::vector<double> &x, const Tensor &w, const Tensor &b)
	{
		std::vector<double> out(w.dim(1));
		for (std::size_t j = 0; j < out.size(); j++)
		{
			double s = 0.0;
			for (std::size_t i = 0; i < x.size(); i++)
				s += x[i] * w.at(i, j);
			out[j] = s + b.data()[j];
		}
		return out;
	}
}

TEST(Backbone, PlainForwardMatchesLoopOracle)
{
	const BackboneConfig c = tiny(ModelMode::plain);
	Backbone model(c, { "A" }, 5);
	Rng rng(1);
	const Tensor images = random_images(2, c, rng);
	const std::vector<std::size_t> route { 0, 0 };
	const Tensor logits = model.forward_batch(images, route, false, rng);
	ASSERT_EQ(logits.shape(), Shape( { 2, 4, 6, 2 }));

	const ParameterList p = model.parameters();
	const std::size_t P = 2, K = 2;
	for (std::size_t b = 0; b < 2; b++)
		for (std::size_t pi = 0; pi < 2; pi++)
			for (std::size_t pj = 0; pj < 3; pj++)
			{
				std::vector<double> v;
				for (std::size_t di = 0; di < P; di++)
					for (std::size_t dj = 0; dj < P; dj++)
						v.push_back(images.data()[((b * 4 + pi * P + di) * 6 + pj * P + dj)]);
				std::vector<double> h = affine(v, param(p, "embed.weight"), param(p, "embed.bias"));
				for (std::size_t l = 0; l < 2; l++)
				{
					const std::string pre = "block." + std::to_string(l);
					std::vector<double> a = affine(h, param(p, pre + ".fc1.weight"), param(p, pre + ".fc1.bias"));
					for (double &x : a)
						x = std::max(x, 0.0);
					const std::vector<double> r = affine(a, param(p, pre + ".fc2.weight"), param(p, pre + ".fc2.bias"));
					for (std::size_t i = 0; i < h.size(); i++)
						h[i] += r[i];
				}
				const std::vector<double> out = affine(h, param(p, "decode.weight"), param(p, "decode.bias"));
				for (std::size_t di = 0; di < P; di++)
					for (std::size_t dj = 0; dj < P; dj++)
						for (std::size_t k = 0; k < K; k++)
						{
							const std::size_t y = pi * P + di, x = pj * P + dj;
							EXPECT_NEAR(logits.data()[((b * 4 + y) * 6 + x) * K + k], out[(di * P + dj) * K + k], 1e-12);
						}
			}
}

TEST(Backbone, ModesShareInitialization)
{
	Backbone plain(tiny(ModelMode::plain), { "A", "B" }, 9);
	Backbone dmoe(tiny(ModelMode::dmoe), { "A", "B" }, 9);
	const ParameterList pp = plain.parameters(), pd = dmoe.parameters();
	for (const auto &p : pp)
	{
		const Tensor &other = param(pd, p.name);
		EXPECT_TRUE(std::equal(p.tensor.data().begin(), p.tensor.data().end(), other.data().begin(), other.data().end())) << p.name;
	}
	EXPECT_GT(pd.size(), pp.size());
}

TEST(Backbone, SingleAttributeDmoeMatchesMoe)
{
	Backbone moe(tiny(ModelMode::moe), { "A", "B" }, 3);
	Backbone dmoe(tiny(ModelMode::dmoe), { "A" }, 3);
	const ParameterList pm = moe.parameters(), pd = dmoe.parameters();
	ASSERT_EQ(pm.size(), pd.size());
	for (std::size_t i = 0; i < pm.size(); i++)
	{
		EXPECT_EQ(pm[i].name, pd[i].name);
		EXPECT_TRUE(std::equal(pm[i].tensor.data().begin(), pm[i].tensor.data().end(), pd[i].tensor.data().begin(), pd[i].tensor.data().end()));
	}
	Rng data(4);
	const Tensor images = random_images(3, moe.config(), data);
	Rng r1(8), r2(8);
	const std::vector<std::size_t> route_m { moe.route_index("B"), moe.route_index("A"), moe.route_index("B") };
	const std::vector<std::size_t> route_d(3, dmoe.route_index("A"));
	const Tensor a = moe.forward_batch(images, route_m, true, r1);
	const Tensor b = dmoe.forward_batch(images, route_d, true, r2);
	EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST(Backbone, ZeroExpertsEqualPlain)
{
	Backbone plain(tiny(ModelMode::plain), { "A", "B" }, 12);
	Backbone dmoe(tiny(ModelMode::dmoe), { "A", "B" }, 12);
	for (auto &layer : dmoe.dmoe_layers())
		for (auto &e : layer.experts())
			for (Linear *l : { &e.linear1(), &e.linear2() })
			{
				std::fill(l->weight.mutable_data().begin(), l->weight.mutable_data().end(), 0.0);
				std::fill(l->bias.mutable_data().begin(), l->bias.mutable_data().end(), 0.0);
			}
	Rng data(2), r1(3), r2(3);
	const Tensor images = random_images(4, plain.config(), data);
	const std::vector<std::size_t> route { 0, 1, 1, 0 };
	const Tensor a = plain.forward_batch(images, route, true, r1);
	const Tensor b = dmoe.forward_batch(images, route, true, r2);
	EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST(Backbone, RoutingByMode)
{
	Backbone dmoe(tiny(ModelMode::dmoe), { "A", "B" }, 1);
	EXPECT_EQ(dmoe.route_index("B"), 1u);
	EXPECT_THROW(dmoe.route_index("Z"), RoutingError);
	Backbone plain(tiny(ModelMode::plain), { "A", "B" }, 1);
	EXPECT_EQ(plain.route_index("Z"), 0u);
	Backbone moe(tiny(ModelMode::moe), { "A", "B" }, 1);
	EXPECT_EQ(moe.route_index("B"), 0u);
}

TEST(Backbone, AttributeChangesDmoeOutput)
{
	Backbone model(tiny(ModelMode::dmoe), { "A", "B" }, 6);
	Rng init(7);
	for (auto &layer : model.dmoe_layers())
		for (std::size_t a = 0; a < 2; a++)
			for (double &v : layer.router().at(a).w.mutable_data())
				v = init.uniform(-2.0, 2.0);
	Rng data(1), rng(0);
	const Tensor image = ops::reshape(random_images(1, model.config(), data), { 4, 6, 1 });
	const ModelOutput a = model.forward(image, "A", false, rng);
	const ModelOutput b = model.forward(image, "B", false, rng);
	EXPECT_EQ(a.logits.shape(), Shape( { 4, 6, 2 }));
	EXPECT_FALSE(std::equal(a.logits.data().begin(), a.logits.data().end(), b.logits.data().begin()));
}

TEST(Backbone, SharingControlsParameterCount)
{
	BackboneConfig shared = tiny(ModelMode::dmoe);
	shared.placement = { 0, 1 };
	BackboneConfig separate = shared;
	separate.sharing = DMoESharing::layer_wise;
	Backbone s(shared, { "A" }, 0), w(separate, { "A" }, 0);
	EXPECT_EQ(s.dmoe_layers().size(), 1u);
	EXPECT_EQ(w.dmoe_layers().size(), 2u);
	EXPECT_GT(w.parameter_count(), s.parameter_count());
}

TEST(BackboneConfig, Validation)
{
	BackboneConfig c = tiny(ModelMode::dmoe);
	c.patch_size = 4;
	EXPECT_THROW(c.validate(), ConfigError);
	c = tiny(ModelMode::dmoe);
	c.placement = { 5 };
	EXPECT_THROW(c.validate(), ConfigError);
	EXPECT_THROW(parse_mode("dense"), ConfigError);
	EXPECT_EQ(parse_sharing("layer_wise"), DMoESharing::layer_wise);
	EXPECT_EQ(encoder_blocks(6), (std::vector<std::size_t> { 0, 1, 2 }));
	EXPECT_EQ(decoder_blocks(6), (std::vector<std::size_t> { 3, 4, 5 }));
}

TEST(Backbone, WrongImageShapeThrows)
{
	Backbone model(tiny(ModelMode::plain), { "A" }, 0);
	Rng rng(0);
	const std::vector<std::size_t> route { 0 };
	EXPECT_THROW(model.forward_batch(Tensor::zeros( { 1, 4, 4, 1 }), route, false, rng), ShapeError);
}
