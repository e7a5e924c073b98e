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

namespace dmoe
{
	namespace
	{
		// Stream ids for derive_seed; components keep their values across modes.
		constexpr std::uint64_t embed_stream = 1;
		constexpr std::uint64_t decode_stream = 2;
		constexpr std::uint64_t block_stream = 100;
		constexpr std::uint64_t dmoe_stream = 1000;

		/// Source offsets taking [B, H, W, C] images to [B*N, P*P*C] patch rows.
		std::vector<std::size_t> patch_index(std::size_t B, std::size_t H, std::size_t W, std::size_t C, std::size_t P)
		{
			const std::size_t gh = H / P, gw = W / P;
			std::vector<std::size_t> index;
			index.reserve(B * H * W * C);
			for (std::size_t b = 0; b < B; b++)
				for (std::size_t pi = 0; pi < gh; pi++)
					for (std::size_t pj = 0; pj < gw; pj++)
						for (std::size_t di = 0; di < P; di++)
							for (std::size_t dj = 0; dj < P; dj++)
								for (std::size_t c = 0; c < C; c++)
									index.push_back(((b * H + pi * P + di) * W + pj * P + dj) * C + c);
			return index;
		}
		/// Source offsets taking [B*N, P*P*K] decoded rows to [B, H, W, K] pixels.
		std::vector<std::size_t> pixel_index(std::size_t B, std::size_t H, std::size_t W, std::size_t K, std::size_t P)
		{
			const std::size_t gw = W / P;
			const std::size_t n = (H / P) * gw;
			std::vector<std::size_t> index;
			index.reserve(B * H * W * K);
			for (std::size_t b = 0; b < B; b++)
				for (std::size_t y = 0; y < H; y++)
					for (std::size_t x = 0; x < W; x++)
						for (std::size_t k = 0; k < K; k++)
						{
							const std::size_t token = b * n + (y / P) * gw + (x / P);
							index.push_back(token * P * P * K + ((y % P) * P + (x % P)) * K + k);
						}
			return index;
		}
	}

	std::string to_string(ModelMode mode)
	{
		switch (mode)
		{
			case ModelMode::plain:
				return "plain";
			case ModelMode::moe:
				return "moe";
			case ModelMode::dmoe:
				return "dmoe";
		}
		return "?";
	}
	ModelMode parse_mode(const std::string &s)
	{
		if (s == "plain")
			return ModelMode::plain;
		if (s == "moe")
			return ModelMode::moe;
		if (s == "dmoe")
			return ModelMode::dmoe;
		throw ConfigError("unknown mode '" + s + "' (expected plain, moe or dmoe)");
	}
	std::string to_string(DMoESharing sharing)
	{
		return sharing == DMoESharing::shared ? "shared" : "layer_wise";
	}
	DMoESharing parse_sharing(const std::string &s)
	{
		if (s == "shared")
			return DMoESharing::shared;
		if (s == "layer_wise")
			return DMoESharing::layer_wise;
		throw ConfigError("unknown dmoe sharing '" + s + "' (expected shared or layer_wise)");
	}

	std::vector<std::size_t> encoder_blocks(std::size_t n_blocks)
	{
		std::vector<std::size_t> result;
		for (std::size_t i = 0; i < n_blocks / 2; i++)
			result.push_back(i);
		return result;
	}
	std::vector<std::size_t> decoder_blocks(std::size_t n_blocks)
	{
		std::vector<std::size_t> result;
		for (std::size_t i = n_blocks / 2; i < n_blocks; i++)
			result.push_back(i);
		return result;
	}

	void BackboneConfig::validate() const
	{
		if (patch_size == 0 || image_h % patch_size != 0 || image_w % patch_size != 0)
			throw ConfigError("backbone: patch size " + std::to_string(patch_size) + " must divide the image size " + std::to_string(image_h) + "x" + std::to_string(image_w));
		if (in_channels == 0 || d_model == 0 || mlp_hidden == 0 || n_blocks == 0)
			throw ConfigError("backbone: channel widths and block count must be positive");
		if (n_classes < 2)
			throw ConfigError("backbone: at least two classes are required");
		if (mode != ModelMode::plain)
			for (std::size_t p : placement)
				if (p >= n_blocks)
					throw ConfigError("backbone: dMoE placement " + std::to_string(p) + " is not a block index below " + std::to_string(n_blocks));
	}

	Tensor ResidualBlock::forward(const Tensor &tokens) const
	{
		return ops::add(tokens, fc2.forward(ops::relu(fc1.forward(tokens))));
	}

	Backbone::Backbone(BackboneConfig config, std::vector<std::string> attributes, std::uint64_t init_seed) :
			m_config(std::move(config)),
			m_attributes(std::move(attributes))
	{
		m_config.validate();
		const std::size_t P = m_config.patch_size;
		{
			Rng rng(derive_seed(init_seed, embed_stream));
			m_embed = Linear::uniform(P * P * m_config.in_channels, m_config.d_model, rng);
		}
		for (std::size_t l = 0; l < m_config.n_blocks; l++)
		{
			Rng rng(derive_seed(init_seed, block_stream + l));
			Linear fc1 = Linear::uniform(m_config.d_model, m_config.mlp_hidden, rng);
			Linear fc2 = Linear::uniform(m_config.mlp_hidden, m_config.d_model, rng);
			m_blocks.push_back(ResidualBlock { std::move(fc1), std::move(fc2) });
		}

		m_dmoe_slot.assign(m_config.n_blocks, -1);
		if (m_config.mode != ModelMode::plain && !m_config.placement.empty())
		{
			DMoEConfig dc = m_config.dmoe;
			dc.d_model = m_config.d_model;
			if (m_config.mode == ModelMode::moe)
				dc.attributes = { "*" };
			else
				dc.attributes = m_attributes;
			std::vector<std::size_t> placement = m_config.placement;
			std::sort(placement.begin(), placement.end());
			placement.erase(std::unique(placement.begin(), placement.end()), placement.end());
			if (m_config.sharing == DMoESharing::shared)
			{
				Rng rng(derive_seed(init_seed, dmoe_stream));
				m_dmoe.emplace_back(dc, rng);
				for (std::size_t p : placement)
					m_dmoe_slot[p] = 0;
			}
			else
				for (std::size_t p : placement)
				{
					Rng rng(derive_seed(init_seed, dmoe_stream + 1 + p));
					m_dmoe_slot[p] = static_cast<int>(m_dmoe.size());
					m_dmoe.emplace_back(dc, rng);
				}
		}
		{
			Rng rng(derive_seed(init_seed, decode_stream));
			m_decode = Linear::uniform(m_config.d_model, P * P * m_config.n_classes, rng);
		}
	}

	std::size_t Backbone::route_index(const std::string &attr) const
	{
		if (m_config.mode != ModelMode::dmoe)
			return 0;
		const auto it = std::find(m_attributes.begin(), m_attributes.end(), attr);
		if (it == m_attributes.end())
		{
			std::string known;
			for (const auto &a : m_attributes)
				known += (known.empty() ? "" : ", ") + a;
			throw RoutingError("unknown attribute '" + attr + "' (known: " + known + ")");
		}
		return static_cast<std::size_t>(it - m_attributes.begin());
	}

	Tensor Backbone::embed(const Tensor &images) const
	{
		const BackboneConfig &c = m_config;
		if (images.rank() != 4 || images.dim(1) != c.image_h || images.dim(2) != c.image_w || images.dim(3) != c.in_channels)
			throw ShapeError("backbone: expected images [B, " + std::to_string(c.image_h) + ", " + std::to_string(c.image_w) + ", " + std::to_string(c.in_channels) + "], got "
					+ to_string(images.shape()));
		const std::size_t B = images.dim(0);
		const std::size_t P = c.patch_size;
		const Tensor patches = ops::gather(images, patch_index(B, c.image_h, c.image_w, c.in_channels, P), { B * c.tokens_per_image(), P * P * c.in_channels });
		return m_embed.forward(patches);
	}

	const DMoELayer* Backbone::dmoe_after(std::size_t block) const
	{
		const int slot = m_dmoe_slot[block];
		return slot < 0 ? nullptr : &m_dmoe[static_cast<std::size_t>(slot)];
	}

	Tensor Backbone::forward_batch(const Tensor &images, std::span<const std::size_t> route, bool training, Rng &rng, std::vector<GatingDecision> *decisions) const
	{
		const BackboneConfig &c = m_config;
		Tensor h = embed(images);
		const std::size_t B = images.dim(0);
		if (route.size() != B)
			throw ShapeError("backbone: one route index per image is required");

		std::vector<std::size_t> row_route;
		if (c.mode != ModelMode::plain)
		{
			row_route.reserve(B * c.tokens_per_image());
			for (std::size_t b = 0; b < B; b++)
				row_route.insert(row_route.end(), c.tokens_per_image(), c.mode == ModelMode::dmoe ? route[b] : 0);
		}
		for (std::size_t l = 0; l < c.n_blocks; l++)
		{
			h = m_blocks[l].forward(h);
			if (const DMoELayer *layer = dmoe_after(l))
			{
				GatingDecision decision;
				h = layer->forward_rows(h, row_route, training, rng, decisions != nullptr ? &decision : nullptr);
				if (decisions != nullptr)
					decisions->push_back(std::move(decision));
			}
		}
		const Tensor decoded = m_decode.forward(h);
		return ops::gather(decoded, pixel_index(B, c.image_h, c.image_w, c.n_classes, c.patch_size), { B, c.image_h, c.image_w, c.n_classes });
	}

	ModelOutput Backbone::forward(const Tensor &image, const std::string &attr, bool training, Rng &rng) const
	{
		if (image.rank() != 3)
			throw ShapeError("backbone: expected image [H, W, C], got " + to_string(image.shape()));
		const Tensor batch = ops::reshape(image, { 1, image.dim(0), image.dim(1), image.dim(2) });
		const std::size_t route[1] = { route_index(attr) };
		const Tensor logits = forward_batch(batch, route, training, rng);
		return ModelOutput { ops::reshape(logits, { m_config.image_h, m_config.image_w, m_config.n_classes }) };
	}

	ParameterList Backbone::parameters() const
	{
		ParameterList result;
		m_embed.collect(result, "embed");
		for (std::size_t l = 0; l < m_blocks.size(); l++)
		{
			m_blocks[l].fc1.collect(result, "block." + std::to_string(l) + ".fc1");
			m_blocks[l].fc2.collect(result, "block." + std::to_string(l) + ".fc2");
		}
		if (m_config.sharing == DMoESharing::shared)
		{
			if (!m_dmoe.empty())
				m_dmoe.front().collect(result, "dmoe.shared");
		}
		else
			for (std::size_t l = 0; l < m_dmoe_slot.size(); l++)
				if (m_dmoe_slot[l] >= 0)
					m_dmoe[static_cast<std::size_t>(m_dmoe_slot[l])].collect(result, "dmoe." + std::to_string(l));
		m_decode.collect(result, "decode");
		return result;
	}

	std::size_t Backbone::parameter_count() const
	{
		std::size_t total = 0;
		for (const auto &p : parameters())
			total += p.tensor.size();
		return total;
	}
}
