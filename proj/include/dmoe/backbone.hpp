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

#ifndef DMOE_BACKBONE_HPP_
#define DMOE_BACKBONE_HPP_

#include <dmoe/dmoe_layer.hpp>
#include <dmoe/grad_check.hpp>
#include <dmoe/nn.hpp>
#include <dmoe/tensor.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dmoe
{
	class Rng;

	enum class ModelMode
	{
		plain, // residual backbone only
		moe,   // one router shared by every sample, attribute ignored
		dmoe   // one router per attribute, shared experts
	};
	enum class DMoESharing
	{
		shared,    // one dMoE parameter set reused at every placement
		layer_wise // a separate dMoE per placement
	};

	std::string to_string(ModelMode mode);
	ModelMode parse_mode(const std::string &s);
	std::string to_string(DMoESharing sharing);
	DMoESharing parse_sharing(const std::string &s);

	/// Blocks [0, L/2) form the encoder, [L/2, L) the decoder.
	std::vector<std::size_t> encoder_blocks(std::size_t n_blocks);
	std::vector<std::size_t> decoder_blocks(std::size_t n_blocks);

	struct BackboneConfig
	{
			std::size_t image_h = 32;
			std::size_t image_w = 32;
			std::size_t in_channels = 1;
			std::size_t patch_size = 8;
			std::size_t d_model = 64;
			std::size_t mlp_hidden = 64;
			std::size_t n_blocks = 6;
			std::size_t n_classes = 2;
			/// Block indices followed by a dMoE; the layer runs after the block's residual MLP.
			std::vector<std::size_t> placement = encoder_blocks(6);
			DMoESharing sharing = DMoESharing::shared;
			ModelMode mode = ModelMode::dmoe;
			/// d_model and attributes are filled in by the backbone.
			DMoEConfig dmoe;

			void validate() const;
			std::size_t tokens_per_image() const
			{
				return (image_h / patch_size) * (image_w / patch_size);
			}
	};

	struct ModelOutput
	{
			Tensor logits; // [H, W, n_classes]
	};

	/// h + W2 relu(W1 h + b1) + b2, applied per token.
	struct ResidualBlock
	{
			Linear fc1;
			Linear fc2;
			Tensor forward(const Tensor &tokens) const;
	};

	/**
	 * Residual token network mapping (image, attribute) to per-pixel class logits:
	 * patch embedding, L residual MLP blocks with dMoE layers after the configured
	 * blocks, and a linear per-token decoder reshaped back to the image grid.
	 */
	class Backbone
	{
		public:
			/// Every component draws its initial values from its own stream derived from init_seed,
			/// so modes that share a component also share its initialization.
			Backbone(BackboneConfig config, std::vector<std::string> attributes, std::uint64_t init_seed);

			const BackboneConfig& config() const noexcept
			{
				return m_config;
			}
			const std::vector<std::string>& attributes() const noexcept
			{
				return m_attributes;
			}

			/// Router index used for a sample with this label: always 0 unless mode is dmoe.
			std::size_t route_index(const std::string &attr) const;

			/// images [B, H, W, C] to tokens [B*N, d_model].
			Tensor embed(const Tensor &images) const;
			/// images [B, H, W, C] to logits [B, H, W, n_classes].
			Tensor forward_batch(const Tensor &images, std::span<const std::size_t> route, bool training, Rng &rng, std::vector<GatingDecision> *decisions = nullptr) const;
			ModelOutput forward(const Tensor &image, const std::string &attr, bool training, Rng &rng) const;

			ParameterList parameters() const;
			std::size_t parameter_count() const;

			std::vector<DMoELayer>& dmoe_layers() noexcept
			{
				return m_dmoe;
			}
			const std::vector<DMoELayer>& dmoe_layers() const noexcept
			{
				return m_dmoe;
			}
			std::vector<ResidualBlock>& blocks() noexcept
			{
				return m_blocks;
			}
		private:
			const DMoELayer* dmoe_after(std::size_t block) const;

			BackboneConfig m_config;
			std::vector<std::string> m_attributes;
			Linear m_embed;
			std::vector<ResidualBlock> m_blocks;
			std::vector<DMoELayer> m_dmoe;
			std::vector<int> m_dmoe_slot; // per block: index into m_dmoe or -1
			Linear m_decode;
	};
}

#endif /* DMOE_BACKBONE_HPP_ */
