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

#ifndef DMOE_DMOE_LAYER_HPP_
#define DMOE_DMOE_LAYER_HPP_

#include <dmoe/grad_check.hpp>
#include <dmoe/nn.hpp>
#include <dmoe/tensor.hpp>

#include <span>
#include <string>
#include <vector>

namespace dmoe
{
	class Rng;

	enum class ExpertActivation
	{
		relu,
		identity // linear experts, used to exercise the mixing identity
	};

	struct DMoEConfig
	{
			std::size_t n_experts = 8;
			std::size_t top_k = 2;
			std::size_t d_model = 64;
			std::size_t d_hidden = 64;
			double dropout_p = 0.1;
			/// One router per label; a single label gives the attribute-blind MoE.
			std::vector<std::string> attributes;
			/// Gaussian gate noise is drawn only in training unless this is set.
			bool noise_at_eval = false;
			ExpertActivation activation = ExpertActivation::relu;

			void validate() const;
			/// Throws RoutingError listing the known labels.
			std::size_t attribute_index(const std::string &label) const;
	};

	struct RouterWeights
	{
			Tensor w;       // [d_model, n_experts]
			Tensor w_noise; // [d_model, n_experts]
	};

	/// Per-attribute gating matrices. Zero-initialized, so gating starts uniform.
	class Router
	{
		public:
			Router() = default;
			Router(std::size_t d_model, std::size_t n_experts, std::size_t n_attributes);

			std::size_t size() const noexcept
			{
				return m_weights.size();
			}
			const RouterWeights& at(std::size_t attr_index) const;
			RouterWeights& at(std::size_t attr_index);
			void collect(ParameterList &out, const std::string &prefix) const;
		private:
			std::vector<RouterWeights> m_weights;
	};

	/// Two linear layers with activation and dropout in between. Attribute-agnostic.
	class Expert
	{
		public:
			Expert(std::size_t d_model, std::size_t d_hidden, double dropout_p, ExpertActivation activation, Rng &init_rng);

			Tensor forward(const Tensor &x, bool training, Rng &rng) const;
			Linear& linear1() noexcept
			{
				return m_linear1;
			}
			Linear& linear2() noexcept
			{
				return m_linear2;
			}
			const Linear& linear1() const noexcept
			{
				return m_linear1;
			}
			const Linear& linear2() const noexcept
			{
				return m_linear2;
			}
			void collect(ParameterList &out, const std::string &prefix) const;
		private:
			Linear m_linear1;
			Linear m_linear2;
			double m_dropout_p;
			ExpertActivation m_activation;
	};

	/// Sparse gate per token: top_k expert ids (descending weight) and their softmax weights.
	struct GatingDecision
	{
			std::size_t n_experts = 0;
			std::size_t top_k = 0;
			std::vector<std::size_t> indices;
			std::vector<double> weights;

			std::size_t tokens() const noexcept
			{
				return top_k == 0 ? 0 : indices.size() / top_k;
			}
			std::span<const std::size_t> indices_of(std::size_t token) const
			{
				return std::span<const std::size_t>(indices).subspan(token * top_k, top_k);
			}
			std::span<const double> weights_of(std::size_t token) const
			{
				return std::span<const double>(weights).subspan(token * top_k, top_k);
			}
			/// Row-major [tokens, n_experts] gate with exact zeros off the selected set.
			std::vector<double> dense() const;
	};

	struct GateOutput
	{
			Tensor gates; // [N, n_experts], differentiable
			GatingDecision decision;
	};

	/**
	 * Attribute-switched noisy top-k mixture of experts with a residual path.
	 *
	 * Every token is routed by the router belonging to its attribute; the
	 * experts are shared by all attributes. Only the selected experts run,
	 * so unselected experts receive neither activations nor gradients.
	 */
	class DMoELayer
	{
		public:
			DMoELayer(DMoEConfig config, Rng &init_rng);

			const DMoEConfig& config() const noexcept
			{
				return m_config;
			}

			GatingDecision gate(const Tensor &tokens, const std::string &attr, bool training, Rng &rng) const;
			Tensor forward(const Tensor &tokens, const std::string &attr, bool training, Rng &rng) const;

			/// Gating where row i of tokens is routed by the router of row_attr[i].
			GateOutput gate_rows(const Tensor &tokens, std::span<const std::size_t> row_attr, bool training, Rng &rng) const;
			/// tokens + sum over selected experts of weight * expert(tokens).
			Tensor forward_rows(const Tensor &tokens, std::span<const std::size_t> row_attr, bool training, Rng &rng, GatingDecision *decision = nullptr) const;

			Router& router() noexcept
			{
				return m_router;
			}
			const Router& router() const noexcept
			{
				return m_router;
			}
			std::vector<Expert>& experts() noexcept
			{
				return m_experts;
			}
			const std::vector<Expert>& experts() const noexcept
			{
				return m_experts;
			}
			void collect(ParameterList &out, const std::string &prefix) const;
		private:
			DMoEConfig m_config;
			Router m_router;
			std::vector<Expert> m_experts;
	};

	/// [H, W, C] or [H, W, D, C] feature map to [H*W(*D), C] tokens, row-major. Rank-2 input is returned as is.
	Tensor patchify(const Tensor &feature_map);
	/// Inverse of patchify; spatial_dims excludes the channel axis.
	Tensor unpatchify(const Tensor &tokens, const Shape &spatial_dims);

	/// Selection count per expert; sums to top_k * total tokens.
	std::vector<std::size_t> count_expert_load(std::span<const GatingDecision> decisions, std::size_t n_experts);
}

#endif /* DMOE_DMOE_LAYER_HPP_ */
