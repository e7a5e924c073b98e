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

#include <dmoe/dmoe_layer.hpp>
#include <dmoe/errors.hpp>
#include <dmoe/rng.hpp>

#include <algorithm>
#include <set>

namespace dmoe
{
	void DMoEConfig::validate() const
	{
		if (n_experts == 0)
			throw ConfigError("dmoe: n_experts must be positive");
		if (top_k == 0 || top_k > n_experts)
			throw ConfigError("dmoe: top_k must lie in [1, n_experts], got " + std::to_string(top_k));
		if (d_model == 0 || d_hidden == 0)
			throw ConfigError("dmoe: d_model and d_hidden must be positive");
		if (!(dropout_p >= 0.0 && dropout_p < 1.0))
			throw ConfigError("dmoe: dropout probability must lie in [0, 1)");
		if (attributes.empty())
			throw ConfigError("dmoe: at least one attribute label is required");
		std::set<std::string> unique(attributes.begin(), attributes.end());
		if (unique.size() != attributes.size())
			throw ConfigError("dmoe: attribute labels must be unique");
	}
	std::size_t DMoEConfig::attribute_index(const std::string &label) const
	{
		const auto it = std::find(attributes.begin(), attributes.end(), label);
		if (it == attributes.end())
		{
			std::string known;
			for (const auto &a : attributes)
				known += (known.empty() ? "" : ", ") + a;
			throw RoutingError("unknown attribute '" + label + "' (known: " + known + ")");
		}
		return static_cast<std::size_t>(it - attributes.begin());
	}

	Router::Router(std::size_t d_model, std::size_t n_experts, std::size_t n_attributes)
	{
		for (std::size_t i = 0; i < n_attributes; i++)
			m_weights.push_back(RouterWeights { Tensor::zeros( { d_model, n_experts }, true), Tensor::zeros( { d_model, n_experts }, true) });
	}
	const RouterWeights& Router::at(std::size_t attr_index) const
	{
		if (attr_index >= m_weights.size())
			throw RoutingError("router index " + std::to_string(attr_index) + " out of range");
		return m_weights[attr_index];
	}
	RouterWeights& Router::at(std::size_t attr_index)
	{
		if (attr_index >= m_weights.size())
			throw RoutingError("router index " + std::to_string(attr_index) + " out of range");
		return m_weights[attr_index];
	}
	void Router::collect(ParameterList &out, const std::string &prefix) const
	{
		for (std::size_t i = 0; i < m_weights.size(); i++)
		{
			out.push_back( { prefix + ".router." + std::to_string(i) + ".w", m_weights[i].w });
			out.push_back( { prefix + ".router." + std::to_string(i) + ".w_noise", m_weights[i].w_noise });
		}
	}

	Expert::Expert(std::size_t d_model, std::size_t d_hidden, double dropout_p, ExpertActivation activation, Rng &init_rng) :
			m_linear1(Linear::uniform(d_model, d_hidden, init_rng)),
			m_linear2(Linear::uniform(d_hidden, d_model, init_rng)),
			m_dropout_p(dropout_p),
			m_activation(activation)
	{
	}
	Tensor Expert::forward(const Tensor &x, bool training, Rng &rng) const
	{
		Tensor h = m_linear1.forward(x);
		if (m_activation == ExpertActivation::relu)
			h = ops::relu(h);
		h = ops::dropout(h, m_dropout_p, training, rng);
		return m_linear2.forward(h);
	}
	void Expert::collect(ParameterList &out, const std::string &prefix) const
	{
		m_linear1.collect(out, prefix + ".linear1");
		m_linear2.collect(out, prefix + ".linear2");
	}

	std::vector<double> GatingDecision::dense() const
	{
		std::vector<double> result(tokens() * n_experts, 0.0);
		for (std::size_t t = 0; t < tokens(); t++)
			for (std::size_t j = 0; j < top_k; j++)
				result[t * n_experts + indices[t * top_k + j]] = weights[t * top_k + j];
		return result;
	}

	DMoELayer::DMoELayer(DMoEConfig config, Rng &init_rng) :
			m_config(std::move(config))
	{
		m_config.validate();
		m_router = Router(m_config.d_model, m_config.n_experts, m_config.attributes.size());
		m_experts.reserve(m_config.n_experts);
		for (std::size_t i = 0; i < m_config.n_experts; i++)
			m_experts.emplace_back(m_config.d_model, m_config.d_hidden, m_config.dropout_p, m_config.activation, init_rng);
	}

	GatingDecision DMoELayer::gate(const Tensor &tokens, const std::string &attr, bool training, Rng &rng) const
	{
		const std::size_t index = m_config.attribute_index(attr);
		const std::vector<std::size_t> row_attr(tokens.rank() == 2 ? tokens.dim(0) : 0, index);
		return gate_rows(tokens, row_attr, training, rng).decision;
	}

	Tensor DMoELayer::forward(const Tensor &tokens, const std::string &attr, bool training, Rng &rng) const
	{
		const std::size_t index = m_config.attribute_index(attr);
		const std::vector<std::size_t> row_attr(tokens.rank() == 2 ? tokens.dim(0) : 0, index);
		return forward_rows(tokens, row_attr, training, rng);
	}

	GateOutput DMoELayer::gate_rows(const Tensor &tokens, std::span<const std::size_t> row_attr, bool training, Rng &rng) const
	{
		if (tokens.rank() != 2 || tokens.dim(1) != m_config.d_model)
			throw ShapeError("dmoe: expected tokens [N, " + std::to_string(m_config.d_model) + "], got " + to_string(tokens.shape()));
		const std::size_t N = tokens.dim(0);
		const std::size_t n = m_config.n_experts;
		if (row_attr.size() != N)
			throw ShapeError("dmoe: one attribute index per token row is required");
		for (std::size_t a : row_attr)
			if (a >= m_router.size())
				throw RoutingError("dmoe: attribute index " + std::to_string(a) + " has no router");

		const bool noisy = training || m_config.noise_at_eval;
		const bool uniform_attr = N == 0 || std::all_of(row_attr.begin(), row_attr.end(), [&](std::size_t a)
		{	return a == row_attr.front();});

		Tensor clean, noise_logits;
		if (uniform_attr)
		{
			const RouterWeights &r = m_router.at(N == 0 ? 0 : row_attr.front());
			clean = ops::matmul(tokens, r.w);
			if (noisy)
				noise_logits = ops::matmul(tokens, r.w_noise);
		}
		else
		{
			std::vector<std::vector<std::size_t>> groups(m_router.size());
			for (std::size_t i = 0; i < N; i++)
				groups[row_attr[i]].push_back(i);
			std::vector<Tensor> clean_parts, noise_parts;
			std::vector<std::vector<std::size_t>> row_lists;
			for (std::size_t a = 0; a < groups.size(); a++)
			{
				if (groups[a].empty())
					continue;
				const Tensor x = ops::take_rows(tokens, groups[a]);
				clean_parts.push_back(ops::matmul(x, m_router.at(a).w));
				if (noisy)
					noise_parts.push_back(ops::matmul(x, m_router.at(a).w_noise));
				row_lists.push_back(std::move(groups[a]));
			}
			clean = ops::scatter_rows(clean_parts, row_lists, N);
			if (noisy)
				noise_logits = ops::scatter_rows(noise_parts, row_lists, N);
		}

		Tensor scores = clean;
		if (noisy)
		{
			std::vector<double> eps(N * n);
			for (double &e : eps)
				e = rng.normal();
			scores = ops::add(clean, ops::mul(Tensor( { N, n }, std::move(eps)), ops::softplus(noise_logits)));
		}
		GateOutput result;
		result.gates = ops::softmax(ops::keep_top_k(scores, m_config.top_k), 1);

		GatingDecision &decision = result.decision;
		decision.n_experts = n;
		decision.top_k = m_config.top_k;
		decision.indices.reserve(N * m_config.top_k);
		decision.weights.reserve(N * m_config.top_k);
		for (std::size_t i = 0; i < N; i++)
			for (std::size_t j : ops::top_k_indices(scores.data().subspan(i * n, n), m_config.top_k))
			{
				decision.indices.push_back(j);
				decision.weights.push_back(result.gates.data()[i * n + j]);
			}
		return result;
	}

	Tensor DMoELayer::forward_rows(const Tensor &tokens, std::span<const std::size_t> row_attr, bool training, Rng &rng, GatingDecision *decision) const
	{
		GateOutput gate = gate_rows(tokens, row_attr, training, rng);
		const std::size_t N = tokens.dim(0);

		std::vector<std::vector<std::size_t>> dispatch(m_config.n_experts);
		for (std::size_t t = 0; t < N; t++)
			for (std::size_t e : gate.decision.indices_of(t))
				dispatch[e].push_back(t);

		std::vector<Tensor> parts;
		std::vector<std::vector<std::size_t>> row_lists;
		for (std::size_t e = 0; e < m_config.n_experts; e++)
		{
			if (dispatch[e].empty())
				continue;
			const std::vector<std::size_t> cols(dispatch[e].size(), e);
			const Tensor weight = ops::take_elements(gate.gates, dispatch[e], cols);
			const Tensor y = m_experts[e].forward(ops::take_rows(tokens, dispatch[e]), training, rng);
			parts.push_back(ops::scale_rows(y, weight));
			row_lists.push_back(std::move(dispatch[e]));
		}
		if (decision != nullptr)
			*decision = std::move(gate.decision);
		return ops::scatter_add_rows(tokens, parts, row_lists);
	}

	void DMoELayer::collect(ParameterList &out, const std::string &prefix) const
	{
		m_router.collect(out, prefix);
		for (std::size_t i = 0; i < m_experts.size(); i++)
			m_experts[i].collect(out, prefix + ".expert." + std::to_string(i));
	}

	Tensor patchify(const Tensor &feature_map)
	{
		if (feature_map.rank() == 2)
			return feature_map;
		if (feature_map.rank() != 3 && feature_map.rank() != 4)
			throw ShapeError("patchify: expected [H, W, C] or [H, W, D, C], got " + to_string(feature_map.shape()));
		const std::size_t channels = feature_map.shape().back();
		return ops::reshape(feature_map, { feature_map.size() / channels, channels });
	}

	Tensor unpatchify(const Tensor &tokens, const Shape &spatial_dims)
	{
		if (tokens.rank() != 2)
			throw ShapeError("unpatchify: expected [N, C] tokens, got " + to_string(tokens.shape()));
		if (volume(spatial_dims) != tokens.dim(0))
			throw ShapeError("unpatchify: spatial dims " + to_string(spatial_dims) + " do not multiply to " + std::to_string(tokens.dim(0)) + " tokens");
		Shape shape = spatial_dims;
		shape.push_back(tokens.dim(1));
		return ops::reshape(tokens, std::move(shape));
	}

	std::vector<std::size_t> count_expert_load(std::span<const GatingDecision> decisions, std::size_t n_experts)
	{
		std::vector<std::size_t> counts(n_experts, 0);
		for (const auto &d : decisions)
			for (std::size_t e : d.indices)
			{
				if (e >= n_experts)
					throw ShapeError("count_expert_load: expert id out of range");
				counts[e]++;
			}
		return counts;
	}
}
