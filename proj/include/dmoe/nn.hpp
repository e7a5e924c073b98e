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

#ifndef DMOE_NN_HPP_
#define DMOE_NN_HPP_

#include <dmoe/grad_check.hpp>
#include <dmoe/tensor.hpp>

#include <string>

namespace dmoe
{
	class Rng;

	/// y = x * weight + bias, weight stored [in, out].
	struct Linear
	{
			Tensor weight;
			Tensor bias;

			/// PyTorch-style fan-in init: weight and bias ~ U(-1/sqrt(in), 1/sqrt(in)).
			static Linear uniform(std::size_t in, std::size_t out, Rng &rng);
			static Linear zeros(std::size_t in, std::size_t out);

			std::size_t in_features() const
			{
				return weight.dim(0);
			}
			std::size_t out_features() const
			{
				return weight.dim(1);
			}
			Tensor forward(const Tensor &x) const;
			void collect(ParameterList &out, const std::string &prefix) const;
	};

	Tensor uniform_tensor(Shape shape, double bound, Rng &rng, bool requires_grad = true);
}

#endif /* DMOE_NN_HPP_ */
