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

#include <dmoe/nn.hpp>
#include <dmoe/rng.hpp>

#include <cmath>

namespace dmoe
{
	Tensor uniform_tensor(Shape shape, double bound, Rng &rng, bool requires_grad)
	{
		std::vector<double> data(volume(shape));
		for (double &v : data)
			v = rng.uniform(-bound, bound);
		return Tensor(std::move(shape), std::move(data), requires_grad);
	}

	Linear Linear::uniform(std::size_t in, std::size_t out, Rng &rng)
	{
		const double bound = 1.0 / std::sqrt(static_cast<double>(in));
		Linear result;
		result.weight = uniform_tensor( { in, out }, bound, rng);
		result.bias = uniform_tensor( { out }, bound, rng);
		return result;
	}
	Linear Linear::zeros(std::size_t in, std::size_t out)
	{
		return Linear { Tensor::zeros( { in, out }, true), Tensor::zeros( { out }, true) };
	}
	Tensor Linear::forward(const Tensor &x) const
	{
		return ops::add_bias(ops::matmul(x, weight), bias);
	}
	void Linear::collect(ParameterList &out, const std::string &prefix) const
	{
		out.push_back( { prefix + ".weight", weight });
		out.push_back( { prefix + ".bias", bias });
	}
}
