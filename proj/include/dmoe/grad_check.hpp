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

#ifndef DMOE_GRAD_CHECK_HPP_
#define DMOE_GRAD_CHECK_HPP_

#include <dmoe/tensor.hpp>

#include <functional>
#include <string>
#include <vector>

namespace dmoe
{
	struct NamedTensor
	{
			std::string name;
			Tensor tensor;
	};
	using ParameterList = std::vector<NamedTensor>;

	struct GradCheckEntry
	{
			std::string name;
			std::size_t flat_index = 0;
			double analytic = 0.0;
			double numeric = 0.0;
			double relative_error = 0.0;
	};

	struct GradCheckReport
	{
			double max_relative_error = 0.0;
			double tolerance = 0.0;
			std::size_t checked = 0;
			GradCheckEntry worst;
			/// Per-parameter maximum relative error, in parameter order.
			std::vector<GradCheckEntry> per_parameter;
			bool passed() const noexcept
			{
				return max_relative_error < tolerance;
			}
	};

	struct GradCheckOptions
	{
			double step = 1e-5;
			double tolerance = 1e-4;
			/// Denominator floor of the relative error; gradients below it are compared absolutely.
			double abs_floor = 1e-8;
			/// Upper bound on coordinates probed per parameter tensor (0 = all), sampled with a fixed stride.
			std::size_t max_per_parameter = 0;
	};

	/**
	 * Compares tape gradients of a scalar loss against central finite differences.
	 *
	 * loss_fn must be a deterministic function of the parameter values: any noise
	 * or dropout has to be drawn from an rng it re-seeds on every call. It is
	 * invoked once under a fresh tape for the analytic gradient, then twice per
	 * probed coordinate with no tape active. Throws NumericalError if the loss is
	 * non-finite, naming the parameter and coordinate being probed.
	 */
	GradCheckReport grad_check(const std::function<Tensor()> &loss_fn, const ParameterList &params, const GradCheckOptions &options = {});
}

#endif /* DMOE_GRAD_CHECK_HPP_ */
