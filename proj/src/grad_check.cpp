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

#include <dmoe/grad_check.hpp>
#include <dmoe/errors.hpp>

#include <algorithm>
#include <cmath>

namespace dmoe
{
	namespace
	{
		double evaluate(const std::function<Tensor()> &loss_fn, const std::string &where)
		{
			const double value = loss_fn().item();
			if (!std::isfinite(value))
				throw NumericalError("grad_check: non-finite loss at " + where);
			return value;
		}
	}

	GradCheckReport grad_check(const std::function<Tensor()> &loss_fn, const ParameterList &params, const GradCheckOptions &options)
	{
		for (const auto &p : params)
		{
			p.tensor.storage().requires_grad = true;
			p.tensor.storage().grad.clear();
		}
		{
			Tape tape;
			const Tensor loss = loss_fn();
			if (!std::isfinite(loss.item()))
				throw NumericalError("grad_check: non-finite loss at the unperturbed point");
			tape.backward(loss);
		}

		GradCheckReport report;
		report.tolerance = options.tolerance;
		for (const auto &p : params)
		{
			Tensor param = p.tensor;
			const std::vector<double> analytic = param.has_grad() ? std::vector<double>(param.grad().begin(), param.grad().end()) : std::vector<double>(param.size(), 0.0);
			const std::size_t n = param.size();
			const std::size_t stride = (options.max_per_parameter == 0 || n <= options.max_per_parameter) ? 1 : (n + options.max_per_parameter - 1) / options.max_per_parameter;

			GradCheckEntry worst_here { p.name, 0, 0.0, 0.0, 0.0 };
			for (std::size_t i = 0; i < n; i += stride)
			{
				const std::string where = p.name + "[" + std::to_string(i) + "]";
				double &x = param.mutable_data()[i];
				const double original = x;
				x = original + options.step;
				const double plus = evaluate(loss_fn, where);
				x = original - options.step;
				const double minus = evaluate(loss_fn, where);
				x = original;

				const double numeric = (plus - minus) / (2.0 * options.step);
				const double denom = std::max( { std::abs(analytic[i]), std::abs(numeric), options.abs_floor });
				const double rel = std::abs(analytic[i] - numeric) / denom;
				report.checked++;
				if (rel >= worst_here.relative_error)
					worst_here = GradCheckEntry { p.name, i, analytic[i], numeric, rel };
			}
			report.per_parameter.push_back(worst_here);
			if (worst_here.relative_error >= report.max_relative_error)
			{
				report.max_relative_error = worst_here.relative_error;
				report.worst = worst_here;
			}
		}
		return report;
	}
}
