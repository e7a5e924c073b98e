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

#ifndef DMOE_CONTROL_HPP_
#define DMOE_CONTROL_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace dmoe::control
{
	using Vec = std::vector<double>;
	using Dynamics = std::function<Vec(const Vec &h, const Vec &u)>;

	/// dh = f(h, u) dt, integrated with explicit Euler steps.
	struct ControlSystem
	{
			std::size_t state_dim = 1;
			Dynamics dynamics;
			double dt = 0.1;
			std::size_t horizon = 10;

			void validate() const;
	};

	/// A fixed control sequence; a single entry is held for every step.
	struct OpenLoop
	{
			std::vector<Vec> u;
	};

	/**
	 * u = sum_i K(h, h_i) theta_i. The feature map is never formed: column i of W
	 * holds phi* phi(h_i), so K(h, h_i) = softmax_i(h . W[:, i]).
	 */
	struct KernelFeedback
	{
			std::vector<Vec> anchors; // columns of W, each of length state_dim
			std::vector<Vec> thetas;
	};

	/// u = -K h with K given row by row.
	struct LinearFeedback
	{
			std::vector<Vec> gain;
	};

	using FeedbackPolicy = std::variant<KernelFeedback, LinearFeedback>;

	/// u = kappa_{s(attr)}(h).
	struct ModeSwitching
	{
			std::map<std::string, FeedbackPolicy> modes;
	};

	using Policy = std::variant<OpenLoop, KernelFeedback, LinearFeedback, ModeSwitching>;

	/// Throws ConfigError for an empty anchor set, empty mode map, or an unknown attribute.
	Vec policy_control(const Policy &policy, const Vec &h, std::size_t step, const std::string &attr);

	/// horizon + 1 states starting at h0; a non-finite state throws NumericalError naming the step.
	std::vector<Vec> euler_rollout(const ControlSystem &system, const Policy &policy, const Vec &h0, const std::string &attr = { });

	/// softmax over anchors of h . anchors[i].
	Vec kernel_weights(const Vec &h, const std::vector<Vec> &anchors);

	using Expert = std::function<Vec(const Vec &h, const Vec &theta)>;
	/// f(h, theta) = Theta h with Theta the row-major dim x dim reshape of theta.
	Expert linear_expert(std::size_t dim);
	/// f(h, theta) = relu(Theta h).
	Expert relu_expert(std::size_t dim);

	/// max |f(h, sum_i w_i theta_i) - sum_i w_i f(h, theta_i)|.
	double linear_mixing_check(const Expert &f, const Vec &h, const std::vector<Vec> &thetas, const Vec &weights);

	struct ModeSwitchConfig
	{
			double a_A = -0.5;
			double a_B = 0.5;
			double rho = 0.1;
			double dt = 0.1;
			std::size_t horizon = 50;
			std::size_t starts = 8; // initial states per regime, in +/- pairs
			double gain_lo = -1.0;
			double gain_hi = 6.0;
			double u_lo = -2.0;
			double u_hi = 2.0;
			double grid_step = 0.01;
	};

	struct PolicyCost
	{
			std::string policy;
			double cost_A = 0.0;
			double cost_B = 0.0;
			double mixed = 0.0;
			double param_A = 0.0; // fitted gain, or constant control for open loop
			double param_B = 0.0;
	};

	struct CostTable
	{
			std::vector<PolicyCost> rows; // open_loop, single_feedback, mode_switching

			const PolicyCost& row(const std::string &policy) const;
	};

	/// Scalar regimes dh = a h + u under cost sum (h^2 + rho u^2) dt; gains fitted per regime by grid search.
	CostTable mode_switch_demo(std::uint64_t seed, const ModeSwitchConfig &config = { });
	void write_cost_table_csv(const std::filesystem::path &path, const CostTable &table);
}

#endif /* DMOE_CONTROL_HPP_ */
