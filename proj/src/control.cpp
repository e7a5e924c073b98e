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

#include <dmoe/control.hpp>
#include <dmoe/csv.hpp>
#include <dmoe/errors.hpp>
#include <dmoe/metrics.hpp>
#include <dmoe/rng.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace dmoe::control
{
	namespace
	{
		template<class... Ts>
		struct overloaded : Ts...
		{
				using Ts::operator()...;
		};
		template<class... Ts>
		overloaded(Ts...) -> overloaded<Ts...>;

		Vec feedback_control(const FeedbackPolicy &policy, const Vec &h)
		{
			return std::visit(overloaded {
				[&](const KernelFeedback &k)
				{
					if (k.anchors.empty() || k.anchors.size() != k.thetas.size())
						throw ConfigError("kernel feedback needs one theta per anchor and at least one anchor");
					const Vec w = kernel_weights(h, k.anchors);
					Vec u(k.thetas.front().size(), 0.0);
					for (std::size_t i = 0; i < w.size(); i++)
						for (std::size_t j = 0; j < u.size(); j++)
							u[j] += w[i] * k.thetas[i][j];
					return u;
				},
				[&](const LinearFeedback &l)
				{
					Vec u(l.gain.size(), 0.0);
					for (std::size_t r = 0; r < l.gain.size(); r++)
					{
						if (l.gain[r].size() != h.size())
							throw ShapeError("linear feedback gain row does not match the state dimension");
						for (std::size_t c = 0; c < h.size(); c++)
							u[r] -= l.gain[r][c] * h[c];
					}
					return u;
				}
			}, policy);
		}

		Vec matvec(const Vec &theta, const Vec &h)
		{
			const std::size_t d = h.size();
			if (theta.size() != d * d)
				throw ShapeError("expert parameter must hold dim x dim entries");
			Vec out(d, 0.0);
			for (std::size_t r = 0; r < d; r++)
				for (std::size_t c = 0; c < d; c++)
					out[r] += theta[r * d + c] * h[c];
			return out;
		}

		/// Mean cost over the start states of one scalar regime under u = policy(h, t).
		template<class F>
		double regime_cost(double a, const std::vector<double> &starts, const ModeSwitchConfig &c, F &&u_of)
		{
			double total = 0.0;
			for (double h0 : starts)
			{
				double h = h0, cost = 0.0;
				for (std::size_t t = 0; t < c.horizon; t++)
				{
					const double u = u_of(h);
					cost += (h * h + c.rho * u * u) * c.dt;
					h += c.dt * (a * h + u);
				}
				total += cost;
			}
			return total / static_cast<double>(starts.size());
		}

		std::vector<double> grid(double lo, double hi, double step)
		{
			std::vector<double> g;
			const auto n = static_cast<long>(std::llround((hi - lo) / step));
			const auto zero = std::llround(-lo / step);
			for (long i = 0; i <= n; i++)
				g.push_back(static_cast<double>(i - zero) * step);
			return g;
		}
	}

	void ControlSystem::validate() const
	{
		if (!(dt > 0.0) || !std::isfinite(dt))
			throw ConfigError("control system: dt must be positive");
		if (state_dim == 0 || !dynamics)
			throw ConfigError("control system: needs a state dimension and dynamics");
	}

	Vec policy_control(const Policy &policy, const Vec &h, std::size_t step, const std::string &attr)
	{
		return std::visit(overloaded {
			[&](const OpenLoop &o)
			{
				if (o.u.empty())
					throw ConfigError("open-loop policy has no controls");
				return o.u.size() == 1 ? o.u.front() : o.u.at(step);
			},
			[&](const KernelFeedback &k)
			{
				return feedback_control(k, h);
			},
			[&](const LinearFeedback &l)
			{
				return feedback_control(l, h);
			},
			[&](const ModeSwitching &m)
			{
				if (m.modes.empty())
					throw ConfigError("mode-switching policy has no modes");
				const auto it = m.modes.find(attr);
				if (it == m.modes.end())
					throw ConfigError("mode-switching policy has no mode for attribute '" + attr + "'");
				return feedback_control(it->second, h);
			}
		}, policy);
	}

	std::vector<Vec> euler_rollout(const ControlSystem &system, const Policy &policy, const Vec &h0, const std::string &attr)
	{
		system.validate();
		if (h0.size() != system.state_dim)
			throw ShapeError("euler_rollout: initial state has " + std::to_string(h0.size()) + " entries, expected " + std::to_string(system.state_dim));
		if (!std::all_of(h0.begin(), h0.end(), [](double v) { return std::isfinite(v); }))
			throw NumericalError("euler_rollout: non-finite initial state");
		std::vector<Vec> trajectory { h0 };
		trajectory.reserve(system.horizon + 1);
		for (std::size_t t = 0; t < system.horizon; t++)
		{
			const Vec &h = trajectory.back();
			const Vec dh = system.dynamics(h, policy_control(policy, h, t, attr));
			Vec next(h.size());
			for (std::size_t i = 0; i < h.size(); i++)
			{
				next[i] = h[i] + system.dt * dh.at(i);
				if (!std::isfinite(next[i]))
					throw NumericalError("euler_rollout: state diverged at step " + std::to_string(t + 1));
			}
			trajectory.push_back(std::move(next));
		}
		return trajectory;
	}

	Vec kernel_weights(const Vec &h, const std::vector<Vec> &anchors)
	{
		if (anchors.empty())
			throw ConfigError("kernel_weights: at least one anchor is required");
		Vec scores(anchors.size(), 0.0);
		for (std::size_t k = 0; k < h.size(); k++)
			for (std::size_t i = 0; i < anchors.size(); i++)
				scores[i] += h[k] * anchors[i].at(k);
		const double max_value = *std::max_element(scores.begin(), scores.end());
		double sum = 0.0;
		for (double &s : scores)
		{
			s = std::exp(s - max_value);
			sum += s;
		}
		for (double &s : scores)
			s /= sum;
		return scores;
	}

	Expert linear_expert(std::size_t dim)
	{
		return [dim](const Vec &h, const Vec &theta)
		{
			if (h.size() != dim)
				throw ShapeError("linear expert: state dimension mismatch");
			return matvec(theta, h);
		};
	}

	Expert relu_expert(std::size_t dim)
	{
		return [dim](const Vec &h, const Vec &theta)
		{
			if (h.size() != dim)
				throw ShapeError("relu expert: state dimension mismatch");
			Vec out = matvec(theta, h);
			for (double &v : out)
				v = std::max(v, 0.0);
			return out;
		};
	}

	double linear_mixing_check(const Expert &f, const Vec &h, const std::vector<Vec> &thetas, const Vec &weights)
	{
		if (thetas.empty() || thetas.size() != weights.size())
			throw ConfigError("linear_mixing_check: needs one weight per theta");
		Vec mixed_theta(thetas.front().size(), 0.0);
		for (std::size_t i = 0; i < thetas.size(); i++)
			for (std::size_t j = 0; j < mixed_theta.size(); j++)
				mixed_theta[j] += weights[i] * thetas[i][j];
		const Vec lhs = f(h, mixed_theta);
		Vec rhs(lhs.size(), 0.0);
		for (std::size_t i = 0; i < thetas.size(); i++)
		{
			const Vec fi = f(h, thetas[i]);
			for (std::size_t j = 0; j < rhs.size(); j++)
				rhs[j] += weights[i] * fi[j];
		}
		double worst = 0.0;
		for (std::size_t j = 0; j < lhs.size(); j++)
			worst = std::max(worst, std::abs(lhs[j] - rhs[j]));
		return worst;
	}

	const PolicyCost& CostTable::row(const std::string &policy) const
	{
		for (const auto &r : rows)
			if (r.policy == policy)
				return r;
		throw ConfigError("cost table has no policy '" + policy + "'");
	}

	CostTable mode_switch_demo(std::uint64_t seed, const ModeSwitchConfig &c)
	{
		if (!(c.dt > 0.0) || c.horizon == 0 || c.starts < 2 || c.starts % 2 != 0 || !(c.grid_step > 0.0) || c.rho < 0.0)
			throw ConfigError("mode_switch_demo: invalid configuration");
		Rng rng(seed);
		std::vector<double> starts;
		for (std::size_t i = 0; i < c.starts / 2; i++)
		{
			const double h0 = rng.uniform(0.5, 1.5);
			starts.push_back(h0);
			starts.push_back(-h0);
		}

		struct Fit
		{
				double param;
				double cost_A;
				double cost_B;
		};
		const auto fit = [&](const std::vector<double> &candidates, auto &&policy_for, auto &&objective)
		{
			Fit best { 0.0, 0.0, 0.0 };
			double best_value = std::numeric_limits<double>::infinity();
			for (double p : candidates)
			{
				const double cA = regime_cost(c.a_A, starts, c, policy_for(p));
				const double cB = regime_cost(c.a_B, starts, c, policy_for(p));
				const double value = objective(cA, cB);
				if (value < best_value)
				{
					best_value = value;
					best = Fit { p, cA, cB };
				}
			}
			return best;
		};
		const auto constant = [](double u0)
		{
			return [u0](double)
			{
				return u0;
			};
		};
		const auto linear = [](double k)
		{
			return [k](double h)
			{
				return -k * h;
			};
		};
		const auto mixed = [](double a, double b)
		{
			return 0.5 * (a + b);
		};
		const auto only_A = [](double a, double)
		{
			return a;
		};
		const auto only_B = [](double, double b)
		{
			return b;
		};

		const auto u_grid = grid(c.u_lo, c.u_hi, c.grid_step);
		const auto k_grid = grid(c.gain_lo, c.gain_hi, c.grid_step);
		const Fit open = fit(u_grid, constant, mixed);
		const Fit single = fit(k_grid, linear, mixed);
		const Fit fit_A = fit(k_grid, linear, only_A);
		const Fit fit_B = fit(k_grid, linear, only_B);

		CostTable table;
		table.rows.push_back(PolicyCost { "open_loop", open.cost_A, open.cost_B, mixed(open.cost_A, open.cost_B), open.param, open.param });
		table.rows.push_back(PolicyCost { "single_feedback", single.cost_A, single.cost_B, mixed(single.cost_A, single.cost_B), single.param, single.param });
		table.rows.push_back(PolicyCost { "mode_switching", fit_A.cost_A, fit_B.cost_B, mixed(fit_A.cost_A, fit_B.cost_B), fit_A.param, fit_B.param });
		return table;
	}

	void write_cost_table_csv(const std::filesystem::path &path, const CostTable &table)
	{
		std::string out = "policy,cost_A,cost_B,mixed,param_A,param_B\n";
		for (const auto &r : table.rows)
			out += r.policy + "," + format_double(r.cost_A) + "," + format_double(r.cost_B) + "," + format_double(r.mixed) + "," + format_double(r.param_A) + "," + format_double(r.param_B) + "\n";
		csv::write_text(path, out);
	}
}
