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
#include <dmoe/dmoe_layer.hpp>
#include <dmoe/errors.hpp>
#include <dmoe/rng.hpp>

#include <cmath>
#include <gtest/gtest.h>

namespace
{
	using namespace dmoe;
	using namespace dmoe::control;

	ControlSystem decay(double dt, std::size_t steps)
	{
		return ControlSystem { 1, [](const Vec &h, const Vec&)
		{
			return Vec { -h[0] };
		}, dt, steps };
	}

	double euler_error(double dt)
	{
		const std::size_t steps = static_cast<std::size_t>(std::llround(1.0 / dt));
		const auto traj = euler_rollout(decay(dt, steps), OpenLoop { { { 0.0 } } }, { 1.0 });
		return std::abs(traj.back()[0] - std::exp(-1.0));
	}

	std::vector<Vec> random_columns(std::size_t n, std::size_t d, Rng &rng)
	{
		std::vector<Vec> cols(n, Vec(d));
		for (auto &c : cols)
			for (double &v : c)
				v = rng.uniform(-1.0, 1.0);
		return cols;
	}
}

TEST(EulerRollout, ZeroDynamicsIsConstant)
{
	const ControlSystem s { 2, [](const Vec&, const Vec&)
	{
		return Vec { 0.0, 0.0 };
	}, 0.5, 7 };
	const auto traj = euler_rollout(s, OpenLoop { { { 1.0 } } }, { 3.0, -1.0 });
	ASSERT_EQ(traj.size(), 8u);
	for (const auto &h : traj)
		EXPECT_EQ(h, (Vec { 3.0, -1.0 }));
}

TEST(EulerRollout, DecayMatchesClosedForm)
{
	const auto traj = euler_rollout(decay(0.1, 10), OpenLoop { { { 0.0 } } }, { 1.0 });
	EXPECT_NEAR(traj.back()[0], std::pow(0.9, 10), 1e-14);
	EXPECT_NEAR(traj.back()[0], 0.3487, 1e-4);
}

TEST(EulerRollout, FirstOrderConvergence)
{
	const double ratio = euler_error(0.1) / euler_error(0.05);
	EXPECT_NEAR(ratio, 2.0, 0.4);
	const double ratio2 = euler_error(0.05) / euler_error(0.025);
	EXPECT_NEAR(ratio2, 2.0, 0.4);
}

TEST(EulerRollout, DivergenceNamesStep)
{
	const ControlSystem s { 1, [](const Vec &h, const Vec&)
	{
		return Vec { 1e200 * h[0] };
	}, 1.0, 10 };
	try
	{
		euler_rollout(s, OpenLoop { { { 0.0 } } }, { 1e200 });
		FAIL() << "expected NumericalError";
	}
	catch (const NumericalError &e)
	{
		EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos) << e.what();
	}
	EXPECT_THROW(euler_rollout(decay(0.0, 3), OpenLoop { { { 0.0 } } }, { 1.0 }), ConfigError);
}

TEST(EulerRollout, FeedbackPolicies)
{
	// dh = u with u = -2h: h_{t+1} = (1 - 2 dt) h_t
	const ControlSystem s { 1, [](const Vec&, const Vec &u)
	{
		return u;
	}, 0.1, 5 };
	const auto linear = euler_rollout(s, LinearFeedback { { { 2.0 } } }, { 1.0 });
	EXPECT_NEAR(linear.back()[0], std::pow(0.8, 5), 1e-15);

	ModeSwitching modes;
	modes.modes["A"] = LinearFeedback { { { 2.0 } } };
	modes.modes["B"] = LinearFeedback { { { 5.0 } } };
	EXPECT_NEAR(euler_rollout(s, modes, { 1.0 }, "B").back()[0], std::pow(0.5, 5), 1e-15);
	EXPECT_THROW(euler_rollout(s, modes, { 1.0 }, "C"), ConfigError);
	EXPECT_THROW(euler_rollout(s, ModeSwitching { }, { 1.0 }, "A"), ConfigError);

	// One anchor gives weight 1, so the kernel policy is the constant theta.
	const auto kernel = euler_rollout(s, KernelFeedback { { { 0.7 } }, { { -1.0 } } }, { 0.0 });
	EXPECT_NEAR(kernel.back()[0], -0.5, 1e-15);
	EXPECT_THROW(euler_rollout(s, KernelFeedback { }, { 0.0 }), ConfigError);

	const auto open = euler_rollout(s, OpenLoop { { { 1.0 }, { 2.0 }, { 3.0 }, { 4.0 }, { 5.0 } } }, { 0.0 });
	EXPECT_NEAR(open.back()[0], 1.5, 1e-15);
}

TEST(KernelWeights, TrivialCases)
{
	EXPECT_EQ(kernel_weights( { 0.3, -2.0 }, { { 1.0, 4.0 } }), (Vec { 1.0 }));
	const Vec w = kernel_weights( { 1.0, 0.0 }, { { 0.0, 1.0 }, { 0.0, -3.0 }, { 0.0, 0.5 } });
	for (double v : w)
		EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
	EXPECT_THROW(kernel_weights( { 1.0 }, { }), ConfigError);
}

TEST(KernelWeights, EqualsFullKGate)
{
	Rng rng(3);
	for (std::size_t n : { 2u, 5u, 8u })
	{
		DMoEConfig c;
		c.n_experts = n;
		c.top_k = n;
		c.d_model = 6;
		c.attributes = { "A" };
		Rng init(1);
		DMoELayer layer(c, init);
		const std::vector<Vec> anchors = random_columns(n, 6, rng);
		Tensor &W = layer.router().at(0).w;
		for (std::size_t i = 0; i < 6; i++)
			for (std::size_t e = 0; e < n; e++)
				W.mutable_data()[i * n + e] = anchors[e][i];
		for (double &v : layer.router().at(0).w_noise.mutable_data())
			v = rng.uniform(-1.0, 1.0);
		Tensor x = Tensor::zeros( { 20, 6 });
		for (double &v : x.mutable_data())
			v = rng.uniform(-2.0, 2.0);
		const auto dense = layer.gate(x, "A", false, rng).dense();
		for (std::size_t t = 0; t < 20; t++)
		{
			const Vec h(x.data().begin() + t * 6, x.data().begin() + (t + 1) * 6);
			const Vec k = kernel_weights(h, anchors);
			for (std::size_t e = 0; e < n; e++)
				EXPECT_NEAR(k[e], dense[t * n + e], 1e-12);
		}
	}
}

TEST(LinearMixing, IdentityForLinearExperts)
{
	Rng rng(5);
	const control::Expert f = linear_expert(16);
	EXPECT_EQ(linear_mixing_check(f, Vec(16, 0.5), random_columns(1, 256, rng), { 1.0 }), 0.0);
	for (int trial = 0; trial < 100; trial++)
	{
		const Vec h = random_columns(1, 16, rng).front();
		const auto thetas = random_columns(8, 256, rng);
		const Vec w = kernel_weights(h, random_columns(8, 16, rng));
		EXPECT_LT(linear_mixing_check(f, h, thetas, w), 1e-10);
	}
}

TEST(LinearMixing, ReluCounterexampleExists)
{
	Rng rng(6);
	const control::Expert f = relu_expert(4);
	double worst = 0.0;
	for (int trial = 0; trial < 50; trial++)
	{
		const Vec h = random_columns(1, 4, rng).front();
		const auto thetas = random_columns(3, 16, rng);
		const Vec w = kernel_weights(h, random_columns(3, 4, rng));
		worst = std::max(worst, linear_mixing_check(f, h, thetas, w));
	}
	EXPECT_GT(worst, 1e-3);
}

TEST(ModeSwitchDemo, DefaultOrderingIsStrict)
{
	const CostTable t = mode_switch_demo(0);
	const double open = t.row("open_loop").mixed;
	const double single = t.row("single_feedback").mixed;
	const double modes = t.row("mode_switching").mixed;
	EXPECT_LT(modes, single);
	EXPECT_LT(single, open);
	EXPECT_NE(t.row("mode_switching").param_A, t.row("mode_switching").param_B);
	// The stable regime needs less gain than the unstable one.
	EXPECT_LT(t.row("mode_switching").param_A, t.row("mode_switching").param_B);
}

TEST(ModeSwitchDemo, EqualRegimesCollapse)
{
	ModeSwitchConfig c;
	c.a_B = c.a_A;
	const CostTable t = mode_switch_demo(1, c);
	EXPECT_NEAR(t.row("mode_switching").mixed, t.row("single_feedback").mixed, 1e-12);
}

TEST(ModeSwitchDemo, HeavyControlPenaltySuppressesControl)
{
	ModeSwitchConfig c;
	c.rho = 1e9;
	const CostTable t = mode_switch_demo(2, c);
	for (const auto &r : t.rows)
	{
		EXPECT_EQ(r.param_A, 0.0) << r.policy;
		EXPECT_EQ(r.param_B, 0.0) << r.policy;
		EXPECT_EQ(r.mixed, t.row("open_loop").mixed);
	}
}

TEST(ModeSwitchDemo, DeterministicPerSeed)
{
	const CostTable a = mode_switch_demo(3), b = mode_switch_demo(3);
	for (std::size_t i = 0; i < a.rows.size(); i++)
		EXPECT_EQ(a.rows[i].mixed, b.rows[i].mixed);
}
