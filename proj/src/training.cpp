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

#include <dmoe/training.hpp>
#include <dmoe/csv.hpp>
#include <dmoe/errors.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dmoe
{
	namespace
	{
		constexpr std::uint64_t train_noise_stream = 7;

		std::vector<std::vector<double>> snapshot(const ParameterList &params)
		{
			std::vector<std::vector<double>> values;
			for (const auto &p : params)
				values.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
			return values;
		}
		void restore(const ParameterList &params, const std::vector<std::vector<double>> &values)
		{
			for (std::size_t i = 0; i < params.size(); i++)
			{
				Tensor t = params[i].tensor;
				std::copy(values[i].begin(), values[i].end(), t.mutable_data().begin());
			}
		}
	}

	void TrainConfig::validate() const
	{
		if (!(lr0 > 0.0))
			throw ConfigError("train: lr0 must be positive");
		if (!(decay_gamma > 0.0 && decay_gamma <= 1.0))
			throw ConfigError("train: decay_gamma must lie in (0, 1]");
		if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0))
			throw ConfigError("train: betas must lie in (0, 1)");
		if (!(eps > 0.0) || weight_decay < 0.0)
			throw ConfigError("train: eps must be positive and weight_decay nonnegative");
		if (batch_size == 0)
			throw ConfigError("train: batch_size must be at least 1");
		if (!(train_frac > 0.0 && train_frac < 1.0))
			throw ConfigError("train: train_frac must lie in (0, 1)");
	}
	double TrainConfig::learning_rate(std::size_t epoch) const
	{
		return lr0 * std::pow(decay_gamma, static_cast<double>(epoch));
	}

	Tensor seg_loss(const Tensor &logits, std::span<const std::uint8_t> labels)
	{
		if (logits.rank() < 2)
			throw ShapeError("seg_loss: logits need a trailing class axis, got " + to_string(logits.shape()));
		const std::size_t C = logits.shape().back();
		const std::size_t pixels = logits.size() / C;
		if (labels.size() != pixels)
			throw ShapeError("seg_loss: " + std::to_string(labels.size()) + " labels for " + std::to_string(pixels) + " pixels");
		std::vector<std::size_t> rows(pixels), cols(pixels);
		for (std::size_t i = 0; i < pixels; i++)
		{
			if (labels[i] >= C)
				throw ConfigError("seg_loss: class index " + std::to_string(labels[i]) + " out of range for " + std::to_string(C) + " classes");
			rows[i] = i;
			cols[i] = labels[i];
		}
		const Tensor log_probs = ops::log_softmax(ops::reshape(logits, { pixels, C }), 1);
		return ops::scale(ops::reduce_mean(ops::take_elements(log_probs, rows, cols)), -1.0);
	}

	void adamw_step(std::span<double> params, std::span<const double> grads, AdamWMoments &state, std::size_t t, double lr, const AdamWHyper &hyper)
	{
		if (state.m.size() != params.size())
			state.m.assign(params.size(), 0.0);
		if (state.v.size() != params.size())
			state.v.assign(params.size(), 0.0);
		if (!grads.empty() && grads.size() != params.size())
			throw ShapeError("adamw_step: gradient size does not match parameters");
		const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(t));
		const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(t));
		for (std::size_t i = 0; i < params.size(); i++)
		{
			const double g = grads.empty() ? 0.0 : grads[i];
			params[i] -= lr * hyper.weight_decay * params[i];
			state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
			state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
			const double m_hat = state.m[i] / bc1;
			const double v_hat = state.v[i] / bc2;
			params[i] -= lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
		}
	}

	AdamW::AdamW(ParameterList params, AdamWHyper hyper) :
			m_params(std::move(params)),
			m_hyper(hyper),
			m_state(m_params.size())
	{
	}
	void AdamW::step(double lr)
	{
		m_t++;
		for (std::size_t i = 0; i < m_params.size(); i++)
		{
			Tensor p = m_params[i].tensor;
			adamw_step(p.mutable_data(), p.grad(), m_state[i], m_t, lr, m_hyper);
		}
	}
	void AdamW::zero_grad()
	{
		for (auto &p : m_params)
			p.tensor.zero_grad();
	}

	std::vector<std::size_t> route_indices(const Backbone &model, std::span<const Sample* const> samples)
	{
		std::vector<std::size_t> route;
		route.reserve(samples.size());
		for (const Sample *s : samples)
			route.push_back(model.route_index(s->attr));
		return route;
	}

	std::vector<std::uint8_t> stack_labels(std::span<const Sample* const> samples)
	{
		std::vector<std::uint8_t> labels;
		for (const Sample *s : samples)
			labels.insert(labels.end(), s->mask.values.begin(), s->mask.values.end());
		return labels;
	}

	TrainResult train(Backbone &model, const Dataset &train_set, const Dataset &held_out, const TrainConfig &config)
	{
		config.validate();
		if (train_set.size() == 0)
			throw ConfigError("train: empty training set");
		for (const auto &s : train_set.samples)
			model.route_index(s.attr);

		const ParameterList params = model.parameters();
		AdamW optimizer(params, AdamWHyper { config.beta1, config.beta2, config.eps, config.weight_decay });
		TrainResult result;
		result.rng = Rng(derive_seed(config.seed, train_noise_stream));

		double best_dice = -1.0;
		std::vector<std::vector<double>> best_values;
		for (std::size_t epoch = 0; epoch < config.epochs; epoch++)
		{
			const double lr = config.learning_rate(epoch);
			double loss_sum = 0.0;
			std::size_t batch_count = 0;
			for (const auto &batch : batches(train_set, config.batch_size, config.seed, epoch))
			{
				const Tensor images = stack_images(batch);
				const std::vector<std::size_t> route = route_indices(model, batch);
				const std::vector<std::uint8_t> labels = stack_labels(batch);
				optimizer.zero_grad();
				double loss_value = 0.0;
				const std::string where = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_count);
				try
				{
					Tape tape;
					const Tensor logits = model.forward_batch(images, route, true, result.rng);
					const Tensor loss = seg_loss(logits, labels);
					loss_value = loss.item();
					if (!std::isfinite(loss_value))
						throw NumericalError("non-finite loss");
					tape.backward(loss);
				}
				catch (const NumericalError &e)
				{
					throw NumericalError("train: " + std::string(e.what()) + " at " + where);
				}
				optimizer.step(lr);
				loss_sum += loss_value;
				batch_count++;
			}

			EpochLog row;
			row.epoch = epoch;
			row.lr = lr;
			row.loss = loss_sum / static_cast<double>(batch_count);
			if (held_out.size() > 0)
			{
				const Evaluation eval = evaluate(model, held_out);
				row.dice_overall = eval.report().overall.dice;
				for (const auto &attr : held_out.attributes)
				{
					double d = 0.0;
					for (const auto &[label, g] : eval.report().per_attr)
						if (label == attr)
							d = g.dice;
					row.dice_per_attr.push_back(d);
				}
			}
			result.log.push_back(row);
			result.epochs_run = epoch + 1;
			if (config.select_best && held_out.size() > 0 && row.dice_overall > best_dice)
			{
				best_dice = row.dice_overall;
				result.best_epoch = epoch;
				best_values = snapshot(params);
			}
		}
		if (config.select_best && !best_values.empty())
			restore(params, best_values);
		else
			result.best_epoch = config.epochs == 0 ? 0 : config.epochs - 1;
		optimizer.zero_grad();
		return result;
	}

	void write_train_log_csv(const std::filesystem::path &path, std::span<const EpochLog> log, std::span<const std::string> attrs)
	{
		std::string out = "epoch,lr,loss,dice_overall";
		for (const auto &a : attrs)
			out += ",dice_" + a;
		out += "\n";
		for (const auto &row : log)
		{
			out += std::to_string(row.epoch) + "," + format_double(row.lr) + "," + format_double(row.loss) + "," + format_double(row.dice_overall);
			for (std::size_t i = 0; i < attrs.size(); i++)
				out += "," + format_double(i < row.dice_per_attr.size() ? row.dice_per_attr[i] : 0.0);
			out += "\n";
		}
		csv::write_text(path, out);
	}

	Evaluation evaluate(const Backbone &model, const Dataset &data, std::size_t batch_size)
	{
		if (data.size() == 0)
			throw ConfigError("evaluate: empty dataset");
		const BackboneConfig &c = model.config();
		const std::size_t K = c.n_classes;
		Evaluation result;
		for (std::size_t k = 1; k < K; k++)
			result.classes.push_back(ClassEvaluation { k, { }, { } });

		Rng unused(0);
		for (std::size_t start = 0; start < data.size(); start += batch_size)
		{
			std::vector<const Sample*> batch;
			for (std::size_t i = start; i < std::min(data.size(), start + batch_size); i++)
				batch.push_back(&data.samples[i]);
			const std::vector<std::size_t> route = route_indices(model, batch);
			const Tensor logits = model.forward_batch(stack_images(batch), route, false, unused);
			const std::size_t pixels = c.image_h * c.image_w;
			for (std::size_t b = 0; b < batch.size(); b++)
			{
				const Sample &s = *batch[b];
				std::vector<std::uint8_t> argmax(pixels);
				for (std::size_t p = 0; p < pixels; p++)
				{
					const auto row = logits.data().subspan((b * pixels + p) * K, K);
					argmax[p] = static_cast<std::uint8_t>(std::max_element(row.begin(), row.end()) - row.begin());
				}
				for (auto &cls : result.classes)
				{
					BinaryMask pred(c.image_h, c.image_w), truth(c.image_h, c.image_w);
					for (std::size_t p = 0; p < pixels; p++)
					{
						pred.values[p] = argmax[p] == cls.class_index;
						truth.values[p] = s.mask.values[p] == cls.class_index;
					}
					cls.scores.push_back(SampleScore { s.id, s.attr, dice(pred, truth), iou(pred, truth) });
				}
			}
		}
		for (auto &cls : result.classes)
			cls.report = aggregate(cls.scores, data.attributes);
		return result;
	}

	ModelGradCheck ModelGradCheck::tiny()
	{
		ModelGradCheck check;
		BackboneConfig &m = check.model;
		m.image_h = 8;
		m.image_w = 8;
		m.patch_size = 4;
		m.d_model = 8;
		m.mlp_hidden = 8;
		m.n_blocks = 2;
		m.placement = { 0 };
		m.mode = ModelMode::dmoe;
		m.dmoe.n_experts = 4;
		m.dmoe.top_k = 2;
		m.dmoe.d_hidden = 8;
		m.dmoe.dropout_p = 0.0;
		check.attributes = { "A", "B" };
		return check;
	}

	GradCheckReport check_model_gradients(const ModelGradCheck &check)
	{
		Backbone model(check.model, check.attributes, check.seed);
		// Routers start at zero; move them off it so every gate sees distinct scores.
		Rng perturb(derive_seed(check.seed, 0x6C));
		for (auto &layer : model.dmoe_layers())
			for (std::size_t a = 0; a < layer.router().size(); a++)
			{
				RouterWeights &r = layer.router().at(a);
				for (double &v : r.w.mutable_data())
					v = perturb.uniform(-0.5, 0.5);
				for (double &v : r.w_noise.mutable_data())
					v = perturb.uniform(-0.5, 0.5);
			}

		DatasetSpec spec;
		spec.n_samples = check.batch;
		spec.image_h = check.model.image_h;
		spec.image_w = check.model.image_w;
		spec.seed = check.seed;
		spec.attrs.clear();
		for (const auto &label : check.attributes)
		{
			AttributeProfile p;
			p.label = label;
			p.proportion = 1.0 / static_cast<double>(check.attributes.size());
			p.radius_mean = static_cast<double>(std::min(spec.image_h, spec.image_w)) / 5.0;
			p.radius_std = 0.0;
			spec.attrs.push_back(p);
		}
		const Dataset data = generate(spec);
		std::vector<const Sample*> batch;
		for (const auto &s : data.samples)
			batch.push_back(&s);
		const Tensor images = stack_images(batch);
		const std::vector<std::size_t> route = route_indices(model, batch);
		const std::vector<std::uint8_t> labels = stack_labels(batch);

		const auto loss_fn = [&]()
		{
			Rng noise(derive_seed(check.seed, train_noise_stream));
			return seg_loss(model.forward_batch(images, route, true, noise), labels);
		};
		return grad_check(loss_fn, model.parameters(), check.options);
	}
}
