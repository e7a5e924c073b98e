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

#ifndef DMOE_TRAINING_HPP_
#define DMOE_TRAINING_HPP_

#include <dmoe/backbone.hpp>
#include <dmoe/data.hpp>
#include <dmoe/grad_check.hpp>
#include <dmoe/metrics.hpp>
#include <dmoe/rng.hpp>
#include <dmoe/tensor.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace dmoe
{
	struct TrainConfig
	{
			double lr0 = 1e-3;
			double decay_gamma = 0.98; // per-epoch learning-rate multiplier
			std::size_t epochs = 30;
			std::size_t batch_size = 16;
			double weight_decay = 1e-2;
			double beta1 = 0.9;
			double beta2 = 0.999;
			double eps = 1e-8;
			std::uint64_t seed = 0;
			/// Fraction of a dataset used for training when a held-out split is carved from it.
			double train_frac = 0.8;
			/// Keep the parameters of the epoch with the best held-out overall Dice.
			bool select_best = true;

			void validate() const;
			double learning_rate(std::size_t epoch) const;
	};

	/// Mean negative log-likelihood of the true class per pixel. logits [..., C], labels one per pixel.
	Tensor seg_loss(const Tensor &logits, std::span<const std::uint8_t> labels);

	struct AdamWHyper
	{
			double beta1 = 0.9;
			double beta2 = 0.999;
			double eps = 1e-8;
			double weight_decay = 0.0;
	};
	struct AdamWMoments
	{
			std::vector<double> m;
			std::vector<double> v;
	};

	/// One AdamW update at step t >= 1: decoupled decay first, then the bias-corrected Adam step.
	void adamw_step(std::span<double> params, std::span<const double> grads, AdamWMoments &state, std::size_t t, double lr, const AdamWHyper &hyper);

	class AdamW
	{
		public:
			AdamW(ParameterList params, AdamWHyper hyper);
			/// Applies one update from the accumulated gradients; missing gradients count as zero.
			void step(double lr);
			void zero_grad();
			std::size_t steps() const noexcept
			{
				return m_t;
			}
		private:
			ParameterList m_params;
			AdamWHyper m_hyper;
			std::vector<AdamWMoments> m_state;
			std::size_t m_t = 0;
	};

	struct EpochLog
	{
			std::size_t epoch = 0;
			double lr = 0.0;
			double loss = 0.0;
			double dice_overall = 0.0;
			std::vector<double> dice_per_attr; // in held-out vocabulary order
	};

	struct TrainResult
	{
			std::vector<EpochLog> log;
			std::size_t best_epoch = 0;
			std::size_t epochs_run = 0;
			Rng rng;
	};

	/**
	 * Trains model in place with AdamW under an exponentially decaying learning
	 * rate, evaluating held_out after every epoch. Fully determined by
	 * (config, model initialization, dataset contents). A non-finite loss aborts
	 * with NumericalError naming the epoch and batch.
	 */
	TrainResult train(Backbone &model, const Dataset &train_set, const Dataset &held_out, const TrainConfig &config);

	void write_train_log_csv(const std::filesystem::path &path, std::span<const EpochLog> log, std::span<const std::string> attrs);

	struct ClassEvaluation
	{
			std::size_t class_index = 1;
			std::vector<SampleScore> scores;
			SubgroupReport report;
	};
	struct Evaluation
	{
			/// One entry per foreground class 1..C-1.
			std::vector<ClassEvaluation> classes;

			const std::vector<SampleScore>& scores() const
			{
				return classes.front().scores;
			}
			const SubgroupReport& report() const
			{
				return classes.front().report;
			}
	};

	/// Deterministic inference (no noise, no dropout); argmax over class logits gives the predicted masks.
	Evaluation evaluate(const Backbone &model, const Dataset &data, std::size_t batch_size = 32);

	/// Router index per sample; throws RoutingError for labels unknown to a dmoe model.
	std::vector<std::size_t> route_indices(const Backbone &model, std::span<const Sample* const> samples);
	/// Finite-difference check of a whole network on a small batch with noise and dropout frozen.
	struct ModelGradCheck
	{
			BackboneConfig model;
			std::vector<std::string> attributes;
			std::size_t batch = 4;
			std::uint64_t seed = 1;
			GradCheckOptions options;

			/// d_model 8, 4 experts, top-2, 8x8 images, two attributes.
			static ModelGradCheck tiny();
	};
	GradCheckReport check_model_gradients(const ModelGradCheck &check);

	/// Concatenated per-pixel class labels of the masks.
	std::vector<std::uint8_t> stack_labels(std::span<const Sample* const> samples);
}

#endif /* DMOE_TRAINING_HPP_ */
