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

#ifndef DMOE_RUN_CONFIG_HPP_
#define DMOE_RUN_CONFIG_HPP_

#include <dmoe/backbone.hpp>
#include <dmoe/data.hpp>
#include <dmoe/training.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace dmoe
{
	/**
	 * Merged run settings. Config files hold `key = value` lines with `#`
	 * comments and dotted keys:
	 *
	 *   seed                       sets data.seed and train.seed
	 *   data.n_samples data.image_h data.image_w data.background data.noise_std data.seed
	 *   data.attrs = A,B,C         replaces the subgroup list
	 *   data.attr.<label>.{proportion,radius_mean,radius_std,blob_count,contrast,target_margin}
	 *   model.{patch_size,d_model,mlp_hidden,n_blocks,n_classes,sharing,mode}
	 *   model.placement = encoder | decoder | all | comma-separated block indices
	 *   dmoe.{n_experts,top_k,d_hidden,dropout_p,noise_at_eval,activation}
	 *   train.{lr0,decay_gamma,epochs,batch_size,weight_decay,beta1,beta2,eps,seed,train_frac,select_best}
	 *
	 * Unknown keys are rejected with ConfigError.
	 */
	struct RunConfig
	{
			DatasetSpec data;
			BackboneConfig model;
			TrainConfig train;

			/// Applies one key; later calls override earlier ones.
			void set(const std::string &key, const std::string &value);
			/// Resolves derived fields (default placement for the block count) and validates.
			void finalize();
		private:
			std::optional<std::string> m_placement;
	};

	/// source names the origin in error messages.
	void apply_config_text(RunConfig &config, const std::string &text, const std::string &source);
	void apply_config_file(RunConfig &config, const std::filesystem::path &path);

	std::vector<std::size_t> parse_placement(const std::string &value, std::size_t n_blocks);
}

#endif /* DMOE_RUN_CONFIG_HPP_ */
