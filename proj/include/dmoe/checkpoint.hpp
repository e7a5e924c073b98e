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

#ifndef DMOE_CHECKPOINT_HPP_
#define DMOE_CHECKPOINT_HPP_

#include <dmoe/backbone.hpp>
#include <dmoe/rng.hpp>
#include <dmoe/training.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dmoe
{
	/**
	 * Checkpoint layout: a JSON header (parameter index name -> offset/shape,
	 * config echo, epoch, rng state), one NUL byte, then every parameter value as
	 * little-endian f64 in index order.
	 */
	struct ParameterEntry
	{
			std::string name;
			std::size_t offset = 0;
			Shape shape;
	};

	struct CheckpointFile
	{
			std::vector<ParameterEntry> index;
			std::vector<double> payload;
			BackboneConfig model;
			std::vector<std::string> attributes;
			TrainConfig train;
			std::size_t epoch = 0;
			std::string rng_state;
	};

	std::vector<std::uint8_t> serialize_checkpoint(const Backbone &model, const TrainConfig &train, std::size_t epoch, const Rng &rng);
	CheckpointFile parse_checkpoint(const std::vector<std::uint8_t> &bytes);

	void save_checkpoint(const std::filesystem::path &path, const Backbone &model, const TrainConfig &train, std::size_t epoch, const Rng &rng);
	CheckpointFile read_checkpoint(const std::filesystem::path &path);

	/// Rebuilds the model; outputs match the saved model bit for bit.
	Backbone restore_model(const CheckpointFile &file);

	/// FNV-1a 64 over the parameter index and payload, ignoring the config echo.
	std::uint64_t parameter_hash(const CheckpointFile &file);
}

#endif /* DMOE_CHECKPOINT_HPP_ */
