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

#ifndef DMOE_DATA_HPP_
#define DMOE_DATA_HPP_

#include <dmoe/mask.hpp>
#include <dmoe/tensor.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dmoe
{
	/**
	 * Shape distribution of one attribute subgroup. Each image holds
	 * blob_count Gaussian blobs of the given radius and contrast over a noisy
	 * background; the target mask covers every pixel within target_margin * radius
	 * of a blob centre. Subgroups with different margins delineate the same
	 * visual appearance differently, so the label is not recoverable from the
	 * pixels alone.
	 */
	struct AttributeProfile
	{
			std::string label;
			double proportion = 0.0;
			double radius_mean = 4.0;
			double radius_std = 1.0;
			std::size_t blob_count = 1;
			double contrast = 0.6;
			double target_margin = 1.0;
	};

	struct DatasetSpec
	{
			std::size_t n_samples = 100;
			std::size_t image_h = 32;
			std::size_t image_w = 32;
			double background = 0.2;
			double noise_std = 0.05;
			std::vector<AttributeProfile> attrs = default_profiles();
			std::uint64_t seed = 0;

			/// Three subgroups with a 9 / 15 / 76 percent split.
			static std::vector<AttributeProfile> default_profiles();
			std::vector<std::string> labels() const;
			void validate() const;
	};

	struct Sample
	{
			std::string id;
			Tensor image; // [H, W, 1], values in [0, 1], exactly representable as float
			BinaryMask mask;
			std::string attr;
	};

	struct Dataset
	{
			std::vector<std::string> attributes;
			std::vector<Sample> samples;

			std::size_t size() const noexcept
			{
				return samples.size();
			}
			/// Sample count per attribute, in vocabulary order.
			std::vector<std::size_t> counts() const;
	};

	/// Integer apportionment of total by fractions: floors plus the largest remainders (ties to the lower index).
	std::vector<std::size_t> largest_remainder(std::span<const double> fractions, std::size_t total);

	Dataset generate(const DatasetSpec &spec);

	/**
	 * On-disk layout:
	 *   manifest.csv     id,image_path,mask_path,attr (paths relative to the directory)
	 *   attributes.txt   attribute vocabulary, one label per line
	 *   images/<id>.dseg "DSEG1\0", u32 LE height, width, channels, f32 LE pixels
	 *   masks/<id>.dmsk  "DMSK1\0", u32 LE height, width, u8 pixels in {0, 1}
	 */
	void save(const Dataset &dataset, const std::filesystem::path &dir);
	Dataset load(const std::filesystem::path &dir);

	std::vector<std::uint8_t> encode_image(const Tensor &image);
	Tensor decode_image(std::span<const std::uint8_t> bytes, const std::string &name);
	std::vector<std::uint8_t> encode_mask(const BinaryMask &mask);
	BinaryMask decode_mask(std::span<const std::uint8_t> bytes, const std::string &name);

	/// Stratified by attribute; both parts keep the original sample order.
	std::pair<Dataset, Dataset> split(const Dataset &dataset, double train_frac, std::uint64_t seed);

	/// Seeded shuffle of [0, n) cut into batches; the final partial batch is kept.
	std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size, std::uint64_t seed, std::size_t epoch);
	std::vector<std::vector<const Sample*>> batches(const Dataset &dataset, std::size_t batch_size, std::uint64_t seed, std::size_t epoch);

	/// [B, H, W, C] stack of sample images.
	Tensor stack_images(std::span<const Sample* const> samples);
}

#endif /* DMOE_DATA_HPP_ */
