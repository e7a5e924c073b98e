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

#include <dmoe/data.hpp>
#include <dmoe/csv.hpp>
#include <dmoe/errors.hpp>
#include <dmoe/rng.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

namespace dmoe
{
	namespace
	{
		constexpr char image_magic[6] = { 'D', 'S', 'E', 'G', '1', '\0' };
		constexpr char mask_magic[6] = { 'D', 'M', 'S', 'K', '1', '\0' };
		constexpr std::uint64_t attr_shuffle_stream = 0xA77Bull;

		void put_u32(std::vector<std::uint8_t> &out, std::uint32_t v)
		{
			for (int i = 0; i < 4; i++)
				out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
		}
		std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t offset)
		{
			std::uint32_t v = 0;
			for (int i = 0; i < 4; i++)
				v |= static_cast<std::uint32_t>(in[offset + i]) << (8 * i);
			return v;
		}

		std::vector<std::uint8_t> read_file(const std::filesystem::path &path)
		{
			std::ifstream in(path, std::ios::binary);
			if (!in)
				throw FormatError("cannot open " + path.string());
			return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
		}
		void write_file(const std::filesystem::path &path, std::span<const std::uint8_t> bytes)
		{
			std::ofstream out(path, std::ios::binary);
			out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
			if (!out)
				throw FormatError("cannot write " + path.string());
		}

		void check_magic(std::span<const std::uint8_t> bytes, const char (&magic)[6], const std::string &name)
		{
			if (bytes.size() < 6 || std::memcmp(bytes.data(), magic, 6) != 0)
				throw FormatError(name + ": bad magic bytes");
		}

		void shuffle(std::vector<std::size_t> &v, Rng &rng)
		{
			for (std::size_t i = v.size(); i > 1; i--)
				std::swap(v[i - 1], v[rng.index(i)]);
		}

		Sample generate_sample(const DatasetSpec &spec, const AttributeProfile &profile, std::size_t index)
		{
			Rng rng(derive_seed(spec.seed, index));
			const std::size_t H = spec.image_h, W = spec.image_w;
			for (int attempt = 0; attempt < 100; attempt++)
			{
				struct Blob
				{
						double cy, cx, r;
				};
				std::vector<Blob> blobs;
				for (std::size_t b = 0; b < profile.blob_count; b++)
				{
					const double r = std::max(1.0, profile.radius_mean + profile.radius_std * rng.normal());
					const double cy = rng.uniform(0.2 * static_cast<double>(H), 0.8 * static_cast<double>(H));
					const double cx = rng.uniform(0.2 * static_cast<double>(W), 0.8 * static_cast<double>(W));
					blobs.push_back( { cy, cx, r });
				}
				std::vector<double> pixels(H * W);
				BinaryMask mask(H, W);
				for (std::size_t y = 0; y < H; y++)
					for (std::size_t x = 0; x < W; x++)
					{
						double v = spec.background;
						for (const Blob &b : blobs)
						{
							const double dy = static_cast<double>(y) + 0.5 - b.cy;
							const double dx = static_cast<double>(x) + 0.5 - b.cx;
							const double d2 = dy * dy + dx * dx;
							v += profile.contrast * std::exp(-d2 / (2.0 * b.r * b.r));
							const double reach = profile.target_margin * b.r;
							if (d2 < reach * reach)
								mask.at(y, x) = 1;
						}
						v += spec.noise_std * rng.normal();
						pixels[y * W + x] = static_cast<double>(static_cast<float>(std::clamp(v, 0.0, 1.0)));
					}
				if (mask.count() == 0)
					continue;
				std::ostringstream id;
				id << 's' << std::setw(5) << std::setfill('0') << index;
				return Sample { id.str(), Tensor( { H, W, 1 }, std::move(pixels)), std::move(mask), profile.label };
			}
			throw ConfigError("generate: could not draw a nonempty mask for attribute '" + profile.label + "'");
		}
	}

	std::vector<AttributeProfile> DatasetSpec::default_profiles()
	{
		return {
			AttributeProfile { "A", 0.09, 4.5, 1.0, 1, 0.6, 1.6 },
			AttributeProfile { "B", 0.15, 4.0, 1.0, 1, 0.6, 1.25 },
			AttributeProfile { "C", 0.76, 3.5, 1.0, 1, 0.6, 0.9 } };
	}
	std::vector<std::string> DatasetSpec::labels() const
	{
		std::vector<std::string> result;
		for (const auto &a : attrs)
			result.push_back(a.label);
		return result;
	}
	void DatasetSpec::validate() const
	{
		if (attrs.empty())
			throw ConfigError("dataset spec: no attributes");
		if (image_h == 0 || image_w == 0)
			throw ConfigError("dataset spec: image size must be positive");
		std::set<std::string> labels;
		double total = 0.0;
		for (const auto &a : attrs)
		{
			if (a.label.empty() || a.label.find_first_of(",\n\r") != std::string::npos)
				throw ConfigError("dataset spec: invalid attribute label '" + a.label + "'");
			if (!labels.insert(a.label).second)
				throw ConfigError("dataset spec: duplicate attribute '" + a.label + "'");
			if (!(a.proportion > 0.0))
				throw ConfigError("dataset spec: proportion of '" + a.label + "' must be positive");
			if (!(a.radius_mean > 0.0) || a.radius_std < 0.0)
				throw ConfigError("dataset spec: radii of '" + a.label + "' must be positive");
			if (a.blob_count == 0 || !(a.target_margin > 0.0))
				throw ConfigError("dataset spec: '" + a.label + "' needs at least one blob and a positive target margin");
			total += a.proportion;
		}
		if (std::abs(total - 1.0) > 1e-9)
			throw ConfigError("dataset spec: proportions sum to " + std::to_string(total) + ", expected 1");
		if (noise_std < 0.0)
			throw ConfigError("dataset spec: noise_std must be nonnegative");
	}

	std::vector<std::size_t> Dataset::counts() const
	{
		std::vector<std::size_t> result(attributes.size(), 0);
		for (const auto &s : samples)
		{
			const auto it = std::find(attributes.begin(), attributes.end(), s.attr);
			if (it != attributes.end())
				result[static_cast<std::size_t>(it - attributes.begin())]++;
		}
		return result;
	}

	std::vector<std::size_t> largest_remainder(std::span<const double> fractions, std::size_t total)
	{
		std::vector<std::size_t> counts(fractions.size());
		std::vector<double> remainders(fractions.size());
		std::size_t assigned = 0;
		for (std::size_t i = 0; i < fractions.size(); i++)
		{
			const double quota = fractions[i] * static_cast<double>(total);
			counts[i] = static_cast<std::size_t>(std::floor(quota));
			remainders[i] = quota - static_cast<double>(counts[i]);
			assigned += counts[i];
		}
		std::vector<std::size_t> order(fractions.size());
		std::iota(order.begin(), order.end(), std::size_t { 0 });
		std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b)
		{	return remainders[a] > remainders[b];});
		for (std::size_t i = 0; assigned < total && i < order.size(); i++, assigned++)
			counts[order[i]]++;
		return counts;
	}

	Dataset generate(const DatasetSpec &spec)
	{
		spec.validate();
		std::vector<double> fractions;
		for (const auto &a : spec.attrs)
			fractions.push_back(a.proportion);
		const std::vector<std::size_t> counts = largest_remainder(fractions, spec.n_samples);
		for (std::size_t i = 0; i < counts.size(); i++)
			if (counts[i] == 0)
				throw ConfigError("generate: n_samples=" + std::to_string(spec.n_samples) + " leaves attribute '" + spec.attrs[i].label + "' without samples");

		std::vector<std::size_t> assignment;
		for (std::size_t i = 0; i < counts.size(); i++)
			assignment.insert(assignment.end(), counts[i], i);
		Rng rng(derive_seed(spec.seed, attr_shuffle_stream));
		shuffle(assignment, rng);

		Dataset dataset;
		dataset.attributes = spec.labels();
		dataset.samples.reserve(spec.n_samples);
		for (std::size_t i = 0; i < assignment.size(); i++)
			dataset.samples.push_back(generate_sample(spec, spec.attrs[assignment[i]], i));
		return dataset;
	}

	std::vector<std::uint8_t> encode_image(const Tensor &image)
	{
		if (image.rank() != 3)
			throw ShapeError("encode_image: expected [H, W, C], got " + to_string(image.shape()));
		std::vector<std::uint8_t> out(image_magic, image_magic + 6);
		put_u32(out, static_cast<std::uint32_t>(image.dim(0)));
		put_u32(out, static_cast<std::uint32_t>(image.dim(1)));
		put_u32(out, static_cast<std::uint32_t>(image.dim(2)));
		for (double v : image.data())
			put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
		return out;
	}

	Tensor decode_image(std::span<const std::uint8_t> bytes, const std::string &name)
	{
		check_magic(bytes, image_magic, name);
		if (bytes.size() < 18)
			throw FormatError(name + ": truncated header");
		const std::size_t h = get_u32(bytes, 6), w = get_u32(bytes, 10), c = get_u32(bytes, 14);
		const std::size_t n = h * w * c;
		if (bytes.size() != 18 + 4 * n)
			throw FormatError(name + ": expected " + std::to_string(18 + 4 * n) + " bytes, found " + std::to_string(bytes.size()));
		std::vector<double> data(n);
		for (std::size_t i = 0; i < n; i++)
			data[i] = static_cast<double>(std::bit_cast<float>(get_u32(bytes, 18 + 4 * i)));
		return Tensor( { h, w, c }, std::move(data));
	}

	std::vector<std::uint8_t> encode_mask(const BinaryMask &mask)
	{
		std::vector<std::uint8_t> out(mask_magic, mask_magic + 6);
		put_u32(out, static_cast<std::uint32_t>(mask.height));
		put_u32(out, static_cast<std::uint32_t>(mask.width));
		out.insert(out.end(), mask.values.begin(), mask.values.end());
		return out;
	}

	BinaryMask decode_mask(std::span<const std::uint8_t> bytes, const std::string &name)
	{
		check_magic(bytes, mask_magic, name);
		if (bytes.size() < 14)
			throw FormatError(name + ": truncated header");
		BinaryMask mask(get_u32(bytes, 6), get_u32(bytes, 10));
		if (bytes.size() != 14 + mask.values.size())
			throw FormatError(name + ": expected " + std::to_string(14 + mask.values.size()) + " bytes, found " + std::to_string(bytes.size()));
		for (std::size_t i = 0; i < mask.values.size(); i++)
		{
			if (bytes[14 + i] > 1)
				throw FormatError(name + ": mask value outside {0, 1}");
			mask.values[i] = bytes[14 + i];
		}
		return mask;
	}

	void save(const Dataset &dataset, const std::filesystem::path &dir)
	{
		std::filesystem::create_directories(dir / "images");
		std::filesystem::create_directories(dir / "masks");
		std::string manifest = "id,image_path,mask_path,attr\n";
		for (const auto &s : dataset.samples)
		{
			const std::string image_path = "images/" + s.id + ".dseg";
			const std::string mask_path = "masks/" + s.id + ".dmsk";
			write_file(dir / image_path, encode_image(s.image));
			write_file(dir / mask_path, encode_mask(s.mask));
			manifest += s.id + "," + image_path + "," + mask_path + "," + s.attr + "\n";
		}
		csv::write_text(dir / "manifest.csv", manifest);
		std::string vocabulary;
		for (const auto &a : dataset.attributes)
			vocabulary += a + "\n";
		csv::write_text(dir / "attributes.txt", vocabulary);
	}

	Dataset load(const std::filesystem::path &dir)
	{
		Dataset dataset;
		for (const auto &line : csv::read_lines(dir / "attributes.txt"))
			if (!line.empty())
				dataset.attributes.push_back(line);
		if (dataset.attributes.empty())
			throw FormatError((dir / "attributes.txt").string() + ": empty attribute vocabulary");

		const std::filesystem::path manifest_path = dir / "manifest.csv";
		const auto lines = csv::read_lines(manifest_path);
		if (lines.empty() || lines.front() != "id,image_path,mask_path,attr")
			throw FormatError(manifest_path.string() + ":1: expected header 'id,image_path,mask_path,attr'");
		for (std::size_t i = 1; i < lines.size(); i++)
		{
			if (lines[i].empty())
				continue;
			const std::string where = manifest_path.string() + ":" + std::to_string(i + 1);
			const auto f = csv::split(lines[i]);
			if (f.size() != 4)
				throw FormatError(where + ": expected 4 fields");
			if (std::find(dataset.attributes.begin(), dataset.attributes.end(), f[3]) == dataset.attributes.end())
				throw FormatError(where + ": attribute '" + f[3] + "' is not in attributes.txt");
			Sample s;
			s.id = f[0];
			s.attr = f[3];
			s.image = decode_image(read_file(dir / f[1]), (dir / f[1]).string());
			s.mask = decode_mask(read_file(dir / f[2]), (dir / f[2]).string());
			if (s.image.dim(0) != s.mask.height || s.image.dim(1) != s.mask.width)
				throw FormatError((dir / f[2]).string() + ": mask shape does not match image " + (dir / f[1]).string());
			dataset.samples.push_back(std::move(s));
		}
		return dataset;
	}

	std::pair<Dataset, Dataset> split(const Dataset &dataset, double train_frac, std::uint64_t seed)
	{
		if (!(train_frac > 0.0 && train_frac < 1.0))
			throw ConfigError("split: train fraction must lie in (0, 1)");
		const std::size_t G = dataset.attributes.size();
		std::vector<std::vector<std::size_t>> groups(G);
		for (std::size_t i = 0; i < dataset.samples.size(); i++)
		{
			const auto it = std::find(dataset.attributes.begin(), dataset.attributes.end(), dataset.samples[i].attr);
			if (it == dataset.attributes.end())
				throw RoutingError("split: sample '" + dataset.samples[i].id + "' has unknown attribute");
			groups[static_cast<std::size_t>(it - dataset.attributes.begin())].push_back(i);
		}
		// Quotas are apportioned across groups so the train total is round(frac * n).
		std::vector<double> fractions(G);
		for (std::size_t g = 0; g < G; g++)
			fractions[g] = static_cast<double>(groups[g].size()) / static_cast<double>(dataset.size());
		const std::size_t train_total = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(dataset.size())));
		const std::vector<std::size_t> quota = largest_remainder(fractions, train_total);

		std::vector<char> in_train(dataset.size(), 0);
		for (std::size_t g = 0; g < G; g++)
		{
			if (groups[g].empty())
				continue;
			if (quota[g] == 0 || quota[g] >= groups[g].size())
				throw ConfigError("split: attribute '" + dataset.attributes[g] + "' with " + std::to_string(groups[g].size()) + " samples is too small to stratify");
			Rng rng(derive_seed(seed, g));
			shuffle(groups[g], rng);
			for (std::size_t i = 0; i < quota[g]; i++)
				in_train[groups[g][i]] = 1;
		}
		std::pair<Dataset, Dataset> result;
		result.first.attributes = dataset.attributes;
		result.second.attributes = dataset.attributes;
		for (std::size_t i = 0; i < dataset.size(); i++)
			(in_train[i] ? result.first : result.second).samples.push_back(dataset.samples[i]);
		return result;
	}

	std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size, std::uint64_t seed, std::size_t epoch)
	{
		if (batch_size == 0)
			throw ConfigError("batches: batch size must be at least 1");
		std::vector<std::size_t> order(n);
		std::iota(order.begin(), order.end(), std::size_t { 0 });
		Rng rng(derive_seed(seed, 0xE0000000ull + epoch));
		shuffle(order, rng);
		std::vector<std::vector<std::size_t>> result;
		for (std::size_t start = 0; start < n; start += batch_size)
			result.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
		return result;
	}

	std::vector<std::vector<const Sample*>> batches(const Dataset &dataset, std::size_t batch_size, std::uint64_t seed, std::size_t epoch)
	{
		std::vector<std::vector<const Sample*>> result;
		for (const auto &indices : batch_indices(dataset.size(), batch_size, seed, epoch))
		{
			std::vector<const Sample*> batch;
			for (std::size_t i : indices)
				batch.push_back(&dataset.samples[i]);
			result.push_back(std::move(batch));
		}
		return result;
	}

	Tensor stack_images(std::span<const Sample* const> samples)
	{
		if (samples.empty())
			throw ShapeError("stack_images: empty batch");
		const Shape &first = samples.front()->image.shape();
		std::vector<double> data;
		data.reserve(samples.size() * samples.front()->image.size());
		for (const Sample *s : samples)
		{
			if (s->image.shape() != first)
				throw ShapeError("stack_images: image shapes differ within a batch");
			data.insert(data.end(), s->image.data().begin(), s->image.data().end());
		}
		return Tensor( { samples.size(), first[0], first[1], first[2] }, std::move(data));
	}
}
