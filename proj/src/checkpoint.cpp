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

#include <dmoe/checkpoint.hpp>
#include <dmoe/errors.hpp>

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>

namespace dmoe
{
	using nlohmann::json;

	namespace
	{
		constexpr const char *format_tag = "dmoe-checkpoint-1";

		json model_json(const BackboneConfig &c)
		{
			return json {
				{ "image_h", c.image_h }, { "image_w", c.image_w }, { "in_channels", c.in_channels },
				{ "patch_size", c.patch_size }, { "d_model", c.d_model }, { "mlp_hidden", c.mlp_hidden },
				{ "n_blocks", c.n_blocks }, { "n_classes", c.n_classes }, { "placement", c.placement },
				{ "sharing", to_string(c.sharing) }, { "mode", to_string(c.mode) },
				{ "n_experts", c.dmoe.n_experts }, { "top_k", c.dmoe.top_k }, { "d_hidden", c.dmoe.d_hidden },
				{ "dropout_p", c.dmoe.dropout_p }, { "noise_at_eval", c.dmoe.noise_at_eval },
				{ "activation", c.dmoe.activation == ExpertActivation::relu ? "relu" : "identity" }
			};
		}
		BackboneConfig model_from_json(const json &j)
		{
			BackboneConfig c;
			j.at("image_h").get_to(c.image_h);
			j.at("image_w").get_to(c.image_w);
			j.at("in_channels").get_to(c.in_channels);
			j.at("patch_size").get_to(c.patch_size);
			j.at("d_model").get_to(c.d_model);
			j.at("mlp_hidden").get_to(c.mlp_hidden);
			j.at("n_blocks").get_to(c.n_blocks);
			j.at("n_classes").get_to(c.n_classes);
			j.at("placement").get_to(c.placement);
			c.sharing = parse_sharing(j.at("sharing").get<std::string>());
			c.mode = parse_mode(j.at("mode").get<std::string>());
			j.at("n_experts").get_to(c.dmoe.n_experts);
			j.at("top_k").get_to(c.dmoe.top_k);
			j.at("d_hidden").get_to(c.dmoe.d_hidden);
			j.at("dropout_p").get_to(c.dmoe.dropout_p);
			j.at("noise_at_eval").get_to(c.dmoe.noise_at_eval);
			c.dmoe.activation = j.at("activation").get<std::string>() == "identity" ? ExpertActivation::identity : ExpertActivation::relu;
			return c;
		}
		json train_json(const TrainConfig &t)
		{
			return json {
				{ "lr0", t.lr0 }, { "decay_gamma", t.decay_gamma }, { "epochs", t.epochs }, { "batch_size", t.batch_size },
				{ "weight_decay", t.weight_decay }, { "beta1", t.beta1 }, { "beta2", t.beta2 }, { "eps", t.eps },
				{ "seed", t.seed }, { "train_frac", t.train_frac }, { "select_best", t.select_best }
			};
		}
		TrainConfig train_from_json(const json &j)
		{
			TrainConfig t;
			j.at("lr0").get_to(t.lr0);
			j.at("decay_gamma").get_to(t.decay_gamma);
			j.at("epochs").get_to(t.epochs);
			j.at("batch_size").get_to(t.batch_size);
			j.at("weight_decay").get_to(t.weight_decay);
			j.at("beta1").get_to(t.beta1);
			j.at("beta2").get_to(t.beta2);
			j.at("eps").get_to(t.eps);
			j.at("seed").get_to(t.seed);
			j.at("train_frac").get_to(t.train_frac);
			j.at("select_best").get_to(t.select_best);
			return t;
		}

		void fnv(std::uint64_t &h, const void *data, std::size_t n)
		{
			const auto *p = static_cast<const unsigned char*>(data);
			for (std::size_t i = 0; i < n; i++)
			{
				h ^= p[i];
				h *= 0x100000001b3ULL;
			}
		}
	}

	std::vector<std::uint8_t> serialize_checkpoint(const Backbone &model, const TrainConfig &train, std::size_t epoch, const Rng &rng)
	{
		json index = json::array();
		std::vector<double> payload;
		for (const auto &p : model.parameters())
		{
			index.push_back(json { { "name", p.name }, { "offset", payload.size() }, { "shape", p.tensor.shape() } });
			payload.insert(payload.end(), p.tensor.data().begin(), p.tensor.data().end());
		}
		const json header {
			{ "format", format_tag }, { "parameters", index }, { "count", payload.size() },
			{ "model", model_json(model.config()) }, { "attributes", model.attributes() },
			{ "train", train_json(train) }, { "epoch", epoch }, { "rng", rng.state() }
		};
		const std::string text = header.dump();
		std::vector<std::uint8_t> bytes(text.begin(), text.end());
		bytes.push_back(0);
		for (double v : payload)
		{
			const auto bits = std::bit_cast<std::uint64_t>(v);
			for (int b = 0; b < 8; b++)
				bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
		}
		return bytes;
	}

	CheckpointFile parse_checkpoint(const std::vector<std::uint8_t> &bytes)
	{
		const auto nul = std::find(bytes.begin(), bytes.end(), std::uint8_t { 0 });
		if (nul == bytes.end())
			throw FormatError("checkpoint: missing header terminator");
		CheckpointFile file;
		try
		{
			const json header = json::parse(bytes.begin(), nul);
			if (header.at("format").get<std::string>() != format_tag)
				throw FormatError("checkpoint: unknown format tag");
			for (const auto &e : header.at("parameters"))
				file.index.push_back(ParameterEntry { e.at("name").get<std::string>(), e.at("offset").get<std::size_t>(), e.at("shape").get<Shape>() });
			file.model = model_from_json(header.at("model"));
			header.at("attributes").get_to(file.attributes);
			file.train = train_from_json(header.at("train"));
			header.at("epoch").get_to(file.epoch);
			header.at("rng").get_to(file.rng_state);
			const std::size_t count = header.at("count").get<std::size_t>();
			const std::size_t available = static_cast<std::size_t>(bytes.end() - nul - 1);
			if (available != count * 8)
				throw FormatError("checkpoint: payload holds " + std::to_string(available) + " bytes, expected " + std::to_string(count * 8));
			file.payload.resize(count);
			auto it = nul + 1;
			for (std::size_t i = 0; i < count; i++)
			{
				std::uint64_t bits = 0;
				for (int b = 0; b < 8; b++)
					bits |= static_cast<std::uint64_t>(*it++) << (8 * b);
				file.payload[i] = std::bit_cast<double>(bits);
			}
		}
		catch (const json::exception &e)
		{
			throw FormatError(std::string("checkpoint: malformed header: ") + e.what());
		}
		return file;
	}

	void save_checkpoint(const std::filesystem::path &path, const Backbone &model, const TrainConfig &train, std::size_t epoch, const Rng &rng)
	{
		if (path.has_parent_path())
			std::filesystem::create_directories(path.parent_path());
		const auto bytes = serialize_checkpoint(model, train, epoch, rng);
		std::ofstream out(path, std::ios::binary);
		if (!out)
			throw FormatError("cannot write checkpoint " + path.string());
		out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
	}

	CheckpointFile read_checkpoint(const std::filesystem::path &path)
	{
		std::ifstream in(path, std::ios::binary);
		if (!in)
			throw FormatError("cannot read checkpoint " + path.string());
		const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
		try
		{
			return parse_checkpoint(bytes);
		}
		catch (const FormatError &e)
		{
			throw FormatError(path.string() + ": " + e.what());
		}
	}

	Backbone restore_model(const CheckpointFile &file)
	{
		Backbone model(file.model, file.attributes, 0);
		const ParameterList params = model.parameters();
		if (params.size() != file.index.size())
			throw FormatError("checkpoint: parameter count does not match the model");
		for (std::size_t i = 0; i < params.size(); i++)
		{
			const auto &entry = file.index[i];
			Tensor t = params[i].tensor;
			if (entry.name != params[i].name || entry.shape != t.shape())
				throw FormatError("checkpoint: parameter " + entry.name + " " + to_string(entry.shape) + " does not match " + params[i].name + " " + to_string(t.shape()));
			if (entry.offset + t.size() > file.payload.size())
				throw FormatError("checkpoint: parameter " + entry.name + " runs past the payload");
			std::copy_n(file.payload.begin() + static_cast<std::ptrdiff_t>(entry.offset), t.size(), t.mutable_data().begin());
		}
		return model;
	}

	std::uint64_t parameter_hash(const CheckpointFile &file)
	{
		std::uint64_t h = 0xcbf29ce484222325ULL;
		for (const auto &e : file.index)
		{
			fnv(h, e.name.data(), e.name.size());
			fnv(h, &e.offset, sizeof e.offset);
			for (std::size_t d : e.shape)
				fnv(h, &d, sizeof d);
		}
		fnv(h, file.payload.data(), file.payload.size() * sizeof(double));
		return h;
	}
}
