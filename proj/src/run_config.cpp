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

#include <dmoe/run_config.hpp>
#include <dmoe/csv.hpp>
#include <dmoe/errors.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace dmoe
{
	namespace
	{
		std::string trim(const std::string &s)
		{
			const auto b = s.find_first_not_of(" \t\r");
			if (b == std::string::npos)
				return { };
			const auto e = s.find_last_not_of(" \t\r");
			return s.substr(b, e - b + 1);
		}

		double to_double(const std::string &key, const std::string &v)
		{
			try
			{
				return csv::parse_double(v, key);
			}
			catch (const FormatError &e)
			{
				throw ConfigError(e.what());
			}
		}
		std::size_t to_size(const std::string &key, const std::string &v)
		{
			try
			{
				return csv::parse_size(v, key);
			}
			catch (const FormatError &e)
			{
				throw ConfigError(e.what());
			}
		}
		bool to_bool(const std::string &key, const std::string &v)
		{
			if (v == "true" || v == "1")
				return true;
			if (v == "false" || v == "0")
				return false;
			throw ConfigError(key + ": expected true or false, got '" + v + "'");
		}

		AttributeProfile& profile(DatasetSpec &spec, const std::string &label)
		{
			for (auto &p : spec.attrs)
				if (p.label == label)
					return p;
			throw ConfigError("data.attr." + label + ": attribute not in data.attrs");
		}
	}

	std::vector<std::size_t> parse_placement(const std::string &value, std::size_t n_blocks)
	{
		if (value == "encoder")
			return encoder_blocks(n_blocks);
		if (value == "decoder")
			return decoder_blocks(n_blocks);
		if (value == "all")
		{
			std::vector<std::size_t> all(n_blocks);
			for (std::size_t i = 0; i < n_blocks; i++)
				all[i] = i;
			return all;
		}
		std::vector<std::size_t> blocks;
		if (value.empty() || value == "none")
			return blocks;
		for (const auto &part : csv::split(value))
			blocks.push_back(to_size("model.placement", trim(part)));
		return blocks;
	}

	void RunConfig::set(const std::string &key, const std::string &value)
	{
		auto &m = model;
		auto &d = model.dmoe;
		auto &t = train;
		if (key == "seed")
		{
			data.seed = to_size(key, value);
			train.seed = data.seed;
		}
		else if (key == "data.n_samples")
			data.n_samples = to_size(key, value);
		else if (key == "data.image_h")
			data.image_h = to_size(key, value);
		else if (key == "data.image_w")
			data.image_w = to_size(key, value);
		else if (key == "data.background")
			data.background = to_double(key, value);
		else if (key == "data.noise_std")
			data.noise_std = to_double(key, value);
		else if (key == "data.seed")
			data.seed = to_size(key, value);
		else if (key == "data.attrs")
		{
			const auto defaults = DatasetSpec::default_profiles();
			std::vector<AttributeProfile> attrs;
			for (const auto &part : csv::split(value))
			{
				AttributeProfile p;
				p.label = trim(part);
				for (const auto &dp : defaults)
					if (dp.label == p.label)
						p = dp;
				attrs.push_back(p);
			}
			data.attrs = std::move(attrs);
		}
		else if (key.rfind("data.attr.", 0) == 0)
		{
			const std::string rest = key.substr(10);
			const auto dot = rest.rfind('.');
			if (dot == std::string::npos)
				throw ConfigError("unknown config key '" + key + "'");
			AttributeProfile &p = profile(data, rest.substr(0, dot));
			const std::string field = rest.substr(dot + 1);
			if (field == "proportion")
				p.proportion = to_double(key, value);
			else if (field == "radius_mean")
				p.radius_mean = to_double(key, value);
			else if (field == "radius_std")
				p.radius_std = to_double(key, value);
			else if (field == "blob_count")
				p.blob_count = to_size(key, value);
			else if (field == "contrast")
				p.contrast = to_double(key, value);
			else if (field == "target_margin")
				p.target_margin = to_double(key, value);
			else
				throw ConfigError("unknown config key '" + key + "'");
		}
		else if (key == "model.patch_size")
			m.patch_size = to_size(key, value);
		else if (key == "model.d_model")
			m.d_model = to_size(key, value);
		else if (key == "model.mlp_hidden")
			m.mlp_hidden = to_size(key, value);
		else if (key == "model.n_blocks")
			m.n_blocks = to_size(key, value);
		else if (key == "model.n_classes")
			m.n_classes = to_size(key, value);
		else if (key == "model.sharing")
			m.sharing = parse_sharing(value);
		else if (key == "model.mode")
			m.mode = parse_mode(value);
		else if (key == "model.placement")
			m_placement = value;
		else if (key == "dmoe.n_experts")
			d.n_experts = to_size(key, value);
		else if (key == "dmoe.top_k")
			d.top_k = to_size(key, value);
		else if (key == "dmoe.d_hidden")
			d.d_hidden = to_size(key, value);
		else if (key == "dmoe.dropout_p")
			d.dropout_p = to_double(key, value);
		else if (key == "dmoe.noise_at_eval")
			d.noise_at_eval = to_bool(key, value);
		else if (key == "dmoe.activation")
		{
			if (value == "relu")
				d.activation = ExpertActivation::relu;
			else if (value == "identity")
				d.activation = ExpertActivation::identity;
			else
				throw ConfigError("dmoe.activation: expected relu or identity, got '" + value + "'");
		}
		else if (key == "train.lr0")
			t.lr0 = to_double(key, value);
		else if (key == "train.decay_gamma")
			t.decay_gamma = to_double(key, value);
		else if (key == "train.epochs")
			t.epochs = to_size(key, value);
		else if (key == "train.batch_size")
			t.batch_size = to_size(key, value);
		else if (key == "train.weight_decay")
			t.weight_decay = to_double(key, value);
		else if (key == "train.beta1")
			t.beta1 = to_double(key, value);
		else if (key == "train.beta2")
			t.beta2 = to_double(key, value);
		else if (key == "train.eps")
			t.eps = to_double(key, value);
		else if (key == "train.seed")
			t.seed = to_size(key, value);
		else if (key == "train.train_frac")
			t.train_frac = to_double(key, value);
		else if (key == "train.select_best")
			t.select_best = to_bool(key, value);
		else
			throw ConfigError("unknown config key '" + key + "'");
	}

	void RunConfig::finalize()
	{
		model.image_h = data.image_h;
		model.image_w = data.image_w;
		model.placement = parse_placement(m_placement.value_or("encoder"), model.n_blocks);
		data.validate();
		model.validate();
		train.validate();
	}

	void apply_config_text(RunConfig &config, const std::string &text, const std::string &source)
	{
		std::istringstream in(text);
		std::string line;
		std::size_t number = 0;
		while (std::getline(in, line))
		{
			number++;
			const auto hash = line.find('#');
			if (hash != std::string::npos)
				line.erase(hash);
			line = trim(line);
			if (line.empty())
				continue;
			const auto eq = line.find('=');
			if (eq == std::string::npos)
				throw ConfigError(source + ":" + std::to_string(number) + ": expected key = value");
			try
			{
				config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
			}
			catch (const ConfigError &e)
			{
				throw ConfigError(source + ":" + std::to_string(number) + ": " + e.what());
			}
		}
	}

	void apply_config_file(RunConfig &config, const std::filesystem::path &path)
	{
		std::ifstream in(path);
		if (!in)
			throw ConfigError("cannot read config " + path.string());
		std::ostringstream text;
		text << in.rdbuf();
		apply_config_text(config, text.str(), path.string());
	}
}
