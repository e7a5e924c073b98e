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

#ifndef DMOE_ERRORS_HPP_
#define DMOE_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace dmoe
{
	/// Process exit codes shared by the CLI and the error hierarchy.
	enum class ExitCode : int
	{
		ok = 0,
		config = 2,
		numerical = 3,
		mismatch = 4
	};

	class Error : public std::runtime_error
	{
		public:
			Error(const std::string &msg, ExitCode code) :
					std::runtime_error(msg),
					m_code(code)
			{
			}
			ExitCode code() const noexcept
			{
				return m_code;
			}
		private:
			ExitCode m_code;
	};

	/// Invalid configuration or hyperparameters.
	class ConfigError : public Error
	{
		public:
			explicit ConfigError(const std::string &msg) :
					Error(msg, ExitCode::config)
			{
			}
	};

	/// Incompatible tensor shapes.
	class ShapeError : public Error
	{
		public:
			explicit ShapeError(const std::string &msg) :
					Error(msg, ExitCode::config)
			{
			}
	};

	/// Malformed on-disk data (dataset, checkpoint, CSV).
	class FormatError : public Error
	{
		public:
			explicit FormatError(const std::string &msg) :
					Error(msg, ExitCode::config)
			{
			}
	};

	/// Non-finite values or divergence during a numerical procedure.
	class NumericalError : public Error
	{
		public:
			explicit NumericalError(const std::string &msg) :
					Error(msg, ExitCode::numerical)
			{
			}
	};

	/// Every score along a gating row was -inf.
	class DegenerateGatingError : public NumericalError
	{
		public:
			explicit DegenerateGatingError(const std::string &msg) :
					NumericalError(msg)
			{
			}
	};

	/// Attribute label unknown to a router, or data/model mismatch.
	class RoutingError : public Error
	{
		public:
			explicit RoutingError(const std::string &msg) :
					Error(msg, ExitCode::mismatch)
			{
			}
	};
}

#endif /* DMOE_ERRORS_HPP_ */
