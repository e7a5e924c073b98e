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

#ifndef DMOE_TENSOR_HPP_
#define DMOE_TENSOR_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dmoe
{
	class Rng;

	using Shape = std::vector<std::size_t>;

	std::size_t volume(const Shape &shape) noexcept;
	std::string to_string(const Shape &shape);

	struct TensorStorage
	{
			Shape shape;
			std::vector<double> data;
			std::vector<double> grad; // empty until a backward pass reaches this tensor
			bool requires_grad = false;
	};

	/**
	 * Dense row-major tensor of 64-bit floats.
	 *
	 * Tensor is a cheap handle; copies share storage. Operations never modify
	 * their inputs. The only mutation paths are mutable_data() (optimizer steps,
	 * checkpoint loading, finite-difference probes) and the gradient buffer.
	 */
	class Tensor
	{
		public:
			Tensor() = default;
			Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

			static Tensor zeros(Shape shape, bool requires_grad = false);
			static Tensor full(Shape shape, double value, bool requires_grad = false);
			static Tensor scalar(double value);

			bool defined() const noexcept
			{
				return m_storage != nullptr;
			}
			const Shape& shape() const noexcept;
			std::size_t rank() const noexcept;
			std::size_t dim(std::size_t axis) const;
			std::size_t size() const noexcept;

			std::span<const double> data() const noexcept;
			std::span<double> mutable_data() noexcept;
			double item() const;
			double at(std::size_t i, std::size_t j) const;

			bool requires_grad() const noexcept;
			bool has_grad() const noexcept;
			std::span<const double> grad() const noexcept;
			void zero_grad() noexcept;

			/// Same values, no tape participation.
			Tensor detach() const;

			TensorStorage& storage() const noexcept
			{
				return *m_storage;
			}
			const std::shared_ptr<TensorStorage>& storage_ptr() const noexcept
			{
				return m_storage;
			}
		private:
			std::shared_ptr<TensorStorage> m_storage;
	};

	/**
	 * Records differentiable operations in construction order.
	 *
	 * A Tape installs itself as the active tape of the calling thread for its
	 * lifetime. Operations whose inputs require gradients append a node while a
	 * tape is active; with no active tape the forward pass records nothing.
	 */
	class Tape
	{
		public:
			using BackwardFn = std::function<void(std::span<const double> grad_out)>;

			Tape();
			~Tape();
			Tape(const Tape&) = delete;
			Tape& operator=(const Tape&) = delete;

			static Tape* active() noexcept;

			void record(const Tensor &output, std::vector<Tensor> inputs, BackwardFn fn);
			/// Seeds d(loss)/d(loss) = 1 and walks nodes in reverse construction order.
			void backward(const Tensor &loss);
			std::size_t size() const noexcept
			{
				return m_nodes.size();
			}
		private:
			struct Node
			{
					std::shared_ptr<TensorStorage> output;
					std::vector<Tensor> inputs;
					BackwardFn fn;
			};
			std::vector<Node> m_nodes;
			Tape *m_previous;
	};

	/// Grad buffer of t, allocated (zeroed) on first use.
	std::span<double> grad_buffer(const Tensor &t);

	namespace ops
	{
		Tensor matmul(const Tensor &a, const Tensor &b);
		Tensor add(const Tensor &a, const Tensor &b);
		Tensor mul(const Tensor &a, const Tensor &b);
		/// x[m,n] + bias[n] broadcast over rows.
		Tensor add_bias(const Tensor &x, const Tensor &bias);
		Tensor scale(const Tensor &x, double factor);
		Tensor relu(const Tensor &x);
		Tensor softplus(const Tensor &x);
		Tensor softmax(const Tensor &x, std::size_t axis);
		Tensor log_softmax(const Tensor &x, std::size_t axis);
		Tensor reduce_sum(const Tensor &x);
		Tensor reduce_mean(const Tensor &x);
		Tensor dropout(const Tensor &x, double p, bool training, Rng &rng);
		Tensor reshape(const Tensor &x, Shape shape);

		/// Keeps the k largest entries of every row of x[m,n]; the rest become -inf.
		/// Ties resolve toward the lower column index.
		Tensor keep_top_k(const Tensor &x, std::size_t k);
		/// Column indices of the k largest entries, descending by value, ties by ascending index.
		std::vector<std::size_t> top_k_indices(std::span<const double> row, std::size_t k);

		/// out[i] = x.flat[index[i]]; a general gather used for patch permutations.
		Tensor gather(const Tensor &x, std::vector<std::size_t> index, Shape out_shape);
		/// Rows of x[M,d] selected by rows, giving [rows.size(), d].
		Tensor take_rows(const Tensor &x, std::span<const std::size_t> rows);
		/// x[rows[i], cols[i]] for each i, giving [rows.size()].
		Tensor take_elements(const Tensor &x, std::span<const std::size_t> rows, std::span<const std::size_t> cols);
		/// Row i of x[m,d] multiplied by w[i].
		Tensor scale_rows(const Tensor &x, const Tensor &w);
		/// base[M,d] with parts[j][i] added onto row rows[j][i].
		Tensor scatter_add_rows(const Tensor &base, const std::vector<Tensor> &parts, const std::vector<std::vector<std::size_t>> &rows);
		/// Zero [total_rows, d] tensor with parts[j][i] written to row rows[j][i]. Row sets must be disjoint.
		Tensor scatter_rows(const std::vector<Tensor> &parts, const std::vector<std::vector<std::size_t>> &rows, std::size_t total_rows);
	}
}

#endif /* DMOE_TENSOR_HPP_ */
