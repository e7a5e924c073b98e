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

#include <dmoe/tensor.hpp>
#include <dmoe/errors.hpp>
#include <dmoe/rng.hpp>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace
{
	using namespace dmoe;

	thread_local Tape *active_tape = nullptr;

	constexpr double neg_inf = -std::numeric_limits<double>::infinity();

	void check_finite(const Tensor &t, const char *op)
	{
#ifndef NDEBUG
		for (double v : t.data())
			if (!std::isfinite(v))
				throw NumericalError(std::string(op) + ": produced a non-finite value");
#else
		(void) t;
		(void) op;
#endif
	}

	/// Attaches a backward closure when any input participates in an active tape.
	template<typename F>
	Tensor finish(Tensor out, std::vector<Tensor> inputs, F &&backward)
	{
		Tape *tape = Tape::active();
		if (tape == nullptr)
			return out;
		const bool needs_grad = std::any_of(inputs.begin(), inputs.end(), [](const Tensor &t)
		{	return t.requires_grad();});
		if (!needs_grad)
			return out;
		out.storage().requires_grad = true;
		tape->record(out, std::move(inputs), std::forward<F>(backward));
		return out;
	}

	void require_rank(const Tensor &t, std::size_t rank, const char *op)
	{
		if (t.rank() != rank)
			throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " + to_string(t.shape()));
	}
	void require_same_shape(const Tensor &a, const Tensor &b, const char *op)
	{
		if (a.shape() != b.shape())
			throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
	}

	struct AxisLayout
	{
			std::size_t outer, length, inner;
	};
	AxisLayout axis_layout(const Shape &shape, std::size_t axis, const char *op)
	{
		if (axis >= shape.size())
			throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " + to_string(shape));
		AxisLayout result { 1, shape[axis], 1 };
		for (std::size_t i = 0; i < axis; i++)
			result.outer *= shape[i];
		for (std::size_t i = axis + 1; i < shape.size(); i++)
			result.inner *= shape[i];
		return result;
	}
}

namespace dmoe
{
	std::size_t volume(const Shape &shape) noexcept
	{
		return std::accumulate(shape.begin(), shape.end(), std::size_t { 1 }, std::multiplies<std::size_t>());
	}
	std::string to_string(const Shape &shape)
	{
		std::ostringstream ss;
		ss << '[';
		for (std::size_t i = 0; i < shape.size(); i++)
			ss << (i == 0 ? "" : ", ") << shape[i];
		ss << ']';
		return ss.str();
	}

	Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) :
			m_storage(std::make_shared<TensorStorage>())
	{
		if (volume(shape) != data.size())
			throw ShapeError("Tensor: shape " + to_string(shape) + " does not match " + std::to_string(data.size()) + " elements");
		m_storage->shape = std::move(shape);
		m_storage->data = std::move(data);
		m_storage->requires_grad = requires_grad;
	}
	Tensor Tensor::zeros(Shape shape, bool requires_grad)
	{
		return full(std::move(shape), 0.0, requires_grad);
	}
	Tensor Tensor::full(Shape shape, double value, bool requires_grad)
	{
		const std::size_t n = volume(shape);
		return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
	}
	Tensor Tensor::scalar(double value)
	{
		return Tensor(Shape { }, std::vector<double> { value });
	}
	const Shape& Tensor::shape() const noexcept
	{
		return m_storage->shape;
	}
	std::size_t Tensor::rank() const noexcept
	{
		return m_storage->shape.size();
	}
	std::size_t Tensor::dim(std::size_t axis) const
	{
		if (axis >= rank())
			throw ShapeError("Tensor::dim: axis " + std::to_string(axis) + " out of range for shape " + to_string(shape()));
		return m_storage->shape[axis];
	}
	std::size_t Tensor::size() const noexcept
	{
		return m_storage->data.size();
	}
	std::span<const double> Tensor::data() const noexcept
	{
		return m_storage->data;
	}
	std::span<double> Tensor::mutable_data() noexcept
	{
		return m_storage->data;
	}
	double Tensor::item() const
	{
		if (size() != 1)
			throw ShapeError("Tensor::item: tensor of shape " + to_string(shape()) + " is not a scalar");
		return m_storage->data[0];
	}
	double Tensor::at(std::size_t i, std::size_t j) const
	{
		assert(rank() == 2);
		return m_storage->data[i * m_storage->shape[1] + j];
	}
	bool Tensor::requires_grad() const noexcept
	{
		return m_storage != nullptr && m_storage->requires_grad;
	}
	bool Tensor::has_grad() const noexcept
	{
		return !m_storage->grad.empty();
	}
	std::span<const double> Tensor::grad() const noexcept
	{
		return m_storage->grad;
	}
	void Tensor::zero_grad() noexcept
	{
		std::fill(m_storage->grad.begin(), m_storage->grad.end(), 0.0);
	}
	Tensor Tensor::detach() const
	{
		return Tensor(shape(), m_storage->data, false);
	}

	std::span<double> grad_buffer(const Tensor &t)
	{
		TensorStorage &s = t.storage();
		if (s.grad.size() != s.data.size())
			s.grad.assign(s.data.size(), 0.0);
		return s.grad;
	}

	Tape::Tape() :
			m_previous(active_tape)
	{
		active_tape = this;
	}
	Tape::~Tape()
	{
		active_tape = m_previous;
	}
	Tape* Tape::active() noexcept
	{
		return active_tape;
	}
	void Tape::record(const Tensor &output, std::vector<Tensor> inputs, BackwardFn fn)
	{
		m_nodes.push_back(Node { output.storage_ptr(), std::move(inputs), std::move(fn) });
	}
	void Tape::backward(const Tensor &loss)
	{
		if (loss.size() != 1)
			throw ShapeError("Tape::backward: loss must be a scalar, got shape " + to_string(loss.shape()));
		if (!loss.requires_grad())
			return;
		grad_buffer(loss)[0] += 1.0;
		for (auto node = m_nodes.rbegin(); node != m_nodes.rend(); ++node)
		{
			if (node->output->grad.empty())
				continue;
			node->fn(node->output->grad);
		}
	}

	namespace ops
	{
		Tensor matmul(const Tensor &a, const Tensor &b)
		{
			require_rank(a, 2, "matmul");
			require_rank(b, 2, "matmul");
			const std::size_t m = a.dim(0), p = a.dim(1), q = b.dim(1);
			if (b.dim(0) != p)
				throw ShapeError("matmul: inner dimensions differ, " + to_string(a.shape()) + " x " + to_string(b.shape()));
			std::vector<double> out(m * q, 0.0);
			const double *A = a.data().data();
			const double *B = b.data().data();
			for (std::size_t i = 0; i < m; i++)
			{
				double *row = out.data() + i * q;
				for (std::size_t k = 0; k < p; k++)
				{
					const double aik = A[i * p + k];
					const double *brow = B + k * q;
					for (std::size_t j = 0; j < q; j++)
						row[j] += aik * brow[j];
				}
			}
			return finish(Tensor( { m, q }, std::move(out)), { a, b }, [a, b, m, p, q](std::span<const double> g)
			{
				const double *A = a.data().data();
				const double *B = b.data().data();
				if (a.requires_grad())
				{
					double *dA = grad_buffer(a).data();
					for (std::size_t i = 0; i < m; i++)
						for (std::size_t k = 0; k < p; k++)
						{
							const double *grow = g.data() + i * q;
							const double *brow = B + k * q;
							double acc = 0.0;
							for (std::size_t j = 0; j < q; j++)
								acc += grow[j] * brow[j];
							dA[i * p + k] += acc;
						}
				}
				if (b.requires_grad())
				{
					double *dB = grad_buffer(b).data();
					for (std::size_t i = 0; i < m; i++)
						for (std::size_t k = 0; k < p; k++)
						{
							const double aik = A[i * p + k];
							const double *grow = g.data() + i * q;
							double *dbrow = dB + k * q;
							for (std::size_t j = 0; j < q; j++)
								dbrow[j] += aik * grow[j];
						}
				}
			});
		}

		Tensor add(const Tensor &a, const Tensor &b)
		{
			require_same_shape(a, b, "add");
			std::vector<double> out(a.size());
			for (std::size_t i = 0; i < out.size(); i++)
				out[i] = a.data()[i] + b.data()[i];
			return finish(Tensor(a.shape(), std::move(out)), { a, b }, [a, b](std::span<const double> g)
			{
				for (const Tensor *t : { &a, &b })
					if (t->requires_grad())
					{
						auto d = grad_buffer(*t);
						for (std::size_t i = 0; i < g.size(); i++)
							d[i] += g[i];
					}
			});
		}

		Tensor mul(const Tensor &a, const Tensor &b)
		{
			require_same_shape(a, b, "mul");
			std::vector<double> out(a.size());
			for (std::size_t i = 0; i < out.size(); i++)
				out[i] = a.data()[i] * b.data()[i];
			return finish(Tensor(a.shape(), std::move(out)), { a, b }, [a, b](std::span<const double> g)
			{
				if (a.requires_grad())
				{
					auto d = grad_buffer(a);
					for (std::size_t i = 0; i < g.size(); i++)
						d[i] += g[i] * b.data()[i];
				}
				if (b.requires_grad())
				{
					auto d = grad_buffer(b);
					for (std::size_t i = 0; i < g.size(); i++)
						d[i] += g[i] * a.data()[i];
				}
			});
		}

		Tensor add_bias(const Tensor &x, const Tensor &bias)
		{
			require_rank(x, 2, "add_bias");
			require_rank(bias, 1, "add_bias");
			const std::size_t m = x.dim(0), n = x.dim(1);
			if (bias.dim(0) != n)
				throw ShapeError("add_bias: bias " + to_string(bias.shape()) + " does not match " + to_string(x.shape()));
			std::vector<double> out(x.data().begin(), x.data().end());
			for (std::size_t i = 0; i < m; i++)
				for (std::size_t j = 0; j < n; j++)
					out[i * n + j] += bias.data()[j];
			return finish(Tensor(x.shape(), std::move(out)), { x, bias }, [x, bias, m, n](std::span<const double> g)
			{
				if (x.requires_grad())
				{
					auto d = grad_buffer(x);
					for (std::size_t i = 0; i < g.size(); i++)
						d[i] += g[i];
				}
				if (bias.requires_grad())
				{
					auto d = grad_buffer(bias);
					for (std::size_t i = 0; i < m; i++)
						for (std::size_t j = 0; j < n; j++)
							d[j] += g[i * n + j];
				}
			});
		}

		Tensor scale(const Tensor &x, double factor)
		{
			std::vector<double> out(x.size());
			for (std::size_t i = 0; i < out.size(); i++)
				out[i] = x.data()[i] * factor;
			return finish(Tensor(x.shape(), std::move(out)), { x }, [x, factor](std::span<const double> g)
			{
				auto d = grad_buffer(x);
				for (std::size_t i = 0; i < g.size(); i++)
					d[i] += g[i] * factor;
			});
		}

		Tensor relu(const Tensor &x)
		{
			std::vector<double> out(x.size());
			for (std::size_t i = 0; i < out.size(); i++)
				out[i] = std::max(x.data()[i], 0.0);
			return finish(Tensor(x.shape(), std::move(out)), { x }, [x](std::span<const double> g)
			{
				auto d = grad_buffer(x);
				for (std::size_t i = 0; i < g.size(); i++)
					if (x.data()[i] > 0.0)
						d[i] += g[i];
			});
		}

		Tensor softplus(const Tensor &x)
		{
			std::vector<double> out(x.size());
			for (std::size_t i = 0; i < out.size(); i++)
			{
				const double v = x.data()[i];
				out[i] = (v > 0.0) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
			}
			Tensor result = finish(Tensor(x.shape(), std::move(out)), { x }, [x](std::span<const double> g)
			{
				auto d = grad_buffer(x);
				for (std::size_t i = 0; i < g.size(); i++)
				{
					const double v = x.data()[i];
					const double sigmoid = (v >= 0.0) ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
					d[i] += g[i] * sigmoid;
				}
			});
			check_finite(result, "softplus");
			return result;
		}

		Tensor softmax(const Tensor &x, std::size_t axis)
		{
			const AxisLayout L = axis_layout(x.shape(), axis, "softmax");
			std::vector<double> out(x.size());
			const double *X = x.data().data();
			for (std::size_t o = 0; o < L.outer; o++)
				for (std::size_t in = 0; in < L.inner; in++)
				{
					const std::size_t base = o * L.length * L.inner + in;
					double max_value = neg_inf;
					for (std::size_t j = 0; j < L.length; j++)
						max_value = std::max(max_value, X[base + j * L.inner]);
					if (max_value == neg_inf)
						throw DegenerateGatingError("softmax: every entry along axis " + std::to_string(axis) + " is -inf");
					double sum = 0.0;
					for (std::size_t j = 0; j < L.length; j++)
					{
						const double e = std::exp(X[base + j * L.inner] - max_value);
						out[base + j * L.inner] = e;
						sum += e;
					}
					for (std::size_t j = 0; j < L.length; j++)
						out[base + j * L.inner] /= sum;
				}
			Tensor result(x.shape(), std::move(out));
			auto y = result.storage_ptr();
			return finish(result, { x }, [x, y, L](std::span<const double> g)
			{
				auto d = grad_buffer(x);
				const std::vector<double> &Y = y->data;
				for (std::size_t o = 0; o < L.outer; o++)
					for (std::size_t in = 0; in < L.inner; in++)
					{
						const std::size_t base = o * L.length * L.inner + in;
						double dot = 0.0;
						for (std::size_t j = 0; j < L.length; j++)
							dot += g[base + j * L.inner] * Y[base + j * L.inner];
						for (std::size_t j = 0; j < L.length; j++)
						{
							const std::size_t idx = base + j * L.inner;
							if (Y[idx] != 0.0)
								d[idx] += Y[idx] * (g[idx] - dot);
						}
					}
			});
		}

		Tensor log_softmax(const Tensor &x, std::size_t axis)
		{
			const AxisLayout L = axis_layout(x.shape(), axis, "log_softmax");
			std::vector<double> out(x.size());
			const double *X = x.data().data();
			for (std::size_t o = 0; o < L.outer; o++)
				for (std::size_t in = 0; in < L.inner; in++)
				{
					const std::size_t base = o * L.length * L.inner + in;
					double max_value = neg_inf;
					for (std::size_t j = 0; j < L.length; j++)
						max_value = std::max(max_value, X[base + j * L.inner]);
					if (max_value == neg_inf)
						throw DegenerateGatingError("log_softmax: every entry along axis " + std::to_string(axis) + " is -inf");
					double sum = 0.0;
					for (std::size_t j = 0; j < L.length; j++)
						sum += std::exp(X[base + j * L.inner] - max_value);
					const double log_norm = max_value + std::log(sum);
					for (std::size_t j = 0; j < L.length; j++)
						out[base + j * L.inner] = X[base + j * L.inner] - log_norm;
				}
			Tensor result(x.shape(), std::move(out));
			auto y = result.storage_ptr();
			return finish(result, { x }, [x, y, L](std::span<const double> g)
			{
				auto d = grad_buffer(x);
				const std::vector<double> &Y = y->data;
				for (std::size_t o = 0; o < L.outer; o++)
					for (std::size_t in = 0; in < L.inner; in++)
					{
						const std::size_t base = o * L.length * L.inner + in;
						double gsum = 0.0;
						for (std::size_t j = 0; j < L.length; j++)
							gsum += g[base + j * L.inner];
						for (std::size_t j = 0; j < L.length; j++)
						{
							const std::size_t idx = base + j * L.inner;
							d[idx] += g[idx] - std::exp(Y[idx]) * gsum;
						}
					}
			});
		}

		Tensor reduce_sum(const Tensor &x)
		{
			double sum = 0.0;
			for (double v : x.data())
				sum += v;
			return finish(Tensor::scalar(sum), { x }, [x](std::span<const double> g)
			{
				auto d = grad_buffer(x);
				for (double &v : d)
					v += g[0];
			});
		}

		Tensor reduce_mean(const Tensor &x)
		{
			if (x.size() == 0)
				throw ShapeError("reduce_mean: empty tensor");
			const double n = static_cast<double>(x.size());
			double sum = 0.0;
			for (double v : x.data())
				sum += v;
			return finish(Tensor::scalar(sum / n), { x }, [x, n](std::span<const double> g)
			{
				auto d = grad_buffer(x);
				for (double &v : d)
					v += g[0] / n;
			});
		}

		Tensor dropout(const Tensor &x, double p, bool training, Rng &rng)
		{
			if (!(p >= 0.0 && p < 1.0))
				throw ConfigError("dropout: probability must lie in [0, 1), got " + std::to_string(p));
			if (!training || p == 0.0)
				return x;
			const double keep_scale = 1.0 / (1.0 - p);
			std::vector<double> mask(x.size());
			for (double &m : mask)
				m = (rng.uniform() >= p) ? keep_scale : 0.0;
			std::vector<double> out(x.size());
			for (std::size_t i = 0; i < out.size(); i++)
				out[i] = x.data()[i] * mask[i];
			return finish(Tensor(x.shape(), std::move(out)), { x }, [x, mask = std::move(mask)](std::span<const double> g)
			{
				auto d = grad_buffer(x);
				for (std::size_t i = 0; i < g.size(); i++)
					d[i] += g[i] * mask[i];
			});
		}

		Tensor reshape(const Tensor &x, Shape shape)
		{
			if (volume(shape) != x.size())
				throw ShapeError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
			std::vector<double> out(x.data().begin(), x.data().end());
			return finish(Tensor(std::move(shape), std::move(out)), { x }, [x](std::span<const double> g)
			{
				auto d = grad_buffer(x);
				for (std::size_t i = 0; i < g.size(); i++)
					d[i] += g[i];
			});
		}

		std::vector<std::size_t> top_k_indices(std::span<const double> row, std::size_t k)
		{
			if (k == 0 || k > row.size())
				throw ConfigError("top_k_indices: k=" + std::to_string(k) + " outside [1, " + std::to_string(row.size()) + "]");
			std::vector<std::size_t> order(row.size());
			std::iota(order.begin(), order.end(), std::size_t { 0 });
			std::partial_sort(order.begin(), order.begin() + k, order.end(), [&row](std::size_t a, std::size_t b)
			{
				return row[a] > row[b] || (row[a] == row[b] && a < b);
			});
			order.resize(k);
			return order;
		}

		Tensor keep_top_k(const Tensor &x, std::size_t k)
		{
			require_rank(x, 2, "keep_top_k");
			const std::size_t m = x.dim(0), n = x.dim(1);
			std::vector<double> out(x.size(), neg_inf);
			std::vector<char> kept(x.size(), 0);
			for (std::size_t i = 0; i < m; i++)
			{
				const auto row = x.data().subspan(i * n, n);
				for (std::size_t j : top_k_indices(row, k))
				{
					out[i * n + j] = row[j];
					kept[i * n + j] = 1;
				}
			}
			return finish(Tensor(x.shape(), std::move(out)), { x }, [x, kept = std::move(kept)](std::span<const double> g)
			{
				auto d = grad_buffer(x);
				for (std::size_t i = 0; i < g.size(); i++)
					if (kept[i])
						d[i] += g[i];
			});
		}

		Tensor gather(const Tensor &x, std::vector<std::size_t> index, Shape out_shape)
		{
			if (volume(out_shape) != index.size())
				throw ShapeError("gather: index count does not match output shape " + to_string(out_shape));
			std::vector<double> out(index.size());
			for (std::size_t i = 0; i < index.size(); i++)
			{
				if (index[i] >= x.size())
					throw ShapeError("gather: index out of range for shape " + to_string(x.shape()));
				out[i] = x.data()[index[i]];
			}
			return finish(Tensor(std::move(out_shape), std::move(out)), { x }, [x, index = std::move(index)](std::span<const double> g)
			{
				auto d = grad_buffer(x);
				for (std::size_t i = 0; i < g.size(); i++)
					d[index[i]] += g[i];
			});
		}

		Tensor take_rows(const Tensor &x, std::span<const std::size_t> rows)
		{
			require_rank(x, 2, "take_rows");
			const std::size_t M = x.dim(0), d = x.dim(1);
			std::vector<double> out(rows.size() * d);
			for (std::size_t i = 0; i < rows.size(); i++)
			{
				if (rows[i] >= M)
					throw ShapeError("take_rows: row " + std::to_string(rows[i]) + " out of range for " + to_string(x.shape()));
				std::copy_n(x.data().begin() + rows[i] * d, d, out.begin() + i * d);
			}
			std::vector<std::size_t> row_copy(rows.begin(), rows.end());
			return finish(Tensor( { rows.size(), d }, std::move(out)), { x }, [x, d, row_copy = std::move(row_copy)](std::span<const double> g)
			{
				auto dx = grad_buffer(x);
				for (std::size_t i = 0; i < row_copy.size(); i++)
					for (std::size_t j = 0; j < d; j++)
						dx[row_copy[i] * d + j] += g[i * d + j];
			});
		}

		Tensor take_elements(const Tensor &x, std::span<const std::size_t> rows, std::span<const std::size_t> cols)
		{
			require_rank(x, 2, "take_elements");
			if (rows.size() != cols.size())
				throw ShapeError("take_elements: rows and cols differ in length");
			const std::size_t M = x.dim(0), n = x.dim(1);
			std::vector<std::size_t> flat(rows.size());
			for (std::size_t i = 0; i < rows.size(); i++)
			{
				if (rows[i] >= M || cols[i] >= n)
					throw ShapeError("take_elements: index out of range for " + to_string(x.shape()));
				flat[i] = rows[i] * n + cols[i];
			}
			const std::size_t count = flat.size();
			return gather(x, std::move(flat), Shape { count });
		}

		Tensor scale_rows(const Tensor &x, const Tensor &w)
		{
			require_rank(x, 2, "scale_rows");
			require_rank(w, 1, "scale_rows");
			const std::size_t m = x.dim(0), d = x.dim(1);
			if (w.dim(0) != m)
				throw ShapeError("scale_rows: weights " + to_string(w.shape()) + " do not match " + to_string(x.shape()));
			std::vector<double> out(x.size());
			for (std::size_t i = 0; i < m; i++)
				for (std::size_t j = 0; j < d; j++)
					out[i * d + j] = x.data()[i * d + j] * w.data()[i];
			return finish(Tensor(x.shape(), std::move(out)), { x, w }, [x, w, m, d](std::span<const double> g)
			{
				if (x.requires_grad())
				{
					auto dx = grad_buffer(x);
					for (std::size_t i = 0; i < m; i++)
						for (std::size_t j = 0; j < d; j++)
							dx[i * d + j] += g[i * d + j] * w.data()[i];
				}
				if (w.requires_grad())
				{
					auto dw = grad_buffer(w);
					for (std::size_t i = 0; i < m; i++)
					{
						double acc = 0.0;
						for (std::size_t j = 0; j < d; j++)
							acc += g[i * d + j] * x.data()[i * d + j];
						dw[i] += acc;
					}
				}
			});
		}

		Tensor scatter_add_rows(const Tensor &base, const std::vector<Tensor> &parts, const std::vector<std::vector<std::size_t>> &rows)
		{
			require_rank(base, 2, "scatter_add_rows");
			if (parts.size() != rows.size())
				throw ShapeError("scatter_add_rows: parts and row lists differ in count");
			const std::size_t M = base.dim(0), d = base.dim(1);
			std::vector<double> out(base.data().begin(), base.data().end());
			for (std::size_t p = 0; p < parts.size(); p++)
			{
				require_rank(parts[p], 2, "scatter_add_rows");
				if (parts[p].dim(0) != rows[p].size() || parts[p].dim(1) != d)
					throw ShapeError("scatter_add_rows: part " + to_string(parts[p].shape()) + " does not match its row list");
				for (std::size_t i = 0; i < rows[p].size(); i++)
				{
					if (rows[p][i] >= M)
						throw ShapeError("scatter_add_rows: row out of range");
					for (std::size_t j = 0; j < d; j++)
						out[rows[p][i] * d + j] += parts[p].data()[i * d + j];
				}
			}
			std::vector<Tensor> inputs = parts;
			inputs.push_back(base);
			return finish(Tensor(base.shape(), std::move(out)), std::move(inputs), [base, parts, rows, d](std::span<const double> g)
			{
				if (base.requires_grad())
				{
					auto db = grad_buffer(base);
					for (std::size_t i = 0; i < g.size(); i++)
						db[i] += g[i];
				}
				for (std::size_t p = 0; p < parts.size(); p++)
				{
					if (!parts[p].requires_grad())
						continue;
					auto dp = grad_buffer(parts[p]);
					for (std::size_t i = 0; i < rows[p].size(); i++)
						for (std::size_t j = 0; j < d; j++)
							dp[i * d + j] += g[rows[p][i] * d + j];
				}
			});
		}

		Tensor scatter_rows(const std::vector<Tensor> &parts, const std::vector<std::vector<std::size_t>> &rows, std::size_t total_rows)
		{
			if (parts.empty())
				throw ShapeError("scatter_rows: no parts");
			const std::size_t d = parts.front().dim(1);
			std::vector<char> used(total_rows, 0);
			for (const auto &list : rows)
				for (std::size_t r : list)
				{
					if (r >= total_rows || used[r])
						throw ShapeError("scatter_rows: row sets must be disjoint and in range");
					used[r] = 1;
				}
			return scatter_add_rows(Tensor::zeros( { total_rows, d }), parts, rows);
		}
	}
}
