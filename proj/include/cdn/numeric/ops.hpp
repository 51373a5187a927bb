#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cdn/numeric/tensor.hpp"
#include "cdn/rng.hpp"

namespace cdn::nn {

// Probability clamp used by the binary cross-entropy.
inline constexpr double kProbabilityEps = 1e-7;

// --- linear algebra -------------------------------------------------------

/// [m x k] * [k x n] -> [m x n]. Both operands must be rank 2.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> transpose(const Tensor<T>& a);

// --- elementwise ------------------------------------------------------------
// Binary ops broadcast when one shape is a proper suffix of the other
// (e.g. a bias [n] against [m x n]).

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

/// scale * a + shift
template <typename T>
Tensor<T> affine(const Tensor<T>& a, T scale, T shift);

template <typename T>
Tensor<T> relu(const Tensor<T>& a);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a);
template <typename T>
Tensor<T> tanh(const Tensor<T>& a);

// --- attention pieces ---------------------------------------------------------

/// Row-wise softmax over the last dim restricted to allowed positions.
/// Disallowed entries are exactly 0; a row with no allowed entry is all 0.
/// `allowed` has one flag per logit.
template <typename T>
Tensor<T> masked_softmax(const Tensor<T>& logits, std::span<const std::uint8_t> allowed);

/// Concatenates along the last dim; all leading dims must agree.
template <typename T>
Tensor<T> concat_last(const std::vector<Tensor<T>>& parts);

/// Stacks rank-2 tensors with equal column counts along the first dim.
template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts);

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t count);

/// Embedding lookup: rows of `table` selected by `ids`.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const int> ids);

/// Zeroes rows whose keep flag is 0.
template <typename T>
Tensor<T> zero_rows(const Tensor<T>& x, std::span<const std::uint8_t> keep);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

// --- pooling ----------------------------------------------------------------

/// Per-segment, per-column max over valid rows of x [l x d].
/// Ties go to the lowest row index; empty segments give zero rows.
template <typename T>
Tensor<T> segment_max_pool(const Tensor<T>& x, std::span<const int> segment_id,
                           std::span<const std::uint8_t> valid, std::size_t n_segments);

/// Per-segment mean over valid rows; empty segments give zero rows.
template <typename T>
Tensor<T> segment_mean_pool(const Tensor<T>& x, std::span<const int> segment_id,
                            std::span<const std::uint8_t> valid, std::size_t n_segments);

// --- normalization ----------------------------------------------------------

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps = T(1e-5));

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, Rng& rng);

// --- reductions and losses ---------------------------------------------------

template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);

/// Mean binary cross-entropy of probabilities p against 0/1 labels, with
/// p clamped to [eps, 1 - eps].
template <typename T>
Tensor<T> cross_entropy_binary(const Tensor<T>& p, std::span<const int> labels);

/// Mean categorical cross-entropy over rows of logits [n x C] (or a single
/// row [C]); softmax is applied internally.
template <typename T>
Tensor<T> cross_entropy_categorical(const Tensor<T>& logits, std::span<const int> gold);

}  // namespace cdn::nn
