#pragma once

#include <span>
#include <vector>

#include "cdn/model/cdn_model.hpp"
#include "cdn/posttrain/masking.hpp"

namespace cdn::posttrain {

using nn::Tensor;

/// Mean cross-entropy of token logits [n x V] against the original ids;
/// a zero scalar when nothing was masked.
template <typename T>
Tensor<T> mlm_loss(const Tensor<T>& logits, std::span<const int> target_ids);

/// Binary cross-entropy of the [CLS] probability against the label.
template <typename T>
Tensor<T> nup_loss(const Tensor<T>& probability, int label);

/// Unweighted sum of the two objectives.
template <typename T>
Tensor<T> combined_loss(const Tensor<T>& intra, const Tensor<T>& inter);

template <typename T>
struct PosttrainLoss {
  Tensor<T> total;  // mlm + nup
  Tensor<T> mlm;    // mean over MLM examples in the batch (0 if none)
  Tensor<T> nup;    // mean over NUP examples in the batch (0 if none)
};

/// Batch objective over a mix of MLM and NUP examples.
template <typename T>
PosttrainLoss<T> posttrain_loss(model::CdnModel<T>& model,
                                std::span<const PosttrainExample* const> batch);

}  // namespace cdn::posttrain
