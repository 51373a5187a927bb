#include "cdn/posttrain/losses.hpp"

#include "cdn/error.hpp"

namespace cdn::posttrain {

using namespace cdn::nn;

template <typename T>
Tensor<T> mlm_loss(const Tensor<T>& logits, std::span<const int> target_ids) {
  if (target_ids.empty()) return Tensor<T>::scalar(T(0));
  return cross_entropy_categorical(logits, target_ids);
}

template <typename T>
Tensor<T> nup_loss(const Tensor<T>& probability, int label) {
  const int labels[1] = {label};
  return cross_entropy_binary(probability, std::span<const int>(labels));
}

template <typename T>
Tensor<T> combined_loss(const Tensor<T>& intra, const Tensor<T>& inter) {
  return add(intra, inter);
}

namespace {

template <typename T>
Tensor<T> mean_of(const std::vector<Tensor<T>>& terms) {
  if (terms.empty()) return Tensor<T>::scalar(T(0));
  Tensor<T> acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return affine(acc, T(1) / static_cast<T>(terms.size()), T(0));
}

}  // namespace

template <typename T>
PosttrainLoss<T> posttrain_loss(model::CdnModel<T>& model,
                                std::span<const PosttrainExample* const> batch) {
  std::vector<Tensor<T>> mlm_terms, nup_terms;
  for (const auto* ex : batch) {
    const std::vector<std::uint8_t> valid(ex->ids.size(), 1);
    auto E = model.encode(ex->ids, valid);
    if (ex->kind == ExampleKind::mlm) {
      if (ex->targets.empty()) continue;
      std::vector<int> positions, ids;
      for (const auto& t : ex->targets) {
        positions.push_back(t.position);
        ids.push_back(t.id);
      }
      mlm_terms.push_back(mlm_loss(model.mlm_logits(E, positions), std::span<const int>(ids)));
    } else {
      nup_terms.push_back(nup_loss(model.nup_probability(E), ex->label));
    }
  }
  PosttrainLoss<T> out;
  out.mlm = mean_of(mlm_terms);
  out.nup = mean_of(nup_terms);
  out.total = combined_loss(out.mlm, out.nup);
  return out;
}

#define CDN_INSTANTIATE_POSTTRAIN(T)                                                  \
  template Tensor<T> mlm_loss(const Tensor<T>&, std::span<const int>);                \
  template Tensor<T> nup_loss(const Tensor<T>&, int);                                 \
  template Tensor<T> combined_loss(const Tensor<T>&, const Tensor<T>&);               \
  template PosttrainLoss<T> posttrain_loss(model::CdnModel<T>&,                       \
                                           std::span<const PosttrainExample* const>);
CDN_INSTANTIATE_POSTTRAIN(float)
CDN_INSTANTIATE_POSTTRAIN(double)

}  // namespace cdn::posttrain
