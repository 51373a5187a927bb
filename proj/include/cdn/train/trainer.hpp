#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cdn/metrics/ranking.hpp"
#include "cdn/model/cdn_model.hpp"
#include "cdn/posttrain/masking.hpp"
#include "cdn/train/batch.hpp"

namespace cdn::train {

enum class TrainTask { pointwise, multichoice, posttrain };

const char* to_string(TrainTask t);
TrainTask parse_train_task(const std::string& s);

struct TrainConfig {
  TrainTask task = TrainTask::multichoice;
  std::size_t batch_size = 8;
  double lr = 1e-3;
  std::size_t epochs = 1;
  std::size_t max_steps = 0;  // 0: no cap beyond the epochs
  double warmup_fraction = 0.1;
  double grad_clip_norm = 1.0;  // <= 0 disables clipping
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
  std::size_t eval_every = 0;  // 0: after every epoch
  std::string checkpoint_path;

  void validate() const;  // ConfigError
  std::string serialize() const;
  void set(const std::string& key, const std::string& value);  // ConfigError on unknown keys
  static bool has_key(const std::string& key);
};

/// Linear warmup over the first warmup_fraction of steps, then linear
/// decay to zero at total_steps.
double scheduled_lr(double base_lr, std::size_t step, std::size_t total_steps,
                    double warmup_fraction);

struct HistoryEntry {
  std::size_t step;
  std::string split;
  std::string metric;
  double value;
};

/// "step <n> split <name> metric <key> value <float>"
std::string format_history(const HistoryEntry& e);

struct TrainResult {
  std::vector<HistoryEntry> history;
  std::size_t steps = 0;
  double best_dev_metric = -1.0;  // R_n@1 of the selected snapshot; -1 without dev data
  std::size_t best_step = 0;
};

using HistorySink = std::function<void(const HistoryEntry&)>;

/// Logits for every candidate of every group (inference mode, no graph).
metrics::RankedRun score_groups(model::CdnModel<float>& model,
                                const std::vector<RankingGroup>& groups);

/// Fine-tunes on ranking groups. Pointwise tasks train per candidate with
/// binary cross-entropy; multichoice tasks per group with categorical
/// cross-entropy. When dev groups are given, the parameters with the best
/// dev R_n@1 are restored at the end (and saved to checkpoint_path).
/// Throws TrainingError on a non-finite loss.
TrainResult train_ranking(model::CdnModel<float>& model, const std::vector<RankingGroup>& train,
                          const std::vector<RankingGroup>& dev, const TrainConfig& config,
                          const HistorySink& sink = {});

/// Post-training on MLM/NUP examples with the summed objective.
TrainResult train_posttrain(model::CdnModel<float>& model,
                            const std::vector<posttrain::PosttrainExample>& examples,
                            const TrainConfig& config, const HistorySink& sink = {});

}  // namespace cdn::train
