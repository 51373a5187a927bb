#include "cdn/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cdn/error.hpp"
#include "cdn/model/checkpoint.hpp"
#include "cdn/numeric/adamw.hpp"
#include "cdn/posttrain/losses.hpp"

namespace cdn::train {

const char* to_string(TrainTask t) {
  switch (t) {
    case TrainTask::pointwise: return "pointwise";
    case TrainTask::multichoice: return "multichoice";
    case TrainTask::posttrain: return "posttrain";
  }
  return "?";
}

TrainTask parse_train_task(const std::string& s) {
  if (s == "pointwise") return TrainTask::pointwise;
  if (s == "multichoice") return TrainTask::multichoice;
  if (s == "posttrain") return TrainTask::posttrain;
  throw ConfigError("unknown task '" + s + "'");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be finite and >= 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) {
    throw ConfigError("warmup_fraction must be in [0, 1]");
  }
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
}

namespace {

const std::vector<std::string> kKeys = {
    "task",       "batch_size", "lr",   "epochs",     "max_steps",      "warmup_fraction",
    "grad_clip_norm", "weight_decay", "seed", "eval_every", "checkpoint_path"};

std::size_t to_size(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const auto n = std::stoull(v, &used);
    if (used != v.size() || v.front() == '-') throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

}  // namespace

bool TrainConfig::has_key(const std::string& key) {
  return std::find(kKeys.begin(), kKeys.end(), key) != kKeys.end();
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  if (key == "task") task = parse_train_task(value);
  else if (key == "batch_size") batch_size = to_size(key, value);
  else if (key == "lr") lr = to_double(key, value);
  else if (key == "epochs") epochs = to_size(key, value);
  else if (key == "max_steps") max_steps = to_size(key, value);
  else if (key == "warmup_fraction") warmup_fraction = to_double(key, value);
  else if (key == "grad_clip_norm") grad_clip_norm = to_double(key, value);
  else if (key == "weight_decay") weight_decay = to_double(key, value);
  else if (key == "seed") seed = to_size(key, value);
  else if (key == "eval_every") eval_every = to_size(key, value);
  else if (key == "checkpoint_path") checkpoint_path = value;
  else throw ConfigError("unknown training key '" + key + "'");
}

std::string TrainConfig::serialize() const {
  std::ostringstream out;
  out.precision(17);
  out << "task = " << to_string(task) << '\n'
      << "batch_size = " << batch_size << '\n'
      << "lr = " << lr << '\n'
      << "epochs = " << epochs << '\n'
      << "max_steps = " << max_steps << '\n'
      << "warmup_fraction = " << warmup_fraction << '\n'
      << "grad_clip_norm = " << grad_clip_norm << '\n'
      << "weight_decay = " << weight_decay << '\n'
      << "seed = " << seed << '\n'
      << "eval_every = " << eval_every << '\n'
      << "checkpoint_path = " << checkpoint_path << '\n';
  return out.str();
}

double scheduled_lr(double base_lr, std::size_t step, std::size_t total_steps,
                    double warmup_fraction) {
  if (total_steps == 0) return base_lr;
  const auto warmup =
      static_cast<std::size_t>(std::ceil(warmup_fraction * static_cast<double>(total_steps)));
  if (step < warmup) return base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
  const double remaining = static_cast<double>(total_steps - std::min(step, total_steps));
  return base_lr * remaining / static_cast<double>(total_steps - warmup);
}

std::string format_history(const HistoryEntry& e) {
  std::ostringstream out;
  out.precision(9);
  out << "step " << e.step << " split " << e.split << " metric " << e.metric << " value "
      << e.value;
  return out.str();
}

metrics::RankedRun score_groups(model::CdnModel<float>& model,
                                const std::vector<RankingGroup>& groups) {
  nn::NoGradGuard no_grad;
  model.set_training(false);
  metrics::RankedRun run;
  for (const auto& g : groups) {
    metrics::RankedGroup rg;
    rg.labels = g.labels;
    for (const auto& s : g.candidates) rg.scores.push_back(model.forward_logit(s).item());
    run.groups.push_back(std::move(rg));
  }
  return run;
}

namespace {

// The loop shared by both training modes. `step_loss` builds the loss of
// the items with the given indices; `evaluate` appends dev entries and
// returns the selection metric (or a negative value when there is none).
class Loop {
 public:
  Loop(model::CdnModel<float>& model, const TrainConfig& config, const HistorySink& sink)
      : model_(model), config_(config), sink_(sink) {
    config_.validate();
    nn::AdamWHyper hyper;
    hyper.lr = config.lr;
    hyper.weight_decay = config.weight_decay;
    state_ = nn::AdamWState<float>(hyper);
  }

  template <typename LossFn, typename EvalFn>
  TrainResult run(std::size_t n_items, LossFn&& step_loss, EvalFn&& evaluate) {
    if (n_items == 0) throw ConfigError("no training examples");
    const std::size_t per_epoch = (n_items + config_.batch_size - 1) / config_.batch_size;
    std::size_t total = per_epoch * config_.epochs;
    if (config_.max_steps) total = std::min(total, config_.max_steps);

    Rng rng(config_.seed);
    std::vector<std::size_t> order(n_items);
    std::size_t step = 0;
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    std::vector<std::vector<float>> best;

    auto checkpoint = [&] {
      if (loss_count) record(step, "train", "loss", loss_sum / static_cast<double>(loss_count));
      loss_sum = 0.0;
      loss_count = 0;
      const double metric = evaluate(step, *this);
      if (metric >= 0.0 && metric > result_.best_dev_metric) {
        result_.best_dev_metric = metric;
        result_.best_step = step;
        best = model_.params().snapshot();
      }
    };

    for (std::size_t epoch = 0; epoch < config_.epochs && step < total; ++epoch) {
      std::iota(order.begin(), order.end(), 0);
      auto epoch_rng = rng.fork();
      epoch_rng.shuffle(std::span(order));
      for (std::size_t begin = 0; begin < n_items && step < total; begin += config_.batch_size) {
        const auto end = std::min(n_items, begin + config_.batch_size);
        const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
        model_.set_training(true);
        auto loss = step_loss(idx, step, *this);
        const double value = loss.item();
        if (!std::isfinite(value)) {
          throw TrainingError("non-finite loss " + std::to_string(value) + " at step " +
                              std::to_string(step));
        }
        loss.backward();
        if (config_.grad_clip_norm > 0.0) model_.params().clip_grad_norm(config_.grad_clip_norm);
        nn::adamw_step(model_.params(), state_,
                       scheduled_lr(config_.lr, step, total, config_.warmup_fraction));
        ++step;
        loss_sum += value;
        ++loss_count;
        if (config_.eval_every && step % config_.eval_every == 0 && step < total) checkpoint();
      }
      if (!config_.eval_every && step < total) checkpoint();
    }
    checkpoint();
    model_.set_training(false);
    result_.steps = step;
    if (!best.empty()) model_.params().restore(best);
    if (!config_.checkpoint_path.empty()) model::save_checkpoint(config_.checkpoint_path, model_);
    return result_;
  }

  void record(std::size_t step, const std::string& split, const std::string& metric, double v) {
    HistoryEntry e{step, split, metric, v};
    if (sink_) sink_(e);
    result_.history.push_back(std::move(e));
  }

 private:
  model::CdnModel<float>& model_;
  TrainConfig config_;
  const HistorySink& sink_;
  nn::AdamWState<float> state_;
  TrainResult result_;
};

}  // namespace

TrainResult train_ranking(model::CdnModel<float>& model, const std::vector<RankingGroup>& train,
                          const std::vector<RankingGroup>& dev, const TrainConfig& config,
                          const HistorySink& sink) {
  if (config.task == TrainTask::posttrain) {
    throw ConfigError("train_ranking needs a pointwise or multichoice task");
  }
  Loop loop(model, config, sink);
  auto evaluate = [&](std::size_t step, Loop& l) -> double {
    if (dev.empty()) return -1.0;
    const auto run = score_groups(model, dev);
    const auto report = metrics::standard_report(run);
    for (const auto& [name, value] : report) l.record(step, "dev", name, value);
    return metrics::mean_recall_at_k(run, 1);
  };

  if (config.task == TrainTask::multichoice) {
    std::vector<const RankingGroup*> items;
    for (const auto& g : train) items.push_back(&g);
    auto loss = [&](const std::vector<std::size_t>& idx, std::size_t, Loop&) {
      std::vector<const RankingGroup*> picked;
      for (auto i : idx) picked.push_back(items[i]);
      const auto batch = pad_multichoice(picked);
      std::vector<std::vector<const data::EncodedSequence*>> examples;
      std::size_t at = 0;
      for (auto n : batch.group_sizes) {
        std::vector<const data::EncodedSequence*> cands;
        for (std::size_t c = 0; c < n; ++c) cands.push_back(&batch.sequences[at + c]);
        at += n;
        examples.push_back(std::move(cands));
      }
      return model.multichoice_loss(examples, batch.gold);
    };
    return loop.run(items.size(), loss, evaluate);
  }

  std::vector<std::pair<const data::EncodedSequence*, int>> items;
  for (const auto& g : train) {
    for (std::size_t c = 0; c < g.candidates.size(); ++c) items.emplace_back(&g.candidates[c], g.labels[c]);
  }
  auto loss = [&](const std::vector<std::size_t>& idx, std::size_t, Loop&) {
    std::vector<const data::EncodedSequence*> seqs;
    std::vector<int> labels;
    for (auto i : idx) {
      seqs.push_back(items[i].first);
      labels.push_back(items[i].second);
    }
    const auto batch = pad_pointwise(seqs, labels);
    std::vector<const data::EncodedSequence*> ptrs;
    for (const auto& s : batch.sequences) ptrs.push_back(&s);
    return model.pointwise_loss(ptrs, batch.labels);
  };
  return loop.run(items.size(), loss, evaluate);
}

TrainResult train_posttrain(model::CdnModel<float>& model,
                            const std::vector<posttrain::PosttrainExample>& examples,
                            const TrainConfig& config, const HistorySink& sink) {
  Loop loop(model, config, sink);
  auto loss = [&](const std::vector<std::size_t>& idx, std::size_t step, Loop& l) {
    std::vector<const posttrain::PosttrainExample*> batch;
    for (auto i : idx) batch.push_back(&examples[i]);
    auto parts = posttrain::posttrain_loss(model, std::span<const posttrain::PosttrainExample* const>(batch));
    l.record(step, "train", "mlm", parts.mlm.item());
    l.record(step, "train", "nup", parts.nup.item());
    return parts.total;
  };
  auto evaluate = [](std::size_t, Loop&) { return -1.0; };
  return loop.run(examples.size(), loss, evaluate);
}

}  // namespace cdn::train
