#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "cdn/data/loaders.hpp"
#include "cdn/error.hpp"
#include "cdn/synthetic/tasks.hpp"
#include "cdn/train/batch.hpp"
#include "cdn/train/trainer.hpp"
#include "support/random_data.hpp"

using namespace cdn;
using namespace cdn::train;

namespace {

struct Fixture {
  synthetic::SyntheticSpec spec;
  data::Vocab vocab;
  std::vector<RankingGroup> train, dev;
  model::ModelConfig config;

  explicit Fixture(std::size_t n_train = 32, std::size_t n_dev = 16) {
    spec.n_train = n_train;
    spec.n_dev = n_dev;
    spec.seed = 5;
    vocab = synthetic::synthetic_vocab(spec);
    const auto split = synthetic::generate_split(spec);
    train = encode_groups(tokenize(split.train), 32, 20);
    dev = encode_groups(tokenize(split.dev), 32, 20);
    config.vocab_size = vocab.size();
    config.d = 16;
    config.heads = 2;
    config.max_len = 32;
  }

  std::vector<data::DialogueExample> tokenize(const std::vector<data::RawDialogue>& raw) const {
    std::vector<data::DialogueExample> out;
    for (const auto& d : raw) out.push_back(data::tokenize_dialogue(d, vocab, data::TokenizeMode::word));
    return out;
  }
};

bool same_params(const nn::ParamStore<float>& a, const std::vector<std::vector<float>>& snap) {
  return a.snapshot() == snap;
}

std::vector<const data::EncodedSequence*> pointers(const RankingGroup& g) {
  std::vector<const data::EncodedSequence*> out;
  for (const auto& s : g.candidates) out.push_back(&s);
  return out;
}

int gold_of(const RankingGroup& g) {
  for (std::size_t i = 0; i < g.labels.size(); ++i)
    if (g.labels[i]) return static_cast<int>(i);
  return 0;
}

}  // namespace

TEST_SUITE("schedule and config") {
  TEST_CASE("linear warmup then linear decay") {
    CHECK(scheduled_lr(1.0, 0, 100, 0.1) == doctest::Approx(0.1));
    CHECK(scheduled_lr(1.0, 9, 100, 0.1) == doctest::Approx(1.0));
    CHECK(scheduled_lr(1.0, 10, 100, 0.1) == doctest::Approx(1.0));
    CHECK(scheduled_lr(1.0, 55, 100, 0.1) == doctest::Approx(0.5));
    CHECK(scheduled_lr(1.0, 100, 100, 0.1) == 0.0);
    CHECK(scheduled_lr(2.0, 0, 10, 0.0) == doctest::Approx(2.0));
    double prev = 2.0;
    for (std::size_t s = 10; s <= 100; ++s) {
      const double lr = scheduled_lr(1.0, s, 100, 0.1);
      CHECK(lr <= prev);
      prev = lr;
    }
  }

  TEST_CASE("config keys") {
    TrainConfig c;
    c.set("batch_size", "4");
    c.set("lr", "0.5");
    c.set("task", "pointwise");
    CHECK(c.batch_size == 4);
    CHECK(c.lr == 0.5);
    CHECK(c.task == TrainTask::pointwise);
    CHECK(TrainConfig::has_key("warmup_fraction"));
    CHECK_FALSE(TrainConfig::has_key("learning_rate"));
    CHECK_THROWS_AS(c.set("learning_rate", "1"), ConfigError);
    CHECK_THROWS_AS(c.set("batch_size", "four"), ConfigError);
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }

  TEST_CASE("history lines") {
    CHECK(format_history({12, "dev", "R_4@1", 0.5}) == "step 12 split dev metric R_4@1 value 0.5");
  }
}

TEST_SUITE("batching") {
  TEST_CASE("padding to the batch's longest sequence") {
    Fixture f;
    const std::vector<const RankingGroup*> groups{&f.train[0], &f.train[1], &f.train[2]};
    const auto b = pad_multichoice(groups);
    std::size_t longest = 0, total = 0;
    for (const auto* g : groups) {
      total += g->candidates.size();
      for (const auto& s : g->candidates) longest = std::max(longest, s.valid_count());
    }
    CHECK(b.length == longest);
    CHECK(b.sequences.size() == total);
    for (const auto& s : b.sequences) CHECK(s.length() == longest);
    CHECK(b.gold.size() == 3);
    CHECK(b.gold[0] == gold_of(f.train[0]));
    CHECK_THROWS_AS(trim_padding(f.train[0].candidates[0], 2), ContractError);
  }

  TEST_CASE("a batch of one scores like the unbatched example") {
    Fixture f;
    model::CdnModel<float> m(f.config, 1);
    const auto& seq = f.train[0].candidates[1];
    const std::vector<const data::EncodedSequence*> one{&seq};
    const std::vector<int> label{0};
    const auto b = pad_pointwise(one, label);
    const auto lb = m.forward_logit(b.sequences[0]).item();
    const auto lu = m.forward_logit(seq).item();
    CHECK(std::memcmp(&lb, &lu, sizeof(float)) == 0);
    const double bce = -std::log(1.0 - 1.0 / (1.0 + std::exp(-static_cast<double>(lu))));
    CHECK(m.pointwise_loss(one, label).item() == doctest::Approx(bce).epsilon(1e-5));
  }

  TEST_CASE("permuting the groups permutes the scores") {
    Fixture f;
    model::CdnModel<float> m(f.config, 2);
    std::vector<RankingGroup> groups(f.dev.begin(), f.dev.begin() + 6);
    const auto base = score_groups(m, groups);
    std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
    std::vector<RankingGroup> shuffled;
    for (auto i : perm) shuffled.push_back(groups[i]);
    const auto run = score_groups(m, shuffled);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      CHECK(run.groups[i].scores == base.groups[perm[i]].scores);
      CHECK(run.groups[i].labels == base.groups[perm[i]].labels);
    }
  }
}

TEST_SUITE("gradients and optimisation") {
  TEST_CASE("untrained loss is close to ln C") {
    Fixture f;
    model::CdnModel<float> m(f.config, 3);
    std::vector<std::vector<const data::EncodedSequence*>> examples;
    std::vector<int> gold;
    for (const auto& g : f.dev) {
      examples.push_back(pointers(g));
      gold.push_back(gold_of(g));
    }
    const double loss = m.multichoice_loss(examples, gold).item();
    CHECK(std::abs(loss - std::log(4.0)) / std::log(4.0) < 0.1);
  }

  TEST_CASE("the pad embedding row never receives gradient") {
    Fixture f;
    model::CdnModel<float> m(f.config, 4);
    m.params().zero_grad();
    std::vector<std::vector<const data::EncodedSequence*>> examples{pointers(f.train[0]), pointers(f.train[1])};
    const std::vector<int> gold{gold_of(f.train[0]), gold_of(f.train[1])};
    m.multichoice_loss(examples, gold).backward();
    const auto& emb = m.params().get("encoder.tok_emb");
    const auto g = emb.grad();
    double other = 0.0;
    for (std::size_t j = 0; j < emb.cols(); ++j) {
      CHECK(g[data::kPad * emb.cols() + j] == 0.0f);
      other += std::abs(g[data::kCls * emb.cols() + j]);
    }
    CHECK(other > 0.0);
  }

  TEST_CASE("clipping bounds the global norm") {
    Fixture f;
    model::CdnModel<float> m(f.config, 5);
    m.params().zero_grad();
    std::vector<std::vector<const data::EncodedSequence*>> examples{pointers(f.train[0])};
    const std::vector<int> gold{gold_of(f.train[0])};
    nn::sum(nn::affine(m.multichoice_loss(examples, gold), 1000.0f, 0.0f)).backward();
    const double before = m.params().grad_norm();
    CHECK(before > 1.0);
    CHECK(m.params().clip_grad_norm(0.5) == doctest::Approx(before));
    CHECK(m.params().grad_norm() <= 0.5 + 1e-6);
  }

  TEST_CASE("zero learning rate leaves every parameter unchanged") {
    Fixture f;
    model::CdnModel<float> m(f.config, 6);
    const auto snap = m.params().snapshot();
    TrainConfig c;
    c.lr = 0.0;
    c.max_steps = 5;
    train_ranking(m, f.train, {}, c);
    CHECK(same_params(m.params(), snap));
  }

  TEST_CASE("a single example is memorised") {
    Fixture f;
    model::CdnModel<float> m(f.config, 7);
    std::vector<RankingGroup> one{f.train[0]};
    TrainConfig c;
    c.batch_size = 1;
    c.lr = 3e-3;
    c.epochs = 500;
    c.max_steps = 500;
    c.weight_decay = 0.0;
    train_ranking(m, one, {}, c);
    std::vector<std::vector<const data::EncodedSequence*>> examples{pointers(one[0])};
    const std::vector<int> gold{gold_of(one[0])};
    CHECK(m.multichoice_loss(examples, gold).item() < 0.01);
  }

  TEST_CASE("training is reproducible and restores the best dev snapshot") {
    Fixture f;
    TrainConfig c;
    c.lr = 3e-3;
    c.epochs = 2;
    c.eval_every = 3;
    c.seed = 11;
    model::CdnModel<float> a(f.config, 8), b(f.config, 8);
    const auto ra = train_ranking(a, f.train, f.dev, c);
    const auto rb = train_ranking(b, f.train, f.dev, c);
    REQUIRE(ra.history.size() == rb.history.size());
    for (std::size_t i = 0; i < ra.history.size(); ++i)
      CHECK(format_history(ra.history[i]) == format_history(rb.history[i]));
    CHECK(a.params().snapshot() == b.params().snapshot());
    CHECK(ra.steps == 8);
    CHECK(ra.best_dev_metric == doctest::Approx(metrics::mean_recall_at_k(score_groups(a, f.dev), 1)));
  }

  TEST_CASE("a non-finite loss stops training") {
    Fixture f;
    model::CdnModel<float> m(f.config, 9);
    m.params().get("classifier.b").mutable_data()[0] = std::numeric_limits<float>::quiet_NaN();
    TrainConfig c;
    c.max_steps = 2;
    CHECK_THROWS_AS(train_ranking(m, f.train, {}, c), TrainingError);
  }
}
