#include "cdn/cli/app.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include "cdn/data/loaders.hpp"
#include "cdn/error.hpp"
#include "cdn/masks/channel_masks.hpp"
#include "cdn/metrics/ranking.hpp"
#include "cdn/model/checkpoint.hpp"
#include "cdn/posttrain/nup.hpp"
#include "cdn/posttrain/records.hpp"
#include "cdn/synthetic/tasks.hpp"
#include "cdn/train/trainer.hpp"

namespace cdn::cli {

namespace fs = std::filesystem;

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

namespace {

const std::vector<std::string> kModelKeys = {
    "d", "heads", "encoder_layers", "ffn_hidden", "n_decoupling_blocks", "n_bigru_layers",
    "aggregation", "gate_variant", "channel_ablation", "integration", "decoupling_residual",
    "positions", "max_len", "max_utts", "dropout"};
const std::vector<std::string> kTrainKeys = {"batch_size",      "lr",           "epochs",
                                             "max_steps",       "warmup_fraction",
                                             "grad_clip_norm",  "weight_decay", "eval_every"};
const std::vector<std::string> kMaskKeys = {"level", "mask_ratio", "span_p", "span_max_len"};

std::string flag(const std::string& key) {
  std::string f = "--" + key;
  for (auto& c : f) c = c == '_' ? '-' : c;
  return f;
}

// One subcommand's options, all kept as strings keyed by their config name,
// so flags, --config files and the resolved echo share one namespace.
class Options {
 public:
  explicit Options(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_path_, "key = value file; explicit flags win");
  }

  void add(const std::string& key, const std::string& help, std::string default_value = "") {
    values_[key] = std::move(default_value);
    options_[key] = app_->add_option(flag(key), values_[key], help);
  }
  void add_all(const std::vector<std::string>& keys, const std::string& help) {
    for (const auto& k : keys) add(k, help);
  }

  // Merges the config file under the explicit flags.
  void resolve() {
    if (config_path_.empty()) return;
    std::ifstream in(config_path_);
    if (!in) throw ConfigError("cannot read config file " + config_path_);
    std::stringstream text;
    text << in.rdbuf();
    for (const auto& [k, v] : parse_key_values(text.str())) {
      auto it = options_.find(k);
      if (it == options_.end()) {
        throw ConfigError("unknown key '" + k + "' in " + config_path_ + " for '" + app_->get_name() + "'");
      }
      if (it->second->count() == 0) values_[k] = v;
    }
  }

  const std::string& get(const std::string& key) const { return values_.at(key); }
  bool given(const std::string& key) const { return !values_.at(key).empty(); }
  void set(const std::string& key, std::string v) { values_.at(key) = std::move(v); }

  std::string echo() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) {
      if (!v.empty()) out << k << " = " << v << '\n';
    }
    return out.str();
  }

 private:
  CLI::App* app_;
  std::string config_path_;
  std::map<std::string, std::string> values_;
  std::map<std::string, CLI::Option*> options_;
};

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

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

fs::path prepare_out(const Options& o) {
  if (!o.given("out")) throw ConfigError("--out is required");
  fs::path out = o.get("out");
  fs::create_directories(out);
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

void write_resolved(const fs::path& dir, const std::string& subcommand, const Options& o) {
  write_text(dir / "resolved_config.txt", "# cdn " + subcommand + "\n" + o.echo());
}

data::TaskKind data_kind(const std::string& task) {
  if (task == "pointwise") return data::TaskKind::pointwise;
  if (task == "multichoice") return data::TaskKind::multichoice;
  throw ConfigError("--task must be pointwise or multichoice, got '" + task + "'");
}

data::TokenizeMode tokenize_mode(const std::string& s) {
  if (s == "word") return data::TokenizeMode::word;
  if (s == "subword") return data::TokenizeMode::subword;
  throw ConfigError("--tokenize must be word or subword");
}

// Locates <dir>/<split>.jsonl or .tsv (or accepts a file path for "train").
std::optional<fs::path> split_file(const fs::path& data, const std::string& split,
                                   data::TaskKind kind) {
  if (fs::is_regular_file(data)) {
    return split == "train" ? std::optional<fs::path>(data) : std::nullopt;
  }
  const auto p = data / (split + (kind == data::TaskKind::multichoice ? ".jsonl" : ".tsv"));
  return fs::exists(p) ? std::optional<fs::path>(p) : std::nullopt;
}

struct Corpus {
  data::Vocab vocab;
  std::vector<data::DialogueExample> train_flat;  // all examples, for post-training
  std::vector<train::RankingGroup> train, dev;
};

std::vector<std::vector<data::DialogueExample>> load_groups(const fs::path& file,
                                                            const data::Vocab& vocab,
                                                            data::TaskKind kind,
                                                            std::size_t group_size,
                                                            data::TokenizeMode mode, bool filter) {
  if (kind == data::TaskKind::pointwise) {
    return data::load_pointwise_tsv(file.string(), vocab, group_size, mode, filter);
  }
  std::vector<std::vector<data::DialogueExample>> out;
  for (auto& ex : data::load_multichoice_json(file.string(), vocab, mode)) out.push_back({std::move(ex)});
  return out;
}

std::vector<train::RankingGroup> encode(const std::vector<std::vector<data::DialogueExample>>& groups,
                                        data::TaskKind kind, const model::ModelConfig& mc) {
  if (kind == data::TaskKind::pointwise) return train::encode_groups(groups, mc.max_len, mc.max_utts);
  std::vector<data::DialogueExample> flat;
  for (const auto& g : groups) flat.push_back(g.front());
  return train::encode_groups(flat, mc.max_len, mc.max_utts);
}

// Shared by train and posttrain: data options and model construction.
void add_data_options(Options& o) {
  o.add("data", "directory with train/dev files (.jsonl multichoice, .tsv pointwise)");
  o.add("out", "output directory");
  o.add("seed", "single seed for all randomness", "0");
  o.add("task", "pointwise | multichoice", "multichoice");
  o.add("group_size", "candidates per context in pointwise TSV", "10");
  o.add("tokenize", "word | subword", "word");
  o.add("filter_degenerate", "skip pointwise groups without both labels", "false");
  o.add("vocab", "vocabulary file (default: <data>/vocab.txt, else built from train)");
  o.add("checkpoint", "initialize from this checkpoint");
  o.add_all(kModelKeys, "model setting");
  o.add_all(kTrainKeys, "training setting");
}

// Defaults that depend on the task.
void apply_task_defaults(Options& o) {
  if (!o.given("max_len")) o.set("max_len", o.get("task") == "pointwise" ? "384" : "256");
  if (!o.given("max_utts")) o.set("max_utts", "20");
}

data::Vocab resolve_vocab(const Options& o, const fs::path& train_file, data::TaskKind kind) {
  if (o.given("vocab")) return data::Vocab::load(o.get("vocab"));
  const fs::path data_dir = o.get("data");
  if (fs::is_directory(data_dir) && fs::exists(data_dir / "vocab.txt")) {
    return data::Vocab::load((data_dir / "vocab.txt").string());
  }
  const auto raw = data::read_raw_dialogues(train_file.string(), kind, to_size("group_size", o.get("group_size")));
  return data::Vocab::build(data::collect_texts(raw));
}

model::ModelConfig model_config(const Options& o, std::size_t vocab_size) {
  model::ModelConfig mc;
  if (o.given("checkpoint")) mc = model::read_checkpoint_config(o.get("checkpoint"));
  mc.vocab_size = vocab_size;
  for (const auto& k : kModelKeys) {
    if (o.given(k)) mc.set(k, o.get(k));
  }
  mc.validate();
  return mc;
}

train::TrainConfig train_config(const Options& o, train::TrainTask task, const fs::path& out) {
  train::TrainConfig tc;
  tc.task = task;
  tc.seed = to_size("seed", o.get("seed"));
  for (const auto& k : kTrainKeys) {
    if (o.given(k)) tc.set(k, o.get(k));
  }
  tc.checkpoint_path = (out / "model.ckpt").string();
  tc.validate();
  return tc;
}

Corpus load_corpus(const Options& o) {
  if (!o.given("data")) throw ConfigError("--data is required");
  const auto kind = data_kind(o.get("task"));
  const auto train_file = split_file(o.get("data"), "train", kind);
  if (!train_file) throw ConfigError("no training file under " + o.get("data"));
  Corpus c;
  c.vocab = resolve_vocab(o, *train_file, kind);
  const auto mode = tokenize_mode(o.get("tokenize"));
  const auto gs = to_size("group_size", o.get("group_size"));
  const bool filter = to_bool("filter_degenerate", o.get("filter_degenerate"));
  auto groups = load_groups(*train_file, c.vocab, kind, gs, mode, filter);
  for (const auto& g : groups) c.train_flat.insert(c.train_flat.end(), g.begin(), g.end());
  const auto mc = model_config(o, c.vocab.size());
  c.train = encode(groups, kind, mc);
  if (auto dev_file = split_file(o.get("data"), "dev", kind)) {
    c.dev = encode(load_groups(*dev_file, c.vocab, kind, gs, mode, filter), kind, mc);
  }
  return c;
}

void open_history(const fs::path& out, std::ofstream& file) {
  file.open(out / "history.txt", std::ios::trunc);
  if (!file) throw Error("cannot write history in " + out.string());
}

int cmd_train(const Options& o) {
  const auto out = prepare_out(o);
  const auto corpus = load_corpus(o);
  const auto mc = model_config(o, corpus.vocab.size());
  const auto task = o.get("task") == "pointwise" ? train::TrainTask::pointwise : train::TrainTask::multichoice;
  const auto tc = train_config(o, task, out);
  write_resolved(out, "train", o);
  corpus.vocab.save((out / "vocab.txt").string());

  model::CdnModel<float> model(mc, tc.seed);
  if (o.given("checkpoint")) model::load_checkpoint(o.get("checkpoint"), model);
  std::ofstream history;
  open_history(out, history);
  const auto result = train::train_ranking(model, corpus.train, corpus.dev, tc, [&](const train::HistoryEntry& e) {
    history << train::format_history(e) << '\n';
  });
  std::cout << "trained " << result.steps << " steps; checkpoint " << tc.checkpoint_path << '\n';
  if (!corpus.dev.empty()) {
    const auto report = metrics::format_report(metrics::standard_report(train::score_groups(model, corpus.dev)));
    write_text(out / "dev_report.txt", report);
    std::cout << report;
  }
  return 0;
}

int cmd_posttrain(const Options& o) {
  const auto out = prepare_out(o);
  const auto corpus = load_corpus(o);
  const auto mc = model_config(o, corpus.vocab.size());
  const auto tc = train_config(o, train::TrainTask::posttrain, out);
  posttrain::MaskingPolicy policy;
  policy.level = posttrain::parse_mask_level(o.get("level"));
  if (o.given("mask_ratio")) policy.mask_ratio = std::stod(o.get("mask_ratio"));
  if (o.given("span_p")) policy.span_p = std::stod(o.get("span_p"));
  if (o.given("span_max_len")) policy.span_max_len = to_size("span_max_len", o.get("span_max_len"));
  policy.seed = tc.seed;
  policy.validate();
  write_resolved(out, "posttrain", o);
  corpus.vocab.save((out / "vocab.txt").string());

  const auto stream =
      posttrain::build_posttrain_stream(corpus.train_flat, policy, mc.vocab_size, mc.max_len, mc.max_utts);
  posttrain::write_records((out / "posttrain.bin").string(), stream);
  model::CdnModel<float> model(mc, tc.seed);
  if (o.given("checkpoint")) model::load_checkpoint(o.get("checkpoint"), model);
  std::ofstream history;
  open_history(out, history);
  const auto result = train::train_posttrain(model, stream, tc, [&](const train::HistoryEntry& e) {
    history << train::format_history(e) << '\n';
  });
  std::cout << stream.size() << " post-training examples; " << result.steps << " steps; checkpoint "
            << tc.checkpoint_path << '\n';
  return 0;
}

int cmd_eval(const Options& o) {
  metrics::RankedRun run;
  if (o.given("run")) {
    std::ifstream in(o.get("run"));
    if (!in) throw Error("cannot open " + o.get("run"));
    run = metrics::parse_scored_tsv(in, to_size("group_size", o.get("group_size")));
  } else {
    if (!o.given("checkpoint") || !o.given("data")) {
      throw ConfigError("eval needs --run, or --checkpoint with --data");
    }
    const auto kind = data_kind(o.get("task"));
    const fs::path ckpt = o.get("checkpoint");
    const auto vocab = data::Vocab::load(o.given("vocab") ? o.get("vocab")
                                                          : (ckpt.parent_path() / "vocab.txt").string());
    const auto mc = model::read_checkpoint_config(ckpt.string());
    model::CdnModel<float> model(mc, 0);
    model::load_checkpoint(ckpt.string(), model);
    const auto groups = load_groups(o.get("data"), vocab, kind, to_size("group_size", o.get("group_size")),
                                    tokenize_mode(o.get("tokenize")), false);
    run = train::score_groups(model, encode(groups, kind, mc));
  }
  run.filter_zero_positive = to_bool("filter_zero_positive", o.get("filter_zero_positive"));
  const auto report = metrics::format_report(metrics::standard_report(run));
  std::cout << report;
  if (o.given("out")) {
    const auto out = prepare_out(o);
    write_text(out / "report.txt", report);
    write_resolved(out, "eval", o);
  }
  return 0;
}

int cmd_gen_synthetic(const Options& o) {
  const auto out = prepare_out(o);
  synthetic::SyntheticSpec spec;
  spec.task = synthetic::parse_task(o.get("task"));
  spec.seed = to_size("seed", o.get("seed"));
  spec.vocab_size = to_size("vocab_size", o.get("vocab_size"));
  spec.n_utts = to_size("n_utts", o.get("n_utts"));
  spec.n_candidates = to_size("n_candidates", o.get("n_candidates"));
  spec.filler_len = to_size("filler_len", o.get("filler_len"));
  spec.n_train = to_size("n_train", o.get("n_train"));
  spec.n_dev = to_size("n_dev", o.get("n_dev"));
  spec.validate();
  const auto split = synthetic::generate_split(spec);
  for (const auto& [name, dialogues] : {std::pair{"train.jsonl", &split.train}, std::pair{"dev.jsonl", &split.dev}}) {
    std::ofstream f(out / name, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + (out / name).string());
    data::write_multichoice_json(f, *dialogues);
  }
  synthetic::synthetic_vocab(spec).save((out / "vocab.txt").string());
  write_resolved(out, "gen-synthetic", o);
  std::cout << "wrote " << split.train.size() << " train and " << split.dev.size() << " dev dialogues to "
            << out.string() << '\n';
  return 0;
}

std::vector<int> int_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(static_cast<int>(to_size(key, item)));
  return out;
}

int cmd_dump_masks(const Options& o) {
  data::EncodedSequence seq;
  if (o.given("segments")) {
    seq.utt_index = int_list("segments", o.get("segments"));
    seq.speaker = o.given("speakers") ? int_list("speakers", o.get("speakers"))
                                      : std::vector<int>(seq.utt_index.size(), 0);
    if (seq.speaker.size() != seq.utt_index.size()) throw ConfigError("--speakers and --segments differ in length");
    const auto n = seq.utt_index.size();
    const auto valid = o.given("valid") ? to_size("valid", o.get("valid")) : n;
    seq.ids.assign(n, data::kUnk);
    seq.valid.assign(n, 0);
    for (std::size_t i = 0; i < std::min(valid, n); ++i) seq.valid[i] = 1;
    seq.word_start.assign(n, 0);
    seq.n_utts = n ? *std::max_element(seq.utt_index.begin(), seq.utt_index.end()) + 1 : 0;
  } else if (o.given("data")) {
    const auto kind = data_kind(o.get("task"));
    const auto raw = data::read_raw_dialogues(o.get("data"), kind, to_size("group_size", o.get("group_size")));
    const auto index = to_size("index", o.get("index"));
    if (index >= raw.size()) throw ConfigError("--index out of range");
    const auto vocab = o.given("vocab") ? data::Vocab::load(o.get("vocab")) : data::Vocab::build(data::collect_texts(raw));
    const auto ex = data::tokenize_dialogue(raw[index], vocab, data::TokenizeMode::word);
    const auto max_len = o.given("max_len") ? to_size("max_len", o.get("max_len")) : std::size_t{256};
    seq = data::encode_example(ex, to_size("candidate", o.get("candidate")), max_len);
    seq = train::trim_padding(seq, seq.valid_count());
  } else {
    throw ConfigError("dump-masks needs --segments (and --speakers) or --data");
  }
  const auto masks = masks::build_masks(seq);
  static const char* names[4] = {"M1 same utterance", "M2 other utterance", "M3 same speaker",
                                 "M4 other speaker"};
  for (std::size_t k = 0; k < 4; ++k) {
    if (k) std::cout << '\n';
    std::cout << names[k] << '\n' << masks::render(masks.allowed[k]);
  }
  return 0;
}

int cmd_inspect(const Options& o) {
  if (!o.given("checkpoint")) throw ConfigError("--checkpoint is required");
  const auto s = model::inspect_checkpoint(o.get("checkpoint"));
  std::cout << s.config.serialize() << "parameters = " << s.n_params << "\nscalars = " << s.n_scalars << '\n'
            << s.listing;
  return 0;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Channel-aware decoupling network for dialogue response selection"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  auto* train_cmd = app.add_subcommand("train", "fine-tune on pointwise or multichoice data");
  Options train_opts(train_cmd);
  add_data_options(train_opts);

  auto* post_cmd = app.add_subcommand("posttrain", "MLM + next-utterance post-training");
  Options post_opts(post_cmd);
  add_data_options(post_opts);
  post_opts.add("level", "subword | whole_word | span", "subword");
  for (const auto& k : {"mask_ratio", "span_p", "span_max_len"}) post_opts.add(k, "masking setting");

  auto* eval_cmd = app.add_subcommand("eval", "ranking metrics for a scored run or a checkpoint");
  Options eval_opts(eval_cmd);
  eval_opts.add("run", "pre-scored TSV: label<TAB>score per line");
  eval_opts.add("group_size", "candidates per context", "10");
  eval_opts.add("checkpoint", "model checkpoint to score --data with");
  eval_opts.add("data", "data file to score");
  eval_opts.add("task", "pointwise | multichoice", "multichoice");
  eval_opts.add("vocab", "vocabulary (default: next to the checkpoint)");
  eval_opts.add("tokenize", "word | subword", "word");
  eval_opts.add("filter_zero_positive", "drop groups without positives", "false");
  eval_opts.add("out", "optional directory for report.txt");

  auto* gen_cmd = app.add_subcommand("gen-synthetic", "write a synthetic multichoice task");
  Options gen_opts(gen_cmd);
  gen_opts.add("task", "speaker_echo | utterance_order", "speaker_echo");
  gen_opts.add("seed", "generator seed", "0");
  gen_opts.add("out", "output directory", "synthetic");
  gen_opts.add("vocab_size", "content tokens", "40");
  gen_opts.add("n_utts", "utterances per dialogue", "4");
  gen_opts.add("n_candidates", "options per dialogue", "4");
  gen_opts.add("filler_len", "filler tokens per utterance", "2");
  gen_opts.add("n_train", "training dialogues", "2000");
  gen_opts.add("n_dev", "dev dialogues", "200");

  auto* dump_cmd = app.add_subcommand("dump-masks", "print the four channel masks as 0/1 grids");
  Options dump_opts(dump_cmd);
  dump_opts.add("segments", "comma-separated utterance index per position");
  dump_opts.add("speakers", "comma-separated speaker per position");
  dump_opts.add("valid", "number of leading valid positions");
  dump_opts.add("data", "data file to take an example from");
  dump_opts.add("task", "pointwise | multichoice", "multichoice");
  dump_opts.add("group_size", "candidates per context in pointwise TSV", "1");
  dump_opts.add("index", "example index", "0");
  dump_opts.add("candidate", "candidate index", "0");
  dump_opts.add("vocab", "vocabulary file");
  dump_opts.add("max_len", "maximum sequence length");

  auto* inspect_cmd = app.add_subcommand("inspect-checkpoint", "print a checkpoint's config and tensors");
  Options inspect_opts(inspect_cmd);
  inspect_opts.add("checkpoint", "checkpoint file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::vector<std::tuple<CLI::App*, Options*, int (*)(const Options&)>> commands = {
      {train_cmd, &train_opts, cmd_train},       {post_cmd, &post_opts, cmd_posttrain},
      {eval_cmd, &eval_opts, cmd_eval},          {gen_cmd, &gen_opts, cmd_gen_synthetic},
      {dump_cmd, &dump_opts, cmd_dump_masks},    {inspect_cmd, &inspect_opts, cmd_inspect}};
  try {
    for (auto& [cmd, opts, fn] : commands) {
      if (!cmd->parsed()) continue;
      opts->resolve();
      if (opts == &train_opts || opts == &post_opts) apply_task_defaults(*opts);
      return fn(*opts);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& c : msg) c = c == '\n' ? ' ' : c;
    std::cerr << "error: " << msg << '\n';
    return 1;
  }
  return 2;
}

}  // namespace cdn::cli
