#include "cdn/metrics/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <sstream>

#include "cdn/error.hpp"

namespace cdn::metrics {

namespace {

void check_group(const RankedGroup& g) {
  if (g.scores.size() != g.labels.size()) throw ContractError("scores and labels differ in length");
  if (g.scores.empty()) throw ContractError("empty ranking group");
}

std::size_t positives(const RankedGroup& g) {
  return static_cast<std::size_t>(std::count_if(g.labels.begin(), g.labels.end(),
                                                [](int l) { return l != 0; }));
}

template <typename F>
double run_mean(const RankedRun& run, F&& per_group) {
  double total = 0.0;
  std::size_t kept = 0;
  for (const auto& g : run.groups) {
    check_group(g);
    if (run.filter_zero_positive && positives(g) == 0) continue;
    total += per_group(g);
    ++kept;
  }
  return kept ? total / static_cast<double>(kept) : 0.0;
}

}  // namespace

std::vector<std::size_t> rank_order(const RankedGroup& group) {
  check_group(group);
  std::vector<std::size_t> order(group.scores.size());
  std::iota(order.begin(), order.end(), 0);
  const auto& s = group.scores;
  std::stable_sort(order.begin(), order.end(), [&s](std::size_t a, std::size_t b) {
    if (std::isnan(s[a])) return false;
    if (std::isnan(s[b])) return true;
    return s[a] > s[b];
  });
  return order;
}

double recall_at_k(const RankedGroup& group, std::size_t k) {
  check_group(group);
  if (k < 1 || k > group.scores.size()) {
    throw ContractError("k = " + std::to_string(k) + " out of range for a group of " +
                        std::to_string(group.scores.size()));
  }
  const auto total = positives(group);
  if (total == 0) return 0.0;
  const auto order = rank_order(group);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < k; ++i) hit += group.labels[order[i]] != 0;
  return static_cast<double>(hit) / static_cast<double>(total);
}

double reciprocal_rank(const RankedGroup& group) {
  const auto order = rank_order(group);
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (group.labels[order[i]]) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

double average_precision(const RankedGroup& group) {
  const auto order = rank_order(group);
  double sum = 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (group.labels[order[i]]) {
      ++hit;
      sum += static_cast<double>(hit) / static_cast<double>(i + 1);
    }
  }
  return hit ? sum / static_cast<double>(hit) : 0.0;
}

double precision_at_1(const RankedGroup& group) {
  return group.labels[rank_order(group).front()] != 0 ? 1.0 : 0.0;
}

double mean_recall_at_k(const RankedRun& run, std::size_t k) {
  return run_mean(run, [k](const RankedGroup& g) { return recall_at_k(g, k); });
}
double mean_reciprocal_rank(const RankedRun& run) { return run_mean(run, reciprocal_rank); }
double mean_average_precision(const RankedRun& run) { return run_mean(run, average_precision); }
double mean_precision_at_1(const RankedRun& run) { return run_mean(run, precision_at_1); }

Report standard_report(const RankedRun& run) {
  std::size_t n = 0;
  for (const auto& g : run.groups) n = n ? std::min(n, g.scores.size()) : g.scores.size();
  Report r;
  for (std::size_t k : {1, 2, 5}) {
    if (n && k <= n) {
      r.emplace_back("R_" + std::to_string(n) + "@" + std::to_string(k), mean_recall_at_k(run, k));
    }
  }
  r.emplace_back("MAP", mean_average_precision(run));
  r.emplace_back("MRR", mean_reciprocal_rank(run));
  r.emplace_back("P@1", mean_precision_at_1(run));
  return r;
}

std::string format_report(const Report& report) {
  std::size_t width = 0;
  for (const auto& [name, _] : report) width = std::max(width, name.size());
  std::ostringstream out;
  for (const auto& [name, value] : report) {
    out << std::left << std::setw(static_cast<int>(width)) << name << " = " << std::fixed
        << std::setprecision(4) << value << '\n';
  }
  return out.str();
}

RankedRun parse_scored_tsv(std::istream& in, std::size_t group_size) {
  if (group_size == 0) throw ConfigError("group size must be positive");
  RankedRun run;
  RankedGroup current;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw FormatError("line " + std::to_string(lineno) + ": expected 'label<TAB>score'");
    }
    const auto label = line.substr(0, tab);
    if (label != "0" && label != "1") {
      throw FormatError("line " + std::to_string(lineno) + ": label must be 0 or 1");
    }
    double score = 0.0;
    try {
      std::size_t used = 0;
      score = std::stod(line.substr(tab + 1), &used);
      if (tab + 1 + used != line.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw FormatError("line " + std::to_string(lineno) + ": bad score");
    }
    current.labels.push_back(label == "1");
    current.scores.push_back(score);
    if (current.scores.size() == group_size) {
      run.groups.push_back(std::move(current));
      current = {};
    }
  }
  if (!current.scores.empty()) throw FormatError("ragged final group in scored run");
  return run;
}

}  // namespace cdn::metrics
