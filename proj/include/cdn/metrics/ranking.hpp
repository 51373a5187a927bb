#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace cdn::metrics {

struct RankedGroup {
  std::vector<double> scores;
  std::vector<int> labels;  // 0/1
};

struct RankedRun {
  std::vector<RankedGroup> groups;
  // Drop groups without any positive from run-level means; otherwise they
  // contribute 0.
  bool filter_zero_positive = false;
};

/// Candidate indices by descending score; ties keep ascending index. NaN
/// scores rank last.
std::vector<std::size_t> rank_order(const RankedGroup& group);

/// Positives among the top k over all positives. ContractError unless
/// 1 <= k <= n.
double recall_at_k(const RankedGroup& group, std::size_t k);
double reciprocal_rank(const RankedGroup& group);
double average_precision(const RankedGroup& group);
double precision_at_1(const RankedGroup& group);

// Run-level unweighted means over the retained groups (0 for an empty run).
double mean_recall_at_k(const RankedRun& run, std::size_t k);
double mean_reciprocal_rank(const RankedRun& run);
double mean_average_precision(const RankedRun& run);
double mean_precision_at_1(const RankedRun& run);

using Report = std::vector<std::pair<std::string, double>>;

/// R_n@1, R_n@2, R_n@5 (those with k <= n), MAP, MRR, P@1, where n is the
/// smallest group size in the run.
Report standard_report(const RankedRun& run);

/// One "name = value" line per entry, names padded to a common width,
/// values with 4 decimals.
std::string format_report(const Report& report);

/// Groups from "label \t score" lines, `group_size` lines per group.
/// Throws FormatError on malformed lines or a ragged tail.
RankedRun parse_scored_tsv(std::istream& in, std::size_t group_size);

}  // namespace cdn::metrics
