#pragma once

#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "cdn/data/dialogue.hpp"

namespace cdn::data {

// Pointwise TSV: "label \t utt_1 \t ... \t utt_n \t response", one candidate
// per line, `group_size` consecutive lines share a context.

/// Throws FormatError on short lines, labels outside {0,1} or a ragged
/// final group. With filter_degenerate, groups whose labels are all 0 or all
/// 1 are skipped.
std::vector<std::vector<RawDialogue>> parse_pointwise_tsv(std::istream& in,
                                                          std::size_t group_size,
                                                          bool filter_degenerate = false);

std::vector<std::vector<DialogueExample>> load_pointwise_tsv(const std::string& path,
                                                             const Vocab& vocab,
                                                             std::size_t group_size,
                                                             TokenizeMode mode = TokenizeMode::word,
                                                             bool filter_degenerate = false);

// Multichoice records: {"article": "f : ... m : ...", "options": [...],
// "answers": "B"}. Accepts one record per line or a single JSON array.

/// Splits "f : hi m : yo" into tagged utterances. A speaker tag is any token
/// immediately followed by a standalone ":" token.
std::vector<RawUtterance> split_tagged_text(const std::string& text);

std::vector<RawDialogue> parse_multichoice_json(std::istream& in);

std::vector<DialogueExample> load_multichoice_json(const std::string& path, const Vocab& vocab,
                                                   TokenizeMode mode = TokenizeMode::word);

/// Writes one record per line in the format parse_multichoice_json reads.
void write_multichoice_json(std::ostream& out, const std::vector<RawDialogue>& dialogues);

/// Reads either format from a file; pointwise groups are flattened.
std::vector<RawDialogue> read_raw_dialogues(const std::string& path, TaskKind kind,
                                            std::size_t group_size = 1);

}  // namespace cdn::data
