#include "cdn/data/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "cdn/error.hpp"

namespace cdn::data {

Vocab::Vocab() {
  for (const char* s : {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"}) add(s);
}

Vocab Vocab::build(const std::vector<std::string>& texts, std::size_t min_freq) {
  std::map<std::string, std::size_t> counts;
  for (const auto& text : texts)
    for (auto& w : split_whitespace(text)) ++counts[w];
  std::vector<std::pair<std::string, std::size_t>> entries(counts.begin(), counts.end());
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab vocab;
  for (const auto& [token, count] : entries)
    if (count >= min_freq) vocab.add(token);
  return vocab;
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open vocab file " + path);
  Vocab vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) throw FormatError(path + ":" + std::to_string(line_no) + ": empty token");
    if (vocab.contains(line)) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": duplicate token " + line);
    }
    vocab.add(line);
  }
  return vocab;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write vocab file " + path);
  for (std::size_t i = kNumSpecials; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
}

int Vocab::add(const std::string& token) {
  auto it = ids_.find(token);
  if (it != ids_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  ids_.emplace(token, id);
  return id;
}

int Vocab::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const {
  return ids_.count(std::string(token)) != 0;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw ContractError("token id " + std::to_string(id) + " out of vocabulary range");
  }
  return tokens_[id];
}

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

Tokenized tokenize(std::string_view text, const Vocab& vocab, TokenizeMode mode) {
  Tokenized out;
  for (const auto& word : split_whitespace(text)) {
    if (mode == TokenizeMode::word || vocab.contains(word)) {
      out.ids.push_back(vocab.id(word));
      out.word_start.push_back(1);
      continue;
    }
    std::vector<int> pieces;
    std::size_t start = 0;
    bool covered = true;
    while (start < word.size()) {
      std::size_t end = word.size();
      int found = -1;
      for (; end > start; --end) {
        std::string piece = word.substr(start, end - start);
        if (start > 0) piece.insert(0, Vocab::kContinuation);
        if (vocab.contains(piece)) {
          found = vocab.id(piece);
          break;
        }
      }
      if (found < 0) {
        covered = false;
        break;
      }
      pieces.push_back(found);
      start = end;
    }
    if (!covered) pieces.assign(1, kUnk);
    for (std::size_t k = 0; k < pieces.size(); ++k) {
      out.ids.push_back(pieces[k]);
      out.word_start.push_back(k == 0 ? 1 : 0);
    }
  }
  return out;
}

}  // namespace cdn::data
