#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cdn::data {

inline constexpr int kPad = 0;
inline constexpr int kUnk = 1;
inline constexpr int kCls = 2;
inline constexpr int kSep = 3;
inline constexpr int kMask = 4;
inline constexpr int kNumSpecials = 5;

inline bool is_special(int id) { return id >= 0 && id < kNumSpecials; }

enum class TokenizeMode { word, subword };

/// Token <-> id map. Ids are dense; the five specials occupy 0..4.
class Vocab {
 public:
  static constexpr std::string_view kContinuation = "##";

  Vocab();

  /// Builds a vocabulary from whitespace-split texts. Tokens below
  /// min_freq are dropped; the rest are ordered by descending count, then
  /// lexicographically.
  static Vocab build(const std::vector<std::string>& texts, std::size_t min_freq = 1);

  /// One token per line; line i holds id kNumSpecials + i.
  static Vocab load(const std::string& path);
  void save(const std::string& path) const;

  int add(const std::string& token);
  int id(std::string_view token) const;  // kUnk when absent
  bool contains(std::string_view token) const;
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

struct Tokenized {
  std::vector<int> ids;
  std::vector<std::uint8_t> word_start;  // 1 on the first piece of each word
};

/// Word mode: one id per whitespace-separated word. Subword mode: greedy
/// longest-match into "##"-continued pieces; a word with no full cover
/// becomes a single [UNK].
Tokenized tokenize(std::string_view text, const Vocab& vocab, TokenizeMode mode);

std::vector<std::string> split_whitespace(std::string_view text);

}  // namespace cdn::data
