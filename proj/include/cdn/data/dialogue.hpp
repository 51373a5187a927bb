#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cdn/data/vocab.hpp"

namespace cdn::data {

enum class TaskKind { pointwise, multichoice };

const char* to_string(TaskKind kind);

// Speaker roles of a two-party dialogue.
inline constexpr int kSender = 0;
inline constexpr int kReceiver = 1;

struct Utterance {
  int speaker = kSender;
  std::vector<int> tokens;
  std::vector<std::uint8_t> word_start;
};

struct Candidate {
  std::vector<int> tokens;
  std::vector<std::uint8_t> word_start;
  int label = 0;
  // Explicit speaker of the response; when absent it is the opposite of the
  // last context speaker.
  std::optional<int> speaker;
};

struct DialogueExample {
  std::vector<Utterance> context;
  std::vector<Candidate> candidates;
  TaskKind kind = TaskKind::pointwise;

  /// Pointwise: exactly one candidate. Multichoice: >= 2 candidates and
  /// exactly one labelled 1. Throws FormatError otherwise.
  void validate() const;
  int gold_index() const;  // first candidate with label 1, or -1
};

// Text-level form, before tokenization. Tags are speaker prefixes such as
// "f" / "m"; absent tags mean the speaker follows alternation.
struct RawUtterance {
  std::optional<std::string> tag;
  std::string text;
};

struct RawCandidate {
  std::optional<std::string> tag;
  std::string text;
  int label = 0;
};

struct RawDialogue {
  std::vector<RawUtterance> context;
  std::vector<RawCandidate> candidates;
  TaskKind kind = TaskKind::pointwise;
};

struct SpeakerAssignment {
  std::vector<int> utterances;
  int response = kSender;
};

/// Maps speaker tags to roles 0/1 in order of first appearance. Untagged
/// utterances alternate from the previous one (the first starts at 0); an
/// untagged response takes the role opposite the last context utterance.
/// Throws UnsupportedDialogueError on a third distinct tag.
SpeakerAssignment assign_speakers(const std::vector<std::optional<std::string>>& utterance_tags,
                                  const std::optional<std::string>& response_tag);

/// Tokenizes every utterance and candidate and resolves speakers. Context
/// utterances that tokenize to nothing are dropped.
DialogueExample tokenize_dialogue(const RawDialogue& raw, const Vocab& vocab, TokenizeMode mode);

/// All utterance and candidate texts, e.g. for Vocab::build.
std::vector<std::string> collect_texts(const std::vector<RawDialogue>& dialogues);

}  // namespace cdn::data
