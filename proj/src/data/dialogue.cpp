#include "cdn/data/dialogue.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "cdn/error.hpp"

namespace cdn::data {

const char* to_string(TaskKind kind) {
  return kind == TaskKind::pointwise ? "pointwise" : "multichoice";
}

void DialogueExample::validate() const {
  if (kind == TaskKind::pointwise) {
    if (candidates.size() != 1) throw FormatError("pointwise example needs exactly 1 candidate");
  } else {
    if (candidates.size() < 2) throw FormatError("multichoice example needs >= 2 candidates");
    const auto positives = std::count_if(candidates.begin(), candidates.end(),
                                         [](const Candidate& c) { return c.label == 1; });
    if (positives != 1) throw FormatError("multichoice example needs exactly one positive");
  }
  for (const auto& c : candidates)
    if (c.label != 0 && c.label != 1) throw FormatError("candidate label must be 0 or 1");
  for (const auto& u : context)
    if (u.speaker != kSender && u.speaker != kReceiver)
      throw FormatError("speaker index must be 0 or 1");
}

int DialogueExample::gold_index() const {
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (candidates[i].label == 1) return static_cast<int>(i);
  return -1;
}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

class TagMap {
 public:
  int role(const std::string& raw_tag) {
    const std::string tag = lower(raw_tag);
    auto it = roles_.find(tag);
    if (it != roles_.end()) return it->second;
    if (roles_.size() == 2) {
      throw UnsupportedDialogueError("more than two speakers (tag '" + raw_tag + "')");
    }
    const int r = static_cast<int>(roles_.size());
    roles_.emplace(tag, r);
    return r;
  }

 private:
  std::map<std::string, int> roles_;
};

}  // namespace

SpeakerAssignment assign_speakers(const std::vector<std::optional<std::string>>& utterance_tags,
                                  const std::optional<std::string>& response_tag) {
  SpeakerAssignment out;
  TagMap tags;
  int previous = -1;
  for (const auto& tag : utterance_tags) {
    const int role = tag ? tags.role(*tag) : (previous < 0 ? kSender : 1 - previous);
    out.utterances.push_back(role);
    previous = role;
  }
  if (response_tag) {
    out.response = tags.role(*response_tag);
  } else {
    out.response = previous < 0 ? kSender : 1 - previous;
  }
  return out;
}

DialogueExample tokenize_dialogue(const RawDialogue& raw, const Vocab& vocab, TokenizeMode mode) {
  DialogueExample ex;
  ex.kind = raw.kind;

  std::vector<Tokenized> pieces;
  std::vector<std::optional<std::string>> tags;
  for (const auto& u : raw.context) {
    auto t = tokenize(u.text, vocab, mode);
    if (t.ids.empty()) continue;
    pieces.push_back(std::move(t));
    tags.push_back(u.tag);
  }
  // Candidate tags share the context's tag map, so resolve them together.
  for (const auto& c : raw.candidates) {
    const auto roles = assign_speakers(tags, c.tag);
    Candidate cand;
    auto t = tokenize(c.text, vocab, mode);
    cand.tokens = std::move(t.ids);
    cand.word_start = std::move(t.word_start);
    cand.label = c.label;
    if (c.tag) cand.speaker = roles.response;
    ex.candidates.push_back(std::move(cand));
  }
  const auto roles = assign_speakers(tags, std::nullopt);
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    Utterance u;
    u.speaker = roles.utterances[i];
    u.tokens = std::move(pieces[i].ids);
    u.word_start = std::move(pieces[i].word_start);
    ex.context.push_back(std::move(u));
  }
  ex.validate();
  return ex;
}

std::vector<std::string> collect_texts(const std::vector<RawDialogue>& dialogues) {
  std::vector<std::string> out;
  for (const auto& d : dialogues) {
    for (const auto& u : d.context) out.push_back(u.text);
    for (const auto& c : d.candidates) out.push_back(c.text);
  }
  return out;
}

}  // namespace cdn::data
