#include "cdn/data/loaders.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>

#include "cdn/error.hpp"

namespace cdn::data {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return in;
}

}  // namespace

std::vector<std::vector<RawDialogue>> parse_pointwise_tsv(std::istream& in,
                                                          std::size_t group_size,
                                                          bool filter_degenerate) {
  if (group_size == 0) throw ConfigError("group_size must be >= 1");
  std::vector<std::vector<RawDialogue>> groups;
  std::vector<RawDialogue> current;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    const std::string where = "line " + std::to_string(line_no);
    if (fields.size() < 3) throw FormatError(where + ": expected >= 3 tab-separated fields");
    if (fields[0] != "0" && fields[0] != "1") {
      throw FormatError(where + ": label must be 0 or 1, got '" + fields[0] + "'");
    }
    RawDialogue d;
    d.kind = TaskKind::pointwise;
    for (std::size_t i = 1; i + 1 < fields.size(); ++i) d.context.push_back({std::nullopt, fields[i]});
    d.candidates.push_back({std::nullopt, fields.back(), fields[0] == "1" ? 1 : 0});
    current.push_back(std::move(d));
    if (current.size() == group_size) {
      const auto positives = std::count_if(current.begin(), current.end(), [](const RawDialogue& r) {
        return r.candidates[0].label == 1;
      });
      const bool degenerate =
          positives == 0 || static_cast<std::size_t>(positives) == current.size();
      if (!(filter_degenerate && degenerate)) groups.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) {
    throw FormatError("ragged final group: " + std::to_string(current.size()) + " lines for group size " +
                      std::to_string(group_size));
  }
  return groups;
}

std::vector<std::vector<DialogueExample>> load_pointwise_tsv(const std::string& path,
                                                             const Vocab& vocab,
                                                             std::size_t group_size,
                                                             TokenizeMode mode,
                                                             bool filter_degenerate) {
  auto in = open_or_throw(path);
  std::vector<std::vector<DialogueExample>> out;
  for (const auto& group : parse_pointwise_tsv(in, group_size, filter_degenerate)) {
    std::vector<DialogueExample> g;
    for (const auto& raw : group) g.push_back(tokenize_dialogue(raw, vocab, mode));
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<RawUtterance> split_tagged_text(const std::string& text) {
  const auto words = split_whitespace(text);
  std::vector<RawUtterance> out;
  RawUtterance current;
  bool open = false;
  auto flush = [&] {
    if (open && (current.tag || !current.text.empty())) out.push_back(current);
    current = RawUtterance{};
    open = false;
  };
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i + 1 < words.size() && words[i + 1] == ":" && words[i] != ":") {
      flush();
      current.tag = words[i];
      open = true;
      ++i;
      continue;
    }
    if (!current.text.empty()) current.text += ' ';
    current.text += words[i];
    open = true;
  }
  flush();
  return out;
}

namespace {

RawDialogue parse_record(const nlohmann::json& rec, std::size_t index) {
  const std::string where = "record " + std::to_string(index);
  if (!rec.is_object()) throw FormatError(where + ": not an object");
  if (!rec.contains("article") || !rec["article"].is_string()) {
    throw FormatError(where + ": missing string field 'article'");
  }
  if (!rec.contains("options") || !rec["options"].is_array()) {
    throw FormatError(where + ": missing array field 'options'");
  }
  if (!rec.contains("answers") || !rec["answers"].is_string()) {
    throw FormatError(where + ": missing answer letter");
  }
  RawDialogue d;
  d.kind = TaskKind::multichoice;
  d.context = split_tagged_text(rec["article"].get<std::string>());
  const auto& options = rec["options"];
  const std::string answer = rec["answers"].get<std::string>();
  if (answer.size() != 1 || answer[0] < 'A' || answer[0] > 'Z') {
    throw FormatError(where + ": invalid answer '" + answer + "'");
  }
  const std::size_t gold = static_cast<std::size_t>(answer[0] - 'A');
  if (gold >= options.size()) {
    throw FormatError(where + ": answer '" + answer + "' but only " +
                      std::to_string(options.size()) + " options");
  }
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (!options[i].is_string()) throw FormatError(where + ": option is not a string");
    auto parts = split_tagged_text(options[i].get<std::string>());
    RawCandidate c;
    if (parts.size() == 1) {
      c.tag = parts[0].tag;
      c.text = parts[0].text;
    } else {
      c.text = options[i].get<std::string>();
    }
    c.label = i == gold ? 1 : 0;
    d.candidates.push_back(std::move(c));
  }
  return d;
}

}  // namespace

std::vector<RawDialogue> parse_multichoice_json(std::istream& in) {
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<RawDialogue> out;
  const auto first = content.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return out;
  try {
    if (content[first] == '[') {
      const auto arr = nlohmann::json::parse(content);
      for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(parse_record(arr[i], i));
    } else {
      std::size_t start = 0, index = 0;
      while (start < content.size()) {
        auto end = content.find('\n', start);
        if (end == std::string::npos) end = content.size();
        const std::string line = content.substr(start, end - start);
        start = end + 1;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(parse_record(nlohmann::json::parse(line), index++));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed JSON: ") + e.what());
  }
  return out;
}

std::vector<DialogueExample> load_multichoice_json(const std::string& path, const Vocab& vocab,
                                                   TokenizeMode mode) {
  auto in = open_or_throw(path);
  std::vector<DialogueExample> out;
  for (const auto& raw : parse_multichoice_json(in)) out.push_back(tokenize_dialogue(raw, vocab, mode));
  return out;
}

void write_multichoice_json(std::ostream& out, const std::vector<RawDialogue>& dialogues) {
  std::size_t index = 0;
  for (const auto& d : dialogues) {
    std::string article;
    for (const auto& u : d.context) {
      if (!article.empty()) article += ' ';
      if (u.tag) article += *u.tag + " : ";
      article += u.text;
    }
    nlohmann::json options = nlohmann::json::array();
    char answer = '?';
    for (std::size_t i = 0; i < d.candidates.size(); ++i) {
      const auto& c = d.candidates[i];
      options.push_back(c.tag ? *c.tag + " : " + c.text : c.text);
      if (c.label == 1) answer = static_cast<char>('A' + i);
    }
    nlohmann::json rec;
    rec["id"] = index++;
    rec["article"] = article;
    rec["options"] = options;
    rec["answers"] = std::string(1, answer);
    out << rec.dump() << '\n';
  }
}

std::vector<RawDialogue> read_raw_dialogues(const std::string& path, TaskKind kind,
                                            std::size_t group_size) {
  auto in = open_or_throw(path);
  if (kind == TaskKind::multichoice) return parse_multichoice_json(in);
  std::vector<RawDialogue> out;
  for (auto& g : parse_pointwise_tsv(in, group_size))
    for (auto& d : g) out.push_back(std::move(d));
  return out;
}

}  // namespace cdn::data
