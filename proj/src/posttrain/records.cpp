#include "cdn/posttrain/records.hpp"

#include <fstream>

#include "cdn/error.hpp"

namespace cdn::posttrain {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("post-training record truncated");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

std::uint8_t get_u8(std::istream& in) {
  char c;
  if (!in.get(c)) throw FormatError("post-training record truncated");
  return static_cast<std::uint8_t>(c);
}

}  // namespace

void write_record(std::ostream& out, const PosttrainExample& ex) {
  out.put(static_cast<char>(ex.kind));
  put_u32(out, static_cast<std::uint32_t>(ex.ids.size()));
  for (int id : ex.ids) put_u32(out, static_cast<std::uint32_t>(id));
  put_u32(out, static_cast<std::uint32_t>(ex.targets.size()));
  for (const auto& t : ex.targets) {
    put_u32(out, static_cast<std::uint32_t>(t.position));
    put_u32(out, static_cast<std::uint32_t>(t.id));
  }
  out.put(static_cast<char>(ex.label));
}

void write_records(std::ostream& out, const std::vector<PosttrainExample>& examples) {
  for (const auto& ex : examples) write_record(out, ex);
  if (!out) throw Error("failed writing post-training records");
}

void write_records(const std::string& path, const std::vector<PosttrainExample>& examples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  write_records(out, examples);
}

std::vector<PosttrainExample> read_records(std::istream& in) {
  std::vector<PosttrainExample> out;
  while (in.peek() != std::char_traits<char>::eof()) {
    PosttrainExample ex;
    const auto kind = get_u8(in);
    if (kind > 1) throw FormatError("unknown record kind " + std::to_string(kind));
    ex.kind = static_cast<ExampleKind>(kind);
    ex.ids.resize(get_u32(in));
    for (auto& id : ex.ids) id = static_cast<int>(get_u32(in));
    ex.targets.resize(get_u32(in));
    for (auto& t : ex.targets) {
      t.position = static_cast<int>(get_u32(in));
      t.id = static_cast<int>(get_u32(in));
      if (t.position < 0 || static_cast<std::size_t>(t.position) >= ex.ids.size()) {
        throw FormatError("record target position out of range");
      }
    }
    ex.label = get_u8(in);
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<PosttrainExample> read_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read_records(in);
}

}  // namespace cdn::posttrain
