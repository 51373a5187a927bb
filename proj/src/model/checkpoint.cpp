#include "cdn/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "cdn/error.hpp"

namespace cdn::model {

namespace {

constexpr char kMagic[8] = {'C', 'D', 'N', 'C', 'K', 'P', 'T', '1'};

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("checkpoint truncated");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

std::string get_bytes(std::istream& in, std::size_t n) {
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) {
    throw FormatError("checkpoint truncated");
  }
  return s;
}

struct StoredParam {
  std::string path;
  nn::Shape shape;
  std::vector<float> values;
};

struct Stored {
  std::vector<StoredParam> params;
  ModelConfig config;
};

Stored read_all(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw FormatError("not a checkpoint (bad magic)");
  }
  Stored s;
  const auto n = get_u32(in);
  for (std::uint32_t i = 0; i < n; ++i) {
    StoredParam p;
    p.path = get_bytes(in, get_u32(in));
    const auto rank = get_u32(in);
    if (rank > 8) throw FormatError("checkpoint: implausible rank for " + p.path);
    for (std::uint32_t r = 0; r < rank; ++r) p.shape.push_back(get_u32(in));
    p.values.resize(nn::shape_size(p.shape));
    for (auto& v : p.values) v = std::bit_cast<float>(get_u32(in));
    s.params.push_back(std::move(p));
  }
  try {
    s.config = ModelConfig::parse(get_bytes(in, get_u32(in)));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: bad config block: ") + e.what());
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("checkpoint: trailing bytes");
  return s;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  return in;
}

}  // namespace

void save_checkpoint(std::ostream& out, const CdnModel<float>& model) {
  out.write(kMagic, 8);
  const auto& store = model.params();
  put_u32(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& [path, t] : store) {
    put_u32(out, static_cast<std::uint32_t>(path.size()));
    out.write(path.data(), static_cast<std::streamsize>(path.size()));
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto dim : t.shape()) put_u32(out, static_cast<std::uint32_t>(dim));
    for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  const auto cfg = model.config().serialize();
  put_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  if (!out) throw Error("checkpoint write failed");
}

void save_checkpoint(const std::string& path, const CdnModel<float>& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path);
  save_checkpoint(out, model);
}

void load_checkpoint(std::istream& in, CdnModel<float>& model) {
  auto stored = read_all(in);
  if (!(stored.config == model.config())) {
    throw ConfigError("checkpoint config does not match the model:\n" + stored.config.serialize());
  }
  auto& store = model.params();
  if (stored.params.size() != store.size()) throw FormatError("checkpoint: parameter count mismatch");
  for (auto& p : stored.params) {
    if (!store.contains(p.path)) throw FormatError("checkpoint: unknown parameter " + p.path);
    auto& t = store.get(p.path);
    if (t.shape() != p.shape) throw FormatError("checkpoint: shape mismatch for " + p.path);
  }
  for (auto& p : stored.params) {
    auto dst = store.get(p.path).mutable_data();
    std::copy(p.values.begin(), p.values.end(), dst.begin());
  }
}

void load_checkpoint(const std::string& path, CdnModel<float>& model) {
  auto in = open_in(path);
  load_checkpoint(in, model);
}

ModelConfig read_checkpoint_config(const std::string& path) {
  auto in = open_in(path);
  return read_all(in).config;
}

CheckpointSummary inspect_checkpoint(const std::string& path) {
  auto in = open_in(path);
  auto stored = read_all(in);
  CheckpointSummary s;
  s.config = stored.config;
  s.n_params = stored.params.size();
  std::ostringstream listing;
  for (const auto& p : stored.params) {
    s.n_scalars += p.values.size();
    listing << p.path << ' ' << nn::shape_str(p.shape) << '\n';
  }
  s.listing = listing.str();
  return s;
}

}  // namespace cdn::model
