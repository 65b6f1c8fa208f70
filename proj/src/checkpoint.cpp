#include "htds/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "htds/corpus.hpp"

namespace htds {
namespace {

constexpr int kFormatVersion = 1;
constexpr std::string_view kMagic = "htds-checkpoint";

void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("checkpoint truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::map<std::string, std::string> header_fields(const Checkpoint& c) {
  const auto& m = c.config;
  auto b = [](bool x) { return std::string(x ? "1" : "0"); };
  return {
      {"format", std::to_string(kFormatVersion)},
      {"tokens_per_chunk", std::to_string(m.tokens_per_chunk)},
      {"max_chunks", std::to_string(m.max_chunks)},
      {"hidden", std::to_string(m.hidden)},
      {"vocab_size", std::to_string(m.vocab_size)},
      {"num_labels", std::to_string(m.num_labels)},
      {"num_categories", std::to_string(m.num_categories)},
      {"enc_layers", std::to_string(m.enc_layers)},
      {"enc_heads", std::to_string(m.enc_heads)},
      {"second_layers", std::to_string(m.second_layers)},
      {"second_heads", std::to_string(m.second_heads)},
      {"ffn_mult", std::to_string(m.ffn_mult)},
      {"cls_only", b(m.cls_only)},
      {"meta_pe", b(m.meta.pe)},
      {"meta_rev_pe", b(m.meta.rev_pe)},
      {"meta_te", b(m.meta.te)},
      {"meta_rev_te", b(m.meta.rev_te)},
      {"meta_ce", b(m.meta.ce)},
      {"seed", std::to_string(c.seed)},
      {"threshold", format_real(c.threshold)},
  };
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << kMagic << '\n';
  for (const auto& [k, v] : header_fields(ckpt)) out << k << " = " << v << '\n';
  out << "---\n";
  ckpt.params.for_each([&](const std::string& name, const Matrix& m) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(m.rows()));
    put_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (double v : m.flat()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  });
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw DataError(path.string() + ": not a checkpoint");
  std::map<std::string, std::string> kv;
  while (std::getline(in, line) && line != "---") {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw DataError(path.string() + ": bad header line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  auto num = [&](const char* key) -> std::uint64_t {
    auto it = kv.find(key);
    if (it == kv.end()) throw DataError(path.string() + ": header lacks " + key);
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (ec != std::errc()) throw DataError(path.string() + ": bad value for " + key);
    return v;
  };
  if (num("format") != kFormatVersion) throw DataError(path.string() + ": unsupported format version");

  Checkpoint c;
  auto& m = c.config;
  m.tokens_per_chunk = num("tokens_per_chunk");
  m.max_chunks = num("max_chunks");
  m.hidden = num("hidden");
  m.vocab_size = num("vocab_size");
  m.num_labels = num("num_labels");
  m.num_categories = num("num_categories");
  m.enc_layers = num("enc_layers");
  m.enc_heads = num("enc_heads");
  m.second_layers = num("second_layers");
  m.second_heads = num("second_heads");
  m.ffn_mult = num("ffn_mult");
  m.cls_only = num("cls_only") != 0;
  m.meta = {num("meta_pe") != 0, num("meta_rev_pe") != 0, num("meta_te") != 0,
            num("meta_rev_te") != 0, num("meta_ce") != 0};
  c.seed = num("seed");
  const auto th = kv.find("threshold");
  if (th == kv.end()) throw DataError(path.string() + ": header lacks threshold");
  auto [tp, tec] = std::from_chars(th->second.data(), th->second.data() + th->second.size(), c.threshold);
  if (tec != std::errc()) throw DataError(path.string() + ": bad value for threshold");

  if (expected && !(*expected == m)) {
    throw ConfigError(path.string() + ": checkpoint config does not match the requested model config");
  }

  c.params = ModelParams::zeros(m);
  c.params.for_each([&](const std::string& name, Matrix& t) {
    const auto len = get_u32(in);
    std::string stored(len, '\0');
    if (!in.read(stored.data(), len)) throw DataError("checkpoint truncated");
    const auto rows = get_u32(in), cols = get_u32(in);
    if (stored != name || rows != t.rows() || cols != t.cols()) {
      throw DataError(path.string() + ": tensor '" + stored + "' does not match expected '" + name + "'");
    }
    for (double& v : t.flat()) v = static_cast<double>(std::bit_cast<float>(get_u32(in)));
  });
  if (in.peek() != std::char_traits<char>::eof()) throw DataError(path.string() + ": trailing bytes");
  return c;
}

}  // namespace htds
