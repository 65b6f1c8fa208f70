#include "fixtures.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace htds::testing {

ModelConfig grad_check_config() {
  ModelConfig c;
  c.tokens_per_chunk = 4;
  c.max_chunks = 3;
  c.hidden = 8;
  c.vocab_size = 50;
  c.num_labels = 5;
  c.num_categories = 3;
  c.enc_layers = 1;
  c.enc_heads = 2;
  c.second_layers = 1;
  c.second_heads = 2;
  c.ffn_mult = 2;
  return c;
}

ModelConfig tiny_config(std::size_t vocab, std::size_t labels, std::size_t categories) {
  ModelConfig c;
  c.tokens_per_chunk = 16;
  c.max_chunks = 8;
  c.hidden = 16;
  c.vocab_size = vocab;
  c.num_labels = labels;
  c.num_categories = categories;
  c.enc_layers = 1;
  c.enc_heads = 2;
  c.second_layers = 1;
  c.second_heads = 2;
  c.ffn_mult = 2;
  return c;
}

std::vector<Chunk> random_chunks(Rng& rng, const ModelConfig& cfg) {
  const auto n = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(cfg.max_chunks)));
  std::vector<Chunk> chunks(n);
  std::size_t doc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto& c = chunks[i];
    if (i > 0 && rng.uniform() < 0.5) ++doc;
    c.doc_index = doc;
    c.category_id = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(cfg.num_categories) - 1));
    c.real_len = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(cfg.tokens_per_chunk)));
    c.token_ids.assign(cfg.tokens_per_chunk, kPadId);
    c.token_ids[0] = kClsId;
    for (std::size_t t = 1; t < c.real_len; ++t) {
      c.token_ids[t] = static_cast<TokenId>(rng.uniform_int(kReservedTokens, static_cast<std::int64_t>(cfg.vocab_size) - 1));
    }
  }
  return assign_meta_indices(std::move(chunks));
}

std::vector<double> random_targets(Rng& rng, std::size_t labels) {
  std::vector<double> y(labels);
  for (double& v : y) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
  return y;
}

StayWithChunks random_stay_with_chunks(Rng& rng, const std::vector<std::string>& categories,
                                       std::size_t max_notes, std::size_t max_chunks_per_note) {
  StayWithChunks out;
  out.stay.stay_id = "S000001";
  const auto n_notes = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(max_notes)));
  std::vector<std::int64_t> hours;
  while (hours.size() < n_notes) {
    const auto h = rng.uniform_int(0, 500);
    if (std::find(hours.begin(), hours.end(), h) == hours.end()) hours.push_back(h);
  }
  std::sort(hours.begin(), hours.end());
  const Timestamp base = parse_timestamp("2130-01-01T00:00:00");
  for (std::size_t d = 0; d < n_notes; ++d) {
    ClinicalNote note;
    note.note_id = "N" + std::to_string(d);
    note.stay_id = out.stay.stay_id;
    const auto cat = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(categories.size()) - 1));
    note.category = categories[cat];
    note.charttime = base + std::chrono::hours(hours[d]);
    note.text = "x";
    out.stay.notes.push_back(note);
    const auto k = rng.uniform_int(1, static_cast<std::int64_t>(max_chunks_per_note));
    for (std::int64_t j = 0; j < k; ++j) {
      Chunk c;
      c.token_ids = {kClsId, static_cast<TokenId>(100 + out.chunks.size())};
      c.real_len = 2;
      c.doc_index = d;
      c.category_id = cat;
      out.chunks.push_back(c);
    }
  }
  return out;
}

}  // namespace htds::testing

namespace htds::testing {

TempDir::TempDir(const std::string& tag) {
  static int counter = 0;
  path_ = std::filesystem::temp_directory_path() /
          ("htds-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace htds::testing
