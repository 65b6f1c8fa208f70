#include "htds/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace htds {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t to_count(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" + std::string(v) + "'");
  }
  return out;
}

double to_real(std::string_view key, std::string_view v) {
  const std::string s(v);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || !std::isfinite(out)) {
    throw ConfigError(std::string(key) + ": expected a real number, got '" + s + "'");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(std::string(key) + ": expected true/false, got '" + std::string(v) + "'");
}

const char* fmt_bool(bool b) { return b ? "true" : "false"; }

}  // namespace

std::string format_real(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("model config: " + m); };
  if (tokens_per_chunk < 2) fail("tokens_per_chunk must be >= 2");
  if (max_chunks < 1 || hidden < 1 || num_labels < 1) fail("max_chunks, hidden, num_labels must be >= 1");
  if (enc_heads == 0 || hidden % enc_heads != 0) fail("hidden must be divisible by enc_heads");
  if (second_heads == 0 || hidden % second_heads != 0) fail("hidden must be divisible by second_heads");
  if (ffn_mult < 1) fail("ffn_mult must be >= 1");
}

std::vector<double> ThresholdGrid::points() const {
  if (!(step > 0.0) || hi < lo) throw ConfigError("threshold grid is empty");
  const auto n = static_cast<std::size_t>(std::llround((hi - lo) / step));
  std::vector<double> out;
  for (std::size_t i = 0; i <= n; ++i) out.push_back(lo + static_cast<double>(i) * step);
  return out;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("train config: " + m); };
  if (!(peak_lr > 0.0)) fail("peak_lr must be positive");
  if (epochs_max < 1) fail("epochs_max must be >= 1");
  if (micro_batch < 1 || effective_batch < 1 || effective_batch % micro_batch != 0) {
    fail("effective_batch must be a positive multiple of micro_batch");
  }
  double sum = 0.0;
  for (double f : phase_fracs) {
    if (f < 0.0) fail("phase fractions must be non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) fail("phase fractions must sum to 1");
  if (!(lr_div_start > 0.0) || !(lr_div_final > 0.0)) fail("lr divisors must be positive");
  if (weight_decay < 0.0 || beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0 ||
      !(adam_eps > 0.0)) {
    fail("optimizer hyperparameters out of range");
  }
  if (threshold_grid.points().empty()) fail("threshold grid is empty");
}

NotesMode parse_notes_mode(std::string_view s) {
  if (s == "all") return NotesMode::kAll;
  if (s == "discharge_only") return NotesMode::kDischargeOnly;
  throw ConfigError("notes: expected all or discharge_only, got '" + std::string(s) + "'");
}

std::string_view to_string(NotesMode m) {
  return m == NotesMode::kAll ? "all" : "discharge_only";
}

void RunConfig::set(std::string_view key, std::string_view v) {
  auto& m = model;
  auto& t = train;
  if (key == "tokens_per_chunk") m.tokens_per_chunk = to_count(key, v);
  else if (key == "max_chunks") m.max_chunks = to_count(key, v);
  else if (key == "hidden") m.hidden = to_count(key, v);
  else if (key == "vocab_size") vocab_max = to_count(key, v);
  else if (key == "num_labels") m.num_labels = to_count(key, v);
  else if (key == "enc_layers") m.enc_layers = to_count(key, v);
  else if (key == "enc_heads") m.enc_heads = to_count(key, v);
  else if (key == "second_layers") m.second_layers = to_count(key, v);
  else if (key == "second_heads") m.second_heads = to_count(key, v);
  else if (key == "ffn_mult") m.ffn_mult = to_count(key, v);
  else if (key == "cls_only") m.cls_only = to_bool(key, v);
  else if (key == "meta_pe") m.meta.pe = to_bool(key, v);
  else if (key == "meta_rev_pe") m.meta.rev_pe = to_bool(key, v);
  else if (key == "meta_te") m.meta.te = to_bool(key, v);
  else if (key == "meta_rev_te") m.meta.rev_te = to_bool(key, v);
  else if (key == "meta_ce") m.meta.ce = to_bool(key, v);
  else if (key == "strategy") {
    try {
      strategy = SelectionStrategy::parse(v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("strategy: ") + e.what());
    }
  }
  else if (key == "notes") notes = parse_notes_mode(v);
  else if (key == "peak_lr") t.peak_lr = to_real(key, v);
  else if (key == "epochs_max") t.epochs_max = to_count(key, v);
  else if (key == "patience") t.patience = to_count(key, v);
  else if (key == "effective_batch") t.effective_batch = to_count(key, v);
  else if (key == "micro_batch") t.micro_batch = to_count(key, v);
  else if (key == "phase_fracs") {
    std::array<double, 3> f{};
    std::size_t i = 0;
    std::string_view rest = v;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      if (i == 3) throw ConfigError("phase_fracs: expected three comma-separated values");
      f[i++] = to_real(key, trim(rest.substr(0, comma)));
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
    if (i != 3) throw ConfigError("phase_fracs: expected three comma-separated values");
    t.phase_fracs = f;
  }
  else if (key == "lr_div_start") t.lr_div_start = to_real(key, v);
  else if (key == "lr_div_final") t.lr_div_final = to_real(key, v);
  else if (key == "weight_decay") t.weight_decay = to_real(key, v);
  else if (key == "beta1") t.beta1 = to_real(key, v);
  else if (key == "beta2") t.beta2 = to_real(key, v);
  else if (key == "adam_eps") t.adam_eps = to_real(key, v);
  else if (key == "seed") t.seed = to_count(key, v);
  else if (key == "threshold_lo") t.threshold_grid.lo = to_real(key, v);
  else if (key == "threshold_hi") t.threshold_grid.hi = to_real(key, v);
  else if (key == "threshold_step") t.threshold_grid.step = to_real(key, v);
  else throw ConfigError("unknown key '" + std::string(key) + "'");
}

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig cfg;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    try {
      if (eq == std::string_view::npos) throw ConfigError("expected key = value");
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  try {
    cfg.model.validate();
    cfg.train.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string RunConfig::serialize() const {
  const auto& m = model;
  const auto& t = train;
  std::ostringstream out;
  out << "tokens_per_chunk = " << m.tokens_per_chunk << '\n'
      << "max_chunks = " << m.max_chunks << '\n'
      << "hidden = " << m.hidden << '\n'
      << "vocab_size = " << vocab_max << '\n'
      << "num_labels = " << m.num_labels << '\n'
      << "enc_layers = " << m.enc_layers << '\n'
      << "enc_heads = " << m.enc_heads << '\n'
      << "second_layers = " << m.second_layers << '\n'
      << "second_heads = " << m.second_heads << '\n'
      << "ffn_mult = " << m.ffn_mult << '\n'
      << "cls_only = " << fmt_bool(m.cls_only) << '\n'
      << "meta_pe = " << fmt_bool(m.meta.pe) << '\n'
      << "meta_rev_pe = " << fmt_bool(m.meta.rev_pe) << '\n'
      << "meta_te = " << fmt_bool(m.meta.te) << '\n'
      << "meta_rev_te = " << fmt_bool(m.meta.rev_te) << '\n'
      << "meta_ce = " << fmt_bool(m.meta.ce) << '\n'
      << "strategy = " << strategy.to_string() << '\n'
      << "notes = " << to_string(notes) << '\n'
      << "peak_lr = " << format_real(t.peak_lr) << '\n'
      << "epochs_max = " << t.epochs_max << '\n'
      << "patience = " << t.patience << '\n'
      << "effective_batch = " << t.effective_batch << '\n'
      << "micro_batch = " << t.micro_batch << '\n'
      << "phase_fracs = " << format_real(t.phase_fracs[0]) << ", " << format_real(t.phase_fracs[1]) << ", "
      << format_real(t.phase_fracs[2]) << '\n'
      << "lr_div_start = " << format_real(t.lr_div_start) << '\n'
      << "lr_div_final = " << format_real(t.lr_div_final) << '\n'
      << "weight_decay = " << format_real(t.weight_decay) << '\n'
      << "beta1 = " << format_real(t.beta1) << '\n'
      << "beta2 = " << format_real(t.beta2) << '\n'
      << "adam_eps = " << format_real(t.adam_eps) << '\n'
      << "seed = " << t.seed << '\n'
      << "threshold_lo = " << format_real(t.threshold_grid.lo) << '\n'
      << "threshold_hi = " << format_real(t.threshold_grid.hi) << '\n'
      << "threshold_step = " << format_real(t.threshold_grid.step) << '\n';
  return out.str();
}

}  // namespace htds
