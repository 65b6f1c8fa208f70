#include "htds/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace htds {

using nlohmann::json;

Timestamp parse_timestamp(std::string_view text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char sep = 0;
  const std::string buf(text);
  int n = std::sscanf(buf.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d", &y, &mo, &d, &sep, &h, &mi, &s);
  if (n < 6 || (sep != 'T' && sep != ' ')) throw DataError("bad timestamp '" + buf + "'");
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 59) {
    throw DataError("timestamp out of range '" + buf + "'");
  }
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s};
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{t - day_point};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

std::string clean_category(std::string_view raw) {
  if (raw == "Nursing/Other") return "Nursing";
  return std::string(raw);
}

bool note_before(const ClinicalNote& a, const ClinicalNote& b) {
  if (a.charttime != b.charttime) return a.charttime < b.charttime;
  return a.note_id < b.note_id;
}

bool HospitalStay::has_label(int id) const {
  return std::binary_search(labels.begin(), labels.end(), id);
}

NameIndex::NameIndex(std::vector<std::string> names) : names_(std::move(names)) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (!index_.emplace(names_[i], static_cast<int>(i)).second) {
      throw DataError("duplicate name '" + names_[i] + "'");
    }
  }
}

std::optional<int> NameIndex::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void NameIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& n : names_) out << n << '\n';
}

std::vector<std::string> NameIndex::load_names(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) names.push_back(line);
  }
  return names;
}

LabelSpace LabelSpace::from_frequencies(const std::vector<std::vector<std::string>>& label_sets,
                                        std::size_t max_labels) {
  std::map<std::string, std::size_t> freq;
  for (const auto& set : label_sets) {
    for (const auto& code : std::set<std::string>(set.begin(), set.end())) ++freq[code];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> codes;
  for (std::size_t i = 0; i < ranked.size() && i < max_labels; ++i) codes.push_back(ranked[i].first);
  return LabelSpace(std::move(codes));
}

CategoryTable CategoryTable::from_stays(const std::vector<HospitalStay>& stays) {
  std::set<std::string> names;
  for (const auto& s : stays) {
    for (const auto& n : s.notes) names.insert(n.category);
  }
  return CategoryTable(std::vector<std::string>(names.begin(), names.end()));
}

SplitName parse_split_name(std::string_view s) {
  if (s == "train") return SplitName::kTrain;
  if (s == "dev") return SplitName::kDev;
  if (s == "test") return SplitName::kTest;
  throw DataError("unknown split '" + std::string(s) + "'");
}

std::string_view to_string(SplitName s) {
  switch (s) {
    case SplitName::kTrain:
      return "train";
    case SplitName::kDev:
      return "dev";
    case SplitName::kTest:
      return "test";
  }
  return "?";
}

const std::vector<std::string>& DatasetSplit::ids(SplitName s) const {
  switch (s) {
    case SplitName::kTrain:
      return train;
    case SplitName::kDev:
      return dev;
    case SplitName::kTest:
      break;
  }
  return test;
}

std::vector<const HospitalStay*> Corpus::select(SplitName s) const {
  std::unordered_map<std::string_view, const HospitalStay*> by_id;
  for (const auto& st : stays) by_id.emplace(st.stay_id, &st);
  std::vector<const HospitalStay*> out;
  for (const auto& id : split.ids(s)) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError("split refers to unknown stay " + id);
    out.push_back(it->second);
  }
  return out;
}

namespace {

template <typename Fn>
void for_each_record(const std::filesystem::path& path, std::string_view what, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + std::string(what) + " file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto where = [&] { return std::string(what) + " file line " + std::to_string(lineno) + ": "; };
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where() + "malformed record (" + e.what() + ")");
    }
    if (!rec.is_object()) throw DataError(where() + "record is not an object");
    try {
      fn(rec);
    } catch (const json::exception& e) {
      throw DataError(where() + "bad field (" + e.what() + ")");
    } catch (const DataError& e) {
      throw DataError(where() + e.what());
    }
  }
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

Corpus ingest_notes(const std::filesystem::path& notes_file,
                    const std::filesystem::path& labels_file,
                    const std::filesystem::path& split_file, std::size_t max_labels,
                    IngestReport* report) {
  IngestReport rep;
  std::map<std::string, std::vector<ClinicalNote>> grouped;
  std::set<std::string> seen_notes;
  std::set<std::string> known_stays;

  for_each_record(notes_file, "notes", [&](const json& rec) {
    ClinicalNote note;
    note.note_id = rec.at("note_id").get<std::string>();
    note.stay_id = rec.at("stay_id").get<std::string>();
    const auto raw_category = rec.at("category").get<std::string>();
    note.category = clean_category(raw_category);
    note.charttime = parse_timestamp(rec.at("charttime").get<std::string>());
    note.text = rec.at("text").get<std::string>();
    ++rep.notes_read;
    if (!seen_notes.insert(note.note_id).second) throw DataError("duplicate note_id " + note.note_id);
    known_stays.insert(note.stay_id);
    if (note.category != raw_category) ++rep.categories_remapped;
    if (blank(note.text)) {
      ++rep.empty_notes_dropped;
      return;
    }
    grouped[note.stay_id].push_back(std::move(note));
  });

  rep.stays_dropped = known_stays.size() - grouped.size();

  std::map<std::string, std::vector<std::string>> raw_labels;
  for_each_record(labels_file, "labels", [&](const json& rec) {
    auto stay = rec.at("stay_id").get<std::string>();
    if (!known_stays.count(stay)) throw DataError("labels for unknown stay " + stay);
    auto codes = rec.at("labels").get<std::vector<std::string>>();
    auto& dst = raw_labels[stay];
    dst.insert(dst.end(), codes.begin(), codes.end());
  });

  std::vector<std::vector<std::string>> kept_sets;
  for (const auto& [stay, codes] : raw_labels) {
    if (grouped.count(stay)) kept_sets.push_back(codes);
  }

  Corpus corpus;
  corpus.labels = LabelSpace::from_frequencies(kept_sets, max_labels);
  if (corpus.labels.empty()) throw DataError("no labels derivable from " + labels_file.string());

  for (auto& [stay_id, notes] : grouped) {
    HospitalStay st;
    st.stay_id = stay_id;
    st.notes = std::move(notes);
    std::sort(st.notes.begin(), st.notes.end(), note_before);
    if (auto it = raw_labels.find(stay_id); it != raw_labels.end()) {
      std::set<int> ids;
      for (const auto& code : it->second) {
        if (auto id = corpus.labels.find(code)) ids.insert(*id);
      }
      st.labels.assign(ids.begin(), ids.end());
    }
    corpus.stays.push_back(std::move(st));
  }

  std::set<std::string> assigned;
  for_each_record(split_file, "split", [&](const json& rec) {
    auto stay = rec.at("stay_id").get<std::string>();
    auto which = parse_split_name(rec.at("split").get<std::string>());
    if (!known_stays.count(stay)) throw DataError("split refers to unknown stay " + stay);
    if (!assigned.insert(stay).second) throw DataError("stay " + stay + " assigned twice");
    if (!grouped.count(stay)) return;  // dropped for having no text
    switch (which) {
      case SplitName::kTrain:
        corpus.split.train.push_back(stay);
        break;
      case SplitName::kDev:
        corpus.split.dev.push_back(stay);
        break;
      case SplitName::kTest:
        corpus.split.test.push_back(stay);
        break;
    }
  });
  for (const auto& st : corpus.stays) {
    if (!assigned.count(st.stay_id)) throw DataError("stay " + st.stay_id + " has no split");
  }

  if (report) *report = rep;
  return corpus;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& notes_file,
                  const std::filesystem::path& labels_file,
                  const std::filesystem::path& split_file) {
  auto open = [](const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write " + p.string());
    return out;
  };
  auto notes = open(notes_file);
  auto labels = open(labels_file);
  for (const auto& st : corpus.stays) {
    for (const auto& n : st.notes) {
      json rec = {{"note_id", n.note_id},
                  {"stay_id", n.stay_id},
                  {"category", n.category},
                  {"charttime", format_timestamp(n.charttime)},
                  {"text", n.text}};
      notes << rec.dump() << '\n';
    }
    std::vector<std::string> codes;
    for (int id : st.labels) codes.push_back(corpus.labels.name(static_cast<std::size_t>(id)));
    labels << json{{"stay_id", st.stay_id}, {"labels", codes}}.dump() << '\n';
  }
  auto split = open(split_file);
  for (SplitName s : {SplitName::kTrain, SplitName::kDev, SplitName::kTest}) {
    for (const auto& id : corpus.split.ids(s)) {
      split << json{{"stay_id", id}, {"split", to_string(s)}}.dump() << '\n';
    }
  }
}

Corpus ingest_dir(const std::filesystem::path& dir, std::size_t max_labels, IngestReport* report) {
  return ingest_notes(dir / kNotesFile, dir / kLabelsFile, dir / kSplitFile, max_labels, report);
}

void write_corpus_dir(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_corpus(corpus, dir / kNotesFile, dir / kLabelsFile, dir / kSplitFile);
}

HospitalStay discharge_only(const HospitalStay& stay) {
  HospitalStay out;
  out.stay_id = stay.stay_id;
  out.labels = stay.labels;
  for (const auto& n : stay.notes) {
    if (n.category == kDischargeCategory) out.notes.push_back(n);
  }
  return out;
}

}  // namespace htds
