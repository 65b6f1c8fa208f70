#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace htds {

// Input data is malformed or inconsistent.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kDischargeCategory = "Discharge summary";

using Timestamp = std::chrono::sys_seconds;

// Accepts "YYYY-MM-DDTHH:MM" or "YYYY-MM-DDTHH:MM:SS" (a space may replace 'T').
Timestamp parse_timestamp(std::string_view text);
// Canonical "YYYY-MM-DDTHH:MM:SS".
std::string format_timestamp(Timestamp t);

// Maps raw category strings onto the cleaned category set ("Nursing/Other" -> "Nursing").
std::string clean_category(std::string_view raw);

struct ClinicalNote {
  std::string note_id;
  std::string stay_id;
  std::string category;
  Timestamp charttime{};
  std::string text;

  friend bool operator==(const ClinicalNote&, const ClinicalNote&) = default;
};

// Canonical note order: charttime, then note_id.
bool note_before(const ClinicalNote& a, const ClinicalNote& b);

struct HospitalStay {
  std::string stay_id;
  std::vector<ClinicalNote> notes;  // canonical order
  std::vector<int> labels;          // sorted label ids

  bool has_label(int id) const;
  friend bool operator==(const HospitalStay&, const HospitalStay&) = default;
};

// Ordered list of distinct names with reverse lookup; ids are list positions.
class NameIndex {
 public:
  NameIndex() = default;
  explicit NameIndex(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  bool empty() const { return names_.empty(); }
  const std::string& name(std::size_t id) const { return names_.at(id); }
  const std::vector<std::string>& names() const { return names_; }
  std::optional<int> find(std::string_view name) const;

  // One name per line.
  void save(const std::filesystem::path& path) const;
  static std::vector<std::string> load_names(const std::filesystem::path& path);

  friend bool operator==(const NameIndex& a, const NameIndex& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

class LabelSpace : public NameIndex {
 public:
  using NameIndex::NameIndex;
  static LabelSpace load(const std::filesystem::path& path) { return LabelSpace(load_names(path)); }

  // Top `max_labels` codes by frequency, ties broken lexicographically.
  static LabelSpace from_frequencies(const std::vector<std::vector<std::string>>& label_sets,
                                     std::size_t max_labels);
};

// Global category ids used by the category meta embedding. Names are sorted.
class CategoryTable : public NameIndex {
 public:
  using NameIndex::NameIndex;
  static CategoryTable load(const std::filesystem::path& path) {
    return CategoryTable(load_names(path));
  }
  static CategoryTable from_stays(const std::vector<HospitalStay>& stays);
};

enum class SplitName { kTrain, kDev, kTest };
SplitName parse_split_name(std::string_view s);
std::string_view to_string(SplitName s);

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> dev;
  std::vector<std::string> test;

  const std::vector<std::string>& ids(SplitName s) const;
  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

struct Corpus {
  std::vector<HospitalStay> stays;  // sorted by stay_id
  LabelSpace labels;
  DatasetSplit split;

  // Stays of one split, in split order.
  std::vector<const HospitalStay*> select(SplitName s) const;
};

struct IngestReport {
  std::size_t notes_read = 0;
  std::size_t empty_notes_dropped = 0;
  std::size_t categories_remapped = 0;
  std::size_t stays_dropped = 0;
};

// Reads the three line-delimited record files. Label space is the top
// `max_labels` codes by frequency over all stays.
Corpus ingest_notes(const std::filesystem::path& notes_file,
                    const std::filesystem::path& labels_file,
                    const std::filesystem::path& split_file, std::size_t max_labels = 50,
                    IngestReport* report = nullptr);

// Writes the three files read by ingest_notes.
void write_corpus(const Corpus& corpus, const std::filesystem::path& notes_file,
                  const std::filesystem::path& labels_file,
                  const std::filesystem::path& split_file);

inline constexpr const char* kNotesFile = "notes.jsonl";
inline constexpr const char* kLabelsFile = "labels.jsonl";
inline constexpr const char* kSplitFile = "split.jsonl";

Corpus ingest_dir(const std::filesystem::path& dir, std::size_t max_labels = 50,
                  IngestReport* report = nullptr);
void write_corpus_dir(const Corpus& corpus, const std::filesystem::path& dir);

// Copy of the stay restricted to discharge-summary notes.
HospitalStay discharge_only(const HospitalStay& stay);

}  // namespace htds
