#include "htds/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "htds/rng.hpp"

namespace htds {
namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";
constexpr std::size_t kSyllables = 70;

std::string syllable(std::size_t s) {
  return {kConsonants[s / kVowels.size()], kVowels[s % kVowels.size()]};
}

std::string word_from(std::size_t code, std::size_t n_syllables) {
  std::string w;
  for (std::size_t i = 0; i < n_syllables; ++i) {
    w += syllable(code % kSyllables);
    code /= kSyllables;
  }
  return w;
}

std::size_t pick(Rng& rng, IntRange r) {
  return static_cast<std::size_t>(rng.uniform_int(r.lo, r.hi));
}

}  // namespace

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("synthetic spec: " + what); };
  if (n_labels == 0) fail("n_labels must be positive");
  if (keywords_per_label == 0) fail("keywords_per_label must be positive");
  if (n_labels * keywords_per_label > kKeywordCapacity) fail("n_labels exceeds keyword capacity");
  if (filler_vocab == 0 || filler_vocab > kFillerCapacity) fail("filler_vocab out of range");
  if (!(discharge_signal_fraction >= 0.0 && discharge_signal_fraction < 1.0)) {
    fail("discharge_signal_fraction must be in [0, 1)");
  }
  for (auto [name, r] : {std::pair{"notes_per_stay", notes_per_stay},
                         std::pair{"words_per_note", words_per_note},
                         std::pair{"labels_per_stay", labels_per_stay}}) {
    if (r.lo < 1 || r.hi < r.lo) fail(std::string(name) + " must be a positive range");
  }
  if (notes_per_stay.lo < 2) fail("notes_per_stay must allow a non-discharge note");
  if (static_cast<std::size_t>(labels_per_stay.hi) > n_labels) fail("labels_per_stay exceeds n_labels");
  if (std::find(categories.begin(), categories.end(), kDischargeCategory) == categories.end()) {
    fail("categories must include the discharge summary category");
  }
  if (categories.size() < 2) fail("categories need at least one non-discharge category");
  if (train_fraction < 0 || dev_fraction < 0 || train_fraction + dev_fraction > 1.0) {
    fail("split fractions out of range");
  }
}

std::string synthetic_keyword(std::size_t label, std::size_t j, std::size_t keywords_per_label) {
  // 3-syllable words; fillers have 2, so the sets never meet. 104729 is
  // coprime with the capacity, so distinct slots give distinct words.
  const std::size_t slot = label * keywords_per_label + j;
  return word_from((slot * 104729) % kKeywordCapacity, 3);
}

std::string synthetic_filler(std::size_t i) { return word_from((i * 37) % kFillerCapacity, 2); }

std::string synthetic_label_code(std::size_t label, std::size_t n_labels) {
  const int width = std::max(3, static_cast<int>(std::to_string(n_labels).size()));
  char buf[32];
  std::snprintf(buf, sizeof buf, "L%0*zu", width, label);
  return buf;
}

Corpus generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  std::vector<std::string> others;
  for (const auto& c : spec.categories) {
    if (c != kDischargeCategory) others.push_back(c);
  }

  using namespace std::chrono;
  const sys_seconds epoch = sys_days{year{2130} / 1 / 1};

  Corpus corpus;
  std::vector<std::vector<std::string>> code_sets;
  for (std::size_t s = 0; s < spec.n_stays; ++s) {
    char sid[32];
    std::snprintf(sid, sizeof sid, "S%06zu", s);
    HospitalStay stay;
    stay.stay_id = sid;

    const std::size_t n_notes = pick(rng, spec.notes_per_stay);
    std::vector<std::vector<std::string>> words(n_notes);
    std::vector<std::string> cats(n_notes);
    for (std::size_t n = 0; n < n_notes; ++n) {
      cats[n] = n + 1 == n_notes
                    ? std::string(kDischargeCategory)
                    : others[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(others.size()) - 1))];
      const std::size_t len = pick(rng, spec.words_per_note);
      for (std::size_t w = 0; w < len; ++w) {
        words[n].push_back(synthetic_filler(static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(spec.filler_vocab) - 1))));
      }
    }

    // labels
    std::vector<std::size_t> pool(spec.n_labels);
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    const std::size_t n_lab = pick(rng, spec.labels_per_stay);
    for (std::size_t i = 0; i < n_lab; ++i) {
      const auto j = static_cast<std::size_t>(
          rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(pool.size()) - 1));
      std::swap(pool[i], pool[j]);
    }
    std::vector<std::size_t> labels(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_lab));
    std::sort(labels.begin(), labels.end());

    // keyword planting
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (auto l : labels) {
      for (std::size_t j = 0; j < spec.keywords_per_label; ++j) pairs.emplace_back(l, j);
    }
    rng.shuffle(std::span(pairs));
    const auto n_dis = static_cast<std::size_t>(
        std::llround(spec.discharge_signal_fraction * static_cast<double>(pairs.size())));
    std::vector<std::size_t> in_discharge(spec.n_labels, 0);
    std::size_t placed = 0;
    const std::size_t discharge = n_notes - 1;
    for (const auto& [l, j] : pairs) {
      std::size_t target;
      if (placed < n_dis && in_discharge[l] + 1 < spec.keywords_per_label) {
        target = discharge;
        ++in_discharge[l];
        ++placed;
      } else {
        target = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(discharge) - 1));
      }
      auto& w = words[target];
      const auto pos = rng.uniform_int(0, static_cast<std::int64_t>(w.size()));
      w.insert(w.begin() + pos, synthetic_keyword(l, j, spec.keywords_per_label));
    }

    // timestamps and text
    sys_seconds t = epoch + days{static_cast<int>(s % 3650)} +
                    minutes{rng.uniform_int(0, 24 * 60 - 1)};
    for (std::size_t n = 0; n < n_notes; ++n) {
      t += minutes{rng.uniform_int(30, 720)};
      ClinicalNote note;
      char nid[48];
      std::snprintf(nid, sizeof nid, "%s-N%02zu", sid, n);
      note.note_id = nid;
      note.stay_id = stay.stay_id;
      note.category = cats[n];
      note.charttime = t;
      bool sentence_start = true;
      for (std::size_t w = 0; w < words[n].size(); ++w) {
        std::string tok = words[n][w];
        if (sentence_start) tok[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(tok[0])));
        if (w) note.text += ' ';
        note.text += tok;
        sentence_start = false;
        const double r = rng.uniform();
        if (w + 1 == words[n].size() || r < 0.08) {
          note.text += '.';
          sentence_start = true;
        } else if (r < 0.14) {
          note.text += ',';
        }
      }
      stay.notes.push_back(std::move(note));
    }

    std::vector<std::string> codes;
    for (auto l : labels) codes.push_back(synthetic_label_code(l, spec.n_labels));
    code_sets.push_back(codes);
    corpus.stays.push_back(std::move(stay));
  }

  corpus.labels = LabelSpace::from_frequencies(code_sets, spec.n_labels);
  for (std::size_t s = 0; s < corpus.stays.size(); ++s) {
    auto& ids = corpus.stays[s].labels;
    for (const auto& c : code_sets[s]) ids.push_back(*corpus.labels.find(c));
    std::sort(ids.begin(), ids.end());
  }

  std::vector<std::size_t> order(corpus.stays.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(std::span(order));
  const auto n = static_cast<double>(order.size());
  const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * n));
  const auto n_dev = std::min(order.size() - n_train,
                              static_cast<std::size_t>(std::llround(spec.dev_fraction * n)));
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& id = corpus.stays[order[i]].stay_id;
    if (i < n_train) {
      corpus.split.train.push_back(id);
    } else if (i < n_train + n_dev) {
      corpus.split.dev.push_back(id);
    } else {
      corpus.split.test.push_back(id);
    }
  }
  for (auto* v : {&corpus.split.train, &corpus.split.dev, &corpus.split.test}) {
    std::sort(v->begin(), v->end());
  }
  return corpus;
}

}  // namespace htds
