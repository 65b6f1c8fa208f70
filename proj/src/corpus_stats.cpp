#include "htds/corpus_stats.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace htds {
namespace {

MeanSd summarize(const std::vector<double>& xs) {
  MeanSd out;
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.sd = std::sqrt(ss / static_cast<double>(xs.size()));
  return out;
}

std::size_t count_words(const std::string& text) {
  std::istringstream in(text);
  std::size_t n = 0;
  for (std::string w; in >> w;) ++n;
  return n;
}

void render_group(std::ostringstream& out, const char* title, const TextAmount& g) {
  char buf[128];
  out << title << '\n';
  for (auto [name, s] : {std::pair{"Total Documents", g.documents}, std::pair{"Total Words", g.words},
                         std::pair{"Total Tokens", g.tokens}}) {
    std::snprintf(buf, sizeof buf, "  %-18s %12.1f %12.1f\n", name, s.mean, s.sd);
    out << buf;
  }
}

}  // namespace

std::string StatsReport::render() const {
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-20s %12s %12s\n", "", "Mean", "SD");
  out << buf;
  render_group(out, "Discharge Summaries", discharge);
  out << '\n';
  render_group(out, "All Notes", all_notes);
  out << "stays=" << n_stays << '\n';
  return out.str();
}

StatsReport corpus_stats(const std::vector<HospitalStay>& corpus, const Vocabulary& vocab) {
  if (corpus.empty()) throw std::invalid_argument("corpus_stats: empty corpus");
  std::vector<double> dd, dw, dt, ad, aw, at;
  for (const auto& st : corpus) {
    double docs[2] = {0, 0}, words[2] = {0, 0}, toks[2] = {0, 0};
    for (const auto& n : st.notes) {
      const auto w = static_cast<double>(count_words(n.text));
      const auto t = static_cast<double>(vocab.encode(n.text).size());
      for (int g = 0; g < 2; ++g) {
        if (g == 0 && n.category != kDischargeCategory) continue;
        docs[g] += 1;
        words[g] += w;
        toks[g] += t;
      }
    }
    dd.push_back(docs[0]);
    dw.push_back(words[0]);
    dt.push_back(toks[0]);
    ad.push_back(docs[1]);
    aw.push_back(words[1]);
    at.push_back(toks[1]);
  }
  StatsReport r;
  r.n_stays = corpus.size();
  r.discharge = {summarize(dd), summarize(dw), summarize(dt)};
  r.all_notes = {summarize(ad), summarize(aw), summarize(at)};
  return r;
}

}  // namespace htds
