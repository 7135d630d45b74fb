#include "hanet/retrieval.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "hanet/error.hpp"

namespace hanet {

std::size_t rank_of_positive(std::span<const double> scores, std::size_t positive) {
  if (positive >= scores.size()) {
    throw DataError(DataError::Code::kMissing, "rank_of_positive: index " +
                                                   std::to_string(positive) + " out of range " +
                                                   std::to_string(scores.size()));
  }
  const double target = scores[positive];
  std::size_t rank = 1;
  for (double s : scores) rank += s > target ? 1 : 0;
  return rank;
}

namespace {

void summarize(RankReport& report) {
  const double n = static_cast<double>(report.ranks.size());
  if (report.ranks.empty()) return;
  auto recall = [&](std::size_t k) {
    const auto hits = std::count_if(report.ranks.begin(), report.ranks.end(),
                                    [k](std::size_t r) { return r <= k; });
    return 100.0 * static_cast<double>(hits) / n;
  };
  report.r1 = recall(1);
  report.r5 = recall(5);
  report.r10 = recall(10);
  std::vector<std::size_t> sorted = report.ranks;
  std::sort(sorted.begin(), sorted.end());
  report.median_rank = static_cast<double>(sorted[(sorted.size() - 1) / 2]);
}

}  // namespace

EvalReport evaluate(const ScoreMatrix& scores, const std::vector<std::size_t>& caption_to_video) {
  if (caption_to_video.size() != scores.captions) {
    throw DataError(DataError::Code::kMissing,
                    "evaluate: " + std::to_string(caption_to_video.size()) +
                        " caption mappings for " + std::to_string(scores.captions) + " captions");
  }
  for (std::size_t c = 0; c < caption_to_video.size(); ++c) {
    if (caption_to_video[c] >= scores.videos) {
      throw DataError(DataError::Code::kMissing,
                      "evaluate: caption " + std::to_string(c) + " maps to no video");
    }
  }
  EvalReport report;
  report.t2v.direction = "t2v";
  report.v2t.direction = "v2t";
  std::vector<double> column(scores.videos);
  for (std::size_t c = 0; c < scores.captions; ++c) {
    for (std::size_t v = 0; v < scores.videos; ++v) column[v] = scores.at(v, c);
    report.t2v.ranks.push_back(rank_of_positive(column, caption_to_video[c]));
  }
  for (std::size_t v = 0; v < scores.videos; ++v) {
    const std::span<const double> row(scores.values.data() + v * scores.captions, scores.captions);
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (std::size_t c = 0; c < scores.captions; ++c) {
      if (caption_to_video[c] == v) best = std::min(best, rank_of_positive(row, c));
    }
    if (best != std::numeric_limits<std::size_t>::max()) report.v2t.ranks.push_back(best);
  }
  summarize(report.t2v);
  summarize(report.v2t);
  report.sumr = report.t2v.r1 + report.t2v.r5 + report.t2v.r10 + report.v2t.r1 + report.v2t.r5 +
                report.v2t.r10;
  return report;
}

std::string format_report_table(const EvalReport& report) {
  std::ostringstream out;
  char line[160];
  out << "# ties ranked optimistically\n";
  std::snprintf(line, sizeof(line), "%-5s %8s %8s %8s %8s\n", "dir", "R@1", "R@5", "R@10", "MdR");
  out << line;
  for (const RankReport* r : {&report.t2v, &report.v2t}) {
    std::snprintf(line, sizeof(line), "%-5s %8.2f %8.2f %8.2f %8.1f\n", r->direction.c_str(),
                  r->r1, r->r5, r->r10, r->median_rank);
    out << line;
  }
  std::snprintf(line, sizeof(line), "SumR %8.2f\n", report.sumr);
  out << line;
  return out.str();
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["tie_rule"] = "optimistic";
  for (const RankReport* r : {&report.t2v, &report.v2t}) {
    j[r->direction] = {{"R@1", r->r1}, {"R@5", r->r5}, {"R@10", r->r10}, {"MdR", r->median_rank},
                       {"queries", r->ranks.size()}};
  }
  j["SumR"] = report.sumr;
  return j.dump(2);
}

ScoreMatrix parse_score_matrix(const std::string& text, const std::string& source) {
  ScoreMatrix m;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    std::vector<double> row;
    std::string tok;
    while (fields >> tok) {
      try {
        row.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw DataError(DataError::Code::kInvalidRecord, source + ": bad score '" + tok + "'");
      }
    }
    if (m.videos == 0) m.captions = row.size();
    if (row.size() != m.captions) {
      throw DataError(DataError::Code::kInvalidRecord,
                      source + ": row " + std::to_string(m.videos + 1) + " has " +
                          std::to_string(row.size()) + " scores, expected " +
                          std::to_string(m.captions));
    }
    m.values.insert(m.values.end(), row.begin(), row.end());
    ++m.videos;
  }
  if (m.videos == 0) throw DataError(DataError::Code::kMissing, source + ": empty score matrix");
  return m;
}

}  // namespace hanet
