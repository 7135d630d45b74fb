#pragma once

#include <span>
#include <string>
#include <vector>

namespace hanet {

// Dense videos x captions similarity matrix, row-major.
struct ScoreMatrix {
  std::size_t videos = 0;
  std::size_t captions = 0;
  std::vector<double> values;

  ScoreMatrix() = default;
  ScoreMatrix(std::size_t v, std::size_t c) : videos(v), captions(c), values(v * c, 0.0) {}
  double& at(std::size_t v, std::size_t c) { return values[v * captions + c]; }
  double at(std::size_t v, std::size_t c) const { return values[v * captions + c]; }
};

struct RankReport {
  std::string direction;  // "t2v" or "v2t"
  double r1 = 0.0, r5 = 0.0, r10 = 0.0;  // percentages
  double median_rank = 0.0;
  std::vector<std::size_t> ranks;  // one per query
};

struct EvalReport {
  RankReport t2v, v2t;
  double sumr = 0.0;
};

// 1 + number of candidates scoring strictly higher than the positive, so
// ties resolve in the positive's favour.
std::size_t rank_of_positive(std::span<const double> scores, std::size_t positive);

// Text-to-video ranks each caption's video among all videos. Video-to-text
// ranks, per video, its best-placed ground-truth caption among all captions;
// videos without captions are not queried. The median is the lower median.
EvalReport evaluate(const ScoreMatrix& scores, const std::vector<std::size_t>& caption_to_video);

std::string format_report_table(const EvalReport& report);
std::string report_to_json(const EvalReport& report);

// Whitespace-separated rows, one line per video.
ScoreMatrix parse_score_matrix(const std::string& text, const std::string& source);

}  // namespace hanet
