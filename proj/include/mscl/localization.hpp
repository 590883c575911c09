#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mscl/interval.hpp"
#include "mscl/scoring.hpp"

namespace mscl {

// Ranked, disjoint intervals: runs above the mean score, best segment score
// first. Frame run [a, b] maps to [a * dt, (b + 1) * dt). Falls back to the
// first maximal-score frame when no frame exceeds the mean.
std::vector<TimeInterval> localize(const FrameScores& scores, double frame_duration);

struct SamplePredictions {
  std::string sample_id;
  std::vector<TimeInterval> intervals;
};

// One JSON object per line: {"sample_id": ..., "predictions": [{"start", "end", "rank_score"}, ...]}
void write_predictions(const std::filesystem::path& path, const std::vector<SamplePredictions>& preds);
std::vector<SamplePredictions> read_predictions(const std::filesystem::path& path);

}  // namespace mscl
