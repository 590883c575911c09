#pragma once

#include <vector>

#include "mscl/data.hpp"
#include "mscl/encoding.hpp"
#include "mscl/mining.hpp"
#include "mscl/parallel.hpp"
#include "mscl/scoring.hpp"

namespace mscl {

// Coefficients of the three loss terms in the objective being differentiated.
struct LossWeights {
  double score = 1.0;
  double frame = 0.0;
  double segment = 0.0;
};

// Positive/negative masks at both scales for every sample of a batch,
// sized to each sample's valid length.
struct BatchMasks {
  std::vector<MaskSet> frame;
  std::vector<SegmentSet> segment;
};

struct ObjectiveOptions {
  LossWeights weights;
  bool mining = false;        // compute the frame and segment losses
  double lower_bound = 0.0;   // b_l before clamping
  // Reuse these masks instead of deriving them from the current scores.
  const BatchMasks* frozen_masks = nullptr;
  Execution exec = Execution::parallel;
};

struct BatchEvaluation {
  PairScoreMatrix pairs;
  std::vector<FrameScores> scores;  // matched pairs, valid frames only
  std::vector<FrameWeights> weights;
  std::vector<Bounds> bounds;
  BatchMasks masks;  // filled when mining
  double score_loss = 0.0;
  double frame_loss = 0.0;
  double segment_loss = 0.0;
  bool frame_skipped = false;
  bool segment_skipped = false;
  double total = 0.0;  // weighted sum per LossWeights
};

// Forward pass over a batch; with `grad`, also accumulates the gradient of
// `total` into it.
BatchEvaluation evaluate_batch(const ModelParams& params, const ModelConfig& config, const Batch& batch,
                               const ObjectiveOptions& options, ModelParams* grad = nullptr);

// Frame scores and weights of one sample against its own query.
std::pair<FrameScores, FrameWeights> infer_scores(const ModelParams& params, const ModelConfig& config,
                                                  const FeatureSample& sample);

}  // namespace mscl
