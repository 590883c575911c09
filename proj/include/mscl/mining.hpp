#pragma once

#include <cmath>
#include <vector>

#include "mscl/linalg.hpp"
#include "mscl/scoring.hpp"

namespace mscl {

// Coarse-to-fine schedule of the negative band [b_l, b_u]. After warm-up the
// lower bound is multiplied by `delta` once per `cycle_epochs`.
struct BoundScheduler {
  double initial_lower = std::exp(-8.0);
  double delta = 10.0;
  int cycle_epochs = 50;
  int warmup_epochs = 50;

  void validate() const;
};

struct Bounds {
  double lower = 0.0;  // b_l after clamping to b_u
  double upper = 0.0;  // b_u
  double lower_unclamped = 0.0;
};

// b_l before clamping; depends on the epoch only.
double lower_bound_at(const BoundScheduler& scheduler, int epoch);
// Mean of the scores, kept inside [min, max] against rounding.
double upper_bound(const FrameScores& scores);
Bounds bounds_at(const BoundScheduler& scheduler, int epoch, const FrameScores& scores);

struct MaskSet {
  BoolVec positive;
  BoolVec negative;
};

// positive: s > b_u; negative: b_l <= s <= b_u. If nothing exceeds b_u the
// first maximal-score frame alone is positive.
MaskSet frame_masks(const FrameScores& scores, double lower, double upper);

struct Segment {
  int start = 0;
  int end = 0;  // inclusive
  double score = 0.0;

  int length() const { return end - start + 1; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

struct SegmentSet {
  std::vector<Segment> segments;
  int positive_index = -1;  // into segments, -1 when empty
  BoolVec positive_mask;
  BoolVec negative_mask;
};

// Maximal runs with s > b_u; the best-scoring run (earliest on ties) is
// positive, all other runs negative.
SegmentSet extract_segments(const FrameScores& scores, double upper);

// u_i = sigmoid(v~_i . q_bar / sqrt(D)) for every row of the encoded video.
Vec frame_similarity(const Mat& video, const Vec& query_mean);

struct ContrastLoss {
  double value = 0.0;
  bool skipped = false;
  // dL/du per sample; empty vectors for samples that took no part.
  std::vector<Vec> grad;
};

// -log( sum_k sum_{pos} u / sum_k sum_{neg} u ) over the samples whose
// negative set is non-empty.
ContrastLoss contrast_loss(const std::vector<Vec>& u, const std::vector<BoolVec>& positive,
                           const std::vector<BoolVec>& negative);

ContrastLoss frame_contrast_loss(const std::vector<Vec>& u, const std::vector<MaskSet>& masks);
ContrastLoss segment_contrast_loss(const std::vector<Vec>& u, const std::vector<SegmentSet>& segments);

}  // namespace mscl
