#include "mscl/mining.hpp"

#include <algorithm>

#include "mscl/errors.hpp"

namespace mscl {

void BoundScheduler::validate() const {
  if (!(initial_lower > 0.0)) throw DataError("bound scheduler: initial lower bound must be > 0");
  if (!(delta > 1.0)) throw DataError("bound scheduler: delta must be > 1");
  if (cycle_epochs < 1) throw DataError("bound scheduler: cycle length must be >= 1");
  if (warmup_epochs < 0) throw DataError("bound scheduler: warm-up must be >= 0");
}

double lower_bound_at(const BoundScheduler& scheduler, int epoch) {
  if (epoch < scheduler.warmup_epochs) return scheduler.initial_lower;
  const int cycles = (epoch - scheduler.warmup_epochs) / scheduler.cycle_epochs + 1;
  return scheduler.initial_lower * std::pow(scheduler.delta, cycles);
}

double upper_bound(const FrameScores& scores) {
  if (scores.size() == 0) return 0.0;
  return std::clamp(scores.s.mean(), scores.s.minCoeff(), scores.s.maxCoeff());
}

Bounds bounds_at(const BoundScheduler& scheduler, int epoch, const FrameScores& scores) {
  Bounds b;
  b.upper = upper_bound(scores);
  b.lower_unclamped = lower_bound_at(scheduler, epoch);
  b.lower = std::min(b.lower_unclamped, b.upper);
  return b;
}

MaskSet frame_masks(const FrameScores& scores, double lower, double upper) {
  const Vec& s = scores.s;
  MaskSet m;
  m.positive = (s.array() > upper).matrix();
  m.negative = (s.array() >= lower && s.array() <= upper).matrix();
  if (s.size() > 0 && !m.positive.any()) {
    Eigen::Index best = 0;
    s.maxCoeff(&best);
    m.positive(best) = true;
    m.negative(best) = false;
  }
  return m;
}

SegmentSet extract_segments(const FrameScores& scores, double upper) {
  const Vec& s = scores.s;
  const int n = scores.size();
  SegmentSet out;
  out.positive_mask = BoolVec::Constant(n, false);
  out.negative_mask = BoolVec::Constant(n, false);
  for (int i = 0; i < n;) {
    if (!(s(i) > upper)) {
      ++i;
      continue;
    }
    int j = i;
    while (j + 1 < n && s(j + 1) > upper) ++j;
    out.segments.push_back({i, j, s.segment(i, j - i + 1).mean()});
    i = j + 1;
  }
  if (out.segments.empty()) return out;
  out.positive_index = 0;
  for (int t = 1; t < static_cast<int>(out.segments.size()); ++t) {
    if (out.segments[t].score > out.segments[out.positive_index].score) out.positive_index = t;
  }
  for (int t = 0; t < static_cast<int>(out.segments.size()); ++t) {
    const Segment& g = out.segments[t];
    auto& mask = t == out.positive_index ? out.positive_mask : out.negative_mask;
    mask.segment(g.start, g.length()).setConstant(true);
  }
  return out;
}

Vec frame_similarity(const Mat& video, const Vec& query_mean) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(video.cols()));
  return (scale * (video * query_mean)).unaryExpr([](double x) { return sigmoid(x); });
}

ContrastLoss contrast_loss(const std::vector<Vec>& u, const std::vector<BoolVec>& positive,
                           const std::vector<BoolVec>& negative) {
  ContrastLoss out;
  out.grad.resize(u.size());
  double pos = 0.0, neg = 0.0;
  std::vector<bool> used(u.size(), false);
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (!negative[k].any()) continue;
    used[k] = true;
    pos += positive[k].select(u[k], 0.0).sum();
    neg += negative[k].select(u[k], 0.0).sum();
  }
  if (neg == 0.0) {
    out.skipped = true;
    return out;
  }
  out.value = -std::log(pos / neg);
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (!used[k]) continue;
    out.grad[k] = Vec::Zero(u[k].size());
    for (Eigen::Index i = 0; i < u[k].size(); ++i) {
      if (positive[k](i)) out.grad[k](i) = -1.0 / pos;
      if (negative[k](i)) out.grad[k](i) = 1.0 / neg;
    }
  }
  return out;
}

ContrastLoss frame_contrast_loss(const std::vector<Vec>& u, const std::vector<MaskSet>& masks) {
  std::vector<BoolVec> p, n;
  for (const auto& m : masks) {
    p.push_back(m.positive);
    n.push_back(m.negative);
  }
  return contrast_loss(u, p, n);
}

ContrastLoss segment_contrast_loss(const std::vector<Vec>& u, const std::vector<SegmentSet>& segments) {
  std::vector<BoolVec> p, n;
  for (const auto& g : segments) {
    p.push_back(g.positive_mask);
    n.push_back(g.negative_mask);
  }
  return contrast_loss(u, p, n);
}

}  // namespace mscl
