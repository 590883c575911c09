#pragma once

namespace mscl {

// A span of time in seconds, [start, end), with the score it was ranked by.
struct TimeInterval {
  double start = 0.0;
  double end = 0.0;
  double rank_score = 0.0;

  double length() const { return end - start; }
  bool valid() const;

  friend bool operator==(const TimeInterval&, const TimeInterval&) = default;
};

}  // namespace mscl
