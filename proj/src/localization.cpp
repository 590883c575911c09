#include "mscl/localization.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "mscl/errors.hpp"
#include "mscl/mining.hpp"

namespace mscl {

std::vector<TimeInterval> localize(const FrameScores& scores, double frame_duration) {
  std::vector<TimeInterval> out;
  if (scores.size() == 0) return out;
  const SegmentSet segs = extract_segments(scores, upper_bound(scores));
  if (segs.segments.empty()) {
    Eigen::Index best = 0;
    const double top = scores.s.maxCoeff(&best);
    out.push_back({best * frame_duration, (best + 1) * frame_duration, top});
    return out;
  }
  for (const Segment& g : segs.segments) {
    out.push_back({g.start * frame_duration, (g.end + 1) * frame_duration, g.score});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const TimeInterval& a, const TimeInterval& b) { return a.rank_score > b.rank_score; });
  return out;
}

void write_predictions(const std::filesystem::path& path, const std::vector<SamplePredictions>& preds) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write predictions " + path.string());
  for (const auto& p : preds) {
    nlohmann::ordered_json rec;
    rec["sample_id"] = p.sample_id;
    rec["predictions"] = nlohmann::ordered_json::array();
    for (const auto& iv : p.intervals) {
      rec["predictions"].push_back({{"start", iv.start}, {"end", iv.end}, {"rank_score", iv.rank_score}});
    }
    out << rec.dump() << '\n';
  }
}

std::vector<SamplePredictions> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open predictions " + path.string());
  std::vector<SamplePredictions> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      SamplePredictions p;
      p.sample_id = rec.at("sample_id").get<std::string>();
      for (const auto& iv : rec.at("predictions")) {
        p.intervals.push_back(
            {iv.at("start").get<double>(), iv.at("end").get<double>(), iv.value("rank_score", 0.0)});
        if (!p.intervals.back().valid()) {
          throw DataError(path.string() + ":" + std::to_string(line_no) + ": invalid interval for '" + p.sample_id +
                          "'");
        }
      }
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace mscl
