#include "mscl/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "mscl/errors.hpp"

namespace mscl {

double temporal_iou(const TimeInterval& a, const TimeInterval& b) {
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = a.length() + b.length() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

int recall_at(const std::vector<TimeInterval>& ranked, const TimeInterval& ground_truth, int n, double m) {
  const std::size_t top = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(std::max(n, 0)));
  for (std::size_t i = 0; i < top; ++i) {
    if (temporal_iou(ranked[i], ground_truth) > m) return 1;
  }
  return 0;
}

double EvalReport::at(int n, double m) const {
  for (std::size_t a = 0; a < n_values.size(); ++a) {
    if (n_values[a] != n) continue;
    for (std::size_t b = 0; b < m_values.size(); ++b) {
      if (std::abs(m_values[b] - m) < 1e-12) return recall[a][b];
    }
  }
  throw std::out_of_range("EvalReport::at: no such cell");
}

EvalReport evaluate_dataset(const std::vector<SamplePredictions>& predictions,
                            const std::vector<GroundTruth>& ground_truths, const std::vector<int>& n_values,
                            const std::vector<double>& m_values) {
  std::unordered_map<std::string, const SamplePredictions*> by_id;
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.sample_id, &p).second) throw DataError("duplicate predictions for '" + p.sample_id + "'");
  }
  std::vector<std::string> missing_gt;
  for (const auto& g : ground_truths) {
    if (!g.interval) missing_gt.push_back(g.sample_id);
  }
  if (!missing_gt.empty()) {
    std::string names;
    for (const auto& id : missing_gt) names += (names.empty() ? "" : ", ") + id;
    throw DataError("missing ground truth for: " + names);
  }
  if (predictions.size() != ground_truths.size()) {
    throw DataError("id mismatch: " + std::to_string(predictions.size()) + " prediction records vs " +
                    std::to_string(ground_truths.size()) + " ground truths");
  }

  EvalReport r;
  r.n_values = n_values;
  r.m_values = m_values;
  r.sample_count = ground_truths.size();
  r.recall.assign(n_values.size(), std::vector<double>(m_values.size(), 0.0));
  std::vector<std::vector<long>> hits(n_values.size(), std::vector<long>(m_values.size(), 0));
  const int n_max = n_values.empty() ? 1 : *std::max_element(n_values.begin(), n_values.end());
  for (const auto& g : ground_truths) {
    const auto it = by_id.find(g.sample_id);
    if (it == by_id.end()) throw DataError("id mismatch: no predictions for '" + g.sample_id + "'");
    const auto& ranked = it->second->intervals;
    for (std::size_t a = 0; a < n_values.size(); ++a)
      for (std::size_t b = 0; b < m_values.size(); ++b)
        hits[a][b] += recall_at(ranked, *g.interval, n_values[a], m_values[b]);
    SampleEval se{g.sample_id, 0.0, 0.0};
    if (!ranked.empty()) se.top1_iou = temporal_iou(ranked[0], *g.interval);
    for (std::size_t i = 0; i < std::min<std::size_t>(ranked.size(), n_max); ++i)
      se.best_iou = std::max(se.best_iou, temporal_iou(ranked[i], *g.interval));
    r.samples.push_back(std::move(se));
  }
  if (r.sample_count > 0) {
    for (std::size_t a = 0; a < n_values.size(); ++a)
      for (std::size_t b = 0; b < m_values.size(); ++b)
        r.recall[a][b] = static_cast<double>(hits[a][b]) / static_cast<double>(r.sample_count);
  }
  return r;
}

std::string format_table(const EvalReport& report) {
  std::ostringstream os;
  char buf[64];
  os << "R@n";
  for (double m : report.m_values) {
    std::snprintf(buf, sizeof buf, "\tIoU=%g", m);
    os << buf;
  }
  os << '\n';
  for (std::size_t a = 0; a < report.n_values.size(); ++a) {
    os << "R@" << report.n_values[a];
    for (std::size_t b = 0; b < report.m_values.size(); ++b) {
      std::snprintf(buf, sizeof buf, "\t%.4f", report.recall[a][b]);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

void write_report_json(const std::filesystem::path& path, const EvalReport& report) {
  nlohmann::ordered_json j;
  j["sample_count"] = report.sample_count;
  j["n_values"] = report.n_values;
  j["m_values"] = report.m_values;
  j["recall"] = report.recall;
  j["samples"] = nlohmann::ordered_json::array();
  for (const auto& s : report.samples) {
    j["samples"].push_back({{"sample_id", s.sample_id}, {"top1_iou", s.top1_iou}, {"best_iou", s.best_iou}});
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write report " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace mscl
