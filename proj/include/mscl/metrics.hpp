#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mscl/interval.hpp"
#include "mscl/localization.hpp"

namespace mscl {

double temporal_iou(const TimeInterval& a, const TimeInterval& b);

// 1 when one of the first min(n, size) predictions has IoU strictly above m.
int recall_at(const std::vector<TimeInterval>& ranked, const TimeInterval& ground_truth, int n, double m);

struct SampleEval {
  std::string sample_id;
  double top1_iou = 0.0;
  double best_iou = 0.0;  // over the first max(n_values) predictions
};

struct EvalReport {
  std::vector<int> n_values;
  std::vector<double> m_values;
  std::vector<std::vector<double>> recall;  // [n index][m index]
  std::size_t sample_count = 0;
  std::vector<SampleEval> samples;

  double at(int n, double m) const;
};

struct GroundTruth {
  std::string sample_id;
  std::optional<TimeInterval> interval;
};

// Predictions and ground truths are matched by sample id; every ground-truth
// sample needs predictions and an interval.
EvalReport evaluate_dataset(const std::vector<SamplePredictions>& predictions,
                            const std::vector<GroundTruth>& ground_truths, const std::vector<int>& n_values,
                            const std::vector<double>& m_values);

// "R@n\tIoU=m..." header, then one row per n with recalls printed as %.4f.
std::string format_table(const EvalReport& report);
void write_report_json(const std::filesystem::path& path, const EvalReport& report);

}  // namespace mscl
