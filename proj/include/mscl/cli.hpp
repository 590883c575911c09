#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mscl/data.hpp"
#include "mscl/model.hpp"
#include "mscl/training.hpp"

namespace mscl::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericError = 3 };

// Every knob of every command. Flags override values from --config.
struct RunConfig {
  SyntheticSpec synth;
  int holdout = 0;
  ModelConfig model;
  TrainConfig train;
  std::string ablate = "full";

  std::filesystem::path data;        // manifest
  std::filesystem::path out;         // output directory
  std::filesystem::path checkpoint;  // eval / plot-scores input
  std::filesystem::path resume;
  std::filesystem::path predictions;
  std::filesystem::path mining_trace;
  int trace_every = 50;
  int stop_after = -1;
  bool force = false;
  int threads = 0;

  std::vector<double> iou_grid{0.3, 0.5, 0.7};
  std::vector<int> top_n{1, 5};
  std::vector<std::string> sample_ids;
};

// Zeroes the loss weights named by the ablation: score-only, no-frame,
// no-segment or full.
void apply_ablation(const std::string& name, TrainConfig& train);

int cmd_synth(const RunConfig& cfg);
int cmd_train(const RunConfig& cfg);
int cmd_eval(const RunConfig& cfg);
int cmd_plot_scores(const RunConfig& cfg);

// Parses argv, dispatches, and maps failures onto ExitCode.
int run(int argc, char** argv);

}  // namespace mscl::cli
