#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mscl/data.hpp"
#include "mscl/mining.hpp"
#include "mscl/model.hpp"
#include "mscl/objective.hpp"

namespace mscl {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  int epochs = 200;
  int batch_size = 16;
  double lr0 = 0.01;  // decays linearly to 0 over `epochs`
  double lambda_fra = 10.0;
  double lambda_seg = 5.0;
  int warmup_epochs = 50;
  BoundScheduler scheduler;  // scheduler.warmup_epochs must equal warmup_epochs
  std::uint64_t seed = 0;    // data order
  int checkpoint_every = 0;  // epochs; 0 disables periodic checkpoints
  AdamConfig adam;
  Execution exec = Execution::parallel;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double score_loss = 0.0;  // batch means
  double frame_loss = 0.0;
  double segment_loss = 0.0;
  double total = 0.0;
  double lower_bound = 0.0;          // b_l before clamping
  double lower_bound_clamped = 0.0;  // mean over samples of min(b_l, b_u)
  double upper_bound = 0.0;          // mean over samples of b_u
  int frame_skipped = 0;             // batches whose frame loss was skipped
  int segment_skipped = 0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainLog {
  std::vector<EpochRecord> records;
};

// Tab-separated, one header line then one line per epoch, doubles as %.17g.
std::string train_log_header();
std::string format_record(const EpochRecord& r);
void write_train_log(const std::filesystem::path& path, const TrainLog& log);
TrainLog read_train_log(const std::filesystem::path& path);

// L_score + lambda_fra * L_fra + lambda_seg * L_seg; the mined terms are
// dropped before epoch `warmup_epochs`.
double total_loss(double score, double frame, double segment, const TrainConfig& config, int epoch);

double learning_rate(const TrainConfig& config, int epoch);

struct AdamState {
  ModelParams first;
  ModelParams second;
  std::int64_t step = 0;
};

AdamState make_adam_state(const ModelParams& params);
void adam_step(ModelParams& params, const ModelParams& grad, AdamState& state, double lr, const AdamConfig& cfg);

struct BatchObservation {
  int epoch;
  int batch_index;
  const Batch& batch;
  const BatchEvaluation& eval;
  bool mining;
};
using BatchObserver = std::function<void(const BatchObservation&)>;

// Everything needed to continue a run bit-for-bit.
struct TrainingState {
  ModelConfig model;
  TrainConfig train;
  ModelParams params;
  AdamState adam;
  int next_epoch = 0;
  TrainLog log;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const TrainingState& state, const std::filesystem::path& path);
TrainingState load_checkpoint(const std::filesystem::path& path);

class Trainer {
 public:
  Trainer(const ModelConfig& model, const TrainConfig& train);
  explicit Trainer(TrainingState state);

  // One pass over the data in the epoch's shuffled order.
  const EpochRecord& run_epoch(std::span<const FeatureSample> data, const BatchObserver& observer = {});
  // Runs epochs until `end_epoch` (exclusive), checkpointing into
  // `checkpoint_path` every train.checkpoint_every epochs when non-empty.
  void run(std::span<const FeatureSample> data, int end_epoch, const BatchObserver& observer = {},
           const std::filesystem::path& checkpoint_path = {});

  const TrainingState& state() const { return state_; }
  TrainingState& state() { return state_; }
  int next_epoch() const { return state_.next_epoch; }

 private:
  TrainingState state_;
};

// Sample order of an epoch; a function of (seed, epoch) only.
std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, int epoch);

struct TrainResult {
  ModelParams params;
  TrainLog log;
};

TrainResult train(std::span<const FeatureSample> data, const ModelConfig& model, const TrainConfig& config,
                  const BatchObserver& observer = {});

}  // namespace mscl
