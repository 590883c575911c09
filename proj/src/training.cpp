#include "mscl/training.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "mscl/errors.hpp"

namespace mscl {

void TrainConfig::validate() const {
  const auto fail = [](const std::string& what) { throw DataError("train config: " + what); };
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(lr0 > 0.0)) fail("lr0 must be > 0");
  if (!(lambda_fra >= 0.0) || !(lambda_seg >= 0.0)) fail("loss weights must be >= 0");
  if (warmup_epochs < 0) fail("warmup_epochs must be >= 0");
  if (scheduler.warmup_epochs != warmup_epochs) fail("scheduler warm-up differs from warmup_epochs");
  if (checkpoint_every < 0) fail("checkpoint_every must be >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 && adam.epsilon > 0.0)) {
    fail("invalid Adam constants");
  }
  scheduler.validate();
}

std::string train_log_header() {
  return "epoch\tlr\tscore_loss\tframe_loss\tsegment_loss\ttotal\tb_l\tb_l_clamped\tb_u\tframe_skipped\t"
         "segment_skipped";
}

std::string format_record(const EpochRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%d\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%d\t%d", r.epoch, r.lr,
                r.score_loss, r.frame_loss, r.segment_loss, r.total, r.lower_bound, r.lower_bound_clamped,
                r.upper_bound, r.frame_skipped, r.segment_skipped);
  return buf;
}

void write_train_log(const std::filesystem::path& path, const TrainLog& log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write train log " + path.string());
  out << train_log_header() << '\n';
  for (const auto& r : log.records) out << format_record(r) << '\n';
}

TrainLog read_train_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open train log " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != train_log_header()) throw DataError("bad train log header in " + path.string());
  TrainLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    EpochRecord r;
    if (!(is >> r.epoch >> r.lr >> r.score_loss >> r.frame_loss >> r.segment_loss >> r.total >> r.lower_bound >>
          r.lower_bound_clamped >> r.upper_bound >> r.frame_skipped >> r.segment_skipped)) {
      throw DataError("malformed train log line: " + line);
    }
    log.records.push_back(r);
  }
  return log;
}

double total_loss(double score, double frame, double segment, const TrainConfig& config, int epoch) {
  if (epoch < config.warmup_epochs) return score;
  return score + config.lambda_fra * frame + config.lambda_seg * segment;
}

double learning_rate(const TrainConfig& config, int epoch) {
  return config.lr0 * (1.0 - static_cast<double>(epoch) / static_cast<double>(config.epochs));
}

AdamState make_adam_state(const ModelParams& params) { return {zeros_like(params), zeros_like(params), 0}; }

void adam_step(ModelParams& params, const ModelParams& grad, AdamState& state, double lr, const AdamConfig& cfg) {
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  std::vector<const Mat*> g;
  std::vector<Mat*> m, v;
  for_each_tensor(grad, [&](const std::string&, const Mat& t) { g.push_back(&t); });
  for_each_tensor(state.first, [&](const std::string&, Mat& t) { m.push_back(&t); });
  for_each_tensor(state.second, [&](const std::string&, Mat& t) { v.push_back(&t); });
  std::size_t i = 0;
  for_each_tensor(params, [&](const std::string&, Mat& p) {
    Mat& mi = *m[i];
    Mat& vi = *v[i];
    const Mat& gi = *g[i];
    mi = cfg.beta1 * mi + (1.0 - cfg.beta1) * gi;
    vi = cfg.beta2 * vi + (1.0 - cfg.beta2) * gi.cwiseAbs2();
    p.array() -= lr * (mi.array() / c1) / ((vi.array() / c2).sqrt() + cfg.epsilon);
    ++i;
  });
}

std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch)};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

Trainer::Trainer(const ModelConfig& model, const TrainConfig& train) {
  model.validate();
  train.validate();
  state_.model = model;
  state_.train = train;
  state_.params = init_params(model);
  state_.adam = make_adam_state(state_.params);
}

Trainer::Trainer(TrainingState state) : state_(std::move(state)) {
  state_.model.validate();
  state_.train.validate();
}

const EpochRecord& Trainer::run_epoch(std::span<const FeatureSample> data, const BatchObserver& observer) {
  if (data.empty()) throw DataError("training set is empty");
  const FlushSubnormals ftz;  // covers the Adam update as well
  const TrainConfig& cfg = state_.train;
  const int epoch = state_.next_epoch;
  const auto order = epoch_order(data.size(), cfg.seed, epoch);
  const auto batches = batchify(data, order, cfg.batch_size);

  EpochRecord rec;
  rec.epoch = epoch;
  rec.lr = learning_rate(cfg, epoch);
  rec.lower_bound = lower_bound_at(cfg.scheduler, epoch);

  ObjectiveOptions opt;
  opt.exec = cfg.exec;
  opt.lower_bound = rec.lower_bound;
  const bool after_warmup = epoch >= cfg.warmup_epochs;
  opt.mining = after_warmup && (cfg.lambda_fra > 0.0 || cfg.lambda_seg > 0.0);
  opt.weights = {1.0, opt.mining ? cfg.lambda_fra : 0.0, opt.mining ? cfg.lambda_seg : 0.0};

  std::size_t sample_total = 0;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    ModelParams grad = zeros_like(state_.params);
    BatchEvaluation ev = evaluate_batch(state_.params, state_.model, batches[b], opt, &grad);
    if (cfg.lambda_fra == 0.0) ev.frame_loss = 0.0;
    if (cfg.lambda_seg == 0.0) ev.segment_loss = 0.0;
    const double total = total_loss(ev.score_loss, ev.frame_loss, ev.segment_loss, cfg, epoch);
    if (!std::isfinite(total) || !all_finite(grad)) {
      throw NumericError("non-finite loss or gradient at epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(b));
    }
    if (observer) observer({epoch, static_cast<int>(b), batches[b], ev, opt.mining});
    adam_step(state_.params, grad, state_.adam, rec.lr, cfg.adam);

    rec.score_loss += ev.score_loss;
    rec.frame_loss += ev.frame_loss;
    rec.segment_loss += ev.segment_loss;
    rec.total += total;
    if (opt.mining && cfg.lambda_fra > 0.0 && ev.frame_skipped) ++rec.frame_skipped;
    if (opt.mining && cfg.lambda_seg > 0.0 && ev.segment_skipped) ++rec.segment_skipped;
    for (const Bounds& bd : ev.bounds) {
      rec.lower_bound_clamped += bd.lower;
      rec.upper_bound += bd.upper;
    }
    sample_total += ev.bounds.size();
  }
  const double nb = static_cast<double>(batches.size());
  rec.score_loss /= nb;
  rec.frame_loss /= nb;
  rec.segment_loss /= nb;
  rec.total /= nb;
  rec.lower_bound_clamped /= static_cast<double>(sample_total);
  rec.upper_bound /= static_cast<double>(sample_total);

  state_.log.records.push_back(rec);
  ++state_.next_epoch;
  return state_.log.records.back();
}

void Trainer::run(std::span<const FeatureSample> data, int end_epoch, const BatchObserver& observer,
                  const std::filesystem::path& checkpoint_path) {
  const int every = state_.train.checkpoint_every;
  while (state_.next_epoch < end_epoch) {
    run_epoch(data, observer);
    if (!checkpoint_path.empty() && every > 0 && state_.next_epoch % every == 0) {
      save_checkpoint(state_, checkpoint_path);
    }
  }
}

TrainResult train(std::span<const FeatureSample> data, const ModelConfig& model, const TrainConfig& config,
                  const BatchObserver& observer) {
  Trainer trainer(model, config);
  trainer.run(data, config.epochs, observer);
  return {trainer.state().params, trainer.state().log};
}

}  // namespace mscl
