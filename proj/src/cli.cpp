#include "mscl/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mscl/errors.hpp"
#include "mscl/localization.hpp"
#include "mscl/metrics.hpp"
#include "mscl/objective.hpp"

namespace mscl::cli {

namespace fs = std::filesystem;

void apply_ablation(const std::string& name, TrainConfig& train) {
  if (name == "full") return;
  if (name == "score-only") {
    train.lambda_fra = 0.0;
    train.lambda_seg = 0.0;
  } else if (name == "no-frame") {
    train.lambda_fra = 0.0;
  } else if (name == "no-segment") {
    train.lambda_seg = 0.0;
  } else {
    throw CLI::ValidationError("--ablate", "unknown ablation '" + name + "'");
  }
}

namespace {

void prepare_out_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!force) throw DataError("output directory " + dir.string() + " exists (use --force to overwrite)");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

std::vector<GroundTruth> ground_truths(const std::vector<FeatureSample>& data) {
  std::vector<GroundTruth> out;
  for (const auto& s : data) out.push_back({s.sample_id, s.ground_truth});
  return out;
}

void write_trace(std::ostream& os, const BatchObservation& obs) {
  for (int k = 0; k < obs.batch.size(); ++k) {
    const Bounds& b = obs.eval.bounds[k];
    const MaskSet fm = obs.mining ? obs.eval.masks.frame[k] : frame_masks(obs.eval.scores[k], b.lower, b.upper);
    const SegmentSet sm = obs.mining ? obs.eval.masks.segment[k] : extract_segments(obs.eval.scores[k], b.upper);
    const auto indices = [](const BoolVec& m) {
      std::vector<int> idx;
      for (Eigen::Index i = 0; i < m.size(); ++i)
        if (m(i)) idx.push_back(static_cast<int>(i));
      return idx;
    };
    nlohmann::ordered_json rec;
    rec["epoch"] = obs.epoch;
    rec["sample_id"] = obs.batch.sample_ids[k];
    rec["b_l"] = b.lower;
    rec["b_u"] = b.upper;
    rec["positive"] = indices(fm.positive);
    rec["negative"] = indices(fm.negative);
    rec["segment_positive"] = indices(sm.positive_mask);
    rec["segment_negative"] = indices(sm.negative_mask);
    os << rec.dump() << '\n';
  }
}

void print_record(const EpochRecord& r) {
  std::printf("epoch %3d  lr %.5f  score %.5f  frame %.5f  segment %.5f  total %.5f  b_l %.4g  b_u %.4f\n", r.epoch,
              r.lr, r.score_loss, r.frame_loss, r.segment_loss, r.total, r.lower_bound, r.upper_bound);
  std::fflush(stdout);
}

std::vector<SamplePredictions> predict_all(const ModelParams& params, const ModelConfig& model,
                                           const std::vector<FeatureSample>& data) {
  std::vector<SamplePredictions> preds(data.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto [s, w] = infer_scores(params, model, data[i]);
    preds[i] = {data[i].sample_id, localize(s, data[i].frame_duration)};
  }
  return preds;
}

}  // namespace

int cmd_synth(const RunConfig& cfg) {
  cfg.synth.validate();
  if (cfg.holdout < 0 || cfg.holdout >= cfg.synth.num_samples) {
    throw DataError("--holdout must be in [0, num_samples)");
  }
  prepare_out_dir(cfg.out, cfg.force);
  const auto data = generate_synthetic(cfg.synth);
  const auto blobs = cfg.out / "blobs";
  save_manifest(data, cfg.out / "manifest.jsonl", blobs);
  if (cfg.holdout > 0) {
    const std::size_t cut = data.size() - static_cast<std::size_t>(cfg.holdout);
    const std::span<const FeatureSample> all(data);
    save_manifest(all.first(cut), cfg.out / "train.jsonl", blobs);
    save_manifest(all.subspan(cut), cfg.out / "test.jsonl", blobs);
  }
  std::printf("wrote %zu samples to %s\n", data.size(), cfg.out.string().c_str());
  return kOk;
}

int cmd_train(const RunConfig& cfg) {
  const auto data = load_manifest(cfg.data);
  if (data.empty()) throw DataError("dataset " + cfg.data.string() + " is empty");
  fs::create_directories(cfg.out);
  const auto ckpt_path = cfg.out / "checkpoint.bin";

  TrainingState state;
  if (!cfg.resume.empty()) {
    state = load_checkpoint(cfg.resume);
  } else {
    ModelConfig model = cfg.model;
    model.video_dim = static_cast<int>(data.front().video_features.cols());
    model.query_dim = static_cast<int>(data.front().query_features.cols());
    TrainConfig train = cfg.train;
    train.scheduler.warmup_epochs = train.warmup_epochs;
    apply_ablation(cfg.ablate, train);
    Trainer fresh(model, train);
    state = fresh.state();
  }
  state.train.exec = cfg.threads == 1 ? Execution::serial : Execution::parallel;
  Trainer trainer(std::move(state));

  std::ofstream trace;
  if (!cfg.mining_trace.empty()) {
    trace.open(cfg.mining_trace, trainer.next_epoch() > 0 ? std::ios::app : std::ios::trunc);
    if (!trace) throw DataError("cannot write mining trace " + cfg.mining_trace.string());
  }
  const int every = std::max(1, cfg.trace_every);
  BatchObserver observer;
  if (trace.is_open()) {
    observer = [&](const BatchObservation& obs) {
      if (obs.epoch % every == 0) write_trace(trace, obs);
    };
  }

  const int end = cfg.stop_after >= 0 ? std::min(cfg.stop_after, trainer.state().train.epochs)
                                      : trainer.state().train.epochs;
  const int ckpt_every = trainer.state().train.checkpoint_every;
  while (trainer.next_epoch() < end) {
    print_record(trainer.run_epoch(data, observer));
    if (ckpt_every > 0 && trainer.next_epoch() % ckpt_every == 0) save_checkpoint(trainer.state(), ckpt_path);
  }
  save_checkpoint(trainer.state(), ckpt_path);
  write_train_log(cfg.out / "train_log.tsv", trainer.state().log);
  return kOk;
}

int cmd_eval(const RunConfig& cfg) {
  const auto data = load_manifest(cfg.data);
  std::vector<std::string> missing;
  for (const auto& s : data)
    if (!s.ground_truth) missing.push_back(s.sample_id);
  if (!missing.empty()) {
    std::string names;
    for (const auto& id : missing) names += (names.empty() ? "" : ", ") + id;
    throw DataError("missing ground truth for: " + names);
  }
  std::vector<SamplePredictions> preds;
  if (!cfg.predictions.empty()) {
    preds = read_predictions(cfg.predictions);
  } else {
    if (cfg.checkpoint.empty()) throw CLI::ValidationError("eval", "--checkpoint or --predictions is required");
    const TrainingState st = load_checkpoint(cfg.checkpoint);
    preds = predict_all(st.params, st.model, data);
  }
  const EvalReport report = evaluate_dataset(preds, ground_truths(data), cfg.top_n, cfg.iou_grid);
  const std::string table = format_table(report);
  std::cout << table;
  if (!cfg.out.empty()) {
    fs::create_directories(cfg.out);
    if (cfg.predictions.empty()) write_predictions(cfg.out / "predictions.jsonl", preds);
    std::ofstream(cfg.out / "eval_table.txt", std::ios::trunc) << table;
    write_report_json(cfg.out / "eval_report.json", report);
  }
  return kOk;
}

int cmd_plot_scores(const RunConfig& cfg) {
  const auto data = load_manifest(cfg.data);
  const TrainingState st = load_checkpoint(cfg.checkpoint);
  fs::create_directories(cfg.out);
  for (const auto& id : cfg.sample_ids) {
    const auto it = std::find_if(data.begin(), data.end(), [&](const FeatureSample& s) { return s.sample_id == id; });
    if (it == data.end()) throw DataError("unknown sample id '" + id + "'");
    const auto [s, w] = infer_scores(st.params, st.model, *it);
    const double bu = upper_bound(s);
    const auto ranked = localize(s, it->frame_duration);
    std::ofstream out(cfg.out / (id + "_scores.csv"), std::ios::trunc);
    if (!out) throw DataError("cannot write score curve for '" + id + "'");
    out << "frame_index,score,weight,b_u,in_top_segment,in_ground_truth\n";
    char buf[256];
    for (int i = 0; i < s.size(); ++i) {
      const double lo = i * it->frame_duration, hi = (i + 1) * it->frame_duration;
      const double center = 0.5 * (lo + hi);
      const bool top = !ranked.empty() && lo >= ranked[0].start - 1e-12 && hi <= ranked[0].end + 1e-12;
      const bool gt = it->ground_truth && center >= it->ground_truth->start && center < it->ground_truth->end;
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%d,%d\n", i, s.s(i), w.w(i), bu, top ? 1 : 0,
                    gt ? 1 : 0);
      out << buf;
    }
  }
  return kOk;
}

namespace {

void add_model_options(CLI::App* cmd, RunConfig& c) {
  auto* g = cmd;
  g->add_option("--latent-dim", c.model.latent_dim, "Encoded feature dimension D (reference setup: 512)")
      ->capture_default_str();
  g->add_option("--conv-layers", c.model.num_conv_layers, "Convolution layers in the shared encoder")
      ->capture_default_str();
  g->add_option("--conv-kernel", c.model.conv_kernel, "Odd convolution kernel width")->capture_default_str();
  g->add_option("--heads", c.model.num_heads, "Self-attention heads; must divide D")->capture_default_str();
  g->add_option("--ffn-hidden", c.model.ffn_hidden, "Hidden width of the interaction feed-forward layer")
      ->capture_default_str();
  g->add_option("--head-hidden", c.model.head_hidden, "Hidden width of the score and weight heads")
      ->capture_default_str();
  g->add_option_function<std::string>(
       "--activation", [&c](const std::string& v) { c.model.activation = parse_activation(v); },
       "Nonlinearity: silu or tanh (default silu)")
      ->check(CLI::IsMember({"silu", "tanh"}));
  g->add_option("--init-seed", c.model.param_init_seed, "Parameter initialization seed")->capture_default_str();
}

void add_train_options(CLI::App* cmd, RunConfig& c) {
  TrainConfig& t = c.train;
  cmd->add_option("--epochs", t.epochs, "Training epochs (reference setup: 200)")->capture_default_str();
  cmd->add_option("--batch-size", t.batch_size, "Batch size K (reference setup: 16)")->capture_default_str();
  cmd->add_option("--lr", t.lr0, "Initial Adam learning rate, decayed linearly to 0 (reference setup: 0.01)")
      ->capture_default_str();
  cmd->add_option("--lambda-fra", t.lambda_fra, "Frame-scale contrastive weight (reference setup: 10)")
      ->capture_default_str();
  cmd->add_option("--lambda-seg", t.lambda_seg, "Segment-scale contrastive weight (reference setup: 5)")
      ->capture_default_str();
  cmd->add_option("--warmup", t.warmup_epochs, "Warm-up epochs without mining (reference setup: 50)")
      ->capture_default_str();
  cmd->add_option("--bl0", t.scheduler.initial_lower, "Initial lower bound b_l (reference setup: exp(-8))")
      ->capture_default_str();
  cmd->add_option("--delta", t.scheduler.delta, "Lower-bound growth factor per cycle (reference setup: 10)")
      ->capture_default_str();
  cmd->add_option("--cycle", t.scheduler.cycle_epochs, "Epochs per lower-bound cycle (reference setup: 50)")
      ->capture_default_str();
  cmd->add_option("--seed", t.seed, "Data-order seed")->capture_default_str();
  cmd->add_option("--checkpoint-every", t.checkpoint_every, "Checkpoint period in epochs (0 = only at the end)")
      ->capture_default_str();
  cmd->add_option("--beta1", t.adam.beta1, "Adam first-moment decay")->capture_default_str();
  cmd->add_option("--beta2", t.adam.beta2, "Adam second-moment decay")->capture_default_str();
  cmd->add_option("--adam-eps", t.adam.epsilon, "Adam epsilon")->capture_default_str();
  cmd->add_option("--ablate", c.ablate, "Loss configuration: full, score-only, no-frame, no-segment")
      ->check(CLI::IsMember({"full", "score-only", "no-frame", "no-segment"}))
      ->capture_default_str();
}

}  // namespace

int run(int argc, char** argv) {
  RunConfig c;
  CLI::App app{"Weakly-supervised temporal grounding with multi-scale self-contrastive learning"};
  app.set_config("--config", "", "TOML/INI config file; command-line flags take precedence");
  app.require_subcommand(1);
  app.add_option("--threads", c.threads, "OpenMP threads (0 = runtime default, 1 = serial kernels)");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic grounding dataset");
  synth->add_option("--out", c.out, "Output directory")->required();
  synth->add_flag("--force", c.force, "Replace an existing output directory");
  synth->add_option("--num-samples", c.synth.num_samples, "Number of samples")->capture_default_str();
  synth->add_option("--n", c.synth.n, "Frames per video")->capture_default_str();
  synth->add_option("--m", c.synth.m, "Words per query")->capture_default_str();
  synth->add_option("--dv", c.synth.video_dim, "Video feature dimension D_v")->capture_default_str();
  synth->add_option("--dq", c.synth.query_dim, "Query feature dimension D_q")->capture_default_str();
  synth->add_option("--min-seg", c.synth.min_seg_frames, "Minimum segment length in frames")->capture_default_str();
  synth->add_option("--max-seg", c.synth.max_seg_frames, "Maximum segment length in frames")->capture_default_str();
  synth->add_option("--noise-std", c.synth.noise_std, "Feature noise standard deviation")->capture_default_str();
  synth->add_option("--frame-duration", c.synth.frame_duration, "Seconds per frame")->capture_default_str();
  synth->add_option("--seed", c.synth.seed, "Generator seed")->capture_default_str();
  synth->add_option("--holdout", c.holdout, "Also write train.jsonl/test.jsonl with this many test samples")
      ->capture_default_str();

  auto* train = app.add_subcommand("train", "Train a model on a manifest");
  train->add_option("--data", c.data, "Training manifest")->required()->check(CLI::ExistingFile);
  train->add_option("--out", c.out, "Output directory for checkpoint.bin and train_log.tsv")->required();
  train->add_option("--resume", c.resume, "Continue from a checkpoint (its configuration wins)")
      ->check(CLI::ExistingFile);
  train->add_option("--stop-after", c.stop_after, "Stop once this many epochs are complete");
  train->add_option("--mining-trace", c.mining_trace, "Write per-sample mask records to this file");
  train->add_option("--trace-every", c.trace_every, "Epoch period of mining-trace records")->capture_default_str();
  add_model_options(train, c);
  add_train_options(train, c);

  auto* eval = app.add_subcommand("eval", "Compute R@n, IoU=m on a manifest with ground truth");
  eval->add_option("--data", c.data, "Manifest with ground truth")->required()->check(CLI::ExistingFile);
  eval->add_option("--checkpoint", c.checkpoint, "Trained checkpoint")->check(CLI::ExistingFile);
  eval->add_option("--predictions", c.predictions, "Evaluate this prediction dump instead of running the model")
      ->check(CLI::ExistingFile);
  eval->add_option("--out", c.out, "Directory for predictions.jsonl, eval_table.txt, eval_report.json");
  eval->add_option("--iou-grid", c.iou_grid, "IoU thresholds m (0.1,0.3,0.5 for ActivityNet-style columns)")
      ->delimiter(',')
      ->capture_default_str();
  eval->add_option("--top-n", c.top_n, "Candidate counts n")->delimiter(',')->capture_default_str();

  auto* plot = app.add_subcommand("plot-scores", "Export frame score curves as CSV");
  plot->add_option("--data", c.data, "Manifest")->required()->check(CLI::ExistingFile);
  plot->add_option("--checkpoint", c.checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  plot->add_option("--sample", c.sample_ids, "Sample id (repeatable)")->required();
  plot->add_option("--out", c.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    set_thread_count(c.threads);
    if (*synth) return cmd_synth(c);
    if (*train) {
      c.train.scheduler.warmup_epochs = c.train.warmup_epochs;
      return cmd_train(c);
    }
    if (*eval) return cmd_eval(c);
    if (*plot) return cmd_plot_scores(c);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumericError;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace mscl::cli
