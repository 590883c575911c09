#include "mscl/objective.hpp"

#include "mscl/errors.hpp"
#include "mscl/layers.hpp"

namespace mscl {

namespace {

struct SampleCache {
  Mat video_input, query_input;  // valid rows of the raw features
  SequenceCache video_seq, query_seq;
  EncodedPair encoded;
  Vec video_mean, query_mean;
};

// The K pairs of one video. The FFN and both heads act row-wise, so pairs
// are stacked into chunks of about kChunkRows rows that share each GEMM.
constexpr Eigen::Index kChunkRows = 256;

struct PairChunk {
  int first = 0, last = 0;  // query range [first, last)
  Mat context;              // query-dependent 3D columns of the concatenation
  Mat hidden, hidden_grad, features;
  layers::HeadCache score_head, weight_head;
};

struct VideoBlock {
  Mat video;
  std::vector<InteractionCache> interaction;  // per query j
  std::vector<PairChunk> chunks;
  std::vector<Vec> s, w;  // per query j, n entries
};

void chunk_forward(const ModelParams& params, const ModelConfig& config, const Mat& shared,
                   const std::vector<SampleCache>& samples, VideoBlock& b, PairChunk& c) {
  const Eigen::Index n = b.video.rows(), d = b.video.cols();
  const int count = c.last - c.first;
  c.context.resize(count * n, 3 * d);
  for (int j = c.first; j < c.last; ++j) {
    c.context.middleRows((j - c.first) * n, n) =
        interaction_concat({b.video, samples[j].encoded.query}, b.interaction[j]).rightCols(3 * d);
  }
  Mat pre(count * n, params.ffn_in.weight.cols());
  pre.noalias() = c.context * params.ffn_in.weight.bottomRows(3 * d);
  for (int i = 0; i < count; ++i) pre.middleRows(i * n, n) += shared;
  c.hidden = activate(pre, config.activation, &c.hidden_grad);
  c.features = layers::linear_forward(params.ffn_out, c.hidden);
  const Mat score_logit = layers::head_forward(params.score_head, c.features, config.activation, c.score_head);
  const Mat weight_logit = layers::head_forward(params.weight_head, c.features, config.activation, c.weight_head);
  for (int j = c.first; j < c.last; ++j) {
    const Eigen::Index off = (j - c.first) * n;
    b.s[j] = score_logit.col(0).segment(off, n).unaryExpr([](double x) { return sigmoid(x); });
    b.w[j] = softmax(weight_logit.col(0).segment(off, n));
  }
}

void block_forward(const ModelParams& params, const ModelConfig& config, const Mat& video,
                   const std::vector<SampleCache>& samples, VideoBlock& b) {
  const int K = static_cast<int>(samples.size());
  const Eigen::Index n = video.rows(), d = video.cols();
  b.video = video;
  b.interaction.assign(K, {});
  b.s.assign(K, {});
  b.w.assign(K, {});
  // The V~ columns are the same for every query, so their product is shared.
  Mat shared = video * params.ffn_in.weight.topRows(d);
  add_row_bias(shared, params.ffn_in.bias);
  const int per_chunk = static_cast<int>(std::max<Eigen::Index>(1, kChunkRows / n));
  b.chunks.clear();
  for (int first = 0; first < K; first += per_chunk) {
    PairChunk& c = b.chunks.emplace_back();
    c.first = first;
    c.last = std::min(K, first + per_chunk);
    chunk_forward(params, config, shared, samples, b, c);
  }
}

// dL/ds_hat(k, j) = coef[j]. Returns the part of dL/dV~_k flowing through
// this chunk; dL/dQ~_j goes to dquery[j]; dpre_sum collects the
// query-summed FFN input gradient for the shared columns.
Mat chunk_backward(const ModelParams& params, const VideoBlock& b, const PairChunk& c, const Vec& coef,
                   std::vector<Mat>& dquery, Mat& dpre_sum, ModelParams& grad) {
  const Eigen::Index n = b.video.rows(), d = b.video.cols();
  const int count = c.last - c.first;
  Mat dscore_logit(count * n, 1), dweight_logit(count * n, 1);
  for (int j = c.first; j < c.last; ++j) {
    const Vec& s = b.s[j];
    const Vec& w = b.w[j];
    const Eigen::Index off = (j - c.first) * n;
    // ds = coef w, dw = coef s
    dscore_logit.col(0).segment(off, n) = coef(j) * w.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix()));
    dweight_logit.col(0).segment(off, n) = coef(j) * w.cwiseProduct((s.array() - w.dot(s)).matrix());
  }
  Mat dfeatures = layers::head_backward(params.score_head, c.score_head, dscore_logit, grad.score_head);
  dfeatures += layers::head_backward(params.weight_head, c.weight_head, dweight_logit, grad.weight_head);
  const Mat dhidden = layers::linear_backward(params.ffn_out, c.hidden, dfeatures, grad.ffn_out);
  const Mat dpre = dhidden.cwiseProduct(c.hidden_grad);
  grad.ffn_in.weight.bottomRows(3 * d).noalias() += c.context.transpose() * dpre;
  const Mat dcontext = dpre * params.ffn_in.weight.bottomRows(3 * d).transpose();

  Mat dvideo = Mat::Zero(n, d);
  Mat dconcat(n, 4 * d);
  dconcat.leftCols(d).setZero();
  for (int j = c.first; j < c.last; ++j) {
    const Eigen::Index off = (j - c.first) * n;
    dpre_sum += dpre.middleRows(off, n);
    dconcat.rightCols(3 * d) = dcontext.middleRows(off, n);
    InteractionGrad ig = interaction_concat_backward(b.interaction[j], dconcat);
    dvideo += ig.video;
    dquery[j] = std::move(ig.query);
  }
  return dvideo;
}

Mat block_backward(const ModelParams& params, const VideoBlock& b, const Vec& coef, std::vector<Mat>& dquery,
                   ModelParams& grad) {
  const Eigen::Index n = b.video.rows(), d = b.video.cols();
  Mat dpre_sum = Mat::Zero(n, params.ffn_in.weight.cols());
  Mat dvideo = Mat::Zero(n, d);
  for (const PairChunk& c : b.chunks) dvideo += chunk_backward(params, b, c, coef, dquery, dpre_sum, grad);
  grad.ffn_in.weight.topRows(d).noalias() += b.video.transpose() * dpre_sum;
  grad.ffn_in.bias += dpre_sum.colwise().sum();
  dvideo.noalias() += dpre_sum * params.ffn_in.weight.topRows(d).transpose();
  return dvideo;
}

}  // namespace

BatchEvaluation evaluate_batch(const ModelParams& params, const ModelConfig& config, const Batch& batch,
                               const ObjectiveOptions& options, ModelParams* grad) {
  const FlushSubnormals ftz;
  const int K = batch.size();
  if (K < 1) throw DataError("evaluate_batch: empty batch");
  const bool parallel = options.exec == Execution::parallel;
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.latent_dim));
  for (int k = 0; k < K; ++k) {
    if (batch.video[k].cols() != params.video_proj.weight.rows() ||
        batch.query[k].cols() != params.query_proj.weight.rows()) {
      throw DataError("sample '" + batch.sample_ids[k] + "': feature dimensions do not match the model");
    }
  }

  std::vector<SampleCache> samples(K);
#pragma omp parallel for schedule(static) if (parallel)
  for (int k = 0; k < K; ++k) {
    const FlushSubnormals ftz;
    SampleCache& c = samples[k];
    c.video_input = batch.video[k].topRows(batch.frames(k));
    c.query_input = batch.query[k].topRows(batch.words(k));
    c.encoded.video = encode_sequence(params, config, layers::linear_forward(params.video_proj, c.video_input),
                                      &c.video_seq);
    c.encoded.query = encode_sequence(params, config, layers::linear_forward(params.query_proj, c.query_input),
                                      &c.query_seq);
    c.video_mean = pooled(c.encoded.video);
    c.query_mean = pooled(c.encoded.query);
  }

  BatchEvaluation ev;
  ev.pairs.s_hat.resize(K, K);
  std::vector<VideoBlock> blocks(K);
#pragma omp parallel for schedule(static) if (parallel)
  for (int k = 0; k < K; ++k) {
    const FlushSubnormals ftz;
    block_forward(params, config, samples[k].encoded.video, samples, blocks[k]);
    for (int j = 0; j < K; ++j) ev.pairs.s_hat(k, j) = blocks[k].s[j].dot(blocks[k].w[j]);
  }

  ev.pairs.sim.resize(K, K);
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < K; ++j) ev.pairs.sim(k, j) = sigmoid(scale * samples[k].video_mean.dot(samples[j].query_mean));
  ev.score_loss = score_loss(ev.pairs);

  for (int k = 0; k < K; ++k) {
    ev.scores.push_back({blocks[k].s[k]});
    ev.weights.push_back({blocks[k].w[k]});
    Bounds b;
    b.upper = upper_bound(ev.scores.back());
    b.lower_unclamped = options.lower_bound;
    b.lower = std::min(b.lower_unclamped, b.upper);
    ev.bounds.push_back(b);
  }

  std::vector<Vec> u;
  ContrastLoss fra, seg;
  if (options.mining) {
    if (options.frozen_masks) {
      ev.masks = *options.frozen_masks;
    } else {
      for (int k = 0; k < K; ++k) {
        ev.masks.frame.push_back(frame_masks(ev.scores[k], ev.bounds[k].lower, ev.bounds[k].upper));
        ev.masks.segment.push_back(extract_segments(ev.scores[k], ev.bounds[k].upper));
      }
    }
    for (int k = 0; k < K; ++k) u.push_back(frame_similarity(samples[k].encoded.video, samples[k].query_mean));
    fra = frame_contrast_loss(u, ev.masks.frame);
    seg = segment_contrast_loss(u, ev.masks.segment);
    ev.frame_loss = fra.value;
    ev.segment_loss = seg.value;
    ev.frame_skipped = fra.skipped;
    ev.segment_skipped = seg.skipped;
  }
  const LossWeights& lw = options.weights;
  ev.total = lw.score * ev.score_loss + lw.frame * ev.frame_loss + lw.segment * ev.segment_loss;
  if (!grad) return ev;

  // Upstream gradients with respect to the encoded sequences.
  std::vector<Mat> dvideo(K), dquery(K);
  std::vector<Vec> dvideo_mean(K), dquery_mean(K);
  for (int k = 0; k < K; ++k) {
    dvideo[k] = Mat::Zero(samples[k].encoded.video.rows(), config.latent_dim);
    dquery[k] = Mat::Zero(samples[k].encoded.query.rows(), config.latent_dim);
    dvideo_mean[k] = Vec::Zero(config.latent_dim);
    dquery_mean[k] = Vec::Zero(config.latent_dim);
  }

  const PairScoreMatrix dscore = score_loss_grad(ev.pairs);
  for (int k = 0; k < K; ++k) {
    for (int j = 0; j < K; ++j) {
      const double sim = ev.pairs.sim(k, j);
      const double g = lw.score * dscore.sim(k, j) * sim * (1.0 - sim) * scale;
      dvideo_mean[k] += g * samples[j].query_mean;
      dquery_mean[j] += g * samples[k].video_mean;
    }
  }

  if (options.mining) {
    for (int k = 0; k < K; ++k) {
      Vec du = Vec::Zero(u[k].size());
      bool touched = false;
      if (fra.grad[k].size() != 0 && lw.frame != 0.0) {
        du += lw.frame * fra.grad[k];
        touched = true;
      }
      if (seg.grad[k].size() != 0 && lw.segment != 0.0) {
        du += lw.segment * seg.grad[k];
        touched = true;
      }
      if (!touched) continue;
      const Vec dz = scale * du.cwiseProduct(u[k].cwiseProduct((1.0 - u[k].array()).matrix()));
      dvideo[k].noalias() += dz * samples[k].query_mean.transpose();
      dquery_mean[k].noalias() += samples[k].encoded.video.transpose() * dz;
    }
  }

  // Pair backward, one task per video so each task owns dvideo[k].
  std::vector<ModelParams> pair_grads(K);
  std::vector<std::vector<Mat>> dquery_parts(K, std::vector<Mat>(K));
#pragma omp parallel for schedule(static) if (parallel)
  for (int k = 0; k < K; ++k) {
    const FlushSubnormals ftz;
    pair_grads[k] = zeros_like(params);
    const Vec coef = lw.score * dscore.s_hat.row(k).transpose();
    dvideo[k] += block_backward(params, blocks[k], coef, dquery_parts[k], pair_grads[k]);
  }
  for (int k = 0; k < K; ++k) accumulate(*grad, pair_grads[k]);
  for (int j = 0; j < K; ++j)
    for (int k = 0; k < K; ++k) dquery[j] += dquery_parts[k][j];

  for (int k = 0; k < K; ++k) {
    dvideo[k].rowwise() += (dvideo_mean[k] / static_cast<double>(dvideo[k].rows())).transpose();
    dquery[k].rowwise() += (dquery_mean[k] / static_cast<double>(dquery[k].rows())).transpose();
  }

  std::vector<ModelParams> enc_grads(K);
#pragma omp parallel for schedule(static) if (parallel)
  for (int k = 0; k < K; ++k) {
    const FlushSubnormals ftz;
    ModelParams& g = enc_grads[k];
    g = zeros_like(params);
    const SampleCache& c = samples[k];
    const Mat dvp = encode_sequence_backward(params, config, c.video_seq, dvideo[k], g);
    layers::linear_backward(params.video_proj, c.video_input, dvp, g.video_proj);
    const Mat dqp = encode_sequence_backward(params, config, c.query_seq, dquery[k], g);
    layers::linear_backward(params.query_proj, c.query_input, dqp, g.query_proj);
  }
  for (int k = 0; k < K; ++k) accumulate(*grad, enc_grads[k]);
  return ev;
}

std::pair<FrameScores, FrameWeights> infer_scores(const ModelParams& params, const ModelConfig& config,
                                                  const FeatureSample& sample) {
  if (sample.video_features.cols() != params.video_proj.weight.rows() ||
      sample.query_features.cols() != params.query_proj.weight.rows()) {
    throw DataError("sample '" + sample.sample_id + "': feature dimensions do not match the model");
  }
  const EncodedPair enc =
      encode_modalities(layers::linear_forward(params.video_proj, sample.video_features),
                        layers::linear_forward(params.query_proj, sample.query_features), params, config);
  return predict_scores(interact(enc, params, config), params, config);
}

}  // namespace mscl
