#include "mscl/scoring.hpp"

#include <omp.h>

#include "mscl/errors.hpp"

namespace mscl {

int available_threads() { return omp_get_max_threads(); }
void set_thread_count(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

std::pair<FrameScores, FrameWeights> predict_scores(const InteractionOutput& vq, const ModelParams& params,
                                                    const ModelConfig& config, ScoreCache* cache) {
  ScoreCache local;
  ScoreCache& c = cache ? *cache : local;
  const Mat score_logit = layers::head_forward(params.score_head, vq.features, config.activation, c.score_head);
  const Mat weight_logit = layers::head_forward(params.weight_head, vq.features, config.activation, c.weight_head);
  c.s = score_logit.col(0).unaryExpr([](double x) { return sigmoid(x); });
  c.w = softmax(weight_logit.col(0));
  return {FrameScores{c.s}, FrameWeights{c.w}};
}

Mat predict_scores_backward(const ModelParams& params, const ScoreCache& c,
                            const Vec& dscores, const Vec& dweights, ModelParams& grad) {
  const Vec dscore_logit = dscores.cwiseProduct(c.s.cwiseProduct((1.0 - c.s.array()).matrix()));
  const Vec dweight_logit = c.w.cwiseProduct((dweights.array() - c.w.dot(dweights)).matrix());
  Mat dvq = layers::head_backward(params.score_head, c.score_head, dscore_logit,
                                  grad.score_head);
  dvq += layers::head_backward(params.weight_head, c.weight_head, dweight_logit,
                               grad.weight_head);
  return dvq;
}

double pair_score(const FrameScores& scores, const FrameWeights& weights) {
  if (scores.size() != weights.size()) {
    throw DataError("pair_score: " + std::to_string(scores.size()) + " scores vs " +
                    std::to_string(weights.size()) + " weights");
  }
  return scores.s.dot(weights.w);
}

Vec pooled(const Mat& encoded) { return encoded.colwise().mean().transpose(); }

Mat similarity_matrix(const std::vector<EncodedPair>& pairs) {
  const int K = static_cast<int>(pairs.size());
  Mat sim(K, K);
  if (K == 0) return sim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(pairs[0].video.cols()));
  std::vector<Vec> vbar(K), qbar(K);
  for (int k = 0; k < K; ++k) {
    vbar[k] = pooled(pairs[k].video);
    qbar[k] = pooled(pairs[k].query);
  }
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < K; ++j) sim(k, j) = sigmoid(scale * vbar[k].dot(qbar[j]));
  return sim;
}

PairScoreMatrix cross_pair_scores(const std::vector<EncodedPair>& pairs, const ModelParams& params,
                                  const ModelConfig& config, Execution exec) {
  const int K = static_cast<int>(pairs.size());
  PairScoreMatrix out;
  out.s_hat.resize(K, K);
  out.sim = similarity_matrix(pairs);
#pragma omp parallel for schedule(static) if (exec == Execution::parallel)
  for (int idx = 0; idx < K * K; ++idx) {
    const int k = idx / K, j = idx % K;
    const InteractionOutput vq = interact({pairs[k].video, pairs[j].query}, params, config);
    const auto [s, w] = predict_scores(vq, params, config);
    out.s_hat(k, j) = pair_score(s, w);
  }
  return out;
}

double score_loss(const PairScoreMatrix& p) {
  const double num = p.s_hat.trace() + p.sim.trace();
  const double den = p.s_hat.sum() + p.sim.sum();
  return -std::log(num / den);
}

PairScoreMatrix score_loss_grad(const PairScoreMatrix& p) {
  const double num = p.s_hat.trace() + p.sim.trace();
  const double den = p.s_hat.sum() + p.sim.sum();
  const Eigen::Index K = p.s_hat.rows();
  Mat g = Mat::Constant(K, K, 1.0 / den);
  g.diagonal().array() -= 1.0 / num;
  return {g, g};
}

}  // namespace mscl
