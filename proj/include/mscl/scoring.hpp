#pragma once

#include <utility>
#include <vector>

#include "mscl/encoding.hpp"
#include "mscl/layers.hpp"
#include "mscl/parallel.hpp"

namespace mscl {

// Per-frame matching scores over the valid frames of one pair, each in (0,1).
struct FrameScores {
  Vec s;
  int size() const { return static_cast<int>(s.size()); }
};

// Softmax weights over the valid frames.
struct FrameWeights {
  Vec w;
  int size() const { return static_cast<int>(w.size()); }
};

// Entry (k, j) pairs video k with query j.
struct PairScoreMatrix {
  Mat s_hat;
  Mat sim;
};

struct ScoreCache {
  layers::HeadCache score_head, weight_head;
  Vec s, w;
};

std::pair<FrameScores, FrameWeights> predict_scores(const InteractionOutput& vq, const ModelParams& params,
                                                    const ModelConfig& config, ScoreCache* cache = nullptr);

// Gradient with respect to V^q given dL/ds and dL/dw.
Mat predict_scores_backward(const ModelParams& params, const ScoreCache& cache,
                            const Vec& dscores, const Vec& dweights, ModelParams& grad);

// sum_i s_i * w_i
double pair_score(const FrameScores& scores, const FrameWeights& weights);

// Mean of the rows of an encoded sequence.
Vec pooled(const Mat& encoded);

// sim(k, j) = sigmoid(mean(V~_k) . mean(Q~_j) / sqrt(D))
Mat similarity_matrix(const std::vector<EncodedPair>& pairs);

// Runs the full interaction for every (video k, query j) of the batch.
PairScoreMatrix cross_pair_scores(const std::vector<EncodedPair>& pairs, const ModelParams& params,
                                  const ModelConfig& config, Execution exec = Execution::parallel);

// -log( sum_k (s_hat_kk + sim_kk) / sum_kj (s_hat_kj + sim_kj) )
double score_loss(const PairScoreMatrix& p);

// dL/ds_hat and dL/dsim.
PairScoreMatrix score_loss_grad(const PairScoreMatrix& p);

}  // namespace mscl
