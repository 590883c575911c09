#pragma once

#include <vector>

#include "mscl/data.hpp"
#include "mscl/layers.hpp"
#include "mscl/model.hpp"

namespace mscl {

// V' and Q' of one sample, zero-padded to the batch maxima.
struct ProjectedPair {
  Mat video;
  Mat query;
};

std::vector<ProjectedPair> project_features(const Batch& batch, const ModelParams& params,
                                            const ModelConfig& config);

// Encoded features of one sample restricted to its valid rows.
struct EncodedPair {
  Mat video;  // n x D   (V~)
  Mat query;  // m x D   (Q~)
};

struct SequenceCache {
  std::vector<layers::ConvCache> conv;
  layers::AttentionCache attention;
};

// The shared encoder f = f_v = f_q: conv blocks, then one self-attention
// block. Input and output are len x D.
Mat encode_sequence(const ModelParams& params, const ModelConfig& config, const Mat& x,
                    SequenceCache* cache = nullptr);
Mat encode_sequence_backward(const ModelParams& params, const ModelConfig& config, const SequenceCache& cache,
                             const Mat& dy, ModelParams& grad);

// Both arguments hold only valid rows.
EncodedPair encode_modalities(const Mat& video_projected, const Mat& query_projected, const ModelParams& params,
                              const ModelConfig& config);

// Projection and encoding of sample k of the batch, valid rows only.
EncodedPair encode_sample(const Batch& batch, int k, const ModelParams& params, const ModelConfig& config);

struct InteractionOutput {
  Mat features;     // n x D   (V^q)
  Mat similarity;   // n x m   (S)
  Mat row_softmax;  // n x m   (S_r)
  Mat col_softmax;  // n x m   (S_c)
};

struct InteractionCache {
  Mat video, query;
  Mat row_softmax, col_softmax;
  Mat video_context;     // S_r Q~          n x D
  Mat query_summary;     // S_c^T V~        m x D
  Mat query_context;     // S_r S_c^T V~    n x D
  Mat concat;            // n x 4D
  Mat hidden;            // n x ffn_hidden
  Mat hidden_grad;       // activation derivative at the hidden layer
};

// The attention stage of the interaction: fills the cache up to the n x 4D
// concatenation and returns it. The FFN is applied by the caller.
Mat interaction_concat(const EncodedPair& pair, InteractionCache& cache, Mat* similarity = nullptr);

InteractionOutput interact(const EncodedPair& pair, const ModelParams& params, const ModelConfig& config,
                           InteractionCache* cache = nullptr);

struct InteractionGrad {
  Mat video;
  Mat query;
};

InteractionGrad interaction_concat_backward(const InteractionCache& cache, const Mat& dconcat);
InteractionGrad interact_backward(const ModelParams& params, const ModelConfig& config,
                                  const InteractionCache& cache, const Mat& dfeatures, ModelParams& grad);

}  // namespace mscl
