#include "mscl/encoding.hpp"

#include "mscl/errors.hpp"

namespace mscl {

namespace {

void check_input_dims(const Batch& batch, const ModelParams& params) {
  for (int k = 0; k < batch.size(); ++k) {
    if (batch.video[k].cols() != params.video_proj.weight.rows() ||
        batch.query[k].cols() != params.query_proj.weight.rows()) {
      throw DataError("sample '" + batch.sample_ids[k] + "': feature dimensions (" +
                      std::to_string(batch.video[k].cols()) + ", " + std::to_string(batch.query[k].cols()) +
                      ") do not match the model's projections (" +
                      std::to_string(params.video_proj.weight.rows()) + ", " +
                      std::to_string(params.query_proj.weight.rows()) + ")");
    }
  }
}

}  // namespace

std::vector<ProjectedPair> project_features(const Batch& batch, const ModelParams& params,
                                            const ModelConfig& config) {
  check_input_dims(batch, params);
  std::vector<ProjectedPair> out;
  out.reserve(batch.size());
  for (int k = 0; k < batch.size(); ++k) {
    ProjectedPair p;
    p.video = Mat::Zero(batch.max_frames(), config.latent_dim);
    p.query = Mat::Zero(batch.max_words(), config.latent_dim);
    const int n = batch.frames(k), m = batch.words(k);
    p.video.topRows(n) = layers::linear_forward(params.video_proj, batch.video[k].topRows(n));
    p.query.topRows(m) = layers::linear_forward(params.query_proj, batch.query[k].topRows(m));
    out.push_back(std::move(p));
  }
  return out;
}

Mat encode_sequence(const ModelParams& params, const ModelConfig& config, const Mat& x, SequenceCache* cache) {
  SequenceCache local;
  SequenceCache& c = cache ? *cache : local;
  c.conv.resize(params.conv.size());
  Mat h = x;
  for (std::size_t i = 0; i < params.conv.size(); ++i) {
    h = layers::conv_block_forward(params.conv[i], h, config.activation, config.conv_kernel, c.conv[i]);
  }
  return layers::attention_forward(params.attention, h, config.num_heads, c.attention);
}

Mat encode_sequence_backward(const ModelParams& params, const ModelConfig& config, const SequenceCache& cache,
                             const Mat& dy, ModelParams& grad) {
  Mat d = layers::attention_backward(params.attention, cache.attention, dy, config.num_heads, grad.attention);
  for (std::size_t i = params.conv.size(); i-- > 0;) {
    d = layers::conv_block_backward(params.conv[i], cache.conv[i], d, config.conv_kernel,
                                    grad.conv[i]);
  }
  return d;
}

EncodedPair encode_modalities(const Mat& video_projected, const Mat& query_projected, const ModelParams& params,
                              const ModelConfig& config) {
  return {encode_sequence(params, config, video_projected), encode_sequence(params, config, query_projected)};
}

EncodedPair encode_sample(const Batch& batch, int k, const ModelParams& params, const ModelConfig& config) {
  const int n = batch.frames(k), m = batch.words(k);
  if (batch.video[k].cols() != params.video_proj.weight.rows() ||
      batch.query[k].cols() != params.query_proj.weight.rows()) {
    throw DataError("sample '" + batch.sample_ids[k] + "': feature dimensions do not match the model");
  }
  return encode_modalities(layers::linear_forward(params.video_proj, batch.video[k].topRows(n)),
                           layers::linear_forward(params.query_proj, batch.query[k].topRows(m)), params, config);
}

Mat interaction_concat(const EncodedPair& pair, InteractionCache& c, Mat* similarity) {
  const Mat& v = pair.video;
  const Mat& q = pair.query;
  const Eigen::Index n = v.rows(), d = v.cols();
  if (q.cols() != d) throw DataError("interact: video and query widths differ");
  const Mat sim = (v * q.transpose()) / std::sqrt(static_cast<double>(d));
  c.video = v;
  c.query = q;
  c.row_softmax = row_softmax(sim);
  c.col_softmax = col_softmax(sim);
  if (similarity) *similarity = sim;
  c.video_context.noalias() = c.row_softmax * q;
  c.query_summary.noalias() = c.col_softmax.transpose() * v;
  c.query_context.noalias() = c.row_softmax * c.query_summary;
  Mat concat(n, 4 * d);
  concat.leftCols(d) = v;
  concat.middleCols(d, d) = c.video_context;
  concat.middleCols(2 * d, d) = v.cwiseProduct(c.video_context);
  concat.rightCols(d) = v.cwiseProduct(c.query_context);
  return concat;
}

InteractionGrad interaction_concat_backward(const InteractionCache& c, const Mat& dconcat) {
  const Eigen::Index d = c.video.cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  const auto d0 = dconcat.leftCols(d);
  const auto d1 = dconcat.middleCols(d, d);
  const auto d2 = dconcat.middleCols(2 * d, d);
  const auto d3 = dconcat.rightCols(d);

  InteractionGrad g;
  g.video = d0 + d2.cwiseProduct(c.video_context) + d3.cwiseProduct(c.query_context);
  const Mat dvctx = d1 + d2.cwiseProduct(c.video);
  const Mat dqctx = d3.cwiseProduct(c.video);

  // query_context = S_r * query_summary, query_summary = S_c^T * V~
  Mat dsr = dqctx * c.query_summary.transpose();
  const Mat dsummary = c.row_softmax.transpose() * dqctx;
  const Mat dsc = c.video * dsummary.transpose();
  g.video.noalias() += c.col_softmax * dsummary;

  // video_context = S_r * Q~
  dsr.noalias() += dvctx * c.query.transpose();
  g.query = c.row_softmax.transpose() * dvctx;

  const Mat ds = row_softmax_backward(c.row_softmax, dsr) + col_softmax_backward(c.col_softmax, dsc);
  g.video.noalias() += scale * ds * c.query;
  g.query.noalias() += scale * ds.transpose() * c.video;
  return g;
}

InteractionOutput interact(const EncodedPair& pair, const ModelParams& params, const ModelConfig& config,
                           InteractionCache* cache) {
  InteractionCache local;
  InteractionCache& c = cache ? *cache : local;
  InteractionOutput out;
  c.concat = interaction_concat(pair, c, &out.similarity);
  out.row_softmax = c.row_softmax;
  out.col_softmax = c.col_softmax;
  c.hidden = activate(layers::linear_forward(params.ffn_in, c.concat), config.activation, &c.hidden_grad);
  out.features = layers::linear_forward(params.ffn_out, c.hidden);
  return out;
}

InteractionGrad interact_backward(const ModelParams& params, const ModelConfig& /*config*/,
                                  const InteractionCache& c, const Mat& dfeatures, ModelParams& grad) {
  const Mat dhidden = layers::linear_backward(params.ffn_out, c.hidden, dfeatures, grad.ffn_out);
  const Mat dpre = dhidden.cwiseProduct(c.hidden_grad);
  const Mat dconcat = layers::linear_backward(params.ffn_in, c.concat, dpre, grad.ffn_in);
  return interaction_concat_backward(c, dconcat);
}

}  // namespace mscl
