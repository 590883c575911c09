#pragma once

#include <vector>

#include "mscl/linalg.hpp"
#include "mscl/model.hpp"

// Forward passes return what their backward pass needs; every backward pass
// accumulates into a gradient struct of the same shape as the parameters and
// returns the gradient with respect to its input.
namespace mscl::layers {

Mat linear_forward(const Linear& l, const Mat& x);
Mat linear_backward(const Linear& l, const Mat& x, const Mat& dy, Linear& grad);

struct NormCache {
  Mat normalized;  // x-hat
  Vec inv_std;
};
inline constexpr double kNormEpsilon = 1e-5;

Mat layer_norm_forward(const LayerNorm& n, const Mat& x, NormCache& cache);
Mat layer_norm_backward(const LayerNorm& n, const NormCache& cache, const Mat& dy, LayerNorm& grad);

// Rows [t - k/2, t + k/2] of x side by side; out-of-range rows are zero.
Mat unfold(const Mat& x, int kernel);
// Adjoint of unfold.
Mat fold(const Mat& du, int kernel, int dim);

struct ConvCache {
  Mat input;
  Mat unfolded;
  Mat activation_grad;
  NormCache norm;
};

// y = LayerNorm(x + act(conv(x)))
Mat conv_block_forward(const ConvBlock& b, const Mat& x, Activation act, int kernel, ConvCache& cache);
Mat conv_block_backward(const ConvBlock& b, const ConvCache& cache, const Mat& dy, int kernel,
                        ConvBlock& grad);

struct AttentionCache {
  Mat input, q, k, v, context;
  std::vector<Mat> probs;  // one len x len matrix per head
  NormCache norm;
};

// y = LayerNorm(x + MultiHeadSelfAttention(x))
Mat attention_forward(const SelfAttention& a, const Mat& x, int num_heads, AttentionCache& cache);
Mat attention_backward(const SelfAttention& a, const AttentionCache& cache, const Mat& dy, int num_heads,
                       SelfAttention& grad);

struct HeadCache {
  Mat input, a1, a2;
  Mat g1, g2;  // activation derivatives
};

// Returns a len x 1 column of logits.
Mat head_forward(const FrameHead& h, const Mat& x, Activation act, HeadCache& cache);
Mat head_backward(const FrameHead& h, const HeadCache& cache, const Mat& dlogit, FrameHead& grad);

}  // namespace mscl::layers
