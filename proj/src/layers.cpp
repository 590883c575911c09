#include "mscl/layers.hpp"

namespace mscl::layers {

Mat linear_forward(const Linear& l, const Mat& x) {
  Mat y = x * l.weight;
  add_row_bias(y, l.bias);
  return y;
}

Mat linear_backward(const Linear& l, const Mat& x, const Mat& dy, Linear& grad) {
  grad.weight.noalias() += x.transpose() * dy;
  grad.bias += dy.colwise().sum();
  return dy * l.weight.transpose();
}

Mat layer_norm_forward(const LayerNorm& n, const Mat& x, NormCache& cache) {
  const Eigen::Index d = x.cols();
  const Vec mean = x.rowwise().mean();
  Mat centered = x.colwise() - mean;
  const Vec var = centered.array().square().rowwise().sum() / static_cast<double>(d);
  cache.inv_std = (var.array() + kNormEpsilon).rsqrt().matrix();
  cache.normalized = centered.array().colwise() * cache.inv_std.array();
  Mat y = cache.normalized.array().rowwise() * n.gain.row(0).array();
  add_row_bias(y, n.shift);
  return y;
}

Mat layer_norm_backward(const LayerNorm& n, const NormCache& cache, const Mat& dy, LayerNorm& grad) {
  const double d = static_cast<double>(dy.cols());
  grad.gain += dy.cwiseProduct(cache.normalized).colwise().sum();
  grad.shift += dy.colwise().sum();
  const Mat dxhat = dy.array().rowwise() * n.gain.row(0).array();
  const Vec mean_dxhat = dxhat.rowwise().sum() / d;
  const Vec mean_dxhat_xhat = dxhat.cwiseProduct(cache.normalized).rowwise().sum() / d;
  Mat dx = dxhat.colwise() - mean_dxhat;
  dx -= cache.normalized.cwiseProduct(mean_dxhat_xhat.replicate(1, dy.cols()));
  return dx.array().colwise() * cache.inv_std.array();
}

Mat unfold(const Mat& x, int kernel) {
  const Eigen::Index len = x.rows(), d = x.cols();
  const int half = kernel / 2;
  Mat u = Mat::Zero(len, kernel * d);
  for (int o = 0; o < kernel; ++o) {
    const Eigen::Index shift = o - half;
    const Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
    const Eigen::Index hi = std::min<Eigen::Index>(len, len - shift);
    if (hi > lo) u.block(lo, o * d, hi - lo, d) = x.middleRows(lo + shift, hi - lo);
  }
  return u;
}

Mat fold(const Mat& du, int kernel, int dim) {
  const Eigen::Index len = du.rows();
  const int half = kernel / 2;
  Mat dx = Mat::Zero(len, dim);
  for (int o = 0; o < kernel; ++o) {
    const Eigen::Index shift = o - half;
    const Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
    const Eigen::Index hi = std::min<Eigen::Index>(len, len - shift);
    if (hi > lo) dx.middleRows(lo + shift, hi - lo) += du.block(lo, o * dim, hi - lo, dim);
  }
  return dx;
}

Mat conv_block_forward(const ConvBlock& b, const Mat& x, Activation act, int kernel, ConvCache& cache) {
  cache.input = x;
  cache.unfolded = unfold(x, kernel);
  Mat pre = cache.unfolded * b.weight;
  add_row_bias(pre, b.bias);
  const Mat residual = x + activate(pre, act, &cache.activation_grad);
  return layer_norm_forward(b.norm, residual, cache.norm);
}

Mat conv_block_backward(const ConvBlock& b, const ConvCache& cache, const Mat& dy, int kernel,
                        ConvBlock& grad) {
  const Mat dres = layer_norm_backward(b.norm, cache.norm, dy, grad.norm);
  const Mat dz = dres.cwiseProduct(cache.activation_grad);
  grad.weight.noalias() += cache.unfolded.transpose() * dz;
  grad.bias += dz.colwise().sum();
  const Mat du = dz * b.weight.transpose();
  return dres + fold(du, kernel, static_cast<int>(cache.input.cols()));
}

Mat attention_forward(const SelfAttention& a, const Mat& x, int num_heads, AttentionCache& cache) {
  const Eigen::Index d = x.cols();
  const Eigen::Index dh = d / num_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  cache.input = x;
  cache.q = linear_forward(a.query, x);
  cache.k = linear_forward(a.key, x);
  cache.v = linear_forward(a.value, x);
  cache.context.resize(x.rows(), d);
  cache.probs.resize(num_heads);
  for (int h = 0; h < num_heads; ++h) {
    const auto qh = cache.q.middleCols(h * dh, dh);
    const auto kh = cache.k.middleCols(h * dh, dh);
    cache.probs[h] = row_softmax(scale * qh * kh.transpose());
    cache.context.middleCols(h * dh, dh).noalias() = cache.probs[h] * cache.v.middleCols(h * dh, dh);
  }
  const Mat residual = x + linear_forward(a.output, cache.context);
  return layer_norm_forward(a.norm, residual, cache.norm);
}

Mat attention_backward(const SelfAttention& a, const AttentionCache& cache, const Mat& dy, int num_heads,
                       SelfAttention& grad) {
  const Eigen::Index d = cache.input.cols();
  const Eigen::Index dh = d / num_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Mat dres = layer_norm_backward(a.norm, cache.norm, dy, grad.norm);
  const Mat dcontext = linear_backward(a.output, cache.context, dres, grad.output);
  Mat dq(cache.q.rows(), d), dk(cache.k.rows(), d), dv(cache.v.rows(), d);
  for (int h = 0; h < num_heads; ++h) {
    const auto dctx = dcontext.middleCols(h * dh, dh);
    const Mat& p = cache.probs[h];
    const Mat dp = dctx * cache.v.middleCols(h * dh, dh).transpose();
    dv.middleCols(h * dh, dh).noalias() = p.transpose() * dctx;
    const Mat ds = scale * row_softmax_backward(p, dp);
    dq.middleCols(h * dh, dh).noalias() = ds * cache.k.middleCols(h * dh, dh);
    dk.middleCols(h * dh, dh).noalias() = ds.transpose() * cache.q.middleCols(h * dh, dh);
  }
  Mat dx = dres;
  dx += linear_backward(a.query, cache.input, dq, grad.query);
  dx += linear_backward(a.key, cache.input, dk, grad.key);
  dx += linear_backward(a.value, cache.input, dv, grad.value);
  return dx;
}

Mat head_forward(const FrameHead& h, const Mat& x, Activation act, HeadCache& cache) {
  cache.input = x;
  cache.a1 = activate(linear_forward(h.hidden1, x), act, &cache.g1);
  cache.a2 = activate(linear_forward(h.hidden2, cache.a1), act, &cache.g2);
  return linear_forward(h.out, cache.a2);
}

Mat head_backward(const FrameHead& h, const HeadCache& cache, const Mat& dlogit,
                  FrameHead& grad) {
  const Mat da2 = linear_backward(h.out, cache.a2, dlogit, grad.out);
  const Mat dz2 = da2.cwiseProduct(cache.g2);
  const Mat da1 = linear_backward(h.hidden2, cache.a1, dz2, grad.hidden2);
  const Mat dz1 = da1.cwiseProduct(cache.g1);
  return linear_backward(h.hidden1, cache.input, dz1, grad.hidden1);
}

}  // namespace mscl::layers
