#include "mscl/model.hpp"

#include <cstring>
#include <random>

#include "mscl/errors.hpp"

namespace mscl {

void ModelConfig::validate() const {
  const auto fail = [](const std::string& what) { throw DataError("model config: " + what); };
  if (video_dim < 1 || query_dim < 1 || latent_dim < 1) fail("dimensions must be positive");
  if (num_conv_layers < 0) fail("num_conv_layers must be >= 0");
  if (conv_kernel < 1 || conv_kernel % 2 == 0) fail("conv_kernel must be an odd positive integer");
  if (num_heads < 1 || latent_dim % num_heads != 0) fail("num_heads must divide latent_dim");
  if (ffn_hidden < 1 || head_hidden < 1) fail("hidden widths must be positive");
}

namespace {

class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  Linear linear(int in, int out) {
    Linear l;
    l.weight = gaussian(in, out, 1.0 / std::sqrt(static_cast<double>(in)));
    l.bias = Mat::Zero(1, out);
    return l;
  }

  LayerNorm norm(int d) { return {Mat::Ones(1, d), Mat::Zero(1, d)}; }

  Mat gaussian(int rows, int cols, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    Mat m(rows, cols);
    for (int c = 0; c < cols; ++c)
      for (int r = 0; r < rows; ++r) m(r, c) = dist(rng_);
    return m;
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

ModelParams init_params(const ModelConfig& config) {
  config.validate();
  const int D = config.latent_dim;
  Initializer init(config.param_init_seed);
  ModelParams p;
  p.video_proj = init.linear(config.video_dim, D);
  p.query_proj = init.linear(config.query_dim, D);
  for (int i = 0; i < config.num_conv_layers; ++i) {
    ConvBlock block;
    block.weight = init.gaussian(config.conv_kernel * D, D, 1.0 / std::sqrt(static_cast<double>(config.conv_kernel * D)));
    block.bias = Mat::Zero(1, D);
    block.norm = init.norm(D);
    p.conv.push_back(std::move(block));
  }
  p.attention.query = init.linear(D, D);
  p.attention.key = init.linear(D, D);
  p.attention.value = init.linear(D, D);
  p.attention.output = init.linear(D, D);
  p.attention.norm = init.norm(D);
  p.ffn_in = init.linear(4 * D, config.ffn_hidden);
  p.ffn_out = init.linear(config.ffn_hidden, D);
  for (FrameHead* head : {&p.score_head, &p.weight_head}) {
    head->hidden1 = init.linear(D, config.head_hidden);
    head->hidden2 = init.linear(config.head_hidden, config.head_hidden);
    head->out = init.linear(config.head_hidden, 1);
  }
  return p;
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  for_each_tensor(z, [](const std::string&, Mat& t) { t.setZero(); });
  return z;
}

std::size_t parameter_count(const ModelParams& p) {
  std::size_t n = 0;
  for_each_tensor(p, [&](const std::string&, const Mat& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

void accumulate(ModelParams& a, const ModelParams& b, double scale) {
  std::vector<const Mat*> src;
  for_each_tensor(b, [&](const std::string&, const Mat& t) { src.push_back(&t); });
  std::size_t i = 0;
  for_each_tensor(a, [&](const std::string&, Mat& t) { t += scale * *src[i++]; });
}

bool all_finite(const ModelParams& p) {
  bool ok = true;
  for_each_tensor(p, [&](const std::string&, const Mat& t) { ok = ok && t.allFinite(); });
  return ok;
}

bool bitwise_equal(const ModelParams& a, const ModelParams& b) {
  std::vector<const Mat*> src;
  for_each_tensor(b, [&](const std::string&, const Mat& t) { src.push_back(&t); });
  std::size_t i = 0;
  bool eq = true;
  for_each_tensor(a, [&](const std::string&, const Mat& t) {
    if (i >= src.size()) {
      eq = false;
      return;
    }
    const Mat& o = *src[i++];
    eq = eq && t.rows() == o.rows() && t.cols() == o.cols() &&
         std::memcmp(t.data(), o.data(), sizeof(double) * static_cast<std::size_t>(t.size())) == 0;
  });
  return eq && i == src.size();
}

}  // namespace mscl
