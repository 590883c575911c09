#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mscl/linalg.hpp"

namespace mscl {

struct ModelConfig {
  int video_dim = 32;    // D_v of the input features
  int query_dim = 32;    // D_q of the input features
  int latent_dim = 32;   // D (512 in the reference setting)
  int num_conv_layers = 4;
  int conv_kernel = 3;
  int num_heads = 4;
  int ffn_hidden = 32;
  int head_hidden = 32;  // width of both hidden layers of h_s and h_w
  Activation activation = Activation::silu;
  std::uint64_t param_init_seed = 0;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Row-vector convention: y = x * weight + bias, bias is 1 x out.
struct Linear {
  Mat weight;
  Mat bias;
};

struct LayerNorm {
  Mat gain;   // 1 x D
  Mat shift;  // 1 x D
};

// Same-length 1-D convolution; weight stacks the kernel taps, (kernel * D) x D.
struct ConvBlock {
  Mat weight;
  Mat bias;
  LayerNorm norm;
};

struct SelfAttention {
  Linear query, key, value, output;
  LayerNorm norm;
};

// Three affine layers D -> hidden -> hidden -> 1.
struct FrameHead {
  Linear hidden1, hidden2, out;
};

struct ModelParams {
  Linear video_proj;
  Linear query_proj;
  std::vector<ConvBlock> conv;  // shared by the video and query encoders
  SelfAttention attention;      // shared as well
  Linear ffn_in;                // 4D -> ffn_hidden
  Linear ffn_out;               // ffn_hidden -> D
  FrameHead score_head;
  FrameHead weight_head;
};

// Visits every tensor in a fixed order with a stable name.
template <class Params, class F>
void for_each_tensor(Params& p, F&& f) {
  auto lin = [&](const std::string& name, auto& l) {
    f(name + ".weight", l.weight);
    f(name + ".bias", l.bias);
  };
  auto norm = [&](const std::string& name, auto& n) {
    f(name + ".gain", n.gain);
    f(name + ".shift", n.shift);
  };
  lin("video_proj", p.video_proj);
  lin("query_proj", p.query_proj);
  for (std::size_t i = 0; i < p.conv.size(); ++i) {
    const std::string base = "conv" + std::to_string(i);
    f(base + ".weight", p.conv[i].weight);
    f(base + ".bias", p.conv[i].bias);
    norm(base + ".norm", p.conv[i].norm);
  }
  lin("attention.query", p.attention.query);
  lin("attention.key", p.attention.key);
  lin("attention.value", p.attention.value);
  lin("attention.output", p.attention.output);
  norm("attention.norm", p.attention.norm);
  lin("ffn_in", p.ffn_in);
  lin("ffn_out", p.ffn_out);
  lin("score_head.hidden1", p.score_head.hidden1);
  lin("score_head.hidden2", p.score_head.hidden2);
  lin("score_head.out", p.score_head.out);
  lin("weight_head.hidden1", p.weight_head.hidden1);
  lin("weight_head.hidden2", p.weight_head.hidden2);
  lin("weight_head.out", p.weight_head.out);
}

ModelParams init_params(const ModelConfig& config);
ModelParams zeros_like(const ModelParams& p);
std::size_t parameter_count(const ModelParams& p);

// a += scale * b, tensor by tensor.
void accumulate(ModelParams& a, const ModelParams& b, double scale = 1.0);
bool all_finite(const ModelParams& p);
bool bitwise_equal(const ModelParams& a, const ModelParams& b);

}  // namespace mscl
