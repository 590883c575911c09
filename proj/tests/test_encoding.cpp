#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mscl/encoding.hpp"
#include "mscl/errors.hpp"
#include "test_util.hpp"

using namespace mscl;

namespace {

ModelConfig small_config(int dv = 5, int dq = 7, int d = 8) {
  ModelConfig c;
  c.video_dim = dv;
  c.query_dim = dq;
  c.latent_dim = d;
  c.num_heads = 2;
  c.ffn_hidden = 6;
  c.head_hidden = 8;
  c.param_init_seed = 3;
  return c;
}

Batch one_sample_batch(const Mat& video, const Mat& query) {
  std::vector<FeatureSample> s{{"s", video, query, 1.0, {}}};
  return batchify(s, 1).front();
}

}  // namespace

TEST_CASE("projection of a zero row is the bias") {
  const ModelConfig c = small_config();
  ModelParams p = init_params(c);
  testutil::Rng rng(1);
  p.video_proj.bias = rng.matrix(1, c.latent_dim);
  Mat v = rng.matrix(4, c.video_dim);
  v.row(2).setZero();
  const auto proj = project_features(one_sample_batch(v, rng.matrix(2, c.query_dim)), p, c);
  CHECK((proj[0].video.row(2) - p.video_proj.bias).norm() == 0.0);
}

TEST_CASE("identity projection with zero bias is a no-op") {
  const ModelConfig c = small_config(8, 8, 8);
  ModelParams p = init_params(c);
  p.video_proj.weight = Mat::Identity(8, 8);
  p.video_proj.bias.setZero();
  testutil::Rng rng(2);
  const Mat v = rng.matrix(5, 8);
  const auto proj = project_features(one_sample_batch(v, rng.matrix(3, 8)), p, c);
  CHECK((proj[0].video - v).norm() == 0.0);
}

TEST_CASE("projection keeps padded rows at zero and rejects wrong widths") {
  const ModelConfig c = small_config();
  ModelParams p = init_params(c);
  testutil::Rng rng(3);
  p.video_proj.bias = rng.matrix(1, c.latent_dim);
  std::vector<FeatureSample> s{{"a", rng.matrix(3, c.video_dim), rng.matrix(2, c.query_dim), 1.0, {}},
                               {"b", rng.matrix(6, c.video_dim), rng.matrix(4, c.query_dim), 1.0, {}}};
  const auto proj = project_features(batchify(s, 2).front(), p, c);
  CHECK(proj[0].video.bottomRows(3).isZero());
  CHECK(proj[0].query.bottomRows(2).isZero());
  s[0].video_features = rng.matrix(3, c.video_dim + 1);
  s[1].video_features = rng.matrix(6, c.video_dim + 1);
  CHECK_THROWS_AS(project_features(batchify(s, 2).front(), p, c), DataError);
}

TEST_CASE("projection gradient matches central differences") {
  const ModelConfig c = small_config();
  ModelParams p = init_params(c);
  testutil::Rng rng(4);
  const Mat v = rng.matrix(5, c.video_dim);
  const Mat r = rng.matrix(5, c.latent_dim);
  auto loss = [&] { return layers::linear_forward(p.video_proj, v).cwiseProduct(r).sum(); };
  ModelParams g = zeros_like(p);
  layers::linear_backward(p.video_proj, v, r, g.video_proj);
  const auto errs = testutil::check_gradient(p, g, loss);
  CHECK(testutil::worst(errs) < 1e-4);
}

TEST_CASE("video and query encoders share weights") {
  const ModelConfig c = small_config();
  const ModelParams p = init_params(c);
  testutil::Rng rng(5);
  const Mat x = rng.matrix(6, c.latent_dim);
  const EncodedPair e = encode_modalities(x, x, p, c);
  CHECK(e.video == e.query);
  const EncodedPair e2 = encode_modalities(rng.matrix(9, c.latent_dim), rng.matrix(3, c.latent_dim), p, c);
  CHECK(e2.video.rows() == 9);
  CHECK(e2.video.cols() == c.latent_dim);
  CHECK(e2.query.rows() == 3);
  CHECK(e2.query.cols() == c.latent_dim);
}

TEST_CASE("attention rows sum to one") {
  const ModelConfig c = small_config();
  const ModelParams p = init_params(c);
  testutil::Rng rng(6);
  SequenceCache cache;
  encode_sequence(p, c, rng.matrix(7, c.latent_dim, 3.0), &cache);
  REQUIRE(cache.attention.probs.size() == 2);
  for (const Mat& probs : cache.attention.probs) {
    CHECK((probs.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK(probs.minCoeff() >= 0.0);
  }
}

TEST_CASE("interaction softmaxes are normalized along their axes") {
  const ModelConfig c = small_config();
  const ModelParams p = init_params(c);
  testutil::Rng rng(7);
  const auto out = interact({rng.matrix(6, 8, 2.0), rng.matrix(3, 8, 2.0)}, p, c);
  CHECK((out.row_softmax.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK((out.col_softmax.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK(out.features.rows() == 6);
  CHECK(out.features.cols() == 8);
}

TEST_CASE("single-word query: every video context row is the query") {
  const ModelConfig c = small_config();
  const ModelParams p = init_params(c);
  testutil::Rng rng(8);
  const Mat q = rng.matrix(1, 8);
  InteractionCache cache;
  const auto out = interact({rng.matrix(5, 8), q}, p, c, &cache);
  CHECK(out.row_softmax.isOnes());
  for (int i = 0; i < 5; ++i) CHECK((cache.video_context.row(i) - q).norm() < 1e-12);
}

TEST_CASE("identical video rows give identical interaction rows") {
  const ModelConfig c = small_config();
  const ModelParams p = init_params(c);
  testutil::Rng rng(9);
  const Mat v = rng.matrix(1, 8).replicate(5, 1);
  const auto out = interact({v, rng.matrix(3, 8)}, p, c);
  for (int i = 1; i < 5; ++i) CHECK((out.features.row(i) - out.features.row(0)).norm() < 1e-12);
}

TEST_CASE("query context equals a naive triple product") {
  const ModelConfig c = small_config();
  const ModelParams p = init_params(c);
  testutil::Rng rng(10);
  const Mat v = rng.matrix(3, 8), q = rng.matrix(2, 8);
  InteractionCache cache;
  const auto out = interact({v, q}, p, c, &cache);
  // S_r * S_c^T * V~ with explicit loops
  const Mat& sr = out.row_softmax;
  const Mat& sc = out.col_softmax;
  Mat expected = Mat::Zero(3, 8);
  for (int i = 0; i < 3; ++i)
    for (int d = 0; d < 8; ++d)
      for (int a = 0; a < 2; ++a)
        for (int t = 0; t < 3; ++t) expected(i, d) += sr(i, a) * sc(t, a) * v(t, d);
  CHECK((cache.query_context - expected).cwiseAbs().maxCoeff() < 1e-6);
  // the similarity and softmaxes from scratch as well
  for (int i = 0; i < 3; ++i) {
    double total = 0.0;
    for (int a = 0; a < 2; ++a) {
      const double sij = v.row(i).dot(q.row(a)) / std::sqrt(8.0);
      CHECK(out.similarity(i, a) == doctest::Approx(sij).epsilon(1e-12));
      total += std::exp(sij);
    }
    for (int a = 0; a < 2; ++a)
      CHECK(sr(i, a) == doctest::Approx(std::exp(out.similarity(i, a)) / total).epsilon(1e-12));
  }
}

TEST_CASE("interaction shape holds for assorted sizes") {
  const ModelConfig c = small_config();
  const ModelParams p = init_params(c);
  testutil::Rng rng(11);
  for (int n : {1, 2, 7, 30})
    for (int m : {1, 3, 9}) {
      const auto out = interact({rng.matrix(n, 8), rng.matrix(m, 8)}, p, c);
      CHECK(out.features.rows() == n);
      CHECK(out.features.cols() == 8);
      CHECK(out.features.allFinite());
    }
}

TEST_CASE("encoder gradient of sum(V^q) matches central differences") {
  // n=6, m=3, D=8; probe through projection, encoder and interaction
  const ModelConfig c = small_config(5, 7, 8);
  ModelParams p = init_params(c);
  testutil::Rng rng(12);
  testutil::jitter(p, rng, 0.1);
  const Mat v = rng.matrix(6, c.video_dim), q = rng.matrix(3, c.query_dim);
  auto loss = [&] {
    const EncodedPair e = encode_modalities(layers::linear_forward(p.video_proj, v),
                                            layers::linear_forward(p.query_proj, q), p, c);
    return interact(e, p, c).features.sum();
  };
  ModelParams g = zeros_like(p);
  SequenceCache vc, qc;
  const Mat vp = layers::linear_forward(p.video_proj, v), qp = layers::linear_forward(p.query_proj, q);
  const EncodedPair e{encode_sequence(p, c, vp, &vc), encode_sequence(p, c, qp, &qc)};
  InteractionCache ic;
  const auto out = interact(e, p, c, &ic);
  const InteractionGrad ig = interact_backward(p, c, ic, Mat::Ones(out.features.rows(), out.features.cols()), g);
  layers::linear_backward(p.video_proj, v, encode_sequence_backward(p, c, vc, ig.video, g), g.video_proj);
  layers::linear_backward(p.query_proj, q, encode_sequence_backward(p, c, qc, ig.query, g), g.query_proj);

  const auto errs = testutil::check_gradient(p, g, loss);
  std::string name;
  const double w = testutil::worst(errs, &name);
  INFO("worst tensor " << name);
  CHECK(w < 1e-4);
  // the heads are not on this path
  CHECK(g.score_head.hidden1.weight.isZero());
}

TEST_CASE("tanh activation passes the same gradient check") {
  ModelConfig c = small_config(5, 7, 8);
  c.activation = Activation::tanh;
  ModelParams p = init_params(c);
  testutil::Rng rng(13);
  const Mat x = rng.matrix(6, 8);
  const Mat r = rng.matrix(6, 8);
  auto loss = [&] { return encode_sequence(p, c, x).cwiseProduct(r).sum(); };
  ModelParams g = zeros_like(p);
  SequenceCache cache;
  encode_sequence(p, c, x, &cache);
  encode_sequence_backward(p, c, cache, r, g);
  const auto errs = testutil::check_gradient(p, g, loss);
  std::string name;
  const double w = testutil::worst(errs, &name);
  INFO("worst tensor " << name);
  CHECK(w < 1e-4);
}

TEST_CASE("padded frames do not influence encoded or interacted outputs") {
  const ModelConfig c = small_config();
  const ModelParams p = init_params(c);
  testutil::Rng rng(14);
  std::vector<FeatureSample> s{{"a", rng.matrix(4, c.video_dim), rng.matrix(2, c.query_dim), 1.0, {}},
                               {"b", rng.matrix(9, c.video_dim), rng.matrix(5, c.query_dim), 1.0, {}}};
  Batch b = batchify(s, 2).front();
  const EncodedPair before = encode_sample(b, 0, p, c);
  b.video[0].bottomRows(5) = rng.matrix(5, c.video_dim, 10.0);
  b.query[0].bottomRows(3) = rng.matrix(3, c.query_dim, 10.0);
  const EncodedPair after = encode_sample(b, 0, p, c);
  CHECK((before.video - after.video).norm() == 0.0);
  CHECK((interact(before, p, c).features - interact(after, p, c).features).norm() == 0.0);
  // and the sample encodes as if it were alone
  const EncodedPair alone = encode_sample(batchify(std::span(s).first(1), 1).front(), 0, p, c);
  CHECK((alone.video - before.video).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("initialization is a function of the seed") {
  ModelConfig c = small_config();
  CHECK(bitwise_equal(init_params(c), init_params(c)));
  ModelConfig other = c;
  other.param_init_seed = 4;
  CHECK_FALSE(bitwise_equal(init_params(c), init_params(other)));
}

TEST_CASE("model config validation") {
  ModelConfig c = small_config();
  c.num_heads = 3;
  CHECK_THROWS(c.validate());
  c = small_config();
  c.conv_kernel = 4;
  CHECK_THROWS(c.validate());
  c = small_config();
  CHECK_NOTHROW(c.validate());
}
