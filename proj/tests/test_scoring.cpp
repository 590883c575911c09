#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "mscl/errors.hpp"
#include "mscl/objective.hpp"
#include "mscl/scoring.hpp"
#include "naive_model.hpp"
#include "test_util.hpp"

using namespace mscl;

namespace {

ModelConfig config8() {
  ModelConfig c;
  c.video_dim = 6;
  c.query_dim = 6;
  c.latent_dim = 8;
  c.num_heads = 2;
  c.ffn_hidden = 8;
  c.head_hidden = 8;
  return c;
}

InteractionOutput features_only(const Mat& f) {
  InteractionOutput out;
  out.features = f;
  return out;
}

std::vector<EncodedPair> random_pairs(testutil::Rng& rng, int K, int d) {
  std::vector<EncodedPair> pairs;
  for (int k = 0; k < K; ++k) pairs.push_back({rng.matrix(rng.uniform_int(1, 9), d), rng.matrix(rng.uniform_int(1, 5), d)});
  return pairs;
}

PairScoreMatrix random_pair_matrix(testutil::Rng& rng, int K) {
  PairScoreMatrix p;
  p.s_hat.resize(K, K);
  p.sim.resize(K, K);
  for (int i = 0; i < K * K; ++i) {
    p.s_hat.data()[i] = rng.uniform(0.01, 0.99);
    p.sim.data()[i] = rng.uniform(0.01, 0.99);
  }
  return p;
}

}  // namespace

TEST_CASE("frame scores lie in (0,1) and weights are a simplex") {
  const ModelConfig c = config8();
  ModelParams p = init_params(c);
  testutil::Rng rng(1);
  testutil::jitter(p, rng, 0.5);
  for (double scale : {0.1, 1.0, 10.0}) {
    const auto [s, w] = predict_scores(features_only(rng.matrix(12, 8, scale)), p, c);
    CHECK(s.s.minCoeff() > 0.0);
    CHECK(s.s.maxCoeff() < 1.0);
    CHECK(w.w.minCoeff() >= 0.0);
    CHECK(w.w.sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("single frame gets weight one") {
  const ModelConfig c = config8();
  const ModelParams p = init_params(c);
  testutil::Rng rng(2);
  const auto [s, w] = predict_scores(features_only(rng.matrix(1, 8)), p, c);
  REQUIRE(w.size() == 1);
  CHECK(w.w(0) == 1.0);
}

TEST_CASE("head gradient of sum(s) matches central differences") {
  const ModelConfig c = config8();
  ModelParams p = init_params(c);
  testutil::Rng rng(3);
  testutil::jitter(p, rng, 0.2);
  const Mat f = rng.matrix(7, 8);
  auto loss = [&] { return predict_scores(features_only(f), p, c).first.s.sum(); };
  ModelParams g = zeros_like(p);
  ScoreCache cache;
  predict_scores(features_only(f), p, c, &cache);
  predict_scores_backward(p, cache, Vec::Ones(7), Vec::Zero(7), g);
  std::string name;
  CHECK(testutil::worst(testutil::check_gradient(p, g, loss), &name) < 1e-4);

  // and through the weights, with a weighted probe
  const Vec r = rng.matrix(7, 1);
  auto loss_w = [&] { return predict_scores(features_only(f), p, c).second.w.dot(r); };
  ModelParams gw = zeros_like(p);
  predict_scores(features_only(f), p, c, &cache);
  predict_scores_backward(p, cache, Vec::Zero(7), r, gw);
  CHECK(testutil::worst(testutil::check_gradient(p, gw, loss_w)) < 1e-4);
}

TEST_CASE("pair_score hand examples") {
  CHECK(pair_score({Vec::Constant(2, 0.5)}, {Vec::Constant(2, 0.5)}) == doctest::Approx(0.5));
  Vec s(3), w(3);
  s << 0.9, 0.1, 0.5;
  w << 0.2, 0.3, 0.5;
  CHECK(pair_score({s}, {w}) == doctest::Approx(0.46).epsilon(1e-12));
  Vec onehot = Vec::Zero(3);
  onehot(1) = 1.0;
  CHECK(pair_score({s}, {onehot}) == 0.1);
  CHECK_THROWS_AS(pair_score({s}, {Vec::Constant(2, 0.5)}), DataError);
}

TEST_CASE("pair_score is a convex combination") {
  testutil::Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const int n = rng.uniform_int(1, 20);
    Vec s(n), logits(n);
    for (int i = 0; i < n; ++i) {
      s(i) = rng.uniform(0.001, 0.999);
      logits(i) = 3.0 * rng.normal();
    }
    const double v = pair_score({s}, {softmax(logits)});
    CHECK(v >= s.minCoeff() - 1e-15);
    CHECK(v <= s.maxCoeff() + 1e-15);
  }
}

TEST_CASE("similarity of zero encodings is one half") {
  std::vector<EncodedPair> pairs(3, {Mat::Zero(4, 5), Mat::Zero(2, 5)});
  CHECK((similarity_matrix(pairs).array() == 0.5).all());
}

TEST_CASE("similarity hand example with pooled vectors") {
  // single-row encodings so the pooled vectors are the rows themselves
  Mat v0(1, 2), v1(1, 2), q0(1, 2), q1(1, 2);
  v0 << 1, 0;
  v1 << 0, 1;
  q0 << 1, 0;
  q1 << 1, 1;
  const Mat sim = similarity_matrix({{v0, q0}, {v1, q1}});
  const double a = 1.0 / (1.0 + std::exp(-1.0 / std::sqrt(2.0)));
  CHECK(sim(0, 0) == doctest::Approx(a).epsilon(1e-12));
  CHECK(sim(0, 1) == doctest::Approx(a).epsilon(1e-12));
  CHECK(sim(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sim(1, 1) == doctest::Approx(a).epsilon(1e-12));
  CHECK(sim(0, 0) == doctest::Approx(0.6698).epsilon(1e-4));
}

TEST_CASE("swapping the video and query providers transposes sim") {
  testutil::Rng rng(5);
  std::vector<EncodedPair> direct, swapped;
  for (int k = 0; k < 4; ++k) {
    const Mat x = rng.matrix(rng.uniform_int(1, 7), 4), y = rng.matrix(rng.uniform_int(1, 7), 4);
    direct.push_back({x, y});
    swapped.push_back({y, x});
  }
  const Mat a = similarity_matrix(direct), b = similarity_matrix(swapped);
  CHECK((a - b.transpose()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("cross_pair_scores with K=1 is the single pair score") {
  const ModelConfig c = config8();
  const ModelParams p = init_params(c);
  testutil::Rng rng(6);
  const auto pairs = random_pairs(rng, 1, 8);
  const auto m = cross_pair_scores(pairs, p, c);
  REQUIRE(m.s_hat.rows() == 1);
  const auto [s, w] = predict_scores(interact(pairs[0], p, c), p, c);
  CHECK(m.s_hat(0, 0) == doctest::Approx(pair_score(s, w)).epsilon(1e-14));
}

TEST_CASE("duplicated query gives duplicated columns") {
  const ModelConfig c = config8();
  const ModelParams p = init_params(c);
  testutil::Rng rng(7);
  auto pairs = random_pairs(rng, 4, 8);
  pairs[3].query = pairs[1].query;
  const auto m = cross_pair_scores(pairs, p, c);
  CHECK((m.s_hat.col(1) - m.s_hat.col(3)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("cross_pair_scores matches a from-scratch loop oracle") {
  const ModelConfig c = config8();
  ModelParams p = init_params(c);
  testutil::Rng rng(8);
  testutil::jitter(p, rng, 0.2);
  const auto pairs = random_pairs(rng, 3, 8);
  const auto m = cross_pair_scores(pairs, p, c);
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 3; ++j) {
      const auto r = naive::pair(pairs[k].video, pairs[j].query, p, c);
      CHECK(std::abs(m.s_hat(k, j) - r.s_hat) < 1e-6);
    }
}

TEST_CASE("batched objective scores match the loop oracle") {
  // evaluate_batch stacks pairs per video; check it against the naive path
  ModelConfig c = config8();
  ModelParams p = init_params(c);
  testutil::Rng rng(9);
  testutil::jitter(p, rng, 0.2);
  const auto data = testutil::random_samples(rng, 5, 3, 70, 1, 6, 6, 6);
  const Batch b = batchify(data, 5).front();
  const auto ev = evaluate_batch(p, c, b, {});
  std::vector<EncodedPair> enc;
  for (int k = 0; k < 5; ++k) enc.push_back(encode_sample(b, k, p, c));
  for (int k = 0; k < 5; ++k) {
    for (int j = 0; j < 5; ++j) {
      const auto r = naive::pair(enc[k].video, enc[j].query, p, c);
      CHECK(std::abs(ev.pairs.s_hat(k, j) - r.s_hat) < 1e-6);
      if (j == k) {
        for (int i = 0; i < b.frames(k); ++i) CHECK(std::abs(ev.scores[k].s(i) - r.s[i]) < 1e-6);
      }
    }
  }
  CHECK((ev.pairs.sim - similarity_matrix(enc)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("serial and parallel cross-pair scores are bitwise equal") {
  const ModelConfig c = config8();
  const ModelParams p = init_params(c);
  testutil::Rng rng(10);
  const auto pairs = random_pairs(rng, 6, 8);
  const auto a = cross_pair_scores(pairs, p, c, Execution::serial);
  const auto b = cross_pair_scores(pairs, p, c, Execution::parallel);
  CHECK(a.s_hat == b.s_hat);
  CHECK(a.sim == b.sim);
}

TEST_CASE("score_loss hand examples") {
  PairScoreMatrix one{Mat::Constant(1, 1, 0.3), Mat::Constant(1, 1, 0.7)};
  CHECK(score_loss(one) == 0.0);
  PairScoreMatrix two;
  two.s_hat.resize(2, 2);
  two.s_hat << 0.9, 0.1, 0.1, 0.9;
  two.sim = Mat::Constant(2, 2, 0.5);
  CHECK(score_loss(two) == doctest::Approx(-std::log(2.8 / 4.0)).epsilon(1e-12));
  CHECK(score_loss(two) == doctest::Approx(0.35667).epsilon(1e-4));
  for (int K : {1, 2, 5, 16}) {
    PairScoreMatrix u{Mat::Constant(K, K, 0.37), Mat::Constant(K, K, 0.81)};
    CHECK(score_loss(u) == doctest::Approx(std::log(static_cast<double>(K))).epsilon(1e-12));
  }
}

TEST_CASE("score_loss is nonnegative and invariant to joint permutation") {
  testutil::Rng rng(11);
  for (int t = 0; t < 100; ++t) {
    const int K = rng.uniform_int(1, 12);
    const PairScoreMatrix p = random_pair_matrix(rng, K);
    CHECK(score_loss(p) >= 0.0);
    std::vector<int> perm(K);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng.gen());
    PairScoreMatrix q{Mat(K, K), Mat(K, K)};
    for (int a = 0; a < K; ++a)
      for (int b = 0; b < K; ++b) {
        q.s_hat(a, b) = p.s_hat(perm[a], perm[b]);
        q.sim(a, b) = p.sim(perm[a], perm[b]);
      }
    CHECK(std::abs(score_loss(p) - score_loss(q)) < 1e-9);
  }
}

TEST_CASE("score_loss gradient matches central differences") {
  testutil::Rng rng(12);
  PairScoreMatrix p = random_pair_matrix(rng, 4);
  const PairScoreMatrix g = score_loss_grad(p);
  const double h = 1e-6;
  for (Mat* m : {&p.s_hat, &p.sim}) {
    const Mat& gm = m == &p.s_hat ? g.s_hat : g.sim;
    for (int i = 0; i < m->size(); ++i) {
      const double keep = m->data()[i];
      m->data()[i] = keep + h;
      const double up = score_loss(p);
      m->data()[i] = keep - h;
      const double down = score_loss(p);
      m->data()[i] = keep;
      CHECK(gm.data()[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-6));
    }
  }
}
