#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include <json.hpp>

#include "mscl/errors.hpp"
#include "mscl/metrics.hpp"
#include "test_util.hpp"

using namespace mscl;

namespace {

TimeInterval iv(double a, double b) { return {a, b, 0.0}; }

// Counts grid cells whose centres fall inside each interval; the grid spans
// the hull of the two so the union is about G cells wide.
double grid_iou(const TimeInterval& a, const TimeInterval& b, long G) {
  const double lo = std::min(a.start, b.start), hi = std::max(a.end, b.end);
  const double step = (hi - lo) / static_cast<double>(G);
  long inter = 0, uni = 0;
  for (long c = 0; c < G; ++c) {
    const double x = lo + (c + 0.5) * step;
    const bool in_a = x >= a.start && x < a.end, in_b = x >= b.start && x < b.end;
    inter += in_a && in_b;
    uni += in_a || in_b;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

TimeInterval random_interval(testutil::Rng& rng, double span) {
  const double a = rng.uniform(0.0, span), b = rng.uniform(0.0, span);
  if (a == b) return iv(a, a + 1e-3);
  return iv(std::min(a, b), std::max(a, b));
}

int naive_recall(const std::vector<TimeInterval>& ranked, const TimeInterval& gt, int n, double m) {
  int hit = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (static_cast<int>(i) >= n) break;
    const double inter = std::max(0.0, std::min(ranked[i].end, gt.end) - std::max(ranked[i].start, gt.start));
    const double uni = (ranked[i].end - ranked[i].start) + (gt.end - gt.start) - inter;
    if (inter / uni > m) hit = 1;
  }
  return hit;
}

}  // namespace

TEST_CASE("temporal iou examples") {
  CHECK(temporal_iou(iv(2, 6), iv(2, 6)) == 1.0);
  CHECK(temporal_iou(iv(0, 1), iv(2, 3)) == 0.0);
  CHECK(temporal_iou(iv(0, 2), iv(2, 3)) == 0.0);
  CHECK(temporal_iou(iv(2, 6), iv(4, 8)) == doctest::Approx(2.0 / 6.0));
  CHECK(temporal_iou(iv(0, 10), iv(2, 3)) == doctest::Approx(0.1));
}

TEST_CASE("temporal iou is symmetric and 1 only on coincidence") {
  testutil::Rng rng(41);
  for (int t = 0; t < 2000; ++t) {
    const TimeInterval a = random_interval(rng, 10.0), b = random_interval(rng, 10.0);
    const double x = temporal_iou(a, b);
    CHECK(x == temporal_iou(b, a));
    CHECK(x >= 0.0);
    CHECK(x <= 1.0);
    if (a.start != b.start || a.end != b.end) CHECK(x < 1.0);
  }
}

TEST_CASE("temporal iou agrees with a discretized overlap count") {
  testutil::Rng rng(42);
  const long G = 1'000'000;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const TimeInterval a = random_interval(rng, 30.0), b = random_interval(rng, 30.0);
    worst = std::max(worst, std::abs(temporal_iou(a, b) - grid_iou(a, b, G)));
  }
  CHECK(worst < 2e-6);
}

TEST_CASE("recall_at examples") {
  const TimeInterval gt = iv(10, 20);
  CHECK(recall_at({gt}, gt, 1, 0.99) == 1);
  CHECK(recall_at({}, gt, 1, 0.1) == 0);
  // IoUs 0.4 and 0.6
  const std::vector<TimeInterval> ranked = {iv(10, 14), iv(10, 16)};
  CHECK(temporal_iou(ranked[0], gt) == doctest::Approx(0.4));
  CHECK(temporal_iou(ranked[1], gt) == doctest::Approx(0.6));
  CHECK(recall_at(ranked, gt, 1, 0.5) == 0);
  CHECK(recall_at(ranked, gt, 5, 0.5) == 1);
  // the threshold is strict
  CHECK(recall_at({iv(10, 15)}, gt, 1, 0.5) == 0);
}

TEST_CASE("evaluate_dataset on exact predictions") {
  std::vector<SamplePredictions> preds;
  std::vector<GroundTruth> gts;
  for (int i = 0; i < 5; ++i) {
    const TimeInterval g = iv(i, i + 2.5);
    preds.push_back({"s" + std::to_string(i), {g}});
    gts.push_back({"s" + std::to_string(i), g});
  }
  const EvalReport r = evaluate_dataset(preds, gts, {1, 5}, {0.3, 0.5, 0.7});
  CHECK(r.sample_count == 5);
  for (const auto& row : r.recall)
    for (double v : row) CHECK(v == 1.0);
  CHECK(r.at(5, 0.7) == 1.0);
  CHECK_THROWS_AS(r.at(2, 0.7), std::out_of_range);
}

TEST_CASE("single sample cells are 0 or 1") {
  const EvalReport r = evaluate_dataset({{"x", {iv(0, 4), iv(5, 9)}}}, {{"x", iv(4, 9)}}, {1, 5}, {0.3, 0.5, 0.7});
  CHECK(r.at(1, 0.3) == 0.0);
  CHECK(r.at(5, 0.7) == 1.0);
}

TEST_CASE("evaluate_dataset errors") {
  SUBCASE("missing ground truth") {
    CHECK_THROWS_AS(evaluate_dataset({{"x", {iv(0, 1)}}}, {{"x", std::nullopt}}, {1}, {0.5}), DataError);
  }
  SUBCASE("id mismatch") {
    CHECK_THROWS_AS(evaluate_dataset({{"x", {iv(0, 1)}}}, {{"y", iv(0, 1)}}, {1}, {0.5}), DataError);
    CHECK_THROWS_AS(evaluate_dataset({{"x", {iv(0, 1)}}, {"y", {iv(0, 1)}}}, {{"y", iv(0, 1)}}, {1}, {0.5}),
                    DataError);
  }
  SUBCASE("duplicate predictions") {
    CHECK_THROWS_AS(evaluate_dataset({{"x", {iv(0, 1)}}, {"x", {iv(0, 1)}}}, {{"x", iv(0, 1)}, {"x", iv(0, 1)}},
                                     {1}, {0.5}),
                    DataError);
  }
}

TEST_CASE("evaluate_dataset matches a naive recall oracle, cells monotone") {
  testutil::Rng rng(43);
  const std::vector<int> ns = {1, 5};
  const std::vector<double> ms = {0.1, 0.3, 0.5, 0.7};
  for (int t = 0; t < 1000; ++t) {
    const int count = rng.uniform_int(1, 12);
    std::vector<SamplePredictions> preds;
    std::vector<GroundTruth> gts;
    for (int i = 0; i < count; ++i) {
      const std::string id = "p" + std::to_string(i);
      SamplePredictions p{id, {}};
      const int k = rng.uniform_int(0, 7);
      for (int j = 0; j < k; ++j) p.intervals.push_back(random_interval(rng, 20.0));
      preds.push_back(p);
      gts.push_back({id, random_interval(rng, 20.0)});
    }
    // predictions in a different order than the ground truths
    std::shuffle(preds.begin(), preds.end(), rng.gen());
    const EvalReport r = evaluate_dataset(preds, gts, ns, ms);
    for (std::size_t a = 0; a < ns.size(); ++a) {
      for (std::size_t b = 0; b < ms.size(); ++b) {
        long hits = 0;
        for (const auto& g : gts) {
          for (const auto& p : preds)
            if (p.sample_id == g.sample_id) hits += naive_recall(p.intervals, *g.interval, ns[a], ms[b]);
        }
        CHECK(r.recall[a][b] == static_cast<double>(hits) / count);
        if (b > 0) CHECK(r.recall[a][b] <= r.recall[a][b - 1]);
        if (a > 0) CHECK(r.recall[a][b] >= r.recall[a - 1][b]);
      }
    }
  }
}

TEST_CASE("table and report formats") {
  const EvalReport r =
      evaluate_dataset({{"x", {iv(0, 4)}}, {"y", {iv(0, 1)}}}, {{"x", iv(0, 4)}, {"y", iv(5, 6)}}, {1, 5}, {0.3, 0.5});
  CHECK(format_table(r) == "R@n\tIoU=0.3\tIoU=0.5\nR@1\t0.5000\t0.5000\nR@5\t0.5000\t0.5000\n");
  testutil::TempDir dir;
  write_report_json(dir.path() / "r.json", r);
  std::ifstream in(dir.path() / "r.json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j["sample_count"] == 2);
  CHECK(j["recall"][0][1] == 0.5);
  CHECK(j["samples"][0]["sample_id"] == "x");
  CHECK(j["samples"][0]["top1_iou"] == 1.0);
}
