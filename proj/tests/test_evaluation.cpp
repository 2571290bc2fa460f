#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sef/evaluation.hpp"
#include "sef/rng.hpp"

using namespace sef;

namespace {

std::vector<double> random_simplex(Rng& rng, int c) {
  std::vector<double> p(c);
  double z = 0;
  for (double& v : p) {
    v = rng.uniform(0.001, 1.0);
    z += v;
  }
  for (double& v : p) v /= z;
  return p;
}

// Brute-force confusion recount, written directly from the definitions.
struct Counts {
  long long tp = 0, fp = 0, fn = 0;
};

Counts brute_counts(const std::vector<int>& final_preds,
                    const std::vector<int>& gold, int none_index) {
  Counts c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool pred_valid = final_preds[i] != none_index;
    const bool gold_valid = gold[i] != none_index;
    if (pred_valid && gold_valid && final_preds[i] == gold[i]) c.tp++;
    if (pred_valid && final_preds[i] != gold[i]) c.fp++;
    if (gold_valid && final_preds[i] != gold[i]) c.fn++;
  }
  return c;
}

}  // namespace

TEST_CASE("apply_threshold rules") {
  // argmax None stays None at any threshold
  CHECK(apply_threshold({0.5, 0.3, 0.2}, 0, 0.0) == 0);
  CHECK(apply_threshold({0.5, 0.3, 0.2}, 0, 0.9) == 0);
  // valid argmax below the threshold demotes to None
  CHECK(apply_threshold({0.1, 0.4, 0.5}, 0, 0.6) == 0);
  // valid argmax at or above the threshold survives
  CHECK(apply_threshold({0.05, 0.9, 0.05}, 0, 0.5) == 1);
  CHECK(apply_threshold({0.05, 0.9, 0.05}, 0, 0.9) == 1);  // not strictly below
}

TEST_CASE("evaluate on the hand-counted confusion example") {
  // gold [r1, r2, None, None], preds [r1, r3, None, None]
  // tp=1 (r1), fp=1 (r3 wrong), fn=1 (r2 missed) -> P=R=F1=0.5
  std::vector<ScoredPrediction> preds = {
      {1, 0.9}, {3, 0.9}, {0, 0.9}, {0, 0.9}};
  const EvalResult r = evaluate_predictions(preds, {1, 2, 0, 0}, 4, 0, 0.0);
  CHECK(r.tp == 1);
  CHECK(r.fp == 1);
  CHECK(r.fn == 1);
  CHECK(r.precision == 0.5);
  CHECK(r.recall == 0.5);
  CHECK(r.f1 == 0.5);
}

TEST_CASE("all-correct predictions give perfect scores") {
  std::vector<ScoredPrediction> preds = {{1, 0.9}, {2, 0.8}, {0, 0.7}};
  const EvalResult r = evaluate_predictions(preds, {1, 2, 0}, 3, 0, 0.0);
  CHECK(r.precision == 1.0);
  CHECK(r.recall == 1.0);
  CHECK(r.f1 == 1.0);
}

TEST_CASE("all-None predictions against valid gold degenerate to zero") {
  std::vector<ScoredPrediction> preds = {{0, 0.9}, {0, 0.9}};
  const EvalResult r = evaluate_predictions(preds, {1, 2}, 3, 0, 0.0);
  CHECK(r.precision == 0.0);
  CHECK(r.recall == 0.0);
  CHECK(r.f1 == 0.0);
}

TEST_CASE("evaluate matches a brute-force recount on random sets") {
  Rng rng(55);
  for (int trial = 0; trial < 1000; ++trial) {
    const int c = 2 + static_cast<int>(rng.below(6));
    const int n = 1 + static_cast<int>(rng.below(40));
    const int none_index = static_cast<int>(rng.below(c));
    const double threshold = rng.next_double();
    std::vector<ScoredPrediction> preds(n);
    std::vector<int> gold(n), final_preds(n);
    for (int i = 0; i < n; ++i) {
      const auto probs = random_simplex(rng, c);
      preds[i] = score_prediction(probs);
      gold[i] = static_cast<int>(rng.below(c));
      final_preds[i] = apply_threshold(probs, none_index, threshold);
    }
    const EvalResult got =
        evaluate_predictions(preds, gold, c, none_index, threshold);
    const Counts want = brute_counts(final_preds, gold, none_index);
    CHECK(got.tp == want.tp);
    CHECK(got.fp == want.fp);
    CHECK(got.fn == want.fn);
  }
}

TEST_CASE("recall never increases with the threshold") {
  Rng rng(56);
  const int c = 5, n = 200;
  std::vector<ScoredPrediction> preds(n);
  std::vector<int> gold(n);
  for (int i = 0; i < n; ++i) {
    preds[i] = score_prediction(random_simplex(rng, c));
    gold[i] = static_cast<int>(rng.below(c));
  }
  double prev = 2.0;
  for (double t = 0.0; t <= 1.0; t += 0.01) {
    const EvalResult r = evaluate_predictions(preds, gold, c, 0, t);
    CHECK(r.recall <= prev + 1e-12);
    prev = r.recall;
  }
}

TEST_CASE("select_threshold beats or ties every grid point") {
  Rng rng(57);
  for (int trial = 0; trial < 100; ++trial) {
    const int c = 2 + static_cast<int>(rng.below(5));
    const int n = 5 + static_cast<int>(rng.below(60));
    std::vector<ScoredPrediction> preds(n);
    std::vector<int> gold(n);
    for (int i = 0; i < n; ++i) {
      preds[i] = score_prediction(random_simplex(rng, c));
      gold[i] = static_cast<int>(rng.below(c));
    }
    const auto [threshold, best] = select_threshold(preds, gold, c, 0);
    CHECK(best.threshold == threshold);
    for (int g = 0; g <= 1000; ++g) {
      const EvalResult r =
          evaluate_predictions(preds, gold, c, 0, g / 1000.0);
      CHECK(best.f1 >= r.f1);
    }
  }
}

TEST_CASE("ties prefer the smallest threshold") {
  // one sample correctly predicted at prob 0.7: every threshold <= 0.7 has
  // F1 = 1, so the sweep must return the smallest candidate, which is 0
  std::vector<ScoredPrediction> preds = {{1, 0.7}};
  const auto [threshold, best] = select_threshold(preds, {1}, 2, 0);
  CHECK(best.f1 == 1.0);
  CHECK(threshold == 0.0);
}

TEST_CASE("uniformly confident correct model keeps F1 1 up to its confidence") {
  std::vector<ScoredPrediction> preds(10, ScoredPrediction{1, 0.9});
  std::vector<int> gold(10, 1);
  const auto [threshold, best] = select_threshold(preds, gold, 2, 0);
  CHECK(best.f1 == 1.0);
  CHECK(threshold <= 0.9);
}
