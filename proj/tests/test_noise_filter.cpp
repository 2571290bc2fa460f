#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "sef/noise_filter.hpp"
#include "sef/rng.hpp"

using namespace sef;

namespace {

// Literal restatement of the filtering rules, kept deliberately separate from
// the library implementation: sort-free argmax / membership scans.
bool reference_keep(const std::vector<double>& probs, int label, int none_index,
                    int k) {
  int argmax = 0;
  for (std::size_t j = 1; j < probs.size(); ++j) {
    if (probs[j] > probs[argmax]) argmax = static_cast<int>(j);
  }
  if (label == none_index) return argmax == none_index;
  // count classes strictly better than `label`, and equal-probability classes
  // with a smaller index (the tie order)
  int better = 0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (static_cast<int>(j) == label) continue;
    if (probs[j] > probs[label] ||
        (probs[j] == probs[label] && static_cast<int>(j) < label)) {
      ++better;
    }
  }
  return better < k;
}

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

}  // namespace

TEST_CASE("rank_topk sorts by probability with index tie-break") {
  const auto top = rank_topk({0.5, 0.3, 0.2}, 2);
  REQUIRE(top.size() == 2);
  CHECK(top[0].relation == 0);
  CHECK(top[0].prob == 0.5);
  CHECK(top[1].relation == 1);

  const auto tie = rank_topk({0.4, 0.4, 0.2}, 1);
  CHECK(tie[0].relation == 0);  // lower index wins the tie

  const auto uniform = rank_topk({0.25, 0.25, 0.25, 0.25}, 4);
  for (int j = 0; j < 4; ++j) CHECK(uniform[j].relation == j);
}

TEST_CASE("rank_topk validates k") {
  CHECK_THROWS_AS(rank_topk({0.5, 0.5}, 0), ConfigError);
  CHECK_THROWS_AS(rank_topk({0.5, 0.5}, 3), ConfigError);
}

TEST_CASE("None samples survive only when the teacher agrees") {
  // labels: 0 = None
  const std::vector<std::vector<double>> probs = {
      {0.6, 0.3, 0.1},  // argmax None -> kept
      {0.2, 0.5, 0.3},  // argmax r1 -> dropped
  };
  const ActiveSet a = filter_probs(probs, {0, 0}, 3, 0, 2, 2);
  CHECK(a.mask[0] == 1);
  CHECK(a.mask[1] == 0);
  CHECK(a.filtered_none == 1);
  CHECK(a.filtered_valid == 0);
}

TEST_CASE("valid samples follow the top-k rule from the worked example") {
  // probs over (None, r1, r2, r3, r4); ds label r2
  const std::vector<double> p = {0.05, 0.4, 0.25, 0.2, 0.1};
  // K=3: top-3 = {r1, r2, r3} contains r2 -> kept
  const ActiveSet k3 = filter_probs({p}, {2}, 5, 0, 3, 1);
  CHECK(k3.mask[0] == 1);
  // K=1: top-1 = {r1} does not contain r2 -> dropped
  const ActiveSet k1 = filter_probs({p}, {2}, 5, 0, 1, 1);
  CHECK(k1.mask[0] == 0);
  CHECK(k1.filtered_valid == 1);
}

TEST_CASE("filter matches the brute-force reference on randomized tables") {
  Rng rng(101);
  for (int c : {2, 5, 25}) {
    for (int k : {1, 3, c}) {
      if (k > c) continue;
      for (int trial = 0; trial < 1000; ++trial) {
        const std::vector<double> p = random_simplex(rng, c);
        const int label = static_cast<int>(rng.below(c));
        const int none_index = 0;
        const ActiveSet got = filter_probs({p}, {label}, c, none_index, k, 1);
        CHECK(static_cast<bool>(got.mask[0]) ==
              reference_keep(p, label, none_index, k));
      }
    }
  }
}

TEST_CASE("kept set grows monotonically in k") {
  Rng rng(102);
  for (int trial = 0; trial < 300; ++trial) {
    const int c = 3 + static_cast<int>(rng.below(8));
    const std::vector<double> p = random_simplex(rng, c);
    const int label = 1 + static_cast<int>(rng.below(c - 1));  // valid label
    bool prev_kept = false;
    for (int k = 1; k <= c; ++k) {
      const bool kept =
          filter_probs({p}, {label}, c, 0, k, 1).mask[0] != 0;
      if (prev_kept) CHECK(kept);  // once kept, stays kept for larger k
      prev_kept = kept;
    }
    CHECK(prev_kept);  // k = C keeps every valid sample
  }
}

TEST_CASE("filtering is stateless so dropped samples can return") {
  const std::vector<int> labels = {1, 1};
  const std::vector<std::vector<double>> epoch1 = {{0.8, 0.1, 0.1},
                                                   {0.1, 0.8, 0.1}};
  const std::vector<std::vector<double>> epoch2 = {{0.1, 0.8, 0.1},
                                                   {0.8, 0.1, 0.1}};
  const ActiveSet a1 = filter_probs(epoch1, labels, 3, 0, 1, 2);
  CHECK(a1.mask[0] == 0);
  CHECK(a1.mask[1] == 1);
  const ActiveSet a2 = filter_probs(epoch2, labels, 3, 0, 1, 3);
  CHECK(a2.mask[0] == 1);  // readmitted regardless of the previous mask
  CHECK(a2.mask[1] == 0);
}

TEST_CASE("filter_corpus over a live teacher matches the prob-level rules") {
  ModelDims dims;
  dims.word_dim = 6;
  dims.pos_dim = 2;
  dims.pos_max = 8;
  dims.filters = 5;
  dims.kernel = 2;
  dims.dropout = 0.0;
  Rng rng(77);
  const StudentParams teacher = init_student(Architecture::kCnn, dims, 4, 20, rng);

  std::vector<EncodedSample> corpus;
  Rng gen(78);
  for (int i = 0; i < 60; ++i) {
    EncodedSample s;
    const int n = 5 + static_cast<int>(gen.below(6));
    for (int t = 0; t < n; ++t) {
      s.token_ids.push_back(2 + static_cast<int>(gen.below(18)));
    }
    s.e1 = Span{0, 0};
    s.e2 = Span{n - 1, n - 1};
    s.label = static_cast<int>(gen.below(4));
    corpus.push_back(std::move(s));
  }

  const ActiveSet got = filter_corpus(teacher, corpus, 0, 2, 3);
  std::vector<std::vector<double>> probs;
  std::vector<int> labels;
  for (const auto& s : corpus) {
    probs.push_back(predict_probs(teacher, s));
    labels.push_back(s.label);
  }
  const ActiveSet want = filter_probs(probs, labels, 4, 0, 2, 3);
  CHECK(got.mask == want.mask);
  CHECK(got.filtered_none == want.filtered_none);
  CHECK(got.filtered_valid == want.filtered_valid);
  CHECK(got.epoch == 3);

  // the audit-trail variant agrees as well
  std::vector<RelationSample> raw(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) raw[i].id = std::to_string(i);
  const auto decisions = filter_report(teacher, raw, corpus, 0, 2);
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    CHECK(decisions[i].kept == static_cast<bool>(want.mask[i]));
    CHECK(decisions[i].teacher_top.size() == 2);
  }
}

TEST_CASE("per-relation tallies add up") {
  Rng rng(103);
  const int c = 6;
  std::vector<std::vector<double>> probs;
  std::vector<int> labels;
  for (int i = 0; i < 500; ++i) {
    probs.push_back(random_simplex(rng, c));
    labels.push_back(static_cast<int>(rng.below(c)));
  }
  const ActiveSet a = filter_probs(probs, labels, c, 0, 2, 1);
  long long sum = 0;
  for (long long v : a.filtered_per_relation) sum += v;
  CHECK(sum == a.filtered_none + a.filtered_valid);
  CHECK(a.active_count() + static_cast<std::size_t>(sum) == probs.size());
}
